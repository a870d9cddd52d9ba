//! P1 finite elements for the weighted Steklov problem on planar domains,
//! reduced to the boundary by a Schur complement.
//!
//! The weak form is `∫ e^{−φ} ∇u·∇v dx = σ ∫_{∂Ω} e^{−φ} ρ u v ds`. In the
//! Poincaré disk the planar Dirichlet energy is conformally invariant, so
//! only the boundary mass picks up the conformal factor `ρ = 2/(1 − |x|²)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::geometry::{RadialWeight, SpaceForm};
use crate::mesh2d::{check_planar_form, planar_metric, TriMesh};
use crate::quadrature::{GAUSS2_UNIT, TRI3_MIDPOINT};
use crate::sparse::{CsrMatrix, SparseCholesky};
use crate::spectrum::{SpectrumMetadata, SteklovSpectrum};
use crate::{Error, Result};

/// How the weight factor is sampled inside each element.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightQuadrature {
    #[default]
    Centroid,
    EdgeMidpoints,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub weight_quadrature: WeightQuadrature,
}

/// Stiffness over the active degrees of freedom and boundary mass over the
/// boundary ones.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix,
    /// `nb × nb`, indexed like `boundary_index`.
    pub boundary_mass: CsrMatrix,
    /// Boundary-local index → mesh node.
    pub boundary_index: Vec<usize>,
    /// Degree of freedom → mesh node.
    pub dofs: Vec<usize>,
    /// Degree of freedom of each boundary-local index.
    pub boundary_dofs: Vec<usize>,
}

impl AssembledSystem {
    /// Builds the system from node-level triplets, keeping nodes with
    /// `active[i]`. `boundary` lists mesh nodes in trace order.
    pub(crate) fn from_node_triplets(
        n_nodes: usize,
        stiffness: Vec<(usize, usize, f64)>,
        mass: Vec<(usize, usize, f64)>,
        boundary: Vec<usize>,
        active: &[bool],
    ) -> Result<Self> {
        let mut dof_of = vec![usize::MAX; n_nodes];
        let mut dofs = Vec::new();
        for (i, _) in active.iter().enumerate().filter(|(_, a)| **a) {
            dof_of[i] = dofs.len();
            dofs.push(i);
        }
        let mut local = vec![usize::MAX; n_nodes];
        for (k, &b) in boundary.iter().enumerate() {
            if dof_of[b] == usize::MAX {
                return Err(Error::InvalidArgument(format!("boundary node {b} is not an active unknown")));
            }
            local[b] = k;
        }
        let k_trip = stiffness
            .into_iter()
            .filter(|&(i, j, _)| dof_of[i] != usize::MAX && dof_of[j] != usize::MAX)
            .map(|(i, j, v)| (dof_of[i], dof_of[j], v))
            .collect();
        let m_trip = mass
            .into_iter()
            .filter(|&(i, j, _)| local[i] != usize::MAX && local[j] != usize::MAX)
            .map(|(i, j, v)| (local[i], local[j], v))
            .collect();
        let boundary_dofs = boundary.iter().map(|&b| dof_of[b]).collect();
        Ok(Self {
            stiffness: CsrMatrix::from_triplets(dofs.len(), k_trip),
            boundary_mass: CsrMatrix::from_triplets(boundary.len(), m_trip),
            boundary_index: boundary,
            dofs,
            boundary_dofs,
        })
    }

    pub fn boundary_len(&self) -> usize {
        self.boundary_index.len()
    }

    /// Degrees of freedom that are not on the boundary, ascending.
    pub fn interior_dofs(&self) -> Vec<usize> {
        let mut on_b = vec![false; self.stiffness.n];
        for &d in &self.boundary_dofs {
            on_b[d] = true;
        }
        (0..self.stiffness.n).filter(|&d| !on_b[d]).collect()
    }
}

/// Area and barycentric gradients of a linear triangle.
#[inline]
pub(crate) fn p1_gradients(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = |j: usize, k: usize| [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a];
    (0.5 * two_a, [g(1, 2), g(2, 0), g(0, 1)])
}

#[inline]
pub(crate) fn bary_point(p: [[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
    ]
}

/// Assembles with default options.
pub fn assemble(mesh: &TriMesh, form: &SpaceForm, w: &RadialWeight) -> Result<AssembledSystem> {
    assemble_with(mesh, form, w, AssembleOptions::default())
}

pub fn assemble_with(mesh: &TriMesh, form: &SpaceForm, w: &RadialWeight, opts: AssembleOptions) -> Result<AssembledSystem> {
    check_planar_form(mesh, form)?;
    mesh.check_triangles()?;
    let cv = form.curvature;
    let weight_at = |x: [f64; 2]| w.density(planar_metric(cv, x).0);

    let mut k_trip = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let p = tri.map(|i| mesh.vertices[i]);
        let (area, g) = p1_gradients(p);
        let wbar = match opts.weight_quadrature {
            WeightQuadrature::Centroid => weight_at(bary_point(p, [1.0 / 3.0; 3])),
            WeightQuadrature::EdgeMidpoints => TRI3_MIDPOINT.iter().map(|(l, wt)| wt * weight_at(bary_point(p, *l))).sum(),
        };
        for a in 0..3 {
            for b in 0..3 {
                let v = wbar * area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                k_trip.push((tri[a], tri[b], v));
            }
        }
    }

    let mut m_trip = Vec::with_capacity(4 * mesh.boundary_edges.len());
    for &[a, b] in &mesh.boundary_edges {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        if len <= 0.0 {
            return Err(Error::InvalidDomain(format!("zero-length boundary edge {a}-{b}")));
        }
        let mut e = [[0.0; 2]; 2];
        for &s in &GAUSS2_UNIT {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let (t, rho) = planar_metric(cv, x);
            let f = 0.5 * len * w.density(t) * rho;
            let phi = [1.0 - s, s];
            for i in 0..2 {
                for j in 0..2 {
                    e[i][j] += f * phi[i] * phi[j];
                }
            }
        }
        let nodes = [a, b];
        for i in 0..2 {
            for j in 0..2 {
                m_trip.push((nodes[i], nodes[j], e[i][j]));
            }
        }
    }
    let n = mesh.vertices.len();
    AssembledSystem::from_node_triplets(n, k_trip, m_trip, mesh.boundary_nodes(), &vec![true; n])
}

/// Dense boundary pencil `S u = σ M u`.
#[derive(Debug, Clone)]
pub struct BoundaryPencil {
    pub schur: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub boundary_index: Vec<usize>,
    /// `max|S − Sᵀ| / max|S|` before symmetrization.
    pub symmetry_residual: f64,
}

impl BoundaryPencil {
    /// `max|S·1| / max|S|`.
    pub fn row_sum_residual(&self) -> f64 {
        let scale = self.schur.amax();
        self.schur.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max) / scale
    }
}

/// Schur complement of the interior block: `S = K_bb − K_bi K_ii⁻¹ K_ib`.
pub fn dtn_reduce(sys: &AssembledSystem) -> Result<BoundaryPencil> {
    let k = &sys.stiffness;
    let nb = sys.boundary_len();
    let interior = sys.interior_dofs();
    let ni = interior.len();

    let mut s = DMatrix::<f64>::zeros(nb, nb);
    for (a, &da) in sys.boundary_dofs.iter().enumerate() {
        for (b, &db) in sys.boundary_dofs.iter().enumerate() {
            s[(a, b)] = k.get(da, db);
        }
    }

    if ni > 0 {
        let kii = k.submatrix(&interior);
        let chol = SparseCholesky::new(&kii)?;
        // interior dof → permuted interior position
        let mut pos = vec![usize::MAX; k.n];
        for (new, &old) in chol.perm.perm.iter().enumerate() {
            pos[interior[old]] = new;
        }
        let mut y = DMatrix::<f64>::zeros(ni, nb);
        for (b, &db) in sys.boundary_dofs.iter().enumerate() {
            let mut col = y.column_mut(b);
            let col = col.as_mut_slice();
            let mut start = ni;
            for (j, v) in k.row(db) {
                if pos[j] != usize::MAX {
                    col[pos[j]] = v;
                    start = start.min(pos[j]);
                }
            }
            if start < ni {
                chol.factor.forward_in_place(col, start);
            }
        }
        s -= y.tr_mul(&y);
    }

    let scale = s.amax();
    if !(scale > 0.0) {
        return Err(Error::Factorization("Schur complement vanishes".into()));
    }
    let symmetry_residual = (&s - s.transpose()).amax() / scale;
    let sym = (&s + s.transpose()) * 0.5;

    let mut mass = DMatrix::<f64>::zeros(nb, nb);
    for a in 0..nb {
        for (b, v) in sys.boundary_mass.row(a) {
            mass[(a, b)] = v;
        }
    }
    Ok(BoundaryPencil {
        schur: sym,
        mass,
        boundary_index: sys.boundary_index.clone(),
        symmetry_residual,
    })
}

/// `k + 1` smallest eigenpairs of `S u = σ M u`, ascending, `M`-orthonormal.
pub fn solve_spectrum(pencil: &BoundaryPencil, k: usize, metadata: SpectrumMetadata) -> Result<SteklovSpectrum> {
    let nb = pencil.schur.nrows();
    if k + 1 > nb {
        return Err(Error::InvalidArgument(format!("{} eigenvalues requested from {nb} boundary unknowns", k + 1)));
    }
    let (values, vectors) = pencil_eigen(&pencil.schur, &pencil.mass, k + 1)?;

    let mut identities = BTreeMap::new();
    let s1 = values.get(1).copied().unwrap_or(f64::NAN);
    identities.insert("zero_mode_ratio".into(), values[0] / s1);
    let x = DMatrix::from_columns(&vectors.iter().map(|v| DVector::from_column_slice(v)).collect::<Vec<_>>());
    let gram = x.tr_mul(&(&pencil.mass * &x)) - DMatrix::identity(k + 1, k + 1);
    identities.insert("orthonormality_residual".into(), gram.amax());
    identities.insert("zero_mode_constant_deviation".into(), constant_deviation(&vectors[0]));
    identities.insert("schur_row_sum_residual".into(), pencil.row_sum_residual());
    identities.insert("schur_symmetry_residual".into(), pencil.symmetry_residual);

    Ok(SteklovSpectrum {
        eigenvalues: values,
        boundary_eigenvectors: vectors,
        modes: None,
        metadata,
        identities,
    })
}

/// `(max − min) / max|v|`.
pub(crate) fn constant_deviation(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let m = v.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    (hi - lo) / m
}

/// Smallest `count` eigenpairs of a symmetric-definite pencil by Cholesky
/// reduction to a standard problem.
pub(crate) fn pencil_eigen(s: &DMatrix<f64>, m: &DMatrix<f64>, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("boundary mass is not positive definite".into()))?;
    let l = chol.l();
    let ls = l
        .solve_lower_triangular(s)
        .ok_or_else(|| Error::Factorization("singular boundary mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&ls.transpose())
        .ok_or_else(|| Error::Factorization("singular boundary mass factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    for &i in order.iter().take(count) {
        values.push(eig.eigenvalues[i]);
        let y = eig.eigenvectors.column(i).into_owned();
        let mut x = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Factorization("singular boundary mass factor".into()))?;
        // fix the sign so output is deterministic
        let pivot = x.iter().copied().fold(0.0, |p: f64, v| if v.abs() > p.abs() { v } else { p });
        if pivot < 0.0 {
            x.neg_mut();
        }
        vectors.push(x.as_slice().to_vec());
    }
    Ok((values, vectors))
}

/// Assemble, reduce and solve on one mesh.
pub fn mesh_spectrum(mesh: &TriMesh, form: &SpaceForm, w: &RadialWeight, k: usize, domain: &str) -> Result<SteklovSpectrum> {
    mesh_spectrum_with(mesh, form, w, k, domain, AssembleOptions::default())
}

pub fn mesh_spectrum_with(
    mesh: &TriMesh,
    form: &SpaceForm,
    w: &RadialWeight,
    k: usize,
    domain: &str,
    opts: AssembleOptions,
) -> Result<SteklovSpectrum> {
    let sys = assemble_with(mesh, form, w, opts)?;
    let pencil = dtn_reduce(&sys)?;
    let meta = SpectrumMetadata {
        domain: domain.to_string(),
        weight: w.label(),
        curvature: form.curvature,
        dim: 2,
        h: Some(mesh.h),
        boundary_nodes: sys.boundary_len(),
    };
    solve_spectrum(&pencil, k, meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Curvature;
    use crate::mesh2d::{generate_mesh, mesh_measures, Domain2D};
    use crate::radial::{sigma1_ball, RadialConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(r: f64, rings: usize, sectors: usize) -> TriMesh {
        generate_mesh(&Domain2D::disk(r).unwrap(), rings, sectors).unwrap()
    }

    fn e2() -> SpaceForm {
        SpaceForm::euclidean(2)
    }

    #[test]
    fn constant_weight_scales_stiffness() {
        let m = disk(1.0, 4, 16);
        let k0 = assemble(&m, &e2(), &RadialWeight::zero()).unwrap().stiffness;
        let k1 = assemble(&m, &e2(), &RadialWeight::Constant { c: 0.7 }).unwrap().stiffness;
        let f = (-0.7f64).exp();
        assert_eq!(k0.col_idx, k1.col_idx);
        for (a, b) in k0.values.iter().zip(&k1.values) {
            assert!((a * f - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn constants_are_in_the_kernel() {
        let m = disk(1.0, 4, 16);
        let sys = assemble(&m, &e2(), &RadialWeight::Linear { a: 0.8 }).unwrap();
        let r = sys.stiffness.mul_vec(&vec![1.0; sys.stiffness.n]);
        let scale = sys.stiffness.max_abs();
        assert!(r.iter().all(|v| v.abs() <= 1e-13 * scale));
        assert!(sys.stiffness.asymmetry() == 0.0);
    }

    #[test]
    fn boundary_mass_totals_weighted_length() {
        let m = disk(0.6, 4, 24);
        for (form, w) in [
            (e2(), RadialWeight::Quadratic { a: 0.3, b: 0.5 }),
            (SpaceForm::hyperbolic(2), RadialWeight::Linear { a: 0.4 }),
        ] {
            let sys = assemble(&m, &form, &w).unwrap();
            let total: f64 = sys.boundary_mass.values.iter().sum();
            let (_, len) = mesh_measures(&m, &form, &w).unwrap();
            assert!((total - len).abs() <= 1e-12 * len, "{total} vs {len}");
        }
    }

    #[test]
    fn schur_identities() {
        let m = disk(1.0, 4, 32);
        let sys = assemble(&m, &e2(), &RadialWeight::Linear { a: 0.5 }).unwrap();
        let p = dtn_reduce(&sys).unwrap();
        assert!(p.row_sum_residual() <= 1e-10);
        assert!(p.symmetry_residual <= 1e-12);
        assert_eq!(p.schur, p.schur.transpose());
    }

    /// Boundary Rayleigh quotient against an explicit dense harmonic extension.
    #[test]
    fn schur_equals_minimum_energy_extension() {
        let m = disk(1.0, 3, 16);
        let sys = assemble(&m, &e2(), &RadialWeight::Quadratic { a: 0.2, b: 0.3 }).unwrap();
        let p = dtn_reduce(&sys).unwrap();
        let n = sys.stiffness.n;
        let mut kd = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for (j, v) in sys.stiffness.row(i) {
                kd[(i, j)] = v;
            }
        }
        let interior = sys.interior_dofs();
        let kii = kd.select_rows(&interior).select_columns(&interior);
        let kib = kd.select_rows(&interior).select_columns(&sys.boundary_dofs);
        let lu = kii.lu();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let ub = DVector::from_fn(sys.boundary_len(), |_, _| rng.gen_range(-1.0..1.0));
            let ui = lu.solve(&(-(&kib * &ub))).unwrap();
            let mut u = DVector::zeros(n);
            for (k, &d) in interior.iter().enumerate() {
                u[d] = ui[k];
            }
            for (k, &d) in sys.boundary_dofs.iter().enumerate() {
                u[d] = ub[k];
            }
            let energy = u.dot(&(&kd * &u));
            let schur = ub.dot(&(&p.schur * &ub));
            assert!((energy - schur).abs() <= 1e-10 * energy.abs());
        }
    }

    #[test]
    fn disk_spectrum_and_identities() {
        let m = disk(1.0, 8, 64).refine();
        let s = mesh_spectrum(&m, &e2(), &RadialWeight::zero(), 5, "disk").unwrap();
        let expect = [1.0, 1.0, 2.0, 2.0, 3.0];
        for (k, e) in expect.iter().enumerate() {
            let v = s.sigma(k + 1).unwrap();
            assert!((v - e).abs() <= 0.02 * e, "sigma{} = {v}", k + 1);
        }
        assert!(s.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
        assert!(s.identities["zero_mode_ratio"].abs() <= 1e-8);
        assert!(s.identities["orthonormality_residual"] <= 1e-10);
        assert!(s.identities["zero_mode_constant_deviation"] <= 1e-6);
    }

    #[test]
    fn weight_shift_leaves_spectrum() {
        let m = disk(1.0, 4, 32);
        let a = mesh_spectrum(&m, &e2(), &RadialWeight::Linear { a: 0.5 }, 4, "disk").unwrap();
        let b = mesh_spectrum(&m, &e2(), &RadialWeight::Quadratic { a: 0.5, b: 0.0 }, 4, "disk").unwrap();
        let shifted = RadialWeight::Tabulated(crate::geometry::WeightTable::new(vec![0.0, 1.0, 2.0], vec![3.0, 2.5, 2.0]).unwrap());
        let c = mesh_spectrum(&m, &e2(), &shifted, 4, "disk").unwrap();
        for k in 1..=4 {
            let (x, y, z) = (a.eigenvalues[k], b.eigenvalues[k], c.eigenvalues[k]);
            assert!((x - y).abs() <= 1e-12 * x);
            assert!((x - z).abs() <= 1e-12 * x, "{x} vs {z}");
        }
    }

    #[test]
    fn radial_oracle_for_linear_weight() {
        let w = RadialWeight::Linear { a: 0.5 };
        let ball = sigma1_ball(&e2(), &w, 1.0, &RadialConfig::default()).unwrap().sigma;
        let m = disk(1.0, 8, 64).refine();
        let s = mesh_spectrum(&m, &e2(), &w, 2, "disk").unwrap();
        assert!((s.eigenvalues[1] - ball).abs() <= 0.01 * ball, "{} vs {ball}", s.eigenvalues[1]);
    }

    #[test]
    fn hyperbolic_disk_matches_closed_form() {
        let r = 0.5f64.tanh();
        let m = disk(r, 8, 64).refine();
        let s = mesh_spectrum(&m, &SpaceForm::hyperbolic(2), &RadialWeight::zero(), 2, "hdisk").unwrap();
        let exact = 1.0 / 1.0f64.sinh();
        assert!((s.eigenvalues[1] - exact).abs() <= 0.01 * exact);
        assert_eq!(s.metadata.curvature, Curvature::Hyperbolic);
    }

    #[test]
    fn disk_error_drops_under_refinement() {
        let m0 = disk(1.0, 4, 32);
        let m1 = m0.refine();
        let e0 = (mesh_spectrum(&m0, &e2(), &RadialWeight::zero(), 1, "d").unwrap().eigenvalues[1] - 1.0).abs();
        let e1 = (mesh_spectrum(&m1, &e2(), &RadialWeight::zero(), 1, "d").unwrap().eigenvalues[1] - 1.0).abs();
        assert!(e0 >= 3.0 * e1, "{e0} {e1}");
    }

    #[test]
    fn rotation_leaves_disk_spectrum() {
        let m = disk(1.0, 4, 32);
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let mut r = m.clone();
        for v in &mut r.vertices {
            *v = [c * v[0] - s * v[1], s * v[0] + c * v[1]];
        }
        let w = RadialWeight::Linear { a: 0.4 };
        let a = mesh_spectrum(&m, &e2(), &w, 4, "d").unwrap();
        let b = mesh_spectrum(&r, &e2(), &w, 4, "d").unwrap();
        for k in 1..=4 {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() <= 1e-9 * a.eigenvalues[k]);
        }
    }

    #[test]
    fn too_many_eigenvalues_is_an_error() {
        let m = disk(1.0, 2, 8);
        assert!(matches!(
            mesh_spectrum(&m, &e2(), &RadialWeight::zero(), 8, "d"),
            Err(Error::InvalidArgument(_))
        ));
    }
}
