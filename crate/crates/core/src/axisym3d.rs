//! Axisymmetric domains in ℝ³ by azimuthal Fourier separation.
//!
//! With `u = U(r, z) e^{imθ}` the weighted energy and boundary mass become
//! meridian integrals
//!
//! ```text
//! K⁽ᵐ⁾ = ∫ e^{−φ} (∇U·∇V + m² U V / r²) r dr dz,   M⁽ᵐ⁾ = ∫_outer e^{−φ} U V r ds,
//! ```
//!
//! each discretized with P1 elements on a half mesh of the meridian
//! section, `x = r ≥ 0` and `y = z`. Common factors of `2π` cancel in the
//! eigenvalue and are dropped.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::RadialWeight;
use crate::mesh2d::{generate_half_mesh, BoundaryCurve, MeshOptions, TriMesh};
use crate::quadrature::{GAUSS2_UNIT, TRI6};
use crate::spectrum::{SpectrumMetadata, SteklovSpectrum};
use crate::steklov2d::{bary_point, dtn_reduce, p1_gradients, solve_spectrum, AssembledSystem};
use crate::{Curvature, Error, Result};

/// Default meridian mesh `(rings, sectors)`.
pub const DEFAULT_HALF_MESH: (usize, usize) = (8, 32);

/// Azimuthal modes solved by default.
pub const DEFAULT_MODES: [usize; 3] = [0, 1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeridianKind {
    Ball { r: f64 },
    /// `(r/a)² + (z/c)² = 1`.
    Spheroid { a: f64, c: f64 },
    /// Boundary radius `R (1 + ε cos kψ)` with `ψ` the angle from the z-axis.
    PerturbedBall { r: f64, eps: f64, k: u32 },
}

impl MeridianKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MeridianKind::Ball { r } => r > 0.0 && r.is_finite(),
            MeridianKind::Spheroid { a, c } => a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite(),
            MeridianKind::PerturbedBall { r, eps, k } => r > 0.0 && k >= 1 && eps.abs() * f64::from(k) < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDomain(format!("{self:?}")))
        }
    }

    /// Polar description in the meridian plane, angle measured from the r-axis.
    pub fn curve(&self) -> BoundaryCurve {
        match *self {
            MeridianKind::Ball { r } => BoundaryCurve::Circle { r },
            MeridianKind::Spheroid { a, c } => BoundaryCurve::Ellipse { a, b: c },
            MeridianKind::PerturbedBall { r, eps, k } => BoundaryCurve::Cosine {
                r,
                eps,
                k,
                phase: -f64::from(k) * FRAC_PI_2,
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeridianKind::Ball { r } => format!("ball({r})"),
            MeridianKind::Spheroid { a, c } => format!("spheroid({a},{c})"),
            MeridianKind::PerturbedBall { r, eps, k } => format!("perturbed_ball({r},{eps},{k})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeridianDomain {
    pub kind: MeridianKind,
    pub mesh: TriMesh,
}

impl MeridianDomain {
    pub fn new(kind: MeridianKind, rings: usize, sectors: usize) -> Result<Self> {
        kind.validate()?;
        let mesh = generate_half_mesh(&kind.curve(), rings, sectors, MeshOptions::default())?;
        Ok(Self { kind, mesh })
    }

    pub fn with_default_mesh(kind: MeridianKind) -> Result<Self> {
        Self::new(kind, DEFAULT_HALF_MESH.0, DEFAULT_HALF_MESH.1)
    }

    pub fn refine(&self) -> Self {
        Self {
            kind: self.kind.clone(),
            mesh: self.mesh.refine(),
        }
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    /// Nodes on the curved boundary, pole to pole.
    pub fn outer_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (e, _) in self.mesh.boundary_edges.iter().zip(&self.mesh.curved).filter(|(_, c)| **c) {
            if out.is_empty() {
                out.push(e[0]);
            }
            out.push(e[1]);
        }
        out
    }

    pub fn is_axis_node(&self, i: usize) -> bool {
        self.mesh.vertices[i][0] == 0.0
    }
}

fn weight_at(w: &RadialWeight, x: [f64; 2]) -> f64 {
    w.density(x[0].hypot(x[1]))
}

/// Mode-`m` system. For `m ≥ 1` the axis nodes, poles included, carry the
/// essential condition `U = 0` and are removed.
pub fn assemble_mode(dom: &MeridianDomain, w: &RadialWeight, m: usize) -> Result<AssembledSystem> {
    let mesh = &dom.mesh;
    mesh.check_triangles()?;
    let m2 = (m * m) as f64;
    let mut k_trip = Vec::with_capacity(9 * mesh.triangles.len());
    for tri in &mesh.triangles {
        let p = tri.map(|i| mesh.vertices[i]);
        let (area, g) = p1_gradients(p);
        let mut e = [[0.0; 3]; 3];
        for (l, wt) in &TRI6 {
            let x = bary_point(p, *l);
            let r = x[0];
            if m > 0 && r <= 0.0 {
                return Err(Error::InvalidArgument(format!("quadrature point on the axis at z = {}", x[1])));
            }
            let f = wt * area * weight_at(w, x);
            for a in 0..3 {
                for b in 0..3 {
                    let grad = g[a][0] * g[b][0] + g[a][1] * g[b][1];
                    let mut v = grad * r;
                    if m > 0 {
                        v += m2 * l[a] * l[b] / r;
                    }
                    e[a][b] += f * v;
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                k_trip.push((tri[a], tri[b], e[a][b]));
            }
        }
    }

    let mut m_trip = Vec::new();
    for (&[a, b], _) in mesh.boundary_edges.iter().zip(&mesh.curved).filter(|(_, c)| **c) {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        let mut e = [[0.0; 2]; 2];
        for &s in &GAUSS2_UNIT {
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let f = 0.5 * len * weight_at(w, x) * x[0];
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
    let active: Vec<bool> = (0..n).map(|i| m == 0 || !dom.is_axis_node(i)).collect();
    let boundary: Vec<usize> = dom.outer_nodes().into_iter().filter(|&i| active[i]).collect();
    AssembledSystem::from_node_triplets(n, k_trip, m_trip, boundary, &active)
}

/// Lowest `count` eigenvalues of one azimuthal mode (the zero mode is the
/// first entry for `m = 0`).
pub fn mode_eigenvalues(dom: &MeridianDomain, w: &RadialWeight, m: usize, count: usize) -> Result<SteklovSpectrum> {
    let sys = assemble_mode(dom, w, m)?;
    let pencil = dtn_reduce(&sys)?;
    let meta = metadata(dom, w, sys.boundary_len());
    let mut s = solve_spectrum(&pencil, count.saturating_sub(1), meta)?;
    if m > 0 {
        // no zero mode here: these identities do not apply
        s.identities.remove("zero_mode_ratio");
        s.identities.remove("zero_mode_constant_deviation");
        s.identities.remove("schur_row_sum_residual");
    }
    Ok(s)
}

fn metadata(dom: &MeridianDomain, w: &RadialWeight, boundary_nodes: usize) -> SpectrumMetadata {
    SpectrumMetadata {
        domain: dom.label(),
        weight: w.label(),
        curvature: Curvature::Euclidean,
        dim: 3,
        h: Some(dom.mesh.h),
        boundary_nodes,
    }
}

/// Multiplicity of a mode in the three-dimensional spectrum.
pub fn mode_multiplicity(m: usize) -> usize {
    if m == 0 {
        1
    } else {
        2
    }
}

/// Sorted union of per-mode eigenvalues with multiplicity; ties keep mode
/// order. Returns `(values, modes)`.
pub fn merge_modes(per_mode: &[(usize, Vec<f64>)]) -> (Vec<f64>, Vec<usize>) {
    let mut all: Vec<(f64, usize, usize)> = per_mode
        .iter()
        .flat_map(|(m, vals)| {
            vals.iter()
                .flat_map(move |&v| (0..mode_multiplicity(*m)).map(move |copy| (v, *m, copy)))
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    all.into_iter().map(|(v, m, _)| (v, m)).unzip()
}

/// Global spectrum from the listed modes, `k` eigenvalues per mode beyond
/// the zero mode.
pub fn solve_axisym_spectrum(dom: &MeridianDomain, w: &RadialWeight, modes: &[usize], k: usize) -> Result<SteklovSpectrum> {
    if !modes.contains(&0) {
        return Err(Error::InvalidArgument("mode 0 is required for the zero mode".into()));
    }
    let solved: Vec<(usize, SteklovSpectrum)> = modes
        .par_iter()
        .map(|&m| {
            let count = if m == 0 { k + 1 } else { k };
            mode_eigenvalues(dom, w, m, count).map(|s| (m, s))
        })
        .collect::<Result<_>>()?;
    let mut identities = BTreeMap::new();
    for (m, s) in &solved {
        for (name, v) in &s.identities {
            identities.insert(format!("mode{m}_{name}"), *v);
        }
    }
    let per_mode: Vec<(usize, Vec<f64>)> = solved.iter().map(|(m, s)| (*m, s.eigenvalues.clone())).collect();
    let (eigenvalues, mode_list) = merge_modes(&per_mode);
    Ok(SteklovSpectrum {
        eigenvalues,
        boundary_eigenvectors: Vec::new(),
        modes: Some(mode_list),
        metadata: metadata(dom, w, dom.outer_nodes().len()),
        identities,
    })
}

/// Weighted volume and weighted boundary area of the solid of revolution.
pub fn meridian_measures(dom: &MeridianDomain, w: &RadialWeight) -> (f64, f64) {
    let mesh = &dom.mesh;
    let mut vol = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.vertices[i]);
        let a = mesh.signed_area(k);
        vol += a * TRI6.iter().map(|(l, wt)| {
            let x = bary_point(p, *l);
            wt * weight_at(w, x) * x[0]
        }).sum::<f64>();
    }
    let mut area = 0.0;
    for (&[a, b], _) in mesh.boundary_edges.iter().zip(&mesh.curved).filter(|(_, c)| **c) {
        let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        area += GAUSS2_UNIT
            .iter()
            .map(|&s| {
                let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                0.5 * len * weight_at(w, x) * x[0]
            })
            .sum::<f64>();
    }
    (2.0 * PI * vol, 2.0 * PI * area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ball_boundary_weighted_measure, ball_weighted_volume, SpaceForm};
    use crate::radial::{sigma1_ball, RadialConfig};

    fn ball() -> MeridianDomain {
        MeridianDomain::with_default_mesh(MeridianKind::Ball { r: 1.0 }).unwrap()
    }

    #[test]
    fn axis_and_outer_nodes() {
        let d = ball().refine();
        let outer = d.outer_nodes();
        assert_eq!(outer.len(), 2 * DEFAULT_HALF_MESH.1 + 1);
        assert!(d.is_axis_node(outer[0]) && d.is_axis_node(*outer.last().unwrap()));
        assert!(d.mesh.vertices.iter().all(|v| v[0] >= 0.0));
    }

    #[test]
    fn mode_zero_kernel_and_scaling() {
        let d = ball();
        let sys = assemble_mode(&d, &RadialWeight::Linear { a: 0.3 }, 0).unwrap();
        let r = sys.stiffness.mul_vec(&vec![1.0; sys.stiffness.n]);
        let scale = sys.stiffness.max_abs();
        assert!(r.iter().all(|v| v.abs() <= 1e-13 * scale));

        for m in 0..3 {
            let k0 = assemble_mode(&d, &RadialWeight::zero(), m).unwrap().stiffness;
            let k1 = assemble_mode(&d, &RadialWeight::Constant { c: -0.4 }, m).unwrap().stiffness;
            let f = 0.4f64.exp();
            let scale = k1.max_abs();
            for (a, b) in k0.values.iter().zip(&k1.values) {
                assert!((a * f - b).abs() <= 1e-14 * scale);
            }
        }
    }

    #[test]
    fn mode_one_drops_axis() {
        let d = ball();
        let s0 = assemble_mode(&d, &RadialWeight::zero(), 0).unwrap();
        let s1 = assemble_mode(&d, &RadialWeight::zero(), 1).unwrap();
        let axis = (0..d.mesh.vertices.len()).filter(|&i| d.is_axis_node(i)).count();
        assert_eq!(s0.stiffness.n - s1.stiffness.n, axis);
        assert_eq!(s0.boundary_len() - s1.boundary_len(), 2);
    }

    #[test]
    fn mass_totals_sphere_area() {
        let w = RadialWeight::Quadratic { a: 0.2, b: 0.3 };
        let exact = ball_boundary_weighted_measure(&SpaceForm::euclidean(3), &w, 1.0).unwrap();
        let mut errs = Vec::new();
        let mut d = ball();
        for _ in 0..2 {
            let sys = assemble_mode(&d, &w, 0).unwrap();
            let total: f64 = sys.boundary_mass.values.iter().sum();
            errs.push((total * 2.0 * PI - exact).abs() / exact);
            d = d.refine();
        }
        assert!(errs[0] < 5e-3 && errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn measures_match_ball() {
        let w = RadialWeight::Linear { a: 0.5 };
        let d = ball().refine();
        let (v, a) = meridian_measures(&d, &w);
        let e3 = SpaceForm::euclidean(3);
        let v0 = ball_weighted_volume(&e3, &w, 1.0).unwrap();
        let a0 = ball_boundary_weighted_measure(&e3, &w, 1.0).unwrap();
        assert!((v - v0).abs() < 2e-3 * v0 && (a - a0).abs() < 2e-3 * a0);
    }

    #[test]
    fn unit_ball_triple() {
        let d = ball().refine();
        let s = solve_axisym_spectrum(&d, &RadialWeight::zero(), &DEFAULT_MODES, 2).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-8);
        for k in 1..=3 {
            assert!((s.eigenvalues[k] - 1.0).abs() < 0.015, "sigma{k} = {}", s.eigenvalues[k]);
        }
        let mut m: Vec<usize> = s.modes.as_ref().unwrap()[1..=3].to_vec();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 1]);
    }

    #[test]
    fn weighted_ball_matches_radial() {
        let w = RadialWeight::Linear { a: 0.5 };
        let exact = sigma1_ball(&SpaceForm::euclidean(3), &w, 1.0, &RadialConfig::default()).unwrap().sigma;
        let d = ball().refine();
        let s = solve_axisym_spectrum(&d, &w, &DEFAULT_MODES, 2).unwrap();
        for k in 1..=3 {
            assert!((s.eigenvalues[k] - exact).abs() < 0.015 * exact, "{} vs {exact}", s.eigenvalues[k]);
        }
    }

    #[test]
    fn degenerate_spheroid_is_the_ball() {
        let a = solve_axisym_spectrum(&ball(), &RadialWeight::zero(), &DEFAULT_MODES, 2).unwrap();
        let sph = MeridianDomain::with_default_mesh(MeridianKind::Spheroid { a: 1.0, c: 1.0 }).unwrap();
        let b = solve_axisym_spectrum(&sph, &RadialWeight::zero(), &DEFAULT_MODES, 2).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
    }

    #[test]
    fn reflection_leaves_spheroid_spectrum() {
        let d = MeridianDomain::with_default_mesh(MeridianKind::Spheroid { a: 1.3, c: 0.7 }).unwrap();
        let mut r = d.clone();
        for v in &mut r.mesh.vertices {
            v[1] = -v[1];
        }
        for t in &mut r.mesh.triangles {
            t.swap(1, 2);
        }
        r.mesh.boundary_edges = d.mesh.boundary_edges.iter().rev().map(|e| [e[1], e[0]]).collect();
        r.mesh.curved = d.mesh.curved.iter().rev().copied().collect();
        let w = RadialWeight::Linear { a: 0.3 };
        let a = solve_axisym_spectrum(&d, &w, &DEFAULT_MODES, 3).unwrap();
        let b = solve_axisym_spectrum(&r, &w, &DEFAULT_MODES, 3).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues).skip(1) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn mode_one_appears_twice() {
        let s = solve_axisym_spectrum(&ball(), &RadialWeight::Linear { a: 0.4 }, &DEFAULT_MODES, 2).unwrap();
        let modes = s.modes.unwrap();
        let lowest_m1 = modes.iter().position(|&m| m == 1).unwrap();
        assert_eq!(modes[lowest_m1 + 1], 1);
        assert_eq!(s.eigenvalues[lowest_m1], s.eigenvalues[lowest_m1 + 1]);
    }

    #[test]
    fn merge_order() {
        let (v, m) = merge_modes(&[(0, vec![0.0, 2.0]), (1, vec![1.0, 2.0]), (2, vec![2.0])]);
        assert_eq!(v, vec![0.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m, vec![0, 1, 1, 0, 1, 1, 2, 2]);
    }

    #[test]
    fn weight_shift_invariance() {
        let d = ball();
        let a = solve_axisym_spectrum(&d, &RadialWeight::Linear { a: 0.5 }, &DEFAULT_MODES, 2).unwrap();
        let b = solve_axisym_spectrum(
            &d,
            &RadialWeight::Tabulated(crate::geometry::WeightTable::new(vec![0.0, 1.0, 2.0], vec![2.0, 1.5, 1.0]).unwrap()),
            &DEFAULT_MODES,
            2,
        )
        .unwrap();
        for k in 1..a.eigenvalues.len() {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() <= 1e-12 * a.eigenvalues[k]);
        }
    }

    #[test]
    fn invalid_perturbation() {
        assert!(MeridianDomain::new(MeridianKind::PerturbedBall { r: 1.0, eps: 0.3, k: 4 }, 8, 32).is_err());
    }
}
