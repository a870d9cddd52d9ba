//! Isoperimetric reports: weighted-volume matching, extrapolated eigenvalue
//! sums against the matched ball, the proof-chain audit and the
//! rearrangement comparison.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axisym3d::{meridian_measures, merge_modes, mode_eigenvalues, solve_axisym_spectrum, MeridianDomain, MeridianKind, DEFAULT_MODES};
use crate::geometry::{ball_weighted_volume, Curvature, RadialWeight, SpaceForm};
use crate::mesh2d::{generate_mesh, mesh_measures, planar_metric, Domain2D, TriMesh};
use crate::quadrature::{integrate, AdaptiveOptions, GAUSS2_UNIT, TRI3_MIDPOINT, TRI6};
use crate::radial::{ball_sigma_from, check_weight, solve_mode_to, RadialConfig, RadialSolution};
use crate::spectrum::SteklovSpectrum;
use crate::steklov2d::{bary_point, mesh_spectrum};
use crate::{Error, Result};

/// Version tag written in the first line of sweep CSV files.
pub const SWEEP_CSV_VERSION: &str = "# steklov-sweep v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    /// Coarsest planar mesh `(rings, sectors)`.
    pub rings: usize,
    pub sectors: usize,
    /// Coarsest meridian mesh.
    pub half_rings: usize,
    pub half_sectors: usize,
    /// Number of meshes, each a uniform refinement of the previous one.
    pub levels: usize,
    pub modes: Vec<usize>,
    /// Relative floor of the discretization slack.
    pub slack_floor: f64,
    /// Multiplier on extrapolation error estimates.
    pub slack_factor: f64,
    /// Relative floor of the equality tolerance at centered balls.
    pub equality_floor: f64,
    pub radius_rtol: f64,
    pub r_max: f64,
    pub radial: RadialConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            rings: 8,
            sectors: 64,
            half_rings: 8,
            half_sectors: 32,
            levels: 3,
            modes: DEFAULT_MODES.to_vec(),
            slack_floor: 1e-3,
            slack_factor: 3.0,
            equality_floor: 1e-3,
            radius_rtol: 1e-10,
            r_max: 20.0,
            radial: RadialConfig::default(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.levels < 1 {
            return bad("levels must be at least 1");
        }
        if !(self.slack_floor > 0.0 && self.slack_factor > 0.0 && self.equality_floor > 0.0 && self.radius_rtol > 0.0 && self.r_max > 0.0) {
            return bad("tolerances must be positive");
        }
        if !self.modes.contains(&0) {
            return bad("mode list must contain 0");
        }
        self.radial.validate()
    }
}

/// A domain in the plane (Euclidean or Poincaré disk) or a solid of revolution in ℝ³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestDomain {
    Planar(Domain2D),
    Axisym(MeridianKind),
}

impl TestDomain {
    pub fn label(&self) -> String {
        match self {
            TestDomain::Planar(d) => d.label(),
            TestDomain::Axisym(k) => k.label(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestDomain::Planar(_) => 2,
            TestDomain::Axisym(_) => 3,
        }
    }

    /// Ball about the weight origin, up to discretization.
    pub fn is_centered_ball(&self) -> bool {
        match self {
            TestDomain::Planar(d) => d.is_centered_disk(),
            TestDomain::Axisym(MeridianKind::Ball { .. }) => true,
            TestDomain::Axisym(MeridianKind::Spheroid { a, c }) => a == c,
            TestDomain::Axisym(MeridianKind::PerturbedBall { eps, .. }) => *eps == 0.0,
        }
    }

    pub fn check_form(&self, form: &SpaceForm) -> Result<()> {
        if form.dim != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} lives in dimension {}, space form has n = {}",
                self.label(),
                self.dim(),
                form.dim
            )));
        }
        match (self, form.curvature) {
            (_, Curvature::Euclidean) => Ok(()),
            (TestDomain::Planar(d), Curvature::Hyperbolic) => d.check_inside_unit_disk(1e-6),
            _ => Err(Error::InvalidArgument(format!(
                "{} is not supported for {} space",
                self.label(),
                form.curvature.name()
            ))),
        }
    }
}

/// Discretization of a test domain on one level.
#[derive(Debug, Clone)]
enum LevelMesh {
    Planar(TriMesh),
    Meridian(MeridianDomain),
}

impl LevelMesh {
    fn mesh(&self) -> &TriMesh {
        match self {
            LevelMesh::Planar(m) => m,
            LevelMesh::Meridian(d) => &d.mesh,
        }
    }
}

fn level_meshes(dom: &TestDomain, cfg: &VerifyConfig) -> Result<Vec<LevelMesh>> {
    let mut out = Vec::with_capacity(cfg.levels);
    match dom {
        TestDomain::Planar(d) => {
            let mut m = generate_mesh(d, cfg.rings, cfg.sectors)?;
            for _ in 1..cfg.levels {
                let next = m.refine();
                out.push(LevelMesh::Planar(m));
                m = next;
            }
            out.push(LevelMesh::Planar(m));
        }
        TestDomain::Axisym(k) => {
            let mut m = MeridianDomain::new(k.clone(), cfg.half_rings, cfg.half_sectors)?;
            for _ in 1..cfg.levels {
                let next = m.refine();
                out.push(LevelMesh::Meridian(m));
                m = next;
            }
            out.push(LevelMesh::Meridian(m));
        }
    }
    Ok(out)
}

/// Largest distance from the weight origin over the mesh vertices.
fn mesh_t_max(level: &LevelMesh, curvature: Curvature) -> f64 {
    level
        .mesh()
        .vertices
        .iter()
        .map(|&v| match level {
            LevelMesh::Planar(_) => planar_metric(curvature, v).0,
            LevelMesh::Meridian(_) => v[0].hypot(v[1]),
        })
        .fold(0.0, f64::max)
}

fn weighted_volume(level: &LevelMesh, form: &SpaceForm, w: &RadialWeight) -> Result<f64> {
    match level {
        LevelMesh::Planar(m) => Ok(mesh_measures(m, form, w)?.0),
        LevelMesh::Meridian(d) => Ok(meridian_measures(d, w).0),
    }
}

// ---------------------------------------------------------------- radius

/// Radius of the ball about the origin with weighted volume `target`.
pub fn match_radius(form: &SpaceForm, w: &RadialWeight, target: f64) -> Result<f64> {
    let d = VerifyConfig::default();
    match_radius_with(form, w, target, d.r_max, d.radius_rtol)
}

/// Bisection on the increasing map `R ↦ |B_R|_φ` after growing the bracket
/// geometrically from `R = 1`.
pub fn match_radius_with(form: &SpaceForm, w: &RadialWeight, target: f64, r_max: f64, rtol: f64) -> Result<f64> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target volume must be positive, got {target}")));
    }
    let cap = match form.curvature {
        Curvature::Spherical => r_max.min(PI * (1.0 - 1e-12)),
        _ => r_max,
    };
    let vol = |r: f64| ball_weighted_volume(form, w, r);
    let (mut lo, mut hi) = (0.0, 1.0f64.min(cap));
    while vol(hi)? < target {
        if hi >= cap {
            return Err(Error::BracketOverflow { target, r_max: cap });
        }
        lo = hi;
        hi = (2.0 * hi).min(cap);
    }
    for _ in 0..200 {
        if hi - lo <= rtol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if vol(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------- extrapolation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// One value per level, coarse to fine.
    pub levels: Vec<f64>,
    pub limit: f64,
    /// Empirical convergence order, when the last three levels converge monotonically.
    pub order: Option<f64>,
    /// Error bar on `limit`.
    pub estimate: f64,
    pub monotone: bool,
}

/// Richardson extrapolation from the last three levels (`h`, `h/2`, `h/4`).
/// Non-monotone sequences keep the finest value with the largest recent
/// change as error bar.
pub fn richardson(values: &[f64]) -> Extrapolation {
    let n = values.len();
    let last = values[n - 1];
    if n < 3 {
        let est = if n == 2 { (values[1] - values[0]).abs() } else { f64::INFINITY };
        return Extrapolation {
            levels: values.to_vec(),
            limit: last,
            order: None,
            estimate: est,
            monotone: false,
        };
    }
    let (s1, s2, s3) = (values[n - 3], values[n - 2], values[n - 1]);
    let (d1, d2) = (s2 - s1, s3 - s2);
    let ratio = d1 / d2;
    if d2 != 0.0 && ratio > 1.0 {
        let p = ratio.log2();
        let corr = d2 / (ratio - 1.0);
        Extrapolation {
            levels: values.to_vec(),
            limit: s3 + corr,
            order: Some(p),
            estimate: corr.abs(),
            monotone: true,
        }
    } else {
        Extrapolation {
            levels: values.to_vec(),
            limit: s3,
            order: None,
            estimate: d1.abs().max(d2.abs()),
            monotone: d1 == 0.0 && d2 == 0.0,
        }
    }
}

/// Per-eigenvalue extrapolation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub domain: String,
    pub weight: String,
    pub curvature: Curvature,
    pub n: usize,
    /// Longest edge per level.
    pub h: Vec<f64>,
    /// `σ₁, σ₂, …` (the zero mode is omitted).
    pub rows: Vec<Extrapolation>,
    /// Azimuthal mode of each row for solids of revolution.
    pub modes: Option<Vec<usize>>,
    pub warnings: Vec<String>,
}

impl ConvergenceTable {
    pub fn limits(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.limit).collect()
    }

    pub fn to_csv(&self) -> String {
        let levels = self.h.len();
        let mut out = String::from("# steklov-converge v1\nindex,mode");
        for l in 0..levels {
            out.push_str(&format!(",sigma_l{l}"));
        }
        out.push_str(",limit,order,estimate\n");
        for (i, r) in self.rows.iter().enumerate() {
            let mode = self.modes.as_ref().map_or(String::new(), |m| m[i].to_string());
            out.push_str(&format!("{},{mode}", i + 1));
            for v in &r.levels {
                out.push_str(&format!(",{v:.12e}"));
            }
            let order = r.order.map_or(String::new(), |p| format!("{p:.6}"));
            out.push_str(&format!(",{:.12e},{order},{:.6e}\n", r.limit, r.estimate));
        }
        out
    }
}

/// `count` nonzero eigenvalues on every level, extrapolated.
pub fn convergence_study(dom: &TestDomain, form: &SpaceForm, w: &RadialWeight, count: usize, cfg: &VerifyConfig) -> Result<ConvergenceTable> {
    cfg.validate()?;
    dom.check_form(form)?;
    let meshes = level_meshes(dom, cfg)?;
    convergence_on(dom, form, w, count, cfg, &meshes)
}

fn convergence_on(
    dom: &TestDomain,
    form: &SpaceForm,
    w: &RadialWeight,
    count: usize,
    cfg: &VerifyConfig,
    meshes: &[LevelMesh],
) -> Result<ConvergenceTable> {
    let h: Vec<f64> = meshes.iter().map(|m| m.mesh().h).collect();
    let label = dom.label();
    let (rows, modes) = match dom {
        TestDomain::Planar(_) => {
            let per_level: Vec<Vec<f64>> = meshes
                .iter()
                .map(|m| mesh_spectrum(m.mesh(), form, w, count, &label).map(|s| s.eigenvalues))
                .collect::<Result<_>>()?;
            let rows = (1..=count)
                .map(|k| richardson(&per_level.iter().map(|v| v[k]).collect::<Vec<_>>()))
                .collect();
            (rows, None)
        }
        TestDomain::Axisym(_) => {
            // extrapolate within each mode, then merge
            let mut per_mode: Vec<(usize, Vec<Extrapolation>)> = Vec::new();
            for &m in &cfg.modes {
                let take = if m == 0 { count + 1 } else { count };
                let per_level: Vec<Vec<f64>> = meshes
                    .iter()
                    .map(|lv| match lv {
                        LevelMesh::Meridian(d) => mode_eigenvalues(d, w, m, take).map(|s| s.eigenvalues),
                        LevelMesh::Planar(_) => unreachable!("meridian levels only"),
                    })
                    .collect::<Result<_>>()?;
                let skip = usize::from(m == 0);
                let rows = (skip..take)
                    .map(|k| richardson(&per_level.iter().map(|v| v[k]).collect::<Vec<_>>()))
                    .collect();
                per_mode.push((m, rows));
            }
            merge_extrapolations(&per_mode, count)
        }
    };
    let warnings = rows
        .iter()
        .enumerate()
        .filter(|(_, r): &(usize, &Extrapolation)| !r.monotone)
        .map(|(i, r)| format!("sigma{} converges non-monotonically ({:?}); finest value used", i + 1, r.levels))
        .collect();
    Ok(ConvergenceTable {
        domain: label,
        weight: w.label(),
        curvature: form.curvature,
        n: dom.dim(),
        h,
        rows,
        modes,
        warnings,
    })
}

fn merge_extrapolations(per_mode: &[(usize, Vec<Extrapolation>)], count: usize) -> (Vec<Extrapolation>, Option<Vec<usize>>) {
    let limits: Vec<(usize, Vec<f64>)> = per_mode.iter().map(|(m, r)| (*m, r.iter().map(|e| e.limit).collect())).collect();
    let (values, modes) = merge_modes(&limits);
    // walk the merged list, consuming entries of each mode in order
    let mut cursor = vec![0usize; per_mode.len()];
    let mut seen_copy = vec![0usize; per_mode.len()];
    let mut rows = Vec::new();
    for (_, &m) in values.iter().zip(&modes) {
        let slot = per_mode.iter().position(|(pm, _)| *pm == m).expect("mode present");
        rows.push(per_mode[slot].1[cursor[slot]].clone());
        seen_copy[slot] += 1;
        if seen_copy[slot] == crate::axisym3d::mode_multiplicity(m) {
            seen_copy[slot] = 0;
            cursor[slot] += 1;
        }
    }
    rows.truncate(count);
    let mut modes = modes;
    modes.truncate(count);
    (rows, Some(modes))
}

/// `σ₀ … σ_k` on the finest configured mesh, after the same form and
/// admissibility checks as the reports.
pub fn domain_spectrum(dom: &TestDomain, form: &SpaceForm, w: &RadialWeight, k: usize, cfg: &VerifyConfig) -> Result<SteklovSpectrum> {
    cfg.validate()?;
    dom.check_form(form)?;
    let meshes = level_meshes(dom, cfg)?;
    let finest = meshes.last().expect("at least one level");
    check_weight(form, w, mesh_t_max(finest, form.curvature), cfg.radial.waive_admissibility, cfg.radial.property_tol)?;
    match finest {
        LevelMesh::Planar(m) => mesh_spectrum(m, form, w, k, &dom.label()),
        LevelMesh::Meridian(d) => solve_axisym_spectrum(d, w, &cfg.modes, k),
    }
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionA {
    /// `Σ_{i=1}^{n} 1/σ_i(Ω)`.
    pub lhs_n: f64,
    /// `n/σ₁(B_R)`.
    pub rhs_n: f64,
    pub gap_n: f64,
    pub slack_n: f64,
    pub counterexample_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub domain: String,
    pub curvature: Curvature,
    pub weight: String,
    pub n: usize,
    pub volume: f64,
    pub radius: f64,
    /// `| |B_R|_φ − |Ω|_φ | / |Ω|_φ`.
    pub volume_residual: f64,
    pub radius_rtol: f64,
    /// Extrapolated `σ₁, σ₂, …`.
    pub sigma: Vec<f64>,
    pub convergence: ConvergenceTable,
    pub sigma1_ball: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub slack: f64,
    pub equality_tol: f64,
    pub centered_ball: bool,
    pub near_equality: bool,
    pub status: Status,
    pub question_a: Option<QuestionA>,
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Discretization error of `Σ 1/σ_i`: each term contributes `est/σ²`.
fn reciprocal_error(rows: &[Extrapolation]) -> f64 {
    rows.iter().map(|r| r.estimate / (r.limit * r.limit)).sum()
}

fn reciprocal_slack(rows: &[Extrapolation], rhs: f64, cfg: &VerifyConfig) -> f64 {
    (cfg.slack_floor * rhs).max(cfg.slack_factor * reciprocal_error(rows))
}

/// Sum-of-reciprocals comparison with the volume-matched ball.
pub fn brock_report(dom: &TestDomain, form: &SpaceForm, w: &RadialWeight, cfg: &VerifyConfig) -> Result<VerificationReport> {
    report(dom, form, w, cfg, false)
}

/// As [`brock_report`], adding the `n`-term conjectured comparison.
pub fn question_a_report(dom: &TestDomain, form: &SpaceForm, w: &RadialWeight, cfg: &VerifyConfig) -> Result<VerificationReport> {
    report(dom, form, w, cfg, true)
}

fn report(dom: &TestDomain, form: &SpaceForm, w: &RadialWeight, cfg: &VerifyConfig, with_a: bool) -> Result<VerificationReport> {
    cfg.validate()?;
    dom.check_form(form)?;
    let meshes = level_meshes(dom, cfg)?;
    let finest = meshes.last().expect("at least one level");
    check_weight(form, w, mesh_t_max(finest, form.curvature), cfg.radial.waive_admissibility, cfg.radial.property_tol)?;

    let volume = weighted_volume(finest, form, w)?;
    let radius = match_radius_with(form, w, volume, cfg.r_max, cfg.radius_rtol)?;
    let volume_residual = (ball_weighted_volume(form, w, radius)? - volume).abs() / volume;
    let ball = solve_mode_to(form, w, 1, radius, radius, &cfg.radial)?;
    let sigma1_ball = ball.beta;

    let n = dom.dim();
    let count = if with_a { n } else { n - 1 };
    let convergence = convergence_on(dom, form, w, count, cfg, &meshes)?;
    let sigma = convergence.limits();

    let terms = &convergence.rows[..n - 1];
    let lhs: f64 = terms.iter().map(|r| 1.0 / r.limit).sum();
    let rhs = (n - 1) as f64 / sigma1_ball;
    let gap = lhs - rhs;
    let slack = reciprocal_slack(terms, rhs, cfg);
    let equality_tol = (cfg.equality_floor * rhs).max(cfg.slack_factor * reciprocal_error(terms));
    let centered_ball = dom.is_centered_ball();
    let status = if gap >= -slack { Status::Pass } else { Status::Flagged };

    let question_a = with_a.then(|| {
        let lhs_n: f64 = convergence.rows.iter().map(|r| 1.0 / r.limit).sum();
        let rhs_n = n as f64 / sigma1_ball;
        let gap_n = lhs_n - rhs_n;
        let slack_n = reciprocal_slack(&convergence.rows, rhs_n, cfg);
        QuestionA {
            lhs_n,
            rhs_n,
            gap_n,
            slack_n,
            counterexample_candidate: gap_n < -slack_n,
        }
    });

    let mut warnings = convergence.warnings.clone();
    if status == Status::Flagged {
        warnings.push(format!("gap {gap:.3e} below -slack {:.3e}", -slack));
    }
    if question_a.as_ref().is_some_and(|q| q.counterexample_candidate) {
        warnings.push("counterexample-candidate for the n-term comparison".into());
    }

    Ok(VerificationReport {
        domain: dom.label(),
        curvature: form.curvature,
        weight: w.label(),
        n,
        volume,
        radius,
        volume_residual,
        radius_rtol: cfg.radius_rtol,
        sigma,
        convergence,
        sigma1_ball,
        lhs,
        rhs,
        gap,
        slack,
        equality_tol,
        centered_ball,
        near_equality: centered_ball && gap.abs() <= equality_tol,
        status,
        question_a,
        warnings,
    })
}

// ---------------------------------------------------------------- mesh integrals

#[derive(Clone, Copy)]
enum Rule {
    Tri6,
    Midpoint,
}

/// `∫_Ω f(t) dμ` over a mesh; `t` is the distance from the weight origin.
fn volume_integral(level: &LevelMesh, curvature: Curvature, w: &RadialWeight, rule: Rule, f: &dyn Fn(f64) -> f64) -> f64 {
    let mesh = level.mesh();
    let pts: &[([f64; 3], f64)] = match rule {
        Rule::Tri6 => &TRI6,
        Rule::Midpoint => &TRI3_MIDPOINT,
    };
    let mut total = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.vertices[i]);
        let area = mesh.signed_area(k);
        let s: f64 = pts
            .iter()
            .map(|(l, wt)| {
                let x = bary_point(p, *l);
                let (t, jac) = match level {
                    LevelMesh::Planar(_) => {
                        let (t, rho) = planar_metric(curvature, x);
                        (t, rho * rho)
                    }
                    LevelMesh::Meridian(_) => (x[0].hypot(x[1]), 2.0 * PI * x[0]),
                };
                wt * jac * w.density(t) * f(t)
            })
            .sum();
        total += area * s;
    }
    total
}

/// `∫_{∂Ω} f(t) dμ̂` over the curved boundary of a planar mesh.
fn boundary_integral(mesh: &TriMesh, curvature: Curvature, w: &RadialWeight, f: &dyn Fn(f64) -> f64) -> f64 {
    mesh.boundary_edges
        .iter()
        .map(|&[a, b]| {
            let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
            let len = (q[0] - p[0]).hypot(q[1] - p[1]);
            GAUSS2_UNIT
                .iter()
                .map(|&s| {
                    let (t, rho) = planar_metric(curvature, [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
                    0.5 * len * rho * w.density(t) * f(t)
                })
                .sum::<f64>()
        })
        .sum()
}

/// `ω ∫_0^R f(t) S^{n−1} e^{−φ} dt`.
fn ball_integral(form: &SpaceForm, w: &RadialWeight, radius: f64, f: &dyn Fn(f64) -> f64) -> Result<f64> {
    let p = (form.dim - 1) as i32;
    let opts = AdaptiveOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-11,
        max_intervals: 2000,
    };
    Ok(form.unit_sphere_area() * integrate(|t| f(t) * form.s(t).powi(p) * w.density(t), 0.0, radius, opts)?)
}

/// Mode-1 solution for the matched ball, continued to `t_end`.
fn mode_one(form: &SpaceForm, w: &RadialWeight, radius: f64, t_end: f64, cfg: &RadialConfig) -> Result<RadialSolution> {
    solve_mode_to(form, w, 1, radius, t_end.max(radius), cfg)
}

// ---------------------------------------------------------------- proof chain

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub name: String,
    /// Relative margin; nonnegative when the link holds exactly.
    pub margin: f64,
    pub slack: f64,
    pub holds: bool,
}

impl ChainLink {
    fn new(name: &str, margin: f64, slack: f64) -> Self {
        Self {
            name: name.into(),
            margin,
            slack,
            holds: margin >= -slack,
        }
    }
}

/// Chain quantities evaluated with the profile capped at `T(R)` beyond `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappedChain {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub link_i: f64,
    pub link_ii: f64,
    pub link_iii_g: f64,
    pub link_iii_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub brock: VerificationReport,
    /// `∫_{∂Ω} T² dμ̂`.
    pub a: f64,
    /// `∫_Ω G dμ`.
    pub b: f64,
    /// `∫_Ω H dμ`.
    pub c: f64,
    pub g_ball: f64,
    pub h_ball: f64,
    /// `lhs/(n−1)`, `A/C`, `B/C`, `G_B/H_B`, `1/σ₁(B_R)`.
    pub q: [f64; 5],
    /// Reading with `G` over `H`: `B/C`.
    pub reading_g_over_h: f64,
    /// Reading with `H` over `G`: `C/B`.
    pub reading_h_over_g: f64,
    pub links: Vec<ChainLink>,
    /// `gap ≥ −(n−1) Σ slack` whenever every link holds.
    pub implication_holds: bool,
    pub all_links_hold: bool,
    pub capped: CappedChain,
}

/// Requires reflection symmetry in both axes about the weight origin.
pub fn check_dihedral_symmetry(dom: &Domain2D) -> Result<()> {
    if dom.center_offset != [0.0, 0.0] {
        return Err(Error::Symmetry(format!("{} is not centered at the weight origin", dom.label())));
    }
    let (curve, c) = dom.curve();
    if c[0].abs() > 1e-12 || c[1].abs() > 1e-12 {
        return Err(Error::Symmetry(format!("{} has its center at {c:?}", dom.label())));
    }
    for k in 0..720 {
        let th = PI * k as f64 / 720.0 + 1e-3;
        let r = curve.radius(th);
        for other in [curve.radius(-th), curve.radius(PI - th)] {
            if (r - other).abs() > 1e-9 * r {
                return Err(Error::Symmetry(format!(
                    "{} is not symmetric under x → −x and y → −y (r = {r} vs {other} at θ = {th:.4})",
                    dom.label()
                )));
            }
        }
    }
    Ok(())
}

/// Audits the comparison argument: trial functions `T(t)x_i/t` give
/// (ii) `σ₁ A ≤ C`, the divergence theorem gives (i) `A ≥ B`, and the
/// monotone rearrangement gives (iii) `B ≥ G_B`, `C ≤ H_B`.
pub fn proof_chain_check(dom: &Domain2D, form: &SpaceForm, w: &RadialWeight, cfg: &VerifyConfig) -> Result<ChainReport> {
    check_dihedral_symmetry(dom)?;
    let td = TestDomain::Planar(dom.clone());
    let brock = brock_report(&td, form, w, cfg)?;
    let meshes = level_meshes(&td, cfg)?;
    let cv = form.curvature;
    let n1 = (form.dim - 1) as f64;
    let radius = brock.radius;

    let t_max = meshes.iter().map(|m| mesh_t_max(m, cv)).fold(0.0, f64::max) * (1.0 + 1e-9);
    let sol = mode_one(form, w, radius, t_max, &cfg.radial)?;
    let norm = sol.leading_coefficient.powi(2);
    let ball = ball_sigma_from(&sol);
    let (g_ball, h_ball) = (ball.g_integral, ball.h_integral);

    let t2 = |t: f64| sol.eval(t).0.powi(2) / norm;
    let g = |t: f64| sol.g_h(t).0 / norm;
    let h = |t: f64| sol.g_h(t).1 / norm;
    let abc = |lv: &LevelMesh| {
        (
            boundary_integral(lv.mesh(), cv, w, &t2),
            volume_integral(lv, cv, w, Rule::Tri6, &g),
            volume_integral(lv, cv, w, Rule::Tri6, &h),
        )
    };
    let (a, b, c) = abc(meshes.last().expect("level"));
    // discretization error of each ratio from the two finest levels
    let (a0, b0, c0) = if meshes.len() >= 2 { abc(&meshes[meshes.len() - 2]) } else { (a, b, c) };

    let q0 = brock.lhs / n1;
    let q = [q0, a / c, b / c, g_ball / h_ball, 1.0 / brock.sigma1_ball];
    let floor = cfg.slack_floor;
    let err = |x: f64, x0: f64| (x - x0).abs() / 3.0;

    let s_ii = (floor * q0).max(brock.slack / n1);
    let link_ii = ChainLink::new("ii: sigma1 A <= C", q[0] - q[1], s_ii);
    let s_i = (floor * q[1]).max(cfg.slack_factor * err(a / c - b / c, a0 / c0 - b0 / c0));
    let link_i = ChainLink::new("i: A >= B", q[1] - q[2], s_i);
    let s_g = floor.max(cfg.slack_factor * err(b, b0) / g_ball);
    let link_iii_g = ChainLink::new("iii: int G over domain >= int G over ball", (b - g_ball) / g_ball, s_g);
    let s_h = floor.max(cfg.slack_factor * err(c, c0) / h_ball);
    let link_iii_h = ChainLink::new("iii: int H over domain <= int H over ball", (h_ball - c) / h_ball, s_h);

    let links = vec![link_i, link_ii, link_iii_g, link_iii_h];
    let all_links_hold = links.iter().all(|l| l.holds);
    // q0 − q4 = (q0−q1) + (q1−q2) + (q2−q3) + (q3−q4); bound (q2−q3) from the two relative margins
    let slack_sum = s_ii + s_i + q[2] * (s_g + s_h) + (q[3] - q[4]).abs();
    let implication_holds = !all_links_hold || brock.gap >= -n1 * slack_sum;

    // capped profile: f = T(min(t, R))
    let tr = sol.value_at_radius() / sol.leading_coefficient;
    let capped_g = |t: f64| {
        if t <= radius {
            g(t)
        } else {
            let s = form.s(t);
            n1 * form.c(t) / s * tr * tr - tr * tr * w.dphi(t)
        }
    };
    let capped_h = |t: f64| if t <= radius { h(t) } else { n1 * tr * tr / form.s(t).powi(2) };
    let capped_t2 = |t: f64| if t <= radius { t2(t) } else { tr * tr };
    let finest = meshes.last().expect("level");
    let ca = boundary_integral(finest.mesh(), cv, w, &capped_t2);
    let cb = volume_integral(finest, cv, w, Rule::Tri6, &capped_g);
    let cc = volume_integral(finest, cv, w, Rule::Tri6, &capped_h);
    let capped = CappedChain {
        a: ca,
        b: cb,
        c: cc,
        link_i: (ca - cb) / cc,
        link_ii: q0 - ca / cc,
        link_iii_g: (cb - g_ball) / g_ball,
        link_iii_h: (h_ball - cc) / h_ball,
    };

    Ok(ChainReport {
        brock,
        a,
        b,
        c,
        g_ball,
        h_ball,
        q,
        reading_g_over_h: b / c,
        reading_h_over_g: c / b,
        links,
        implication_holds,
        all_links_hold,
        capped,
    })
}

// ---------------------------------------------------------------- rearrangement

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `v(t) = t`, non-decreasing.
    Distance,
    /// `v(t) = e^{−t}`, non-increasing.
    ExpDecay,
    /// `G` of the matched ball's mode-1 solution, non-decreasing.
    BallG,
    /// `H` of the matched ball's mode-1 solution, non-increasing.
    BallH,
}

impl TestFunction {
    pub fn non_decreasing(self) -> bool {
        matches!(self, TestFunction::Distance | TestFunction::BallG)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementReport {
    pub domain: String,
    pub function: TestFunction,
    pub radius: f64,
    pub domain_integral: f64,
    pub ball_integral: f64,
    /// `±(∫_Ω − ∫_B)`, signed so that the expected direction is positive.
    pub margin: f64,
    pub slack: f64,
    pub direction_holds: bool,
}

/// Compares `∫_Ω v dμ` with `∫_{B_R} v dμ` for the ball of equal weighted
/// volume. The polygonal domain itself is volume-matched, so only
/// quadrature error enters the slack.
pub fn rearrangement_check(
    dom: &TestDomain,
    form: &SpaceForm,
    w: &RadialWeight,
    function: TestFunction,
    cfg: &VerifyConfig,
) -> Result<RearrangementReport> {
    cfg.validate()?;
    dom.check_form(form)?;
    let meshes = level_meshes(dom, cfg)?;
    let finest = meshes.last().expect("level");
    let cv = form.curvature;
    let one = |_t: f64| 1.0;
    let volume = volume_integral(finest, cv, w, Rule::Tri6, &one);
    let radius = match_radius_with(form, w, volume, cfg.r_max, cfg.radius_rtol)?;

    let t_max = mesh_t_max(finest, cv) * (1.0 + 1e-9);
    let sol = if matches!(function, TestFunction::BallG | TestFunction::BallH) {
        Some(mode_one(form, w, radius, t_max, &cfg.radial)?)
    } else {
        None
    };
    let v = |t: f64| match function {
        TestFunction::Distance => t,
        TestFunction::ExpDecay => (-t).exp(),
        TestFunction::BallG => sol.as_ref().expect("solution").g_h(t).0,
        TestFunction::BallH => sol.as_ref().expect("solution").g_h(t).1,
    };
    let omega = volume_integral(finest, cv, w, Rule::Tri6, &v);
    let coarse = volume_integral(finest, cv, w, Rule::Midpoint, &v);
    let vol_coarse = volume_integral(finest, cv, w, Rule::Midpoint, &one);
    let ball = ball_integral(form, w, radius, &v)?;
    let sign = if function.non_decreasing() { 1.0 } else { -1.0 };
    let margin = sign * (omega - ball);
    // the volume mismatch moves the ball integral by at most sup|v| · Δvol
    let vmax = v(t_max).abs().max(v(0.0).abs());
    let quad = (omega - coarse).abs() + vmax * (volume - vol_coarse).abs();
    let slack = (1e-9 * ball.abs()).max(cfg.slack_factor * quad);
    Ok(RearrangementReport {
        domain: dom.label(),
        function,
        radius,
        domain_integral: omega,
        ball_integral: ball,
        margin,
        slack,
        direction_holds: margin >= -slack,
    })
}

// ---------------------------------------------------------------- sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub domain: TestDomain,
    pub form: SpaceForm,
    pub weight: RadialWeight,
}

/// Question A reports for every entry, in input order.
pub fn run_sweep(entries: &[SweepEntry], cfg: &VerifyConfig) -> Vec<Result<VerificationReport>> {
    entries
        .par_iter()
        .map(|e| question_a_report(&e.domain, &e.form, &e.weight, cfg))
        .collect()
}

pub fn sweep_csv(reports: &[VerificationReport]) -> String {
    let mut out = format!("{SWEEP_CSV_VERSION}\n");
    out.push_str(
        "domain,weight,curvature,n,volume,R,sigma1_omega,sigma2_omega,sigma3_omega,sigma1_ball,lhs,rhs,gap,gap_n,slack,status\n",
    );
    for r in reports {
        let sig = |k: usize| r.sigma.get(k).map_or(String::new(), |v| format!("{v:.12e}"));
        let gap_n = r.question_a.as_ref().map_or(String::new(), |q| format!("{:.12e}", q.gap_n));
        let status = match r.status {
            Status::Pass => "pass",
            Status::Flagged => "flagged",
        };
        out.push_str(&format!(
            "{},{},{},{},{:.12e},{:.12e},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{gap_n},{:.6e},{status}\n",
            r.domain,
            r.weight,
            r.curvature.name(),
            r.n,
            r.volume,
            r.radius,
            sig(0),
            sig(1),
            sig(2),
            r.sigma1_ball,
            r.lhs,
            r.rhs,
            r.gap,
            r.slack,
        ));
    }
    out
}

/// `{0, −t/2, −t − t²/4}`.
pub fn standard_weights() -> Vec<RadialWeight> {
    vec![
        RadialWeight::zero(),
        RadialWeight::Linear { a: 0.5 },
        RadialWeight::Quadratic { a: 1.0, b: 0.25 },
    ]
}

/// Twenty planar domains of area `π`-scale: eleven ellipses of axis ratio
/// 1.0 to 2.0, eight perturbed disks and one off-center disk.
pub fn standard_planar_domains() -> Vec<Domain2D> {
    let mut out: Vec<Domain2D> = (0..=10)
        .map(|i| {
            let ratio = 1.0 + 0.1 * f64::from(i);
            Domain2D::ellipse(ratio.sqrt(), 1.0 / ratio.sqrt()).expect("valid ellipse")
        })
        .collect();
    for eps in [0.05, 0.1, 0.2] {
        for k in [2, 3, 5] {
            if let Ok(d) = Domain2D::perturbed_disk(1.0, eps, k) {
                out.push(d);
            }
        }
    }
    out.push(Domain2D::disk(1.0).expect("disk").with_offset([0.3, 0.0]));
    out
}

/// Ten domains inside the Poincaré disk.
pub fn standard_hyperbolic_domains() -> Vec<Domain2D> {
    let r = 0.5f64.tanh();
    let mut out = vec![Domain2D::disk(r).expect("disk")];
    for ratio in [1.25f64, 1.5, 1.75, 2.0] {
        out.push(Domain2D::ellipse(r * ratio.sqrt(), r / ratio.sqrt()).expect("ellipse"));
    }
    for (eps, k) in [(0.1, 2), (0.1, 3), (0.05, 5)] {
        out.push(Domain2D::perturbed_disk(r, eps, k).expect("perturbed disk"));
    }
    out.push(Domain2D::disk(0.3).expect("disk").with_offset([0.2, 0.0]));
    let s = 0.35;
    out.push(Domain2D::polygon(vec![[-s, -s], [s, -s], [s, s], [-s, s]]).expect("square"));
    out
}

/// Spheroids of unit-ball volume with `a/c ∈ {1, 1.25, 1.5}`.
pub fn standard_spheroids() -> Vec<MeridianKind> {
    [1.0f64, 1.25, 1.5]
        .iter()
        .map(|&ratio| MeridianKind::Spheroid {
            a: ratio.powf(1.0 / 3.0),
            c: ratio.powf(-2.0 / 3.0),
        })
        .collect()
}

/// Six domains symmetric under both coordinate reflections.
pub fn standard_symmetric_domains() -> Vec<Domain2D> {
    let s = 0.9;
    vec![
        Domain2D::disk(1.0).expect("disk"),
        Domain2D::ellipse(1.5f64.sqrt(), 1.0 / 1.5f64.sqrt()).expect("ellipse"),
        Domain2D::ellipse(2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()).expect("ellipse"),
        Domain2D::perturbed_disk(1.0, 0.1, 2).expect("perturbed disk"),
        Domain2D::perturbed_disk(1.0, 0.05, 4).expect("perturbed disk"),
        Domain2D::polygon(vec![[-s, -s], [s, -s], [s, s], [-s, s]]).expect("square"),
    ]
}
