//! Separated solutions of the weighted Steklov problem on geodesic balls.
//!
//! For angular degree `i` the radial factor solves
//! `T'' + ((n-1) C/S - φ') T' - λ_i T / S² = 0`, `λ_i = i(i+n-2)`,
//! regular at the origin, and the ball eigenvalue is `β_i = T'(R)/T(R)`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{validate_property_i, Curvature, RadialWeight, SpaceForm};
use crate::ode::{integrate_on_grid, OdeOptions};
use crate::spectrum::{SpectrumMetadata, SteklovSpectrum};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    pub rtol: f64,
    /// Series start `t₀` as a fraction of `R`.
    pub start_fraction: f64,
    /// Reporting points on `[t₀, R]`.
    pub grid_points: usize,
    pub leading_coefficient: f64,
    pub waive_admissibility: bool,
    /// Overrides the weight's default admissibility tolerance.
    pub property_tol: Option<f64>,
    pub max_steps: usize,
}

impl Default for RadialConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            start_fraction: 1e-4,
            grid_points: 2048,
            leading_coefficient: 1.0,
            waive_admissibility: false,
            property_tol: None,
            max_steps: 1_000_000,
        }
    }
}

impl RadialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.rtol < 1e-2) {
            return Err(Error::InvalidArgument(format!("rtol out of range: {}", self.rtol)));
        }
        if !(self.start_fraction > 0.0 && self.start_fraction < 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "start_fraction out of range: {}",
                self.start_fraction
            )));
        }
        if self.grid_points < 16 {
            return Err(Error::InvalidArgument(format!("grid_points too small: {}", self.grid_points)));
        }
        if !(self.leading_coefficient > 0.0) || !self.leading_coefficient.is_finite() {
            return Err(Error::InvalidArgument("leading_coefficient must be positive".into()));
        }
        Ok(())
    }
}

/// Mode solution sampled on `[t₀, t_end]`, `t_end ≥ R`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub form: SpaceForm,
    pub weight: RadialWeight,
    pub mode: usize,
    pub lambda: f64,
    pub radius: f64,
    pub leading_coefficient: f64,
    /// First-order Frobenius correction: `T ≈ c t^i (1 + a t)` near 0.
    pub frobenius_a: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Position of `R` in `grid`.
    pub radius_index: usize,
    pub beta: f64,
    /// `∫_{t₀}^R (T'² + λ T²/S²) S^{n-1} e^{-φ} dt`.
    pub energy_integral: f64,
    /// `∫_{t₀}^R ((T²)' + (n-1)(C/S)T² - T²φ') S^{n-1} e^{-φ} dt` plus the
    /// series value on `[0, t₀]`.
    pub flux_integral: f64,
}

impl RadialSolution {
    pub fn t0(&self) -> f64 {
        self.grid[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.grid.last().expect("non-empty grid")
    }

    pub fn value_at_radius(&self) -> f64 {
        self.values[self.radius_index]
    }

    fn second_derivative(&self, t: f64, tv: f64, dv: f64) -> f64 {
        let n1 = (self.form.dim - 1) as f64;
        let s = self.form.s(t);
        -(n1 * self.form.c(t) / s - self.weight.dphi(t)) * dv + self.lambda * tv / (s * s)
    }

    fn series(&self, t: f64) -> (f64, f64) {
        let i = self.mode as i32;
        let c = self.leading_coefficient;
        let a = self.frobenius_a;
        let tv = c * t.powi(i) * (1.0 + a * t);
        let dv = c * (f64::from(i) * t.powi(i - 1) + a * f64::from(i + 1) * t.powi(i));
        (tv, dv)
    }

    /// `(T(t), T'(t))`. Below `t₀` the series is used; between grid points,
    /// cubic Hermite interpolation of `T` from `(T, T')` and of `T'` from
    /// `(T', T'')`. Slightly past the end the last cubic is extrapolated.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        if t <= self.t0() {
            return self.series(t.max(0.0));
        }
        let k = self.grid.partition_point(|&g| g <= t).clamp(1, self.grid.len() - 1) - 1;
        let (ta, tb) = (self.grid[k], self.grid[k + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (ya, yb) = (self.values[k], self.values[k + 1]);
        let (da, db) = (self.derivatives[k], self.derivatives[k + 1]);
        let (pa, pb) = (self.second_derivative(ta, ya, da), self.second_derivative(tb, yb, db));
        (hermite(s, h, ya, yb, da, db), hermite(s, h, da, db, pa, pb))
    }

    /// `G` and `H` at `t` for this mode, with `λ` in place of `n - 1`.
    pub fn g_h(&self, t: f64) -> (f64, f64) {
        let (tv, dv) = self.eval(t);
        g_h_from(&self.form, &self.weight, self.lambda, t, tv, dv)
    }

    /// CSV with columns `t,T,Tprime,G,H` on the solution grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,T,Tprime,G,H\n");
        for ((&t, &tv), &dv) in self.grid.iter().zip(&self.values).zip(&self.derivatives) {
            let (g, h) = g_h_from(&self.form, &self.weight, self.lambda, t, tv, dv);
            let _ = writeln!(out, "{t:.12e},{tv:.12e},{dv:.12e},{g:.12e},{h:.12e}");
        }
        out
    }
}

fn hermite(s: f64, h: f64, ya: f64, yb: f64, da: f64, db: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * ya + (s3 - 2.0 * s2 + s) * h * da + (-2.0 * s3 + 3.0 * s2) * yb + (s3 - s2) * h * db
}

pub(crate) fn g_h_from(form: &SpaceForm, w: &RadialWeight, lambda: f64, t: f64, tv: f64, dv: f64) -> (f64, f64) {
    let s = form.s(t);
    let n1 = (form.dim - 1) as f64;
    if s == 0.0 {
        return (0.0, dv * dv + lambda * dv * dv);
    }
    let g = 2.0 * tv * dv + n1 * (form.c(t) / s) * tv * tv - tv * tv * w.dphi(t);
    let h = dv * dv + lambda * tv * tv / (s * s);
    (g, h)
}

/// Checks curvature and admissibility for a radial computation on `[0, t_max]`.
pub(crate) fn check_weight(form: &SpaceForm, w: &RadialWeight, t_max: f64, waive: bool, tol: Option<f64>) -> Result<()> {
    if form.curvature == Curvature::Spherical && t_max >= std::f64::consts::PI {
        return Err(Error::Domain(format!("hemisphere model requires t < π, got {t_max}")));
    }
    if waive {
        return Ok(());
    }
    let tol = tol.unwrap_or_else(|| w.default_property_tol());
    let rep = validate_property_i(w, t_max, 513, tol)?;
    if rep.admissible {
        Ok(())
    } else {
        Err(Error::Inadmissible(format!("{} {}", w.label(), rep.diagnostic())))
    }
}

pub fn solve_mode(form: &SpaceForm, w: &RadialWeight, mode: usize, radius: f64, cfg: &RadialConfig) -> Result<RadialSolution> {
    solve_mode_to(form, w, mode, radius, radius, cfg)
}

/// As [`solve_mode`], continuing the same solution past `R` up to `t_end`.
pub fn solve_mode_to(
    form: &SpaceForm,
    w: &RadialWeight,
    mode: usize,
    radius: f64,
    t_end: f64,
    cfg: &RadialConfig,
) -> Result<RadialSolution> {
    cfg.validate()?;
    if mode == 0 {
        return Err(Error::InvalidArgument("mode degree must be at least 1".into()));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if !(t_end >= radius) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end {t_end} is below R = {radius}")));
    }
    check_weight(form, w, t_end, cfg.waive_admissibility, cfg.property_tol)?;

    let n = form.dim;
    let i = mode as f64;
    let lambda = i * (i + n as f64 - 2.0);
    let n1 = (n - 1) as f64;
    let c = cfg.leading_coefficient;
    let frobenius_a = w.dphi(0.0) * i / (2.0 * i + n1);
    let t0 = cfg.start_fraction * radius;

    let grid = build_grid(t0, radius, t_end, cfg.grid_points);
    let radius_index = cfg.grid_points - 1;

    let tv0 = c * t0.powi(mode as i32) * (1.0 + frobenius_a * t0);
    let dv0 = c * (i * t0.powi(mode as i32 - 1) + frobenius_a * (i + 1.0) * t0.powi(mode as i32));
    let d0 = w.density(0.0);
    let p_e = 2 * mode + n - 2;
    let e0 = c * c * (i * i + lambda) * d0 * t0.powi(p_e as i32) / p_e as f64;
    let f0 = c * c * d0 * t0.powi(p_e as i32 + 1);

    let rhs = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let s = form.s(t);
        let cs = form.c(t) / s;
        let dp = w.dphi(t);
        let wgt = s.powi(n as i32 - 1) * w.density(t);
        let (tv, dv) = (y[0], y[1]);
        let acc = -(n1 * cs - dp) * dv + lambda * tv / (s * s);
        [
            dv,
            acc,
            (dv * dv + lambda * tv * tv / (s * s)) * wgt,
            (2.0 * tv * dv + n1 * cs * tv * tv - tv * tv * dp) * wgt,
        ]
    };
    let opts = OdeOptions {
        rtol: cfg.rtol,
        max_steps: cfg.max_steps,
        ..OdeOptions::default()
    };
    let states = integrate_on_grid(rhs, [tv0, dv0, e0, f0], &grid, opts, |t, y| {
        if y[0] <= 0.0 || !y[0].is_finite() {
            Err(Error::NonPositive { t, value: y[0] })
        } else {
            Ok(())
        }
    })?;

    let at_r = states[radius_index];
    let beta = at_r[1] / at_r[0];
    if !(beta > 0.0) {
        return Err(Error::NonPositive { t: radius, value: beta });
    }
    Ok(RadialSolution {
        form: *form,
        weight: w.clone(),
        mode,
        lambda,
        radius,
        leading_coefficient: c,
        frobenius_a,
        values: states.iter().map(|s| s[0]).collect(),
        derivatives: states.iter().map(|s| s[1]).collect(),
        grid,
        radius_index,
        beta,
        energy_integral: at_r[2],
        flux_integral: at_r[3],
    })
}

fn build_grid(t0: f64, radius: f64, t_end: f64, points: usize) -> Vec<f64> {
    let h = (radius - t0) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points - 1).map(|k| t0 + k as f64 * h).collect();
    grid.push(radius);
    if t_end > radius {
        let extra = ((t_end - radius) / h - 1e-9).ceil().max(1.0) as usize;
        let step = (t_end - radius) / extra as f64;
        grid.extend((1..extra).map(|j| radius + j as f64 * step));
        grid.push(t_end);
    }
    grid
}

/// First nonzero eigenvalue of the ball together with the integral identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSigma {
    pub sigma: f64,
    /// `∫_B H dμ / (T(R)² |∂B|_φ)`.
    pub identity_value: f64,
    pub discrepancy: f64,
    pub identity_warning: bool,
    /// `∫_{B_R} H dμ` and `∫_{B_R} G dμ` for the unit-slope normalization.
    pub h_integral: f64,
    pub g_integral: f64,
    pub boundary_value: f64,
}

pub const IDENTITY_TOL: f64 = 1e-6;

pub fn sigma1_ball(form: &SpaceForm, w: &RadialWeight, radius: f64, cfg: &RadialConfig) -> Result<BallSigma> {
    let sol = solve_mode(form, w, 1, radius, cfg)?;
    Ok(ball_sigma_from(&sol))
}

pub fn ball_sigma_from(sol: &RadialSolution) -> BallSigma {
    let form = &sol.form;
    let tr = sol.value_at_radius();
    let area = form.unit_sphere_area();
    let boundary = form.s(sol.radius).powi(form.dim as i32 - 1) * sol.weight.density(sol.radius);
    let identity_value = sol.energy_integral / (tr * tr * boundary);
    let discrepancy = (sol.beta - identity_value).abs() / sol.beta;
    let norm = sol.leading_coefficient * sol.leading_coefficient;
    BallSigma {
        sigma: sol.beta,
        identity_value,
        discrepancy,
        identity_warning: discrepancy > IDENTITY_TOL,
        h_integral: area * sol.energy_integral / norm,
        g_integral: area * sol.flux_integral / norm,
        boundary_value: tr / sol.leading_coefficient,
    }
}

/// Dimension of degree-`i` spherical harmonics on `S^{n-1}`.
pub fn harmonic_multiplicity(n: usize, i: usize) -> u64 {
    fn binom(a: usize, b: usize) -> u128 {
        if b > a {
            return 0;
        }
        let b = b.min(a - b);
        (0..b).fold(1u128, |acc, k| acc * (a - k) as u128 / (k + 1) as u128)
    }
    let full = binom(i + n - 1, n - 1);
    let lower = if i >= 2 { binom(i + n - 3, n - 1) } else { 0 };
    (full - lower) as u64
}

/// `0` followed by the `k` smallest ball eigenvalues, counted with multiplicity.
pub fn ball_spectrum(form: &SpaceForm, w: &RadialWeight, radius: f64, k: usize, cfg: &RadialConfig) -> Result<SteklovSpectrum> {
    if k == 0 {
        return Err(Error::InvalidArgument("eigenvalue count must be at least 1".into()));
    }
    let mut eigenvalues = vec![0.0];
    let mut modes = vec![0usize];
    let mut identities = BTreeMap::new();
    let mut mode = 1;
    while eigenvalues.len() < k + 1 {
        let sol = solve_mode(form, w, mode, radius, cfg)?;
        let b = ball_sigma_from(&sol);
        identities.insert(format!("identity_discrepancy_mode{mode}"), b.discrepancy);
        let mult = harmonic_multiplicity(form.dim, mode) as usize;
        let take = mult.min(k + 1 - eigenvalues.len());
        eigenvalues.extend(std::iter::repeat(sol.beta).take(take));
        modes.extend(std::iter::repeat(mode).take(take));
        mode += 1;
    }
    Ok(SteklovSpectrum {
        eigenvalues,
        boundary_eigenvectors: Vec::new(),
        modes: Some(modes),
        metadata: SpectrumMetadata {
            domain: format!("ball({radius})"),
            weight: w.label(),
            curvature: form.curvature,
            dim: form.dim,
            h: None,
            boundary_nodes: 0,
        },
        identities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhProfile {
    pub grid: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl GhProfile {
    /// `max|G|` and `max|H|` divided by the length of the sampled interval,
    /// the natural unit for their derivatives.
    pub fn derivative_scales(&self) -> (f64, f64) {
        let span = self.grid[self.grid.len() - 1] - self.grid[0];
        let gmax = self.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hmax = self.h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (gmax / span, hmax / span)
    }
}

/// `G` and `H` on the solution grid of a degree-1 solution.
pub fn compute_gh(sol: &RadialSolution) -> Result<GhProfile> {
    if sol.mode != 1 {
        return Err(Error::InvalidArgument(format!("G and H need the degree-1 solution, got degree {}", sol.mode)));
    }
    let (g, h) = sol
        .grid
        .iter()
        .zip(&sol.values)
        .zip(&sol.derivatives)
        .map(|((&t, &tv), &dv)| g_h_from(&sol.form, &sol.weight, sol.lambda, t, tv, dv))
        .unzip();
    Ok(GhProfile {
        grid: sol.grid.clone(),
        g,
        h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhReport {
    pub min_dg: f64,
    pub min_dg_at: f64,
    pub max_dh: f64,
    pub max_dh_at: f64,
    pub min_g: f64,
    pub min_h: f64,
    pub tol_g: f64,
    pub tol_h: f64,
    pub g_non_decreasing: bool,
    pub h_non_increasing: bool,
    pub nonnegative: bool,
    pub passed: bool,
}

/// Finite-difference monotonicity test with one absolute tolerance for both.
pub fn check_gh_monotonicity(p: &GhProfile, tol: f64) -> GhReport {
    check_gh_with(p, tol, tol)
}

/// As [`check_gh_monotonicity`] with tolerances `rel` times the derivative
/// scales of `G` and `H`.
pub fn check_gh_monotonicity_scaled(p: &GhProfile, rel: f64) -> GhReport {
    let (sg, sh) = p.derivative_scales();
    check_gh_with(p, rel * sg, rel * sh)
}

fn check_gh_with(p: &GhProfile, tol_g: f64, tol_h: f64) -> GhReport {
    let mut rep = GhReport {
        min_dg: f64::INFINITY,
        min_dg_at: p.grid[0],
        max_dh: f64::NEG_INFINITY,
        max_dh_at: p.grid[0],
        min_g: p.g.iter().copied().fold(f64::INFINITY, f64::min),
        min_h: p.h.iter().copied().fold(f64::INFINITY, f64::min),
        tol_g,
        tol_h,
        g_non_decreasing: false,
        h_non_increasing: false,
        nonnegative: false,
        passed: false,
    };
    for k in 0..p.grid.len() - 1 {
        let dt = p.grid[k + 1] - p.grid[k];
        let mid = 0.5 * (p.grid[k] + p.grid[k + 1]);
        let dg = (p.g[k + 1] - p.g[k]) / dt;
        let dh = (p.h[k + 1] - p.h[k]) / dt;
        if dg < rep.min_dg {
            rep.min_dg = dg;
            rep.min_dg_at = mid;
        }
        if dh > rep.max_dh {
            rep.max_dh = dh;
            rep.max_dh_at = mid;
        }
    }
    rep.g_non_decreasing = rep.min_dg >= -tol_g;
    rep.h_non_increasing = rep.max_dh <= tol_h;
    rep.nonnegative = rep.min_g >= 0.0 && rep.min_h >= 0.0;
    rep.passed = rep.g_non_decreasing && rep.h_non_increasing;
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WeightTable;
    use proptest::prelude::*;

    fn cfg() -> RadialConfig {
        RadialConfig::default()
    }

    #[test]
    fn euclidean_disk_modes() {
        let e2 = SpaceForm::euclidean(2);
        let w = RadialWeight::zero();
        let b1 = solve_mode(&e2, &w, 1, 1.0, &cfg()).unwrap().beta;
        assert!((b1 - 1.0).abs() < 1e-10);
        for (k, r) in [(2, 1.0), (3, 0.5), (4, 2.0)] {
            let b = solve_mode(&e2, &w, k, r, &cfg()).unwrap().beta;
            assert!((b - k as f64 / r).abs() < 1e-8 * (k as f64 / r), "{k} {r} {b}");
        }
    }

    #[test]
    fn hyperbolic_closed_form() {
        let h2 = SpaceForm::hyperbolic(2);
        let sol = solve_mode(&h2, &RadialWeight::zero(), 1, 1.0, &cfg()).unwrap();
        assert!((sol.beta - 1.0 / 1f64.sinh()).abs() < 1e-9);
        assert!((sol.beta - 0.850_918_1).abs() < 1e-7);
        // T = 2 tanh(t/2) has unit slope at the origin
        for &t in &[0.1, 0.5, 0.9] {
            let (tv, _) = sol.eval(t);
            assert!((tv - 2.0 * (t / 2.0).tanh()).abs() < 1e-8 * tv, "{t} {tv} {}", 2.0 * (t / 2.0).tanh());
        }
        let s = sigma1_ball(&h2, &RadialWeight::Constant { c: 3.0 }, 2.0, &cfg()).unwrap();
        assert!((s.sigma - 0.275_720_5).abs() < 1e-7);
    }

    #[test]
    fn sigma1_is_inverse_radius_in_every_dimension() {
        for n in [2, 3, 5] {
            for r in [0.5, 1.0, 2.0] {
                let s = sigma1_ball(&SpaceForm::euclidean(n), &RadialWeight::zero(), r, &cfg()).unwrap();
                assert!((s.sigma * r - 1.0).abs() < 1e-8);
                assert!(!s.identity_warning);
            }
        }
    }

    // Energy minimization of ∫ (T'² + λT²/S²) S^{n-1} e^{-φ} dt over piecewise
    // linear T with T(0)=0, T(R)=1 on a uniform grid; the minimum is β.
    fn fd_beta(form: &SpaceForm, w: &RadialWeight, r: f64, cells: usize) -> f64 {
        let n = form.dim as i32;
        let lambda = (n - 1) as f64;
        let h = r / cells as f64;
        let m = cells - 1;
        let (mut diag, mut off, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        let mut boundary_diag = 0.0;
        for e in 0..cells {
            let (a, b) = (e as f64 * h, (e + 1) as f64 * h);
            let gl = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
            let mut k = [[0.0; 2]; 2];
            for &g in &gl {
                let t = a + g * (b - a);
                let wt = form.s(t).powi(n - 1) * w.density(t) * 0.5 * h;
                let phi = [1.0 - g, g];
                let dphi = [-1.0 / h, 1.0 / h];
                let s = form.s(t);
                for p in 0..2 {
                    for q in 0..2 {
                        k[p][q] += wt * (dphi[p] * dphi[q] + lambda * phi[p] * phi[q] / (s * s));
                    }
                }
            }
            // unknowns 1..=m map to 0..m-1; node 0 is fixed at 0, node `cells` at 1
            let ia = e as isize - 1;
            let ib = e as isize;
            if ia >= 0 {
                diag[ia as usize] += k[0][0];
            }
            if ib < m as isize {
                diag[ib as usize] += k[1][1];
                if ia >= 0 {
                    off[ia as usize] += k[0][1];
                }
            } else {
                boundary_diag += k[1][1];
                rhs[ia as usize] -= k[0][1];
            }
        }
        // Thomas algorithm
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for i in 0..m {
            let denom = diag[i] - if i > 0 { off[i - 1] * c[i - 1] } else { 0.0 };
            c[i] = off[i] / denom;
            d[i] = (rhs[i] - if i > 0 { off[i - 1] * d[i - 1] } else { 0.0 }) / denom;
        }
        let mut x = vec![0.0; m];
        for i in (0..m).rev() {
            x[i] = d[i] - if i + 1 < m { c[i] * x[i + 1] } else { 0.0 };
        }
        // energy of the minimizer = boundary_diag + k_{m,last} x_{m-1}
        let energy = boundary_diag - rhs[m - 1] * x[m - 1];
        energy / (form.s(r).powi(n - 1) * w.density(r))
    }

    #[test]
    fn linear_weight_dual_oracle() {
        let e2 = SpaceForm::euclidean(2);
        let w = RadialWeight::Linear { a: 1.0 };
        let s = sigma1_ball(&e2, &w, 1.0, &cfg()).unwrap();
        assert!(s.discrepancy < 1e-8);
        let coarse = fd_beta(&e2, &w, 1.0, 400);
        let fine = fd_beta(&e2, &w, 1.0, 800);
        let extrapolated = fine + (fine - coarse) / 3.0;
        assert!((s.sigma - extrapolated).abs() < 1e-6 * s.sigma, "{} vs {}", s.sigma, extrapolated);
    }

    #[test]
    fn dual_oracle_on_zero_weight_is_exact() {
        let fd = fd_beta(&SpaceForm::euclidean(2), &RadialWeight::zero(), 1.0, 200);
        assert!((fd - 1.0).abs() < 1e-5);
    }

    #[test]
    fn ball_spectra() {
        let s = ball_spectrum(&SpaceForm::euclidean(2), &RadialWeight::zero(), 1.0, 5, &cfg()).unwrap();
        let expect = [0.0, 1.0, 1.0, 2.0, 2.0, 3.0];
        for (a, b) in s.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-8);
        }
        let s = ball_spectrum(&SpaceForm::euclidean(3), &RadialWeight::zero(), 1.0, 3, &cfg()).unwrap();
        assert_eq!(s.eigenvalues.len(), 4);
        assert!(s.eigenvalues[1..].iter().all(|v| (v - 1.0).abs() < 1e-8));
        let s = ball_spectrum(&SpaceForm::euclidean(2), &RadialWeight::Linear { a: 0.5 }, 1.0, 2, &cfg()).unwrap();
        assert_eq!(s.eigenvalues[1], s.eigenvalues[2]);
        assert_eq!(s.modes.as_deref(), Some(&[0, 1, 1][..]));
    }

    #[test]
    fn multiplicities() {
        assert_eq!(harmonic_multiplicity(2, 1), 2);
        assert_eq!(harmonic_multiplicity(2, 7), 2);
        assert_eq!(harmonic_multiplicity(3, 1), 3);
        assert_eq!(harmonic_multiplicity(3, 2), 5);
        assert_eq!(harmonic_multiplicity(4, 2), 9);
        assert_eq!(harmonic_multiplicity(5, 1), 5);
    }

    #[test]
    fn gh_closed_forms() {
        let sol = solve_mode(&SpaceForm::euclidean(2), &RadialWeight::zero(), 1, 1.0, &cfg()).unwrap();
        let p = compute_gh(&sol).unwrap();
        for (k, &t) in p.grid.iter().enumerate().step_by(97) {
            assert!((p.g[k] - 3.0 * t).abs() < 1e-9);
            assert!((p.h[k] - 2.0).abs() < 1e-9);
        }
        let rep = check_gh_monotonicity(&p, 1e-8);
        assert!(rep.passed && rep.nonnegative);
        assert!((rep.min_dg - 3.0).abs() < 1e-6);
        assert!(rep.max_dh.abs() < 1e-6);

        let sol = solve_mode(&SpaceForm::hyperbolic(2), &RadialWeight::zero(), 1, 1.5, &cfg()).unwrap();
        assert!(check_gh_monotonicity_scaled(&compute_gh(&sol).unwrap(), 1e-8).passed);

        let w = RadialWeight::Linear { a: 0.8 };
        let sol = solve_mode(&SpaceForm::euclidean(3), &w, 1, 1.0, &cfg()).unwrap();
        let p = compute_gh(&sol).unwrap();
        let t0 = p.grid[0];
        assert!((p.h[0] - 3.0).abs() < 1e-3);
        assert!((p.g[0] - (4.0 * t0 - t0 * t0 * w.dphi(t0))).abs() < 10.0 * t0 * t0);
    }

    #[test]
    fn growing_weight_is_rejected_then_flagged_with_waiver() {
        let e2 = SpaceForm::euclidean(2);
        let w = RadialWeight::Linear { a: -1.0 };
        assert!(matches!(solve_mode(&e2, &w, 1, 1.0, &cfg()), Err(Error::Inadmissible(_))));
        let waived = RadialConfig {
            waive_admissibility: true,
            ..cfg()
        };
        let sol = solve_mode(&e2, &w, 1, 1.0, &waived).unwrap();
        let rep = check_gh_monotonicity(&compute_gh(&sol).unwrap(), 1e-8);
        assert!(!rep.h_non_increasing);
    }

    #[test]
    fn normalization_and_constant_shift() {
        let form = SpaceForm::hyperbolic(3);
        let w = RadialWeight::Quadratic { a: 0.3, b: 0.2 };
        for mode in [1, 2, 3] {
            let base = solve_mode(&form, &w, mode, 1.2, &cfg()).unwrap().beta;
            let scaled = RadialConfig {
                leading_coefficient: 37.5,
                ..cfg()
            };
            let other = solve_mode(&form, &w, mode, 1.2, &scaled).unwrap().beta;
            assert!((base - other).abs() < 1e-10 * base);
        }
        let e = SpaceForm::euclidean(2);
        let a = sigma1_ball(&e, &RadialWeight::zero(), 0.7, &cfg()).unwrap().sigma;
        let b = sigma1_ball(&e, &RadialWeight::Constant { c: -4.0 }, 0.7, &cfg()).unwrap().sigma;
        assert_eq!(a, b);
    }

    #[test]
    fn extension_past_radius_keeps_the_solution() {
        let form = SpaceForm::euclidean(2);
        let w = RadialWeight::Linear { a: 0.5 };
        let short = solve_mode(&form, &w, 1, 1.0, &cfg()).unwrap();
        let long = solve_mode_to(&form, &w, 1, 1.0, 1.7, &cfg()).unwrap();
        assert_eq!(long.grid[long.radius_index], 1.0);
        assert_eq!(short.beta, long.beta);
        assert!((long.t_end() - 1.7).abs() < 1e-15);
        let (tv, dv) = long.eval(1.3);
        assert!(tv > short.value_at_radius() && dv > 0.0);
    }

    #[test]
    fn csv_columns() {
        let sol = solve_mode(&SpaceForm::euclidean(2), &RadialWeight::zero(), 1, 1.0, &cfg()).unwrap();
        let csv = sol.to_csv();
        assert!(csv.starts_with("t,T,Tprime,G,H\n"));
        assert_eq!(csv.lines().count(), 2049);
    }

    #[test]
    fn spherical_cap_ball() {
        // T = 2 tan(t/2) solves the n = 2 sphere equation; β₁ = 1 / sin R
        let sol = solve_mode(&SpaceForm::spherical(2), &RadialWeight::zero(), 1, 1.0, &cfg()).unwrap();
        assert!((sol.beta - 1.0 / 1f64.sin()).abs() < 1e-8);
        assert!(solve_mode(&SpaceForm::spherical(2), &RadialWeight::zero(), 1, 3.2, &cfg()).is_err());
    }

    fn concave_table(slopes: &[f64]) -> RadialWeight {
        let h = 0.02;
        let mut t = vec![0.0];
        let mut phi = vec![0.0];
        let mut s = 0.0;
        for (k, d) in slopes.iter().enumerate() {
            s -= d;
            t.push((k + 1) as f64 * h);
            phi.push(phi[k] + s * h);
        }
        RadialWeight::Tabulated(WeightTable::new(t, phi).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn quadratic_weights_keep_lemma_and_identity(a in 0.0f64..1.5, b in 0.0f64..0.8, r in 0.3f64..1.8, hyper in any::<bool>(), n in 2usize..4) {
            let form = if hyper { SpaceForm::hyperbolic(n) } else { SpaceForm::euclidean(n) };
            let w = RadialWeight::Quadratic { a, b };
            let sol = solve_mode(&form, &w, 1, r, &cfg()).unwrap();
            let bs = ball_sigma_from(&sol);
            prop_assert!(bs.discrepancy < 1e-6);
            let rep = check_gh_monotonicity_scaled(&compute_gh(&sol).unwrap(), 1e-8);
            prop_assert!(rep.passed, "{:?}", rep);
            prop_assert!(rep.nonnegative);
            let b2 = solve_mode(&form, &w, 2, r, &cfg()).unwrap().beta;
            prop_assert!(b2 > sol.beta);
        }

        #[test]
        fn tabulated_concave_weights_pass_lemma(steps in proptest::collection::vec(0.0f64..0.5, 120)) {
            let w = concave_table(&steps);
            let sol = solve_mode(&SpaceForm::euclidean(2), &w, 1, 2.0, &cfg()).unwrap();
            prop_assert!(check_gh_monotonicity_scaled(&compute_gh(&sol).unwrap(), 1e-8).passed);
        }
    }
}
