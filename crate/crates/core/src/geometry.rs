//! Space forms, radial weights and the measures they induce on geodesic balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::quadrature::{self, AdaptiveOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Euclidean,
    Hyperbolic,
    /// Upper hemisphere of the unit sphere; radial arguments must stay below π.
    Spherical,
}

impl Curvature {
    pub fn kappa(self) -> f64 {
        match self {
            Curvature::Euclidean => 0.0,
            Curvature::Hyperbolic => -1.0,
            Curvature::Spherical => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Curvature::Euclidean => "euclidean",
            Curvature::Hyperbolic => "hyperbolic",
            Curvature::Spherical => "spherical",
        }
    }
}

/// Simply connected space form of constant curvature and dimension `dim ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceForm {
    pub curvature: Curvature,
    pub dim: usize,
}

impl SpaceForm {
    pub fn new(curvature: Curvature, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {dim}")));
        }
        Ok(Self { curvature, dim })
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(Curvature::Euclidean, dim).expect("dimension >= 2")
    }

    pub fn hyperbolic(dim: usize) -> Self {
        Self::new(Curvature::Hyperbolic, dim).expect("dimension >= 2")
    }

    pub fn spherical(dim: usize) -> Self {
        Self::new(Curvature::Spherical, dim).expect("dimension >= 2")
    }

    fn check_radial(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("radial argument must be nonnegative, got {t}")));
        }
        if self.curvature == Curvature::Spherical && t >= PI {
            return Err(Error::Domain(format!("hemisphere model requires t < π, got {t}")));
        }
        Ok(())
    }

    /// Warped-product coefficient `S_κ(t)`: `sin t`, `t` or `sinh t`.
    pub fn s_kappa(&self, t: f64) -> Result<f64> {
        self.check_radial(t)?;
        Ok(self.s(t))
    }

    /// `C_κ = S_κ'`.
    pub fn c_kappa(&self, t: f64) -> Result<f64> {
        self.check_radial(t)?;
        Ok(self.c(t))
    }

    #[inline]
    pub(crate) fn s(&self, t: f64) -> f64 {
        match self.curvature {
            Curvature::Euclidean => t,
            Curvature::Hyperbolic => t.sinh(),
            Curvature::Spherical => t.sin(),
        }
    }

    #[inline]
    pub(crate) fn c(&self, t: f64) -> f64 {
        match self.curvature {
            Curvature::Euclidean => 1.0,
            Curvature::Hyperbolic => t.cosh(),
            Curvature::Spherical => t.cos(),
        }
    }

    /// Surface measure of the unit `(n-1)`-sphere.
    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_area(self.dim)
    }
}

/// Lanczos approximation (g = 7, 9 terms) of Γ(x) for x ≥ 1/2.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const P: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = P[0];
    for (i, p) in P.iter().enumerate().skip(1) {
        a += p / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// `ω_{n-1} = 2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Samples of `φ` on a strictly increasing grid. Values between nodes are
/// linearly interpolated (and linearly extrapolated outside the table);
/// derivatives are centered differences with the local grid spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    t: Vec<f64>,
    phi: Vec<f64>,
}

impl WeightTable {
    pub fn new(t: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if t.len() != phi.len() {
            return Err(Error::InvalidArgument("weight table columns differ in length".into()));
        }
        if t.len() < 3 {
            return Err(Error::InvalidArgument("weight table needs at least 3 rows".into()));
        }
        if let Some(bad) = t.iter().chain(&phi).find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight table has non-finite entry {bad}")));
        }
        if let Some(k) = t.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "weight table t column is not strictly increasing at row {} ({} then {})",
                k + 1,
                t[k],
                t[k + 1]
            )));
        }
        Ok(Self { t, phi })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    fn interval(&self, x: f64) -> usize {
        let k = self.t.partition_point(|&s| s <= x);
        k.clamp(1, self.t.len() - 1) - 1
    }

    fn spacing(&self, x: f64) -> f64 {
        let k = self.interval(x);
        self.t[k + 1] - self.t[k]
    }

    fn value(&self, x: f64) -> f64 {
        let k = self.interval(x);
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let s = (x - t0) / (t1 - t0);
        self.phi[k] + s * (self.phi[k + 1] - self.phi[k])
    }

    fn derivative(&self, x: f64) -> f64 {
        let h = self.spacing(x);
        (self.value(x + h) - self.value(x - h)) / (2.0 * h)
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let h = self.spacing(x);
        (self.value(x + h) - 2.0 * self.value(x) + self.value(x - h)) / (h * h)
    }

    /// Parses a two-column `t, phi` CSV. Blank lines and lines starting
    /// with `#` are skipped; a non-numeric first row is treated as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut t = Vec::new();
        let mut phi = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    t.push(a);
                    phi.push(b);
                }
                _ if t.is_empty() => continue,
                _ => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("non-numeric row `{line}`"),
                    })
                }
            }
        }
        Self::new(t, phi)
    }
}

/// Radial weight `φ(t)`; the measure is `e^{-φ} dv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RadialWeight {
    Constant { c: f64 },
    /// `φ(t) = −a t`.
    Linear { a: f64 },
    /// `φ(t) = −a t − b t²`.
    Quadratic { a: f64, b: f64 },
    Tabulated(WeightTable),
}

impl RadialWeight {
    pub fn zero() -> Self {
        RadialWeight::Constant { c: 0.0 }
    }

    pub fn phi(&self, t: f64) -> f64 {
        match self {
            RadialWeight::Constant { c } => *c,
            RadialWeight::Linear { a } => -a * t,
            RadialWeight::Quadratic { a, b } => -a * t - b * t * t,
            RadialWeight::Tabulated(tab) => tab.value(t),
        }
    }

    pub fn dphi(&self, t: f64) -> f64 {
        match self {
            RadialWeight::Constant { .. } => 0.0,
            RadialWeight::Linear { a } => -a,
            RadialWeight::Quadratic { a, b } => -a - 2.0 * b * t,
            RadialWeight::Tabulated(tab) => tab.derivative(t),
        }
    }

    pub fn d2phi(&self, t: f64) -> f64 {
        match self {
            RadialWeight::Constant { .. } | RadialWeight::Linear { .. } => 0.0,
            RadialWeight::Quadratic { b, .. } => -2.0 * b,
            RadialWeight::Tabulated(tab) => tab.second_derivative(t),
        }
    }

    /// `e^{-φ(t)}`.
    #[inline]
    pub fn density(&self, t: f64) -> f64 {
        (-self.phi(t)).exp()
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RadialWeight::Constant { .. })
    }

    /// Default admissibility tolerance: tight for closed forms, looser for
    /// tables whose derivatives carry difference round-off.
    pub fn default_property_tol(&self) -> f64 {
        match self {
            RadialWeight::Tabulated(_) => 1e-8,
            _ => 1e-12,
        }
    }

    /// Short identifier used in reports and CSV rows.
    pub fn label(&self) -> String {
        match self {
            RadialWeight::Constant { c } => format!("const({c})"),
            RadialWeight::Linear { a } => format!("linear({a})"),
            RadialWeight::Quadratic { a, b } => format!("quadratic({a};{b})"),
            RadialWeight::Tabulated(tab) => format!(
                "tabulated({} rows on [{}, {}])",
                tab.t.len(),
                tab.t[0],
                tab.t[tab.t.len() - 1]
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyIReport {
    pub t_max: f64,
    pub samples: usize,
    pub tol: f64,
    /// Worst (largest) sampled φ′ and the `t` where it occurs.
    pub max_dphi: f64,
    pub max_dphi_at: f64,
    pub max_d2phi: f64,
    pub max_d2phi_at: f64,
    pub admissible: bool,
}

impl PropertyIReport {
    pub fn diagnostic(&self) -> String {
        format!(
            "on [0, {:.4}]: max φ′ = {:.3e} at t = {:.4}, max φ″ = {:.3e} at t = {:.4} (tol {:.1e})",
            self.t_max, self.max_dphi, self.max_dphi_at, self.max_d2phi, self.max_d2phi_at, self.tol
        )
    }
}

/// Checks `φ′ ≤ tol` and `φ″ ≤ tol` on a uniform grid of `samples` points over `[0, t_max]`.
pub fn validate_property_i(w: &RadialWeight, t_max: f64, samples: usize, tol: f64) -> Result<PropertyIReport> {
    if !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    if samples < 16 {
        return Err(Error::InvalidArgument(format!("need at least 16 samples, got {samples}")));
    }
    let mut rep = PropertyIReport {
        t_max,
        samples,
        tol,
        max_dphi: f64::NEG_INFINITY,
        max_dphi_at: 0.0,
        max_d2phi: f64::NEG_INFINITY,
        max_d2phi_at: 0.0,
        admissible: false,
    };
    for k in 0..samples {
        let t = t_max * k as f64 / (samples - 1) as f64;
        let (d1, d2) = (w.dphi(t), w.d2phi(t));
        if !d1.is_finite() || !d2.is_finite() {
            return Err(Error::Domain(format!("weight derivatives not finite at t = {t}")));
        }
        if d1 > rep.max_dphi {
            rep.max_dphi = d1;
            rep.max_dphi_at = t;
        }
        if d2 > rep.max_d2phi {
            rep.max_d2phi = d2;
            rep.max_d2phi_at = t;
        }
    }
    rep.admissible = rep.max_dphi <= tol && rep.max_d2phi <= tol;
    Ok(rep)
}

/// `ω_{n-1} ∫_0^R S_κ(t)^{n-1} e^{-φ(t)} dt`.
pub fn ball_weighted_volume(form: &SpaceForm, w: &RadialWeight, radius: f64) -> Result<f64> {
    ball_weighted_volume_with(form, w, radius, AdaptiveOptions::default())
}

pub fn ball_weighted_volume_with(
    form: &SpaceForm,
    w: &RadialWeight,
    radius: f64,
    opts: AdaptiveOptions,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    form.check_radial(radius)?;
    let p = (form.dim - 1) as i32;
    let integral = quadrature::integrate(|t| form.s(t).powi(p) * w.density(t), 0.0, radius, opts)?;
    Ok(form.unit_sphere_area() * integral)
}

/// `ω_{n-1} S_κ(R)^{n-1} e^{-φ(R)}`.
pub fn ball_boundary_weighted_measure(form: &SpaceForm, w: &RadialWeight, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let s = form.s_kappa(radius)?;
    Ok(form.unit_sphere_area() * s.powi(form.dim as i32 - 1) * w.density(radius))
}

/// Hyperbolic distance from the origin of a point of the Poincaré disk
/// (curvature −1), `log((1+|x|)/(1−|x|))`.
pub fn poincare_distance(x: [f64; 2]) -> Result<f64> {
    poincare_distance_radius(x[0].hypot(x[1]))
}

pub fn poincare_distance_radius(r: f64) -> Result<f64> {
    if !(r >= 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("point must lie in the open unit disk, |x| = {r}")));
    }
    Ok(2.0 * r.atanh())
}

/// Conformal factor `ρ(x) = 2 / (1 − |x|²)` of the Poincaré disk.
pub fn conformal_factor(x: [f64; 2]) -> Result<f64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if !(r2 < 1.0) {
        return Err(Error::Domain(format!("point must lie in the open unit disk, |x|² = {r2}")));
    }
    Ok(2.0 / (1.0 - r2))
}
