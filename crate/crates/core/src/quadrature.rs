//! Fixed and adaptive quadrature rules used across the crate.

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Two-point Gauss–Legendre abscissae on `[0, 1]`.
pub const GAUSS2_UNIT: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_882_254_574_390_250_978_7,
    0.5 + 0.288_675_134_594_812_882_254_574_390_250_978_7,
];

/// Degree-4 symmetric triangle rule (6 points, all strictly interior).
/// Entries are `(barycentric coordinates, weight)` with weights summing to 1.
pub const TRI6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445_948_490_915_964_886_32;
    const B1: f64 = 1.0 - 2.0 * A1;
    const W1: f64 = 0.223_381_589_678_011_465_70;
    const A2: f64 = 0.091_576_213_509_770_743_46;
    const B2: f64 = 1.0 - 2.0 * A2;
    const W2: f64 = 0.109_951_743_655_321_867_64;
    [
        ([B1, A1, A1], W1),
        ([A1, B1, A1], W1),
        ([A1, A1, B1], W1),
        ([B2, A2, A2], W2),
        ([A2, B2, A2], W2),
        ([A2, A2, B2], W2),
    ]
};

/// Edge-midpoint rule, exact for quadratics.
pub const TRI3_MIDPOINT: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Gauss–Kronrod 7/15 on a single interval: `(kronrod, |kronrod - gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    /// Relative floor, so that large integrals do not chase round-off.
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-13,
            max_intervals: 400,
        }
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: AdaptiveOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut pieces = vec![{
        let (v, e) = gk15(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2).sum();
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= tol {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: err,
                tolerance: tol,
                intervals: pieces.len(),
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_high_degree_polynomials() {
        // K15 integrates degree 22 exactly, G7 degree 13.
        let (k, _) = gk15(&|x: f64| x.powi(22), 0.0, 1.0);
        assert!((k - 1.0 / 23.0).abs() < 1e-15);
        let (k, e) = gk15(&|x: f64| 3.0 * x * x, -1.0, 2.0);
        assert!((k - 9.0).abs() < 1e-13 && e < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, AdaptiveOptions::default()).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let r = integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, opts);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }

    fn tri_monomial(rule: &[([f64; 3], f64)], p: i32, q: i32) -> f64 {
        // reference triangle (0,0),(1,0),(0,1), area 1/2
        rule.iter()
            .map(|(l, w)| w * 0.5 * l[1].powi(p) * l[2].powi(q))
            .sum()
    }

    fn factorial(n: i32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn triangle_rules_reach_their_degree() {
        // ∫ x^p y^q over reference triangle = p! q! / (p+q+2)!
        for p in 0..=4 {
            for q in 0..=(4 - p) {
                let exact = factorial(p) * factorial(q) / factorial(p + q + 2);
                assert!((tri_monomial(&TRI6, p, q) - exact).abs() < 1e-15, "{p} {q}");
                if p + q <= 2 {
                    assert!((tri_monomial(&TRI3_MIDPOINT, p, q) - exact).abs() < 1e-15);
                }
            }
        }
    }
}
