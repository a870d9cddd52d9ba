//! Dormand–Prince 5(4) integration with output on a prescribed grid.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];

// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    /// Absolute tolerance per component, as a fraction of `rtol` times the
    /// largest magnitude that component has reached so far.
    pub atol_fraction: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol_fraction: 1e-6,
            max_steps: 1_000_000,
        }
    }
}

/// Integrates `y' = f(t, y)` from `grid[0]` with `y(grid[0]) = y0`, landing
/// exactly on every grid point. `check` is called on each accepted state and
/// may abort the integration.
pub fn integrate_on_grid<const N: usize, F, K>(
    f: F,
    y0: [f64; N],
    grid: &[f64],
    opts: OdeOptions,
    mut check: K,
) -> Result<Vec<[f64; N]>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    K: FnMut(f64, &[f64; N]) -> Result<()>,
{
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(k) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!("output grid not increasing at index {k}")));
    }
    let mut out = Vec::with_capacity(grid.len());
    out.push(y0);
    let mut t = grid[0];
    let mut y = y0;
    let mut scale = y0.map(f64::abs);
    let mut k1 = f(t, &y);
    let mut h = grid.get(1).map_or(0.0, |g| g - t);
    let mut steps = 0usize;

    for &target in &grid[1..] {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::StepBudget { steps, target });
            }
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            if step <= 1e-14 * t.abs().max(1e-300) {
                return Err(Error::StepUnderflow { t, step });
            }
            let mut k = [[0.0; N]; 7];
            k[0] = k1;
            for s in 1..7 {
                let mut ys = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        for c in 0..N {
                            ys[c] += step * a * kj[c];
                        }
                    }
                }
                if s == 6 {
                    // 7th stage is evaluated at the 5th-order solution (FSAL)
                    k[6] = f(t + step, &ys);
                    let mut err = 0.0f64;
                    for c in 0..N {
                        let e: f64 = (0..7).map(|j| E[j] * k[j][c]).sum::<f64>() * step;
                        let atol = opts.rtol * opts.atol_fraction * scale[c];
                        let denom = (atol + opts.rtol * y[c].abs().max(ys[c].abs())).max(f64::MIN_POSITIVE);
                        err = err.max((e / denom).abs());
                    }
                    steps += 1;
                    if !err.is_finite() {
                        h = 0.2 * step;
                        break;
                    }
                    let factor = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                    if err <= 1.0 {
                        t = if last { target } else { t + step };
                        y = ys;
                        k1 = k[6];
                        for c in 0..N {
                            scale[c] = scale[c].max(y[c].abs());
                        }
                        check(t, &y)?;
                        // a step shortened to hit the grid says little about the next one
                        if !(last && step < h) {
                            h = step * factor;
                        }
                    } else {
                        h = step * factor;
                    }
                    break;
                }
                k[s] = f(t + C[s] * step, &ys);
            }
        }
        out.push(y);
    }
    Ok(out)
}
