//! Adaptive Dormand–Prince 5(4) integrator for real ODE systems.
//!
//! Steps are clipped so that every requested output time is hit exactly;
//! no dense-output interpolation is involved.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    /// Absolute tolerance, multiplied componentwise by `scale` when given.
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            h0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

impl std::ops::AddAssign for OdeStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates y' = f(t, y) from `t0` and returns y at each time in `t_out`.
///
/// `t_out` must be non-decreasing and not before `t0`. `scale`, if given,
/// multiplies the absolute tolerance per component.
pub fn solve<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_out: &[f64],
    scale: Option<&[f64]>,
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut out = Vec::with_capacity(t_out.len());
    let mut y = y0.to_vec();
    let mut t = t0;
    let atol: Vec<f64> = match scale {
        Some(s) => s.iter().map(|v| opts.atol * v).collect(),
        None => vec![opts.atol; n],
    };

    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;

    let err_norm = |y: &[f64], y_new: &[f64], e: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let sc = atol[i] + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e[i] / sc;
            acc += r * r;
        }
        (acc / n.max(1) as f64).sqrt()
    };

    let mut h = match opts.h0 {
        Some(h) => h,
        None => {
            let d0 = err_norm(&y, &y, &y);
            let d1 = err_norm(&y, &y, &k[0]);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            }
        }
    };

    for &target in t_out {
        if target < t {
            return Err(Error::InvalidParameter(format!(
                "output time {target} precedes current time {t}"
            )));
        }
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::MaxStepsExceeded(opts.max_steps));
            }
            let remaining = target - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            if step <= 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepSizeUnderflow { t });
            }

            let stages: [(f64, &[f64]); 6] = [
                (C2, &[A21]),
                (C3, &[A31, A32]),
                (C4, &[A41, A42, A43]),
                (C5, &[A51, A52, A53, A54]),
                (1.0, &[A61, A62, A63, A64, A65]),
                (1.0, &[A71, 0.0, A73, A74, A75, A76]),
            ];
            for (s, (c, a)) in stages.iter().enumerate() {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, aj) in a.iter().enumerate() {
                        acc += aj * k[j][i];
                    }
                    tmp[i] = y[i] + step * acc;
                }
                f(t + c * step, &tmp, &mut k[s + 1]);
                stats.evaluations += 1;
                if s == 5 {
                    y_new.copy_from_slice(&tmp);
                }
            }
            for i in 0..n {
                tmp[i] = step
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
            }
            let err = err_norm(&y, &y_new, &tmp);
            if !err.is_finite() {
                stats.rejected += 1;
                h = step * 0.2;
                continue;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                stats.accepted += 1;
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                // a clipped final step says nothing about the natural step size
                if !last || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}
