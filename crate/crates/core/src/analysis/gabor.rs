//! Least-squares Gabor fits of 2-D filters.
//!
//! Model, with `(u', v')` the offsets from the center rotated by `theta`:
//!
//! ```text
//! g(u, v) = amp * exp(-u'^2 / 2 s_par^2 - v'^2 / 2 s_perp^2) * cos(2 pi f u' + phase)
//! u' =  (u - x0) cos(theta) + (v - y0) sin(theta)
//! v' = -(u - x0) sin(theta) + (v - y0) cos(theta)
//! ```
//!
//! `u` is the column index and `v` the row index. The fit starts from the
//! energy centroid and the peak of the power spectrum, then runs damped
//! Gauss-Newton from four carrier phases and keeps the best result.

use std::f64::consts::{PI, TAU};

use nalgebra::{SMatrix, SVector};
use ndarray::ArrayView2;

use crate::error::{Error, Result};

const MAX_ITER: usize = 200;
const REL_TOL: f64 = 1e-8;
const N_PARAMS: usize = 8;
const MIN_SIGMA: f64 = 1e-2;

type Params = SVector<f64, N_PARAMS>;
type Normal = SMatrix<f64, N_PARAMS, N_PARAMS>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub x0: f64,
    pub y0: f64,
    /// Direction of the carrier wave vector, in `[0, pi)`.
    pub theta: f64,
    /// Cycles per pixel, `> 0`.
    pub freq: f64,
    /// In `[0, 2 pi)`.
    pub phase: f64,
    /// Envelope width along the carrier direction.
    pub sigma_par: f64,
    /// Envelope width across the carrier direction.
    pub sigma_perp: f64,
    pub amplitude: f64,
    /// `1 - SSE / SST` of the fit; negative for fits worse than the mean.
    pub r2: f64,
}

impl GaborParams {
    fn from_vec(p: &Params) -> Self {
        Self {
            x0: p[0],
            y0: p[1],
            theta: p[2],
            freq: p[3],
            phase: p[4],
            sigma_par: p[5],
            sigma_perp: p[6],
            amplitude: p[7],
            r2: f64::NAN,
        }
    }

    #[cfg(test)]
    fn to_vec(self) -> Params {
        Params::from([
            self.x0,
            self.y0,
            self.theta,
            self.freq,
            self.phase,
            self.sigma_par,
            self.sigma_perp,
            self.amplitude,
        ])
    }

    /// Model value at column `u`, row `v`.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let (du, dv) = (u - self.x0, v - self.y0);
        let (s, c) = self.theta.sin_cos();
        let up = du * c + dv * s;
        let vp = -du * s + dv * c;
        let env = (-up * up / (2.0 * self.sigma_par * self.sigma_par)
            - vp * vp / (2.0 * self.sigma_perp * self.sigma_perp))
            .exp();
        self.amplitude * env * (TAU * self.freq * up + self.phase).cos()
    }

    /// Same function with `amplitude > 0`, `freq > 0`, positive widths,
    /// `theta` in `[0, pi)` and `phase` in `[0, 2 pi)`.
    pub fn canonical(mut self) -> Self {
        self.sigma_par = self.sigma_par.abs();
        self.sigma_perp = self.sigma_perp.abs();
        if self.freq < 0.0 {
            self.freq = -self.freq;
            self.phase = -self.phase;
        }
        if self.amplitude < 0.0 {
            self.amplitude = -self.amplitude;
            self.phase += PI;
        }
        // theta + pi flips u', equivalent to negating the phase
        let turns = (self.theta / PI).floor();
        if turns != 0.0 {
            self.theta -= turns * PI;
            if (turns as i64).rem_euclid(2) == 1 {
                self.phase = -self.phase;
            }
        }
        if self.theta >= PI {
            self.theta -= PI;
            self.phase = -self.phase;
        }
        self.phase = self.phase.rem_euclid(TAU);
        if self.phase >= TAU {
            self.phase = 0.0;
        }
        self
    }

    /// Render on a `rows x cols` grid.
    pub fn render(&self, rows: usize, cols: usize) -> ndarray::Array2<f64> {
        ndarray::Array2::from_shape_fn((rows, cols), |(v, u)| self.eval(u as f64, v as f64))
    }
}

/// Model value and gradient with respect to the eight parameters.
fn eval_grad(p: &Params, u: f64, v: f64) -> (f64, Params) {
    let (x0, y0, theta, f, phase, sp, sq, amp) = (p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]);
    let (du, dv) = (u - x0, v - y0);
    let (s, c) = theta.sin_cos();
    let up = du * c + dv * s;
    let vp = -du * s + dv * c;
    let env = (-up * up / (2.0 * sp * sp) - vp * vp / (2.0 * sq * sq)).exp();
    let arg = TAU * f * up + phase;
    let (sn, cs) = arg.sin_cos();
    let g = amp * env * cs;

    let dg_dup = amp * env * (-up / (sp * sp) * cs - TAU * f * sn);
    let dg_dvp = -g * vp / (sq * sq);
    let grad = Params::from([
        dg_dup * -c + dg_dvp * s,
        dg_dup * -s + dg_dvp * -c,
        dg_dup * vp + dg_dvp * -up,
        -amp * env * sn * TAU * up,
        -amp * env * sn,
        g * up * up / (sp * sp * sp),
        g * vp * vp / (sq * sq * sq),
        env * cs,
    ]);
    (g, grad)
}

fn sse(p: &Params, filter: &ArrayView2<f64>) -> f64 {
    let gp = GaborParams::from_vec(p);
    filter
        .indexed_iter()
        .map(|((v, u), &y)| {
            let r = y - gp.eval(u as f64, v as f64);
            r * r
        })
        .sum()
}

struct Init {
    x0: f64,
    y0: f64,
    theta: f64,
    freq: f64,
    sigma: f64,
}

/// Energy centroid, spread and dominant spatial frequency.
fn initial_guess(filter: &ArrayView2<f64>) -> Init {
    let (rows, cols) = filter.dim();
    let mean = filter.mean().unwrap_or(0.0);
    let mut w_sum = 0.0;
    let (mut mx, mut my) = (0.0, 0.0);
    for ((v, u), &y) in filter.indexed_iter() {
        let w = y * y;
        w_sum += w;
        mx += w * u as f64;
        my += w * v as f64;
    }
    let (x0, y0) = if w_sum > 0.0 {
        (mx / w_sum, my / w_sum)
    } else {
        ((cols as f64 - 1.0) / 2.0, (rows as f64 - 1.0) / 2.0)
    };
    let mut spread = 0.0;
    for ((v, u), &y) in filter.indexed_iter() {
        let (du, dv) = (u as f64 - x0, v as f64 - y0);
        spread += y * y * (du * du + dv * dv);
    }
    let sigma = if w_sum > 0.0 { (spread / w_sum).sqrt() } else { 1.0 }.clamp(0.5, rows.max(cols) as f64);

    // power spectrum on a 4x oversampled grid over the half plane fy >= 0
    let grid = 4 * rows.max(cols);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for ky in 0..=grid / 2 {
        let fy = ky as f64 / grid as f64;
        for kx in 0..grid {
            let mut fx = kx as f64 / grid as f64;
            if fx >= 0.5 {
                fx -= 1.0;
            }
            if ky == 0 && fx < 0.0 {
                continue;
            }
            if fx * fx + fy * fy < 1e-12 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for ((v, u), &y) in filter.indexed_iter() {
                let a = TAU * (fx * u as f64 + fy * v as f64);
                let (s, c) = a.sin_cos();
                re += (y - mean) * c;
                im -= (y - mean) * s;
            }
            let power = re * re + im * im;
            if power > best.0 {
                best = (power, fx, fy);
            }
        }
    }
    let (_, fx, fy) = best;
    Init {
        x0,
        y0,
        theta: fy.atan2(fx).rem_euclid(PI),
        freq: (fx * fx + fy * fy).sqrt(),
        sigma,
    }
}

/// Levenberg-damped Gauss-Newton from `p`. Returns the final parameters and SSE.
fn refine(mut p: Params, filter: &ArrayView2<f64>) -> (Params, f64) {
    let mut cost = sse(&p, filter);
    let mut damping = 1e-3;
    for _ in 0..MAX_ITER {
        let mut jtj = Normal::zeros();
        let mut jtr = Params::zeros();
        for ((v, u), &y) in filter.indexed_iter() {
            let (g, grad) = eval_grad(&p, u as f64, v as f64);
            let r = y - g;
            jtj += grad * grad.transpose();
            jtr += grad * r;
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj;
            for i in 0..N_PARAMS {
                a[(i, i)] += damping * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.cholesky().map(|ch| ch.solve(&jtr)) else {
                damping *= 10.0;
                continue;
            };
            let mut cand = p + step;
            cand[5] = cand[5].abs().max(MIN_SIGMA);
            cand[6] = cand[6].abs().max(MIN_SIGMA);
            let c = sse(&cand, filter);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                p = cand;
                cost = c;
                damping = (damping * 0.3).max(1e-9);
                improved = true;
                if rel < REL_TOL {
                    return (p, cost);
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, cost)
}

/// Fit a Gabor function to a `rows x cols` filter (row index = `v`).
///
/// A fit that does not converge still returns its best iterate; check `r2`.
pub fn fit_gabor(filter: ArrayView2<f64>) -> Result<GaborParams> {
    if filter.is_empty() {
        return Err(Error::Degenerate("empty filter".into()));
    }
    if filter.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("filter".into()));
    }
    let mean = filter.mean().unwrap_or(0.0);
    let sst: f64 = filter.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(sst > 0.0) {
        return Err(Error::Degenerate("constant filter".into()));
    }
    let init = initial_guess(&filter);
    let mut best: Option<(Params, f64)> = None;
    for k in 0..4 {
        let phase = k as f64 * PI / 2.0;
        let mut p = Params::from([
            init.x0, init.y0, init.theta, init.freq, phase, init.sigma, init.sigma, 1.0,
        ]);
        // least-squares amplitude for the remaining parameters
        p[7] = 1.0;
        let unit = GaborParams::from_vec(&p);
        let (mut num, mut den) = (0.0, 0.0);
        for ((v, u), &y) in filter.indexed_iter() {
            let h = unit.eval(u as f64, v as f64);
            num += y * h;
            den += h * h;
        }
        p[7] = if den > 0.0 { num / den } else { 0.0 };
        if p[7] == 0.0 {
            p[7] = filter.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        let (q, cost) = refine(p, &filter);
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((q, cost));
        }
    }
    let (p, cost) = best.expect("four starts");
    let mut out = GaborParams::from_vec(&p).canonical();
    out.r2 = 1.0 - cost / sst;
    Ok(out)
}
