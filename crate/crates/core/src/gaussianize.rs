//! Coordinate-wise rank Gaussianization, `x_i = Phi^-1(cdf(|s_i|))`.
//!
//! The cdf of each coordinate's magnitude is estimated nonparametrically
//! from a sorted table of training magnitudes. Plotting positions use
//! `(k + t) / (N + 1)`, where `k` counts table entries strictly below the
//! query and `t` interpolates linearly inside the bracketing interval, so
//! every output is finite.

use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{shape_err, Error, Result};

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

// Acklam's rational approximation (relative error ~1.15e-9).
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549671010115381e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Standard normal quantile for `p` in `(0, 1)`.
///
/// Rational initial guess followed by one Halley step against the exact cdf.
/// The upper half is evaluated as `-Phi^-1(1 - p)` so the function is odd
/// about 1/2.
pub fn inverse_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("probability {p} outside (0, 1)")));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    let x = acklam_lower(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Per-coordinate sorted magnitude tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussianizer {
    tables: Vec<Vec<f64>>,
}

impl Gaussianizer {
    /// Sort `|responses|` column by column (`responses` is `N x M`, `N >= 2`).
    pub fn fit(responses: ArrayView2<f64>) -> Result<Self> {
        if responses.nrows() < 2 {
            return Err(Error::Degenerate(format!(
                "need at least 2 samples to fit, got {}",
                responses.nrows()
            )));
        }
        let mut tables = Vec::with_capacity(responses.ncols());
        for col in responses.axis_iter(Axis(1)) {
            let mut t: Vec<f64> = col.iter().map(|v| v.abs()).collect();
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("responses to fit".into()));
            }
            t.sort_by(f64::total_cmp);
            tables.push(t);
        }
        Ok(Self { tables })
    }

    /// Rebuild from stored tables; each must be sorted, nonnegative and of
    /// one common length `N >= 2`.
    pub fn from_tables(tables: Vec<Vec<f64>>) -> Result<Self> {
        let n = tables.first().map_or(0, Vec::len);
        for t in &tables {
            if t.len() != n || n < 2 {
                return Err(Error::Format("gaussianizer tables must share a length >= 2".into()));
            }
            if t.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || t.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Format("gaussianizer table not sorted nonnegative".into()));
            }
        }
        Ok(Self { tables })
    }

    pub fn dims(&self) -> usize {
        self.tables.len()
    }

    /// Samples per table.
    pub fn n(&self) -> usize {
        self.tables.first().map_or(0, Vec::len)
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    /// Tables as a `dims x N` matrix.
    pub fn to_array(&self) -> Array2<f64> {
        let (m, n) = (self.dims(), self.n());
        Array2::from_shape_fn((m, n), |(i, j)| self.tables[i][j])
    }

    /// Plotting position of `|s|` in table `dim`.
    pub fn probability(&self, dim: usize, s: f64) -> f64 {
        let t = &self.tables[dim];
        let n = t.len();
        let denom = (n + 1) as f64;
        let v = s.abs();
        if !(v > t[0]) {
            return 1.0 / denom;
        }
        if v > t[n - 1] {
            return n as f64 / denom;
        }
        let k = t.partition_point(|&e| e < v);
        let (lo, hi) = (t[k - 1], t[k]);
        let frac = (v - lo) / (hi - lo);
        (k as f64 + frac) / denom
    }

    pub fn transform(&self, s: ArrayView1<f64>) -> Result<Array1<f64>> {
        if s.len() != self.dims() {
            return Err(shape_err(format!(
                "vector of length {}, gaussianizer has {} dims",
                s.len(),
                self.dims()
            )));
        }
        s.iter()
            .enumerate()
            .map(|(i, &v)| inverse_normal_cdf(self.probability(i, v)))
            .collect::<Result<Vec<_>>>()
            .map(Array1::from)
    }

    pub fn transform_batch(&self, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        if s.ncols() != self.dims() {
            return Err(shape_err(format!(
                "{} columns, gaussianizer has {} dims",
                s.ncols(),
                self.dims()
            )));
        }
        let mut out = Array2::zeros(s.raw_dim());
        for (mut o, row) in out.rows_mut().into_iter().zip(s.rows()) {
            for (i, (dst, &v)) in o.iter_mut().zip(row.iter()).enumerate() {
                *dst = inverse_normal_cdf(self.probability(i, v))?;
            }
        }
        Ok(out)
    }
}
