//! Overcomplete sparse coding.
//!
//! Codes minimize `|x - A s|^2 / 2 + lambda * f(s)` and are found by plain
//! gradient descent from `s = A^T x`. The dictionary is learned by one
//! gradient step on the batch objective per epoch, followed by
//! renormalizing every basis function to unit length.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Error, Result};
use crate::linalg::{all_finite, map_row_chunks, sign};
use crate::spca::{DEFAULT_INFER_RATE, DEFAULT_INFER_STEPS};
use crate::EpochStats;

/// Sparsity penalty applied to each code coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Penalty {
    /// `|s|`
    Abs,
    /// `log cosh(s)`
    #[default]
    LogCosh,
}

impl Penalty {
    #[inline]
    pub fn value(self, s: f64) -> f64 {
        match self {
            Penalty::Abs => s.abs(),
            Penalty::LogCosh => log_cosh(s),
        }
    }

    #[inline]
    pub fn derivative(self, s: f64) -> f64 {
        match self {
            Penalty::Abs => sign(s),
            Penalty::LogCosh => s.tanh(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::Abs => "abs",
            Penalty::LogCosh => "logcosh",
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" => Ok(Penalty::Abs),
            "logcosh" => Ok(Penalty::LogCosh),
            other => Err(Error::InvalidArgument(format!("unknown penalty {other:?}"))),
        }
    }
}

/// `log cosh(s)` without overflow for large `|s|`.
fn log_cosh(s: f64) -> f64 {
    let a = s.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `f(s)` summed over coordinates.
pub fn sparsity(penalty: Penalty, s: ArrayView1<f64>) -> f64 {
    s.iter().map(|&v| penalty.value(v)).sum()
}

/// Dictionary `A` (`L x M`) with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryModel {
    a: Array2<f64>,
    lambda: f64,
    penalty: Penalty,
}

impl DictionaryModel {
    pub fn new(a: Array2<f64>, lambda: f64, penalty: Penalty) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if !all_finite(a.iter()) {
            return Err(Error::NonFinite("dictionary".into()));
        }
        Ok(Self { a, lambda, penalty })
    }

    /// Gaussian entries, columns normalized to unit length.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        lambda: f64,
        penalty: Penalty,
        rng: &mut R,
    ) -> Result<Self> {
        let a = Array2::from_shape_fn((input_dim, output_dim), |_| rng.sample::<f64, _>(StandardNormal));
        let mut m = Self::new(a, lambda, penalty)?;
        m.normalize_columns();
        Ok(m)
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn input_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.a.ncols()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(shape_err(format!(
                "input dim {cols}, dictionary expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn normalize_columns(&mut self) {
        for mut col in self.a.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 0.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
    }

    /// Gradient-descent inference from `s = A^T x`:
    /// `s += rate * [A^T (x - A s) - lambda * f'(s)]`.
    pub fn infer(&self, x: ArrayView1<f64>, steps: usize, rate: f64) -> Result<Array1<f64>> {
        Ok(self.infer_batch(x.insert_axis(Axis(0)), steps, rate)?.row(0).to_owned())
    }

    pub fn infer_batch(&self, x: ArrayView2<f64>, steps: usize, rate: f64) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let gram = self.a.t().dot(&self.a);
        let (lambda, penalty) = (self.lambda, self.penalty);
        map_row_chunks(x, self.output_dim(), |chunk| {
            let b = chunk.dot(&self.a);
            let mut s = b.clone();
            for _ in 0..steps {
                let mut step = &b - &s.dot(&gram);
                if lambda != 0.0 {
                    Zip::from(&mut step)
                        .and(&s)
                        .for_each(|d, &v| *d -= lambda * penalty.derivative(v));
                }
                s.scaled_add(rate, &step);
            }
            if !all_finite(s.iter()) {
                return Err(Error::NonFinite(
                    "sparse code inference diverged (rate too large?)".into(),
                ));
            }
            Ok(s)
        })
    }

    /// Canonical response: [`infer`](Self::infer) with 100 steps at rate 0.01.
    pub fn respond(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.infer(x, DEFAULT_INFER_STEPS, DEFAULT_INFER_RATE)
    }

    pub fn respond_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.infer_batch(x, DEFAULT_INFER_STEPS, DEFAULT_INFER_RATE)
    }

    /// Mean over rows of `|x - A s|^2 / 2 + lambda * f(s)`.
    pub fn objective(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<f64> {
        self.check_input(x.ncols())?;
        if s.ncols() != self.output_dim() || s.nrows() != x.nrows() {
            return Err(shape_err("code matrix does not match batch"));
        }
        let n = x.nrows() as f64;
        let resid = &x - &s.dot(&self.a.t());
        let rec = resid.iter().map(|v| v * v).sum::<f64>() / 2.0;
        let pen: f64 = s.iter().map(|&v| self.penalty.value(v)).sum();
        Ok((rec + self.lambda * pen) / n)
    }

    /// Gradient of [`objective`](Self::objective) with respect to the codes.
    pub fn objective_grad_codes(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let n = x.nrows() as f64;
        let resid = &x - &s.dot(&self.a.t());
        let mut g = resid.dot(&self.a) / -n;
        Zip::from(&mut g)
            .and(&s)
            .for_each(|g, &v| *g += self.lambda * self.penalty.derivative(v) / n);
        Ok(g)
    }

    /// Gradient of [`objective`](Self::objective) with respect to `A`,
    /// `-<(x - A s) s^T>`.
    pub fn objective_grad_dict(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let n = x.nrows() as f64;
        let resid = &x - &s.dot(&self.a.t());
        Ok(resid.t().dot(&s) / -n)
    }
}

/// Hyperparameters for dictionary learning.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryTrainer {
    pub output_dim: usize,
    pub lambda: f64,
    pub penalty: Penalty,
    pub epochs: usize,
    pub lr: f64,
    pub infer_steps: usize,
    pub infer_rate: f64,
}

impl DictionaryTrainer {
    pub fn new(output_dim: usize, lambda: f64, epochs: usize, lr: f64) -> Self {
        Self {
            output_dim,
            lambda,
            penalty: Penalty::default(),
            epochs,
            lr,
            infer_steps: DEFAULT_INFER_STEPS,
            infer_rate: DEFAULT_INFER_RATE,
        }
    }

    /// Per epoch: infer codes for the batch, step `A += lr * <(x - A s) s^T>`,
    /// renormalize columns.
    pub fn train<R, F>(
        &self,
        input_dim: usize,
        mut next_batch: F,
        rng: &mut R,
        observer: &mut dyn FnMut(EpochStats),
    ) -> Result<DictionaryModel>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Result<Array2<f64>>,
    {
        if self.output_dim == 0 {
            return Err(Error::InvalidArgument("dictionary size must be >= 1".into()));
        }
        let mut model = DictionaryModel::random(input_dim, self.output_dim, self.lambda, self.penalty, rng)?;
        for epoch in 0..self.epochs {
            let x = next_batch(rng)?;
            model.check_input(x.ncols())?;
            if x.nrows() == 0 {
                return Err(Error::Degenerate("empty training batch".into()));
            }
            let s = model.infer_batch(x.view(), self.infer_steps, self.infer_rate)?;
            let objective = model.objective(x.view(), s.view())?;
            let grad = model.objective_grad_dict(x.view(), s.view())?;
            model.a.scaled_add(-self.lr, &grad);
            if !all_finite(model.a.iter()) {
                return Err(Error::NonFinite("dictionary update diverged".into()));
            }
            model.normalize_columns();
            let n = x.nrows() as f64;
            let max_power = s
                .axis_iter(Axis(1))
                .map(|c| c.dot(&c) / n)
                .fold(f64::NEG_INFINITY, f64::max);
            observer(EpochStats {
                epoch,
                objective,
                max_second_moment: max_power,
            });
        }
        Ok(model)
    }
}
