//! Sparse PCA autoencoder.
//!
//! Minimizes the mean reconstruction error `<|x - A s|^2 / 2> + lambda * |A|_1`
//! subject to `<s_i^2> <= 1` for every unit. Training uses the tied encoding
//! `s = A^T x`; evaluation can refine codes with gradient steps on the
//! reconstruction error (see [`SpcaModel::infer`]).
//!
//! With tied codes the reconstruction term depends on the data only through
//! the correlation matrix `C = <x x^T>`:
//!
//! ```text
//! E_rec = 1/2 tr[(I - A A^T) C (I - A A^T)^T]
//! ```
//!
//! and the output power of unit `i` is `a_i^T C a_i`.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{shape_err, Error, Result};
use crate::imageio::PatchBatch;
use crate::linalg::{all_finite, pinv_trace, sign};
use crate::EpochStats;

pub const DEFAULT_INFER_STEPS: usize = 100;
pub const DEFAULT_INFER_RATE: f64 = 0.01;
pub const DEFAULT_EMA_DECAY: f64 = 0.99;
/// Units whose output power is within this of 1 count as on the limit.
pub const SATURATION_TOL: f64 = 1e-9;

/// Empirical second-moment matrix `C = <x x^T>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    matrix: Array2<f64>,
    n_samples: u64,
}

impl CorrelationMatrix {
    pub fn from_parts(matrix: Array2<f64>, n_samples: u64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(shape_err(format!("correlation matrix is {:?}", matrix.dim())));
        }
        if !all_finite(matrix.iter()) {
            return Err(Error::NonFinite("correlation matrix".into()));
        }
        Ok(Self { matrix, n_samples })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().sum()
    }
}

/// Running sum of outer products.
#[derive(Debug, Clone)]
pub struct CorrelationAccumulator {
    sum: Array2<f64>,
    n: u64,
}

impl CorrelationAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: Array2::zeros((dim, dim)),
            n: 0,
        }
    }

    /// Add every row of `x` as one sample.
    pub fn add(&mut self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.sum.nrows() {
            return Err(shape_err(format!(
                "batch dim {} does not match accumulator dim {}",
                x.ncols(),
                self.sum.nrows()
            )));
        }
        self.sum += &x.t().dot(&x);
        self.n += x.nrows() as u64;
        Ok(())
    }

    pub fn finish(&self) -> Result<CorrelationMatrix> {
        if self.n == 0 {
            return Err(Error::Degenerate("no samples accumulated".into()));
        }
        CorrelationMatrix::from_parts(&self.sum / self.n as f64, self.n)
    }
}

/// `C = (1/N) sum x x^T` over every row of every batch.
pub fn estimate_correlation<'a, I>(batches: I) -> Result<CorrelationMatrix>
where
    I: IntoIterator<Item = &'a PatchBatch>,
{
    let mut acc: Option<CorrelationAccumulator> = None;
    for b in batches {
        acc.get_or_insert_with(|| CorrelationAccumulator::new(b.dim()))
            .add(b.data().view())?;
    }
    acc.ok_or_else(|| Error::Degenerate("no batches".into()))?.finish()
}

/// Decoder `A` (`L x M`, `M <= L`) with its connection penalty weight.
#[derive(Debug, Clone)]
pub struct SpcaModel {
    a: Array2<f64>,
    lambda: f64,
    corr: Option<CorrelationMatrix>,
    /// `L x M` map of the default inference schedule, built on first use.
    response: OnceLock<Array2<f64>>,
}

impl PartialEq for SpcaModel {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.lambda == other.lambda && self.corr == other.corr
    }
}

impl SpcaModel {
    pub fn new(a: Array2<f64>, lambda: f64) -> Result<Self> {
        if a.ncols() > a.nrows() {
            return Err(Error::InvalidArgument(format!(
                "sparse PCA must not expand: M = {} > L = {}",
                a.ncols(),
                a.nrows()
            )));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        if !all_finite(a.iter()) {
            return Err(Error::NonFinite("decoder matrix".into()));
        }
        Ok(Self {
            a,
            lambda,
            corr: None,
            response: OnceLock::new(),
        })
    }

    /// I.i.d. Gaussian entries with standard deviation `1/sqrt(L)`.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, lambda: f64, rng: &mut R) -> Result<Self> {
        let normal = Normal::new(0.0, 1.0 / (input_dim as f64).sqrt()).expect("valid sd");
        let a = Array2::from_shape_fn((input_dim, output_dim), |_| normal.sample(rng));
        Self::new(a, lambda)
    }

    /// Attach the correlation matrix of the training data.
    pub fn with_correlation(mut self, corr: CorrelationMatrix) -> Result<Self> {
        if corr.dim() != self.input_dim() {
            return Err(shape_err("correlation dim differs from model input dim"));
        }
        self.corr = Some(corr);
        Ok(self)
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn input_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.a.ncols()
    }

    /// Correlation matrix of the data the model was trained on, if known.
    pub fn correlation(&self) -> Option<&CorrelationMatrix> {
        self.corr.as_ref()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(shape_err(format!(
                "input dim {cols}, model expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn check_corr(&self, c: &CorrelationMatrix) -> Result<()> {
        if c.dim() != self.input_dim() {
            return Err(shape_err(format!(
                "correlation dim {}, model expects {}",
                c.dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Tied encoding `s = A^T x` for every row of `x`.
    pub fn encode_tied(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        Ok(x.dot(&self.a))
    }

    /// Start at `A^T x` and take `steps` gradient steps `s += rate * A^T (x - A s)`.
    ///
    /// The iteration is linear in `x`, so it is evaluated as `s = R A^T x`
    /// with the `M x M` propagator `R` obtained by running the same
    /// recurrence on the identity.
    pub fn infer(&self, x: ArrayView1<f64>, steps: usize, rate: f64) -> Result<Array1<f64>> {
        let x2 = x.insert_axis(Axis(0));
        Ok(self.infer_batch(x2, steps, rate)?.row(0).to_owned())
    }

    pub fn infer_batch(&self, x: ArrayView2<f64>, steps: usize, rate: f64) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        if steps == DEFAULT_INFER_STEPS && rate == DEFAULT_INFER_RATE {
            let w = self.response.get_or_init(|| self.response_map(steps, rate));
            return Ok(x.dot(w));
        }
        Ok(x.dot(&self.response_map(steps, rate)))
    }

    /// `A R` where `R_0 = I`, `R_{k+1} = R_k + rate (I - A^T A R_k)`.
    fn response_map(&self, steps: usize, rate: f64) -> Array2<f64> {
        let m = self.output_dim();
        let gram = self.a.t().dot(&self.a);
        let eye = Array2::<f64>::eye(m);
        let mut r = eye.clone();
        for _ in 0..steps {
            let step = &eye - &gram.dot(&r);
            r.scaled_add(rate, &step);
        }
        self.a.dot(&r)
    }

    /// Evaluation-time response with the default schedule (100 steps at 0.01).
    pub fn respond(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.infer(x, DEFAULT_INFER_STEPS, DEFAULT_INFER_RATE)
    }

    pub fn respond_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.infer_batch(x, DEFAULT_INFER_STEPS, DEFAULT_INFER_RATE)
    }

    pub fn l1_norm(&self) -> f64 {
        self.a.iter().map(|v| v.abs()).sum()
    }

    /// Mean half squared reconstruction error over rows plus `lambda * |A|_1`.
    pub fn objective(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<f64> {
        self.check_input(x.ncols())?;
        if s.ncols() != self.output_dim() || s.nrows() != x.nrows() {
            return Err(shape_err("code matrix does not match batch"));
        }
        let resid = &x - &s.dot(&self.a.t());
        let rec = resid.iter().map(|v| v * v).sum::<f64>() / (2.0 * x.nrows() as f64);
        Ok(rec + self.lambda * self.l1_norm())
    }

    /// Gradient of [`objective`](Self::objective) with respect to `A`,
    /// holding the codes fixed: `-<(x - A s) s^T> + lambda * sign(A)`.
    pub fn objective_grad(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let n = x.nrows() as f64;
        let resid = &x - &s.dot(&self.a.t());
        let mut g = resid.t().dot(&s) / -n;
        Zip::from(&mut g)
            .and(&self.a)
            .for_each(|g, &a| *g += self.lambda * sign(a));
        Ok(g)
    }

    /// Gradient of [`objective`](Self::objective) with respect to the codes,
    /// `-(x - A s) A / N` row by row.
    pub fn objective_grad_codes(&self, x: ArrayView2<f64>, s: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        if s.ncols() != self.output_dim() || s.nrows() != x.nrows() {
            return Err(shape_err("code matrix does not match batch"));
        }
        let resid = &x - &s.dot(&self.a.t());
        Ok(resid.dot(&self.a) / -(x.nrows() as f64))
    }

    /// Tied-encoding reconstruction term `1/2 tr[(I - AA^T) C (I - AA^T)^T]`.
    pub fn reconstruction_from_corr(&self, c: &CorrelationMatrix) -> Result<f64> {
        self.check_corr(c)?;
        let ca = c.matrix().dot(&self.a);
        let t = self.a.t().dot(&ca);
        let g = self.a.t().dot(&self.a);
        let cross: f64 = Zip::from(&g).and(&t).fold(0.0, |acc, &gij, &tij| acc + gij * tij);
        Ok(0.5 * (c.trace() - 2.0 * t.diag().sum() + cross))
    }

    /// Objective under tied encoding, computed from `C` alone.
    pub fn objective_from_corr(&self, c: &CorrelationMatrix) -> Result<f64> {
        Ok(self.reconstruction_from_corr(c)? + self.lambda * self.l1_norm())
    }

    /// Reconstruction term when every sample uses its least-squares optimal
    /// code, `1/2 (tr C - tr[(A^T A)^+ A^T C A])`.
    pub fn optimal_reconstruction(&self, c: &CorrelationMatrix) -> Result<f64> {
        self.check_corr(c)?;
        let t = self.a.t().dot(&c.matrix().dot(&self.a));
        let g = self.a.t().dot(&self.a);
        Ok(0.5 * (c.trace() - pinv_trace(&g.view(), &t.view())))
    }

    /// Per-unit output power under tied encoding, `a_i^T C a_i`.
    pub fn second_moments(&self, c: &CorrelationMatrix) -> Result<Array1<f64>> {
        self.check_corr(c)?;
        let ca = c.matrix().dot(&self.a);
        Ok((&ca * &self.a).sum_axis(Axis(0)))
    }

    /// Expected update direction given `C`: `(I - A A^T) C A - lambda * sign(A)`.
    /// Equals the expectation of the per-batch direction under tied codes.
    pub fn corr_update_direction(&self, c: &CorrelationMatrix) -> Result<Array2<f64>> {
        self.check_corr(c)?;
        let ca = c.matrix().dot(&self.a);
        let mut dir = &ca - &self.a.dot(&self.a.t().dot(&ca));
        Zip::from(&mut dir)
            .and(&self.a)
            .for_each(|d, &a| *d -= self.lambda * sign(a));
        Ok(dir)
    }

    /// `A += lr * [<(x - A s) s^T> - lambda * sign(A)]` with the codes held fixed.
    pub fn gradient_step(&mut self, x: ArrayView2<f64>, s: ArrayView2<f64>, lr: f64) -> Result<()> {
        let g = self.objective_grad(x, s)?;
        self.apply_step(&g, -lr)
    }

    /// Like [`Self::gradient_step`], but for every unit already on the power
    /// limit under `c` the component of its step along the outward normal
    /// `C a_i` is removed first, so the unit slides along the limit surface.
    pub fn constrained_step(
        &mut self,
        x: ArrayView2<f64>,
        s: ArrayView2<f64>,
        lr: f64,
        c: &CorrelationMatrix,
    ) -> Result<()> {
        let mut dir = self.objective_grad(x, s)?;
        dir.mapv_inplace(|v| -v);
        self.remove_outward(&mut dir, c)?;
        self.apply_step(&dir, lr)
    }

    fn remove_outward(&self, dir: &mut Array2<f64>, c: &CorrelationMatrix) -> Result<()> {
        self.check_corr(c)?;
        let ca = c.matrix().dot(&self.a);
        for i in 0..self.a.ncols() {
            let n = ca.column(i);
            let power = self.a.column(i).dot(&n);
            let nn = n.dot(&n);
            if power < 1.0 - SATURATION_TOL || nn == 0.0 {
                continue;
            }
            let out = dir.column(i).dot(&n) / nn;
            if out > 0.0 {
                dir.column_mut(i).scaled_add(-out, &n);
            }
        }
        Ok(())
    }

    fn apply_step(&mut self, dir: &Array2<f64>, scale: f64) -> Result<()> {
        if !all_finite(dir.iter()) {
            return Err(Error::NonFinite(
                "sparse PCA gradient (learning rate too large?)".into(),
            ));
        }
        self.a.scaled_add(scale, dir);
        self.response = OnceLock::new();
        if !all_finite(self.a.iter()) {
            return Err(Error::NonFinite("sparse PCA decoder diverged".into()));
        }
        Ok(())
    }

    /// Rescale every column whose output power under `c` exceeds 1 back onto
    /// the constraint surface. Returns the post-projection powers.
    pub fn project(&mut self, c: &CorrelationMatrix) -> Result<Array1<f64>> {
        let mut m = self.second_moments(c)?;
        for (i, mi) in m.iter_mut().enumerate() {
            if *mi > 1.0 {
                let scale = 1.0 / mi.sqrt();
                self.a.column_mut(i).mapv_inplace(|v| v * scale);
                self.response = OnceLock::new();
                *mi = 1.0;
            }
        }
        Ok(m)
    }
}

/// Hyperparameters for [`SpcaModel`] training.
#[derive(Debug, Clone, PartialEq)]
pub struct SpcaTrainer {
    pub output_dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Decay of the running correlation estimate used for projection.
    pub ema_decay: f64,
}

impl SpcaTrainer {
    pub fn new(output_dim: usize, lambda: f64, epochs: usize, lr: f64) -> Self {
        Self {
            output_dim,
            lambda,
            epochs,
            lr,
            ema_decay: DEFAULT_EMA_DECAY,
        }
    }

    fn validate(&self, input_dim: usize) -> Result<()> {
        if self.output_dim == 0 || self.output_dim > input_dim {
            return Err(Error::InvalidArgument(format!(
                "output dim {} must be in 1..={input_dim}",
                self.output_dim
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        Ok(())
    }

    /// Train on batches pulled from `next_batch` (rows are samples).
    ///
    /// Each epoch: tied codes `S = X A`, one gradient step with the codes
    /// held fixed (tangential for units on the limit under the running
    /// correlation estimate), then projection of over-powered columns against an
    /// exponential moving average of batch correlation matrices. After the
    /// last epoch the columns are projected once more against the exact
    /// correlation of every sample seen, which is stored on the model.
    pub fn train<R, F>(
        &self,
        input_dim: usize,
        mut next_batch: F,
        rng: &mut R,
        observer: &mut dyn FnMut(EpochStats),
    ) -> Result<SpcaModel>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Result<Array2<f64>>,
    {
        self.validate(input_dim)?;
        let mut model = SpcaModel::random(input_dim, self.output_dim, self.lambda, rng)?;
        let mut c_hat: Option<CorrelationMatrix> = None;
        let mut total = CorrelationAccumulator::new(input_dim);

        for epoch in 0..self.epochs {
            let x = next_batch(rng)?;
            model.check_input(x.ncols())?;
            if x.nrows() == 0 {
                return Err(Error::Degenerate("empty training batch".into()));
            }
            let n = x.nrows() as f64;
            let s = x.dot(&model.a);
            let objective = model.objective(x.view(), s.view())?;
            match &c_hat {
                Some(c) => model.constrained_step(x.view(), s.view(), self.lr, c)?,
                None => model.gradient_step(x.view(), s.view(), self.lr)?,
            }

            let outer = x.t().dot(&x);
            let batch_c = &outer / n;
            let c = match c_hat.take() {
                None => CorrelationMatrix {
                    matrix: batch_c,
                    n_samples: 0,
                },
                Some(mut c) => {
                    c.matrix *= self.ema_decay;
                    c.matrix.scaled_add(1.0 - self.ema_decay, &batch_c);
                    c
                }
            };
            total.sum += &outer;
            total.n += x.nrows() as u64;

            let powers = model.project(&c)?;
            c_hat = Some(c);
            observer(EpochStats {
                epoch,
                objective,
                max_second_moment: powers.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }

        let corr = total.finish()?;
        model.project(&corr)?;
        model.with_correlation(corr)
    }

    /// Correlation route on streamed data: accumulate the exact correlation of
    /// `epochs` batches, then run [`Self::train_from_corr`] on it.
    pub fn train_accumulated<R, F>(
        &self,
        input_dim: usize,
        mut next_batch: F,
        rng: &mut R,
        observer: &mut dyn FnMut(EpochStats),
    ) -> Result<SpcaModel>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Result<Array2<f64>>,
    {
        self.validate(input_dim)?;
        let mut acc = CorrelationAccumulator::new(input_dim);
        for _ in 0..self.epochs {
            let x = next_batch(rng)?;
            acc.add(x.view())?;
        }
        self.train_from_corr(&acc.finish()?, rng, observer)
    }

    /// Train directly from a correlation matrix, stepping along the expected
    /// batch direction (tangential for units on the limit) and projecting
    /// against `C` exactly.
    pub fn train_from_corr<R: Rng + ?Sized>(
        &self,
        corr: &CorrelationMatrix,
        rng: &mut R,
        observer: &mut dyn FnMut(EpochStats),
    ) -> Result<SpcaModel> {
        self.validate(corr.dim())?;
        let mut model = SpcaModel::random(corr.dim(), self.output_dim, self.lambda, rng)?;
        for epoch in 0..self.epochs {
            let objective = model.objective_from_corr(corr)?;
            let mut dir = model.corr_update_direction(corr)?;
            model.remove_outward(&mut dir, corr)?;
            model.apply_step(&dir, self.lr)?;
            let powers = model.project(corr)?;
            observer(EpochStats {
                epoch,
                objective,
                max_second_moment: powers.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        model.with_correlation(corr.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use ndarray::array;
    use rand_distr::StandardNormal;

    fn corr(m: Array2<f64>) -> CorrelationMatrix {
        CorrelationMatrix::from_parts(m, 1).unwrap()
    }

    fn rotation(theta: f64) -> Array2<f64> {
        array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]]
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut crate::SeededRng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
    }

    #[test]
    fn correlation_of_small_sets() {
        let one = PatchBatch::new(1, array![[1.0]]).unwrap();
        assert_eq!(estimate_correlation([&one]).unwrap().matrix(), &array![[1.0]]);

        let mut acc = CorrelationAccumulator::new(2);
        acc.add(array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(acc.finish().unwrap().matrix(), &array![[1.0, 2.0], [2.0, 4.0]]);

        let mut acc = CorrelationAccumulator::new(2);
        acc.add(array![[1.0, 0.0]].view()).unwrap();
        acc.add(array![[0.0, 1.0]].view()).unwrap();
        let c = acc.finish().unwrap();
        assert_eq!(c.matrix(), &array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(c.n_samples(), 2);

        assert!(acc.add(array![[1.0, 2.0, 3.0]].view()).is_err());
    }

    #[test]
    fn correlation_dimension_mismatch_across_batches() {
        let a = PatchBatch::new(1, array![[1.0]]).unwrap();
        let b = PatchBatch::new(2, Array2::zeros((1, 4))).unwrap();
        assert!(matches!(estimate_correlation([&a, &b]), Err(Error::Shape(_))));
    }

    #[test]
    fn correlation_needs_samples() {
        let none: Vec<&PatchBatch> = Vec::new();
        assert!(matches!(estimate_correlation(none), Err(Error::Degenerate(_))));
    }

    #[test]
    fn correlation_monte_carlo() {
        // x = diag(2, 1) z with z standard normal has covariance diag(4, 1)
        let mut rng = seeded_rng(3);
        let n = 100_000;
        let x = Array2::from_shape_fn((n, 2), |(_, j)| {
            let z: f64 = rng.sample(StandardNormal);
            if j == 0 {
                2.0 * z
            } else {
                z
            }
        });
        let mut acc = CorrelationAccumulator::new(2);
        acc.add(x.view()).unwrap();
        let c = acc.finish().unwrap();
        let m = c.matrix();
        assert!((m[[0, 0]] - 4.0).abs() < 0.2);
        assert!((m[[1, 1]] - 1.0).abs() < 0.05);
        assert!(m[[0, 1]].abs() < 0.05 * 2.0);
    }

    #[test]
    fn infer_orthonormal_fixed_point() {
        let a = rotation(0.7);
        let m = SpcaModel::new(a.clone(), 0.3).unwrap();
        let x = array![0.3, -1.2];
        let s = m.infer(x.view(), 100, 0.01).unwrap();
        let tied = a.t().dot(&x);
        for i in 0..2 {
            assert!((s[i] - tied[i]).abs() < 1e-14);
        }
        let z = m.infer(array![0.0, 0.0].view(), 100, 0.01).unwrap();
        assert_eq!(z, array![0.0, 0.0]);
    }

    #[test]
    fn infer_scalar_recurrence() {
        let m = SpcaModel::new(array![[2.0], [0.0]], 0.0).unwrap();
        let s = m.infer(array![1.0, 0.0].view(), 100, 0.01).unwrap();
        // s_k - 0.5 = 1.5 * 0.96^k
        let expected = 0.5 + 1.5 * 0.96f64.powi(100);
        assert!((s[0] - expected).abs() < 1e-12, "{} vs {expected}", s[0]);
    }

    #[test]
    fn infer_zero_steps_is_tied() {
        let mut rng = seeded_rng(5);
        let m = SpcaModel::new(random_matrix(6, 3, &mut rng), 0.0).unwrap();
        let x = random_matrix(4, 6, &mut rng);
        assert_eq!(
            m.infer_batch(x.view(), 0, 0.01).unwrap(),
            m.encode_tied(x.view()).unwrap()
        );
    }

    #[test]
    fn objective_examples() {
        let x = array![[1.0, 2.0], [0.5, -1.0]];
        let zero = SpcaModel::new(Array2::zeros((2, 1)), 5.0).unwrap();
        let e = zero.objective(x.view(), array![[3.0], [-2.0]].view()).unwrap();
        assert!((e - (5.0 + 1.25) / 4.0).abs() < 1e-15);

        let rot = SpcaModel::new(rotation(0.4), 0.0).unwrap();
        let s = rot.encode_tied(x.view()).unwrap();
        assert!(rot.objective(x.view(), s.view()).unwrap() < 1e-30);

        let m = SpcaModel::new(array![[2.0]], 0.1).unwrap();
        let e = m.objective(array![[1.0]].view(), array![[0.25]].view()).unwrap();
        assert!((e - 0.325).abs() < 1e-15);
    }

    #[test]
    fn corr_objective_examples() {
        let c = corr(array![[2.0, 0.3], [0.3, 1.0]]);
        let zero = SpcaModel::new(Array2::zeros((2, 2)), 0.0).unwrap();
        assert!((zero.objective_from_corr(&c).unwrap() - 1.5).abs() < 1e-15);
        let rot = SpcaModel::new(rotation(1.1), 0.0).unwrap();
        assert!(rot.objective_from_corr(&c).unwrap().abs() < 1e-14);
    }

    #[test]
    fn second_moment_examples() {
        let eye = corr(Array2::eye(3));
        let a = array![[1.0, 0.0], [0.0, 0.6], [0.0, 0.8]];
        let m = SpcaModel::new(a, 0.0).unwrap();
        for v in m.second_moments(&eye).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let m = SpcaModel::new(array![[0.5, 0.0], [0.0, 0.0]], 0.0).unwrap();
        let p = m.second_moments(&corr(array![[4.0, 0.0], [0.0, 1.0]])).unwrap();
        assert_eq!(p, array![1.0, 0.0]);
    }

    #[test]
    fn optimal_reconstruction_drops_discarded_variance() {
        let c = corr(array![[4.0, 0.0], [0.0, 1.0]]);
        let m = SpcaModel::new(array![[0.5], [0.0]], 0.0).unwrap();
        assert!((m.optimal_reconstruction(&c).unwrap() - 0.5).abs() < 1e-14);
        // the tied reconstruction of the same decoder is much worse
        assert!((m.reconstruction_from_corr(&c).unwrap() - 1.625).abs() < 1e-14);
    }

    #[test]
    fn projection_enforces_power_limit() {
        let c = corr(array![[4.0, 0.0], [0.0, 1.0]]);
        let mut m = SpcaModel::new(array![[1.0, 0.1], [1.0, 0.2]], 0.0).unwrap();
        let p = m.project(&c).unwrap();
        assert_eq!(p[0], 1.0);
        assert!((m.second_moments(&c).unwrap()[0] - 1.0).abs() < 1e-15);
        // under-powered column untouched
        assert_eq!(m.a()[[0, 1]], 0.1);
    }

    #[test]
    fn rejects_expanding_decoder() {
        assert!(SpcaModel::new(Array2::zeros((2, 3)), 0.0).is_err());
        assert!(SpcaModel::new(Array2::zeros((2, 2)), -1.0).is_err());
    }

    #[test]
    fn corr_training_recovers_constrained_pca() {
        let c = corr(array![[4.0, 0.0], [0.0, 1.0]]);
        let trainer = SpcaTrainer::new(1, 0.0, 2000, 0.05);
        let m = trainer.train_from_corr(&c, &mut seeded_rng(11), &mut |_| {}).unwrap();
        let a = m.a();
        assert!((a[[0, 0]].abs() - 0.5).abs() < 1e-6, "{a:?}");
        assert!(a[[1, 0]].abs() < 1e-6);
        assert!((m.optimal_reconstruction(&c).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn outward_component_removed_on_the_limit() {
        let c = corr(array![[4.0, 0.0], [0.0, 1.0]]);
        let m = SpcaModel::new(array![[0.3], [0.8]], 0.0).unwrap();
        assert!((m.second_moments(&c).unwrap()[0] - 1.0).abs() < 1e-12);
        let mut dir = m.corr_update_direction(&c).unwrap();
        let ca = c.matrix().dot(m.a());
        assert!(dir.column(0).dot(&ca.column(0)) > 0.1);
        m.remove_outward(&mut dir, &c).unwrap();
        assert!(dir.column(0).dot(&ca.column(0)).abs() < 1e-12);
    }

    #[test]
    fn dominant_mode_does_not_absorb_every_unit() {
        // Top eigenvalue above M: the radial loop alone parks both columns on it.
        let c = corr(Array2::from_diag(&array![10.0, 2.0, 1.0, 0.5]));
        let collapsed = SpcaModel::new(
            array![[0.1f64.sqrt(), 0.1f64.sqrt()], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            0.0,
        )
        .unwrap();
        let m = SpcaTrainer::new(2, 0.0, 3000, 0.05)
            .train_from_corr(&c, &mut seeded_rng(3), &mut |_| {})
            .unwrap();
        let a = m.a();
        let cos =
            a.column(0).dot(&a.column(1)) / (a.column(0).dot(&a.column(0)) * a.column(1).dot(&a.column(1))).sqrt();
        assert!(cos.abs() < 1e-6, "{a:?}");
        let rec = m.reconstruction_from_corr(&c).unwrap();
        assert!((rec - 59.0 / 12.0).abs() < 1e-6, "{rec}");
        assert!(rec < collapsed.reconstruction_from_corr(&c).unwrap() - 0.03);
        assert!(m.second_moments(&c).unwrap().iter().all(|&p| (p - 1.0).abs() < 1e-9));
    }

    #[test]
    fn accumulated_route_stores_exact_correlation() {
        let mut src = seeded_rng(5);
        let batches: Vec<Array2<f64>> = (0..20).map(|_| random_matrix(8, 3, &mut src)).collect();
        let mut it = batches.iter();
        let m = SpcaTrainer::new(2, 0.0, 20, 0.01)
            .train_accumulated(3, |_| Ok(it.next().unwrap().clone()), &mut seeded_rng(6), &mut |_| {})
            .unwrap();
        let mut acc = CorrelationAccumulator::new(3);
        for b in &batches {
            acc.add(b.view()).unwrap();
        }
        let expected = acc.finish().unwrap();
        let stored = m.correlation().unwrap();
        assert_eq!(stored.n_samples(), 160);
        assert!((stored.matrix() - expected.matrix()).iter().all(|d| d.abs() < 1e-12));
    }
}
