//! Spike-triggered covariance under white-noise stimulation.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;

/// Stimuli per parallel work unit; fixed so the reduction order never changes.
const CHUNK: usize = 1024;

/// Eigendecomposition of a response-weighted stimulus covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct StcSpectrum {
    /// Descending.
    pub eigvals: Array1<f64>,
    /// Orthonormal columns matching `eigvals`.
    pub eigvecs: Array2<f64>,
    pub dim: usize,
}

impl StcSpectrum {
    pub fn top(&self) -> ArrayView1<'_, f64> {
        self.eigvecs.column(0)
    }

    pub fn bottom(&self) -> ArrayView1<'_, f64> {
        self.eigvecs.column(self.dim - 1)
    }
}

/// `n x dim` i.i.d. standard-normal stimuli, drawn row by row.
pub fn white_noise<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, dim), || rng.sample::<f64, _>(StandardNormal))
}

/// Spectrum of `sum w x x^T / sum w` over the rows `x` of `stimuli`, with
/// `w = response^2`. Partial sums over fixed chunks are combined in order.
pub fn weighted_covariance(stimuli: ArrayView2<f64>, responses: ArrayView1<f64>) -> Result<StcSpectrum> {
    let (n, dim) = stimuli.dim();
    if responses.len() != n {
        return Err(Error::Shape(format!("{} responses for {n} stimuli", responses.len())));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("stimulus dimension must be positive".into()));
    }
    if responses.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("response".into()));
    }
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<(Array2<f64>, f64)> = starts
        .into_par_iter()
        .map(|lo| {
            let hi = (lo + CHUNK).min(n);
            let chunk = stimuli.slice(s![lo..hi, ..]);
            let w = responses.slice(s![lo..hi]).mapv(|r| r * r);
            let weighted = &chunk * &w.view().insert_axis(Axis(1));
            (weighted.t().dot(&chunk), w.sum())
        })
        .collect();

    let mut cov = Array2::<f64>::zeros((dim, dim));
    let mut mass = 0.0;
    for (c, m) in partials {
        cov += &c;
        mass += m;
    }
    if !(mass > 0.0) {
        return Err(Error::Degenerate("all responses are zero".into()));
    }
    cov /= mass;
    let (eigvals, eigvecs) = sym_eigen_desc(&cov.view());
    Ok(StcSpectrum { eigvals, eigvecs, dim })
}

/// Spike-triggered covariance of a scalar response under `n` white-noise
/// stimuli of dimension `dim`.
pub fn stc<F, R>(respond: F, dim: usize, n: usize, rng: &mut R) -> Result<StcSpectrum>
where
    F: Fn(ArrayView1<f64>) -> Result<f64> + Sync,
    R: Rng + ?Sized,
{
    if dim == 0 {
        return Err(Error::InvalidArgument("stimulus dimension must be positive".into()));
    }
    if n < dim {
        return Err(Error::InvalidArgument(format!("need n >= dim, got n={n}, dim={dim}")));
    }
    let stimuli = white_noise(n, dim, rng);
    let responses = stimuli
        .axis_chunks_iter(Axis(0), CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|chunk| chunk.rows().into_iter().map(&respond).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    let responses = Array1::from_iter(responses.into_iter().flatten());
    weighted_covariance(stimuli.view(), responses.view())
}
