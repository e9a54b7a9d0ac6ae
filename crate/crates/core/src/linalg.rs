//! Small dense helpers shared by the numerical modules.

use nalgebra::DMatrix;
use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::Result;

/// Rows per work item for batch maps. Fixed so results do not depend on the
/// number of worker threads.
pub(crate) const ROW_CHUNK: usize = 32;

/// Eigendecomposition of a symmetric matrix, eigenvalues descending,
/// eigenvectors as columns. The input is symmetrized first.
pub(crate) fn sym_eigen_desc(a: &ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, dst]] = eig.eigenvectors[(r, src)];
        }
    }
    (vals, vecs)
}

/// tr(G^+ T) for symmetric positive-semidefinite `G`.
pub(crate) fn pinv_trace(g: &ArrayView2<f64>, t: &ArrayView2<f64>) -> f64 {
    let (vals, vecs) = sym_eigen_desc(g);
    let cutoff = vals.first().copied().unwrap_or(0.0).max(0.0) * 1e-12 * g.nrows() as f64;
    let tv = t.dot(&vecs);
    let mut acc = 0.0;
    for (k, &lam) in vals.iter().enumerate() {
        if lam > cutoff {
            acc += vecs.column(k).dot(&tv.column(k)) / lam;
        }
    }
    acc
}

/// Apply a row-wise batch map over fixed-size row chunks in parallel and
/// stitch the outputs back together in order.
pub(crate) fn map_row_chunks<F>(x: ArrayView2<f64>, out_cols: usize, f: F) -> Result<Array2<f64>>
where
    F: Fn(ArrayView2<f64>) -> Result<Array2<f64>> + Sync,
{
    if x.nrows() <= ROW_CHUNK {
        return f(x);
    }
    let parts: Vec<Array2<f64>> = x
        .axis_chunks_iter(Axis(0), ROW_CHUNK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(&f)
        .collect::<Result<_>>()?;
    if parts.is_empty() {
        return Ok(Array2::zeros((0, out_cols)));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("chunks share column count"))
}

pub(crate) fn all_finite<'a>(it: impl IntoIterator<Item = &'a f64>) -> bool {
    it.into_iter().all(|v| v.is_finite())
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
