//! Characterization of learned features.
//!
//! - [`gabor`]: least-squares Gabor fits of pixel-space filters
//! - [`stc`]: spike-triggered covariance under white noise
//! - [`rfmap`]: layer-2 receptive-field maps and the cell taxonomy
//! - [`render`]: PGM filter grids and SVG RF maps

pub mod gabor;
pub mod render;
pub mod rfmap;
pub mod stc;

use ndarray::{Array1, Array2, ArrayView2};

pub use gabor::{fit_gabor, GaborParams};
pub use render::{render_filters, render_rf_map, rf_map_svg};
pub use rfmap::{build_rf_map, class_counts, classify_cell, Bar, CellClass, Classification, RfMap, TaxonomyConfig};
pub use stc::{stc, weighted_covariance, white_noise, StcSpectrum};

use crate::error::{Error, Result};
use crate::hierarchy::HierarchicalModel;

/// Layer-2 stage whose units are analyzed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer2Stage {
    Spca2,
    Ica2,
}

impl std::str::FromStr for Layer2Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spca2" => Ok(Self::Spca2),
            "ica2" => Ok(Self::Ica2),
            _ => Err(Error::InvalidArgument(format!(
                "unknown layer-2 stage {s:?} (spca2 | ica2)"
            ))),
        }
    }
}

impl std::fmt::Display for Layer2Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Spca2 => "spca2",
            Self::Ica2 => "ica2",
        })
    }
}

/// Reshape each column of a `side^2 x K` matrix into a `side x side` image.
pub fn columns_as_images(a: ArrayView2<f64>, side: usize) -> Result<Vec<Array2<f64>>> {
    if a.nrows() != side * side {
        return Err(Error::Shape(format!(
            "{} rows cannot form {side}x{side} images",
            a.nrows()
        )));
    }
    Ok(a.columns()
        .into_iter()
        .map(|c| Array2::from_shape_fn((side, side), |(r, k)| c[r * side + k]))
        .collect())
}

/// Layer-1 sparse-PCA filters as images.
pub fn spca1_filters(model: &HierarchicalModel) -> Result<Vec<Array2<f64>>> {
    columns_as_images(model.spca1.a().view(), model.config.layer1_patch)
}

/// Layer-1 sparse-coding features in pixel space, `spca1.A * ica1.A[:, k]`.
pub fn pixel_space_features(model: &HierarchicalModel) -> Result<Vec<Array2<f64>>> {
    let composite = model.spca1.a().dot(model.ica1.a());
    columns_as_images(composite.view(), model.config.layer1_patch)
}

/// Gabor fits of every pixel-space layer-1 feature, in unit order.
pub fn gabor_table(model: &HierarchicalModel) -> Result<Vec<GaborParams>> {
    use rayon::prelude::*;
    pixel_space_features(model)?
        .par_iter()
        .map(|f| fit_gabor(f.view()))
        .collect()
}

/// Connection weights from the `4 * ica1` Gaussianized layer-1 features to
/// a layer-2 unit. Sparse-coding units connect through the spca2 decoder.
pub fn layer2_connection_weights(model: &HierarchicalModel, unit: usize, stage: Layer2Stage) -> Result<Array1<f64>> {
    match stage {
        Layer2Stage::Spca2 => {
            let a = model.spca2.a();
            if unit >= a.ncols() {
                return Err(Error::InvalidArgument(format!(
                    "spca2 unit {unit} out of range 0..{}",
                    a.ncols()
                )));
            }
            Ok(a.column(unit).to_owned())
        }
        Layer2Stage::Ica2 => {
            let d = model.ica2.a();
            if unit >= d.ncols() {
                return Err(Error::InvalidArgument(format!(
                    "ica2 unit {unit} out of range 0..{}",
                    d.ncols()
                )));
            }
            Ok(model.spca2.a().dot(&d.column(unit)))
        }
    }
}

/// RF map of a layer-2 unit given the Gabor fits of the layer-1 features.
pub fn unit_rf_map(
    model: &HierarchicalModel,
    unit: usize,
    stage: Layer2Stage,
    gabors: &[GaborParams],
    cfg: &TaxonomyConfig,
) -> Result<RfMap> {
    if gabors.len() != model.ica1.output_dim() {
        return Err(Error::InvalidArgument(format!(
            "gabor table has {} entries, model has {} layer-1 features",
            gabors.len(),
            model.ica1.output_dim()
        )));
    }
    let w = layer2_connection_weights(model, unit, stage)?;
    build_rf_map(unit, w.view(), gabors, model.config.layer1_patch, cfg)
}

/// Area fraction of the smallest axis-aligned box holding at least `mass`
/// of the filter's total absolute weight. A zero filter scores 1.
pub fn locality(filter: ArrayView2<f64>, mass: f64) -> f64 {
    let (rows, cols) = filter.dim();
    let mut prefix = Array2::<f64>::zeros((rows + 1, cols + 1));
    for r in 0..rows {
        for c in 0..cols {
            prefix[(r + 1, c + 1)] = filter[(r, c)].abs() + prefix[(r, c + 1)] + prefix[(r + 1, c)] - prefix[(r, c)];
        }
    }
    let total = prefix[(rows, cols)];
    if !(total > 0.0) {
        return 1.0;
    }
    let need = mass * total * (1.0 - 1e-12);
    let mut best = rows * cols;
    for r0 in 0..rows {
        for r1 in r0 + 1..=rows {
            for c0 in 0..cols {
                let h = r1 - r0;
                for c1 in c0 + 1..=cols {
                    let area = h * (c1 - c0);
                    if area >= best {
                        break;
                    }
                    let s = prefix[(r1, c1)] - prefix[(r0, c1)] - prefix[(r1, c0)] + prefix[(r0, c0)];
                    if s >= need {
                        best = area;
                        break;
                    }
                }
            }
        }
    }
    best as f64 / (rows * cols) as f64
}
