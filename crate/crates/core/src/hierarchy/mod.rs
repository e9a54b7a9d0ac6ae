//! The stacked two-layer model, its training schedule and persistence.
//!
//! ```text
//! 16x16 patch (256) -> spca1 (M1) -> ica1 (K1)                     layer 1
//! 32x32 patch -> 4 quadrants -> layer 1 -> gauss1 -> concat (4 K1)
//!             -> spca2 (M2) -> ica2 (K2)                           layer 2
//! ```

mod config;
mod container;

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

pub use config::{parse_kv, PipelineConfig, Preset};
pub use container::{decode_model, encode_model, load, save, MODEL_MAGIC, MODEL_VERSION};

use crate::error::{shape_err, Error, Result};
use crate::gaussianize::Gaussianizer;
use crate::imageio::{sample_patches, GrayImage};
use crate::sparsecode::{DictionaryModel, DictionaryTrainer};
use crate::spca::{SpcaModel, SpcaTrainer};
use crate::EpochStats;

/// Training stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Spca1,
    Ica1,
    Spca2,
    Ica2,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Spca1, Stage::Ica1, Stage::Spca2, Stage::Ica2];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Spca1 => "spca1",
            Stage::Ica1 => "ica1",
            Stage::Spca2 => "spca2",
            Stage::Ica2 => "ica2",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The trained two-layer stack.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    pub config: PipelineConfig,
    pub spca1: SpcaModel,
    pub ica1: DictionaryModel,
    pub gauss1: Gaussianizer,
    pub spca2: SpcaModel,
    pub ica2: DictionaryModel,
    pub gauss2: Gaussianizer,
}

impl HierarchicalModel {
    pub fn new(
        config: PipelineConfig,
        spca1: SpcaModel,
        ica1: DictionaryModel,
        gauss1: Gaussianizer,
        spca2: SpcaModel,
        ica2: DictionaryModel,
        gauss2: Gaussianizer,
    ) -> Result<Self> {
        let m = Self {
            config,
            spca1,
            ica1,
            gauss1,
            spca2,
            ica2,
            gauss2,
        };
        m.validate()?;
        Ok(m)
    }

    /// Check that stage dimensions chain and agree with the config.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let links = [
            (
                "spca1 input",
                self.spca1.input_dim(),
                "layer1 patch pixels",
                c.layer1_dim(),
            ),
            ("spca1 output", self.spca1.output_dim(), "spca1_dim", c.spca1_dim),
            (
                "ica1 input",
                self.ica1.input_dim(),
                "spca1 output",
                self.spca1.output_dim(),
            ),
            ("ica1 output", self.ica1.output_dim(), "ica1_dim", c.ica1_dim),
            ("gauss1 dims", self.gauss1.dims(), "ica1 output", self.ica1.output_dim()),
            (
                "spca2 input",
                self.spca2.input_dim(),
                "4 x ica1 output",
                4 * self.ica1.output_dim(),
            ),
            ("spca2 output", self.spca2.output_dim(), "spca2_dim", c.spca2_dim),
            (
                "ica2 input",
                self.ica2.input_dim(),
                "spca2 output",
                self.spca2.output_dim(),
            ),
            ("ica2 output", self.ica2.output_dim(), "ica2_dim", c.ica2_dim),
            ("gauss2 dims", self.gauss2.dims(), "ica2 output", self.ica2.output_dim()),
        ];
        for (what, got, against, want) in links {
            if got != want {
                return Err(Error::DimensionChain(format!(
                    "{what} is {got} but {against} is {want}"
                )));
            }
        }
        Ok(())
    }

    /// Raw layer-1 sparse-coding responses for rows of flattened layer-1 patches.
    pub fn forward_layer1_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        let codes = self.spca1.respond_batch(patches)?;
        self.ica1.respond_batch(codes.view())
    }

    pub fn forward_layer1(&self, patch: ArrayView1<f64>) -> Result<Array1<f64>> {
        let codes = self.spca1.respond(patch)?;
        self.ica1.respond(codes.view())
    }

    /// Gaussianized layer-1 responses of the four quadrants of each layer-2
    /// patch, concatenated top-left, top-right, bottom-left, bottom-right.
    pub fn assemble_quadrants_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        let side = self.config.layer2_patch;
        if patches.ncols() != side * side {
            return Err(shape_err(format!(
                "layer-2 patch must have {} pixels, got {}",
                side * side,
                patches.ncols()
            )));
        }
        let quads = split_quadrants(patches, side);
        let responses = self.forward_layer1_batch(quads.view())?;
        let g = self.gauss1.transform_batch(responses.view())?;
        let n = patches.nrows();
        Ok(g.into_shape_with_order((n, 4 * self.ica1.output_dim()))
            .expect("contiguous quadrant rows"))
    }

    pub fn assemble_quadrants(&self, patch: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self
            .assemble_quadrants_batch(patch.insert_axis(Axis(0)))?
            .row(0)
            .to_owned())
    }

    /// Layer-2 sparse PCA codes of layer-2 patches.
    pub fn spca2_codes_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        let x = self.assemble_quadrants_batch(patches)?;
        self.spca2.respond_batch(x.view())
    }

    /// Raw layer-2 sparse-coding responses (gauss2 is not applied).
    pub fn forward_batch(&self, patches: ArrayView2<f64>) -> Result<Array2<f64>> {
        let codes = self.spca2_codes_batch(patches)?;
        self.ica2.respond_batch(codes.view())
    }

    pub fn forward(&self, patch: ArrayView1<f64>) -> Result<Array1<f64>> {
        Ok(self.forward_batch(patch.insert_axis(Axis(0)))?.row(0).to_owned())
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        save(self, path)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        load(path)
    }
}

/// Rearrange `N x side^2` patches into `4N x (side/2)^2` quadrant rows,
/// four consecutive rows per input patch.
pub fn split_quadrants(patches: ArrayView2<f64>, side: usize) -> Array2<f64> {
    let half = side / 2;
    let n = patches.nrows();
    let mut out = Array2::zeros((4 * n, half * half));
    for (i, p) in patches.rows().into_iter().enumerate() {
        for q in 0..4 {
            let (ox, oy) = ((q % 2) * half, (q / 2) * half);
            let mut dst = out.row_mut(4 * i + q);
            for r in 0..half {
                for c in 0..half {
                    dst[r * half + c] = p[(oy + r) * side + ox + c];
                }
            }
        }
    }
    out
}

fn sample_from_dataset<R: Rng + ?Sized>(
    images: &[GrayImage],
    count: usize,
    side: usize,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let idx = rng.random_range(0..images.len());
    Ok(sample_patches(&images[idx], count, side, rng)?.into_data())
}

fn collect_rows<F>(total: usize, chunk: usize, mut next: F) -> Result<Array2<f64>>
where
    F: FnMut(usize) -> Result<Array2<f64>>,
{
    let mut parts = Vec::new();
    let mut have = 0;
    while have < total {
        let take = chunk.min(total - have);
        let part = next(take)?;
        have += part.nrows();
        parts.push(part);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| shape_err(e.to_string()))
}

/// Train the whole stack layer by layer.
///
/// Every epoch draws `config.batch` patches from one randomly chosen image.
/// The sPCA stages first accumulate the exact correlation of all their
/// epochs' batches and then train on it.
/// Inputs handed to later stages go through the same response functions
/// used by [`HierarchicalModel::forward`], so each Gaussianizer is fitted
/// on exactly the distribution it will see.
pub fn train_pipeline<R: Rng + ?Sized>(
    images: &[GrayImage],
    config: &PipelineConfig,
    rng: &mut R,
    log: &mut dyn FnMut(Stage, EpochStats),
) -> Result<HierarchicalModel> {
    config.validate()?;
    if images.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let p1 = config.layer1_patch;
    let p2 = config.layer2_patch;
    if let Some(small) = images.iter().find(|im| im.width < p2 || im.height < p2) {
        return Err(Error::InvalidArgument(format!(
            "every image must be at least {p2}x{p2}; found {}x{}",
            small.width, small.height
        )));
    }
    let batch = config.batch;

    let spca1 = SpcaTrainer::new(config.spca1_dim, config.lambda1, config.epochs_spca1, config.lr_spca)
        .train_accumulated(
            config.layer1_dim(),
            |r| sample_from_dataset(images, batch, p1, r),
            rng,
            &mut |s| log(Stage::Spca1, s),
        )?;

    let ica_trainer = |dim, epochs| DictionaryTrainer {
        penalty: config.penalty,
        ..DictionaryTrainer::new(dim, config.ica_lambda, epochs, config.lr_ica)
    };

    let ica1 = ica_trainer(config.ica1_dim, config.epochs_ica1).train(
        config.spca1_dim,
        |r| {
            let x = sample_from_dataset(images, batch, p1, r)?;
            spca1.respond_batch(x.view())
        },
        rng,
        &mut |s| log(Stage::Ica1, s),
    )?;

    let layer1_responses = collect_rows(config.gauss_samples, batch, |k| {
        let x = sample_from_dataset(images, k, p1, rng)?;
        let codes = spca1.respond_batch(x.view())?;
        ica1.respond_batch(codes.view())
    })?;
    let gauss1 = Gaussianizer::fit(layer1_responses.view())?;
    drop(layer1_responses);

    // Partial model: the layer-2 slots are placeholders until trained.
    let mut model = HierarchicalModel {
        config: config.clone(),
        spca1,
        ica1,
        gauss1,
        spca2: SpcaModel::new(Array2::zeros((config.layer2_dim(), config.spca2_dim)), config.lambda2)?,
        ica2: DictionaryModel::new(
            Array2::zeros((config.spca2_dim, config.ica2_dim)),
            config.ica_lambda,
            config.penalty,
        )?,
        gauss2: Gaussianizer::from_tables(vec![vec![0.0, 0.0]; config.ica2_dim])?,
    };

    model.spca2 = SpcaTrainer::new(config.spca2_dim, config.lambda2, config.epochs_spca2, config.lr_spca)
        .train_accumulated(
            config.layer2_dim(),
            |r| {
                let x = sample_from_dataset(images, batch, p2, r)?;
                model.assemble_quadrants_batch(x.view())
            },
            rng,
            &mut |s| log(Stage::Spca2, s),
        )?;

    model.ica2 = ica_trainer(config.ica2_dim, config.epochs_ica2).train(
        config.spca2_dim,
        |r| {
            let x = sample_from_dataset(images, batch, p2, r)?;
            model.spca2_codes_batch(x.view())
        },
        rng,
        &mut |s| log(Stage::Ica2, s),
    )?;

    let layer2_responses = collect_rows(config.gauss_samples, batch, |k| {
        let x = sample_from_dataset(images, k, p2, rng)?;
        model.forward_batch(x.view())
    })?;
    model.gauss2 = Gaussianizer::fit(layer2_responses.view())?;

    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn quadrant_split_order() {
        let side = 4;
        let p = Array2::from_shape_fn((1, 16), |(_, i)| i as f64);
        let q = split_quadrants(p.view(), side);
        assert_eq!(q.row(0).to_vec(), vec![0.0, 1.0, 4.0, 5.0]);
        assert_eq!(q.row(1).to_vec(), vec![2.0, 3.0, 6.0, 7.0]);
        assert_eq!(q.row(2).to_vec(), vec![8.0, 9.0, 12.0, 13.0]);
        assert_eq!(q.row(3).to_vec(), vec![10.0, 11.0, 14.0, 15.0]);
    }
}
