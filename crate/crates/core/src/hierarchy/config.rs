use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sparsecode::Penalty;

/// Geometry and hyperparameters of the two-layer model.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Side of a layer-1 patch in pixels.
    pub layer1_patch: usize,
    /// Side of a layer-2 patch; always twice `layer1_patch`.
    pub layer2_patch: usize,
    pub spca1_dim: usize,
    pub ica1_dim: usize,
    pub spca2_dim: usize,
    pub ica2_dim: usize,
    /// Connection penalty of the layer-1 sparse PCA.
    pub lambda1: f64,
    /// Connection penalty of the layer-2 sparse PCA.
    pub lambda2: f64,
    /// Code sparsity weight of both sparse coding stages.
    pub ica_lambda: f64,
    pub penalty: Penalty,
    pub epochs_spca1: usize,
    pub epochs_ica1: usize,
    pub epochs_spca2: usize,
    pub epochs_ica2: usize,
    /// Patches drawn per epoch.
    pub batch: usize,
    pub lr_spca: f64,
    pub lr_ica: f64,
    /// Response vectors used to fit each Gaussianizer.
    pub gauss_samples: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::InvalidArgument(format!("unknown preset {other:?}"))),
        }
    }
}

impl PipelineConfig {
    /// Full-scale schedule: 16/32 px patches, 512-unit layer-1 and 256-unit
    /// layer-2 dictionaries, 40000 epochs of 64 patches per stage.
    pub fn paper() -> Self {
        Self {
            layer1_patch: 16,
            layer2_patch: 32,
            spca1_dim: 128,
            ica1_dim: 512,
            spca2_dim: 128,
            ica2_dim: 256,
            lambda1: 0.01,
            lambda2: 0.03,
            ica_lambda: 1.0,
            penalty: Penalty::LogCosh,
            epochs_spca1: 40_000,
            epochs_ica1: 40_000,
            epochs_spca2: 40_000,
            epochs_ica2: 40_000,
            batch: 64,
            lr_spca: 0.01,
            lr_ica: 0.1,
            gauss_samples: 10_000,
            seed: 0,
        }
    }

    /// Laptop-scale schedule with the same geometry and penalties.
    pub fn desk() -> Self {
        Self {
            spca1_dim: 64,
            ica1_dim: 128,
            spca2_dim: 32,
            ica2_dim: 64,
            epochs_spca1: 5_000,
            epochs_ica1: 5_000,
            epochs_spca2: 5_000,
            epochs_ica2: 5_000,
            ..Self::paper()
        }
    }

    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    pub fn layer1_dim(&self) -> usize {
        self.layer1_patch * self.layer1_patch
    }

    pub fn layer2_dim(&self) -> usize {
        4 * self.ica1_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.layer1_patch == 0 || self.layer2_patch != 2 * self.layer1_patch {
            return bad(format!(
                "layer2_patch ({}) must be twice layer1_patch ({})",
                self.layer2_patch, self.layer1_patch
            ));
        }
        if self.spca1_dim == 0 || self.spca1_dim > self.layer1_dim() {
            return bad(format!(
                "spca1_dim {} must be in 1..={}",
                self.spca1_dim,
                self.layer1_dim()
            ));
        }
        if self.ica1_dim < self.spca1_dim {
            return bad(format!(
                "ica1_dim {} must be >= spca1_dim {}",
                self.ica1_dim, self.spca1_dim
            ));
        }
        if self.spca2_dim == 0 || self.spca2_dim > self.layer2_dim() {
            return bad(format!(
                "spca2_dim {} must be in 1..={}",
                self.spca2_dim,
                self.layer2_dim()
            ));
        }
        if self.ica2_dim < self.spca2_dim {
            return bad(format!(
                "ica2_dim {} must be >= spca2_dim {}",
                self.ica2_dim, self.spca2_dim
            ));
        }
        for (name, v) in [
            ("epochs_spca1", self.epochs_spca1),
            ("epochs_ica1", self.epochs_ica1),
            ("epochs_spca2", self.epochs_spca2),
            ("epochs_ica2", self.epochs_ica2),
            ("batch", self.batch),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.gauss_samples < 2 {
            return bad("gauss_samples must be >= 2".into());
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("ica_lambda", self.ica_lambda),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value >= 0"));
            }
        }
        for (name, v) in [("lr_spca", self.lr_spca), ("lr_ica", self.lr_ica)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value > 0"));
            }
        }
        Ok(())
    }

    /// Set one field by name. Returns `Ok(false)` for an unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value {value:?} for {key}")))
        }
        match key {
            "layer1_patch" => self.layer1_patch = parse(key, value)?,
            "layer2_patch" => self.layer2_patch = parse(key, value)?,
            "spca1_dim" => self.spca1_dim = parse(key, value)?,
            "ica1_dim" => self.ica1_dim = parse(key, value)?,
            "spca2_dim" => self.spca2_dim = parse(key, value)?,
            "ica2_dim" => self.ica2_dim = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "ica_lambda" => self.ica_lambda = parse(key, value)?,
            "penalty" => self.penalty = value.parse()?,
            "epochs_spca1" => self.epochs_spca1 = parse(key, value)?,
            "epochs_ica1" => self.epochs_ica1 = parse(key, value)?,
            "epochs_spca2" => self.epochs_spca2 = parse(key, value)?,
            "epochs_ica2" => self.epochs_ica2 = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "lr_spca" => self.lr_spca = parse(key, value)?,
            "lr_ica" => self.lr_ica = parse(key, value)?,
            "gauss_samples" => self.gauss_samples = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Apply `key = value` lines on top of `self`; `#` starts a comment.
    /// Unknown keys are an error.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (key, value) in parse_kv(text)? {
            if !self.set(&key, &value)? {
                return Err(Error::InvalidArgument(format!("unknown config key {key:?}")));
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::paper();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field as `key = value`, one per line. Floats use the shortest
    /// representation that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("layer1_patch", self.layer1_patch.to_string()),
            ("layer2_patch", self.layer2_patch.to_string()),
            ("spca1_dim", self.spca1_dim.to_string()),
            ("ica1_dim", self.ica1_dim.to_string()),
            ("spca2_dim", self.spca2_dim.to_string()),
            ("ica2_dim", self.ica2_dim.to_string()),
            ("lambda1", self.lambda1.to_string()),
            ("lambda2", self.lambda2.to_string()),
            ("ica_lambda", self.ica_lambda.to_string()),
            ("penalty", self.penalty.to_string()),
            ("epochs_spca1", self.epochs_spca1.to_string()),
            ("epochs_ica1", self.epochs_ica1.to_string()),
            ("epochs_spca2", self.epochs_spca2.to_string()),
            ("epochs_ica2", self.epochs_ica2.to_string()),
            ("batch", self.batch.to_string()),
            ("lr_spca", self.lr_spca.to_string()),
            ("lr_ica", self.lr_ica.to_string()),
            ("gauss_samples", self.gauss_samples.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }
}

/// Split `key = value` text into pairs, dropping blank lines and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("line {}: expected key = value", lineno + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_values() {
        let p = PipelineConfig::paper();
        assert_eq!((p.lambda1, p.lambda2), (0.01, 0.03));
        assert_eq!(
            (p.epochs_spca1, p.epochs_ica1, p.epochs_spca2, p.epochs_ica2),
            (40_000, 40_000, 40_000, 40_000)
        );
        assert_eq!((p.batch, p.lr_ica), (64, 0.1));
        assert_eq!((p.ica1_dim, p.spca2_dim, p.ica2_dim), (512, 128, 256));
        assert_eq!(p.layer2_dim(), 2048);
        p.validate().unwrap();
        PipelineConfig::desk().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::desk();
        c.lr_spca = 0.1 + 0.2;
        c.seed = u64::MAX;
        c.penalty = Penalty::Abs;
        assert_eq!(PipelineConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_errors() {
        let c = PipelineConfig::from_text("# desk-ish\nbatch = 32 # fewer\n\n  seed=7\n").unwrap();
        assert_eq!((c.batch, c.seed), (32, 7));
        assert!(PipelineConfig::from_text("bogus = 1").is_err());
        assert!(PipelineConfig::from_text("batch").is_err());
        assert!(PipelineConfig::from_text("batch = many").is_err());
        assert!(PipelineConfig::from_text("layer2_patch = 20").is_err());
        assert!(PipelineConfig::from_text("ica1_dim = 64\nspca1_dim = 128").is_err());
    }
}
