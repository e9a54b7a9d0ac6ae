//! `HVC1` model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "HVC1"            4 bytes
//! version           u32
//! header length     u64, then that many bytes of UTF-8 `key = value` text
//!                   (pipeline config plus correlation sample counts)
//! 8 matrix blocks   rows u64, cols u64, rows*cols binary64, row-major:
//!                   spca1.A, spca1.C, ica1.A, gauss1 tables,
//!                   spca2.A, spca2.C, ica2.A, gauss2 tables
//! ```
//!
//! A missing correlation matrix is stored as a 0 x 0 block. Gaussianizer
//! tables are stored one table per row.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{parse_kv, HierarchicalModel, PipelineConfig};
use crate::error::{Error, Result};
use crate::gaussianize::Gaussianizer;
use crate::sparsecode::DictionaryModel;
use crate::spca::{CorrelationMatrix, SpcaModel};

pub const MODEL_MAGIC: &[u8; 4] = b"HVC1";
pub const MODEL_VERSION: u32 = 1;

const SPCA1_SAMPLES: &str = "spca1_corr_samples";
const SPCA2_SAMPLES: &str = "spca2_corr_samples";

fn put_matrix(out: &mut Vec<u8>, m: &Array2<f64>) {
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn corr_parts(m: &SpcaModel) -> (Array2<f64>, u64) {
    match m.correlation() {
        Some(c) => (c.matrix().clone(), c.n_samples()),
        None => (Array2::zeros((0, 0)), 0),
    }
}

pub fn encode_model(model: &HierarchicalModel) -> Vec<u8> {
    let (c1, n1) = corr_parts(&model.spca1);
    let (c2, n2) = corr_parts(&model.spca2);
    let mut header = model.config.to_text();
    header.push_str(&format!("{SPCA1_SAMPLES} = {n1}\n{SPCA2_SAMPLES} = {n2}\n"));

    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    put_matrix(&mut out, model.spca1.a());
    put_matrix(&mut out, &c1);
    put_matrix(&mut out, model.ica1.a());
    put_matrix(&mut out, &model.gauss1.to_array());
    put_matrix(&mut out, model.spca2.a());
    put_matrix(&mut out, &c2);
    put_matrix(&mut out, model.ica2.a());
    put_matrix(&mut out, &model.gauss2.to_array());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Truncated(format!("while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn matrix(&mut self, what: &str) -> Result<Array2<f64>> {
        let rows = self.u64(what)? as usize;
        let cols = self.u64(what)? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::Format(format!("{what}: dimensions overflow")))?;
        let data = self.take(n, what)?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Array2::from_shape_vec((rows, cols), values).expect("length computed from shape"))
    }
}

fn correlation(m: Array2<f64>, n: u64) -> Result<Option<CorrelationMatrix>> {
    if m.is_empty() {
        return Ok(None);
    }
    CorrelationMatrix::from_parts(m, n).map(Some)
}

fn attach(model: SpcaModel, corr: Option<CorrelationMatrix>) -> Result<SpcaModel> {
    match corr {
        Some(c) => model
            .with_correlation(c)
            .map_err(|e| Error::DimensionChain(e.to_string())),
        None => Ok(model),
    }
}

fn tables(m: Array2<f64>) -> Result<Gaussianizer> {
    Gaussianizer::from_tables(m.rows().into_iter().map(|r| r.to_vec()).collect())
}

pub fn decode_model(bytes: &[u8]) -> Result<HierarchicalModel> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: "HVC1".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_VERSION,
            found: version,
        });
    }
    let header_len = r.u64("header length")? as usize;
    let header =
        std::str::from_utf8(r.take(header_len, "header")?).map_err(|_| Error::Format("header is not UTF-8".into()))?;

    let mut config = PipelineConfig::paper();
    let (mut n1, mut n2) = (0u64, 0u64);
    for (k, v) in parse_kv(header)? {
        let count = || v.parse::<u64>().map_err(|_| Error::Format(format!("bad {k}")));
        match k.as_str() {
            SPCA1_SAMPLES => n1 = count()?,
            SPCA2_SAMPLES => n2 = count()?,
            _ => {
                if !config.set(&k, &v)? {
                    return Err(Error::Format(format!("unknown header key {k:?}")));
                }
            }
        }
    }

    let spca1_a = r.matrix("spca1.A")?;
    let spca1_c = r.matrix("spca1.C")?;
    let ica1_a = r.matrix("ica1.A")?;
    let gauss1 = r.matrix("gauss1")?;
    let spca2_a = r.matrix("spca2.A")?;
    let spca2_c = r.matrix("spca2.C")?;
    let ica2_a = r.matrix("ica2.A")?;
    let gauss2 = r.matrix("gauss2")?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let chain = |e: Error| match e {
        Error::InvalidArgument(m) | Error::Shape(m) => Error::DimensionChain(m),
        other => other,
    };
    let spca1 = attach(
        SpcaModel::new(spca1_a, config.lambda1).map_err(chain)?,
        correlation(spca1_c, n1)?,
    )?;
    let spca2 = attach(
        SpcaModel::new(spca2_a, config.lambda2).map_err(chain)?,
        correlation(spca2_c, n2)?,
    )?;
    let ica1 = DictionaryModel::new(ica1_a, config.ica_lambda, config.penalty)?;
    let ica2 = DictionaryModel::new(ica2_a, config.ica_lambda, config.penalty)?;
    HierarchicalModel::new(config, spca1, ica1, tables(gauss1)?, spca2, ica2, tables(gauss2)?)
}

pub fn save(model: &HierarchicalModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<HierarchicalModel> {
    decode_model(&fs::read(path)?)
}
