//! Image ingestion, preprocessing and patch sampling.
//!
//! Input images are binary Netpbm files (P5 grayscale or P6 RGB, 8-bit).
//! The preprocessing chain is grayscale -> 2x2 box downscale -> per-image
//! standardization. Preprocessed rasters can be cached on disk in the
//! `HVCR` format so training does not redo the chain.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};

/// Decoded image with intensities in `[0, 1]`, interleaved per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

/// Single-channel row-major image of real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image pixels".into()));
        }
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// View as a `height x width` matrix.
    pub fn view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.height, self.width), &self.data).expect("length checked")
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    /// Copy the `side x side` block whose top-left corner is `(x, y)`, row-major.
    pub fn block(&self, x: usize, y: usize, side: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(side * side);
        for row in y..y + side {
            let start = row * self.width + x;
            out.extend_from_slice(&self.data[start..start + side]);
        }
        out
    }
}

/// `N x L` matrix of flattened square patches, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBatch {
    side: usize,
    data: Array2<f64>,
}

impl PatchBatch {
    pub fn new(side: usize, data: Array2<f64>) -> Result<Self> {
        if data.ncols() != side * side {
            return Err(Error::Shape(format!(
                "patch side {side} implies dim {}, batch has {} columns",
                side * side,
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("patch batch".into()));
        }
        Ok(Self { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }
}

/// Load a binary PGM (P5) or PPM (P6) file with maxval <= 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let bytes = fs::read(path.as_ref())?;
    decode_netpbm(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("expected {what} in Netpbm header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{what} out of range")))
    }
}

/// Decode an in-memory P5/P6 file.
pub fn decode_netpbm(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < 2 {
        return Err(Error::Truncated("file shorter than magic".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::BadMagic {
                expected: "P5 or P6".into(),
                found: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if maxval == 0 || width == 0 || height == 0 {
        return Err(Error::Format("zero width, height or maxval".into()));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    let payload = &bytes[cur.pos..];
    let expected = width * height * channels;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "header declares {expected} raster bytes, file has {}",
            payload.len()
        )));
    }
    let scale = maxval as f64;
    Ok(RawImage {
        width,
        height,
        channels,
        data: payload.iter().map(|&b| b as f64 / scale).collect(),
    })
}

/// Write an 8-bit binary PGM.
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::Shape(format!(
            "{width}x{height} PGM needs {} bytes, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

/// Rec. 601 luma for RGB input; identity for single-channel input.
pub fn to_grayscale(img: &RawImage) -> Result<GrayImage> {
    let data = match img.channels {
        1 => img.data.clone(),
        3 => img
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect(),
        c => return Err(Error::UnsupportedChannels(c)),
    };
    GrayImage::new(img.width, img.height, data)
}

/// Halve both dimensions by averaging 2x2 blocks. An odd trailing row or
/// column is dropped.
pub fn downscale_half(img: &GrayImage) -> Result<GrayImage> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot downscale a {}x{} image",
            img.width, img.height
        )));
    }
    let (w, h) = (img.width / 2, img.height / 2);
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = (2 * x, 2 * y);
            let sum = img.get(sx, sy) + img.get(sx + 1, sy) + img.get(sx, sy + 1) + img.get(sx + 1, sy + 1);
            data.push(sum / 4.0);
        }
    }
    GrayImage::new(w, h, data)
}

/// Shift and scale to zero mean and unit population variance.
pub fn normalize(img: &GrayImage) -> Result<GrayImage> {
    if img.data.len() < 2 {
        return Err(Error::Degenerate("need at least two pixels".into()));
    }
    let mean = img.mean();
    let var = img.variance();
    let (lo, hi) = img
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    // rounding in the downscale can leave a flat image a few ulps from constant
    if !(var > 0.0) || hi - lo <= 16.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
        return Err(Error::Degenerate("image has zero variance".into()));
    }
    let sd = var.sqrt();
    GrayImage::new(
        img.width,
        img.height,
        img.data.iter().map(|v| (v - mean) / sd).collect(),
    )
}

/// Full preprocessing chain: grayscale, downscale by half, normalize.
pub fn preprocess(img: &RawImage) -> Result<GrayImage> {
    normalize(&downscale_half(&to_grayscale(img)?)?)
}

/// Draw `count` patches at uniformly random top-left corners (with replacement).
pub fn sample_patches<R: Rng + ?Sized>(img: &GrayImage, count: usize, side: usize, rng: &mut R) -> Result<PatchBatch> {
    if side == 0 || side > img.width || side > img.height {
        return Err(Error::InvalidArgument(format!(
            "patch side {side} does not fit a {}x{} image",
            img.width, img.height
        )));
    }
    if count == 0 {
        return Err(Error::InvalidArgument("patch count must be >= 1".into()));
    }
    let dim = side * side;
    let mut data = Array2::zeros((count, dim));
    for mut row in data.rows_mut() {
        let x = rng.random_range(0..=img.width - side);
        let y = rng.random_range(0..=img.height - side);
        for (r, src_y) in (y..y + side).enumerate() {
            let src = &img.data[src_y * img.width + x..src_y * img.width + x + side];
            for (c, &v) in src.iter().enumerate() {
                row[r * side + c] = v;
            }
        }
    }
    PatchBatch::new(side, data)
}

const RASTER_MAGIC: &[u8; 4] = b"HVCR";

/// Serialize a preprocessed image: `"HVCR"`, rows u64, cols u64, then
/// row-major little-endian binary64 pixels.
pub fn encode_raster(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 8 * img.data.len());
    out.extend_from_slice(RASTER_MAGIC);
    out.extend_from_slice(&(img.height as u64).to_le_bytes());
    out.extend_from_slice(&(img.width as u64).to_le_bytes());
    for v in &img.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raster(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 4 || &bytes[..4] != RASTER_MAGIC {
        return Err(Error::BadMagic {
            expected: "HVCR".into(),
            found: String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned(),
        });
    }
    if bytes.len() < 20 {
        return Err(Error::Truncated("raster header".into()));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("raster dimensions overflow".into()))?;
    let body = &bytes[20..];
    if body.len() < 8 * n {
        return Err(Error::Truncated(format!(
            "raster needs {} bytes, has {}",
            8 * n,
            body.len()
        )));
    }
    if body.len() > 8 * n {
        return Err(Error::Format("trailing bytes after raster".into()));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GrayImage::new(cols, rows, data)
}

pub fn write_raster(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_raster(img))?;
    Ok(())
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_raster(&fs::read(path)?)
}
