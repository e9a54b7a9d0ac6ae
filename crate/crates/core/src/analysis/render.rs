//! Filter grids as PGM and RF maps as SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::rfmap::RfMap;
use crate::error::{Error, Result};
use crate::imageio::write_pgm;

const SEPARATOR: u8 = 0;
const NEAR_ZERO: f64 = 0.1;
const GRAY: (u8, u8, u8) = (128, 128, 128);
const SVG_SCALE: f64 = 10.0;

/// Tile equally sized filters into a near-square grid, each min-max
/// normalized to `[0, 255]`, with 1-pixel separators between tiles.
/// Returns `(width, height, pixels)`.
pub fn filter_grid(filters: &[Array2<f64>]) -> Result<(usize, usize, Vec<u8>)> {
    let first = filters
        .first()
        .ok_or_else(|| Error::InvalidArgument("no filters to render".into()))?;
    let (fh, fw) = first.dim();
    if fh == 0 || fw == 0 {
        return Err(Error::InvalidArgument("filters must be nonempty".into()));
    }
    if filters.iter().any(|f| f.dim() != (fh, fw)) {
        return Err(Error::Shape("filters differ in size".into()));
    }
    let cols = (filters.len() as f64).sqrt().ceil() as usize;
    let rows = filters.len().div_ceil(cols);
    let width = cols * fw + cols - 1;
    let height = rows * fh + rows - 1;
    let mut px = vec![SEPARATOR; width * height];
    for (i, f) in filters.iter().enumerate() {
        let (lo, hi) = f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let (ox, oy) = ((i % cols) * (fw + 1), (i / cols) * (fh + 1));
        for ((r, c), &v) in f.indexed_iter() {
            let level = if hi > lo {
                ((v - lo) / (hi - lo) * 255.0).round() as u8
            } else {
                128
            };
            px[(oy + r) * width + ox + c] = level;
        }
    }
    Ok((width, height, px))
}

pub fn render_filters(filters: &[Array2<f64>], path: impl AsRef<Path>) -> Result<()> {
    let (w, h, px) = filter_grid(filters)?;
    write_pgm(path, w, h, &px)
}

/// Diverging color of a weight normalized by the map's largest `|weight|`.
pub fn weight_color(normalized: f64) -> (u8, u8, u8) {
    if !(normalized.abs() >= NEAR_ZERO) {
        return GRAY;
    }
    let fade = (200.0 * (1.0 - normalized.abs().min(1.0))).round() as u8;
    if normalized > 0.0 {
        (255, fade, fade)
    } else {
        (fade, fade, 255)
    }
}

/// SVG document with a background rect and one line per bar, drawn in
/// order of increasing `|weight|`.
pub fn rf_map_svg(map: &RfMap) -> Result<String> {
    if map.bars.is_empty() {
        return Err(Error::InvalidArgument("RF map has no bars".into()));
    }
    let max = map.bars.iter().fold(0.0f64, |m, b| m.max(b.weight.abs()));
    let size = map.field as f64 * SVG_SCALE;
    let mut order: Vec<usize> = (0..map.bars.len()).collect();
    order.sort_by(|&a, &b| map.bars[a].weight.abs().total_cmp(&map.bars[b].weight.abs()));

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{size}" height="{size}" fill="rgb(255,255,255)"/>"#
    );
    for i in order {
        let b = &map.bars[i];
        let (c, s) = (b.theta.cos(), b.theta.sin());
        let half = 0.5 * b.length;
        // pixel (u, v) covers [u, u+1); draw through the pixel center
        let (cx, cy) = (b.x0 + 0.5, b.y0 + 0.5);
        let (x1, y1) = ((cx - half * c) * SVG_SCALE, (cy - half * s) * SVG_SCALE);
        let (x2, y2) = ((cx + half * c) * SVG_SCALE, (cy + half * s) * SVG_SCALE);
        let (r, g, bl) = weight_color(if max > 0.0 { b.weight / max } else { 0.0 });
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="rgb({r},{g},{bl})" stroke-width="3"/>"#
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_rf_map(map: &RfMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, rf_map_svg(map)?)?;
    Ok(())
}
