//! Shared fixtures for the integration suites.
//!
//! `corpus()` returns preprocessed training images. When `HVC_CORPUS` names a
//! directory of PGM/PPM files those are used; otherwise a deterministic set of
//! occlusion ("dead leaves") scenes is synthesized. Such scenes share the
//! properties that matter here with natural images: sharp oriented edges at
//! all positions, a power-law spread of object sizes and a roughly 1/f^2
//! power spectrum.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use hvc_core::imageio::{load_image, preprocess, write_pgm};
use hvc_core::{seeded_rng, GrayImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const SCENES: usize = 10;
/// Side of the synthesized source images; preprocessing halves it.
pub const SCENE_SIDE: usize = 256;

/// One occlusion scene of `side x side` 8-bit pixels, rendered at 2x and box-filtered.
pub fn dead_leaves(side: usize, seed: u64) -> Vec<u8> {
    let mut rng = seeded_rng(seed);
    let hi = 2 * side;
    let mut canvas = vec![rng.random_range(0.0..255.0); hi * hi];
    let (r_min, r_max) = (3.0f64, 0.25 * hi as f64);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let leaves = 6 * side;
    for _ in 0..leaves {
        // radius density ~ r^-3 on [r_min, r_max] by inverse transform
        let u: f64 = rng.random();
        let inv = r_min.powi(-2) - u * (r_min.powi(-2) - r_max.powi(-2));
        let r = inv.powf(-0.5);
        let cx = rng.random_range(-r..hi as f64 + r);
        let cy = rng.random_range(-r..hi as f64 + r);
        let aspect: f64 = rng.random_range(0.3..1.0);
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let rect = rng.random_bool(0.4);
        let base: f64 = rng.random_range(0.0..255.0);
        let (gx, gy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let (s, c) = angle.sin_cos();
        let (a, b) = (r, r * aspect);
        let x_lo = (cx - r).floor().max(0.0) as usize;
        let x_hi = ((cx + r).ceil() as usize).min(hi);
        let y_lo = (cy - r).floor().max(0.0) as usize;
        let y_hi = ((cy + r).ceil() as usize).min(hi);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let (p, q) = (dx * c + dy * s, -dx * s + dy * c);
                let inside = if rect {
                    p.abs() <= a && q.abs() <= b
                } else {
                    (p / a).powi(2) + (q / b).powi(2) <= 1.0
                };
                if inside {
                    canvas[y * hi + x] = base + gx * dx + gy * dy;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let i = 2 * y * hi + 2 * x;
            let v = 0.25 * (canvas[i] + canvas[i + 1] + canvas[i + hi] + canvas[i + hi + 1]);
            out.push((v + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// Write the synthetic scenes as PGM files into `dir`.
pub fn write_scenes(dir: &Path, count: usize, side: usize) -> Vec<PathBuf> {
    (0..count)
        .map(|k| {
            let path = dir.join(format!("scene_{k:02}.pgm"));
            write_pgm(&path, side, side, &dead_leaves(side, 1000 + k as u64)).unwrap();
            path
        })
        .collect()
}

fn load_dir(dir: &Path) -> Vec<GrayImage> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| preprocess(&load_image(p).unwrap()).unwrap())
        .collect()
}

/// Preprocessed training images and a label describing their origin.
pub fn corpus() -> (Vec<GrayImage>, String) {
    if let Ok(dir) = std::env::var("HVC_CORPUS") {
        let images = load_dir(Path::new(&dir));
        assert!(!images.is_empty(), "HVC_CORPUS={dir} holds no PGM/PPM images");
        let label = format!("{} images from {dir}", images.len());
        return (images, label);
    }
    let tmp = tempfile::tempdir().unwrap();
    write_scenes(tmp.path(), SCENES, SCENE_SIDE);
    let images = load_dir(tmp.path());
    (images, format!("{SCENES} synthetic occlusion scenes"))
}
