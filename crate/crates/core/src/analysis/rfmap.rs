//! Layer-2 receptive-field maps and the orientation taxonomy of layer-2 units.
//!
//! A map places one bar per successfully fitted layer-1 feature in each
//! quadrant of the layer-2 field, weighted by its connection to the unit.
//! Orientation statistics use doubled angles, so `theta` and `theta + pi`
//! are the same orientation.

use std::f64::consts::PI;
use std::fmt;

use ndarray::ArrayView1;

use super::gabor::GaborParams;
use crate::error::{Error, Result};

/// Thresholds of the taxonomy and RF-map construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxonomyConfig {
    /// Minimum Gabor `r2` for a layer-1 feature to appear on a map.
    pub min_fit_r2: f64,
    /// Locations per side of the spatial grid.
    pub grid: usize,
    /// A location is active when its `|weight|` mass reaches this fraction
    /// of the heaviest location.
    pub active_fraction: f64,
    /// Doubled-angle resultant length above which a location is oriented.
    pub oriented_resultant: f64,
    /// Below this fraction of oriented active locations the cell is `LocationOnly`.
    pub location_only_fraction: f64,
    /// Largest deviation of a location's mean orientation from the global
    /// mean for `UniformOrientation`, in degrees.
    pub uniform_tolerance_deg: f64,
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        Self {
            min_fit_r2: 0.5,
            grid: 4,
            active_fraction: 0.1,
            oriented_resultant: 0.5,
            location_only_fraction: 0.25,
            uniform_tolerance_deg: 22.5,
        }
    }
}

/// One layer-1 feature drawn on a layer-2 map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub x0: f64,
    pub y0: f64,
    pub theta: f64,
    pub length: f64,
    pub weight: f64,
    /// 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
    pub quadrant: usize,
    /// Layer-1 feature index.
    pub feature: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfMap {
    pub unit: usize,
    /// Side of the square layer-2 field in pixels.
    pub field: usize,
    pub bars: Vec<Bar>,
    /// Layer-1 features left out because their fit failed.
    pub dropped_features: usize,
}

/// Build the map of one layer-2 unit from its connection weights
/// (`4 * K` entries, quadrant-major) and the Gabor fits of the `K`
/// layer-1 features.
pub fn build_rf_map(
    unit: usize,
    weights: ArrayView1<f64>,
    gabors: &[GaborParams],
    layer1_side: usize,
    cfg: &TaxonomyConfig,
) -> Result<RfMap> {
    let k = gabors.len();
    if k == 0 {
        return Err(Error::InvalidArgument("gabor table is empty".into()));
    }
    if weights.len() != 4 * k {
        return Err(Error::Shape(format!(
            "{} connection weights for a table of {k} features (need {})",
            weights.len(),
            4 * k
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("connection weights".into()));
    }
    let side = layer1_side as f64;
    let inside = |v: f64| v.clamp(0.0, side - 1e-9);
    let mut bars = Vec::new();
    let mut dropped = 0;
    for (f, g) in gabors.iter().enumerate() {
        if !(g.r2 >= cfg.min_fit_r2) {
            dropped += 1;
            continue;
        }
        for q in 0..4 {
            let (ox, oy) = ((q % 2) as f64 * side, (q / 2) as f64 * side);
            bars.push(Bar {
                x0: ox + inside(g.x0),
                y0: oy + inside(g.y0),
                theta: g.theta,
                length: 4.0 * g.sigma_par,
                weight: weights[q * k + f],
                quadrant: q,
                feature: f,
            });
        }
    }
    Ok(RfMap {
        unit,
        field: 2 * layer1_side,
        bars,
        dropped_features: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    UniformOrientation,
    NonUniform,
    LocationOnly,
}

impl CellClass {
    pub const ALL: [CellClass; 3] = [
        CellClass::UniformOrientation,
        CellClass::NonUniform,
        CellClass::LocationOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellClass::UniformOrientation => "uniform",
            CellClass::NonUniform => "nonuniform",
            CellClass::LocationOnly => "location_only",
        }
    }
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A class together with the statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: CellClass,
    /// Per grid location (row-major): `None` if inactive, else the
    /// doubled-angle resultant length of its positive weights.
    pub resultants: Vec<Option<f64>>,
    /// Mean orientation (radians, `[0, pi)`) of each oriented location.
    pub location_orientations: Vec<f64>,
    /// Largest deviation of an oriented location's mean from the global
    /// mean orientation, in degrees; `None` when no location is oriented.
    pub dispersion_deg: Option<f64>,
}

impl Classification {
    pub fn active_locations(&self) -> usize {
        self.resultants.iter().flatten().count()
    }
}

/// Assign a map to one of the three cell classes.
pub fn classify_cell(map: &RfMap, cfg: &TaxonomyConfig) -> Result<Classification> {
    if map.bars.is_empty() {
        return Err(Error::InvalidArgument("RF map has no bars".into()));
    }
    let g = cfg.grid.max(1);
    let cell = map.field as f64 / g as f64;
    let bin = |v: f64| ((v / cell).floor().max(0.0) as usize).min(g - 1);

    let mut mass = vec![0.0; g * g];
    let mut pos = vec![0.0; g * g];
    let mut cs = vec![(0.0, 0.0); g * g];
    for b in &map.bars {
        let i = bin(b.y0) * g + bin(b.x0);
        mass[i] += b.weight.abs();
        if b.weight > 0.0 {
            pos[i] += b.weight;
            cs[i].0 += b.weight * (2.0 * b.theta).cos();
            cs[i].1 += b.weight * (2.0 * b.theta).sin();
        }
    }
    let peak = mass.iter().cloned().fold(0.0, f64::max);
    let mut resultants = vec![None; g * g];
    let mut oriented = Vec::new();
    let mut active = 0usize;
    for i in 0..g * g {
        if !(peak > 0.0) || mass[i] < cfg.active_fraction * peak {
            continue;
        }
        active += 1;
        let r = if pos[i] > 0.0 {
            (cs[i].0.hypot(cs[i].1) / pos[i]).min(1.0)
        } else {
            0.0
        };
        resultants[i] = Some(r);
        if r > cfg.oriented_resultant {
            oriented.push(cs[i]);
        }
    }

    let orientation = |(c, s): (f64, f64)| (0.5 * s.atan2(c)).rem_euclid(PI);
    let location_orientations: Vec<f64> = oriented.iter().map(|&v| orientation(v)).collect();

    let dispersion_deg = if oriented.is_empty() {
        None
    } else {
        // global mean: doubled-angle average of unit location vectors
        let (c, s) = location_orientations
            .iter()
            .fold((0.0, 0.0), |(c, s), &t| (c + (2.0 * t).cos(), s + (2.0 * t).sin()));
        let global = orientation((c, s));
        let worst = location_orientations
            .iter()
            .map(|&t| {
                let d = (t - global).rem_euclid(PI);
                d.min(PI - d)
            })
            .fold(0.0, f64::max);
        Some(worst.to_degrees())
    };

    let class = if active == 0 || (oriented.len() as f64) < cfg.location_only_fraction * active as f64 {
        CellClass::LocationOnly
    } else if dispersion_deg.is_some_and(|d| d <= cfg.uniform_tolerance_deg) {
        CellClass::UniformOrientation
    } else {
        CellClass::NonUniform
    };
    Ok(Classification {
        class,
        resultants,
        location_orientations,
        dispersion_deg,
    })
}

/// Count of each class, in [`CellClass::ALL`] order.
pub fn class_counts<'a>(classes: impl IntoIterator<Item = &'a CellClass>) -> [usize; 3] {
    let mut out = [0; 3];
    for c in classes {
        out[CellClass::ALL.iter().position(|x| x == c).expect("listed")] += 1;
    }
    out
}
