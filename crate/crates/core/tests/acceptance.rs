//! Acceptance suite: one line per criterion, `PASS` or `FAIL`, with the
//! measured statistic and wall time.
//!
//! Run everything with `cargo test -p hvc-core --test acceptance`, or pick
//! criteria by number: `cargo test -p hvc-core --test acceptance -- 3 11`.
//! `HVC_CORPUS=<dir of PGM/PPM>` replaces the synthetic scene corpus used by
//! criteria 4 and 11.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use hvc_core::analysis::{
    classify_cell, fit_gabor, gabor_table, locality, spca1_filters, stc, unit_rf_map, Bar, CellClass, GaborParams,
    Layer2Stage, RfMap, TaxonomyConfig,
};
use hvc_core::hierarchy::{decode_model, encode_model, train_pipeline, PipelineConfig};
use hvc_core::imageio::sample_patches;
use hvc_core::sparsecode::{DictionaryModel, DictionaryTrainer, Penalty};
use hvc_core::spca::{CorrelationMatrix, SpcaModel, SpcaTrainer};
use hvc_core::{inverse_normal_cdf, seeded_rng, Error, Gaussianizer, SeededRng};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut SeededRng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Central differences of `f` at `a`, entry by entry.
fn numeric_grad(a: &Array2<f64>, h: f64, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(a.raw_dim());
    let mut probe = a.clone();
    for idx in ndarray::indices(a.raw_dim()) {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let hi = f(&probe);
        probe[idx] = orig - h;
        let lo = f(&probe);
        probe[idx] = orig;
        g[idx] = (hi - lo) / (2.0 * h);
    }
    g
}

fn rel_err(analytic: &Array2<f64>, numeric: &Array2<f64>) -> f64 {
    let diff = (analytic - numeric).mapv(|v| v * v).sum().sqrt();
    let scale = numeric.mapv(|v| v * v).sum().sqrt().max(1e-12);
    diff / scale
}

fn c1_gradients() -> Outcome {
    const H: f64 = 1e-5;
    let mut rng = seeded_rng(101);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let l = rng.random_range(2..=10);
        let m = rng.random_range(1..=l);
        let k = rng.random_range(1..=10);
        let n = rng.random_range(1..=6);
        let x = gaussian(n, l, &mut rng);

        let a = gaussian(l, m, &mut rng);
        let s = gaussian(n, m, &mut rng);
        let spca = SpcaModel::new(a.clone(), 0.05).unwrap();
        let ga = spca.objective_grad(x.view(), s.view()).unwrap();
        let na = numeric_grad(&a, H, |a| {
            SpcaModel::new(a.clone(), 0.05)
                .unwrap()
                .objective(x.view(), s.view())
                .unwrap()
        });
        let gs = spca.objective_grad_codes(x.view(), s.view()).unwrap();
        let ns = numeric_grad(&s, H, |s| spca.objective(x.view(), s.view()).unwrap());
        worst = worst.max(rel_err(&ga, &na)).max(rel_err(&gs, &ns));

        let d = gaussian(l, k, &mut rng);
        let c = gaussian(n, k, &mut rng);
        let dict = DictionaryModel::new(d.clone(), 0.3, Penalty::LogCosh).unwrap();
        let gd = dict.objective_grad_dict(x.view(), c.view()).unwrap();
        let nd = numeric_grad(&d, H, |d| {
            DictionaryModel::new(d.clone(), 0.3, Penalty::LogCosh)
                .unwrap()
                .objective(x.view(), c.view())
                .unwrap()
        });
        let gc = dict.objective_grad_codes(x.view(), c.view()).unwrap();
        let nc = numeric_grad(&c, H, |c| dict.objective(x.view(), c.view()).unwrap());
        worst = worst.max(rel_err(&gd, &nd)).max(rel_err(&gc, &nc));
    }
    outcome(
        worst <= 1e-6,
        format!("max relative error {worst:.2e} over 20 instances (limit 1e-6)"),
    )
}

fn c2_correlation_identity() -> Outcome {
    let mut rng = seeded_rng(202);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let l = rng.random_range(1..=12);
        let m = rng.random_range(1..=l);
        let n = rng.random_range(1..=40);
        let x = gaussian(n, l, &mut rng);
        let a = gaussian(l, m, &mut rng) * 0.5;
        let model = SpcaModel::new(a.clone(), rng.random_range(0.0..0.2)).unwrap();
        let tied = model.encode_tied(x.view()).unwrap();
        let direct = model.objective(x.view(), tied.view()).unwrap();
        let c = CorrelationMatrix::from_parts(x.t().dot(&x) / n as f64, n as u64).unwrap();
        let via_c = model.objective_from_corr(&c).unwrap();
        worst = worst.max((direct - via_c).abs() / direct.abs().max(1e-300));
    }
    outcome(
        worst <= 1e-10,
        format!("max relative difference {worst:.2e} over 50 instances (limit 1e-10)"),
    )
}

/// Eigendecomposition oracle for the power-constrained single-unit case:
/// the optimal column is the top eigenvector scaled to unit output power,
/// and the least-squares reconstruction error is half the discarded spectrum.
fn spca_oracle(c: &Array2<f64>) -> (Array1<f64>, f64) {
    let n = c.nrows();
    let eig = DMatrix::from_fn(n, n, |i, j| c[(i, j)]).symmetric_eigen();
    let top = (0..n)
        .max_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .unwrap();
    let lam = eig.eigenvalues[top];
    let col = Array1::from_shape_fn(n, |i| eig.eigenvectors[(i, top)] / lam.sqrt());
    let discarded: f64 = eig.eigenvalues.iter().sum::<f64>() - lam;
    (col, 0.5 * discarded)
}

fn c3_spca_closed_form() -> Outcome {
    let exact = ndarray::array![[4.0, 0.0], [0.0, 1.0]];
    let (col, optimum) = spca_oracle(&exact);
    let c = CorrelationMatrix::from_parts(exact.clone(), 0).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;

    let mut check = |route: &str, m: &SpcaModel, power_c: &CorrelationMatrix| {
        let rec = m.optimal_reconstruction(&c).unwrap();
        let power = m.second_moments(power_c).unwrap()[0];
        let a = m.a().column(0).to_owned();
        let align = (a.dot(&col).abs() - col.dot(&col)).abs() / col.dot(&col);
        let ok = (rec / optimum - 1.0).abs() <= 0.05 && (0.95..=1.0).contains(&power) && align < 0.05;
        pass &= ok;
        notes.push(format!(
            "{route}: reconstruction {rec:.4} vs {optimum:.4}, power {power:.4}, a = ({:.3}, {:.3})",
            a[0], a[1]
        ));
    };

    let from_corr = SpcaTrainer::new(1, 0.0, 2000, 0.05)
        .train_from_corr(&c, &mut seeded_rng(303), &mut |_| {})
        .unwrap();
    check("correlation route", &from_corr, &c);

    let scale = Array1::from(vec![2.0, 1.0]);
    let batches = SpcaTrainer::new(1, 0.0, 3000, 0.01)
        .train(
            2,
            |r| Ok(gaussian(64, 2, r) * &scale),
            &mut seeded_rng(304),
            &mut |_| {},
        )
        .unwrap();
    let seen = batches.correlation().unwrap().clone();
    check("batch route", &batches, &seen);
    outcome(pass, notes.join("; "))
}

fn c4_saturation() -> Outcome {
    let (images, label) = common::corpus();
    let cfg = PipelineConfig::desk();
    let mut worst_epoch = f64::NEG_INFINITY;
    let model = SpcaTrainer::new(32, cfg.lambda1, 2000, cfg.lr_spca)
        .train(
            64,
            |r| {
                let i = r.random_range(0..images.len());
                Ok(sample_patches(&images[i], cfg.batch, 8, r)?.into_data())
            },
            &mut seeded_rng(404),
            &mut |s| worst_epoch = worst_epoch.max(s.max_second_moment),
        )
        .unwrap();
    let powers = model.second_moments(model.correlation().unwrap()).unwrap();
    let max = powers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let high = powers.iter().filter(|&&p| p > 0.9).count();
    let pass = max <= 1.0 + 1e-6 && worst_epoch <= 1.0 + 1e-6 && high as f64 >= 0.9 * powers.len() as f64;
    outcome(
        pass,
        format!(
            "{label}; max second moment {max:.9} (per-epoch max {worst_epoch:.9}), {high}/{} units above 0.9",
            powers.len()
        ),
    )
}

fn c5_soft_threshold() -> Outcome {
    let m = DictionaryModel::new(ndarray::array![[1.0]], 1.0, Penalty::Abs).unwrap();
    let (x, lambda, norm2) = (3.0f64, 1.0f64, 1.0f64);
    let oracle = x.signum() * (x.abs() - lambda).max(0.0) / norm2;
    let s = m.infer(ndarray::array![x].view(), 1000, 0.05).unwrap()[0];
    outcome(
        (s - oracle).abs() <= 1e-3,
        format!("inferred {s:.6}, soft threshold {oracle}"),
    )
}

fn c6_dictionary_recovery() -> Outcome {
    let truth: Vec<[f64; 2]> = [0.2f64, 1.0, 1.9, 2.6].iter().map(|t| [t.cos(), t.sin()]).collect();
    let mut trainer = DictionaryTrainer::new(4, 0.1, 3000, 0.1);
    trainer.penalty = Penalty::Abs;
    trainer.infer_steps = 400;
    trainer.infer_rate = 0.05;
    let learned = trainer
        .train(
            2,
            |r| {
                Ok(Array2::from_shape_fn((32, 2), |_| 0.0)).map(|mut x| {
                    for mut row in x.rows_mut() {
                        let k = r.random_range(0..4);
                        let amp = r.random_range(0.5..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
                        row[0] = amp * truth[k][0];
                        row[1] = amp * truth[k][1];
                    }
                    x
                })
            },
            &mut seeded_rng(606),
            &mut |_| {},
        )
        .unwrap();
    let a = learned.a();
    let best: Vec<f64> = truth
        .iter()
        .map(|t| {
            a.columns()
                .into_iter()
                .map(|c| (c[0] * t[0] + c[1] * t[1]).abs() / c.dot(&c).sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    let worst = best.iter().copied().fold(1.0, f64::min);
    outcome(worst > 0.95, format!("best |cosine| per true atom {best:.4?}"))
}

fn c7_gaussianizer() -> Outcome {
    let mut rng = seeded_rng(707);
    let t = StudentT::new(1.5).unwrap();
    let n = 10_000;
    let data = Array2::from_shape_fn((n, 3), |(_, j)| match j {
        0 => t.sample(&mut rng),
        1 => {
            let u: f64 = rng.random_range(-0.5..0.5);
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }
        _ => rng.sample::<f64, _>(StandardNormal).powi(3),
    });
    let g = Gaussianizer::fit(data.view()).unwrap();
    let out = g.transform_batch(data.view()).unwrap();
    let mut pass = out.iter().all(|v| v.is_finite());
    let mut notes = Vec::new();
    for j in 0..3 {
        let col = out.column(j);
        let mean = col.mean().unwrap();
        let var = col.mapv(|v| (v - mean) * (v - mean)).sum() / n as f64;
        let mut pairs: Vec<(f64, f64)> = data
            .column(j)
            .iter()
            .map(|v| v.abs())
            .zip(col.iter().copied())
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = pairs.windows(2).all(|w| w[1].1 >= w[0].1);
        pass &= mean.abs() <= 0.05 && (0.9..=1.1).contains(&var) && monotone;
        notes.push(format!("dim {j}: mean {mean:+.4} var {var:.4} monotone {monotone}"));
    }
    outcome(pass, notes.join("; "))
}

fn c8_inverse_cdf() -> Outcome {
    let (lo, hi) = (1e-8, 1.0 - 1e-8);
    let points = 10_000;
    let mut worst = 0.0f64;
    for i in 0..points {
        let p = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let z = inverse_normal_cdf(p).unwrap();
        let back = 0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2);
        worst = worst.max((back - p).abs());
    }
    outcome(
        worst <= 1e-9,
        format!("max |Phi(Phi^-1(p)) - p| = {worst:.2e} on {points} points"),
    )
}

fn c9_stc() -> Outcome {
    let dim = 16;
    let mut w = Array1::from_shape_fn(dim, |i| ((i as f64) * 0.7).sin() + 0.2);
    w /= w.dot(&w).sqrt();
    // E[(w.x)^2 x x^T] = I + 2 w w^T: top eigenvalue 3 along w
    let analytic_top = 3.0;
    let spec = stc(|x| Ok(w.dot(&x)), dim, 100_000, &mut seeded_rng(909)).unwrap();
    let cos = spec.top().dot(&w).abs();
    let ratio = spec.eigvals[0] / analytic_top;
    outcome(
        cos > 0.99 && (ratio - 1.0).abs() <= 0.1,
        format!(
            "top eigvec |cos| {cos:.5}, top eigval {:.4} (analytic 3)",
            spec.eigvals[0]
        ),
    )
}

fn angle_diff_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

fn c10_gabor_recovery() -> Outcome {
    let mut rng = seeded_rng(1010);
    let mut good = 0;
    let mut worst = (0.0f64, 0.0f64, 1.0f64);
    for _ in 0..50 {
        let truth = GaborParams {
            x0: rng.random_range(5.5..9.5),
            y0: rng.random_range(5.5..9.5),
            theta: rng.random_range(0.0..PI),
            freq: rng.random_range(0.1..0.3),
            phase: rng.random_range(0.0..2.0 * PI),
            sigma_par: rng.random_range(1.8..3.5),
            sigma_perp: rng.random_range(1.8..3.5),
            amplitude: rng.random_range(0.5..2.0),
            r2: 1.0,
        };
        let fit = fit_gabor(truth.render(16, 16).view()).unwrap();
        let dt = angle_diff_mod_pi(fit.theta, truth.theta);
        let df = (fit.freq / truth.freq - 1.0).abs();
        worst = (worst.0.max(dt), worst.1.max(df), worst.2.min(fit.r2));
        if dt <= 0.02 && df <= 0.02 && fit.r2 > 0.99 {
            good += 1;
        }
    }
    outcome(
        good >= 48,
        format!(
            "{good}/50 recovered (worst theta err {:.2e} rad, freq err {:.2e}, r2 {:.6})",
            worst.0, worst.1, worst.2
        ),
    )
}

fn c11_desk_reproduction() -> Outcome {
    let (images, label) = common::corpus();
    let cfg = PipelineConfig::desk();
    let mut rng = seeded_rng(cfg.seed);
    let model = match train_pipeline(&images, &cfg, &mut rng, &mut |_, _| {}) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let filters = spca1_filters(&model).unwrap();
    let local = filters.iter().filter(|f| locality(f.view(), 0.9) <= 0.5).count();
    let table = gabor_table(&model).unwrap();
    let fitted = table.iter().filter(|g| g.r2 >= 0.5).count();
    let tax = TaxonomyConfig::default();
    let class_counts = |stage: Layer2Stage, units: usize| {
        let mut counts = [0usize; 3];
        for unit in 0..units {
            let map = unit_rf_map(&model, unit, stage, &table, &tax).unwrap();
            if map.bars.is_empty() {
                continue;
            }
            let class = classify_cell(&map, &tax).unwrap().class;
            counts[CellClass::ALL.iter().position(|&c| c == class).unwrap()] += 1;
        }
        counts
    };
    let ica2 = class_counts(Layer2Stage::Ica2, model.ica2.output_dim());
    let spca2 = class_counts(Layer2Stage::Spca2, model.spca2.output_dim());
    let a = local as f64 >= 0.6 * filters.len() as f64;
    let b = fitted as f64 >= 0.5 * table.len() as f64;
    let c = ica2.iter().all(|&n| n > 0);
    outcome(
        a && b && c,
        format!(
            "{label}; (a) local sPCA columns {local}/{} (b) Gabor r2>=0.5 {fitted}/{} \
             (c) ica2 uniform/nonuniform/location_only = {}/{}/{} (spca2 {}/{}/{})",
            filters.len(),
            table.len(),
            ica2[0],
            ica2[1],
            ica2[2],
            spca2[0],
            spca2[1],
            spca2[2]
        ),
    )
}

fn tiny_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::desk();
    cfg.apply_text(
        "layer1_patch = 8\nlayer2_patch = 16\nspca1_dim = 16\nica1_dim = 24\nspca2_dim = 8\nica2_dim = 12\n\
         epochs_spca1 = 100\nepochs_ica1 = 60\nepochs_spca2 = 30\nepochs_ica2 = 30\nbatch = 16\ngauss_samples = 300\n",
    )
    .unwrap();
    cfg
}

fn c12_determinism() -> Outcome {
    let images: Vec<_> = (0..3)
        .map(|k| {
            let raw = common::dead_leaves(96, 50 + k);
            let img = hvc_core::RawImage {
                width: 96,
                height: 96,
                channels: 1,
                data: raw.iter().map(|&v| v as f64).collect(),
            };
            hvc_core::imageio::preprocess(&img).unwrap()
        })
        .collect();
    let cfg = tiny_config();
    let train = |seed| train_pipeline(&images, &cfg, &mut seeded_rng(seed), &mut |_, _| {}).unwrap();
    let (m1, m2, m3) = (train(7), train(7), train(8));
    let (b1, b2, b3) = (encode_model(&m1), encode_model(&m2), encode_model(&m3));
    let same_seed = b1 == b2;
    let other_seed_differs = b1 != b3;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.hvc");
    m1.save(&path).unwrap();
    let back = hvc_core::HierarchicalModel::load(&path).unwrap();
    let round_trip = back == m1 && encode_model(&back) == b1 && std::fs::read(&path).unwrap() == b1;

    let mut broken = m1.clone();
    broken.ica1 = DictionaryModel::new(Array2::ones((cfg.spca1_dim, cfg.ica1_dim + 1)), 0.3, Penalty::LogCosh).unwrap();
    let chain = matches!(decode_model(&encode_model(&broken)), Err(Error::DimensionChain(_)));
    let swapped = {
        // swap the stored rows/cols of ica1.A in place: same byte count, broken chain
        let mut bytes = b1.clone();
        let header = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut pos = 16 + header;
        for _ in 0..2 {
            let rows = u64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(bytes[pos + 8..pos + 16].try_into().unwrap()) as usize;
            pos += 16 + 8 * rows * cols;
        }
        let (rows, cols) = (bytes[pos..pos + 8].to_vec(), bytes[pos + 8..pos + 16].to_vec());
        bytes[pos..pos + 8].copy_from_slice(&cols);
        bytes[pos + 8..pos + 16].copy_from_slice(&rows);
        matches!(decode_model(&bytes), Err(Error::DimensionChain(_)))
    };
    let truncated = decode_model(&b1[..b1.len() - 3]).is_err();
    let mut bad_version = b1.clone();
    bad_version[4] = 9;
    let version = matches!(decode_model(&bad_version), Err(Error::VersionMismatch { .. }));

    outcome(
        same_seed && other_seed_differs && round_trip && chain && swapped && truncated && version,
        format!(
            "same seed identical {same_seed}, other seed differs {other_seed_differs}, round trip {round_trip}, \
             inconsistent model rejected {chain}, corrupted file rejected {swapped}, truncation rejected {truncated}, version rejected {version}"
        ),
    )
}

fn jitter_bar(x: f64, y: f64, theta_deg: f64, w: f64, rng: &mut SeededRng) -> Bar {
    Bar {
        x0: x,
        y0: y,
        theta: theta_deg.to_radians(),
        length: 4.0,
        weight: w * rng.random_range(0.8..1.2),
        quadrant: usize::from(x >= 16.0) + 2 * usize::from(y >= 16.0),
        feature: 0,
    }
}

fn constructed_map(kind: CellClass, rng: &mut SeededRng) -> RfMap {
    let mut bars = Vec::new();
    for r in 0..4 {
        for c in 0..4 {
            let (x, y) = (c as f64 * 8.0 + 4.0, r as f64 * 8.0 + 4.0);
            match kind {
                CellClass::UniformOrientation => {
                    for _ in 0..3 {
                        bars.push(jitter_bar(x, y, 30.0, 1.0, rng));
                    }
                }
                CellClass::NonUniform => {
                    let theta = if x < 16.0 { 0.0 } else { 90.0 };
                    for _ in 0..3 {
                        bars.push(jitter_bar(x, y, theta, 1.0, rng));
                    }
                }
                CellClass::LocationOnly => {
                    let w = if (r, c) == (1, 2) { 1.0 } else { 0.02 };
                    for k in 0..8 {
                        bars.push(jitter_bar(x, y, k as f64 * 22.5, w, rng));
                    }
                }
            }
        }
    }
    RfMap {
        unit: 0,
        field: 32,
        bars,
        dropped_features: 0,
    }
}

fn c13_taxonomy() -> Outcome {
    let cfg = TaxonomyConfig::default();
    let mut right = 0;
    let mut wrong = Vec::new();
    for seed in 0..10 {
        let mut rng = seeded_rng(1300 + seed);
        for kind in CellClass::ALL {
            let got = classify_cell(&constructed_map(kind, &mut rng), &cfg).unwrap().class;
            if got == kind {
                right += 1;
            } else {
                wrong.push(format!("seed {seed}: {kind} -> {got}"));
            }
        }
    }
    outcome(
        wrong.is_empty(),
        format!("{right}/30 constructed maps classified as built {wrong:?}"),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 13] = [
        (1, "gradient oracles", Duration::from_secs(5), c1_gradients),
        (
            2,
            "correlation identity",
            Duration::from_secs(5),
            c2_correlation_identity,
        ),
        (
            3,
            "sPCA closed-form oracle",
            Duration::from_secs(30),
            c3_spca_closed_form,
        ),
        (4, "constraint saturation", Duration::from_secs(300), c4_saturation),
        (
            5,
            "sparse-coding proximal oracle",
            Duration::from_secs(1),
            c5_soft_threshold,
        ),
        (
            6,
            "dictionary recovery",
            Duration::from_secs(120),
            c6_dictionary_recovery,
        ),
        (7, "Gaussianizer normality", Duration::from_secs(5), c7_gaussianizer),
        (8, "inverse normal CDF accuracy", Duration::from_secs(1), c8_inverse_cdf),
        (9, "STC analytic oracle", Duration::from_secs(30), c9_stc),
        (10, "Gabor fit recovery", Duration::from_secs(60), c10_gabor_recovery),
        (
            11,
            "desk-scale qualitative reproduction",
            Duration::from_secs(3600),
            c11_desk_reproduction,
        ),
        (
            12,
            "determinism and persistence",
            Duration::from_secs(60),
            c12_determinism,
        ),
        (13, "taxonomy regression", Duration::from_secs(5), c13_taxonomy),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut stderr = std::io::stderr();
    let mut failed = Vec::new();
    for (id, name, limit, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = result.pass && in_time;
        if !pass {
            failed.push(id);
        }
        let _ = writeln!(
            stderr,
            "{} criterion {id:>2} {name}: {} [{:.2}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    let _ = writeln!(stderr, "acceptance: {} failed {failed:?}", failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
