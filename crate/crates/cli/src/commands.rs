use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hvc_core::analysis::{
    class_counts, classify_cell, gabor_table, pixel_space_features, render_filters, render_rf_map, spca1_filters,
    unit_rf_map, weighted_covariance, white_noise, CellClass, GaborParams, Layer2Stage, TaxonomyConfig,
};
use hvc_core::hierarchy::{train_pipeline, Preset, MODEL_MAGIC};
use hvc_core::imageio::{load_image, preprocess as preprocess_image, read_raster, write_raster};
use hvc_core::{seeded_rng, Error, HierarchicalModel, PipelineConfig, Result, Stage};
use ndarray::Array2;

use crate::{AnalyzeArgs, Filters, PresetArg, RenderArgs, StageArg, TrainArgs, What};

fn files_with_ext(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn no_inputs(dir: &Path, what: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("no {what} files in {}", dir.display()),
    ))
}

pub fn preprocess(data: &Path, out: &Path) -> Result<()> {
    let inputs = files_with_ext(data, &["pgm", "ppm"])?;
    if inputs.is_empty() {
        return Err(no_inputs(data, "PGM/PPM"));
    }
    fs::create_dir_all(out)?;
    for path in inputs {
        let img = preprocess_image(&load_image(&path)?).map_err(|e| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        write_raster(out.join(format!("{stem}.hvcr")), &img)?;
        println!(
            "{stem}: {}x{} mean={:.3e} var={:.6}",
            img.width,
            img.height,
            img.mean(),
            img.variance()
        );
    }
    Ok(())
}

fn log_header(cfg: &PipelineConfig, preset: &str, images: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# preset = {preset}");
    let _ = writeln!(s, "# images = {images}");
    for (k, v) in cfg.entries() {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let (preset, name) = match args.preset {
        PresetArg::Desk => (Preset::Desk, "desk"),
        PresetArg::Paper => (Preset::Paper, "paper"),
    };
    let mut cfg = PipelineConfig::preset(preset);
    if let Some(path) = &args.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    cfg.seed = args.seed;
    cfg.validate()?;

    let rasters = files_with_ext(&args.data, &["hvcr"])?;
    if rasters.is_empty() {
        return Err(no_inputs(&args.data, "HVCR (run `hvc preprocess` first)"));
    }
    let images = rasters.iter().map(read_raster).collect::<Result<Vec<_>>>()?;

    fs::create_dir_all(&args.out)?;
    let header = log_header(&cfg, name, images.len());
    eprint!("{header}");
    let mut log = header.clone();
    if args.dry_run {
        fs::write(args.out.join("train.log"), log)?;
        return Ok(());
    }

    let mut curves: Vec<String> = Stage::ALL
        .iter()
        .map(|_| String::from("epoch,objective,max_second_moment\n"))
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let start = Instant::now();
    let mut current = None;
    let model = train_pipeline(&images, &cfg, &mut rng, &mut |stage, s| {
        let i = Stage::ALL.iter().position(|&x| x == stage).expect("known stage");
        let _ = writeln!(curves[i], "{},{},{}", s.epoch, s.objective, s.max_second_moment);
        if current != Some(stage) {
            current = Some(stage);
            eprintln!("stage {stage} started at {:.1}s", start.elapsed().as_secs_f64());
        }
    });
    let model = match model {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(log, "failed: {e}");
            fs::write(args.out.join("train.log"), log)?;
            return Err(e);
        }
    };
    for (stage, curve) in Stage::ALL.iter().zip(&curves) {
        fs::write(args.out.join(format!("curve_{stage}.csv")), curve)?;
        let last = curve.lines().last().unwrap_or("");
        let _ = writeln!(log, "{stage}: final epoch,objective,max_second_moment = {last}");
    }
    model.save(args.out.join("model.hvc"))?;
    let _ = writeln!(log, "model = model.hvc");
    fs::write(args.out.join("train.log"), log)?;
    eprintln!("done in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn layer2(stage: StageArg) -> Layer2Stage {
    match stage {
        StageArg::Spca2 => Layer2Stage::Spca2,
        StageArg::Ica2 => Layer2Stage::Ica2,
    }
}

fn unit_count(model: &HierarchicalModel, stage: Layer2Stage) -> usize {
    match stage {
        Layer2Stage::Spca2 => model.spca2.output_dim(),
        Layer2Stage::Ica2 => model.ica2.output_dim(),
    }
}

fn selected_units(model: &HierarchicalModel, stage: Layer2Stage, unit: Option<usize>) -> Result<Vec<usize>> {
    let n = unit_count(model, stage);
    match unit {
        Some(u) if u >= n => Err(Error::InvalidArgument(format!("{stage} unit {u} out of range 0..{n}"))),
        Some(u) => Ok(vec![u]),
        None => Ok((0..n).collect()),
    }
}

fn gabor_csv(table: &[GaborParams]) -> String {
    let mut s = String::from("unit,x0,y0,theta,freq,phase,sigma_par,sigma_perp,amplitude,r2\n");
    for (i, g) in table.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{}",
            g.x0, g.y0, g.theta, g.freq, g.phase, g.sigma_par, g.sigma_perp, g.amplitude, g.r2
        );
    }
    s
}

fn taxonomy_report(model: &HierarchicalModel, stage: Layer2Stage, table: &[GaborParams]) -> Result<String> {
    let cfg = TaxonomyConfig::default();
    let mut lines = String::new();
    let mut classes = Vec::new();
    for unit in 0..unit_count(model, stage) {
        let map = unit_rf_map(model, unit, stage, table, &cfg)?;
        if map.bars.is_empty() {
            let _ = writeln!(lines, "{unit} unclassified no_fitted_features");
            continue;
        }
        let c = classify_cell(&map, &cfg)?;
        let oriented = c.location_orientations.len();
        let dispersion = c.dispersion_deg.map_or("none".to_string(), |d| format!("{d:.2}"));
        let _ = writeln!(
            lines,
            "{unit} {} active={} oriented={oriented} dispersion_deg={dispersion}",
            c.class,
            c.active_locations()
        );
        classes.push(c.class);
    }
    let counts = class_counts(&classes);
    let total = classes.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(s, "# stage = {stage}");
    let _ = writeln!(s, "# units = {}", unit_count(model, stage));
    let _ = writeln!(s, "# classified = {}", classes.len());
    for (class, n) in CellClass::ALL.iter().zip(counts) {
        let _ = writeln!(
            s,
            "# fraction {class} = {:.4} ({n}/{})",
            n as f64 / total,
            classes.len()
        );
    }
    s.push_str(&lines);
    Ok(s)
}

/// STC of layer-2 units under white noise over the full layer-2 patch.
fn stc_outputs(model: &HierarchicalModel, stage: Layer2Stage, units: &[usize], args: &AnalyzeArgs) -> Result<()> {
    let side = model.config.layer2_patch;
    let dim = side * side;
    if args.samples < dim {
        return Err(Error::InvalidArgument(format!("--samples must be at least {dim}")));
    }
    let stimuli = white_noise(args.samples, dim, &mut seeded_rng(args.seed));
    let responses = match stage {
        Layer2Stage::Spca2 => model.spca2_codes_batch(stimuli.view())?,
        Layer2Stage::Ica2 => model.forward_batch(stimuli.view())?,
    };
    let mut csv = String::from("unit,rank,eigval\n");
    for &u in units {
        let stc = weighted_covariance(stimuli.view(), responses.column(u))?;
        for (k, v) in stc.eigvals.iter().enumerate() {
            let _ = writeln!(csv, "{u},{k},{v}");
        }
        let picks = [0, 1, 2, 3, dim - 4, dim - 3, dim - 2, dim - 1];
        let images: Vec<Array2<f64>> = picks
            .iter()
            .map(|&k| {
                let v = stc.eigvecs.column(k);
                Array2::from_shape_fn((side, side), |(r, c)| v[r * side + c])
            })
            .collect();
        render_filters(&images, args.out.join(format!("stc_{stage}_{u:03}.pgm")))?;
    }
    fs::write(args.out.join(format!("stc_{stage}.csv")), csv)?;
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let model = HierarchicalModel::load(&args.model)?;
    let stage = layer2(args.stage.unwrap_or(match args.what {
        What::Classify => StageArg::Ica2,
        _ => StageArg::Spca2,
    }));
    let units = selected_units(&model, stage, args.unit)?;
    fs::create_dir_all(&args.out)?;
    match args.what {
        What::Gabor => {
            let table = gabor_table(&model)?;
            fs::write(args.out.join("gabor.csv"), gabor_csv(&table))?;
            let good = table
                .iter()
                .filter(|g| g.r2 >= TaxonomyConfig::default().min_fit_r2)
                .count();
            println!("{good}/{} layer-1 features fitted with r2 >= 0.5", table.len());
        }
        What::Stc => stc_outputs(&model, stage, &units, args)?,
        What::Rfmap => {
            let table = gabor_table(&model)?;
            let cfg = TaxonomyConfig::default();
            for u in units {
                let map = unit_rf_map(&model, u, stage, &table, &cfg)?;
                render_rf_map(&map, args.out.join(format!("rfmap_{stage}_{u:03}.svg")))?;
            }
        }
        What::Classify => {
            let table = gabor_table(&model)?;
            let report = taxonomy_report(&model, stage, &table)?;
            fs::write(args.out.join(format!("taxonomy_{stage}.txt")), &report)?;
            for line in report.lines().filter(|l| l.starts_with('#')) {
                println!("{line}");
            }
        }
    }
    Ok(())
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let model = HierarchicalModel::load(&args.model)?;
    let (filters, name) = match args.what {
        Filters::Spca1 => (spca1_filters(&model)?, "spca1"),
        Filters::Ica1 => (pixel_space_features(&model)?, "ica1"),
    };
    fs::create_dir_all(&args.out)?;
    render_filters(&filters, args.out.join(format!("{name}.pgm")))
}

pub fn info(path: &Path) -> Result<()> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MODEL_MAGIC) {
        let model = hvc_core::hierarchy::decode_model(&bytes)?;
        println!("model {}", path.display());
        let dims = [
            ("spca1", model.spca1.input_dim(), model.spca1.output_dim()),
            ("ica1", model.ica1.input_dim(), model.ica1.output_dim()),
            ("spca2", model.spca2.input_dim(), model.spca2.output_dim()),
            ("ica2", model.ica2.input_dim(), model.ica2.output_dim()),
        ];
        for (name, i, o) in dims {
            println!("{name}: {i} -> {o}");
        }
        println!("gaussianizer samples: {} / {}", model.gauss1.n(), model.gauss2.n());
        print!("{}", model.config.to_text());
    } else {
        let img = hvc_core::imageio::decode_raster(&bytes)?;
        println!(
            "raster {}: {}x{} mean={:.3e} var={:.6}",
            path.display(),
            img.width,
            img.height,
            img.mean(),
            img.variance()
        );
    }
    Ok(())
}
