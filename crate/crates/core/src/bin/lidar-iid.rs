//! Command-line front end. Every subcommand prints one JSON object on success.
//! Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use lidar_iid::annotate::{read_annotations, sample_pairs, simulate_judgements, write_annotations, FilterThresholds};
use lidar_iid::densify::{densify, SparseIntensity};
use lidar_iid::eval::{balanced_subsample, evaluate, format_table, EvalReport};
use lidar_iid::imagecore::LinearImage;
use lidar_iid::pipeline::io::{
    load_image, load_lidar_png, load_linear, read_lidar_csv, save_image, save_scene, save_shade, write_gray16,
    write_json,
};
use lidar_iid::pipeline::{
    content_hash, run_experiment, run_method, synth_scene, ExperimentConfig, ExperimentSummary, FlatConfig, Method,
};
use lidar_iid::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "lidar-iid", version, about = "Intrinsic image decomposition guided by sparse LiDAR intensity")]
struct Cli {
    /// RNG seed (overrides `seeds` in the config for `run`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` file; keys are the experiment config fields, e.g. `params.solver.max_inner`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene with ground truth.
    Synth {
        #[arg(long, default_value_t = 128)]
        size: usize,
    },
    /// Complete sparse intensity into a dense map.
    Densify {
        #[command(flatten)]
        input: Input,
    },
    /// Split an image into albedo and shade.
    Decompose {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "ours")]
        method: Method,
    },
    /// Sample point pairs; with `--albedo`, label them from ground truth.
    Annotate {
        #[arg(long)]
        image: PathBuf,
        /// Linear ground-truth albedo PNG (as written by `synth`).
        #[arg(long)]
        albedo: Option<PathBuf>,
        #[arg(long, default_value_t = 0.07)]
        r_frac: f64,
    },
    /// Score a predicted albedo against a pair file.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        ann: PathBuf,
        #[arg(long)]
        delta: Option<f64>,
        /// Score a class-balanced subset (uses --seed).
        #[arg(long)]
        balanced: bool,
        #[arg(long, default_value = "pred")]
        method: String,
    },
    /// Tabulate report files (a run's summary.json or evaluate outputs).
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run a batch experiment.
    Run {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug)]
struct Input {
    /// Display-encoded PNG (8 or 16 bit).
    #[arg(long)]
    image: PathBuf,
    /// `u,v,intensity` CSV or 16-bit PNG.
    #[arg(long)]
    lidar: PathBuf,
    /// 8-bit mask PNG, needed with a PNG `--lidar`.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// CSV intensities are divided by this.
    #[arg(long, default_value_t = 1.0)]
    divisor: f64,
}

fn base_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => FlatConfig::read(p)?.apply(&ExperimentConfig::default()),
        None => Ok(ExperimentConfig::default()),
    }
}

fn out_dir(cli_out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = cli_out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn load_input(input: &Input, cfg: &ExperimentConfig) -> Result<(LinearImage, SparseIntensity)> {
    let image = load_image(&input.image, cfg.gamma)?;
    let is_csv = input.lidar.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let lidar = if is_csv {
        read_lidar_csv(&input.lidar, image.dims(), input.divisor)?
    } else {
        let mask = input
            .mask
            .as_ref()
            .ok_or_else(|| Error::Invalid("a PNG --lidar needs --mask".into()))?;
        load_lidar_png(&input.lidar, mask)?
    };
    if lidar.dims() != image.dims() {
        return Err(Error::ShapeMismatch {
            expected: image.dims(),
            found: lidar.dims(),
        });
    }
    Ok((image, lidar))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn run(cli: Cli) -> Result<(Value, bool)> {
    let mut cfg = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { size } => {
            let seed = cli.seed.unwrap_or(0);
            let dir = out_dir(&cli.out)?;
            let scene = synth_scene(seed, size, size, &cfg.synth)?;
            save_scene(&dir, &scene, &cfg.synth, cfg.gamma)?;
            Ok((
                json!({
                    "command": "synth",
                    "out": path_str(&dir),
                    "seed": seed,
                    "width": size,
                    "height": size,
                    "observed_pixels": scene.lidar.observed_count(),
                    "shadow": scene.shadow,
                    "content_hash": content_hash(&scene),
                    "manifest": path_str(&dir.join("manifest.json")),
                }),
                true,
            ))
        }
        Command::Densify { input } => {
            let (image, lidar) = load_input(&input, &cfg)?;
            let dense = densify(&image, &lidar, &cfg.params.densify)?;
            let dir = out_dir(&cli.out)?;
            let path = dir.join("dense.png");
            write_gray16(&path, &dense.intensity)?;
            Ok((
                json!({
                    "command": "densify",
                    "out": path_str(&path),
                    "observed_pixels": lidar.observed_count(),
                    "iterations": dense.iterations,
                    "relative_residual": dense.relative_residual,
                }),
                true,
            ))
        }
        Command::Decompose { input, method } => {
            let (image, lidar) = load_input(&input, &cfg)?;
            let dec = run_method(method, &image, &lidar, &cfg.params)?;
            let dir = out_dir(&cli.out)?;
            save_image(&dir.join("albedo.png"), &dec.albedo, cfg.gamma)?;
            let shade_max = save_shade(&dir.join("shade.png"), &dec.shade, cfg.gamma)?;
            let metrics = json!({
                "command": "decompose",
                "method": method,
                "out": path_str(&dir),
                "reconstruction_error": dec.reconstruction_error(&image),
                "shade_max": shade_max,
                "scale_bias": dec.scale_bias,
            });
            write_json(&dir.join("metrics.json"), &metrics)?;
            Ok((metrics, true))
        }
        Command::Annotate { image, albedo, r_frac } => {
            let seed = cli.seed.unwrap_or(0);
            let img = load_image(&image, cfg.gamma)?;
            let (points, pairs) = sample_pairs(&img, r_frac, seed, &FilterThresholds::default())?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("pairs.jsonl"));
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            let labelled = match albedo {
                Some(a) => {
                    let truth = load_linear(&a)?;
                    let mut ann = simulate_judgements(&truth, &pairs, &points, cfg.delta)?;
                    let id = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    ann.iter_mut().for_each(|p| p.image_id = id.clone());
                    write_annotations(&out, &ann)?;
                    true
                }
                None => {
                    let (w, h) = img.dims();
                    let px: Vec<[usize; 2]> = points.iter().map(|p| p.pixel(w, h)).collect();
                    write_json(&out, &json!({ "points": px, "pairs": pairs }))?;
                    false
                }
            };
            Ok((
                json!({
                    "command": "annotate",
                    "out": path_str(&out),
                    "points": points.len(),
                    "pairs": pairs.len(),
                    "labelled": labelled,
                }),
                true,
            ))
        }
        Command::Evaluate {
            pred,
            ann,
            delta,
            balanced,
            method,
        } => {
            let delta = delta.unwrap_or(cfg.delta);
            let r = load_image(&pred, cfg.gamma)?;
            let mut pairs = read_annotations(&ann, Some(r.dims()), &cfg.field_map)?;
            if balanced {
                pairs = balanced_subsample(&pairs, cli.seed.unwrap_or(0))?;
            }
            let dataset = ann.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let report = evaluate(&pairs, &r, delta, &method, &dataset)?;
            if let Some(out) = &cli.out {
                write_json(out, &report)?;
            }
            Ok((serde_json::to_value(&report)?, true))
        }
        Command::Report { reports } => {
            let mut rows: Vec<EvalReport> = Vec::new();
            for path in &reports {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                if let Ok(summary) = serde_json::from_str::<ExperimentSummary>(&text) {
                    rows.extend(summary.table_rows());
                } else {
                    rows.push(serde_json::from_str::<EvalReport>(&text)?);
                }
            }
            let table = format_table(&rows);
            if let Some(out) = &cli.out {
                std::fs::write(out, &table).map_err(|e| Error::Io {
                    path: out.clone(),
                    source: e,
                })?;
            }
            Ok((json!({ "command": "report", "rows": rows, "table": table }), true))
        }
        Command::Run {
            manifest,
            jobs,
            methods,
            densities,
        } => {
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if let Some(m) = methods {
                cfg.methods = m;
            }
            if let Some(d) = densities {
                cfg.densities = d;
            }
            if let Some(s) = cli.seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = cli.out {
                cfg.out = o;
            }
            let summary = run_experiment(&cfg)?;
            let ok = summary.failures.is_empty();
            Ok((
                json!({
                    "command": "run",
                    "out": path_str(&cfg.out),
                    "runs": summary.runs.len(),
                    "failures": summary.failures,
                    "aggregate": summary.aggregate,
                }),
                ok,
            ))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok((summary, ok)) => {
            println!("{summary}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
