//! Batch evaluation: every method at every intensity density and seed, on
//! manifest samples or on generated scenes.
//!
//! Layout under `out`:
//!
//! ```text
//! runs/<sample>/<method>[_d<density>]_s<seed>/{albedo.png, shade.png, report.json}
//! summary.json   per-run reports, failures, aggregate rows
//! table.txt      aggregate rows as an aligned table
//! ```
//!
//! Samples run in parallel (bounded by `jobs`); a failing sample or run is
//! recorded and the batch carries on. Reports hold no timings, so identical
//! configs give byte-identical JSON.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::FieldMap;
use crate::annotate::{sample_pairs, simulate_judgements, AnnotationPair, FilterThresholds};
use crate::densify::{subsample_mask, SparseIntensity};
use crate::error::{Error, Result};
use crate::eval::{balanced_subsample, evaluate, format_table, ClassCounts, EvalReport, PRF_DEFINITION};
use crate::imagecore::{GammaConfig, LinearImage};

use super::io::{load_sample, read_manifest, save_image, save_shade, write_json, Sample};
use super::methods::{run_method, Method, MethodParams};
use super::synth::{synth_scene, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Sample manifest; `None` runs on one generated scene per seed.
    pub manifest: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub densities: Vec<f64>,
    pub delta: f64,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    /// Evaluate on a class-balanced subset of the pairs.
    pub balanced: bool,
    pub gamma: GammaConfig,
    pub field_map: FieldMap,
    pub synth: SynthConfig,
    pub synth_size: usize,
    /// Poisson radius for simulated pairs on generated scenes.
    pub pair_r_frac: f64,
    pub params: MethodParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            methods: Method::ALL.to_vec(),
            densities: vec![1.0, 0.5, 0.1, 0.01],
            delta: crate::eval::DEFAULT_DELTA,
            seeds: vec![0],
            out: PathBuf::from("out"),
            jobs: 0,
            balanced: false,
            gamma: GammaConfig::default(),
            field_map: FieldMap::default(),
            synth: SynthConfig::default(),
            synth_size: 128,
            pair_r_frac: 0.03,
            params: MethodParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Invalid("no seeds given".into()));
        }
        if self.densities.is_empty() {
            return Err(Error::Invalid("no densities given".into()));
        }
        if let Some(d) = self.densities.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::Invalid(format!("density {d} outside (0, 1]")));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.pair_r_frac > 0.0 && self.pair_r_frac <= 0.5) {
            return Err(Error::Invalid(format!("pair_r_frac {} outside (0, 0.5]", self.pair_r_frac)));
        }
        if self.synth_size == 0 {
            return Err(Error::Invalid("synth_size must be >= 1".into()));
        }
        GammaConfig::new(self.gamma.gamma)?;
        self.synth.validate()?;
        self.params.solver.validate()?;
        self.params.densify.validate()?;
        Ok(())
    }
}

/// One evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sample: String,
    pub method: Method,
    /// Kept fraction of the observed intensity; `None` for methods that ignore it.
    pub density: Option<f64>,
    pub seed: u64,
    pub observed_pixels: usize,
    pub reconstruction_error: f64,
    /// `shade.png` stores `S / shade_max`.
    pub shade_max: f64,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub sample: String,
    pub method: Option<Method>,
    pub density: Option<f64>,
    pub seed: Option<u64>,
    pub error: String,
}

/// Mean over all runs of one method at one density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub density: Option<f64>,
    pub runs: usize,
    pub whdr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub delta: f64,
    pub prf_definition: String,
    pub runs: Vec<RunReport>,
    pub failures: Vec<RunFailure>,
    pub aggregate: Vec<AggregateRow>,
}

impl ExperimentSummary {
    /// Aggregate rows as evaluation reports; the method label carries the density.
    pub fn table_rows(&self) -> Vec<EvalReport> {
        self.aggregate
            .iter()
            .map(|a| EvalReport {
                method: match a.density {
                    Some(d) => format!("{}@{d}", a.method),
                    None => a.method.to_string(),
                },
                dataset: self.dataset.clone(),
                delta: self.delta,
                whdr: a.whdr,
                precision: a.precision,
                recall: a.recall,
                f_score: a.f_score,
                counts: ClassCounts::default(),
                n_pairs: a.n_pairs,
                prf_definition: self.prf_definition.clone(),
            })
            .collect()
    }

    pub fn table(&self) -> String {
        format_table(&self.table_rows())
    }
}

enum Source {
    Synthetic(u64),
    Manifest(Sample, PathBuf),
}

impl Source {
    fn id(&self) -> String {
        match self {
            Source::Synthetic(seed) => format!("synth-{seed}"),
            Source::Manifest(s, _) => s.id.clone(),
        }
    }
}

struct Prepared {
    image: LinearImage,
    lidar: SparseIntensity,
    annotations: Vec<AnnotationPair>,
}

fn prepare(src: &Source, cfg: &ExperimentConfig) -> Result<Prepared> {
    match src {
        Source::Synthetic(seed) => {
            let scene = synth_scene(*seed, cfg.synth_size, cfg.synth_size, &cfg.synth)?;
            let (points, pairs) = sample_pairs(&scene.albedo, cfg.pair_r_frac, *seed, &FilterThresholds::default())?;
            let mut annotations = simulate_judgements(&scene.albedo, &pairs, &points, cfg.delta)?;
            let id = src.id();
            annotations.iter_mut().for_each(|a| a.image_id = id.clone());
            Ok(Prepared {
                image: scene.image,
                lidar: scene.lidar,
                annotations,
            })
        }
        Source::Manifest(sample, base) => {
            let loaded = load_sample(sample, base, cfg.gamma, &cfg.field_map)?;
            let annotations = loaded
                .annotations
                .ok_or_else(|| Error::Invalid(format!("sample {:?} has no annotations", sample.id)))?;
            Ok(Prepared {
                image: loaded.image,
                lidar: loaded.lidar,
                annotations,
            })
        }
    }
}

fn run_dir(out: &Path, sample: &str, method: Method, density: Option<f64>, seed: u64) -> PathBuf {
    let name = match density {
        Some(d) => format!("{method}_d{d}_s{seed}"),
        None => format!("{method}_s{seed}"),
    };
    out.join("runs").join(sample).join(name)
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &ExperimentConfig,
    dataset: &str,
    sample: &str,
    prep: &Prepared,
    method: Method,
    density: Option<f64>,
    seed: u64,
) -> Result<RunReport> {
    let lidar = match density {
        Some(d) => subsample_mask(&prep.lidar, d, seed)?,
        None => prep.lidar.clone(),
    };
    let annotations = if cfg.balanced {
        balanced_subsample(&prep.annotations, seed)?
    } else {
        prep.annotations.clone()
    };
    let dec = run_method(method, &prep.image, &lidar, &cfg.params)?;
    let eval = evaluate(&annotations, &dec.albedo, cfg.delta, method.name(), dataset)?;

    let dir = run_dir(&cfg.out, sample, method, density, seed);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_image(&dir.join("albedo.png"), &dec.albedo, cfg.gamma)?;
    let shade_max = save_shade(&dir.join("shade.png"), &dec.shade, cfg.gamma)?;

    let report = RunReport {
        sample: sample.to_string(),
        method,
        density,
        seed,
        observed_pixels: lidar.observed_count(),
        reconstruction_error: dec.reconstruction_error(&prep.image),
        shade_max,
        eval,
    };
    write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

fn run_source(cfg: &ExperimentConfig, dataset: &str, src: &Source) -> (Vec<RunReport>, Vec<RunFailure>) {
    let sample = src.id();
    let prep = match prepare(src, cfg) {
        Ok(p) => p,
        Err(e) => {
            log::warn!("sample {sample}: {e}");
            return (
                vec![],
                vec![RunFailure {
                    sample,
                    method: None,
                    density: None,
                    seed: None,
                    error: e.to_string(),
                }],
            );
        }
    };
    let seeds: Vec<u64> = match src {
        Source::Synthetic(seed) => vec![*seed],
        Source::Manifest(..) => cfg.seeds.clone(),
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for &method in &cfg.methods {
        let densities: Vec<Option<f64>> = if method.uses_lidar() {
            cfg.densities.iter().map(|&d| Some(d)).collect()
        } else {
            vec![None]
        };
        for &density in &densities {
            for &seed in &seeds {
                match run_one(cfg, dataset, &sample, &prep, method, density, seed) {
                    Ok(r) => runs.push(r),
                    Err(e) => {
                        log::warn!("sample {sample} {method} {density:?} seed {seed}: {e}");
                        failures.push(RunFailure {
                            sample: sample.clone(),
                            method: Some(method),
                            density,
                            seed: Some(seed),
                            error: e.to_string(),
                        });
                    }
                }
            }
        }
    }
    (runs, failures)
}

fn aggregate(runs: &[RunReport], methods: &[Method], densities: &[f64]) -> Vec<AggregateRow> {
    let mut order: Vec<Method> = methods.to_vec();
    order.sort();
    order.dedup();
    let mut rows = Vec::new();
    for m in order {
        let keys: Vec<Option<f64>> = if m.uses_lidar() {
            densities.iter().map(|&d| Some(d)).collect()
        } else {
            vec![None]
        };
        for key in keys {
            let sel: Vec<&RunReport> = runs.iter().filter(|r| r.method == m && r.density == key).collect();
            if sel.is_empty() {
                continue;
            }
            let k = sel.len() as f64;
            let mean = |f: fn(&EvalReport) -> f64| sel.iter().map(|r| f(&r.eval)).sum::<f64>() / k;
            rows.push(AggregateRow {
                method: m,
                density: key,
                runs: sel.len(),
                whdr: mean(|e| e.whdr),
                precision: mean(|e| e.precision),
                recall: mean(|e| e.recall),
                f_score: mean(|e| e.f_score),
                n_pairs: sel.iter().map(|r| r.eval.n_pairs).sum(),
            });
        }
    }
    rows
}

/// Runs the whole batch and writes `summary.json` and `table.txt` under `cfg.out`.
/// Per-sample failures end up in [`ExperimentSummary::failures`]; only
/// configuration problems and unreadable manifests return `Err`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let (sources, dataset) = match &cfg.manifest {
        Some(path) => {
            let samples = read_manifest(path)?;
            let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "manifest".into());
            let sources: Vec<Source> = samples.into_iter().map(|s| Source::Manifest(s, base.clone())).collect();
            (sources, name)
        }
        None => (cfg.seeds.iter().map(|&s| Source::Synthetic(s)).collect(), "synthetic".to_string()),
    };
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<(Vec<RunReport>, Vec<RunFailure>)> =
        pool.install(|| sources.par_iter().map(|s| run_source(cfg, &dataset, s)).collect());

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in results {
        runs.extend(r);
        failures.extend(f);
    }
    let summary = ExperimentSummary {
        aggregate: aggregate(&runs, &cfg.methods, &cfg.densities),
        dataset,
        delta: cfg.delta,
        prf_definition: PRF_DEFINITION.to_string(),
        runs,
        failures,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    let table = summary.table();
    std::fs::write(cfg.out.join("table.txt"), &table).map_err(|e| Error::io(cfg.out.join("table.txt"), e))?;
    Ok(summary)
}
