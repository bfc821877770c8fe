//! Dataset I/O, synthetic scenes and experiment orchestration.

pub mod config;
pub mod experiment;
pub mod io;
pub mod methods;
pub mod synth;

pub use config::FlatConfig;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary, RunReport};
pub use io::{load_sample, read_manifest, LoadedSample, Sample};
pub use methods::{run_method, Method, MethodParams};
pub use synth::{content_hash, shadow_albedo_step, synth_scene, HalfPlane, SynthConfig, SynthScene};
