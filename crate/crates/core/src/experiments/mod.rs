//! Declarative studies driven by TOML configs.
//!
//! Every scenario runs its trials in parallel, collects results in trial
//! order and writes CSV files plus a `summary.json` into the output
//! directory. Identical configs produce byte-identical outputs.
//!
//! Each unperturbed run is checked against the convergence-time bound and
//! each perturbed run with a large enough dead zone against the ultimate
//! bound; violations are reported as failures.

pub mod config;
pub mod hazard;
pub mod oracle_check;
pub mod perturbation;
pub mod sweep;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentConfig, Scenario};

use crate::error::Result;
use crate::graph::{generate_geometric, Graph};
use crate::rng;

/// Stream tags keeping per-trial random streams apart.
const INITIAL_STREAM: u64 = 1;
const PERTURBATION_STREAM: u64 = 2;
const DOSE_STREAM: u64 = 3;

/// Seed of trial `index`.
pub fn trial_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    cfg.base_seed.wrapping_add(index as u64)
}

/// `n` initial estimates, uniform in `[low, high)`.
pub fn initial_estimates(n: usize, low: f64, high: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng::hash_words(&[seed, INITIAL_STREAM]));
    (0..n).map(|_| low + (high - low) * rng.random::<f64>()).collect()
}

/// Geometric graph for a trial with node 0 as the only source (`s = 0`).
pub fn source_graph(cfg: &ExperimentConfig, seed: u64) -> Result<Graph> {
    generate_geometric(&cfg.geometry()?.with_seed(seed), &[(0, 0.0)])
}

/// Runs `job` for every trial index in parallel; results keep index order.
pub(crate) fn par_trials<T, F>(count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(job).collect()
}

/// Outcome of a scenario: what it wrote and which checks failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the scenario named in `cfg` and writes its outputs to `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    match cfg.scenario {
        Scenario::SweepDelta | Scenario::SweepM | Scenario::SweepDeadzone => sweep::run(cfg)?.write(out),
        Scenario::Perturbation => perturbation::run(cfg)?.write(out),
        Scenario::Hazard => hazard::run(cfg)?.write(out),
        Scenario::OracleCheck => oracle_check::run(cfg)?.write(out),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value).map_err(std::io::Error::from)?;
    Ok(())
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

pub(crate) fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Mean of the present values, `None` if there are none.
pub(crate) fn mean_of<I: IntoIterator<Item = Option<f64>>>(values: I) -> Option<f64> {
    let (sum, count) = values.into_iter().flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}
