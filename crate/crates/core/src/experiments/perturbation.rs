//! Persistent edge noise: the general block at several dead zones, plus an
//! optional plain-block baseline, compared against the ultimate bounds.

use std::path::Path;

use serde::Serialize;

use super::{csv_writer, initial_estimates, mean_of, opt, par_trials, source_graph, trial_seed, write_json, ExperimentConfig, Outcome, PERTURBATION_STREAM};
use crate::engine::{run as run_engine, RaisingConfig, RunOptions};
use crate::error::Result;
use crate::functions::AbfSum;
use crate::metrics::{time_below, write_envelope_csv, Envelope, EnvelopeAccumulator, ErrorTracker};
use crate::oracle::ultimate_bound;
use crate::perturb::PerturbationModel;
use crate::rng;

/// Absolute slack added to the ultimate bound when checking it.
pub const BOUND_SLACK: f64 = 1e-9;

/// Trials processed per parallel batch; bounds memory for long horizons.
const BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationVariant {
    pub label: String,
    /// `None` for the plain-block baseline.
    pub deadzone_k: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRun {
    pub variant: usize,
    pub trial: usize,
    pub seed: u64,
    pub e_min: f64,
    pub eps: f64,
    pub diameter: usize,
    pub shrunk_diameter: usize,
    pub deadzone: f64,
    pub min_deadzone: f64,
    pub bound_plus: f64,
    pub bound_minus: f64,
    pub combined: f64,
    /// Round after which the combined bound is guaranteed (if the dead
    /// zone is large enough).
    pub time_bound: u64,
    /// First round after which Δ⁺ stays below `bound_plus`.
    pub time_below_plus: Option<usize>,
    pub time_below_minus: Option<usize>,
    pub time_below_joint: Option<usize>,
    /// Smallest Δ⁺ / Δ⁻ over the second half of the horizon.
    pub floor_plus: f64,
    pub floor_minus: f64,
    /// Largest `max_i |x̂_i − x_i|` from `time_bound` on.
    pub worst_after_time_bound: Option<f64>,
    /// Δ⁺ exceeds `bound_plus` at some round after `time_bound`.
    pub plus_exceeds_after_time_bound: bool,
    /// The ultimate bound applies (dead zone large enough, or plain block).
    pub guaranteed: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationSummary {
    pub variant: PerturbationVariant,
    pub mean_eps: f64,
    pub mean_e_min: f64,
    pub mean_diameter: f64,
    pub mean_shrunk_diameter: f64,
    pub mean_time_below_plus: Option<f64>,
    pub mean_time_below_minus: Option<f64>,
    pub mean_time_below_joint: Option<f64>,
    pub never_below_plus: usize,
    pub mean_floor_plus: f64,
    pub mean_floor_minus: f64,
    pub plus_exceeds_after_time_bound: usize,
    pub bound_violations: usize,
}

#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub summaries: Vec<PerturbationSummary>,
    pub runs: Vec<PerturbationRun>,
    pub envelopes: Vec<(Envelope, Envelope)>,
}

pub fn variants(cfg: &ExperimentConfig) -> Result<Vec<PerturbationVariant>> {
    let mut out = Vec::new();
    if cfg.sweep.as_ref().is_some_and(|s| s.baseline) {
        out.push(PerturbationVariant { label: "plain".into(), deadzone_k: None });
    }
    for k in cfg.sweep_list("deadzone_k")? {
        out.push(PerturbationVariant { label: format!("D={k}K"), deadzone_k: Some(k) });
    }
    Ok(out)
}

fn min_over_second_half(values: &[f64]) -> f64 {
    values[values.len() / 2..].iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn run(cfg: &ExperimentConfig) -> Result<PerturbationReport> {
    let variants = variants(cfg)?;
    let section = cfg.perturbation()?;
    let threshold = cfg.raising_value("threshold")?;
    let step = cfg.raising_value("step")?;
    let (low, high) = cfg.initial_range()?;
    let rounds = cfg.max_rounds as usize + 1;

    let mut runs = Vec::new();
    let mut acc: Vec<(EnvelopeAccumulator, EnvelopeAccumulator)> =
        variants.iter().map(|_| (EnvelopeAccumulator::new(rounds), EnvelopeAccumulator::new(rounds))).collect();

    for start in (0..cfg.trials).step_by(BATCH) {
        let count = BATCH.min(cfg.trials - start);
        let batch = par_trials(count, |offset| {
            let trial = start + offset;
            let seed = trial_seed(cfg, trial);
            let g = source_graph(cfg, seed)?;
            let f = AbfSum::for_graph(&g)?;
            let eps = section.resolve_eps(g.e_min());
            let ub = ultimate_bound(&g, &f, eps)?;
            let model = PerturbationModel::new(section.kind, eps, rng::hash_words(&[section.seed, seed, PERTURBATION_STREAM]))?;
            let view = model.edge_view(&g)?;
            // Perturbed weights never drop below e_min − ε.
            let sigma = g.e_min() - model.bound();
            let initial = initial_estimates(g.node_count(), low, high, seed);
            // With L1 = L2 = 1 the minimum dead zone is K = (D(G) + D(G⁻) − 2)·ε.
            let k = ub.min_deadzone;

            let mut out = Vec::with_capacity(variants.len());
            for (vi, v) in variants.iter().enumerate() {
                let (raising, deadzone) = match v.deadzone_k {
                    None => (RaisingConfig::plain(), f64::INFINITY),
                    Some(mult) => (RaisingConfig::new(threshold, step, mult * k)?, mult * k),
                };
                let guaranteed = v.deadzone_k.is_none() || deadzone >= ub.min_deadzone;
                let time_bound = ub.time_bound(&g, &raising, sigma, &initial).total();
                let mut tracker = ErrorTracker::new(&ub.nominal.x);
                run_engine(&g, &f, &raising, &initial, RunOptions::new(cfg.max_rounds), &view, &mut tracker)?;
                let s = tracker.series;
                let after = (time_bound as usize).min(s.len());
                let worst = s.max_abs[after..].iter().copied().reduce(f64::max);
                let plus_exceeds = s.delta_plus[after..].iter().any(|&d| d > ub.bound_plus + BOUND_SLACK);
                let bound_ok = !guaranteed || worst.is_none_or(|w| w <= ub.combined + BOUND_SLACK);
                let record = PerturbationRun {
                    variant: vi,
                    trial,
                    seed,
                    e_min: g.e_min(),
                    eps,
                    diameter: ub.nominal.effective_diameter,
                    shrunk_diameter: ub.shrunk.effective_diameter,
                    deadzone,
                    min_deadzone: ub.min_deadzone,
                    bound_plus: ub.bound_plus,
                    bound_minus: ub.bound_minus,
                    combined: ub.combined,
                    time_bound,
                    time_below_plus: time_below(&s.delta_plus, ub.bound_plus, true),
                    time_below_minus: time_below(&s.delta_minus, ub.bound_minus, true),
                    time_below_joint: time_below(&s.max_abs, ub.combined, true),
                    floor_plus: min_over_second_half(&s.delta_plus),
                    floor_minus: min_over_second_half(&s.delta_minus),
                    worst_after_time_bound: worst,
                    plus_exceeds_after_time_bound: plus_exceeds,
                    guaranteed,
                    bound_ok,
                };
                out.push((record, s.delta_plus, s.delta_minus));
            }
            Ok(out)
        })?;
        for trial in batch {
            for (record, p, m) in trial {
                acc[record.variant].0.add(&p);
                acc[record.variant].1.add(&m);
                runs.push(record);
            }
        }
    }
    runs.sort_by_key(|r| (r.variant, r.trial));

    let summaries = variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let rs: Vec<&PerturbationRun> = runs.iter().filter(|r| r.variant == vi).collect();
            let n = rs.len() as f64;
            let mean = |get: &dyn Fn(&PerturbationRun) -> f64| rs.iter().map(|r| get(r)).sum::<f64>() / n;
            PerturbationSummary {
                variant: v.clone(),
                mean_eps: mean(&|r| r.eps),
                mean_e_min: mean(&|r| r.e_min),
                mean_diameter: mean(&|r| r.diameter as f64),
                mean_shrunk_diameter: mean(&|r| r.shrunk_diameter as f64),
                mean_time_below_plus: mean_of(rs.iter().map(|r| r.time_below_plus.map(|t| t as f64))),
                mean_time_below_minus: mean_of(rs.iter().map(|r| r.time_below_minus.map(|t| t as f64))),
                mean_time_below_joint: mean_of(rs.iter().map(|r| r.time_below_joint.map(|t| t as f64))),
                never_below_plus: rs.iter().filter(|r| r.time_below_plus.is_none()).count(),
                mean_floor_plus: mean(&|r| r.floor_plus),
                mean_floor_minus: mean(&|r| r.floor_minus),
                plus_exceeds_after_time_bound: rs.iter().filter(|r| r.plus_exceeds_after_time_bound).count(),
                bound_violations: rs.iter().filter(|r| !r.bound_ok).count(),
            }
        })
        .collect();
    let envelopes = acc.into_iter().map(|(p, m)| (p.finish(), m.finish())).collect();
    Ok(PerturbationReport { summaries, runs, envelopes })
}

impl PerturbationReport {
    pub fn failures(&self) -> Vec<String> {
        self.runs
            .iter()
            .filter(|r| !r.bound_ok)
            .map(|r| {
                format!(
                    "{} trial {} (seed {}): error {} after round {} exceeds the ultimate bound {}",
                    self.summaries[r.variant].variant.label,
                    r.trial,
                    r.seed,
                    opt(r.worst_after_time_bound),
                    r.time_bound,
                    r.combined
                )
            })
            .collect()
    }

    pub fn write(&self, out: &Path) -> Result<Outcome> {
        let mut files = Vec::new();
        let mut w = csv_writer(&out.join("runs.csv"))?;
        w.write_record([
            "variant", "label", "trial", "seed", "e_min", "eps", "diameter", "shrunk_diameter", "deadzone",
            "min_deadzone", "bound_plus", "bound_minus", "combined", "time_bound", "time_below_plus",
            "time_below_minus", "time_below_joint", "floor_plus", "floor_minus", "worst_after_time_bound",
            "plus_exceeds_after_time_bound", "guaranteed", "bound_ok",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.variant.to_string(),
                self.summaries[r.variant].variant.label.clone(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.e_min.to_string(),
                r.eps.to_string(),
                r.diameter.to_string(),
                r.shrunk_diameter.to_string(),
                r.deadzone.to_string(),
                r.min_deadzone.to_string(),
                r.bound_plus.to_string(),
                r.bound_minus.to_string(),
                r.combined.to_string(),
                r.time_bound.to_string(),
                opt(r.time_below_plus),
                opt(r.time_below_minus),
                opt(r.time_below_joint),
                r.floor_plus.to_string(),
                r.floor_minus.to_string(),
                opt(r.worst_after_time_bound),
                u8::from(r.plus_exceeds_after_time_bound).to_string(),
                u8::from(r.guaranteed).to_string(),
                u8::from(r.bound_ok).to_string(),
            ])?;
        }
        w.flush()?;
        files.push("runs.csv".to_string());
        for (vi, (p, m)) in self.envelopes.iter().enumerate() {
            let name = format!("envelope_{vi}.csv");
            write_envelope_csv(std::io::BufWriter::new(std::fs::File::create(out.join(&name))?), p, m)?;
            files.push(name);
        }
        let failures = self.failures();
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'static str,
            variants: &'a [PerturbationSummary],
            envelope_files: Vec<String>,
            bound_violations: usize,
        }
        write_json(
            &out.join("summary.json"),
            &Summary {
                scenario: "perturbation",
                variants: &self.summaries,
                envelope_files: (0..self.envelopes.len()).map(|i| format!("envelope_{i}.csv")).collect(),
                bound_violations: failures.len(),
            },
        )?;
        files.push("summary.json".to_string());
        Ok(Outcome { files, failures })
    }
}
