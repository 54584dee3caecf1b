//! Unperturbed parameter sweeps: δ (sweep-delta), M with δ = M (sweep-m)
//! and the dead zone D as a multiple of K (sweep-deadzone).

use std::path::Path;

use serde::Serialize;

use super::{csv_writer, initial_estimates, mean_of, opt, par_trials, source_graph, trial_seed, write_json, ExperimentConfig, Outcome, Scenario};
use crate::engine::{run as run_engine, RaisingConfig, RunOptions, Unperturbed};
use crate::error::Result;
use crate::functions::{AbfSum, SpreadingFunction};
use crate::metrics::{settle_round, write_envelope_csv, Envelope, ErrorTracker, DEFAULT_TOL};
use crate::oracle::{convergence_time_bound, stationary};

/// One parameter setting of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepVariant {
    pub label: String,
    pub threshold: f64,
    pub step: f64,
    /// Fixed dead zone, or `None` when it is `deadzone_k · K` per trial.
    pub deadzone: Option<f64>,
    pub deadzone_k: Option<f64>,
}

pub fn variants(cfg: &ExperimentConfig) -> Result<Vec<SweepVariant>> {
    Ok(match cfg.scenario {
        Scenario::SweepDelta => {
            let m = cfg.raising_value("threshold")?;
            let d = cfg.raising_value("deadzone")?;
            cfg.sweep_list("step")?
                .into_iter()
                .map(|step| SweepVariant {
                    label: format!("delta={step}"),
                    threshold: m,
                    step,
                    deadzone: Some(d),
                    deadzone_k: None,
                })
                .collect()
        }
        Scenario::SweepM => {
            let d = cfg.raising_value("deadzone")?;
            cfg.sweep_list("threshold")?
                .into_iter()
                .map(|m| SweepVariant {
                    label: format!("M={m}"),
                    threshold: m,
                    step: m,
                    deadzone: Some(d),
                    deadzone_k: None,
                })
                .collect()
        }
        Scenario::SweepDeadzone => {
            let m = cfg.raising_value("threshold")?;
            let step = cfg.raising_value("step")?;
            cfg.sweep_list("deadzone_k")?
                .into_iter()
                .map(|k| SweepVariant {
                    label: format!("D={k}K"),
                    threshold: m,
                    step,
                    deadzone: None,
                    deadzone_k: Some(k),
                })
                .collect()
        }
        other => return Err(crate::error::Error::Config(format!("{other} is not a sweep"))),
    })
}

/// One run: one trial under one variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRun {
    pub variant: usize,
    pub trial: usize,
    pub seed: u64,
    pub nodes: usize,
    pub e_min: f64,
    pub diameter: usize,
    pub shrunk_diameter: Option<usize>,
    pub eps: Option<f64>,
    pub deadzone: f64,
    /// First round from which Δ⁺ stays zero.
    pub conv_plus: Option<usize>,
    /// First round from which Δ⁻ stays zero.
    pub conv_minus: Option<usize>,
    pub conv_joint: Option<usize>,
    /// Convergence-time bound for this run.
    pub bound: u64,
    pub rounds: usize,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: SweepVariant,
    pub mean_conv_plus: Option<f64>,
    pub mean_conv_minus: Option<f64>,
    pub mean_conv_joint: Option<f64>,
    pub unconverged: usize,
    pub mean_diameter: f64,
    pub mean_shrunk_diameter: Option<f64>,
    pub mean_eps: Option<f64>,
    pub mean_deadzone: f64,
    pub bound_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub scenario: Scenario,
    pub summaries: Vec<VariantSummary>,
    pub runs: Vec<SweepRun>,
    /// `(Δ⁺, Δ⁻)` envelopes per variant.
    pub envelopes: Vec<(Envelope, Envelope)>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let variants = variants(cfg)?;
    let (low, high) = cfg.initial_range()?;
    let per_trial = par_trials(cfg.trials, |trial| {
        let seed = trial_seed(cfg, trial);
        let g = source_graph(cfg, seed)?;
        let f = AbfSum::for_graph(&g)?;
        let analysis = stationary(&g, &f)?;
        let initial = initial_estimates(g.node_count(), low, high, seed);
        let (eps, shrunk_diameter) = if cfg.scenario == Scenario::SweepDeadzone {
            let eps = cfg.perturbation()?.resolve_eps(g.e_min());
            let shrunk = stationary(&g.shrunken(eps)?, &f)?;
            (Some(eps), Some(shrunk.effective_diameter))
        } else {
            (None, None)
        };
        // K = (W(1, D(G) − 1) + W(1, D(G⁻) − 1))·ε, the smallest dead zone
        // covered by the ultimate bound for additive distance.
        let k = match (eps, shrunk_diameter) {
            (Some(eps), Some(dm)) => ((analysis.effective_diameter + dm) as f64 - 2.0) * eps,
            _ => 0.0,
        };

        let mut out = Vec::with_capacity(variants.len());
        for (vi, v) in variants.iter().enumerate() {
            let deadzone = v.deadzone.unwrap_or_else(|| v.deadzone_k.unwrap_or(0.0) * k);
            let raising = RaisingConfig::new(v.threshold, v.step, deadzone)?;
            let bound = convergence_time_bound(&g, &analysis, &raising, f.sigma(), &initial).total();
            let mut tracker = ErrorTracker::new(&analysis.x);
            let budget = cfg.max_rounds.max(bound.saturating_add(1));
            run_engine(&g, &f, &raising, &initial, RunOptions::until_fixpoint(budget), &Unperturbed, &mut tracker)?;
            let series = tracker.series;
            let conv_joint = settle_round(&series.max_abs, DEFAULT_TOL);
            let record = SweepRun {
                variant: vi,
                trial,
                seed,
                nodes: g.node_count(),
                e_min: g.e_min(),
                diameter: analysis.effective_diameter,
                shrunk_diameter,
                eps,
                deadzone,
                conv_plus: settle_round(&series.delta_plus, DEFAULT_TOL),
                conv_minus: settle_round(&series.delta_minus, DEFAULT_TOL),
                conv_joint,
                bound,
                rounds: series.len() - 1,
                bound_ok: conv_joint.is_some_and(|c| c as u64 <= bound),
            };
            out.push((record, series.delta_plus, series.delta_minus));
        }
        Ok(out)
    })?;

    let mut runs = Vec::new();
    let mut plus: Vec<Vec<Vec<f64>>> = vec![Vec::new(); variants.len()];
    let mut minus: Vec<Vec<Vec<f64>>> = vec![Vec::new(); variants.len()];
    for trial in per_trial {
        for (record, p, m) in trial {
            plus[record.variant].push(p);
            minus[record.variant].push(m);
            runs.push(record);
        }
    }
    runs.sort_by_key(|r| (r.variant, r.trial));

    let summaries = variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let rs: Vec<&SweepRun> = runs.iter().filter(|r| r.variant == vi).collect();
            let n = rs.len() as f64;
            VariantSummary {
                variant: v.clone(),
                mean_conv_plus: mean_of(rs.iter().map(|r| r.conv_plus.map(|c| c as f64))),
                mean_conv_minus: mean_of(rs.iter().map(|r| r.conv_minus.map(|c| c as f64))),
                mean_conv_joint: mean_of(rs.iter().map(|r| r.conv_joint.map(|c| c as f64))),
                unconverged: rs.iter().filter(|r| r.conv_joint.is_none()).count(),
                mean_diameter: rs.iter().map(|r| r.diameter as f64).sum::<f64>() / n,
                mean_shrunk_diameter: mean_of(rs.iter().map(|r| r.shrunk_diameter.map(|d| d as f64))),
                mean_eps: mean_of(rs.iter().map(|r| r.eps)),
                mean_deadzone: rs.iter().map(|r| r.deadzone).sum::<f64>() / n,
                bound_violations: rs.iter().filter(|r| !r.bound_ok).count(),
            }
        })
        .collect();
    let envelopes = plus.iter().zip(&minus).map(|(p, m)| (Envelope::from_series(p), Envelope::from_series(m))).collect();
    Ok(SweepReport { scenario: cfg.scenario, summaries, runs, envelopes })
}

impl SweepReport {
    pub fn failures(&self) -> Vec<String> {
        self.runs
            .iter()
            .filter(|r| !r.bound_ok)
            .map(|r| {
                format!(
                    "{} trial {} (seed {}): converged at {} but the bound is {}",
                    self.summaries[r.variant].variant.label,
                    r.trial,
                    r.seed,
                    opt(r.conv_joint),
                    r.bound
                )
            })
            .collect()
    }

    pub fn write(&self, out: &Path) -> Result<Outcome> {
        let mut files = Vec::new();
        let runs_path = out.join("runs.csv");
        let mut w = csv_writer(&runs_path)?;
        w.write_record([
            "variant", "label", "trial", "seed", "nodes", "e_min", "diameter", "shrunk_diameter", "eps", "deadzone",
            "conv_plus", "conv_minus", "conv_joint", "bound", "rounds", "bound_ok",
        ])?;
        for r in &self.runs {
            w.write_record([
                r.variant.to_string(),
                self.summaries[r.variant].variant.label.clone(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.nodes.to_string(),
                r.e_min.to_string(),
                r.diameter.to_string(),
                opt(r.shrunk_diameter),
                opt(r.eps),
                r.deadzone.to_string(),
                opt(r.conv_plus),
                opt(r.conv_minus),
                opt(r.conv_joint),
                r.bound.to_string(),
                r.rounds.to_string(),
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
            scenario: String,
            variants: &'a [VariantSummary],
            envelope_files: Vec<String>,
            bound_violations: usize,
        }
        write_json(
            &out.join("summary.json"),
            &Summary {
                scenario: self.scenario.to_string(),
                variants: &self.summaries,
                envelope_files: (0..self.envelopes.len()).map(|i| format!("envelope_{i}.csv")).collect(),
                bound_violations: failures.len(),
            },
        )?;
        files.push("summary.json".to_string());
        Ok(Outcome { files, failures })
    }
}
