//! Zone-avoiding distance with contamination accounting.
//!
//! A node is radioactive if it lies in the zone or has ever taken a
//! radioactive node as its constraining node; contamination is permanent.
//! Every round until its run converges, a radioactive node receives a dose
//! drawn from `U[100, 120]` and any other node one from `U[0, 1]`. Doses are
//! keyed by `(seed, round, node)`, so the plain and the general block see
//! the same draws.

use std::collections::VecDeque;
use std::path::Path;

use serde::Serialize;

use super::{csv_writer, initial_estimates, par_trials, trial_seed, write_json, ExperimentConfig, Outcome, DOSE_STREAM};
use crate::engine::{has_converged, run as run_engine, Observer, RaisingConfig, RunOptions, SimulationState, Unperturbed};
use crate::error::Result;
use crate::functions::{Hazard, SpreadingFunction};
use crate::graph::{generate_geometric_with_fixed, Graph, Point};
use crate::oracle::{convergence_time_bound, stationary};
use crate::rng;

pub const RADIOACTIVE_DOSE: (f64, f64) = (100.0, 120.0);
pub const BACKGROUND_DOSE: (f64, f64) = (0.0, 1.0);

/// Tracks contamination and doses along one run.
#[derive(Debug, Clone)]
pub struct DoseTracker<'a> {
    zone: &'a [bool],
    target: &'a [f64],
    seed: u64,
    pub radioactive: Vec<bool>,
    pub dose: Vec<f64>,
    /// First round at which the estimates equal the stationary point.
    pub converged_at: Option<u64>,
}

impl<'a> DoseTracker<'a> {
    pub fn new(zone: &'a [bool], target: &'a [f64], seed: u64) -> Self {
        Self {
            zone,
            target,
            seed,
            radioactive: zone.to_vec(),
            dose: vec![0.0; zone.len()],
            converged_at: None,
        }
    }

    pub fn total(&self) -> f64 {
        self.dose.iter().sum()
    }
}

impl Observer for DoseTracker<'_> {
    fn observe(&mut self, state: &SimulationState) {
        if self.converged_at.is_some() {
            return;
        }
        let t = state.t();
        if t > 0 {
            let previous = self.radioactive.clone();
            for (i, &c) in state.constraining().iter().enumerate() {
                if !self.zone[i] && c != i && previous[c] {
                    self.radioactive[i] = true;
                }
            }
            for i in 0..self.dose.len() {
                let (lo, hi) = if self.radioactive[i] { RADIOACTIVE_DOSE } else { BACKGROUND_DOSE };
                self.dose[i] += rng::uniform(&[self.seed, DOSE_STREAM, t, i as u64], lo, hi);
            }
        }
        if has_converged(state.estimates(), self.target) {
            self.converged_at = Some(t);
        }
    }
}

/// Nodes reachable from `source` without entering the zone.
pub fn zone_free_reach(g: &Graph, zone: &[bool], source: usize) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    if zone[source] {
        return seen;
    }
    seen[source] = true;
    let mut queue = VecDeque::from([source]);
    while let Some(i) = queue.pop_front() {
        for e in g.neighbors(i) {
            if !zone[e.to] && !seen[e.to] {
                seen[e.to] = true;
                queue.push_back(e.to);
            }
        }
    }
    seen
}

/// Outside nodes with a zone-free route to the source whose chain of
/// constraining nodes nevertheless passes through the zone.
pub fn zone_crossings(constraining: &[usize], zone: &[bool], reach: &[bool]) -> Vec<usize> {
    let n = constraining.len();
    (0..n)
        .filter(|&i| !zone[i] && reach[i])
        .filter(|&start| {
            let mut i = start;
            for _ in 0..n {
                if zone[i] {
                    return true;
                }
                let c = constraining[i];
                if c == i {
                    return false;
                }
                i = c;
            }
            false
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantResult {
    pub rounds: u64,
    pub converged_at: Option<u64>,
    pub bound: u64,
    pub bound_ok: bool,
    pub total_dose: f64,
    pub radioactive_nodes: usize,
    pub zone_crossings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardTrial {
    pub trial: usize,
    pub seed: u64,
    pub nodes: usize,
    pub zone_nodes: usize,
    pub x_max: f64,
    pub threshold: f64,
    pub plain: VariantResult,
    pub general: VariantResult,
    #[serde(skip)]
    pub per_node: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub position: Point,
    pub in_zone: bool,
    pub x: f64,
    pub radioactive_plain: bool,
    pub radioactive_general: bool,
    pub dose_plain: f64,
    pub dose_general: f64,
}

#[derive(Debug, Clone)]
pub struct HazardReport {
    pub trials: Vec<HazardTrial>,
}

pub fn run(cfg: &ExperimentConfig) -> Result<HazardReport> {
    let section = cfg.hazard()?;
    let (low, high) = cfg.initial_range()?;
    let trials = par_trials(cfg.trials, |trial| {
        let seed = trial_seed(cfg, trial);
        let geometry = cfg.geometry()?.with_seed(seed);
        let source = Point::new(section.source[0], section.source[1]);
        let g = generate_geometric_with_fixed(&geometry, &[source], &[(0, 0.0)])?;
        let positions = g.positions().expect("geometric graphs carry positions").to_vec();
        let zone: Vec<bool> = positions.iter().map(|p| section.in_zone(p.x, p.y)).collect();
        let f = Hazard::for_graph(&g, zone.clone())?;
        let analysis = stationary(&g, &f)?;
        let initial = initial_estimates(g.node_count(), low, high, seed);
        let reach = zone_free_reach(&g, &zone, 0);
        let threshold = section.threshold_factor * analysis.x_max;

        let simulate = |raising: RaisingConfig| -> Result<(VariantResult, DoseTracker)> {
            let bound = convergence_time_bound(&g, &analysis, &raising, f.sigma(), &initial).total();
            let mut tracker = DoseTracker::new(&zone, &analysis.x, seed);
            let end = run_engine(
                &g,
                &f,
                &raising,
                &initial,
                RunOptions::until_fixpoint(cfg.max_rounds),
                &Unperturbed,
                &mut tracker,
            )?;
            let crossings = if tracker.converged_at.is_some() {
                zone_crossings(end.constraining(), &zone, &reach).len()
            } else {
                0
            };
            let bound_ok = match tracker.converged_at {
                Some(c) => c <= bound,
                // Not converged: only a violation if the budget covered the bound.
                None => end.t() < bound,
            };
            let result = VariantResult {
                rounds: end.t(),
                converged_at: tracker.converged_at,
                bound,
                bound_ok,
                total_dose: tracker.total(),
                radioactive_nodes: tracker.radioactive.iter().filter(|&&r| r).count(),
                zone_crossings: crossings,
            };
            Ok((result, tracker))
        };
        let (plain, plain_tracker) = simulate(RaisingConfig::plain())?;
        let (general, general_tracker) = simulate(RaisingConfig::new(threshold, threshold, 0.0)?)?;
        let per_node = (0..g.node_count())
            .map(|i| NodeRecord {
                position: positions[i],
                in_zone: zone[i],
                x: analysis.x[i],
                radioactive_plain: plain_tracker.radioactive[i],
                radioactive_general: general_tracker.radioactive[i],
                dose_plain: plain_tracker.dose[i],
                dose_general: general_tracker.dose[i],
            })
            .collect();
        Ok(HazardTrial {
            trial,
            seed,
            nodes: g.node_count(),
            zone_nodes: zone.iter().filter(|&&z| z).count(),
            x_max: analysis.x_max,
            threshold,
            plain,
            general,
            per_node,
        })
    })?;
    Ok(HazardReport { trials })
}

impl HazardReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in &self.trials {
            for (name, v) in [("plain", &t.plain), ("general", &t.general)] {
                if !v.bound_ok {
                    out.push(format!(
                        "trial {} {name}: converged at {:?}, bound {}",
                        t.trial, v.converged_at, v.bound
                    ));
                }
                if v.zone_crossings > 0 {
                    out.push(format!("trial {} {name}: {} nodes route through the zone", t.trial, v.zone_crossings));
                }
            }
            if t.general.total_dose >= t.plain.total_dose {
                out.push(format!(
                    "trial {}: general-block contamination {} not below plain-block {}",
                    t.trial, t.general.total_dose, t.plain.total_dose
                ));
            }
        }
        out
    }

    pub fn write(&self, out: &Path) -> Result<Outcome> {
        let mut w = csv_writer(&out.join("trials.csv"))?;
        w.write_record([
            "trial", "seed", "nodes", "zone_nodes", "x_max", "threshold", "plain_rounds", "plain_converged_at",
            "plain_total_dose", "plain_radioactive", "plain_crossings", "general_rounds", "general_converged_at",
            "general_total_dose", "general_radioactive", "general_crossings",
        ])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                t.nodes.to_string(),
                t.zone_nodes.to_string(),
                t.x_max.to_string(),
                t.threshold.to_string(),
                t.plain.rounds.to_string(),
                super::opt(t.plain.converged_at),
                t.plain.total_dose.to_string(),
                t.plain.radioactive_nodes.to_string(),
                t.plain.zone_crossings.to_string(),
                t.general.rounds.to_string(),
                super::opt(t.general.converged_at),
                t.general.total_dose.to_string(),
                t.general.radioactive_nodes.to_string(),
                t.general.zone_crossings.to_string(),
            ])?;
        }
        w.flush()?;

        let mut w = csv_writer(&out.join("nodes.csv"))?;
        w.write_record([
            "trial", "node", "x", "y", "in_zone", "distance", "radioactive_plain", "radioactive_general",
            "dose_plain", "dose_general",
        ])?;
        for t in &self.trials {
            for (i, r) in t.per_node.iter().enumerate() {
                w.write_record([
                    t.trial.to_string(),
                    i.to_string(),
                    r.position.x.to_string(),
                    r.position.y.to_string(),
                    u8::from(r.in_zone).to_string(),
                    r.x.to_string(),
                    u8::from(r.radioactive_plain).to_string(),
                    u8::from(r.radioactive_general).to_string(),
                    r.dose_plain.to_string(),
                    r.dose_general.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let failures = self.failures();
        #[derive(Serialize)]
        struct Summary<'a> {
            scenario: &'static str,
            trials: &'a [HazardTrial],
            mean_total_plain: f64,
            mean_total_general: f64,
            general_below_plain: usize,
            failures: usize,
        }
        let n = self.trials.len() as f64;
        write_json(
            &out.join("summary.json"),
            &Summary {
                scenario: "hazard",
                trials: &self.trials,
                mean_total_plain: self.trials.iter().map(|t| t.plain.total_dose).sum::<f64>() / n,
                mean_total_general: self.trials.iter().map(|t| t.general.total_dose).sum::<f64>() / n,
                general_below_plain: self.trials.iter().filter(|t| t.general.total_dose < t.plain.total_dose).count(),
                failures: failures.len(),
            },
        )?;
        Ok(Outcome {
            files: vec!["trials.csv".into(), "nodes.csv".into(), "summary.json".into()],
            failures,
        })
    }
}
