//! Self-checks on small random graphs: the three stationary-point routines
//! must agree, and the structural and dynamical invariants must hold.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{csv_writer, par_trials, trial_seed, write_json, ExperimentConfig, Outcome};
use crate::engine::{init, run as run_engine, step, Both, RaisingConfig, RunOptions, Unperturbed};
use crate::error::Result;
use crate::functions::{AbfSum, Hazard, MostProbablePath, SpreadingFunction};
use crate::graph::{generate_geometric, GeometricConfig, Graph};
use crate::metrics::{convergence_round, ErrorTracker, InvariantMonitor};
use crate::oracle::{
    convergence_time_bound, fixpoint_residual, fixpoint_sweep, stationary, stationary_bruteforce,
    ultimate_bound, w_sum, StationaryAnalysis,
};

/// Functions exercised on every graph.
pub const FUNCTIONS: [&str; 4] = ["abf", "mpp", "hazard", "hazard-zone"];

/// Agreement tolerance, relative to `max(1, |x|)`.
pub const TOL: f64 = 1e-9;

/// A small connected geometric graph in the unit square with one or two
/// sources.
pub fn random_small_graph(seed: u64, min_nodes: usize, max_nodes: usize, max_source_value: f64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(min_nodes..=max_nodes);
    let cfg = GeometricConfig { width: 1.0, height: 1.0, radius: 0.6, node_count: n, seed: rng.random() };
    let first = (rng.random_range(0..n), max_source_value * rng.random::<f64>());
    let mut sources = vec![first];
    if rng.random_bool(0.5) {
        let second = rng.random_range(0..n);
        if second != first.0 {
            sources.push((second, max_source_value * rng.random::<f64>()));
        }
    }
    generate_geometric(&cfg, &sources)
}

fn make_function(name: &str, g: &Graph, seed: u64) -> Result<Box<dyn SpreadingFunction>> {
    Ok(match name {
        "abf" => Box::new(AbfSum::for_graph(g)?),
        "mpp" => Box::new(MostProbablePath::for_graph(g, 0.99)?),
        "hazard" => Box::new(Hazard::for_graph(g, vec![false; g.node_count()])?),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a);
            let zone = (0..g.node_count()).map(|_| rng.random_bool(0.3)).collect();
            Box::new(Hazard::for_graph(g, zone)?)
        }
    })
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(1.0)).fold(0.0, f64::max)
}

/// Layer and source-set structure: `S_min ⊆ F_0 ⊆ S_∞`, layers partition
/// V, none empty, and constraining neighbors have strictly smaller values.
pub fn structure_problems(g: &Graph, a: &StationaryAnalysis) -> Vec<String> {
    let mut out = Vec::new();
    if a.s_infinity.is_empty() {
        out.push("S_inf empty".into());
    }
    for i in g.s_min_set() {
        if a.layer_of[i] != 0 {
            out.push(format!("S_min node {i} not in F_0"));
        }
    }
    if let Some(layer0) = a.layers.first() {
        for i in layer0 {
            if a.s_infinity.binary_search(i).is_err() {
                out.push(format!("F_0 node {i} not in S_inf"));
            }
        }
    }
    if a.layers.iter().any(Vec::is_empty) {
        out.push("empty layer".into());
    }
    if a.layers.iter().map(Vec::len).sum::<usize>() != g.node_count() {
        out.push("layers do not partition V".into());
    }
    for (i, c) in a.true_constraining.iter().enumerate() {
        if c.is_empty() {
            out.push(format!("node {i} has no true constraining node"));
        }
        for &k in c {
            if k != i && !(a.x[k] < a.x[i]) {
                out.push(format!("constraining edge {k}->{i} does not increase x"));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCase {
    pub case: usize,
    pub seed: u64,
    pub function: &'static str,
    pub nodes: usize,
    pub edges: usize,
    pub diff_bruteforce: f64,
    pub diff_sweep: f64,
    pub residual: f64,
    pub problems: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
}

fn check_case(case: usize, seed: u64, function: &'static str, g: &Graph) -> Result<OracleCase> {
    let f = make_function(function, g, seed)?;
    let f = f.as_ref();
    let a = stationary(g, f)?;
    let brute = stationary_bruteforce(g, f)?;
    let sweep = fixpoint_sweep(g, f);
    let scale = a.x_max.abs().max(1.0);
    let residual = fixpoint_residual(g, f, &a.x) / scale;
    let diff_bruteforce = max_rel_diff(&a.x, &brute);
    let diff_sweep = max_rel_diff(&a.x, &sweep);
    let mut problems = structure_problems(g, &a);
    if diff_bruteforce > TOL || diff_sweep > TOL {
        problems.push(format!("oracles disagree: brute {diff_bruteforce:e}, sweep {diff_sweep:e}"));
    }
    if residual > TOL {
        problems.push(format!("fixpoint residual {residual:e}"));
    }

    // One plain round from x leaves x unchanged.
    let once = step(&init(g, &a.x)?, g, f, &RaisingConfig::plain(), &Unperturbed);
    if max_rel_diff(once.estimates(), &a.x) > TOL {
        problems.push("x is not a fixpoint of the plain round".into());
    }

    // Stationary point of the shrunken graph: lower-bound lemma and
    // monotone dominance.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    let eps = 0.9 * rng.random::<f64>() * g.e_min();
    let ub = ultimate_bound(g, f, eps)?;
    let slack = 1e-9 * scale;
    let w = w_sum(f.estimate_lipschitz(), ub.shrunk.effective_diameter as i64 - 1) * f.edge_lipschitz() * eps;
    for i in 0..g.node_count() {
        if a.x[i] > ub.shrunk.x[i] + w + slack {
            problems.push(format!("node {i}: x exceeds X + W·L1·eps"));
        }
        if f.monotone_in_weight() && ub.shrunk.x[i] > a.x[i] + slack {
            problems.push(format!("node {i}: shrunken value above nominal"));
        }
    }

    // The general block converges from a random start within its bound and
    // keeps its invariants along the way (additive-distance case only: the
    // growth invariant needs progressivity on the whole estimate range).
    if function == "abf" {
        let m = rng.random_range(0.0..2.0 * a.x_max.max(0.1));
        let delta = rng.random_range(0.05..1.0);
        let deadzone = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.5) };
        let raising = RaisingConfig::new(m, delta, deadzone)?;
        let initial: Vec<f64> = (0..g.node_count()).map(|_| rng.random_range(0.0..2.0 * a.x_max.max(0.1))).collect();
        let bound = convergence_time_bound(g, &a, &raising, f.sigma(), &initial);
        let mut tracker = ErrorTracker::new(&a.x);
        let mut monitor = InvariantMonitor::new(&a.x, f.sigma().min(delta), bound.t_star);
        let mut both = Both(&mut tracker, &mut monitor);
        run_engine(g, f, &raising, &initial, RunOptions::new(bound.total() + 2), &Unperturbed, &mut both)?;
        match convergence_round(&tracker.series, 1e-9) {
            Some(c) if c as u64 <= bound.total() => {}
            other => problems.push(format!("converged at {other:?}, bound {}", bound.total())),
        }
        problems.extend(monitor.violations.iter().cloned());
    }

    Ok(OracleCase {
        case,
        seed,
        function,
        nodes: g.node_count(),
        edges: g.edge_count(),
        diff_bruteforce,
        diff_sweep,
        residual,
        problems,
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let section = cfg.oracle()?;
    let per_graph = par_trials(cfg.trials, |case| {
        let seed = trial_seed(cfg, case);
        let g = random_small_graph(seed, section.min_nodes, section.max_nodes, 0.3)?;
        FUNCTIONS.iter().map(|&name| check_case(case, seed, name, &g)).collect::<Result<Vec<_>>>()
    })?;
    Ok(OracleReport { cases: per_graph.into_iter().flatten().collect() })
}

impl OracleReport {
    pub fn failures(&self) -> Vec<String> {
        self.cases
            .iter()
            .flat_map(|c| c.problems.iter().map(move |p| format!("case {} ({}): {p}", c.case, c.function)))
            .collect()
    }

    pub fn write(&self, out: &Path) -> Result<Outcome> {
        let mut w = csv_writer(&out.join("cases.csv"))?;
        w.write_record(["case", "seed", "function", "nodes", "edges", "diff_bruteforce", "diff_sweep", "residual", "problems"])?;
        for c in &self.cases {
            w.write_record([
                c.case.to_string(),
                c.seed.to_string(),
                c.function.to_string(),
                c.nodes.to_string(),
                c.edges.to_string(),
                format!("{:e}", c.diff_bruteforce),
                format!("{:e}", c.diff_sweep),
                format!("{:e}", c.residual),
                c.problems.join("; "),
            ])?;
        }
        w.flush()?;
        let failures = self.failures();
        #[derive(Serialize)]
        struct Summary {
            scenario: &'static str,
            cases: usize,
            max_diff_bruteforce: f64,
            max_diff_sweep: f64,
            max_residual: f64,
            failures: usize,
        }
        write_json(
            &out.join("summary.json"),
            &Summary {
                scenario: "oracle-check",
                cases: self.cases.len(),
                max_diff_bruteforce: self.cases.iter().map(|c| c.diff_bruteforce).fold(0.0, f64::max),
                max_diff_sweep: self.cases.iter().map(|c| c.diff_sweep).fold(0.0, f64::max),
                max_residual: self.cases.iter().map(|c| c.residual).fold(0.0, f64::max),
                failures: failures.len(),
            },
        )?;
        Ok(Outcome { files: vec!["cases.csv".into(), "summary.json".into()], failures })
    }
}
