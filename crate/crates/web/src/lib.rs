//! WebAssembly bindings for the browser demo in `www/`.
//!
//! A [`Demo`] owns one random deployment with a single source (node 0) and
//! its stationary distances. [`Demo::simulate`] runs the general block from
//! random estimates, optionally under persistent edge noise, and returns the
//! whole trajectory for playback.

use spreading::engine::EdgeWeights;
use spreading::metrics::{convergence_round, ErrorTracker, DEFAULT_TOL};
use spreading::oracle::{convergence_time_bound, ultimate_bound};
use spreading::rng;
use spreading::{
    generate_geometric, run, stationary, AbfSum, GeometricConfig, Graph, PerturbationKind, PerturbationModel,
    RaisingConfig, RunOptions, SimulationState, SpreadingFunction, StationaryAnalysis,
};
use wasm_bindgen::prelude::*;

/// Largest trajectory handed to the page, in rounds.
pub const MAX_ROUNDS: u32 = 5000;

fn js_err(e: spreading::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    graph: Graph,
    f: AbfSum,
    analysis: StationaryAnalysis,
    diagonal: f64,
}

#[wasm_bindgen]
impl Demo {
    /// Places `node_count` nodes uniformly in a `width × height` rectangle,
    /// linking pairs closer than `radius`, until the graph is connected.
    #[wasm_bindgen(constructor)]
    pub fn new(node_count: u32, width: f64, height: f64, radius: f64, seed: u32) -> Result<Demo, JsError> {
        let cfg = GeometricConfig { width, height, radius, node_count: node_count as usize, seed: seed.into() };
        let graph = generate_geometric(&cfg, &[(0, 0.0)]).map_err(js_err)?;
        let f = AbfSum::for_graph(&graph).map_err(js_err)?;
        let analysis = stationary(&graph, &f).map_err(js_err)?;
        Ok(Demo { graph, f, analysis, diagonal: cfg.diagonal() })
    }

    #[wasm_bindgen(js_name = nodeCount)]
    pub fn node_count(&self) -> u32 {
        self.graph.node_count() as u32
    }

    /// `[x0, y0, x1, y1, …]`.
    pub fn positions(&self) -> Vec<f64> {
        self.graph.positions().unwrap_or_default().iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// `[i0, j0, i1, j1, …]` with `i < j`.
    pub fn edges(&self) -> Vec<u32> {
        self.graph.edges().flat_map(|(i, j, _)| [i as u32, j as u32]).collect()
    }

    /// Stationary distance of every node.
    pub fn distances(&self) -> Vec<f64> {
        self.analysis.x.clone()
    }

    /// Layer index of every node.
    pub fn layers(&self) -> Vec<u32> {
        self.analysis.layer_of.iter().map(|&l| l as u32).collect()
    }

    /// One true constraining neighbor per node (itself for the source).
    pub fn parents(&self) -> Vec<u32> {
        self.analysis.true_constraining.iter().enumerate().map(|(i, c)| c.first().copied().unwrap_or(i) as u32).collect()
    }

    #[wasm_bindgen(js_name = effectiveDiameter)]
    pub fn effective_diameter(&self) -> u32 {
        self.analysis.effective_diameter as u32
    }

    #[wasm_bindgen(js_name = maxDistance)]
    pub fn max_distance(&self) -> f64 {
        self.analysis.x_max
    }

    #[wasm_bindgen(js_name = minEdge)]
    pub fn min_edge(&self) -> f64 {
        self.graph.e_min()
    }

    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Smallest dead zone for which the ultimate bounds hold at noise level
    /// `eps_fraction · e_min`.
    #[wasm_bindgen(js_name = minDeadzone)]
    pub fn min_deadzone(&self, eps_fraction: f64) -> Result<f64, JsError> {
        let ub = ultimate_bound(&self.graph, &self.f, eps_fraction * self.graph.e_min()).map_err(js_err)?;
        Ok(ub.min_deadzone)
    }

    /// Runs the general block for `rounds` rounds from estimates drawn
    /// uniformly in `[0, diagonal)`. With `eps_fraction > 0` every edge is
    /// lengthened each round by noise in `[0, eps_fraction · e_min]`, and
    /// the returned bounds are the ultimate bounds; otherwise they are the
    /// round bound.
    pub fn simulate(
        &self,
        threshold: f64,
        step: f64,
        deadzone: f64,
        eps_fraction: f64,
        rounds: u32,
        seed: u32,
    ) -> Result<Trajectory, JsError> {
        let raising = RaisingConfig::new(threshold, step, deadzone).map_err(js_err)?;
        let rounds = rounds.clamp(1, MAX_ROUNDS) as u64;
        let n = self.graph.node_count();
        let initial: Vec<f64> =
            (0..n).map(|i| rng::uniform(&[seed.into(), i as u64], 0.0, self.diagonal)).collect();
        let eps = eps_fraction * self.graph.e_min();
        let model = PerturbationModel::new(PerturbationKind::UniformPositive, eps, seed.into()).map_err(js_err)?;
        let view = model.edge_view(&self.graph).map_err(js_err)?;

        let mut estimates = Vec::with_capacity((rounds as usize + 1) * n);
        let mut tracker = ErrorTracker::new(&self.analysis.x);
        let mut record = |s: &SimulationState| {
            estimates.extend_from_slice(s.estimates());
            spreading::engine::Observer::observe(&mut tracker, s);
        };
        let weights: &dyn EdgeWeights = if eps > 0.0 { &view } else { &spreading::engine::Unperturbed };
        run(&self.graph, &self.f, &raising, &initial, RunOptions::new(rounds), weights, &mut record).map_err(js_err)?;

        let (bound_plus, bound_minus, time_bound) = if eps > 0.0 {
            let ub = ultimate_bound(&self.graph, &self.f, eps).map_err(js_err)?;
            let guaranteed = deadzone >= ub.min_deadzone;
            let time = ub.time_bound(&self.graph, &raising, self.graph.e_min() - eps, &initial).total();
            (ub.bound_plus, ub.bound_minus, if guaranteed { time as f64 } else { f64::NAN })
        } else {
            let b = convergence_time_bound(&self.graph, &self.analysis, &raising, self.f.sigma(), &initial);
            (0.0, 0.0, b.total() as f64)
        };
        let series = tracker.series;
        Ok(Trajectory {
            node_count: n,
            converged_at: if eps > 0.0 { None } else { convergence_round(&series, DEFAULT_TOL) },
            estimates,
            delta_plus: series.delta_plus,
            delta_minus: series.delta_minus,
            bound_plus,
            bound_minus,
            time_bound,
        })
    }
}

/// Result of [`Demo::simulate`].
#[wasm_bindgen]
pub struct Trajectory {
    node_count: usize,
    estimates: Vec<f64>,
    delta_plus: Vec<f64>,
    delta_minus: Vec<f64>,
    converged_at: Option<usize>,
    bound_plus: f64,
    bound_minus: f64,
    time_bound: f64,
}

#[wasm_bindgen]
impl Trajectory {
    /// Number of recorded rounds, including round 0.
    pub fn rounds(&self) -> u32 {
        self.delta_plus.len() as u32
    }

    /// Estimates of every node at round `t`.
    #[wasm_bindgen(js_name = estimatesAt)]
    pub fn estimates_at(&self, t: u32) -> Vec<f64> {
        let t = (t as usize).min(self.delta_plus.len() - 1);
        self.estimates[t * self.node_count..(t + 1) * self.node_count].to_vec()
    }

    /// Greatest overestimate per round.
    #[wasm_bindgen(js_name = deltaPlus)]
    pub fn delta_plus(&self) -> Vec<f64> {
        self.delta_plus.clone()
    }

    /// Least underestimate per round, as a positive number.
    #[wasm_bindgen(js_name = deltaMinus)]
    pub fn delta_minus(&self) -> Vec<f64> {
        self.delta_minus.clone()
    }

    /// First round from which every estimate is exact, or -1.
    #[wasm_bindgen(js_name = convergedAt)]
    pub fn converged_at(&self) -> i32 {
        self.converged_at.map_or(-1, |c| c as i32)
    }

    /// Ultimate overestimate bound (0 without noise).
    #[wasm_bindgen(js_name = boundPlus)]
    pub fn bound_plus(&self) -> f64 {
        self.bound_plus
    }

    /// Ultimate underestimate bound (0 without noise).
    #[wasm_bindgen(js_name = boundMinus)]
    pub fn bound_minus(&self) -> f64 {
        self.bound_minus
    }

    /// Round after which the bounds hold; NaN if the dead zone is too small
    /// for the guarantee.
    #[wasm_bindgen(js_name = timeBound)]
    pub fn time_bound(&self) -> f64 {
        self.time_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> Demo {
        Demo::new(40, 1.0, 0.5, 0.3, 3).unwrap_or_else(|_| panic!("connected deployment"))
    }

    #[test]
    fn deployment_views_are_consistent() {
        let d = demo();
        let n = d.node_count() as usize;
        assert_eq!(d.positions().len(), 2 * n);
        assert!(d.edges().iter().all(|&i| (i as usize) < n));
        assert_eq!(d.distances()[0], 0.0);
        assert_eq!(d.layers()[0], 0);
        assert_eq!(d.parents()[0], 0);
        assert_eq!(*d.layers().iter().max().unwrap() + 1, d.effective_diameter());
    }

    #[test]
    fn unperturbed_run_converges_within_bound() {
        let d = demo();
        let m = d.diagonal();
        let t = d.simulate(m, m, 0.0, 0.0, 500, 7).unwrap_or_else(|_| panic!("valid parameters"));
        let c = t.converged_at();
        assert!(c >= 0 && c as f64 <= t.time_bound(), "converged {c}, bound {}", t.time_bound());
        let last = t.estimates_at(t.rounds() - 1);
        for (e, x) in last.iter().zip(d.distances()) {
            assert!((e - x).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_run_respects_ultimate_bound() {
        let d = demo();
        let m = d.diagonal();
        let deadzone = d.min_deadzone(0.05).unwrap_or_else(|_| panic!("valid noise level"));
        let t = d.simulate(m, m, deadzone, 0.05, 2000, 7).unwrap_or_else(|_| panic!("valid parameters"));
        assert!(t.time_bound().is_finite());
        let from = t.time_bound() as usize;
        let worst = t.delta_plus()[from..].iter().chain(&t.delta_minus()[from..]).copied().fold(0.0, f64::max);
        assert!(worst <= t.bound_plus().max(t.bound_minus()) + 1e-9);
    }
}
