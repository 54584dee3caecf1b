//! Ground truth computed independently of the simulator.
//!
//! The stationary point `x` is the unique solution of
//! `x_i = min( min_{k ∈ N(i)} f(x_k, e_ik), s_i )`. Three independent
//! routines compute it:
//!
//! * [`stationary`]: label-setting search (Dijkstra generalized to any
//!   progressive `f` that is nondecreasing in its first argument);
//! * [`stationary_bruteforce`]: minimum over all simple paths from every
//!   finite-valued node, for graphs of at most [`BRUTE_FORCE_LIMIT`] nodes;
//! * [`fixpoint_sweep`]: synchronous relaxation from `x = s`.
//!
//! On top of `x`, [`stationary`] derives the true constraining sets, the
//! layers `F_i` (longest constraining chain), the effective diameter and the
//! quantities used by the convergence-time and ultimate bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::functions::SpreadingFunction;
use crate::graph::Graph;
use crate::engine::RaisingConfig;

/// Largest graph accepted by [`stationary_bruteforce`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Relative tolerance for deciding `f(x_k, e_ik) = x_i` and `x_i = s_i`.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryAnalysis {
    /// Stationary value of every node.
    pub x: Vec<f64>,
    /// Nodes with `x_i = s_i`, ascending.
    pub s_infinity: Vec<usize>,
    /// `C(i)`: neighbors realizing the minimum, plus `i` itself when
    /// `x_i = s_i`. Ascending.
    pub true_constraining: Vec<Vec<usize>>,
    /// Layer index of every node.
    pub layer_of: Vec<usize>,
    /// `F_0 … F_{D−1}`, each ascending.
    pub layers: Vec<Vec<usize>>,
    /// `D(G)`: number of layers.
    pub effective_diameter: usize,
    pub x_max: f64,
    /// Smallest `x_j` within each layer.
    pub layer_minima: Vec<f64>,
    /// Smallest finite maximum value.
    pub s_min: f64,
}

#[inline]
fn ties(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, PartialEq)]
struct Label {
    value: f64,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    // Reversed so that `BinaryHeap` pops the smallest value first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.value.total_cmp(&self.value).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Stationary point and its layer structure.
pub fn stationary<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F) -> Result<StationaryAnalysis> {
    g.ensure_valid()?;
    let n = g.node_count();
    let mut x = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    for i in g.finite_nodes() {
        x[i] = g.max_value(i).as_f64();
        heap.push(Label { value: x[i], node: i });
    }
    while let Some(Label { value, node }) = heap.pop() {
        if settled[node] || value > x[node] {
            continue;
        }
        settled[node] = true;
        for e in g.neighbors(node) {
            let k = e.to;
            if settled[k] {
                continue;
            }
            // Node k hears `node` across e_{k,node} = e_{node,k}.
            let candidate = g.max_value(k).clip(f.apply(value, e.weight, node));
            if candidate < x[k] {
                x[k] = candidate;
                heap.push(Label { value: candidate, node: k });
            }
        }
    }
    Ok(analyze(g, f, x))
}

/// Derives constraining sets and layers from a stationary vector.
fn analyze<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F, x: Vec<f64>) -> StationaryAnalysis {
    let n = g.node_count();
    let mut s_infinity = Vec::new();
    let mut true_constraining = vec![Vec::new(); n];
    for i in 0..n {
        let s = g.max_value(i);
        let is_source = s.finite().is_some_and(|s| ties(x[i], s));
        for e in g.neighbors(i) {
            if ties(f.apply(x[e.to], e.weight, e.to), x[i]) {
                true_constraining[i].push(e.to);
            }
        }
        if is_source {
            s_infinity.push(i);
            true_constraining[i].push(i);
            true_constraining[i].sort_unstable();
        }
    }

    // Constraining edges go from smaller to larger x, so one pass in
    // increasing x computes longest chains.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut layer_of = vec![0usize; n];
    let mut done = vec![false; n];
    for &i in &order {
        let mut layer = 0;
        for &k in &true_constraining[i] {
            if k != i {
                debug_assert!(done[k], "constraining neighbor must have a smaller value");
                layer = layer.max(layer_of[k] + 1);
            }
        }
        layer_of[i] = layer;
        done[i] = true;
    }
    let effective_diameter = layer_of.iter().copied().max().map_or(0, |m| m + 1);
    let mut layers = vec![Vec::new(); effective_diameter];
    for i in 0..n {
        layers[layer_of[i]].push(i);
    }
    let layer_minima = layers.iter().map(|l| l.iter().map(|&j| x[j]).fold(f64::INFINITY, f64::min)).collect();
    let x_max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    StationaryAnalysis {
        s_min: g.s_min().unwrap_or(f64::INFINITY),
        x,
        s_infinity,
        true_constraining,
        layer_of,
        layers,
        effective_diameter,
        x_max,
        layer_minima,
    }
}

/// Minimum over all simple paths from a finite-valued node. Simple paths
/// suffice: `f` is progressive, so going around a cycle never lowers a value.
pub fn stationary_bruteforce<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { nodes: n, limit: BRUTE_FORCE_LIMIT });
    }
    fn walk<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F, node: usize, value: f64, on_path: &mut [bool], best: &mut [f64]) {
        if value < best[node] {
            best[node] = value;
        }
        for e in g.neighbors(node) {
            if !on_path[e.to] {
                on_path[e.to] = true;
                walk(g, f, e.to, f.apply(value, e.weight, node), on_path, best);
                on_path[e.to] = false;
            }
        }
    }
    let mut best = vec![f64::INFINITY; n];
    let mut on_path = vec![false; n];
    for j in g.finite_nodes() {
        on_path[j] = true;
        walk(g, f, j, g.max_value(j).as_f64(), &mut on_path, &mut best);
        on_path[j] = false;
    }
    Ok(best)
}

/// Synchronous relaxation `x ← min(min_k f(x_k, e_ik), s)` started from
/// `x = s` (`+∞` for infinite maximum values, which are never propagated).
/// Stops when a sweep changes nothing, after at most `N + 1` sweeps.
pub fn fixpoint_sweep<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F) -> Vec<f64> {
    let n = g.node_count();
    let mut x: Vec<f64> = g.max_values().iter().map(|s| s.as_f64()).collect();
    for _ in 0..=n {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let best = g
                    .neighbors(i)
                    .iter()
                    .filter(|e| x[e.to].is_finite())
                    .map(|e| f.apply(x[e.to], e.weight, e.to))
                    .fold(f64::INFINITY, f64::min);
                g.max_value(i).clip(best)
            })
            .collect();
        if next == x {
            break;
        }
        x = next;
    }
    x
}

/// `max_i |x_i − min(min_k f(x_k, e_ik), s_i)|`.
pub fn fixpoint_residual<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F, x: &[f64]) -> f64 {
    (0..g.node_count())
        .map(|i| {
            let best = g.neighbors(i).iter().map(|e| f.apply(x[e.to], e.weight, e.to)).fold(f64::INFINITY, f64::min);
            (x[i] - g.max_value(i).clip(best)).abs()
        })
        .fold(0.0, f64::max)
}

impl StationaryAnalysis {
    /// CSV with columns `node,x,layer,is_source,constraining_set`; the set
    /// is `;`-separated.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "x", "layer", "is_source", "constraining_set"])?;
        for i in 0..self.x.len() {
            let set: Vec<String> = self.true_constraining[i].iter().map(|k| k.to_string()).collect();
            w.write_record([
                i.to_string(),
                format!("{:.17e}", self.x[i]),
                self.layer_of[i].to_string(),
                u8::from(self.s_infinity.binary_search(&i).is_ok()).to_string(),
                set.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `x̂_min(t_0)`: the smallest initial estimate among nodes not starting at
/// their finite maximum value (the initially unrooted set `V \ S(0)`), or the
/// global minimum if every node starts at its maximum value.
pub fn initial_minimum(g: &Graph, initial: &[f64]) -> f64 {
    let unrooted = initial
        .iter()
        .enumerate()
        .filter(|&(i, &v)| !g.max_value(i).is_attained_by(v))
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    if unrooted.is_finite() {
        unrooted
    } else {
        initial.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Components of the round bound `T + Σ_{i<D} T_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundBound {
    /// Rounds until every unrooted estimate exceeds the largest target value.
    pub t_star: u64,
    /// Per-layer terms; the first one uses the tighter layer-0 form.
    pub layer_terms: Vec<u64>,
}

impl RoundBound {
    pub fn total(&self) -> u64 {
        self.layer_terms.iter().fold(self.t_star, |acc, &t| acc.saturating_add(t))
    }
}

fn ceil_rounds(numerator: f64, denominator: f64) -> u64 {
    let q = (numerator / denominator).ceil();
    if q > 0.0 {
        q as u64
    } else {
        0
    }
}

/// `T`, `T_0` (tighter form) and `T_i` for given layer minima and top value.
fn round_bound(
    top: f64,
    layer_minima: &[f64],
    s_min: f64,
    raising: &RaisingConfig,
    sigma: f64,
    x_hat_min: f64,
) -> RoundBound {
    let m = raising.threshold();
    let delta = raising.step();
    let t_star = ceil_rounds(top - x_hat_min, sigma.min(delta));
    let layer_terms = layer_minima
        .iter()
        .enumerate()
        .map(|(i, &lo)| {
            let floor = if i == 0 { (delta + s_min).min(top) } else { lo };
            ceil_rounds(m - floor, delta) + 2
        })
        .collect();
    RoundBound { t_star, layer_terms }
}

/// Round by which an unperturbed run from `initial` has converged.
pub fn convergence_time_bound(
    g: &Graph,
    analysis: &StationaryAnalysis,
    raising: &RaisingConfig,
    sigma: f64,
    initial: &[f64],
) -> RoundBound {
    round_bound(
        analysis.x_max,
        &analysis.layer_minima,
        analysis.s_min,
        raising,
        sigma,
        initial_minimum(g, initial),
    )
}

/// `W(L2, n) = Σ_{i=0}^{n−1} L2^i`, zero for `n <= 0`.
pub fn w_sum(l2: f64, n: i64) -> f64 {
    if n <= 0 {
        return 0.0;
    }
    (0..n).map(|i| l2.powi(i as i32)).sum()
}

/// Error bounds under persistent edge perturbation of size `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct UltimateBound {
    pub eps: f64,
    pub l1: f64,
    pub l2: f64,
    /// Analysis of the nominal graph.
    pub nominal: StationaryAnalysis,
    /// Analysis of the shrunken graph (every weight reduced by `eps`).
    pub shrunk: StationaryAnalysis,
    /// Ceiling on overestimates: `L1·W(L2, D(G)−1)·ε`.
    pub bound_plus: f64,
    /// Ceiling on underestimates: `L1·W(L2, D(G⁻)−1)·ε`.
    pub bound_minus: f64,
    /// `max(bound_plus, bound_minus)`.
    pub combined: f64,
    /// Smallest dead zone for which the bounds are guaranteed.
    pub min_deadzone: f64,
}

pub fn ultimate_bound<F: SpreadingFunction + ?Sized>(g: &Graph, f: &F, eps: f64) -> Result<UltimateBound> {
    let shrunk_graph = g.shrunken(eps)?;
    let nominal = stationary(g, f)?;
    let shrunk = stationary(&shrunk_graph, f)?;
    let l1 = f.edge_lipschitz();
    let l2 = f.estimate_lipschitz();
    let w_plus = w_sum(l2, nominal.effective_diameter as i64 - 1);
    let w_minus = w_sum(l2, shrunk.effective_diameter as i64 - 1);
    Ok(UltimateBound {
        eps,
        l1,
        l2,
        bound_plus: l1 * w_plus * eps,
        bound_minus: l1 * w_minus * eps,
        combined: eps * l1 * w_plus.max(w_minus),
        min_deadzone: (w_minus + w_plus) * l1 * eps,
        nominal,
        shrunk,
    })
}

impl UltimateBound {
    /// Round after which `|x̂_i − x_i| <= combined` for every node, given
    /// `D >= min_deadzone`. Layers are those of the nominal graph; their
    /// minima and the top value come from the shrunken stationary point.
    pub fn time_bound(&self, g: &Graph, raising: &RaisingConfig, sigma: f64, initial: &[f64]) -> RoundBound {
        let minima: Vec<f64> = self
            .nominal
            .layers
            .iter()
            .map(|layer| layer.iter().map(|&j| self.shrunk.x[j]).fold(f64::INFINITY, f64::min))
            .collect();
        round_bound(self.shrunk.x_max, &minima, self.nominal.s_min, raising, sigma, initial_minimum(g, initial))
    }
}
