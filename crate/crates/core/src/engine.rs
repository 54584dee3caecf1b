//! The round-synchronous update of the general spreading block.
//!
//! One round computes, for every node `i` and from round-`t` values only,
//!
//! ```text
//! x̃_i(t+1) = min( min_{k ∈ N(i)} f(x̂_k(t), e_ik(t)), s_i )
//! x̂_i(t+1) = x̃_i(t+1)      if x̂_i(t) >= M or |x̂_i(t) − x̃_i(t+1)| <= D   (i ∈ A)
//!          = g(x̂_i(t))     otherwise                                      (i ∈ E)
//! ```
//!
//! together with each node's current constraining node and the rooted set
//! `R(t+1) = S(t+1) ∪ { i | constraining(i) ∈ R(t) }`, where
//! `S(t) = { i ∈ S* | x̂_i(t) = s_i }`. The unrooted set is `U(t) = V \ R(t)`
//! (the complement of `R`, not of `S`: the lemmas about underestimates are
//! all stated for the complement of the rooted set).
//!
//! With `M = 0` (or `D = ∞`) every node always takes the first branch and
//! the update is the plain spreading block.

use std::io::Write;

use crate::error::{Error, Result};
use crate::functions::SpreadingFunction;
use crate::graph::Graph;

/// Raising step `g`. Both variants satisfy `g(x) >= x + δ` for `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Raise {
    /// `g(x) = x + δ`.
    Additive,
    /// `g(x) = factor·x + δ` with `factor >= 1`.
    Scaled { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaisingConfig {
    threshold: f64,
    step: f64,
    deadzone: f64,
    raise: Raise,
}

impl RaisingConfig {
    /// `threshold` is `M`, `step` is `δ`, `deadzone` is `D` (may be `+∞`).
    pub fn new(threshold: f64, step: f64, deadzone: f64) -> Result<Self> {
        Self::with_raise(threshold, step, deadzone, Raise::Additive)
    }

    pub fn with_raise(threshold: f64, step: f64, deadzone: f64, raise: Raise) -> Result<Self> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!("threshold M must be finite and >= 0, got {threshold}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be finite and > 0, got {step}")));
        }
        if !(deadzone >= 0.0) {
            return Err(Error::InvalidArgument(format!("dead zone must be >= 0, got {deadzone}")));
        }
        if let Raise::Scaled { factor } = raise {
            if !(factor >= 1.0 && factor.is_finite()) {
                return Err(Error::InvalidArgument(format!("raise factor must be >= 1, got {factor}")));
            }
        }
        Ok(Self { threshold, step, deadzone, raise })
    }

    /// `M = 0`: the plain spreading block.
    pub fn plain() -> Self {
        Self { threshold: 0.0, step: 1.0, deadzone: 0.0, raise: Raise::Additive }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn deadzone(&self) -> f64 {
        self.deadzone
    }

    pub fn raise(&self) -> Raise {
        self.raise
    }

    #[inline]
    pub fn g(&self, x: f64) -> f64 {
        match self.raise {
            Raise::Additive => x + self.step,
            Raise::Scaled { factor } => factor * x + self.step,
        }
    }

    /// True iff the node accepts the neighborhood minimum this round.
    #[inline]
    pub fn accepts(&self, previous: f64, tilde: f64) -> bool {
        previous >= self.threshold || (previous - tilde).abs() <= self.deadzone
    }
}

/// Supplies the edge weight `e_ik(t)` seen by node `i` for neighbor `k` in
/// round `t`.
pub trait EdgeWeights {
    fn weight(&self, t: u64, i: usize, k: usize, nominal: f64) -> f64;

    /// True if `weight` always returns `nominal`.
    fn is_static(&self) -> bool {
        false
    }
}

/// Nominal weights every round.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unperturbed;

impl EdgeWeights for Unperturbed {
    #[inline]
    fn weight(&self, _t: u64, _i: usize, _k: usize, nominal: f64) -> f64 {
        nominal
    }

    fn is_static(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    t: u64,
    estimates: Vec<f64>,
    tilde: Vec<f64>,
    constraining: Vec<usize>,
    in_a: Vec<bool>,
    in_s: Vec<bool>,
    in_r: Vec<bool>,
}

impl SimulationState {
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    pub fn tilde(&self) -> &[f64] {
        &self.tilde
    }

    pub fn constraining(&self) -> &[usize] {
        &self.constraining
    }

    pub fn in_a(&self) -> &[bool] {
        &self.in_a
    }

    pub fn in_s(&self) -> &[bool] {
        &self.in_s
    }

    pub fn in_r(&self) -> &[bool] {
        &self.in_r
    }

    pub fn node_count(&self) -> usize {
        self.estimates.len()
    }

    /// Members of `U(t) = V \ R(t)`.
    pub fn unrooted(&self) -> impl Iterator<Item = usize> + '_ {
        self.in_r.iter().enumerate().filter(|(_, r)| !**r).map(|(i, _)| i)
    }

    pub fn unrooted_is_empty(&self) -> bool {
        self.in_r.iter().all(|&r| r)
    }
}

/// Round-0 state. `R(0) = S(0)`; every node is its own constraining node and
/// counts as an `A` node by convention.
pub fn init(g: &Graph, initial: &[f64]) -> Result<SimulationState> {
    let n = g.node_count();
    if initial.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: initial.len() });
    }
    if let Some((i, v)) = initial.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("initial estimate of node {i} must be finite and >= 0, got {v}")));
    }
    let in_s: Vec<bool> = (0..n).map(|i| g.max_value(i).is_attained_by(initial[i])).collect();
    Ok(SimulationState {
        t: 0,
        estimates: initial.to_vec(),
        tilde: initial.to_vec(),
        constraining: (0..n).collect(),
        in_a: vec![true; n],
        in_r: in_s.clone(),
        in_s,
    })
}

/// One synchronous round.
pub fn step<F, W>(state: &SimulationState, g: &Graph, f: &F, raising: &RaisingConfig, weights: &W) -> SimulationState
where
    F: SpreadingFunction + ?Sized,
    W: EdgeWeights + ?Sized,
{
    let n = state.node_count();
    let t = state.t;
    let cap = f.estimate_cap();
    let mut next = SimulationState {
        t: t + 1,
        estimates: vec![0.0; n],
        tilde: vec![0.0; n],
        constraining: vec![0; n],
        in_a: vec![false; n],
        in_s: vec![false; n],
        in_r: vec![false; n],
    };
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut argmin = i;
        for e in g.neighbors(i) {
            let w = weights.weight(t, i, e.to, e.weight);
            let v = f.apply(state.estimates[e.to], w, e.to);
            // Strict `<` keeps the lowest index among equal minima.
            if v < best {
                best = v;
                argmin = e.to;
            }
        }
        let s = g.max_value(i);
        let tilde = s.clip(best);
        let previous = state.estimates[i];
        let (mut estimate, in_a, constraining) = if raising.accepts(previous, tilde) {
            let c = if s.is_attained_by(tilde) { i } else { argmin };
            (tilde, true, c)
        } else {
            (raising.g(previous), false, i)
        };
        if let Some(cap) = cap {
            estimate = estimate.min(cap);
        }
        next.tilde[i] = tilde;
        next.estimates[i] = estimate;
        next.in_a[i] = in_a;
        next.constraining[i] = constraining;
        next.in_s[i] = s.is_attained_by(estimate);
    }
    for i in 0..n {
        next.in_r[i] = next.in_s[i] || state.in_r[next.constraining[i]];
    }
    next
}

/// Called with the initial state and after every round.
pub trait Observer {
    fn observe(&mut self, state: &SimulationState);
}

impl<T: FnMut(&SimulationState)> Observer for T {
    fn observe(&mut self, state: &SimulationState) {
        self(state)
    }
}

/// Runs two observers side by side.
pub struct Both<'a, A: ?Sized, B: ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: Observer + ?Sized, B: Observer + ?Sized> Observer for Both<'_, A, B> {
    fn observe(&mut self, state: &SimulationState) {
        self.0.observe(state);
        self.1.observe(state);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub max_rounds: u64,
    /// Stop early once a round leaves every estimate unchanged. Only honoured
    /// for static edge weights, where such a state repeats forever.
    pub stop_at_fixpoint: bool,
}

impl RunOptions {
    pub fn new(max_rounds: u64) -> Self {
        Self { max_rounds, stop_at_fixpoint: false }
    }

    pub fn until_fixpoint(max_rounds: u64) -> Self {
        Self { max_rounds, stop_at_fixpoint: true }
    }
}

/// Iterates [`step`] from `initial`, calling `observer` on round 0 and on
/// every subsequent round. Returns the final state.
pub fn run<F, W, O>(
    g: &Graph,
    f: &F,
    raising: &RaisingConfig,
    initial: &[f64],
    options: RunOptions,
    weights: &W,
    observer: &mut O,
) -> Result<SimulationState>
where
    F: SpreadingFunction + ?Sized,
    W: EdgeWeights + ?Sized,
    O: Observer + ?Sized,
{
    if options.max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
    }
    let mut state = init(g, initial)?;
    observer.observe(&state);
    let stop_early = options.stop_at_fixpoint && weights.is_static();
    for _ in 0..options.max_rounds {
        let next = step(&state, g, f, raising, weights);
        let unchanged = next.estimates == state.estimates;
        state = next;
        observer.observe(&state);
        if stop_early && unchanged {
            break;
        }
    }
    Ok(state)
}

/// Keeps every `stride`-th round (and the last one seen) in memory.
#[derive(Debug, Clone)]
pub struct TrajectoryRecorder {
    stride: u64,
    rounds: Vec<SimulationState>,
    last: Option<SimulationState>,
}

impl TrajectoryRecorder {
    pub fn new(stride: u64) -> Self {
        Self { stride: stride.max(1), rounds: Vec::new(), last: None }
    }

    /// Recorded states in round order, including the final one.
    pub fn states(&self) -> Vec<&SimulationState> {
        let mut out: Vec<&SimulationState> = self.rounds.iter().collect();
        if let Some(last) = &self.last {
            if out.last().map(|s| s.t) != Some(last.t) {
                out.push(last);
            }
        }
        out
    }

    /// CSV with columns `round,node,estimate,tilde,in_A,in_R,constraining`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "node", "estimate", "tilde", "in_A", "in_R", "constraining"])?;
        for s in self.states() {
            for i in 0..s.node_count() {
                w.write_record([
                    s.t.to_string(),
                    i.to_string(),
                    format!("{:.17e}", s.estimates[i]),
                    format!("{:.17e}", s.tilde[i]),
                    u8::from(s.in_a[i]).to_string(),
                    u8::from(s.in_r[i]).to_string(),
                    s.constraining[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl Observer for TrajectoryRecorder {
    fn observe(&mut self, state: &SimulationState) {
        if state.t.is_multiple_of(self.stride) {
            self.rounds.push(state.clone());
            self.last = None;
        } else {
            self.last = Some(state.clone());
        }
    }
}

/// `|x̂_i − x_i| <= 1e-9·max(1, x_i)` for every node.
pub fn has_converged(estimates: &[f64], x: &[f64]) -> bool {
    estimates.len() == x.len() && estimates.iter().zip(x).all(|(&e, &v)| (e - v).abs() <= 1e-9 * v.abs().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::AbfSum;
    use crate::graph::MaxValue;

    /// Line A–B–C–D–E with unit edges and sources A, E at 0.
    fn line5() -> Graph {
        let mut s = vec![MaxValue::Infinite; 5];
        s[0] = MaxValue::Finite(0.0);
        s[4] = MaxValue::Finite(0.0);
        Graph::new(5, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)], s).unwrap()
    }

    #[test]
    fn raising_validation() {
        assert!(RaisingConfig::new(4.0, 0.0, 0.0).is_err());
        assert!(RaisingConfig::new(-1.0, 1.0, 0.0).is_err());
        assert!(RaisingConfig::new(4.0, 1.0, -0.5).is_err());
        assert!(RaisingConfig::new(4.0, 1.0, f64::INFINITY).is_ok());
        assert!(RaisingConfig::with_raise(4.0, 1.0, 0.0, Raise::Scaled { factor: 0.5 }).is_err());
        let r = RaisingConfig::with_raise(4.0, 1.0, 0.0, Raise::Scaled { factor: 2.0 }).unwrap();
        assert_eq!(r.g(3.0), 7.0);
    }

    #[test]
    fn init_sets() {
        let g = line5();
        let s = init(&g, &[0.0, 1.0, 3.0, 2.0, 0.0]).unwrap();
        assert_eq!(s.in_s(), &[true, false, false, false, true]);
        assert_eq!(s.in_r(), s.in_s());
        let s = init(&g, &[1.0, 1.0, 3.0, 2.0, 1.0]).unwrap();
        assert!(s.in_s().iter().all(|b| !b));
        assert!(init(&g, &[0.0, -1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(init(&g, &[0.0; 4]).is_err());
    }

    #[test]
    fn first_round_of_the_five_node_line() {
        let g = line5();
        let f = AbfSum::for_graph(&g).unwrap();
        let r = RaisingConfig::new(4.0, 1.0, 0.0).unwrap();
        let s0 = init(&g, &[0.0, 1.0, 3.0, 2.0, 0.0]).unwrap();
        let s1 = step(&s0, &g, &f, &r, &Unperturbed);
        assert_eq!(s1.estimates(), &[0.0, 1.0, 4.0, 3.0, 0.0]);
        assert_eq!(s1.in_a(), &[true, true, false, false, true]);
        assert_eq!(s1.constraining(), &[0, 0, 2, 3, 4]);
        assert_eq!(s1.in_r(), &[true, true, false, false, true]);
        assert_eq!(s1.unrooted().collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn two_node_raise_then_snap() {
        let g = Graph::new(2, &[(0, 1, 1.0)], vec![MaxValue::Finite(0.0), MaxValue::Infinite]).unwrap();
        let f = AbfSum::for_graph(&g).unwrap();
        let r = RaisingConfig::new(10.0, 1.0, 0.0).unwrap();
        let mut s = init(&g, &[0.0, 5.0]).unwrap();
        let mut seen = Vec::new();
        for _ in 0..7 {
            s = step(&s, &g, &f, &r, &Unperturbed);
            seen.push(s.estimates()[1]);
        }
        assert_eq!(seen, vec![6.0, 7.0, 8.0, 9.0, 10.0, 1.0, 1.0]);
    }

    #[test]
    fn source_clause_wins_exact_tie() {
        // Node 1 has s = 1 and a neighbor offering exactly 1.
        let g = Graph::new(2, &[(0, 1, 1.0)], vec![MaxValue::Finite(0.0), MaxValue::Finite(1.0)]).unwrap();
        let f = AbfSum::for_graph(&g).unwrap();
        let s0 = init(&g, &[0.0, 3.0]).unwrap();
        let s1 = step(&s0, &g, &f, &RaisingConfig::plain(), &Unperturbed);
        assert_eq!(s1.estimates()[1], 1.0);
        assert_eq!(s1.constraining()[1], 1);
        assert!(s1.in_s()[1] && s1.in_r()[1]);
    }

    #[test]
    fn lowest_index_breaks_neighbor_ties() {
        let mut s = vec![MaxValue::Infinite; 3];
        s[0] = MaxValue::Finite(0.0);
        s[1] = MaxValue::Finite(0.0);
        let g = Graph::new(3, &[(0, 2, 1.0), (1, 2, 1.0)], s).unwrap();
        let f = AbfSum::for_graph(&g).unwrap();
        let s1 = step(&init(&g, &[0.0, 0.0, 7.0]).unwrap(), &g, &f, &RaisingConfig::plain(), &Unperturbed);
        assert_eq!(s1.constraining()[2], 0);
    }

    #[test]
    fn recorder_csv() {
        let g = line5();
        let f = AbfSum::for_graph(&g).unwrap();
        let mut rec = TrajectoryRecorder::new(2);
        run(&g, &f, &RaisingConfig::plain(), &[0.0; 5], RunOptions::new(3), &Unperturbed, &mut rec).unwrap();
        let rounds: Vec<u64> = rec.states().iter().map(|s| s.t()).collect();
        assert_eq!(rounds, vec![0, 2, 3]);
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("round,node,estimate,tilde,in_A,in_R,constraining\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 5);
    }

    #[test]
    fn run_stops_at_fixpoint() {
        let g = line5();
        let f = AbfSum::for_graph(&g).unwrap();
        let mut rounds = 0;
        let end = run(
            &g,
            &f,
            &RaisingConfig::plain(),
            &[0.0, 9.0, 9.0, 9.0, 0.0],
            RunOptions::until_fixpoint(1000),
            &Unperturbed,
            &mut |_: &SimulationState| rounds += 1,
        )
        .unwrap();
        assert_eq!(end.estimates(), &[0.0, 1.0, 2.0, 1.0, 0.0]);
        assert!(rounds < 10);
    }
}
