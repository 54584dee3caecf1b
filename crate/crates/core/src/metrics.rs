//! Error functionals, event detection and invariant monitors.
//!
//! `Δ⁺(t) = max(0, max_i (x̂_i − x_i))` is the greatest overestimate and
//! `Δ⁻(t) = max(0, −min_i (x̂_i − x_i))` the greatest underestimate.

use std::io::Write;

use crate::engine::{Observer, SimulationState};
use crate::error::{Error, Result};

/// Default tolerance for "error is zero".
pub const DEFAULT_TOL: f64 = 1e-9;

/// `(Δ⁺, Δ⁻)`.
pub fn deltas(estimates: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    if estimates.len() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), actual: estimates.len() });
    }
    Ok(deltas_unchecked(estimates, x))
}

fn deltas_unchecked(estimates: &[f64], x: &[f64]) -> (f64, f64) {
    let mut plus: f64 = 0.0;
    let mut minus: f64 = 0.0;
    for (&e, &v) in estimates.iter().zip(x) {
        let d = e - v;
        plus = plus.max(d);
        minus = minus.max(-d);
    }
    (plus, minus)
}

/// Per-round error functionals, indexed by round.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSeries {
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub max_abs: Vec<f64>,
}

impl ErrorSeries {
    pub fn push(&mut self, estimates: &[f64], x: &[f64]) {
        let (p, m) = deltas_unchecked(estimates, x);
        self.delta_plus.push(p);
        self.delta_minus.push(m);
        self.max_abs.push(p.max(m));
    }

    pub fn len(&self) -> usize {
        self.delta_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_plus.is_empty()
    }
}

/// Observer that fills an [`ErrorSeries`] against a fixed reference.
#[derive(Debug, Clone)]
pub struct ErrorTracker<'a> {
    reference: &'a [f64],
    pub series: ErrorSeries,
}

impl<'a> ErrorTracker<'a> {
    pub fn new(reference: &'a [f64]) -> Self {
        Self { reference, series: ErrorSeries::default() }
    }
}

impl Observer for ErrorTracker<'_> {
    fn observe(&mut self, state: &SimulationState) {
        self.series.push(state.estimates(), self.reference);
    }
}

/// First round from which `values` stays `<= bound` for the rest of the
/// series.
pub fn settle_round(values: &[f64], bound: f64) -> Option<usize> {
    let last_above = values.iter().rposition(|&v| v > bound);
    match last_above {
        None if values.is_empty() => None,
        None => Some(0),
        Some(r) if r + 1 < values.len() => Some(r + 1),
        Some(_) => None,
    }
}

/// First round with both `Δ⁺` and `Δ⁻` at most `tol`, staying there.
pub fn convergence_round(series: &ErrorSeries, tol: f64) -> Option<usize> {
    settle_round(&series.max_abs, tol)
}

/// First round with `values[t] <= bound`; with `sustained`, the first round
/// after which the series never exceeds `bound` again.
pub fn time_below(values: &[f64], bound: f64, sustained: bool) -> Option<usize> {
    if sustained {
        settle_round(values, bound)
    } else {
        values.iter().position(|&v| v <= bound)
    }
}

/// Mean, min and max across trials, round by round. Shorter series are
/// padded with their last value (runs that stopped at a fixpoint).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Envelope {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Envelope {
    pub fn from_series<S: AsRef<[f64]>>(series: &[S]) -> Self {
        let rounds = series.iter().map(|s| s.as_ref().len()).max().unwrap_or(0);
        let mut acc = EnvelopeAccumulator::new(rounds);
        for s in series {
            acc.add(s.as_ref());
        }
        acc.finish()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Streaming form of [`Envelope::from_series`] for a known round count.
/// Series are folded in the order they are added, so a fixed order gives
/// bit-identical means.
#[derive(Debug, Clone)]
pub struct EnvelopeAccumulator {
    sum: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    count: usize,
}

impl EnvelopeAccumulator {
    pub fn new(rounds: usize) -> Self {
        Self {
            sum: vec![0.0; rounds],
            min: vec![f64::INFINITY; rounds],
            max: vec![f64::NEG_INFINITY; rounds],
            count: 0,
        }
    }

    /// Adds one series; rounds past its end repeat its last value, rounds
    /// past the accumulator's length are ignored. Empty series are skipped.
    pub fn add(&mut self, series: &[f64]) {
        let Some(&last) = series.last() else { return };
        for t in 0..self.sum.len() {
            let v = series.get(t).copied().unwrap_or(last);
            self.sum[t] += v;
            self.min[t] = self.min[t].min(v);
            self.max[t] = self.max[t].max(v);
        }
        self.count += 1;
    }

    pub fn finish(self) -> Envelope {
        let n = self.count as f64;
        if self.count == 0 {
            return Envelope::default();
        }
        Envelope { mean: self.sum.iter().map(|s| s / n).collect(), min: self.min, max: self.max }
    }
}

/// Writes `round,delta_plus_mean,delta_plus_min,delta_plus_max,
/// delta_minus_mean,delta_minus_min,delta_minus_max`.
pub fn write_envelope_csv<W: Write>(out: W, plus: &Envelope, minus: &Envelope) -> Result<()> {
    if plus.len() != minus.len() {
        return Err(Error::LengthMismatch { expected: plus.len(), actual: minus.len() });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "round",
        "delta_plus_mean",
        "delta_plus_min",
        "delta_plus_max",
        "delta_minus_mean",
        "delta_minus_min",
        "delta_minus_max",
    ])?;
    for t in 0..plus.len() {
        w.write_record([
            t.to_string(),
            fmt(plus.mean[t]),
            fmt(plus.min[t]),
            fmt(plus.max[t]),
            fmt(minus.mean[t]),
            fmt(minus.min[t]),
            fmt(minus.max[t]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.9e}")
}

/// Checks, round by round, the invariants that hold along any run:
///
/// * while `U(t)` is nonempty its minimum estimate is at least
///   `x̂_min(0) + min(σ, δ)·t`;
/// * once `U` is empty it stays empty;
/// * every rooted node carries at least its lower reference value;
/// * from round `t_star` on, every node does.
///
/// Without perturbation the lower reference is the stationary point `x`;
/// under perturbation it is the stationary point `X` of the shrunken graph.
#[derive(Debug, Clone)]
pub struct InvariantMonitor<'a> {
    lower: &'a [f64],
    growth: f64,
    t_star: u64,
    start_min: Option<f64>,
    unrooted_was_empty: bool,
    pub violations: Vec<String>,
    pub rounds_checked: u64,
}

/// Violations are compared with this relative slack to absorb rounding.
const SLACK: f64 = 1e-9;

impl<'a> InvariantMonitor<'a> {
    /// `growth` is `min(σ, δ)`; `t_star` the round after which all
    /// estimates must dominate `lower`.
    pub fn new(lower: &'a [f64], growth: f64, t_star: u64) -> Self {
        Self {
            lower,
            growth,
            t_star,
            start_min: None,
            unrooted_was_empty: false,
            violations: Vec::new(),
            rounds_checked: 0,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, message: String) {
        if self.violations.len() < 32 {
            self.violations.push(message);
        }
    }
}

impl Observer for InvariantMonitor<'_> {
    fn observe(&mut self, state: &SimulationState) {
        let t = state.t();
        let est = state.estimates();
        self.rounds_checked += 1;
        let unrooted_min = state.unrooted().map(|i| est[i]).fold(f64::INFINITY, f64::min);
        if t == 0 {
            self.start_min = unrooted_min.is_finite().then_some(unrooted_min);
        }
        let empty = state.unrooted_is_empty();
        if self.unrooted_was_empty && !empty {
            self.record(format!("round {t}: unrooted set became nonempty again"));
        }
        self.unrooted_was_empty = empty;
        if let (false, Some(start)) = (empty, self.start_min) {
            let floor = start + self.growth * t as f64;
            if unrooted_min < floor - SLACK * floor.abs().max(1.0) {
                self.record(format!("round {t}: unrooted minimum {unrooted_min} below {floor}"));
            }
        }
        for (i, (&e, &lo)) in est.iter().zip(self.lower).enumerate() {
            let tol = SLACK * lo.abs().max(1.0);
            if e < lo - tol {
                if state.in_r()[i] {
                    self.record(format!("round {t}: rooted node {i} underestimates ({e} < {lo})"));
                } else if t >= self.t_star {
                    self.record(format!("round {t}: node {i} underestimates after {} ({e} < {lo})", self.t_star));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert_eq!(deltas(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert_eq!(deltas(&[3.0, 1.0], &[2.0, 2.0]).unwrap(), (1.0, 1.0));
        assert_eq!(deltas(&[1.5, 2.5], &[1.0, 2.0]).unwrap(), (0.5, 0.0));
        assert!(deltas(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn settle_and_time_below() {
        assert_eq!(time_below(&[0.1, 0.1, 0.1], 0.5, true), Some(0));
        let decreasing: Vec<f64> = (0..12).map(|t| 10.0 - t as f64).collect();
        assert_eq!(time_below(&decreasing, 3.0, false), Some(7));
        assert_eq!(time_below(&decreasing, 3.0, true), Some(7));
        let bouncing = [5.0, 1.0, 5.0, 1.0, 1.0];
        assert_eq!(time_below(&bouncing, 2.0, false), Some(1));
        assert_eq!(time_below(&bouncing, 2.0, true), Some(3));
        assert_eq!(time_below(&[1.0, 5.0], 2.0, true), None);
        assert_eq!(time_below(&[], 2.0, true), None);
    }

    #[test]
    fn convergence_round_requires_staying_converged() {
        let mut s = ErrorSeries::default();
        for e in [[2.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]] {
            s.push(&e, &[0.0, 0.0]);
        }
        assert_eq!(convergence_round(&s, DEFAULT_TOL), Some(3));
        let mut zero = ErrorSeries::default();
        zero.push(&[1.0], &[1.0]);
        assert_eq!(convergence_round(&zero, DEFAULT_TOL), Some(0));
    }

    #[test]
    fn envelope_pads_with_last_value() {
        let env = Envelope::from_series(&[vec![4.0, 2.0, 0.0], vec![2.0]]);
        assert_eq!(env.mean, vec![3.0, 2.0, 1.0]);
        assert_eq!(env.min, vec![2.0, 2.0, 0.0]);
        assert_eq!(env.max, vec![4.0, 2.0, 2.0]);
        let mut buf = Vec::new();
        write_envelope_csv(&mut buf, &env, &env).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
