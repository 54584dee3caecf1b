//! Spreading functions `f(a, b)`.
//!
//! `a` is a neighbor's estimate and `b` the weight of the edge to it. Every
//! instance is progressive (`f(a, b) >= a + σ` on its admissible domain) and
//! nondecreasing in `a`. The neighbor index is passed as well because the
//! hazard rule treats neighbors inside a zone differently; the other
//! functions ignore it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub trait SpreadingFunction: Send + Sync {
    /// `f(a, b)` for a message coming from `neighbor`.
    fn apply(&self, a: f64, b: f64, neighbor: usize) -> f64;

    /// Progressivity margin σ.
    fn sigma(&self) -> f64;

    /// Lipschitz constant in the edge weight (L1).
    fn edge_lipschitz(&self) -> f64;

    /// Lipschitz constant in the estimate (L2).
    fn estimate_lipschitz(&self) -> f64;

    /// True iff `f` is nondecreasing in the edge weight.
    fn monotone_in_weight(&self) -> bool;

    /// Upper clamp the simulator applies to estimates, if any.
    fn estimate_cap(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> FunctionName;
}

/// Additive distance: `f(a, b) = a + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbfSum {
    sigma: f64,
}

impl AbfSum {
    /// `sigma` must be a lower bound on every edge weight.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// σ = the graph's smallest edge weight.
    pub fn for_graph(g: &Graph) -> Result<Self> {
        Self::new(g.e_min())
    }
}

impl SpreadingFunction for AbfSum {
    #[inline]
    fn apply(&self, a: f64, b: f64, _neighbor: usize) -> f64 {
        a + b
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn edge_lipschitz(&self) -> f64 {
        1.0
    }

    fn estimate_lipschitz(&self) -> f64 {
        1.0
    }

    fn monotone_in_weight(&self) -> bool {
        true
    }

    fn name(&self) -> FunctionName {
        FunctionName::Abf
    }
}

/// Most probable path: `f(a, b) = 1 − (1 − a)·b` where `b` is a link
/// success probability and `a` a failure probability.
///
/// `f(a, b) − a = (1 − a)(1 − b)`, so progressivity with a uniform margin
/// only holds on a restricted estimate domain `a <= a_max < 1`. The margin
/// is `σ = min over edges (1 − a_max)(1 − b)`. Estimates are capped at 1 by
/// the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MostProbablePath {
    sigma: f64,
    a_max: f64,
}

impl MostProbablePath {
    /// Rejects graphs with a weight outside `(0, 1)` and `a_max` outside
    /// `[0, 1)`.
    pub fn for_graph(g: &Graph, a_max: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a_max) {
            return Err(Error::InvalidArgument(format!("a_max must lie in [0, 1), got {a_max}")));
        }
        let mut b_max: f64 = 0.0;
        for (i, j, w) in g.edges() {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "most-probable-path weights must lie in (0, 1); edge {i}-{j} has {w}"
                )));
            }
            b_max = b_max.max(w);
        }
        Ok(Self { sigma: (1.0 - a_max) * (1.0 - b_max), a_max })
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }
}

impl SpreadingFunction for MostProbablePath {
    #[inline]
    fn apply(&self, a: f64, b: f64, _neighbor: usize) -> f64 {
        1.0 - (1.0 - a) * b
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn edge_lipschitz(&self) -> f64 {
        1.0
    }

    fn estimate_lipschitz(&self) -> f64 {
        1.0
    }

    fn monotone_in_weight(&self) -> bool {
        false
    }

    fn estimate_cap(&self) -> Option<f64> {
        Some(1.0)
    }

    fn name(&self) -> FunctionName {
        FunctionName::Mpp
    }
}

/// Zone-avoiding distance. Messages from neighbors outside the zone cost
/// `a + b`; messages from neighbors inside cost `h(a + scale·b)` where
/// `h(y) = y^exponent` for `y > 1` and `y` otherwise.
///
/// The Lipschitz constants depend on how large `a + scale·b` can get, so
/// they are computed for a declared upper bound `cap` on that argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Hazard {
    zone: Vec<bool>,
    scale: f64,
    exponent: f64,
    sigma: f64,
    cap: f64,
}

impl Hazard {
    pub const DEFAULT_SCALE: f64 = 1000.0;
    pub const DEFAULT_EXPONENT: f64 = 1.5;

    pub fn new(zone: Vec<bool>, scale: f64, exponent: f64, sigma: f64, cap: f64) -> Result<Self> {
        if !(scale >= 1.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("hazard scale must be >= 1, got {scale}")));
        }
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::InvalidArgument(format!("hazard exponent must be >= 1, got {exponent}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        if !(cap >= 1.0 && cap.is_finite()) {
            return Err(Error::InvalidArgument(format!("hazard cap must be >= 1, got {cap}")));
        }
        Ok(Self { zone, scale, exponent, sigma, cap })
    }

    /// Default scale and exponent, σ = e_min, and a Lipschitz cap large
    /// enough for any simple path in `g` entirely inside the zone.
    pub fn for_graph(g: &Graph, zone: Vec<bool>) -> Result<Self> {
        if zone.len() != g.node_count() {
            return Err(Error::LengthMismatch { expected: g.node_count(), actual: zone.len() });
        }
        let total: f64 = g.edges().map(|(_, _, w)| w).sum();
        let s_max = g.max_values().iter().filter_map(|s| s.finite()).fold(0.0, f64::max);
        let cap = (s_max + Self::DEFAULT_SCALE * total).max(1.0);
        Self::new(zone, Self::DEFAULT_SCALE, Self::DEFAULT_EXPONENT, g.e_min(), cap)
    }

    pub fn zone(&self) -> &[bool] {
        &self.zone
    }

    pub fn in_zone(&self, node: usize) -> bool {
        self.zone.get(node).copied().unwrap_or(false)
    }

    /// The amplifier `h`.
    #[inline]
    pub fn amplify(&self, y: f64) -> f64 {
        if y > 1.0 {
            y.powf(self.exponent)
        } else {
            y
        }
    }
}

impl SpreadingFunction for Hazard {
    #[inline]
    fn apply(&self, a: f64, b: f64, neighbor: usize) -> f64 {
        if self.in_zone(neighbor) {
            self.amplify(a + self.scale * b)
        } else {
            a + b
        }
    }

    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn edge_lipschitz(&self) -> f64 {
        self.scale * self.estimate_lipschitz()
    }

    fn estimate_lipschitz(&self) -> f64 {
        // h'(y) = exponent·y^(exponent−1) for y > 1, at most at y = cap.
        (self.exponent * self.cap.powf(self.exponent - 1.0)).max(1.0)
    }

    fn monotone_in_weight(&self) -> bool {
        true
    }

    fn name(&self) -> FunctionName {
        FunctionName::Hazard
    }
}

/// Function selector used in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionName {
    Abf,
    Mpp,
    Hazard,
}

impl fmt::Display for FunctionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionName::Abf => "abf",
            FunctionName::Mpp => "mpp",
            FunctionName::Hazard => "hazard",
        })
    }
}

impl FromStr for FunctionName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abf" => Ok(FunctionName::Abf),
            "mpp" => Ok(FunctionName::Mpp),
            "hazard" => Ok(FunctionName::Hazard),
            other => Err(Error::InvalidArgument(format!("unknown function `{other}` (expected abf, mpp or hazard)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MaxValue;
    use proptest::prelude::*;

    fn hazard_with_zone() -> Hazard {
        Hazard::new(vec![false, true], 1000.0, 1.5, 1e-4, 1e4).unwrap()
    }

    #[test]
    fn abf_values() {
        let f = AbfSum::new(0.1).unwrap();
        assert_eq!(f.apply(0.0, 1.0, 0), 1.0);
        assert_eq!(f.apply(3.5, 0.25, 0), 3.75);
    }

    #[test]
    fn mpp_values() {
        let g = Graph::new(2, &[(0, 1, 0.9)], vec![MaxValue::Finite(0.0), MaxValue::Infinite]).unwrap();
        let f = MostProbablePath::for_graph(&g, 0.5).unwrap();
        assert!((f.apply(0.0, 0.9, 0) - 0.1).abs() < 1e-15);
        assert!((f.apply(0.1, 0.5, 0) - 0.55).abs() < 1e-15);
        assert!((f.sigma() - 0.05).abs() < 1e-15);
        assert!(!f.monotone_in_weight());

        let bad = Graph::new(2, &[(0, 1, 1.5)], vec![MaxValue::Finite(0.0), MaxValue::Infinite]).unwrap();
        assert!(MostProbablePath::for_graph(&bad, 0.5).is_err());
    }

    #[test]
    fn hazard_values() {
        let f = hazard_with_zone();
        assert!((f.apply(0.2, 0.3, 0) - 0.5).abs() < 1e-15);
        assert!((f.apply(0.0, 0.002, 1) - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((f.apply(0.0, 0.002, 1) - 2.8284).abs() < 1e-4);
        assert!((f.apply(0.0, 0.0005, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn names_parse() {
        for name in [FunctionName::Abf, FunctionName::Mpp, FunctionName::Hazard] {
            assert_eq!(name.to_string().parse::<FunctionName>().unwrap(), name);
        }
        assert!("dijkstra".parse::<FunctionName>().is_err());
    }

    /// Progressivity, first-argument monotonicity and both Lipschitz
    /// inequalities, checked at one sample.
    fn check_axioms(f: &dyn SpreadingFunction, a1: f64, a2: f64, b1: f64, b2: f64, k: usize) {
        let slack = 1e-9;
        let y = f.apply(a1, b1, k);
        assert!(y.is_finite());
        assert!(y >= a1 + f.sigma() - slack * (1.0 + a1.abs()), "progressivity at a={a1} b={b1}");
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        assert!(f.apply(hi, b1, k) >= f.apply(lo, b1, k));
        let db = (f.apply(a1, b1, k) - f.apply(a1, b2, k)).abs();
        assert!(db <= f.edge_lipschitz() * (b1 - b2).abs() * (1.0 + slack) + slack);
        let da = (f.apply(a1, b1, k) - f.apply(a2, b1, k)).abs();
        assert!(da <= f.estimate_lipschitz() * (a1 - a2).abs() * (1.0 + slack) + slack);
        if f.monotone_in_weight() {
            let (blo, bhi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            assert!(f.apply(a1, bhi, k) >= f.apply(a1, blo, k));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn abf_axioms(a1 in 0.0..100.0f64, a2 in 0.0..100.0f64, b1 in 0.1..10.0f64, b2 in 0.1..10.0f64) {
            let f = AbfSum::new(0.1).unwrap();
            check_axioms(&f, a1, a2, b1, b2, 0);
            // Linear in b: f(a, b) − f(a, b') = b − b'.
            prop_assert!(((f.apply(a1, b1, 0) - f.apply(a1, b2, 0)) - (b1 - b2)).abs() < 1e-12);
        }

        #[test]
        fn mpp_axioms(a1 in 0.0..0.9f64, a2 in 0.0..0.9f64, b1 in 0.05..0.95f64, b2 in 0.05..0.95f64) {
            let g = Graph::new(3, &[(0, 1, 0.05), (1, 2, 0.95)], vec![MaxValue::Finite(0.0); 3]).unwrap();
            let f = MostProbablePath::for_graph(&g, 0.9).unwrap();
            check_axioms(&f, a1, a2, b1, b2, 0);
        }

        #[test]
        fn hazard_axioms(a1 in 0.0..5.0f64, a2 in 0.0..5.0f64, b1 in 1e-4..0.6f64, b2 in 1e-4..0.6f64, k in 0usize..2) {
            // a + 1000·b stays below 605 here, well inside the declared cap.
            let f = hazard_with_zone();
            check_axioms(&f, a1, a2, b1, b2, k);
        }
    }
}
