//! Bounded per-round edge noise.
//!
//! The weight node `i` sees for neighbor `k` in round `t` is
//! `e_ik + ε_ik(t)` with `|ε_ik(t)| <= ε < e_min`. Each sample is a pure
//! function of `(seed, t, i, k)`, so the two directions of an edge are
//! independent and any round can be replayed without storing samples.

use serde::{Deserialize, Serialize};

use crate::engine::EdgeWeights;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    /// `ε_ik(t) ~ U[−ε, ε]`.
    UniformSymmetric,
    /// `ε_ik(t) ~ U[0, ε]`.
    UniformPositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationModel {
    pub kind: PerturbationKind,
    pub eps: f64,
    pub seed: u64,
}

impl PerturbationModel {
    pub fn none() -> Self {
        Self { kind: PerturbationKind::None, eps: 0.0, seed: 0 }
    }

    pub fn new(kind: PerturbationKind, eps: f64, seed: u64) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("perturbation bound must be finite and >= 0, got {eps}")));
        }
        Ok(Self { kind, eps, seed })
    }

    /// The bound actually in effect (zero for `None`).
    pub fn bound(&self) -> f64 {
        match self.kind {
            PerturbationKind::None => 0.0,
            _ => self.eps,
        }
    }

    /// `ε_ik(t)`.
    #[inline]
    pub fn sample(&self, t: u64, i: usize, k: usize) -> f64 {
        let key = [self.seed, t, i as u64, k as u64];
        match self.kind {
            PerturbationKind::None => 0.0,
            PerturbationKind::UniformPositive => rng::uniform(&key, 0.0, self.eps),
            PerturbationKind::UniformSymmetric => rng::uniform(&key, -self.eps, self.eps),
        }
    }

    /// Edge provider for `g`; rejects `ε >= e_min`.
    pub fn edge_view(&self, g: &Graph) -> Result<EdgeView> {
        let eps = self.bound();
        if eps >= g.e_min() {
            return Err(Error::PerturbationTooLarge { eps, e_min: g.e_min() });
        }
        Ok(EdgeView { model: *self })
    }
}

/// Perturbed weights for one graph, validated against its `e_min`.
#[derive(Debug, Clone, Copy)]
pub struct EdgeView {
    model: PerturbationModel,
}

impl EdgeView {
    pub fn model(&self) -> &PerturbationModel {
        &self.model
    }
}

impl EdgeWeights for EdgeView {
    #[inline]
    fn weight(&self, t: u64, i: usize, k: usize, nominal: f64) -> f64 {
        nominal + self.model.sample(t, i, k)
    }

    fn is_static(&self) -> bool {
        self.model.kind == PerturbationKind::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MaxValue;

    fn pair(w: f64) -> Graph {
        Graph::new(2, &[(0, 1, w)], vec![MaxValue::Finite(0.0), MaxValue::Infinite]).unwrap()
    }

    #[test]
    fn none_is_exact() {
        let v = PerturbationModel::none().edge_view(&pair(1.0)).unwrap();
        for t in 0..100 {
            assert_eq!(v.weight(t, 0, 1, 1.0), 1.0);
        }
        assert!(v.is_static());
    }

    #[test]
    fn rejects_eps_at_or_above_e_min() {
        let m = PerturbationModel::new(PerturbationKind::UniformPositive, 1.0, 0).unwrap();
        assert!(matches!(m.edge_view(&pair(1.0)), Err(Error::PerturbationTooLarge { .. })));
        assert!(PerturbationModel::new(PerturbationKind::UniformPositive, -1.0, 0).is_err());
    }

    #[test]
    fn replayable_and_asymmetric() {
        let m = PerturbationModel::new(PerturbationKind::UniformSymmetric, 0.1, 9).unwrap();
        assert_eq!(m.sample(5, 2, 3), m.sample(5, 2, 3));
        let differ = (0..100).filter(|&t| m.sample(t, 2, 3) != m.sample(t, 3, 2)).count();
        assert!(differ > 95);
    }

    #[test]
    fn bounds_and_mean_over_a_million_draws() {
        let e_min = 2.9e-3;
        let eps = 0.05 * e_min;
        let pos = PerturbationModel::new(PerturbationKind::UniformPositive, eps, 17).unwrap();
        let sym = PerturbationModel::new(PerturbationKind::UniformSymmetric, eps, 17).unwrap();
        let mut sum = 0.0;
        let draws = 1_000_000u64;
        for d in 0..draws {
            let (t, i) = (d / 1000, (d % 1000) as usize);
            let p = pos.sample(t, i, i + 1);
            assert!((0.0..=eps).contains(&p));
            let s = sym.sample(t, i, i + 1);
            assert!((-eps..=eps).contains(&s));
            sum += p;
        }
        let mean = sum / draws as f64;
        assert!((mean - eps / 2.0).abs() <= 0.01 * eps / 2.0, "mean {mean}");
    }
}
