//! Property tests over random small graphs and random runs.

use proptest::prelude::*;
use spreading::engine::{has_converged, Both, Unperturbed};
use spreading::metrics::{convergence_round, deltas, time_below, Envelope, ErrorTracker, InvariantMonitor};
use spreading::oracle::{convergence_time_bound, fixpoint_sweep, stationary_bruteforce, ultimate_bound};
use spreading::{
    run, stationary, AbfSum, Graph, Hazard, MaxValue, MostProbablePath, PerturbationKind, PerturbationModel,
    RaisingConfig, RunOptions, SpreadingFunction,
};

/// Connected graph: a random spanning tree plus extra edges, one to three
/// finite maximum values.
fn small_graph(max_nodes: usize, weight: std::ops::Range<f64>) -> impl Strategy<Value = Graph> {
    (2..=max_nodes).prop_flat_map(move |n| {
        let parents = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n), 0..n * 2);
        let weights = proptest::collection::vec(weight.clone(), n * 3);
        let sources = proptest::collection::vec((0..n, 0.0..2.0f64), 1..=3);
        (Just(n), parents, extra, weights, sources).prop_map(|(n, parents, extra, weights, sources)| {
            let mut edges = Vec::new();
            let mut seen = std::collections::HashSet::new();
            let mut w = weights.into_iter().cycle();
            for (child, p) in (1..n).zip(parents) {
                let parent = p.index(child);
                seen.insert((parent, child));
                edges.push((parent, child, w.next().unwrap()));
            }
            for (a, b) in extra {
                let key = (a.min(b), a.max(b));
                if a != b && seen.insert(key) {
                    edges.push((key.0, key.1, w.next().unwrap()));
                }
            }
            let mut s = vec![MaxValue::Infinite; n];
            for (i, v) in sources {
                s[i] = MaxValue::Finite(v);
            }
            Graph::new(n, &edges, s).unwrap()
        })
    })
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn text_format_round_trips(g in small_graph(9, 0.01..3.0)) {
        let back = Graph::from_text(&g.to_text()).unwrap();
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        prop_assert_eq!(back.max_values(), g.max_values());
    }

    #[test]
    fn abf_oracles_agree(g in small_graph(8, 0.05..2.0)) {
        let f = AbfSum::for_graph(&g).unwrap();
        let a = stationary(&g, &f).unwrap();
        prop_assert!(close(&a.x, &stationary_bruteforce(&g, &f).unwrap()));
        prop_assert!(close(&a.x, &fixpoint_sweep(&g, &f)));
        prop_assert_eq!(a.layers.iter().map(Vec::len).sum::<usize>(), g.node_count());
    }

    #[test]
    fn mpp_oracles_agree(g in small_graph(8, 0.05..0.95)) {
        let g = g.with_max_values(
            g.max_values().iter().map(|s| match s {
                MaxValue::Finite(v) => MaxValue::Finite(v / 4.0),
                MaxValue::Infinite => MaxValue::Infinite,
            }).collect(),
        ).unwrap();
        let f = MostProbablePath::for_graph(&g, 0.5).unwrap();
        let a = stationary(&g, &f).unwrap();
        prop_assert!(close(&a.x, &stationary_bruteforce(&g, &f).unwrap()));
        prop_assert!(close(&a.x, &fixpoint_sweep(&g, &f)));
    }

    #[test]
    fn hazard_oracles_agree(g in small_graph(8, 0.05..2.0), zone_bits in any::<u8>()) {
        let zone = (0..g.node_count()).map(|i| zone_bits >> i & 1 == 1).collect();
        let f = Hazard::for_graph(&g, zone).unwrap();
        let a = stationary(&g, &f).unwrap();
        prop_assert!(close(&a.x, &stationary_bruteforce(&g, &f).unwrap()));
        prop_assert!(close(&a.x, &fixpoint_sweep(&g, &f)));
    }

    #[test]
    fn general_block_converges_within_bound(
        g in small_graph(8, 0.05..2.0),
        m_frac in 0.0..2.0f64,
        delta in 0.05..2.0f64,
        deadzone in prop_oneof![Just(0.0), 0.0..1.0f64],
        init in proptest::collection::vec(0.0..1.0f64, 8),
    ) {
        let f = AbfSum::for_graph(&g).unwrap();
        let a = stationary(&g, &f).unwrap();
        let top = 2.0 * a.x_max.max(0.1);
        let raising = RaisingConfig::new(m_frac * a.x_max, delta, deadzone).unwrap();
        let initial: Vec<f64> = init[..g.node_count()].iter().map(|u| u * top).collect();
        let bound = convergence_time_bound(&g, &a, &raising, f.sigma(), &initial);
        let mut tracker = ErrorTracker::new(&a.x);
        let mut monitor = InvariantMonitor::new(&a.x, f.sigma().min(delta), bound.t_star);
        let end = run(&g, &f, &raising, &initial, RunOptions::new(bound.total() + 1), &Unperturbed,
            &mut Both(&mut tracker, &mut monitor)).unwrap();
        prop_assert!(has_converged(end.estimates(), &a.x));
        let c = convergence_round(&tracker.series, 1e-9);
        prop_assert!(c.is_some_and(|c| c as u64 <= bound.total()), "converged {:?}, bound {}", c, bound.total());
        prop_assert!(monitor.is_clean(), "{:?}", monitor.violations);
    }

    #[test]
    fn shrunken_fixpoint_is_dominated(g in small_graph(8, 0.05..2.0), frac in 0.0..0.99f64) {
        let f = AbfSum::for_graph(&g).unwrap();
        let eps = frac * g.e_min();
        let ub = ultimate_bound(&g, &f, eps).unwrap();
        for (lo, hi) in ub.shrunk.x.iter().zip(&ub.nominal.x) {
            prop_assert!(*lo <= hi + 1e-12);
            // Additive distance: every path is at most D − 1 edges deep in
            // its layer, so the shift is bounded by the combined bound.
            prop_assert!(hi - lo <= ub.combined + 1e-9);
        }
    }

    #[test]
    fn perturbation_stays_in_range(eps in 0.0..1.0f64, seed in any::<u64>(), t in 0u64..1000, i in 0usize..50, k in 0usize..50) {
        let sym = PerturbationModel::new(PerturbationKind::UniformSymmetric, eps, seed).unwrap();
        let pos = PerturbationModel::new(PerturbationKind::UniformPositive, eps, seed).unwrap();
        let a = sym.sample(t, i, k);
        let b = pos.sample(t, i, k);
        prop_assert!((-eps..=eps).contains(&a));
        prop_assert!((0.0..=eps).contains(&b));
        prop_assert_eq!(a, sym.sample(t, i, k));
    }

    #[test]
    fn deltas_bracket_the_error(pairs in proptest::collection::vec((0.0..10.0f64, 0.0..10.0f64), 1..20)) {
        let (est, x): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (plus, minus) = deltas(&est, &x).unwrap();
        prop_assert!(plus >= 0.0 && minus >= 0.0);
        for (e, v) in est.iter().zip(&x) {
            prop_assert!(e - v <= plus && v - e <= minus);
        }
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.5).collect();
        let (up, down) = deltas(&shifted, &x).unwrap();
        prop_assert!((up - 1.5).abs() < 1e-12 && down == 0.0);
    }

    #[test]
    fn envelope_orders_min_mean_max(series in proptest::collection::vec(proptest::collection::vec(0.0..5.0f64, 1..30), 1..8)) {
        let env = Envelope::from_series(&series);
        for r in 0..env.len() {
            prop_assert!(env.min[r] <= env.mean[r] + 1e-12 && env.mean[r] <= env.max[r] + 1e-12);
        }
    }

    #[test]
    fn sustained_time_below_is_never_earlier(values in proptest::collection::vec(0.0..2.0f64, 1..50), bound in 0.0..2.0f64) {
        let first = time_below(&values, bound, false);
        let sustained = time_below(&values, bound, true);
        if let Some(s) = sustained {
            prop_assert!(first.is_some_and(|f| f <= s));
            prop_assert!(values[s..].iter().all(|&v| v <= bound));
        }
    }
}
