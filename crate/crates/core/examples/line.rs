//! Runs the general block on a five-node line and prints every round.

use spreading::engine::{has_converged, Unperturbed};
use spreading::{run, stationary, AbfSum, Graph, MaxValue, RaisingConfig, RunOptions, SimulationState};

fn main() -> spreading::Result<()> {
    // A-B-C-D-E with unit edges; A and E are sources.
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0)];
    let mut s = vec![MaxValue::Infinite; 5];
    s[0] = MaxValue::Finite(0.0);
    s[4] = MaxValue::Finite(0.0);
    let g = Graph::new(5, &edges, s)?;

    let f = AbfSum::for_graph(&g)?;
    let truth = stationary(&g, &f)?;
    let raising = RaisingConfig::new(4.0, 1.0, 0.0)?;
    let initial = [0.0, 1.0, 3.0, 2.0, 0.0];
    let end = run(&g, &f, &raising, &initial, RunOptions::new(10), &Unperturbed, &mut |s: &SimulationState| {
        println!("round {}: {:?}", s.t(), s.estimates());
    })?;
    assert!(has_converged(end.estimates(), &truth.x));
    Ok(())
}
