//! Round-synchronous simulator for the raising-augmented spreading block.
//!
//! A spreading block propagates values outward from nodes with finite
//! maximum values: every round each node takes the minimum of
//! `f(neighbor estimate, edge weight)` over its neighbors, clipped by its own
//! maximum value. The general block adds a raising gate (threshold `M`,
//! step `δ`, dead zone `D`) that pushes stale underestimates upward quickly.
//!
//! The crate is organised as:
//!
//! * [`graph`] – weighted undirected graphs, geometric generation, shrunken
//!   variants, the text serialization format;
//! * [`functions`] – spreading functions (`abf`, `mpp`, `hazard`);
//! * [`engine`] – the synchronous update with full per-round bookkeeping;
//! * [`oracle`] – the unique stationary point computed independently of the
//!   simulator, layer structure, convergence-time and ultimate bounds;
//! * [`perturb`] – bounded per-round edge noise;
//! * [`metrics`] – error functionals, event detection, invariant monitors;
//! * `experiments` – declarative studies and the `spreadsim` CLI.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
#[cfg(feature = "experiments")]
pub mod experiments;
pub mod functions;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod perturb;
pub mod rng;

pub use engine::{init, run, step, RaisingConfig, RunOptions, SimulationState};
pub use error::{Error, Result};
pub use functions::{AbfSum, FunctionName, Hazard, MostProbablePath, SpreadingFunction};
pub use graph::{generate_geometric, GeometricConfig, Graph, MaxValue};
pub use oracle::{stationary, StationaryAnalysis};
pub use perturb::{PerturbationKind, PerturbationModel};
