//! Simulation and exact analysis of dynamic alternative routing on the
//! complete graph.
//!
//! Calls between every pair of nodes arrive as independent Poisson streams
//! and hold for exponential times. A call first tries its direct link; when
//! that is full it is diverted over two-hop paths through intermediate
//! nodes. Sequential first-fit probing (DAR) is compared with best-of-d
//! probing (BDAR, and BDAR* which skips the direct link).
//!
//! - [`model`]: network state, edge indexing, admissions and departures.
//! - [`policy`]: the three admission policies.
//! - [`engine`]: discrete-event simulator.
//! - [`metrics`]: max load, per-node tallies, blocking and batch-means CIs.
//! - [`oracle`]: exact CTMC for tiny networks and the Erlang-B formula.
//! - [`asymptotics`]: load schedule, capacity bounds and the drift check.
//! - [`harness`]: experiments, sweeps and result tables.

pub mod asymptotics;
pub mod engine;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod policy;
mod queue;

pub use engine::{Counters, Engine, EpochSample, EventOutcome, RunReport};
pub use error::{Error, Result};
pub use model::{
    edge_index, lyapunov_v, new_network, Call, CallId, Capacity, EdgeId, NetworkState, Pair,
    PolicyKind, ProbeSampling, Route, SimParams,
};
pub use policy::{decide, path_load, RouteDecision};
