//! Adaptive influence maximization under `(k, d)` feedback on the Independent
//! Cascade model.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] - immutable directed graphs with per-edge activation
//!   probabilities, edge-list ingestion and test-instance generators.
//! * [`realization`] - observed edge states, statuses and their algebra.
//! * [`diffusion`] - round-by-round IC semantics, active-node counting and the
//!   exact / Monte Carlo expected-marginal estimators.
//! * [`rrset`] - reverse-reachable sets conditioned on a status and the
//!   coverage-based greedy selection built on them.
//! * [`policy`] - the Greedy, HighDegree and Random seeding policies.
//! * [`process`] - the `(π, k, d)` seeding process, its lazy variant and
//!   replicate aggregation.
//! * [`tree`] - an exact decision-tree laboratory for tiny instances: tree
//!   profit, conditioning, concatenation, regret ratios and bound checks.
//! * [`verify`] - the enumerable-instance verification battery.
//!
//! Data-parallel loops (RR-set generation, Monte Carlo replicates) run on rayon
//! when the `parallel` feature is enabled and fall back to plain iteration
//! otherwise. Results never depend on the worker count: every sample owns a
//! random stream derived from `(seed, sample index)`.

pub mod diffusion;
pub mod exec;
pub mod graph;
pub mod policy;
pub mod process;
pub mod realization;
pub mod rng;
pub mod rrset;
pub mod tree;
pub mod verify;

pub use diffusion::DiffusionError;
pub use exec::Exec;
pub use graph::{EdgeId, Graph, GraphError, NodeId, ProbabilityModel};
pub use policy::PolicyKind;
pub use process::{DiffusionTrace, FeedbackSchedule};
pub use realization::{EdgeState, Horizon, Realization, Status};
