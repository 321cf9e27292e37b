//! Seeding policies: one inactive node per decision.

use rand::Rng;
use thiserror::Error;

use crate::exec::Exec;
use crate::graph::{Graph, NodeId};
use crate::realization::{DenseStatus, Horizon, Status};
use crate::rng;
use crate::rrset::{argmax_inactive, greedy_select_dense};

pub const DEFAULT_RR_SAMPLES: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("no inactive node left to seed")]
    NoInactiveNode,
    #[error("greedy needs at least one RR-set per decision")]
    ZeroSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    /// Maximizes the RR-set estimate of `Δf_∞` given the current status.
    Greedy { n_samples: usize },
    /// Inactive node of largest out-degree.
    HighDegree,
    /// Uniform inactive node.
    Random,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Greedy { .. } => "greedy",
            PolicyKind::HighDegree => "degree",
            PolicyKind::Random => "random",
        }
    }
}

/// Chooses the next seed for the status `st`. `seed` drives any randomness.
pub fn decide_dense(kind: PolicyKind, g: &Graph, st: &DenseStatus, seed: u64, exec: Exec) -> Result<NodeId, PolicyError> {
    if st.active_count == g.node_count() {
        return Err(PolicyError::NoInactiveNode);
    }
    match kind {
        PolicyKind::Greedy { n_samples: 0 } => Err(PolicyError::ZeroSamples),
        PolicyKind::Greedy { n_samples } => {
            greedy_select_dense(g, st, Horizon::Unbounded, n_samples, seed, exec).map_err(|_| PolicyError::NoInactiveNode)
        }
        PolicyKind::HighDegree => {
            let degree: Vec<usize> = (0..g.node_count()).map(|v| g.out_degree(v)).collect();
            argmax_inactive(st, &degree).ok_or(PolicyError::NoInactiveNode)
        }
        PolicyKind::Random => {
            let inactive = g.node_count() - st.active_count;
            let pick = rng::stream(seed, 0).gen_range(0..inactive);
            st.inactive_nodes().nth(pick).ok_or(PolicyError::NoInactiveNode)
        }
    }
}

pub fn decide(kind: PolicyKind, g: &Graph, u: &Status, seed: u64, exec: Exec) -> Result<NodeId, PolicyError> {
    decide_dense(kind, g, &DenseStatus::from_status(g, u), seed, exec)
}
