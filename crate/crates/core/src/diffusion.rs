//! Independent Cascade semantics: observed diffusion rounds, active counts
//! `A_t`, marginal gains and their exact and Monte Carlo expectations.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use thiserror::Error;

use crate::exec::Exec;
use crate::graph::{EdgeId, Graph, NodeId};
use crate::realization::{
    for_each_completion, reach_mask, DenseStatus, EdgeState, Horizon, Realization, RealizationError, Status,
    DEFAULT_ENUMERATION_CAP,
};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffusionError {
    #[error("frontier node {0} is not active")]
    FrontierNotActive(NodeId),
    #[error(transparent)]
    Realization(#[from] RealizationError),
}

/// Source of live/dead outcomes for edges observed during a diffusion.
pub trait EdgeSampler {
    fn is_live(&mut self, g: &Graph, e: EdgeId) -> bool;
}

/// Fresh draws from a random stream, one per call.
pub struct RngCoins<R>(pub R);

impl<R: RngCore> EdgeSampler for RngCoins<R> {
    fn is_live(&mut self, g: &Graph, e: EdgeId) -> bool {
        rng::bernoulli(self.0.next_u64(), g.threshold(e))
    }
}

/// Edge outcomes fixed in advance by hashing `(seed, edge id)`.
///
/// Two diffusions driven by the same `EdgeCoins` see the same full
/// realization, whatever order they touch the edges in.
#[derive(Clone, Copy, Debug)]
pub struct EdgeCoins {
    seed: u64,
}

impl EdgeCoins {
    pub fn new(seed: u64) -> Self {
        EdgeCoins { seed }
    }

    #[inline]
    pub fn live(&self, g: &Graph, e: EdgeId) -> bool {
        rng::bernoulli(rng::derive(self.seed, e as u64), g.threshold(e))
    }
}

impl EdgeSampler for EdgeCoins {
    fn is_live(&mut self, g: &Graph, e: EdgeId) -> bool {
        self.live(g, e)
    }
}

/// Result of one observed diffusion round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub next_status: Status,
    pub newly_active: BTreeSet<NodeId>,
    pub newly_observed: BTreeMap<EdgeId, bool>,
}

/// One round on a dense status: every unobserved edge from `frontier` to a
/// node inactive at the start of the round is sampled, in edge-id order.
/// Returns the nodes activated this round in increasing id.
pub fn step_round<S: EdgeSampler + ?Sized>(
    g: &Graph,
    state: &mut DenseStatus,
    frontier: &[NodeId],
    coins: &mut S,
) -> Vec<NodeId> {
    let mut edges: Vec<EdgeId> = Vec::new();
    for &v in frontier {
        for &e in g.out_edges(v) {
            if !state.active[g.target(e)] && state.edges[e] == EdgeState::Unknown {
                edges.push(e);
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut fresh = Vec::new();
    for e in edges {
        if coins.is_live(g, e) {
            state.edges[e] = EdgeState::Live;
            fresh.push(g.target(e));
        } else {
            state.edges[e] = EdgeState::Dead;
        }
    }
    fresh.sort_unstable();
    fresh.dedup();
    for &w in &fresh {
        state.activate(w);
    }
    fresh
}

/// One observed diffusion round from `frontier`, the nodes activated in the
/// previous round. An empty frontier is a legal waiting round.
pub fn simulate_round<S: EdgeSampler + ?Sized>(
    g: &Graph,
    u: &Status,
    frontier: &BTreeSet<NodeId>,
    coins: &mut S,
) -> Result<RoundOutcome, DiffusionError> {
    if let Some(&v) = frontier.iter().find(|v| !u.active.contains(v)) {
        return Err(DiffusionError::FrontierNotActive(v));
    }
    u.validate(g)?;
    let mut state = DenseStatus::from_status(g, u);
    let before = state.edges.clone();
    let front: Vec<NodeId> = frontier.iter().copied().collect();
    let fresh = step_round(g, &mut state, &front, coins);
    let newly_observed = before
        .iter()
        .zip(&state.edges)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(e, (_, b))| (e, *b == EdgeState::Live))
        .collect();
    Ok(RoundOutcome { next_status: state.to_status(), newly_active: fresh.into_iter().collect(), newly_observed })
}

fn require_full(g: &Graph, psi: &Realization) -> Result<(), DiffusionError> {
    psi.validate(g)?;
    if !psi.is_full(g) {
        return Err(RealizationError::NotFull { missing: g.edge_count() - psi.observed_count() }.into());
    }
    Ok(())
}

fn count_mask(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

/// `|A_t(S, ψ)|` for a full realization `ψ`.
pub fn count_active(g: &Graph, seeds: &BTreeSet<NodeId>, psi: &Realization, t: Horizon) -> Result<usize, DiffusionError> {
    require_full(g, psi)?;
    let limit = t.path_limit(g.node_count());
    Ok(count_mask(&reach_mask(g, seeds.iter().copied(), limit, |e| psi.live().contains(&e))))
}

/// `Δ_t(S, V*, ψ) = |A_t(S ∪ V*, ψ)| - |A_t(S, ψ)|`.
pub fn marginal_delta(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    vstar: &BTreeSet<NodeId>,
    psi: &Realization,
    t: Horizon,
) -> Result<usize, DiffusionError> {
    require_full(g, psi)?;
    let limit = t.path_limit(g.node_count());
    let live = |e: EdgeId| psi.live().contains(&e);
    let base = count_mask(&reach_mask(g, s.iter().copied(), limit, live));
    let both = count_mask(&reach_mask(g, s.union(vstar).copied(), limit, live));
    Ok(both - base)
}

/// `Δf_t(S, V*, φ)` by enumerating every full realization `ψ ≻ φ`.
pub fn expected_marginal_exact(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    vstar: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
) -> Result<f64, DiffusionError> {
    expected_marginal_exact_capped(g, s, vstar, phi, t, DEFAULT_ENUMERATION_CAP)
}

pub fn expected_marginal_exact_capped(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    vstar: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
    cap: usize,
) -> Result<f64, DiffusionError> {
    phi.validate(g)?;
    let limit = t.path_limit(g.node_count());
    let union: Vec<NodeId> = s.union(vstar).copied().collect();
    let mut total = 0.0;
    for_each_completion(g, phi, cap, |live, p| {
        let base = count_mask(&reach_mask(g, s.iter().copied(), limit, |e| live[e]));
        let both = count_mask(&reach_mask(g, union.iter().copied(), limit, |e| live[e]));
        total += p * (both - base) as f64;
    })?;
    Ok(total)
}

/// `Δf_t(S, {v}, φ)` for every node `v` from a single enumeration; entries for
/// `v ∈ S` are zero.
pub fn expected_marginals_exact(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
    cap: usize,
) -> Result<Vec<f64>, DiffusionError> {
    phi.validate(g)?;
    let n = g.node_count();
    let limit = t.path_limit(n);
    let mut out = vec![0.0; n];
    let mut sources: Vec<NodeId> = s.iter().copied().collect();
    for_each_completion(g, phi, cap, |live, p| {
        let base = count_mask(&reach_mask(g, s.iter().copied(), limit, |e| live[e]));
        for v in (0..n).filter(|v| !s.contains(v)) {
            sources.push(v);
            let both = count_mask(&reach_mask(g, sources.iter().copied(), limit, |e| live[e]));
            sources.pop();
            out[v] += p * (both - base) as f64;
        }
    })?;
    Ok(out)
}

/// Monte Carlo mean of `Δ_t(S, V*, ψ)` over `samples` completions of `φ`.
///
/// Sample `i` draws its unobserved edges from `EdgeCoins(derive(seed, i))`, so
/// the estimate does not depend on the execution strategy.
#[allow(clippy::too_many_arguments)]
pub fn expected_marginal_mc(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    vstar: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
    samples: usize,
    rng_seed: u64,
    exec: Exec,
) -> f64 {
    if samples == 0 || vstar.is_subset(s) {
        return 0.0;
    }
    let states = phi.states(g);
    let limit = t.path_limit(g.node_count());
    let union: Vec<NodeId> = s.union(vstar).copied().collect();
    let total = exec.fold_blocks(
        samples,
        1024,
        || 0u64,
        |acc, i| {
            let coins = EdgeCoins::new(rng::derive(rng_seed, i as u64));
            let live = |e: EdgeId| match states[e] {
                EdgeState::Live => true,
                EdgeState::Dead => false,
                EdgeState::Unknown => coins.live(g, e),
            };
            let base = count_mask(&reach_mask(g, s.iter().copied(), limit, live));
            let both = count_mask(&reach_mask(g, union.iter().copied(), limit, live));
            *acc += (both - base) as u64;
        },
        |a, b| a + b,
    );
    total as f64 / samples as f64
}
