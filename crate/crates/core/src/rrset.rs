//! Reverse-reachable sets conditioned on a status, the marginal-gain
//! estimator built on them, and coverage-based greedy selection.

use std::collections::BTreeSet;

use rand::rngs::SmallRng;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::exec::Exec;
use crate::graph::{Graph, NodeId};
use crate::realization::{DenseStatus, EdgeState, Horizon, Realization, Status};
use crate::rng;

/// Samples per work block. Blocks share scratch buffers; results depend only
/// on the sample index.
const BLOCK: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RRError {
    #[error("every node is already active")]
    AllActive,
    #[error("no RR-sets supplied")]
    EmptyList,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmptyReason {
    /// The root is reachable from an active node.
    RootCoveredByS,
}

/// One RR-set. `nodes` is sorted and empty exactly when `empty_reason` is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RRSet {
    pub nodes: Vec<NodeId>,
    pub root: NodeId,
    pub empty_reason: Option<EmptyReason>,
}

impl RRSet {
    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn hits(&self, vstar: &BTreeSet<NodeId>) -> bool {
        self.nodes.iter().any(|v| vstar.contains(v))
    }
}

/// Reusable reverse-BFS state for one conditioning status.
pub struct Sampler<'a> {
    g: &'a Graph,
    active: &'a [bool],
    slot_thresholds: &'a [u64],
    log_q: &'a [f64],
    candidates: &'a [NodeId],
    limit: u32,
    seen: Vec<u32>,
    stamp: u32,
    queue: Vec<NodeId>,
    depth: Vec<u32>,
    live: Vec<NodeId>,
}

impl<'a> Sampler<'a> {
    fn new(g: &'a Graph, st: &'a DenseStatus, prepared: &'a Prepared, t: Horizon) -> Self {
        Sampler {
            g,
            active: &st.active,
            slot_thresholds: &prepared.slot_thresholds,
            log_q: &prepared.log_q,
            candidates: &prepared.candidates,
            limit: t.path_limit(g.node_count()).min(u32::MAX as usize) as u32,
            seen: vec![0; g.node_count()],
            stamp: 0,
            queue: Vec::new(),
            depth: Vec::new(),
            live: Vec::new(),
        }
    }

    /// Draws one RR-set. Returns the root and, unless the root is covered by
    /// an active node, the reached nodes (root first, unsorted).
    ///
    /// Edge states are drawn on first touch; each node is expanded once, so no
    /// edge is drawn twice.
    fn sample(&mut self, rng: &mut impl RngCore) -> (NodeId, Option<&[NodeId]>) {
        let root = self.candidates[rng.gen_range(0..self.candidates.len())];
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.seen.fill(0);
            self.stamp = 1;
        }
        let stamp = self.stamp;
        self.queue.clear();
        self.depth.clear();
        self.seen[root] = stamp;
        self.queue.push(root);
        self.depth.push(0);
        let mut head = 0;
        while head < self.queue.len() {
            let v = self.queue[head];
            let dv = self.depth[head];
            head += 1;
            if dv == self.limit {
                continue;
            }
            let (start, sources) = self.g.in_slots(v);
            let thresholds = &self.slot_thresholds[start..start + sources.len()];
            self.live.clear();
            let log_q = self.log_q[v];
            if log_q == f64::NEG_INFINITY {
                // no unobserved in-edges
            } else if log_q.is_nan() {
                for (&u, &thr) in sources.iter().zip(thresholds) {
                    if self.seen[u] != stamp && thr != 0 && rng::bernoulli(rng.next_u64(), thr) {
                        self.live.push(u);
                    }
                }
            } else {
                // Every unobserved in-edge of v has the same probability p, so
                // the gaps between successes are geometric: jump straight to
                // them. Dead edges swallow their success.
                let mut i = 0usize;
                loop {
                    let x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                    let gap = ((1.0 - x).ln() / log_q) as usize;
                    i = i.saturating_add(gap);
                    if i >= sources.len() {
                        break;
                    }
                    if thresholds[i] != 0 && self.seen[sources[i]] != stamp {
                        self.live.push(sources[i]);
                    }
                    i += 1;
                }
            }
            for j in 0..self.live.len() {
                let u = self.live[j];
                if self.seen[u] == stamp {
                    continue;
                }
                if self.active[u] {
                    return (root, None);
                }
                self.seen[u] = stamp;
                self.queue.push(u);
                self.depth.push(dv + 1);
            }
        }
        (root, Some(&self.queue))
    }
}

fn sample_stream(seed: u64, i: usize) -> SmallRng {
    rng::stream(seed, i as u64)
}

/// Per-status tables shared by all samplers: inactive roots and, in in-edge
/// order, the live threshold of every edge (0 for dead, `u64::MAX` for live).
///
/// `log_q[v]` is `ln(1 - p)` when all of `v`'s in-edges are dead or unobserved
/// with a common probability `p < 1`, and NaN otherwise.
struct Prepared {
    candidates: Vec<NodeId>,
    slot_thresholds: Vec<u64>,
    log_q: Vec<f64>,
}

fn prepare(g: &Graph, st: &DenseStatus) -> Result<Prepared, RRError> {
    let candidates: Vec<NodeId> = st.inactive_nodes().collect();
    if candidates.is_empty() {
        return Err(RRError::AllActive);
    }
    let slot_thresholds = (0..g.node_count())
        .flat_map(|v| {
            let (edges, _, thresholds) = g.in_adjacency(v);
            edges.iter().zip(thresholds).map(|(&e, &thr)| match st.edges[e] {
                EdgeState::Live => u64::MAX,
                EdgeState::Dead => 0,
                EdgeState::Unknown => thr,
            })
        })
        .collect::<Vec<u64>>();
    let log_q = (0..g.node_count())
        .map(|v| {
            let (edges, _, _) = g.in_adjacency(v);
            let mut common: Option<f64> = None;
            for &e in edges {
                match st.edges[e] {
                    EdgeState::Dead => {}
                    EdgeState::Live => return f64::NAN,
                    EdgeState::Unknown => match common {
                        None => common = Some(g.prob(e)),
                        Some(p) if p == g.prob(e) => {}
                        Some(_) => return f64::NAN,
                    },
                }
            }
            match common {
                Some(p) if p < 1.0 => (1.0 - p).ln(),
                Some(_) => f64::NAN,
                None => f64::NEG_INFINITY,
            }
        })
        .collect();
    Ok(Prepared { candidates, slot_thresholds, log_q })
}

fn to_rrset(root: NodeId, nodes: Option<&[NodeId]>) -> RRSet {
    match nodes {
        Some(ns) => {
            let mut nodes = ns.to_vec();
            nodes.sort_unstable();
            RRSet { nodes, root, empty_reason: None }
        }
        None => RRSet { nodes: Vec::new(), root, empty_reason: Some(EmptyReason::RootCoveredByS) },
    }
}

/// Draws one RR-set conditioned on `(S, φ)` with horizon `t`.
pub fn sample_rrset(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
    rng: &mut impl RngCore,
) -> Result<RRSet, RRError> {
    let st = DenseStatus::from_status(g, &Status::new(s.iter().copied(), phi.clone()));
    let prep = prepare(g, &st)?;
    let mut sampler = Sampler::new(g, &st, &prep, t);
    let (root, nodes) = sampler.sample(rng);
    Ok(to_rrset(root, nodes))
}

/// `n` RR-sets; set `i` uses the random stream `(seed, i)`.
pub fn generate_rrsets(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    phi: &Realization,
    t: Horizon,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<RRSet>, RRError> {
    let st = DenseStatus::from_status(g, &Status::new(s.iter().copied(), phi.clone()));
    let prep = prepare(g, &st)?;
    let blocks = exec.map_indexed(n.div_ceil(BLOCK), |b| {
        let mut sampler = Sampler::new(g, &st, &prep, t);
        (b * BLOCK..((b + 1) * BLOCK).min(n))
            .map(|i| {
                let (root, nodes) = sampler.sample(&mut sample_stream(seed, i));
                to_rrset(root, nodes)
            })
            .collect::<Vec<_>>()
    });
    Ok(blocks.into_iter().flatten().collect())
}

/// `(|V| - |S|) · Pr[V* ∩ ℛ ≠ ∅]` estimated over `rrsets`.
pub fn estimate_marginal(
    g: &Graph,
    s: &BTreeSet<NodeId>,
    rrsets: &[RRSet],
    vstar: &BTreeSet<NodeId>,
) -> Result<f64, RRError> {
    if rrsets.is_empty() {
        return Err(RRError::EmptyList);
    }
    let hits = rrsets.iter().filter(|r| r.hits(vstar)).count();
    let outside = g.node_count() - s.iter().filter(|&&v| v < g.node_count()).count();
    Ok(outside as f64 * hits as f64 / rrsets.len() as f64)
}

/// Number of the `n` RR-sets (same streams as [`generate_rrsets`]) that
/// contain each node.
pub fn coverage_counts(g: &Graph, st: &DenseStatus, t: Horizon, n: usize, seed: u64, exec: Exec) -> Result<Vec<u32>, RRError> {
    let prep = prepare(g, st)?;
    let blocks = exec.map_indexed(n.div_ceil(BLOCK), |b| {
        let mut sampler = Sampler::new(g, st, &prep, t);
        let mut hit = Vec::new();
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            if let (_, Some(nodes)) = sampler.sample(&mut sample_stream(seed, i)) {
                hit.extend_from_slice(nodes);
            }
        }
        hit
    });
    let mut counts = vec![0u32; g.node_count()];
    for v in blocks.into_iter().flatten() {
        counts[v] += 1;
    }
    Ok(counts)
}

/// Inactive node with the highest count; ties go to the smallest id.
pub(crate) fn argmax_inactive<T: PartialOrd + Copy>(st: &DenseStatus, score: &[T]) -> Option<NodeId> {
    let mut best: Option<NodeId> = None;
    for v in st.inactive_nodes() {
        if best.is_none_or(|b| score[v] > score[b]) {
            best = Some(v);
        }
    }
    best
}

/// Greedy choice on a dense status: the inactive node covering the most of
/// `n_samples` RR-sets.
pub fn greedy_select_dense(
    g: &Graph,
    st: &DenseStatus,
    t: Horizon,
    n_samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<NodeId, RRError> {
    let counts = coverage_counts(g, st, t, n_samples, seed, exec)?;
    argmax_inactive(st, &counts).ok_or(RRError::AllActive)
}

/// The node maximizing estimated `Δf_t(Ṡ(U), v, φ̇(U))` over `v ∉ Ṡ(U)`.
pub fn greedy_select(g: &Graph, u: &Status, t: Horizon, n_samples: usize, seed: u64, exec: Exec) -> Result<NodeId, RRError> {
    greedy_select_dense(g, &DenseStatus::from_status(g, u), t, n_samples, seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::expected_marginal_exact;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn sampling_examples() {
        let g = Graph::uniform(2, &[(0, 1)], 1.0).unwrap();
        let mut r = rng::stream(1, 1);
        let iso = sample_rrset(&g, &set(&[1]), &Realization::empty(), Horizon::Unbounded, &mut r).unwrap();
        assert_eq!(iso.nodes, vec![0]);
        let covered = sample_rrset(&g, &set(&[0]), &Realization::empty(), Horizon::Unbounded, &mut r).unwrap();
        assert_eq!(covered.root, 1);
        assert_eq!(covered.empty_reason, Some(EmptyReason::RootCoveredByS));
        assert!(covered.nodes.is_empty());
        let dead = Realization::new([], [0]).unwrap();
        let blocked = sample_rrset(&g, &set(&[0]), &dead, Horizon::Unbounded, &mut r).unwrap();
        assert_eq!(blocked.nodes, vec![1]);
        assert!(sample_rrset(&g, &set(&[0, 1]), &dead, Horizon::Unbounded, &mut r).is_err());
    }

    #[test]
    fn horizon_cuts_paths() {
        let g = Graph::uniform(3, &[(0, 1), (1, 2)], 1.0).unwrap();
        let sets = generate_rrsets(&g, &set(&[]), &Realization::empty(), Horizon::Finite(1), 300, 5, Exec::Sequential).unwrap();
        for r in &sets {
            assert!(r.nodes.len() <= 2);
            assert!(r.contains(r.root));
        }
    }

    #[test]
    fn estimator_examples() {
        let path = Graph::uniform(3, &[(0, 1), (1, 2)], 1.0).unwrap();
        let e = Realization::empty();
        let sets = generate_rrsets(&path, &set(&[]), &e, Horizon::Unbounded, 57, 3, Exec::Sequential).unwrap();
        assert_eq!(estimate_marginal(&path, &set(&[]), &sets, &set(&[0])).unwrap(), 3.0);
        assert_eq!(estimate_marginal(&path, &set(&[]), &sets, &set(&[])).unwrap(), 0.0);
        assert_eq!(estimate_marginal(&path, &set(&[]), &[], &set(&[0])), Err(RRError::EmptyList));

        let g = Graph::uniform(2, &[(0, 1)], 0.3).unwrap();
        let sets = generate_rrsets(&g, &set(&[]), &e, Horizon::Unbounded, 100_000, 8, Exec::default()).unwrap();
        let est = estimate_marginal(&g, &set(&[]), &sets, &set(&[0])).unwrap();
        assert!((est - 1.3).abs() <= 0.03, "{est}");
    }

    #[test]
    fn coverage_matches_materialized_sets() {
        let g = crate::graph::random_graph(12, 40, 0.3, 4).unwrap();
        let u = Status::new([2, 7], Realization::new([], [0, 5]).unwrap());
        let sets = generate_rrsets(&g, &u.active, &u.observed, Horizon::Finite(3), 5000, 12, Exec::Parallel).unwrap();
        let st = DenseStatus::from_status(&g, &u);
        let counts = coverage_counts(&g, &st, Horizon::Finite(3), 5000, 12, Exec::Sequential).unwrap();
        for v in 0..12 {
            assert_eq!(counts[v] as usize, sets.iter().filter(|r| r.contains(v)).count());
        }
        for r in &sets {
            assert!(!u.active.contains(&r.root));
            assert!(r.nodes.iter().all(|v| !u.active.contains(v)));
        }
    }

    #[test]
    fn greedy_examples() {
        let star = Graph::uniform(4, &[(0, 1), (0, 2), (0, 3)], 1.0).unwrap();
        assert_eq!(greedy_select(&star, &Status::empty(), Horizon::Unbounded, 1000, 1, Exec::default()).unwrap(), 0);
        let after = Status::new([0, 1, 2, 3], Realization::new([0, 1, 2], []).unwrap());
        assert_eq!(greedy_select(&star, &after, Horizon::Unbounded, 10, 1, Exec::default()), Err(RRError::AllActive));
        let centre_done = Status::new([0, 1], Realization::new([0], [1, 2]).unwrap());
        // 2 and 3 both gain exactly 1; sampled counts differ, exact ties go to the smaller id.
        let pick = greedy_select(&star, &centre_done, Horizon::Unbounded, 1000, 1, Exec::default()).unwrap();
        assert!(pick == 2 || pick == 3);
        let st = DenseStatus::from_status(&star, &centre_done);
        assert_eq!(argmax_inactive(&st, &[9, 9, 5, 5]), Some(2));

        let two = Graph::uniform(2, &[(0, 1)], 0.5).unwrap();
        let u = Status::new([0], Realization::new([], [0]).unwrap());
        assert_eq!(greedy_select(&two, &u, Horizon::Unbounded, 100, 1, Exec::default()).unwrap(), 1);
    }

    #[test]
    fn estimator_tracks_conditioning() {
        // 0 -> 1 -> 2 -> 3; forcing or blocking the middle edge changes the gain of 0.
        let g = Graph::uniform(4, &[(0, 1), (1, 2), (2, 3)], 0.5).unwrap();
        for phi in [Realization::new([1], []).unwrap(), Realization::new([], [1]).unwrap()] {
            let exact = expected_marginal_exact(&g, &set(&[]), &set(&[0]), &phi, Horizon::Unbounded).unwrap();
            let sets = generate_rrsets(&g, &set(&[]), &phi, Horizon::Unbounded, 100_000, 2, Exec::default()).unwrap();
            let est = estimate_marginal(&g, &set(&[]), &sets, &set(&[0])).unwrap();
            assert!((est - exact).abs() < 0.03, "{est} vs {exact}");
        }
    }
}
