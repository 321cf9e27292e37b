//! Observed edge states (realizations), statuses, and their algebra.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{EdgeId, Graph, NodeId};

/// Default bound on the number of unobserved edges an exhaustive enumeration
/// may branch on.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RealizationError {
    #[error("edge {0} is both live and dead")]
    Overlap(EdgeId),
    #[error("edge {edge} out of range for a graph with {edges} edges")]
    EdgeOutOfRange { edge: EdgeId, edges: usize },
    #[error("node {node} out of range for a graph with {nodes} nodes")]
    NodeOutOfRange { node: NodeId, nodes: usize },
    #[error("first realization is not a sub-realization of the second")]
    NotSubRealization,
    #[error("conflicting observations of edge {0}")]
    Conflict(EdgeId),
    #[error("realization is not full: {missing} edges unobserved")]
    NotFull { missing: usize },
    #[error("{count} unobserved edges exceed the enumeration cap of {cap}")]
    TooManyUnobserved { count: usize, cap: usize },
    #[error("malformed status text: {0}")]
    Parse(String),
}

/// A diffusion-round horizon: `t` rounds, or until the diffusion terminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Horizon {
    Finite(u32),
    Unbounded,
}

impl Horizon {
    /// Maximum path length in edges; `Unbounded` is `n - 1`, the longest
    /// simple path on `n` nodes.
    pub fn path_limit(self, node_count: usize) -> usize {
        match self {
            Horizon::Finite(t) => t as usize,
            Horizon::Unbounded => node_count.saturating_sub(1),
        }
    }

    /// `self - d`, defined when `d <= self`; `∞ - d = ∞` for finite `d` and
    /// `∞ - ∞ = ∞`.
    pub fn minus(self, d: Horizon) -> Option<Horizon> {
        match (self, d) {
            (Horizon::Unbounded, _) => Some(Horizon::Unbounded),
            (Horizon::Finite(t), Horizon::Finite(d)) if d <= t => Some(Horizon::Finite(t - d)),
            _ => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        self == Horizon::Unbounded
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeState {
    Unknown,
    Live,
    Dead,
}

/// A set of observed edge states: `live ∩ dead = ∅`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Realization {
    live: BTreeSet<EdgeId>,
    dead: BTreeSet<EdgeId>,
}

impl Realization {
    /// The empty realization `φ∅`.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(
        live: impl IntoIterator<Item = EdgeId>,
        dead: impl IntoIterator<Item = EdgeId>,
    ) -> Result<Self, RealizationError> {
        let live: BTreeSet<_> = live.into_iter().collect();
        let dead: BTreeSet<_> = dead.into_iter().collect();
        if let Some(&e) = live.intersection(&dead).next() {
            return Err(RealizationError::Overlap(e));
        }
        Ok(Realization { live, dead })
    }

    /// The full realization given by a per-edge live mask.
    pub fn from_live_mask(mask: &[bool]) -> Self {
        let mut r = Realization::empty();
        for (e, &l) in mask.iter().enumerate() {
            if l {
                r.live.insert(e);
            } else {
                r.dead.insert(e);
            }
        }
        r
    }

    pub fn live(&self) -> &BTreeSet<EdgeId> {
        &self.live
    }

    pub fn dead(&self) -> &BTreeSet<EdgeId> {
        &self.dead
    }

    pub fn state(&self, e: EdgeId) -> EdgeState {
        if self.live.contains(&e) {
            EdgeState::Live
        } else if self.dead.contains(&e) {
            EdgeState::Dead
        } else {
            EdgeState::Unknown
        }
    }

    pub fn is_observed(&self, e: EdgeId) -> bool {
        self.live.contains(&e) || self.dead.contains(&e)
    }

    pub fn observed_count(&self) -> usize {
        self.live.len() + self.dead.len()
    }

    pub fn is_full(&self, g: &Graph) -> bool {
        self.observed_count() == g.edge_count()
    }

    /// Records an observation; re-observing the same state is a no-op.
    pub fn observe(&mut self, e: EdgeId, live: bool) -> Result<(), RealizationError> {
        let (this, other) = if live { (&mut self.live, &self.dead) } else { (&mut self.dead, &self.live) };
        if other.contains(&e) {
            return Err(RealizationError::Conflict(e));
        }
        this.insert(e);
        Ok(())
    }

    pub fn validate(&self, g: &Graph) -> Result<(), RealizationError> {
        let edges = g.edge_count();
        match self.live.iter().chain(&self.dead).find(|&&e| e >= edges) {
            Some(&edge) => Err(RealizationError::EdgeOutOfRange { edge, edges }),
            None => Ok(()),
        }
    }

    /// Dense per-edge view.
    pub fn states(&self, g: &Graph) -> Vec<EdgeState> {
        let mut s = vec![EdgeState::Unknown; g.edge_count()];
        for &e in &self.live {
            s[e] = EdgeState::Live;
        }
        for &e in &self.dead {
            s[e] = EdgeState::Dead;
        }
        s
    }

    /// Edges with unknown state, in increasing id.
    pub fn unobserved(&self, g: &Graph) -> Vec<EdgeId> {
        (0..g.edge_count()).filter(|e| !self.is_observed(*e)).collect()
    }
}

/// `Pr[φ] = ∏_{L(φ)} p_e · ∏_{D(φ)} (1 - p_e)`.
pub fn realization_prob(g: &Graph, phi: &Realization) -> f64 {
    let live: f64 = phi.live.iter().map(|&e| g.prob(e)).product();
    let dead: f64 = phi.dead.iter().map(|&e| 1.0 - g.prob(e)).product();
    live * dead
}

/// `Pr[φ₂ | φ₁]` for `φ₁ ≺ φ₂`.
pub fn conditional_prob(g: &Graph, phi2: &Realization, phi1: &Realization) -> Result<f64, RealizationError> {
    if !is_sub(phi1, phi2) {
        return Err(RealizationError::NotSubRealization);
    }
    let live: f64 = phi2.live.difference(&phi1.live).map(|&e| g.prob(e)).product();
    let dead: f64 = phi2.dead.difference(&phi1.dead).map(|&e| 1.0 - g.prob(e)).product();
    Ok(live * dead)
}

/// `φ₁ ≺ φ₂`.
pub fn is_sub(phi1: &Realization, phi2: &Realization) -> bool {
    phi1.live.is_subset(&phi2.live) && phi1.dead.is_subset(&phi2.dead)
}

/// No edge is live in one and dead in the other.
pub fn is_compatible(phi1: &Realization, phi2: &Realization) -> bool {
    phi1.live.is_disjoint(&phi2.dead) && phi1.dead.is_disjoint(&phi2.live)
}

/// Component-wise union of a family of realizations.
pub fn concat<'a>(phis: impl IntoIterator<Item = &'a Realization>) -> Result<Realization, RealizationError> {
    let mut out = Realization::empty();
    for phi in phis {
        out.live.extend(phi.live.iter().copied());
        out.dead.extend(phi.dead.iter().copied());
    }
    match out.live.intersection(&out.dead).next() {
        Some(&e) => Err(RealizationError::Conflict(e)),
        None => Ok(out),
    }
}

/// Active nodes paired with the observed realization.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Status {
    pub active: BTreeSet<NodeId>,
    pub observed: Realization,
}

impl Status {
    /// `U∅`.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(active: impl IntoIterator<Item = NodeId>, observed: Realization) -> Self {
        Status { active: active.into_iter().collect(), observed }
    }

    pub fn validate(&self, g: &Graph) -> Result<(), RealizationError> {
        let nodes = g.node_count();
        if let Some(&node) = self.active.iter().find(|&&v| v >= nodes) {
            return Err(RealizationError::NodeOutOfRange { node, nodes });
        }
        self.observed.validate(g)
    }

    /// Copy with extra active nodes.
    pub fn with_active(&self, extra: impl IntoIterator<Item = NodeId>) -> Status {
        let mut s = self.clone();
        s.active.extend(extra);
        s
    }

    /// Active nodes that still have an untried out-edge to an inactive node.
    ///
    /// For statuses produced by a seeding process these are exactly the nodes
    /// that will attempt activations in the next round.
    pub fn pending_frontier(&self, g: &Graph) -> BTreeSet<NodeId> {
        self.active
            .iter()
            .copied()
            .filter(|&u| {
                g.out_edges(u)
                    .iter()
                    .any(|&e| !self.active.contains(&g.target(e)) && !self.observed.is_observed(e))
            })
            .collect()
    }
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl fmt::Display for Status {
    /// `ACTIVE: 0,2 LIVE: 1 DEAD: 3,4`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ACTIVE: {} LIVE: {} DEAD: {}",
            join(&self.active),
            join(&self.observed.live),
            join(&self.observed.dead)
        )
    }
}

impl FromStr for Status {
    type Err = RealizationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RealizationError::Parse(s.to_string());
        let rest = s.trim().strip_prefix("ACTIVE:").ok_or_else(bad)?;
        let (active, rest) = rest.split_once("LIVE:").ok_or_else(bad)?;
        let (live, dead) = rest.split_once("DEAD:").ok_or_else(bad)?;
        let ids = |part: &str| -> Result<Vec<usize>, RealizationError> {
            part.split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|_| bad()))
                .collect()
        };
        let observed = Realization::new(ids(live)?, ids(dead)?)?;
        Ok(Status::new(ids(active)?, observed))
    }
}

/// `U₁ ∪ U₂` for statuses with compatible realizations.
pub fn status_union(u1: &Status, u2: &Status) -> Result<Status, RealizationError> {
    let observed = concat([&u1.observed, &u2.observed])?;
    let active = u1.active.union(&u2.active).copied().collect();
    Ok(Status { active, observed })
}

/// Breadth-first search from `sources` over edges accepted by `traversable`,
/// following paths of at most `limit` edges. Returns the reached-node mask.
pub(crate) fn reach_mask(
    g: &Graph,
    sources: impl IntoIterator<Item = NodeId>,
    limit: usize,
    mut traversable: impl FnMut(EdgeId) -> bool,
) -> Vec<bool> {
    let mut seen = vec![false; g.node_count()];
    let mut queue = VecDeque::new();
    for s in sources {
        if !seen[s] {
            seen[s] = true;
            queue.push_back((s, 0usize));
        }
    }
    while let Some((u, depth)) = queue.pop_front() {
        if depth == limit {
            continue;
        }
        for &e in g.out_edges(u) {
            let w = g.target(e);
            if !seen[w] && traversable(e) {
                seen[w] = true;
                queue.push_back((w, depth + 1));
            }
        }
    }
    seen
}

/// Nodes reachable from `sources` along paths of at most `t` edges, all live
/// in `phi`. Sources are always included.
pub fn t_live_reachable(g: &Graph, phi: &Realization, sources: &BTreeSet<NodeId>, t: Horizon) -> BTreeSet<NodeId> {
    let mask = reach_mask(g, sources.iter().copied(), t.path_limit(g.node_count()), |e| phi.live.contains(&e));
    mask.iter().enumerate().filter(|(_, &r)| r).map(|(v, _)| v).collect()
}

/// Whether no further activation is possible in any full realization
/// consistent with the status.
///
/// An unobserved edge is live in some completion, so `U` is final exactly
/// when optimistic reachability (live or unobserved edges) from the active
/// set stays inside it. Any such escaping path starts with an edge leaving
/// the active set, so checking those edges suffices.
pub fn is_final(g: &Graph, u: &Status) -> bool {
    u.active.iter().all(|&a| {
        g.out_edges(a)
            .iter()
            .all(|&e| u.active.contains(&g.target(e)) || u.observed.dead.contains(&e))
    })
}

/// Enumerates every full realization `ψ ≻ φ` together with `Pr[ψ | φ]`.
///
/// The callback receives a per-edge live mask. Fails if more than `cap` edges
/// are unobserved.
pub fn for_each_completion(
    g: &Graph,
    phi: &Realization,
    cap: usize,
    mut f: impl FnMut(&[bool], f64),
) -> Result<(), RealizationError> {
    let free = phi.unobserved(g);
    if free.len() > cap {
        return Err(RealizationError::TooManyUnobserved { count: free.len(), cap });
    }
    let mut live = vec![false; g.edge_count()];
    for &e in &phi.live {
        live[e] = true;
    }
    for mask in 0u64..(1u64 << free.len()) {
        let mut p = 1.0;
        for (bit, &e) in free.iter().enumerate() {
            let on = mask >> bit & 1 == 1;
            live[e] = on;
            p *= if on { g.prob(e) } else { 1.0 - g.prob(e) };
        }
        f(&live, p);
    }
    Ok(())
}

/// Array-backed status for hot loops: per-node activity and per-edge state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseStatus {
    pub active: Vec<bool>,
    pub edges: Vec<EdgeState>,
    pub active_count: usize,
}

impl DenseStatus {
    pub fn empty(g: &Graph) -> Self {
        DenseStatus { active: vec![false; g.node_count()], edges: vec![EdgeState::Unknown; g.edge_count()], active_count: 0 }
    }

    pub fn from_status(g: &Graph, u: &Status) -> Self {
        let mut d = DenseStatus::empty(g);
        for &v in &u.active {
            d.activate(v);
        }
        d.edges = u.observed.states(g);
        d
    }

    pub fn to_status(&self) -> Status {
        let active = self.active.iter().enumerate().filter(|(_, &a)| a).map(|(v, _)| v).collect();
        let mut observed = Realization::empty();
        for (e, s) in self.edges.iter().enumerate() {
            match s {
                EdgeState::Live => {
                    observed.live.insert(e);
                }
                EdgeState::Dead => {
                    observed.dead.insert(e);
                }
                EdgeState::Unknown => {}
            }
        }
        Status { active, observed }
    }

    /// Marks `v` active; returns false if it already was.
    pub fn activate(&mut self, v: NodeId) -> bool {
        if self.active[v] {
            return false;
        }
        self.active[v] = true;
        self.active_count += 1;
        true
    }

    pub fn inactive_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.active.iter().enumerate().filter(|(_, &a)| !a).map(|(v, _)| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;
    use proptest::prelude::*;

    fn two_edges() -> Graph {
        Graph::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.25)]).unwrap()
    }

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn probabilities() {
        let g = two_edges();
        assert_eq!(realization_prob(&g, &Realization::empty()), 1.0);
        let phi = Realization::new([0], [1]).unwrap();
        assert_eq!(realization_prob(&g, &phi), 0.375);
        let g3 = Graph::uniform(3, &[(0, 1), (1, 2), (2, 0)], 0.1).unwrap();
        let all = Realization::new([0, 1, 2], []).unwrap();
        assert!((realization_prob(&g3, &all) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn conditional() {
        let g = two_edges();
        let phi1 = Realization::new([0], []).unwrap();
        let phi2 = Realization::new([0], [1]).unwrap();
        assert_eq!(conditional_prob(&g, &phi1, &phi1).unwrap(), 1.0);
        assert_eq!(conditional_prob(&g, &phi2, &phi1).unwrap(), 0.75);
        let chain = realization_prob(&g, &phi1) * conditional_prob(&g, &phi2, &phi1).unwrap();
        assert!((realization_prob(&g, &phi2) - chain).abs() < 1e-15);
        assert_eq!(conditional_prob(&g, &phi1, &phi2), Err(RealizationError::NotSubRealization));
    }

    #[test]
    fn sub_and_compatible() {
        let e = Realization::empty();
        let l = Realization::new([0], []).unwrap();
        let d = Realization::new([], [0]).unwrap();
        assert!(is_sub(&e, &l));
        assert!(is_sub(&l, &l));
        assert!(!is_sub(&l, &d));
        assert!(is_compatible(&e, &l));
        assert!(is_compatible(&l, &l));
        assert!(!is_compatible(&l, &d));
        assert_eq!(Realization::new([0], [0]), Err(RealizationError::Overlap(0)));
    }

    #[test]
    fn concatenation() {
        let a = Realization::new([0], [2]).unwrap();
        let b = Realization::new([1], []).unwrap();
        assert_eq!(concat([&a, &Realization::empty()]).unwrap(), a);
        assert_eq!(concat([&a, &b]).unwrap(), concat([&b, &a]).unwrap());
        let c = Realization::new([2], []).unwrap();
        assert_eq!(concat([&a, &b, &c]), Err(RealizationError::Conflict(2)));
    }

    #[test]
    fn unions() {
        let u = Status::new([0], Realization::new([0], []).unwrap());
        assert_eq!(status_union(&u, &Status::empty()).unwrap(), u);
        assert_eq!(status_union(&u, &u).unwrap(), u);
        let v = Status::new([2], Realization::new([1], []).unwrap());
        let w = status_union(&u, &v).unwrap();
        assert_eq!(w.active, set(&[0, 2]));
        assert_eq!(w.observed.live(), &set(&[0, 1]));
        let bad = Status::new([], Realization::new([], [0]).unwrap());
        assert!(status_union(&u, &bad).is_err());
    }

    #[test]
    fn reachability() {
        let g = Graph::uniform(3, &[(0, 1), (1, 2)], 0.5).unwrap();
        let all = Realization::new([0, 1], []).unwrap();
        assert_eq!(t_live_reachable(&g, &all, &set(&[0]), Horizon::Finite(1)), set(&[0, 1]));
        assert_eq!(t_live_reachable(&g, &all, &set(&[0]), Horizon::Unbounded), set(&[0, 1, 2]));
        let none = Realization::new([], [0, 1]).unwrap();
        assert_eq!(t_live_reachable(&g, &none, &set(&[0]), Horizon::Unbounded), set(&[0]));
    }

    #[test]
    fn finality_examples() {
        let g = Graph::uniform(2, &[(0, 1)], 0.5).unwrap();
        assert!(is_final(&g, &Status::empty()));
        assert!(!is_final(&g, &Status::new([0], Realization::empty())));
        assert!(is_final(&g, &Status::new([0], Realization::new([], [0]).unwrap())));
    }

    #[test]
    fn status_text_round_trip() {
        let u = Status::new([3, 1], Realization::new([0, 4], [2]).unwrap());
        let text = u.to_string();
        assert_eq!(text, "ACTIVE: 1,3 LIVE: 0,4 DEAD: 2");
        assert_eq!(text.parse::<Status>().unwrap(), u);
        assert_eq!("ACTIVE:  LIVE:  DEAD: ".parse::<Status>().unwrap(), Status::empty());
        assert!("ACTIVE: x LIVE: DEAD:".parse::<Status>().is_err());
    }

    #[test]
    fn horizon_arithmetic() {
        assert_eq!(Horizon::Unbounded.minus(Horizon::Finite(3)), Some(Horizon::Unbounded));
        assert_eq!(Horizon::Finite(5).minus(Horizon::Finite(3)), Some(Horizon::Finite(2)));
        assert_eq!(Horizon::Finite(2).minus(Horizon::Finite(3)), None);
        assert_eq!(Horizon::Finite(2).minus(Horizon::Unbounded), None);
        assert_eq!(Horizon::Unbounded.path_limit(7), 6);
    }

    /// Random realization over the edges of `g`: each edge unknown, live or
    /// dead according to `codes`.
    fn realization_from_codes(g: &Graph, codes: &[u8]) -> Realization {
        let mut r = Realization::empty();
        for e in 0..g.edge_count() {
            match codes[e % codes.len()] % 3 {
                1 => r.observe(e, true).unwrap(),
                2 => r.observe(e, false).unwrap(),
                _ => {}
            }
        }
        r
    }

    /// Definition-level finality check: enumerate all completions.
    fn brute_final(g: &Graph, u: &Status) -> bool {
        let mut fin = true;
        for_each_completion(g, &u.observed, 12, |live, _| {
            let reach = reach_mask(g, u.active.iter().copied(), usize::MAX, |e| live[e]);
            if reach.iter().enumerate().any(|(v, &r)| r && !u.active.contains(&v)) {
                fin = false;
            }
        })
        .unwrap();
        fin
    }

    proptest! {
        #[test]
        fn completions_normalize(n in 2usize..6, m in 0usize..12, seed in any::<u64>(), codes in proptest::collection::vec(any::<u8>(), 1..12)) {
            let m = m.min(n * (n - 1));
            let g = random_graph(n, m, 0.37, seed).unwrap();
            let phi = realization_from_codes(&g, &codes);
            let mut total = 0.0;
            for_each_completion(&g, &phi, 12, |_, p| total += p).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sub_is_partial_order(a in proptest::collection::vec(0u8..3, 6), b in proptest::collection::vec(0u8..3, 6), c in proptest::collection::vec(0u8..3, 6)) {
            let g = Graph::uniform(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)], 0.5).unwrap();
            let (x, y, z) = (realization_from_codes(&g, &a), realization_from_codes(&g, &b), realization_from_codes(&g, &c));
            prop_assert!(is_sub(&x, &x));
            if is_sub(&x, &y) && is_sub(&y, &x) {
                prop_assert_eq!(&x, &y);
            }
            if is_sub(&x, &y) && is_sub(&y, &z) {
                prop_assert!(is_sub(&x, &z));
            }
        }

        #[test]
        fn concat_is_upper_bound(a in proptest::collection::vec(0u8..3, 6), b in proptest::collection::vec(0u8..3, 6)) {
            let g = Graph::uniform(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)], 0.5).unwrap();
            let (x, y) = (realization_from_codes(&g, &a), realization_from_codes(&g, &b));
            match concat([&x, &y]) {
                Ok(z) => {
                    prop_assert!(is_compatible(&x, &y));
                    prop_assert!(is_sub(&x, &z) && is_sub(&y, &z));
                }
                Err(_) => prop_assert!(!is_compatible(&x, &y)),
            }
        }

        #[test]
        fn final_matches_brute_force(n in 2usize..6, m in 0usize..12, seed in any::<u64>(), codes in proptest::collection::vec(any::<u8>(), 1..12), act in proptest::collection::vec(any::<bool>(), 6)) {
            let m = m.min(n * (n - 1));
            let g = random_graph(n, m, 0.5, seed).unwrap();
            let phi = realization_from_codes(&g, &codes);
            let u = Status::new((0..n).filter(|&v| act[v]), phi);
            prop_assert_eq!(is_final(&g, &u), brute_final(&g, &u));
        }
    }
}
