//! Exact decision trees of seeding processes on small graphs: tree profit,
//! conditioning, concatenation, regret ratios and the inequalities that
//! bound the adaptive greedy policy.
//!
//! Tree-nodes carry seed sets (or the lazy `ε` marker) and tree-edges carry
//! statuses. Every tree starts with a root tree-edge that has no source
//! node. Edge probabilities are absolute: `Pr[φ̇(U)]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::diffusion::{expected_marginal_exact, expected_marginals_exact, DiffusionError};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::process::{FeedbackSchedule, ProcessError};
use crate::realization::{
    is_compatible, is_final, realization_prob, status_union, Horizon, RealizationError, Status,
    DEFAULT_ENUMERATION_CAP,
};
use crate::rng;

pub const DEFAULT_TREE_CAP: usize = 1_000_000;

/// Slack used when comparing exact expectations computed in floating point.
pub const TOLERANCE: f64 = 1e-9;

const TIE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("tree exceeds {cap} tree-edges")]
    CapExceeded { cap: usize },
    #[error("{count} edges to branch on in one round, cap is {cap}")]
    TooManyBranches { count: usize, cap: usize },
    #[error("no inactive node left")]
    NoInactiveNode,
    #[error("every inactive node is reached with certainty, so no seed gains anything")]
    ZeroGain,
    #[error("waiting {d} rounds exceeds the horizon {t}")]
    HorizonTooShort { t: Horizon, d: Horizon },
    #[error("root statuses are incompatible")]
    Incompatible,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid tree: {0}")]
    Invalid(String),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
    #[error(transparent)]
    Realization(#[from] RealizationError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Label {
    Seeds(BTreeSet<NodeId>),
    /// The lazy placeholder: a seed is decided here but activated later.
    Epsilon,
}

impl Label {
    pub fn seeds(&self) -> BTreeSet<NodeId> {
        match self {
            Label::Seeds(s) => s.clone(),
            Label::Epsilon => BTreeSet::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub label: Label,
    /// Seeding step, starting at 1.
    pub level: usize,
    /// Out tree-edges.
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeEdge {
    pub status: Status,
    pub prob: f64,
    pub from: Option<usize>,
    pub to: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    edges: Vec<TreeEdge>,
    root: Option<usize>,
}

impl DecisionTree {
    /// The single-node tree: root status `U∅` into an empty seed set.
    pub fn trivial() -> Self {
        let mut t = DecisionTree::default();
        let node = t.push_node(Label::Seeds(BTreeSet::new()), 1);
        t.edges.push(TreeEdge { status: Status::empty(), prob: 1.0, from: None, to: node });
        t.root = Some(0);
        t
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn root_edge(&self) -> Option<&TreeEdge> {
        self.root.map(|e| &self.edges[e])
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Deepest tree-node level.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Tree-edges whose target is a leaf.
    pub fn leaf_edges(&self) -> impl Iterator<Item = &TreeEdge> + '_ {
        self.edges.iter().filter(|e| self.nodes[e.to].children.is_empty())
    }

    /// Tree-edges pointing at nodes of `level`.
    pub fn edges_at_level(&self, level: usize) -> impl Iterator<Item = &TreeEdge> + '_ {
        self.edges.iter().filter(move |e| self.nodes[e.to].level == level)
    }

    fn push_node(&mut self, label: Label, level: usize) -> usize {
        self.nodes.push(TreeNode { label, level, children: Vec::new() });
        self.nodes.len() - 1
    }

    /// Level-indented text form, one line per tree-edge and tree-node.
    ///
    /// ```text
    /// -> p=1 ACTIVE:  LIVE:  DEAD:
    ///   [1] {0}
    ///     -> p=0.3 ACTIVE: 0,1 LIVE: 0 DEAD:
    ///       [2] {}
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(r) = self.root {
            self.dump_edge(r, 0, &mut out);
        }
        out
    }

    fn dump_edge(&self, e: usize, depth: usize, out: &mut String) {
        let edge = &self.edges[e];
        let pad = "  ".repeat(2 * depth);
        let _ = writeln!(out, "{pad}-> p={} {}", edge.prob, edge.status);
        let node = &self.nodes[edge.to];
        let label = match &node.label {
            Label::Epsilon => "eps".to_string(),
            Label::Seeds(s) => format!("{{{}}}", s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
        };
        let _ = writeln!(out, "{pad}  [{}] {label}", node.level);
        for &c in &node.children {
            self.dump_edge(c, depth + 1, out);
        }
    }
}

/// A deterministic policy. `step` is the 0-based index of the seed being
/// chosen, so budget-aware rules are allowed.
pub trait DecisionRule {
    fn choose(&mut self, g: &Graph, u: &Status, step: usize) -> Result<NodeId, TreeError>;
}

fn inactive<'a>(g: &Graph, u: &'a Status) -> impl Iterator<Item = NodeId> + 'a {
    let n = g.node_count();
    (0..n).filter(move |v| !u.active.contains(v))
}

/// Smallest inactive id whose score is within `TIE` of the best.
fn pick_best(g: &Graph, u: &Status, score: &[f64]) -> Option<NodeId> {
    let best = inactive(g, u).map(|v| score[v]).fold(f64::NEG_INFINITY, f64::max);
    inactive(g, u).find(|&v| score[v] >= best - TIE)
}

/// Greedy on the exact `Δf_∞`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactGreedy {
    /// Picks the worst node instead. Used to check that the battery notices.
    pub fault: bool,
}

impl DecisionRule for ExactGreedy {
    fn choose(&mut self, g: &Graph, u: &Status, _step: usize) -> Result<NodeId, TreeError> {
        let mut gains =
            expected_marginals_exact(g, &u.active, &u.observed, Horizon::Unbounded, DEFAULT_ENUMERATION_CAP)?;
        if self.fault {
            gains.iter_mut().for_each(|x| *x = -*x);
        }
        pick_best(g, u, &gains).ok_or(TreeError::NoInactiveNode)
    }
}

/// Largest out-degree among inactive nodes.
#[derive(Clone, Copy, Debug, Default)]
pub struct DegreeRule;

impl DecisionRule for DegreeRule {
    fn choose(&mut self, g: &Graph, u: &Status, _step: usize) -> Result<NodeId, TreeError> {
        let degree: Vec<f64> = (0..g.node_count()).map(|v| g.out_degree(v) as f64).collect();
        pick_best(g, u, &degree).ok_or(TreeError::NoInactiveNode)
    }
}

/// An arbitrary but fixed policy: hashes the status and step.
#[derive(Clone, Copy, Debug)]
pub struct HashRule {
    pub seed: u64,
}

fn status_hash(u: &Status, step: usize, seed: u64) -> u64 {
    let mut h = rng::derive(seed, step as u64);
    for (tag, set) in [(1u64, &u.active), (2, u.observed.live()), (3, u.observed.dead())] {
        h = rng::mix64(h ^ tag);
        for &x in set {
            h = rng::mix64(h ^ x as u64);
        }
    }
    h
}

impl DecisionRule for HashRule {
    fn choose(&mut self, g: &Graph, u: &Status, step: usize) -> Result<NodeId, TreeError> {
        let free: Vec<NodeId> = inactive(g, u).collect();
        if free.is_empty() {
            return Err(TreeError::NoInactiveNode);
        }
        Ok(free[(status_hash(u, step, self.seed) % free.len() as u64) as usize])
    }
}

/// The best `(π, k, d)` policy, by expectimax over `(status, step)`.
///
/// Every deterministic policy is a choice per reachable `(status, step)`, so
/// the value at `(U∅, 0)` is the optimum over all of them.
#[derive(Clone, Debug)]
pub struct OptimalRule {
    k: usize,
    sched: FeedbackSchedule,
    memo: HashMap<(Status, usize), (f64, Option<NodeId>)>,
}

impl OptimalRule {
    pub fn new(k: usize, sched: FeedbackSchedule) -> Self {
        OptimalRule { k, sched, memo: HashMap::new() }
    }

    /// `F(π*, k, d)`.
    pub fn optimum(&mut self, g: &Graph) -> Result<f64, TreeError> {
        Ok(self.value(g, &Status::empty(), 0)?.0)
    }

    fn value(&mut self, g: &Graph, u: &Status, step: usize) -> Result<(f64, Option<NodeId>), TreeError> {
        let key = (u.clone(), step);
        if let Some(&hit) = self.memo.get(&key) {
            return Ok(hit);
        }
        let out = if step == self.k || u.active.len() == g.node_count() {
            (expected_spread(g, u)?, None)
        } else {
            let mut best: Option<(f64, NodeId)> = None;
            for v in inactive(g, u).collect::<Vec<_>>() {
                let mut total = 0.0;
                for (next, p) in d_round_statuses(g, &u.with_active([v]), wait(self.sched))? {
                    total += p * self.value(g, &next, step + 1)?.0;
                }
                if best.is_none_or(|(b, _)| total > b + TIE) {
                    best = Some((total, v));
                }
            }
            let (val, v) = best.expect("an inactive node exists");
            (val, Some(v))
        };
        self.memo.insert(key, out);
        Ok(out)
    }
}

impl DecisionRule for OptimalRule {
    fn choose(&mut self, g: &Graph, u: &Status, step: usize) -> Result<NodeId, TreeError> {
        self.value(g, u, step)?.1.ok_or(TreeError::NoInactiveNode)
    }
}

/// Rounds observed after each seed.
pub fn wait(sched: FeedbackSchedule) -> Horizon {
    match sched {
        FeedbackSchedule::NonAdaptive => Horizon::Finite(0),
        FeedbackSchedule::Finite(d) => Horizon::Finite(d),
        FeedbackSchedule::FullAdoption => Horizon::Unbounded,
    }
}

/// `E[|A_∞(Ṡ(U), ψ)| | φ̇(U)]`.
fn expected_spread(g: &Graph, u: &Status) -> Result<f64, TreeError> {
    Ok(expected_marginal_exact(g, &BTreeSet::new(), &u.active, &u.observed, Horizon::Unbounded)?)
}

/// Unobserved edges from the pending frontier to inactive nodes.
fn round_edges(g: &Graph, u: &Status) -> Vec<EdgeId> {
    let mut edges: Vec<EdgeId> = u
        .pending_frontier(g)
        .iter()
        .flat_map(|&v| g.out_edges(v).iter().copied())
        .filter(|&e| !u.active.contains(&g.target(e)) && !u.observed.is_observed(e))
        .collect();
    edges.sort_unstable();
    edges
}

/// Every outcome of one diffusion round from `u` with its conditional
/// probability. Zero-probability outcomes are dropped.
pub fn one_round_statuses(g: &Graph, u: &Status) -> Result<Vec<(Status, f64)>, TreeError> {
    let edges = round_edges(g, u);
    if edges.len() > DEFAULT_ENUMERATION_CAP {
        return Err(TreeError::TooManyBranches { count: edges.len(), cap: DEFAULT_ENUMERATION_CAP });
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << edges.len()) {
        let mut next = u.clone();
        let mut p = 1.0;
        for (bit, &e) in edges.iter().enumerate() {
            let live = mask >> bit & 1 == 1;
            p *= if live { g.prob(e) } else { 1.0 - g.prob(e) };
            next.observed.observe(e, live)?;
            if live {
                next.active.insert(g.target(e));
            }
        }
        if p > 0.0 {
            out.push((next, p));
        }
    }
    Ok(out)
}

/// `𝒰_d(U)`: statuses after `d` more rounds, with `Pr[φ̇(U*) | φ̇(U)]`.
/// Identical statuses reached along different paths are merged. With
/// `d = ∞` rounds continue until no frontier is left.
pub fn d_round_statuses(g: &Graph, u: &Status, d: Horizon) -> Result<Vec<(Status, f64)>, TreeError> {
    let mut current: BTreeMap<Status, f64> = BTreeMap::from([(u.clone(), 1.0)]);
    let mut round = 0u32;
    loop {
        let more = match d {
            Horizon::Finite(r) => round < r,
            Horizon::Unbounded => current.keys().any(|s| !s.pending_frontier(g).is_empty()),
        };
        if !more {
            break;
        }
        let mut next = BTreeMap::new();
        for (s, p) in &current {
            for (s2, q) in one_round_statuses(g, s)? {
                *next.entry(s2).or_insert(0.0) += p * q;
            }
        }
        current = next;
        round += 1;
    }
    Ok(current.into_iter().collect())
}

fn check_budget(g: &Graph, k: usize, sched: FeedbackSchedule, lazy: bool) -> Result<(), TreeError> {
    if k == 0 {
        return Err(ProcessError::ZeroBudget.into());
    }
    if k > g.node_count() {
        return Err(ProcessError::BudgetTooLarge { k, n: g.node_count() }.into());
    }
    if sched == FeedbackSchedule::Finite(0) {
        return Err(ProcessError::ZeroRounds.into());
    }
    if lazy && sched == FeedbackSchedule::NonAdaptive {
        return Err(ProcessError::LazyNonAdaptive.into());
    }
    Ok(())
}

struct Builder<'a, R: ?Sized> {
    g: &'a Graph,
    rule: &'a mut R,
    k: usize,
    d: Horizon,
    lazy: bool,
    cap: usize,
    tree: DecisionTree,
}

impl<R: DecisionRule + ?Sized> Builder<'_, R> {
    fn edge(&mut self, status: Status, from: Option<usize>, to: usize) -> Result<usize, TreeError> {
        if self.tree.edges.len() >= self.cap {
            return Err(TreeError::CapExceeded { cap: self.cap });
        }
        let prob = realization_prob(self.g, &status.observed);
        self.tree.edges.push(TreeEdge { status, prob, from, to });
        let id = self.tree.edges.len() - 1;
        if let Some(f) = from {
            self.tree.nodes[f].children.push(id);
        }
        Ok(id)
    }

    /// Adds the tree-node reached by `status` before seeding step `step`,
    /// together with everything below it.
    fn grow(&mut self, status: Status, from: Option<usize>, step: usize) -> Result<(), TreeError> {
        let level = step + 1;
        if step == self.k || status.active.len() == self.g.node_count() {
            let leaf = self.tree.push_node(Label::Seeds(BTreeSet::new()), level);
            self.edge(status, from, leaf)?;
            return Ok(());
        }
        let v = self.rule.choose(self.g, &status, step)?;
        if self.lazy && step + 1 == self.k {
            let eps = self.tree.push_node(Label::Epsilon, level);
            self.edge(status.clone(), from, eps)?;
            for (next, _) in d_round_statuses(self.g, &status, Horizon::Unbounded)? {
                let leaf = self.tree.push_node(Label::Seeds(BTreeSet::from([v])), level + 1);
                self.edge(next, Some(eps), leaf)?;
            }
            return Ok(());
        }
        let node = self.tree.push_node(Label::Seeds(BTreeSet::from([v])), level);
        self.edge(status.clone(), from, node)?;
        for (next, _) in d_round_statuses(self.g, &status.with_active([v]), self.d)? {
            self.grow(next, Some(node), step + 1)?;
        }
        Ok(())
    }
}

/// Tree of the `(π, k, d)`-process, or of its lazy variant.
///
/// The plain tree has `k` seeding levels followed by one observation and
/// empty leaves. The lazy tree has `k + 1` levels: `ε` at level `k`, whose
/// out-edges are the final statuses, each leading to the deferred seed.
/// Seeding stops early once every node is active.
pub fn build_policy_tree<R: DecisionRule + ?Sized>(
    g: &Graph,
    rule: &mut R,
    k: usize,
    sched: FeedbackSchedule,
    lazy: bool,
) -> Result<DecisionTree, TreeError> {
    build_policy_tree_capped(g, rule, k, sched, lazy, DEFAULT_TREE_CAP)
}

pub fn build_policy_tree_capped<R: DecisionRule + ?Sized>(
    g: &Graph,
    rule: &mut R,
    k: usize,
    sched: FeedbackSchedule,
    lazy: bool,
    cap: usize,
) -> Result<DecisionTree, TreeError> {
    check_budget(g, k, sched, lazy)?;
    let mut b = Builder { g, rule, k, d: wait(sched), lazy, cap, tree: DecisionTree::default() };
    b.grow(Status::empty(), None, 0)?;
    b.tree.root = Some(0);
    Ok(b.tree)
}

/// `F(T) = Σ_{U ∈ U_∞^T} Σ_{ψ ≻ φ̇(U)} Pr[ψ]·|A_∞(Ṡ(U) + Ṡ_e(U), ψ)|`.
pub fn tree_profit(g: &Graph, t: &DecisionTree) -> Result<f64, TreeError> {
    let mut total = 0.0;
    for e in t.leaf_edges() {
        if e.prob == 0.0 {
            continue;
        }
        let seeds = t.nodes[e.to].label.seeds();
        total += e.prob * expected_spread(g, &e.status.with_active(seeds))?;
    }
    Ok(total)
}

/// `T | U`: drops tree-edges incompatible with `φ̇(U)` along with their
/// subtrees and replaces every surviving status `U*` by `U* ∪ U`. An
/// incompatible root gives the empty tree.
pub fn condition_tree(g: &Graph, t: &DecisionTree, u: &Status) -> Result<DecisionTree, TreeError> {
    let mut out = DecisionTree::default();
    if let Some(r) = t.root {
        if is_compatible(&t.edges[r].status.observed, &u.observed) {
            copy_conditioned(g, t, r, u, None, 0, &mut out, DEFAULT_TREE_CAP)?;
            out.root = Some(0);
        }
    }
    Ok(out)
}

/// Copies the subtree below edge `e` of `t`, conditioned on `u`, with node
/// levels shifted by `shift`. Returns the new edge id.
#[allow(clippy::too_many_arguments)]
fn copy_conditioned(
    g: &Graph,
    t: &DecisionTree,
    e: usize,
    u: &Status,
    from: Option<usize>,
    shift: usize,
    out: &mut DecisionTree,
    cap: usize,
) -> Result<usize, TreeError> {
    if out.edges.len() >= cap {
        return Err(TreeError::CapExceeded { cap });
    }
    let edge = &t.edges[e];
    let status = status_union(&edge.status, u)?;
    let src = &t.nodes[edge.to];
    let node = out.push_node(src.label.clone(), src.level + shift);
    let prob = realization_prob(g, &status.observed);
    out.edges.push(TreeEdge { status, prob, from, to: node });
    let id = out.edges.len() - 1;
    if let Some(f) = from {
        out.nodes[f].children.push(id);
    }
    for &c in &src.children {
        if is_compatible(&t.edges[c].status.observed, &u.observed) {
            copy_conditioned(g, t, c, u, Some(node), shift, out, cap)?;
        }
    }
    Ok(id)
}

/// `T₁ ⊕ T₂`: the leaf below every leaf-adjacent tree-edge `U` of `t1` is
/// replaced by `t2 | U`.
pub fn concat_trees(g: &Graph, t1: &DecisionTree, t2: &DecisionTree) -> Result<DecisionTree, TreeError> {
    let (Some(r1), Some(r2)) = (t1.root, t2.root) else {
        return Err(TreeError::Invalid("cannot concatenate an empty tree".into()));
    };
    let mut out = DecisionTree::default();
    concat_edge(g, t1, r1, t2, r2, None, &mut out)?;
    out.root = Some(0);
    Ok(out)
}

fn concat_edge(
    g: &Graph,
    t1: &DecisionTree,
    e: usize,
    t2: &DecisionTree,
    r2: usize,
    from: Option<usize>,
    out: &mut DecisionTree,
) -> Result<(), TreeError> {
    let edge = &t1.edges[e];
    let src = &t1.nodes[edge.to];
    if src.children.is_empty() {
        if !is_compatible(&t2.edges[r2].status.observed, &edge.status.observed) {
            return Err(TreeError::Incompatible);
        }
        copy_conditioned(g, t2, r2, &edge.status, from, src.level - 1, out, DEFAULT_TREE_CAP)?;
        return Ok(());
    }
    if out.edges.len() >= DEFAULT_TREE_CAP {
        return Err(TreeError::CapExceeded { cap: DEFAULT_TREE_CAP });
    }
    let node = out.push_node(src.label.clone(), src.level);
    out.edges.push(TreeEdge { status: edge.status.clone(), prob: edge.prob, from, to: node });
    let id = out.edges.len() - 1;
    if let Some(f) = from {
        out.nodes[f].children.push(id);
    }
    for &c in &src.children {
        concat_edge(g, t1, c, t2, r2, Some(node), out)?;
    }
    Ok(())
}

/// Largest `|Σ_children Pr[child] / Pr[parent] - 1|` over internal tree-nodes
/// reached with positive probability.
pub fn probability_sum_deviation(t: &DecisionTree) -> f64 {
    let mut worst: f64 = 0.0;
    for e in &t.edges {
        let node = &t.nodes[e.to];
        if node.children.is_empty() || e.prob == 0.0 {
            continue;
        }
        let sum: f64 = node.children.iter().map(|&c| t.edges[c].prob).sum();
        worst = worst.max((sum / e.prob - 1.0).abs());
    }
    worst
}

/// Structural invariants: statuses grow along every path and sibling
/// tree-edges carry distinct realizations.
pub fn validate_tree(t: &DecisionTree) -> Result<(), TreeError> {
    for e in &t.edges {
        let node = &t.nodes[e.to];
        let mut seen = BTreeSet::new();
        for &c in &node.children {
            let child = &t.edges[c].status;
            let grows = e.status.active.is_subset(&child.active)
                && e.status.observed.live().is_subset(child.observed.live())
                && e.status.observed.dead().is_subset(child.observed.dead());
            if !grows {
                return Err(TreeError::Invalid(format!("status shrinks below `{}`", e.status)));
            }
            if !seen.insert(&child.observed) {
                return Err(TreeError::Invalid(format!("duplicate sibling realization below `{}`", e.status)));
            }
        }
    }
    Ok(())
}

/// `max_v Δf_t(Ṡ(U), v, φ̇(U))`; zero when every node is active.
pub fn best_marginal(g: &Graph, u: &Status, t: Horizon) -> Result<f64, TreeError> {
    let gains = expected_marginals_exact(g, &u.active, &u.observed, t, DEFAULT_ENUMERATION_CAP)?;
    Ok(inactive(g, u).map(|v| gains[v]).fold(0.0, f64::max))
}

fn denominator(g: &Graph, u: &Status, t: Horizon) -> Result<f64, TreeError> {
    u.validate(g)?;
    if u.active.len() == g.node_count() {
        return Err(TreeError::NoInactiveNode);
    }
    let denom = best_marginal(g, u, t)?;
    if denom <= 0.0 {
        return Err(TreeError::ZeroGain);
    }
    Ok(denom)
}

/// `α_{t,d}(U)`: expected best gain after waiting `d` rounds over the best
/// gain now, with horizons `t - d` and `t`.
pub fn regret_ratio(g: &Graph, u: &Status, t: Horizon, d: Horizon) -> Result<f64, TreeError> {
    let rest = t.minus(d).ok_or(TreeError::HorizonTooShort { t, d })?;
    let denom = denominator(g, u, t)?;
    let mut num = 0.0;
    for (next, p) in d_round_statuses(g, u, d)? {
        num += p * best_marginal(g, &next, rest)?;
    }
    Ok(num / denom)
}

/// `U_f`: every unobserved out-edge of an active node declared dead.
pub fn pessimistic_final(g: &Graph, u: &Status) -> Status {
    let mut out = u.clone();
    for &a in &u.active {
        for &e in g.out_edges(a) {
            if !u.observed.is_observed(e) {
                out.observed.observe(e, false).expect("unobserved edge");
            }
        }
    }
    out
}

/// `N(U_f) / max_v Δf_t(Ṡ(U), v, φ̇(U))`, an upper bound on `α_{t,d}(U)`.
pub fn regret_upper_bound(g: &Graph, u: &Status, t: Horizon, d: Horizon) -> Result<f64, TreeError> {
    let rest = t.minus(d).ok_or(TreeError::HorizonTooShort { t, d })?;
    let denom = denominator(g, u, t)?;
    Ok(best_marginal(g, &pessimistic_final(g, u), rest)? / denom)
}

/// `α(T)`: the largest `α_{∞,∞}(U)` over tree statuses where some seed has
/// a positive gain; 1 if there is none.
pub fn regret_ratio_tree(g: &Graph, t: &DecisionTree) -> Result<f64, TreeError> {
    let statuses: BTreeSet<&Status> =
        t.edges.iter().map(|e| &e.status).filter(|s| s.active.len() < g.node_count()).collect();
    let mut alpha: f64 = 1.0;
    for u in statuses {
        match regret_ratio(g, u, Horizon::Unbounded, Horizon::Unbounded) {
            Ok(a) => alpha = alpha.max(a),
            Err(TreeError::ZeroGain) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(alpha)
}

/// Nodes `v` with `g₁(v) < g₂(v) - TOLERANCE`, where `gᵢ(v) = Δf_t(Ṡ(Uᵢ), v,
/// φ̇(Uᵢ))`, for a final `U₁` whose actives and observed edges are contained
/// in those of `U₂`.
pub fn submodularity_violations(
    g: &Graph,
    u1: &Status,
    u2: &Status,
    t: Horizon,
) -> Result<Vec<(NodeId, f64, f64)>, TreeError> {
    if !is_final(g, u1) {
        return Err(TreeError::Precondition(format!("`{u1}` is not final")));
    }
    let observed = |u: &Status| u.observed.live().union(u.observed.dead()).copied().collect::<BTreeSet<_>>();
    if !u1.active.is_subset(&u2.active) || !observed(u1).is_subset(&observed(u2)) {
        return Err(TreeError::Precondition(format!("`{u2}` does not extend `{u1}`")));
    }
    let g1 = expected_marginals_exact(g, &u1.active, &u1.observed, t, DEFAULT_ENUMERATION_CAP)?;
    let g2 = expected_marginals_exact(g, &u2.active, &u2.observed, t, DEFAULT_ENUMERATION_CAP)?;
    Ok((0..g.node_count()).filter(|&v| g1[v] < g2[v] - TOLERANCE).map(|v| (v, g1[v], g2[v])).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyBoundReport {
    pub f_greedy: f64,
    pub f_opt: f64,
    pub alpha: f64,
    /// `(1 - e^{-1/α}) · F_opt`.
    pub bound: f64,
    pub bound_satisfied: bool,
}

/// Checks `F(π_g) ≥ (1 - e^{-1/α(T_g)}) F(π*)` with the exact greedy rule.
pub fn check_greedy_bound(g: &Graph, k: usize, sched: FeedbackSchedule) -> Result<GreedyBoundReport, TreeError> {
    check_greedy_bound_with(g, &mut ExactGreedy::default(), k, sched)
}

/// As [`check_greedy_bound`] for any rule in place of greedy.
pub fn check_greedy_bound_with<R: DecisionRule + ?Sized>(
    g: &Graph,
    greedy: &mut R,
    k: usize,
    sched: FeedbackSchedule,
) -> Result<GreedyBoundReport, TreeError> {
    let plain = build_policy_tree(g, greedy, k, sched, false)?;
    let f_greedy = if sched == FeedbackSchedule::NonAdaptive {
        tree_profit(g, &plain)?
    } else {
        tree_profit(g, &build_policy_tree(g, greedy, k, sched, true)?)?
    };
    let alpha = regret_ratio_tree(g, &plain)?;
    let f_opt = OptimalRule::new(k, sched).optimum(g)?;
    let bound = (1.0 - (-1.0 / alpha).exp()) * f_opt;
    Ok(GreedyBoundReport { f_greedy, f_opt, alpha, bound, bound_satisfied: f_greedy >= bound - TOLERANCE })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRow {
    pub i: usize,
    pub l: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub alpha: f64,
    pub rows: Vec<StepRow>,
}

impl StepReport {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// For all `i, l ∈ 1..=k` checks
/// `F(P_{i-1,l}) - F(P_{i-1,l-1}) ≤ α(T_g)·(F(T_g^i) - F(T_g^{i-1}))`
/// where `P_{i-1,l} = T_g^i ⊕ T_*^l` with `T_g^i` the lazy greedy tree of
/// budget `i`, `P_{i-1,0} = T_g^{i-1}` and `F(T_g^0) = 0`. Concatenating
/// onto the lazy tree drops its deferred seed, so `P_{i-1,l}` runs `i - 1`
/// greedy seeds to termination and then `l` seeds of `π*`.
pub fn check_step_bound<R: DecisionRule + ?Sized>(
    g: &Graph,
    k: usize,
    sched: FeedbackSchedule,
    comparison: &mut R,
) -> Result<StepReport, TreeError> {
    check_step_bound_with(g, &mut ExactGreedy::default(), k, sched, comparison)
}

pub fn check_step_bound_with<G: DecisionRule + ?Sized, R: DecisionRule + ?Sized>(
    g: &Graph,
    greedy: &mut G,
    k: usize,
    sched: FeedbackSchedule,
    comparison: &mut R,
) -> Result<StepReport, TreeError> {
    check_budget(g, k, sched, true)?;
    let alpha = regret_ratio_tree(g, &build_policy_tree(g, greedy, k, sched, false)?)?;
    let mut lazy = Vec::new();
    let mut f_greedy = vec![0.0];
    for i in 1..=k {
        let t = build_policy_tree(g, greedy, i, sched, true)?;
        f_greedy.push(tree_profit(g, &t)?);
        lazy.push(t);
    }
    let mut f_star = Vec::new();
    for l in 1..=k {
        let t = build_policy_tree(g, comparison, l, sched, false)?;
        f_star.push(t);
    }
    let mut rows = Vec::new();
    for i in 1..=k {
        let mut prev = f_greedy[i - 1];
        for l in 1..=k {
            let cur = tree_profit(g, &concat_trees(g, &lazy[i - 1], &f_star[l - 1])?)?;
            let lhs = cur - prev;
            let rhs = alpha * (f_greedy[i] - f_greedy[i - 1]);
            rows.push(StepRow { i, l, lhs, rhs, holds: lhs <= rhs + TOLERANCE });
            prev = cur;
        }
    }
    Ok(StepReport { alpha, rows })
}
