//! Directed graphs with per-edge activation probabilities.
//!
//! Edge-list files are UTF-8 text with one record per line:
//!
//! ```text
//! # comment
//! u v          # edge, probability assigned by the model
//! u v 0.25     # edge with an explicit probability
//! u,v,0.25     # a single comma also separates fields
//! w            # a lone token declares a (possibly isolated) node
//! ```
//!
//! Node labels are arbitrary tokens. When every label is a non-negative
//! integer the dense ids follow numeric order, otherwise they follow first
//! appearance. Self-loops are dropped and parallel edges are collapsed to the
//! first occurrence.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::rng;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: probability {value} outside (0, 1]")]
    BadProbability { line: usize, value: f64 },
    #[error("line {line}: missing probability column")]
    MissingProbability { line: usize },
    #[error("edge list contains no nodes")]
    Empty,
    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error("{edges} edges requested but a simple digraph on {nodes} nodes has at most {max}")]
    TooManyEdges { nodes: usize, edges: usize, max: usize },
    #[error("graph needs at least one node")]
    NoNodes,
}

/// How activation probabilities are assigned to edges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbabilityModel {
    /// Every edge gets the same probability.
    Uniform(f64),
    /// `p(u, v) = 1 / indegree(v)`.
    WeightedCascade,
    /// The third column of every edge line.
    FromFile,
}

/// Immutable directed graph in compressed adjacency form.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    node_count: usize,
    sources: Vec<NodeId>,
    targets: Vec<NodeId>,
    probs: Vec<f64>,
    thresholds: Vec<u64>,
    out_offsets: Vec<usize>,
    out_edges: Vec<EdgeId>,
    in_offsets: Vec<usize>,
    in_edges: Vec<EdgeId>,
    // Sources and thresholds laid out in in-edge order for reverse traversals.
    in_sources: Vec<NodeId>,
    in_thresholds: Vec<u64>,
    labels: Vec<String>,
}

fn check_prob(p: f64) -> Result<f64, GraphError> {
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(GraphError::InvalidProbability(p))
    }
}

fn csr(node_count: usize, keys: &[NodeId]) -> (Vec<usize>, Vec<EdgeId>) {
    let mut offsets = vec![0usize; node_count + 1];
    for &k in keys {
        offsets[k + 1] += 1;
    }
    for i in 0..node_count {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut items = vec![0; keys.len()];
    for (e, &k) in keys.iter().enumerate() {
        items[cursor[k]] = e;
        cursor[k] += 1;
    }
    (offsets, items)
}

impl Graph {
    /// Builds a graph from an edge list with explicit probabilities.
    ///
    /// Self-loops are dropped and duplicate `(u, v)` pairs keep the first
    /// probability. Edge ids follow the order of the surviving edges.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, GraphError> {
        let labels = (0..node_count).map(|i| i.to_string()).collect();
        Self::from_labelled_edges(labels, edges)
    }

    /// Like [`Graph::from_edges`] with one edge probability for all edges.
    pub fn uniform(node_count: usize, edges: &[(NodeId, NodeId)], p: f64) -> Result<Self, GraphError> {
        check_prob(p)?;
        let e: Vec<_> = edges.iter().map(|&(u, v)| (u, v, p)).collect();
        Self::from_edges(node_count, &e)
    }

    fn from_labelled_edges(labels: Vec<String>, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, GraphError> {
        let node_count = labels.len();
        if node_count == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut sources = Vec::with_capacity(edges.len());
        let mut targets = Vec::with_capacity(edges.len());
        let mut probs = Vec::with_capacity(edges.len());
        for &(u, v, p) in edges {
            assert!(u < node_count && v < node_count, "edge ({u}, {v}) out of range");
            check_prob(p)?;
            if u == v {
                continue;
            }
            if !seen.insert((u, v)) {
                log::warn!("duplicate edge ({}, {}) ignored", labels[u], labels[v]);
                continue;
            }
            sources.push(u);
            targets.push(v);
            probs.push(p);
        }
        let (out_offsets, out_edges) = csr(node_count, &sources);
        let (in_offsets, in_edges) = csr(node_count, &targets);
        let thresholds: Vec<u64> = probs.iter().map(|&p| rng::threshold(p)).collect();
        let in_sources = in_edges.iter().map(|&e| sources[e]).collect();
        let in_thresholds = in_edges.iter().map(|&e| thresholds[e]).collect();
        Ok(Graph {
            node_count,
            sources,
            targets,
            probs,
            thresholds,
            out_offsets,
            out_edges,
            in_offsets,
            in_edges,
            in_sources,
            in_thresholds,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    #[inline]
    pub fn source(&self, e: EdgeId) -> NodeId {
        self.sources[e]
    }

    #[inline]
    pub fn target(&self, e: EdgeId) -> NodeId {
        self.targets[e]
    }

    #[inline]
    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        (self.sources[e], self.targets[e])
    }

    #[inline]
    pub fn prob(&self, e: EdgeId) -> f64 {
        self.probs[e]
    }

    /// Threshold on a uniform `u64` draw below which the edge is live.
    #[inline]
    pub fn threshold(&self, e: EdgeId) -> u64 {
        self.thresholds[e]
    }

    /// Out-edges of `v`, in increasing edge id.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// In-edges of `v`, in increasing edge id.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    /// In-edges of `v` with their sources and thresholds, as parallel slices.
    #[inline]
    pub(crate) fn in_adjacency(&self, v: NodeId) -> (&[EdgeId], &[NodeId], &[u64]) {
        let r = self.in_offsets[v]..self.in_offsets[v + 1];
        (&self.in_edges[r.clone()], &self.in_sources[r.clone()], &self.in_thresholds[r])
    }

    /// Position of `v`'s first in-edge in in-edge order, and the sources of its
    /// in-edges.
    #[inline]
    pub(crate) fn in_slots(&self, v: NodeId) -> (usize, &[NodeId]) {
        let (a, b) = (self.in_offsets[v], self.in_offsets[v + 1]);
        (a, &self.in_sources[a..b])
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    /// Original label of a dense node id.
    pub fn label(&self, v: NodeId) -> &str {
        &self.labels[v]
    }

    pub fn find_edge(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.out_edges(u).iter().copied().find(|&e| self.targets[e] == v)
    }

    /// Same topology with every edge probability replaced.
    pub fn with_uniform_prob(&self, p: f64) -> Result<Self, GraphError> {
        check_prob(p)?;
        let mut g = self.clone();
        g.probs.iter_mut().for_each(|q| *q = p);
        g.thresholds = g.probs.iter().map(|&q| rng::threshold(q)).collect();
        g.in_thresholds = g.in_edges.iter().map(|&e| g.thresholds[e]).collect();
        Ok(g)
    }

    /// Serializes to the edge-list format: every node as a declaration line in
    /// id order, then one `u v p` line per edge in id order.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for label in &self.labels {
            let _ = writeln!(s, "{label}");
        }
        for e in 0..self.edge_count() {
            let _ = writeln!(
                s,
                "{} {} {}",
                self.labels[self.sources[e]], self.labels[self.targets[e]], self.probs[e]
            );
        }
        s
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses edge-list text into a graph.
pub fn parse_edge_list(text: &str, model: ProbabilityModel) -> Result<Graph, GraphError> {
    if let ProbabilityModel::Uniform(p) = model {
        check_prob(p)?;
    }

    struct Raw<'a> {
        u: &'a str,
        v: &'a str,
        p: Option<f64>,
    }

    let mut order: Vec<&str> = Vec::new();
    let mut known: HashSet<&str> = HashSet::new();
    let mut raw = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        if fields.iter().any(|f| f.is_empty()) {
            return Err(GraphError::Malformed { line: lineno, reason: "empty field".into() });
        }
        let mut note = |t| {
            if known.insert(t) {
                order.push(t);
            }
        };
        match fields.as_slice() {
            [w] => note(*w),
            [u, v] => {
                note(*u);
                note(*v);
                if model == ProbabilityModel::FromFile {
                    return Err(GraphError::MissingProbability { line: lineno });
                }
                raw.push(Raw { u, v, p: None });
            }
            [u, v, p] => {
                note(*u);
                note(*v);
                let value: f64 = p.parse().map_err(|_| GraphError::Malformed {
                    line: lineno,
                    reason: format!("cannot parse probability {p:?}"),
                })?;
                if !(value > 0.0 && value <= 1.0) {
                    return Err(GraphError::BadProbability { line: lineno, value });
                }
                raw.push(Raw { u, v, p: Some(value) });
            }
            _ => {
                return Err(GraphError::Malformed {
                    line: lineno,
                    reason: format!("expected 1 to 3 fields, found {}", fields.len()),
                })
            }
        }
    }
    if order.is_empty() {
        return Err(GraphError::Empty);
    }

    let numeric: Option<Vec<u64>> = order.iter().map(|t| t.parse::<u64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut idx: Vec<usize> = (0..order.len()).collect();
        idx.sort_by_key(|&i| nums[i]);
        order = idx.into_iter().map(|i| order[i]).collect();
    }
    let ids: HashMap<&str, NodeId> = order.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let labels: Vec<String> = order.iter().map(|t| t.to_string()).collect();

    let mut edges: Vec<(NodeId, NodeId, f64)> = raw
        .iter()
        .map(|r| (ids[r.u], ids[r.v], r.p.unwrap_or(1.0)))
        .collect();
    match model {
        ProbabilityModel::FromFile => {}
        ProbabilityModel::Uniform(p) => edges.iter_mut().for_each(|e| e.2 = p),
        ProbabilityModel::WeightedCascade => {
            // in-degree after dropping self-loops and duplicates
            let mut seen = HashSet::new();
            let mut indeg = vec![0usize; labels.len()];
            for &(u, v, _) in &edges {
                if u != v && seen.insert((u, v)) {
                    indeg[v] += 1;
                }
            }
            for e in &mut edges {
                if e.0 != e.1 {
                    e.2 = 1.0 / indeg[e.1] as f64;
                }
            }
        }
    }
    Graph::from_labelled_edges(labels, &edges)
}

/// Reads an edge-list file.
pub fn load_graph(path: impl AsRef<Path>, model: ProbabilityModel) -> Result<Graph, GraphError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edge_list(&text, model)
}

/// `m` distinct directed edges drawn uniformly without replacement from the
/// `n (n - 1)` possible ones, all with probability `p`.
pub fn random_graph(n: usize, m: usize, p: f64, rng_seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::NoNodes);
    }
    check_prob(p)?;
    let max = n * (n - 1);
    if m > max {
        return Err(GraphError::TooManyEdges { nodes: n, edges: m, max });
    }
    let mut r = rng::stream(rng_seed, 0);
    let mut picks = index::sample(&mut r, max, m).into_vec();
    picks.sort_unstable();
    let edges: Vec<_> = picks
        .into_iter()
        .map(|i| {
            let u = i / (n - 1);
            let r = i % (n - 1);
            let v = if r < u { r } else { r + 1 };
            (u, v, p)
        })
        .collect();
    Graph::from_edges(n, &edges)
}

/// Directed scale-free graph with `m` distinct edges.
///
/// Each node gets an out-weight and an in-weight following a power law with
/// the given degree exponent (in-weights are assigned to a random permutation
/// of the nodes), and edges are drawn with probability proportional to
/// `w_out(u) * w_in(v)`, rejecting self-loops and repeats.
pub fn power_law_graph(n: usize, m: usize, exponent: f64, p: f64, rng_seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::NoNodes);
    }
    check_prob(p)?;
    let max = n * (n - 1);
    if m > max / 2 {
        return Err(GraphError::TooManyEdges { nodes: n, edges: m, max: max / 2 });
    }
    assert!(exponent > 2.0, "degree exponent must exceed 2");
    let mut r = rng::stream(rng_seed, 0);
    let alpha = 1.0 / (exponent - 1.0);
    let weights: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).powf(-alpha)).collect();
    let cumulative = |w: &[f64]| {
        let mut acc = 0.0;
        w.iter()
            .map(|x| {
                acc += x;
                acc
            })
            .collect::<Vec<f64>>()
    };
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, r.gen_range(0..=i));
    }
    let in_weights: Vec<f64> = perm.iter().map(|&i| weights[i]).collect();
    let out_cum = cumulative(&weights);
    let in_cum = cumulative(&in_weights);
    let draw = |cum: &[f64], r: &mut rand::rngs::SmallRng| {
        let x = r.gen::<f64>() * cum[cum.len() - 1];
        cum.partition_point(|&c| c <= x).min(cum.len() - 1)
    };
    let mut seen = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = draw(&out_cum, &mut r);
        let v = draw(&in_cum, &mut r);
        if u != v && seen.insert((u, v)) {
            edges.push((u, v, p));
        }
    }
    Graph::from_edges(n, &edges)
}

/// Parameters of a directed LFR-style benchmark graph: power-law degrees,
/// power-law community sizes, and a fraction `mixing` of each node's
/// out-edges leaving its community.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LfrParams {
    pub nodes: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub degree_exponent: f64,
    pub community_exponent: f64,
    pub min_community: usize,
    pub max_community: usize,
    pub mixing: f64,
}

impl LfrParams {
    /// 2,500 nodes and 26,000 edges with the customary LFR settings
    /// (degree exponent 2, community exponent 1, mixing 0.1).
    pub fn power() -> Self {
        LfrParams {
            nodes: 2500,
            edges: 26_000,
            max_degree: 50,
            degree_exponent: 2.0,
            community_exponent: 1.0,
            min_community: 20,
            max_community: 100,
            mixing: 0.1,
        }
    }
}

/// Mean of the continuous power law `x^-γ` on `[lo, hi]`.
fn power_law_mean(lo: f64, hi: f64, gamma: f64) -> f64 {
    let moment = |a: f64| {
        if a.abs() < 1e-12 {
            hi.ln() - lo.ln()
        } else {
            (hi.powf(a) - lo.powf(a)) / a
        }
    };
    moment(2.0 - gamma) / moment(1.0 - gamma)
}

/// Inverse-CDF draw from the continuous power law `x^-γ` on `[lo, hi]`.
fn power_law_draw(lo: f64, hi: f64, gamma: f64, r: &mut impl Rng) -> f64 {
    let u: f64 = r.gen();
    if (gamma - 1.0).abs() < 1e-12 {
        return lo * (hi / lo).powf(u);
    }
    let a = 1.0 - gamma;
    (lo.powf(a) + u * (hi.powf(a) - lo.powf(a))).powf(1.0 / a)
}

/// Degree sequence with the given exponent and maximum, summing to `total`.
fn degree_sequence(n: usize, total: usize, max: usize, gamma: f64, r: &mut impl Rng) -> Vec<usize> {
    let target = total as f64 / n as f64;
    let (mut lo, mut hi) = (0.01f64, max as f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if power_law_mean(mid, max as f64, gamma) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let kmin = 0.5 * (lo + hi);
    let mut deg: Vec<usize> =
        (0..n).map(|_| (power_law_draw(kmin, max as f64, gamma, r).round() as usize).clamp(1, max)).collect();
    let mut sum: usize = deg.iter().sum();
    while sum != total {
        let i = r.gen_range(0..n);
        if sum < total && deg[i] < max {
            deg[i] += 1;
            sum += 1;
        } else if sum > total && deg[i] > 1 {
            deg[i] -= 1;
            sum -= 1;
        }
    }
    deg
}

/// Picks a node from `pool` with probability proportional to `weight`,
/// avoiding `taken`.
fn weighted_pick(pool: &[NodeId], cum: &[f64], taken: &HashSet<NodeId>, r: &mut impl Rng) -> Option<NodeId> {
    let total = *cum.last()?;
    for _ in 0..64 {
        let x = r.gen::<f64>() * total;
        let v = pool[cum.partition_point(|&c| c <= x).min(pool.len() - 1)];
        if !taken.contains(&v) {
            return Some(v);
        }
    }
    let free: Vec<NodeId> = pool.iter().copied().filter(|v| !taken.contains(v)).collect();
    if free.is_empty() {
        None
    } else {
        Some(free[r.gen_range(0..free.len())])
    }
}

fn cumulative(pool: &[NodeId], weight: &[usize]) -> Vec<f64> {
    let mut acc = 0.0;
    pool.iter()
        .map(|&v| {
            acc += weight[v] as f64;
            acc
        })
        .collect()
}

/// Directed LFR-style benchmark graph with uniform probability `p`.
///
/// Out-degrees and in-degree weights follow independent power laws, nodes
/// are packed into power-law sized communities (high-degree nodes into large
/// ones), and each node sends `round((1 - mixing) · deg)` edges inside its
/// community, targets drawn proportional to in-weight.
pub fn lfr_graph(params: &LfrParams, p: f64, rng_seed: u64) -> Result<Graph, GraphError> {
    let LfrParams { nodes: n, edges: m, max_degree, degree_exponent, community_exponent, min_community, max_community, mixing } =
        *params;
    if n == 0 {
        return Err(GraphError::NoNodes);
    }
    check_prob(p)?;
    assert!(max_degree < max_community && min_community <= max_community && max_community <= n);
    assert!((0.0..=1.0).contains(&mixing));
    if m > n * max_degree {
        return Err(GraphError::TooManyEdges { nodes: n, edges: m, max: n * max_degree });
    }
    let mut r = rng::stream(rng_seed, 1);
    let out_deg = degree_sequence(n, m, max_degree, degree_exponent, &mut r);
    let mut in_weight = degree_sequence(n, m, max_degree, degree_exponent, &mut r);
    for i in (1..n).rev() {
        in_weight.swap(i, r.gen_range(0..=i));
    }

    let mut sizes = Vec::new();
    let mut filled = 0;
    while filled < n {
        let s = (power_law_draw(min_community as f64, max_community as f64 + 1.0, community_exponent, &mut r) as usize)
            .clamp(min_community, max_community)
            .min(n - filled);
        sizes.push(s);
        filled += s;
    }
    if sizes.len() > 1 && *sizes.last().unwrap() < min_community {
        let tail = sizes.pop().unwrap();
        let k = sizes.len();
        for j in 0..tail {
            sizes[j % k] += 1;
        }
    }

    // Highest internal degree first, each into a random community that can
    // still host it.
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(out_deg[v]));
    let mut free = sizes.clone();
    let mut community = vec![0usize; n];
    for &v in &order {
        let need = ((1.0 - mixing) * out_deg[v] as f64).round() as usize + 1;
        let fits: Vec<usize> = (0..sizes.len()).filter(|&c| free[c] > 0 && sizes[c] >= need).collect();
        let c = if fits.is_empty() {
            (0..sizes.len()).filter(|&c| free[c] > 0).max_by_key(|&c| sizes[c]).unwrap()
        } else {
            fits[r.gen_range(0..fits.len())]
        };
        community[v] = c;
        free[c] -= 1;
    }
    let mut members: Vec<Vec<NodeId>> = vec![Vec::new(); sizes.len()];
    for v in 0..n {
        members[community[v]].push(v);
    }
    let member_cum: Vec<Vec<f64>> = members.iter().map(|pool| cumulative(pool, &in_weight)).collect();
    let everyone: Vec<NodeId> = (0..n).collect();
    let everyone_cum = cumulative(&everyone, &in_weight);

    let mut edges = Vec::with_capacity(m);
    for u in 0..n {
        let c = community[u];
        let internal = (((1.0 - mixing) * out_deg[u] as f64).round() as usize).min(members[c].len() - 1);
        let mut taken: HashSet<NodeId> = HashSet::from([u]);
        for _ in 0..internal {
            if let Some(v) = weighted_pick(&members[c], &member_cum[c], &taken, &mut r) {
                taken.insert(v);
                edges.push((u, v, p));
            }
        }
        let mut outside = 0;
        let want = out_deg[u] - internal;
        let mut attempts = 0;
        while outside < want && attempts < 64 * want + 64 {
            attempts += 1;
            let x = r.gen::<f64>() * everyone_cum[n - 1];
            let v = everyone_cum.partition_point(|&cv| cv <= x).min(n - 1);
            if community[v] != c && taken.insert(v) {
                edges.push((u, v, p));
                outside += 1;
            }
        }
    }
    Graph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lfr_shape() {
        let params = LfrParams { nodes: 300, edges: 2000, max_degree: 30, min_community: 20, max_community: 60, ..LfrParams::power() };
        let g = lfr_graph(&params, 0.1, 5).unwrap();
        assert_eq!(g.node_count(), 300);
        assert!(g.edge_count() > 1900 && g.edge_count() <= 2000, "{}", g.edge_count());
        assert!((0..300).all(|v| g.out_degree(v) <= 30));
        assert!((0..g.edge_count()).all(|e| g.prob(e) == 0.1 && g.source(e) != g.target(e)));
        assert_eq!(g, lfr_graph(&params, 0.1, 5).unwrap());
    }

    #[test]
    fn uniform_example() {
        let g = parse_edge_list("0 1\n1 2", ProbabilityModel::Uniform(0.1)).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert!((0..2).all(|e| g.prob(e) == 0.1));
    }

    #[test]
    fn weighted_cascade_example() {
        let g = parse_edge_list("0 1\n2 1", ProbabilityModel::WeightedCascade).unwrap();
        assert_eq!(g.prob(0), 0.5);
        assert_eq!(g.prob(1), 0.5);
    }

    #[test]
    fn from_file_example() {
        let g = parse_edge_list("0 1 0.25", ProbabilityModel::FromFile).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.prob(0), 0.25);
    }

    #[test]
    fn comma_and_comments() {
        let text = "# header\n\na,b,0.5\nb,c,1\n";
        let g = parse_edge_list(text, ProbabilityModel::FromFile).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.label(0), "a");
        assert_eq!(g.label(2), "c");
        assert_eq!(g.prob(1), 1.0);
    }

    #[test]
    fn numeric_labels_are_sorted_and_dense() {
        let g = parse_edge_list("10 3\n3 7", ProbabilityModel::Uniform(0.5)).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.label(0), "3");
        assert_eq!(g.label(1), "7");
        assert_eq!(g.label(2), "10");
        assert_eq!(g.endpoints(0), (2, 0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_edge_list("0 1\n1 2 3 4", ProbabilityModel::Uniform(0.1)),
            Err(GraphError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 1.5", ProbabilityModel::FromFile),
            Err(GraphError::BadProbability { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 0", ProbabilityModel::FromFile),
            Err(GraphError::BadProbability { .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 x", ProbabilityModel::FromFile),
            Err(GraphError::Malformed { .. })
        ));
        assert!(matches!(
            parse_edge_list("0 1 0.5\n1 2", ProbabilityModel::FromFile),
            Err(GraphError::MissingProbability { line: 2 })
        ));
        assert!(matches!(parse_edge_list("# nothing\n", ProbabilityModel::WeightedCascade), Err(GraphError::Empty)));
        assert!(matches!(parse_edge_list("", ProbabilityModel::WeightedCascade), Err(GraphError::Empty)));
        assert!(parse_edge_list("0 1", ProbabilityModel::Uniform(0.0)).is_err());
        assert!(parse_edge_list("0,,1", ProbabilityModel::Uniform(0.5)).is_err());
    }

    #[test]
    fn duplicates_and_self_loops() {
        let g = parse_edge_list("0 1 0.2\n0 1 0.9\n1 1 0.5\n", ProbabilityModel::FromFile).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.prob(0), 0.2);
        // the duplicate does not inflate the weighted-cascade in-degree
        let g = parse_edge_list("0 1\n0 1\n2 1\n", ProbabilityModel::WeightedCascade).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.prob(0), 0.5);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_graph("/nonexistent/graph.txt", ProbabilityModel::Uniform(0.1)).unwrap_err();
        assert!(matches!(err, GraphError::Io { .. }));
    }

    #[test]
    fn random_graph_examples() {
        let g = random_graph(1, 0, 0.5, 9).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
        let g = random_graph(3, 6, 0.5, 9).unwrap();
        for u in 0..3 {
            for v in 0..3 {
                assert_eq!(g.find_edge(u, v).is_some(), u != v);
            }
        }
        assert_eq!(random_graph(20, 50, 0.3, 4).unwrap(), random_graph(20, 50, 0.3, 4).unwrap());
        assert!(matches!(random_graph(3, 7, 0.5, 0), Err(GraphError::TooManyEdges { .. })));
    }

    #[test]
    fn power_law_graph_shape() {
        let g = power_law_graph(500, 4000, 2.5, 0.1, 3).unwrap();
        assert_eq!(g.node_count(), 500);
        assert_eq!(g.edge_count(), 4000);
        let max_out = (0..500).map(|v| g.out_degree(v)).max().unwrap();
        assert!(max_out > 40, "expected a heavy tail, max out-degree {max_out}");
    }

    fn check_adjacency(g: &Graph) {
        let mut seen_out = vec![false; g.edge_count()];
        let mut seen_in = vec![false; g.edge_count()];
        for v in 0..g.node_count() {
            for &e in g.out_edges(v) {
                assert_eq!(g.source(e), v);
                seen_out[e] = true;
            }
            for &e in g.in_edges(v) {
                assert_eq!(g.target(e), v);
                seen_in[e] = true;
            }
        }
        assert!(seen_out.iter().all(|&b| b));
        assert!(seen_in.iter().all(|&b| b));
    }

    proptest! {
        #[test]
        fn edge_list_round_trip(n in 1usize..12, frac in 0.0f64..1.0, seed in any::<u64>(), p in 0.01f64..1.0) {
            let m = ((n * (n - 1)) as f64 * frac) as usize;
            let g = random_graph(n, m, p, seed).unwrap();
            check_adjacency(&g);
            let back = parse_edge_list(&g.to_edge_list(), ProbabilityModel::FromFile).unwrap();
            prop_assert_eq!(back, g);
        }

        #[test]
        fn weighted_cascade_invariant(n in 2usize..10, frac in 0.0f64..1.0, seed in any::<u64>()) {
            let m = ((n * (n - 1)) as f64 * frac) as usize;
            let g = random_graph(n, m, 0.5, seed).unwrap();
            let text: String = (0..g.edge_count())
                .map(|e| format!("{} {}\n", g.source(e), g.target(e)))
                .collect();
            prop_assume!(!text.is_empty());
            let wc = parse_edge_list(&text, ProbabilityModel::WeightedCascade).unwrap();
            for v in 0..wc.node_count() {
                let k = wc.in_degree(v);
                for &e in wc.in_edges(v) {
                    prop_assert_eq!(wc.prob(e), 1.0 / k as f64);
                }
            }
        }
    }
}
