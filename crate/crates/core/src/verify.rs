//! Verification battery over small random instances, where every expectation
//! is computed by enumeration.

use std::collections::BTreeSet;
use std::fmt;

use rand::rngs::SmallRng;
use rand::Rng;

use crate::diffusion::marginal_delta;
use crate::graph::{Graph, NodeId};
use crate::process::FeedbackSchedule;
use crate::realization::{for_each_completion, is_final, Horizon, Realization, Status, DEFAULT_ENUMERATION_CAP};
use crate::rng;
use crate::tree::{
    build_policy_tree, check_step_bound_with, check_greedy_bound_with, concat_trees, one_round_statuses, probability_sum_deviation,
    regret_ratio, regret_upper_bound, submodularity_violations, tree_profit, validate_tree, DecisionRule, DegreeRule,
    ExactGreedy, HashRule, OptimalRule, TreeError, TOLERANCE,
};

pub const PROBABILITIES: [f64; 3] = [0.3, 0.5, 1.0];

/// A tiny graph with a budget and a feedback schedule.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub k: usize,
    pub sched: FeedbackSchedule,
}

impl fmt::Display for Instance {
    /// `nodes=3 k=2 d=1 edges=0>1:0.5,1>2:0.5`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.graph;
        let edges: Vec<String> = (0..g.edge_count())
            .map(|e| {
                let (u, v) = g.endpoints(e);
                format!("{u}>{v}:{}", g.prob(e))
            })
            .collect();
        write!(f, "nodes={} k={} d={} edges={}", g.node_count(), self.k, self.sched.label(), edges.join(","))
    }
}

/// Random graph on at most `max_nodes` nodes: each ordered pair is an edge
/// with probability 1/2, all with one probability from [`PROBABILITIES`].
pub fn random_tiny_graph(rng: &mut SmallRng, max_nodes: usize) -> Graph {
    let n = rng.gen_range(1..=max_nodes);
    let p = PROBABILITIES[rng.gen_range(0..PROBABILITIES.len())];
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen_bool(0.5) {
                edges.push((u, v));
            }
        }
    }
    Graph::uniform(n, &edges, p).expect("valid tiny graph")
}

/// Graph with at most 4 nodes, `k ∈ {1, 2}` and `d ∈ {1, 2, ∞}`.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng::stream(seed, 0);
    let graph = random_tiny_graph(&mut rng, 4);
    let k = rng.gen_range(1..=2).min(graph.node_count());
    let sched = [FeedbackSchedule::Finite(1), FeedbackSchedule::Finite(2), FeedbackSchedule::FullAdoption]
        [rng.gen_range(0..3)];
    Instance { graph, k, sched }
}

/// Runs `rounds` observed rounds from `u`, sampling fresh coins.
fn advance(g: &Graph, u: &Status, rounds: Horizon, rng: &mut SmallRng) -> Status {
    let mut s = u.clone();
    let max = match rounds {
        Horizon::Finite(r) => r as usize,
        Horizon::Unbounded => usize::MAX,
    };
    let mut r = 0;
    while r < max && !s.pending_frontier(g).is_empty() {
        let outcomes = one_round_statuses(g, &s).expect("tiny graph");
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = outcomes.last().expect("at least one outcome").0.clone();
        for (cand, p) in outcomes {
            acc += p;
            if x < acc {
                next = cand;
                break;
            }
        }
        s = next;
        r += 1;
    }
    s
}

fn random_inactive(g: &Graph, u: &Status, rng: &mut SmallRng) -> Option<NodeId> {
    let free: Vec<NodeId> = (0..g.node_count()).filter(|v| !u.active.contains(v)).collect();
    (!free.is_empty()).then(|| free[rng.gen_range(0..free.len())])
}

/// A status some seeding process can reach: a few random seeds, each
/// followed by a random number of observed rounds.
pub fn random_process_status(g: &Graph, rng: &mut SmallRng) -> Status {
    let mut u = Status::empty();
    for _ in 0..rng.gen_range(0..=2) {
        let Some(v) = random_inactive(g, &u, rng) else { break };
        u = u.with_active([v]);
        u = advance(g, &u, Horizon::Finite(rng.gen_range(0..=2)), rng);
    }
    u
}

/// A final status `U₁` and an extension `U₂` reached from it by more seeds
/// and rounds.
pub fn random_final_pair(g: &Graph, rng: &mut SmallRng) -> (Status, Status) {
    let mut u1 = random_process_status(g, rng);
    u1 = advance(g, &u1, Horizon::Unbounded, rng);
    let mut u2 = u1.clone();
    for _ in 0..rng.gen_range(0..=2) {
        let Some(v) = random_inactive(g, &u2, rng) else { break };
        u2 = u2.with_active([v]);
        u2 = advance(g, &u2, Horizon::Finite(rng.gen_range(0..=2)), rng);
    }
    (u1, u2)
}

/// `Δf_∞(Ṡ(U), v, φ̇(U))` for every node, one completion at a time.
fn brute_gains(g: &Graph, u: &Status) -> Vec<f64> {
    let mut gains = vec![0.0; g.node_count()];
    for_each_completion(g, &u.observed, DEFAULT_ENUMERATION_CAP, |live, p| {
        let psi = Realization::from_live_mask(live);
        for (v, gain) in gains.iter_mut().enumerate() {
            let d = marginal_delta(g, &u.active, &BTreeSet::from([v]), &psi, Horizon::Unbounded).expect("full");
            *gain += p * d as f64;
        }
    })
    .expect("tiny graph");
    gains
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
}

impl CheckResult {
    fn new(name: &'static str) -> Self {
        CheckResult { name, passed: 0, failed: 0, first_failure: None }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(detail());
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatteryReport {
    pub instances: usize,
    pub checks: Vec<CheckResult>,
}

impl BatteryReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn render(&self) -> String {
        let mut out = format!("instances: {}\n", self.instances);
        for c in &self.checks {
            let verdict = if c.failed == 0 { "PASS" } else { "FAIL" };
            out += &format!("{verdict} {} ({} ok, {} violated)\n", c.name, c.passed, c.failed);
            if let Some(why) = &c.first_failure {
                out += &format!("  first violation: {why}\n");
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatteryConfig {
    pub instances: usize,
    pub seed: u64,
    /// Swaps the greedy rule for one that picks the worst node.
    pub inject_fault: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig { instances: 50, seed: 1, inject_fault: false }
    }
}

const CHECKS: [&str; 9] = [
    "greedy-bound",
    "greedy-oracle",
    "lazy-equivalence",
    "branch-probabilities",
    "concatenation",
    "step-bound",
    "regret-bounds",
    "regret-monotone",
    "submodularity",
];

/// Runs every check on `instances` random instances.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport, TreeError> {
    let mut checks: Vec<CheckResult> = CHECKS.iter().map(|&n| CheckResult::new(n)).collect();
    for i in 0..cfg.instances {
        let seed = rng::derive(cfg.seed, i as u64);
        let inst = random_instance(seed);
        let mut rng = rng::stream(seed, 1);
        check_instance(&inst, ExactGreedy { fault: cfg.inject_fault }, &mut rng, &mut checks)
            .map_err(|e| TreeError::Invalid(format!("{inst}: {e}")))?;
    }
    Ok(BatteryReport { instances: cfg.instances, checks })
}

fn check_instance(
    inst: &Instance,
    mut greedy: ExactGreedy,
    rng: &mut SmallRng,
    checks: &mut [CheckResult],
) -> Result<(), TreeError> {
    let g = &inst.graph;
    let (k, sched) = (inst.k, inst.sched);
    let at = |x: String| format!("{inst}: {x}");

    let r = check_greedy_bound_with(g, &mut greedy, k, sched)?;
    checks[0].record(r.bound_satisfied, || at(format!("F_greedy={} < bound={} (alpha={})", r.f_greedy, r.bound, r.alpha)));

    let plain = build_policy_tree(g, &mut greedy, k, sched, false)?;
    let lazy = build_policy_tree(g, &mut greedy, k, sched, true)?;
    for e in plain.edges().iter().filter(|e| e.status.active.len() < g.node_count()) {
        let v = greedy.choose(g, &e.status, 0)?;
        let gains = brute_gains(g, &e.status);
        let best = (0..g.node_count()).filter(|w| !e.status.active.contains(w)).map(|w| gains[w]).fold(0.0, f64::max);
        checks[1].record(gains[v] >= best - TOLERANCE, || at(format!("picked {v} at `{}`, gain {} < {best}", e.status, gains[v])));
    }

    let (fp, fl) = (tree_profit(g, &plain)?, tree_profit(g, &lazy)?);
    checks[2].record((fp - fl).abs() <= TOLERANCE, || at(format!("plain {fp} vs lazy {fl}")));

    let k1 = rng.gen_range(1..=g.node_count().min(2));
    let t1 = build_policy_tree(g, &mut HashRule { seed: rng.gen() }, k1, sched, false)?;
    let joined = concat_trees(g, &t1, &plain)?;
    for t in [&plain, &lazy, &joined] {
        let dev = probability_sum_deviation(t);
        checks[3].record(dev <= 1e-12 && validate_tree(t).is_ok(), || at(format!("deviation {dev}\n{}", t.dump())));
    }
    let fj = tree_profit(g, &joined)?;
    checks[4].record(fj >= fp - TOLERANCE, || at(format!("F(T1+T2)={fj} < F(T2)={fp}")));

    let mut rules: Vec<Box<dyn DecisionRule>> =
        vec![Box::new(OptimalRule::new(k, sched)), Box::new(DegreeRule), Box::new(HashRule { seed: rng.gen() })];
    for rule in rules.iter_mut() {
        let rep = check_step_bound_with(g, &mut greedy, k, sched, rule.as_mut())?;
        for row in &rep.rows {
            checks[5].record(row.holds, || at(format!("i={} l={}: {} > {}", row.i, row.l, row.lhs, row.rhs)));
        }
    }

    let u = random_process_status(g, rng);
    if u.active.len() < g.node_count() {
        let mut prev = 0.0;
        for d in [Horizon::Finite(1), Horizon::Finite(2), Horizon::Unbounded] {
            let a = match regret_ratio(g, &u, Horizon::Unbounded, d) {
                Err(TreeError::ZeroGain) => break,
                a => a?,
            };
            let b = regret_upper_bound(g, &u, Horizon::Unbounded, d)?;
            let fin_ok = !is_final(g, &u) || a == 1.0;
            checks[6].record(b >= a - TOLERANCE && a >= 1.0 - TOLERANCE && fin_ok, || {
                at(format!("`{u}` d={d}: ratio {a}, bound {b}"))
            });
            checks[7].record(a >= prev - TOLERANCE, || at(format!("`{u}` d={d}: ratio {a} below {prev}")));
            prev = a;
        }
    }

    let (u1, u2) = random_final_pair(g, rng);
    let bad = submodularity_violations(g, &u1, &u2, Horizon::Unbounded)?;
    checks[8].record(bad.is_empty(), || at(format!("U1=`{u1}` U2=`{u2}`: {bad:?}")));
    Ok(())
}
