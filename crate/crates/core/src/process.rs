//! The `(π, k, d)` seeding process, its lazy variant, and replicate
//! aggregation.

use thiserror::Error;

use crate::diffusion::{step_round, EdgeCoins};
use crate::exec::Exec;
use crate::graph::{Graph, NodeId};
use crate::policy::{decide_dense, PolicyError, PolicyKind};
use crate::realization::DenseStatus;
use crate::rng::{self, EDGE_STREAM, POLICY_STREAM};

/// How many diffusion rounds are observed between consecutive seeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeedbackSchedule {
    /// All seeds are chosen before any diffusion round (`d = 0`).
    NonAdaptive,
    /// `d >= 1` observed rounds after each seed.
    Finite(u32),
    /// Wait for the diffusion to terminate after each seed (`d = ∞`).
    FullAdoption,
}

impl FeedbackSchedule {
    /// `0`, `d` or `inf`.
    pub fn label(&self) -> String {
        match self {
            FeedbackSchedule::NonAdaptive => "0".to_string(),
            FeedbackSchedule::Finite(d) => d.to_string(),
            FeedbackSchedule::FullAdoption => "inf".to_string(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "inf" | "∞" => Some(FeedbackSchedule::FullAdoption),
            "0" => Some(FeedbackSchedule::NonAdaptive),
            t => t.parse().ok().map(FeedbackSchedule::Finite),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProcessError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("budget {k} exceeds the node count {n}")]
    BudgetTooLarge { k: usize, n: usize },
    #[error("finite feedback needs d >= 1")]
    ZeroRounds,
    #[error("the lazy process needs an adaptive schedule")]
    LazyNonAdaptive,
    #[error("at least one replicate is required")]
    NoReplicates,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One run of a seeding process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffusionTrace {
    /// Active count after every diffusion round, waiting rounds included.
    pub active_per_round: Vec<usize>,
    pub seeds_in_order: Vec<NodeId>,
    pub final_active: usize,
    pub rounds_elapsed: usize,
}

struct Run<'a> {
    g: &'a Graph,
    kind: PolicyKind,
    exec: Exec,
    policy_seed: u64,
    coins: EdgeCoins,
    state: DenseStatus,
    frontier: Vec<NodeId>,
    trace: Vec<usize>,
    seeds: Vec<NodeId>,
}

impl<'a> Run<'a> {
    fn new(g: &'a Graph, kind: PolicyKind, rng_seed: u64, exec: Exec) -> Self {
        Run {
            g,
            kind,
            exec,
            policy_seed: rng::derive(rng_seed, POLICY_STREAM),
            coins: EdgeCoins::new(rng::derive(rng_seed, EDGE_STREAM)),
            state: DenseStatus::empty(g),
            frontier: Vec::new(),
            trace: Vec::new(),
            seeds: Vec::new(),
        }
    }

    /// Decision `step`, or `None` once every node is active.
    fn decide(&self, step: usize) -> Result<Option<NodeId>, ProcessError> {
        if self.state.active_count == self.g.node_count() {
            return Ok(None);
        }
        let seed = rng::derive(self.policy_seed, step as u64);
        Ok(Some(decide_dense(self.kind, self.g, &self.state, seed, self.exec)?))
    }

    fn activate(&mut self, v: NodeId) {
        self.seeds.push(v);
        if self.state.activate(v) {
            self.frontier.push(v);
        }
    }

    fn round(&mut self) {
        self.frontier = step_round(self.g, &mut self.state, &self.frontier, &mut self.coins);
        self.trace.push(self.state.active_count);
    }

    fn run_to_end(&mut self) {
        while !self.frontier.is_empty() {
            self.round();
        }
    }

    fn observe(&mut self, sched: FeedbackSchedule) {
        match sched {
            FeedbackSchedule::NonAdaptive => {}
            FeedbackSchedule::Finite(d) => (0..d).for_each(|_| self.round()),
            FeedbackSchedule::FullAdoption => self.run_to_end(),
        }
    }

    fn finish(mut self) -> DiffusionTrace {
        self.run_to_end();
        DiffusionTrace {
            rounds_elapsed: self.trace.len(),
            final_active: self.state.active_count,
            active_per_round: self.trace,
            seeds_in_order: self.seeds,
        }
    }
}

fn check(g: &Graph, k: usize, sched: FeedbackSchedule) -> Result<(), ProcessError> {
    if k == 0 {
        return Err(ProcessError::ZeroBudget);
    }
    if k > g.node_count() {
        return Err(ProcessError::BudgetTooLarge { k, n: g.node_count() });
    }
    if sched == FeedbackSchedule::Finite(0) {
        return Err(ProcessError::ZeroRounds);
    }
    Ok(())
}

/// Runs the `(π, k, d)`-process once.
///
/// Edge outcomes come from `EdgeCoins` keyed by `rng_seed`, and decision `j`
/// draws its randomness from its own stream, so [`run_lazy_process`] with the
/// same seed sees the same realization. Seeding stops early if every node is
/// already active.
pub fn run_process(
    g: &Graph,
    kind: PolicyKind,
    k: usize,
    sched: FeedbackSchedule,
    rng_seed: u64,
    exec: Exec,
) -> Result<DiffusionTrace, ProcessError> {
    check(g, k, sched)?;
    let mut run = Run::new(g, kind, rng_seed, exec);
    for step in 0..k {
        let Some(v) = run.decide(step)? else { break };
        run.activate(v);
        run.observe(sched);
    }
    Ok(run.finish())
}

/// Runs the lazy process: the last seed is chosen on schedule but activated
/// only after the diffusion has terminated.
pub fn run_lazy_process(
    g: &Graph,
    kind: PolicyKind,
    k: usize,
    sched: FeedbackSchedule,
    rng_seed: u64,
    exec: Exec,
) -> Result<DiffusionTrace, ProcessError> {
    check(g, k, sched)?;
    if sched == FeedbackSchedule::NonAdaptive {
        return Err(ProcessError::LazyNonAdaptive);
    }
    let mut run = Run::new(g, kind, rng_seed, exec);
    for step in 0..k - 1 {
        let Some(v) = run.decide(step)? else { return Ok(run.finish()) };
        run.activate(v);
        run.observe(sched);
    }
    let last = run.decide(k - 1)?;
    run.run_to_end();
    if let Some(v) = last {
        run.activate(v);
    }
    Ok(run.finish())
}

/// Runs `replicates` independent processes; replicate `r` uses the seed
/// `derive(rng_seed, r)`. Traces are returned in replicate order.
pub fn run_replicates(
    g: &Graph,
    kind: PolicyKind,
    k: usize,
    sched: FeedbackSchedule,
    replicates: usize,
    rng_seed: u64,
    exec: Exec,
) -> Result<Vec<DiffusionTrace>, ProcessError> {
    check(g, k, sched)?;
    exec.map_indexed(replicates, |r| run_process(g, kind, k, sched, rng::derive(rng_seed, r as u64), Exec::Sequential))
        .into_iter()
        .collect()
}

/// Mean and standard error of a sample of counts, from exact integer sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

pub fn summarize(values: impl IntoIterator<Item = usize>) -> Summary {
    let (mut n, mut sum, mut sq) = (0u128, 0u128, 0u128);
    for v in values {
        n += 1;
        sum += v as u128;
        sq += (v as u128) * (v as u128);
    }
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN };
    }
    let mean = sum as f64 / n as f64;
    if n == 1 {
        return Summary { mean, stderr: 0.0 };
    }
    // n·Σx² - (Σx)² is exact and non-negative.
    let spread = n * sq - sum * sum;
    let var = spread as f64 / (n * (n - 1)) as f64;
    Summary { mean, stderr: (var / n as f64).sqrt() }
}

/// Replicate aggregate of a process.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: usize,
    /// Per-round mean and standard error; shorter traces are padded with
    /// their final count.
    pub round_mean: Vec<f64>,
    pub round_stderr: Vec<f64>,
}

pub fn aggregate(traces: &[DiffusionTrace]) -> InfluenceEstimate {
    let overall = summarize(traces.iter().map(|t| t.final_active));
    let rounds = traces.iter().map(|t| t.active_per_round.len()).max().unwrap_or(0);
    let at = |t: &DiffusionTrace, r: usize| t.active_per_round.get(r).copied().unwrap_or(t.final_active);
    let per_round: Vec<Summary> = (0..rounds).map(|r| summarize(traces.iter().map(|t| at(t, r)))).collect();
    InfluenceEstimate {
        mean: overall.mean,
        stderr: overall.stderr,
        replicates: traces.len(),
        round_mean: per_round.iter().map(|s| s.mean).collect(),
        round_stderr: per_round.iter().map(|s| s.stderr).collect(),
    }
}

/// Estimates `F(π, k, d)` as the mean final active count over replicates.
pub fn estimate_influence(
    g: &Graph,
    kind: PolicyKind,
    k: usize,
    sched: FeedbackSchedule,
    replicates: usize,
    rng_seed: u64,
    exec: Exec,
) -> Result<InfluenceEstimate, ProcessError> {
    if replicates == 0 {
        return Err(ProcessError::NoReplicates);
    }
    Ok(aggregate(&run_replicates(g, kind, k, sched, replicates, rng_seed, exec)?))
}

/// `sqrt(se₁² + se₂²)`, the standard error of a difference of two means.
pub fn pooled_stderr(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}
