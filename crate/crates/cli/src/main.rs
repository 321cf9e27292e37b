//! `aim`: batch experiments and the verification battery.
//!
//! Exit codes: 0 ok, 1 usage, 2 verification failure, 3 I/O.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_im::graph::load_graph;
use adaptive_im::process::{aggregate, run_replicates};
use adaptive_im::verify::{run_battery, BatteryConfig};
use adaptive_im::{Exec, FeedbackSchedule, Graph, PolicyKind, ProbabilityModel};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

#[derive(Parser, Debug)]
#[command(name = "aim", version, about = "Adaptive influence maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Active count after every round, per replicate and aggregated.
    Trace(Experiment),
    /// Final influence for every feedback schedule.
    Sweep(Experiment),
    /// Run the enumerable-instance verification battery.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct Experiment {
    /// Edge list: "u v" or "u v p" per line.
    #[arg(long)]
    graph: PathBuf,
    /// uniform:<p>, wc, or file.
    #[arg(long, default_value = "uniform:0.1", value_parser = parse_prob)]
    prob: ProbabilityModel,
    /// greedy, degree or random.
    #[arg(long, default_value = "greedy", value_parser = ["greedy", "degree", "random"])]
    policy: String,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Comma-separated rounds between seeds; 0 is non-adaptive, inf waits
    /// for the diffusion to end.
    #[arg(long, default_value = "1", value_delimiter = ',', value_parser = parse_sched)]
    d: Vec<FeedbackSchedule>,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long = "rr-samples", default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    rr_samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace greedy by a worst-choice rule.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

fn parse_prob(s: &str) -> Result<ProbabilityModel, String> {
    match s {
        "wc" => Ok(ProbabilityModel::WeightedCascade),
        "file" => Ok(ProbabilityModel::FromFile),
        _ => {
            let p = s.strip_prefix("uniform:").ok_or("expected uniform:<p>, wc or file")?;
            let p: f64 = p.parse().map_err(|_| format!("bad probability {p:?}"))?;
            if p > 0.0 && p <= 1.0 {
                Ok(ProbabilityModel::Uniform(p))
            } else {
                Err(format!("probability {p} outside (0, 1]"))
            }
        }
    }
}

fn parse_sched(s: &str) -> Result<FeedbackSchedule, String> {
    FeedbackSchedule::parse(s).ok_or_else(|| format!("bad round count {s:?}"))
}

enum Failure {
    Usage(String),
    Verification,
    Io(String),
}

impl Experiment {
    fn kind(&self) -> PolicyKind {
        match self.policy.as_str() {
            "degree" => PolicyKind::HighDegree,
            "random" => PolicyKind::Random,
            _ => PolicyKind::Greedy { n_samples: self.rr_samples as usize },
        }
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    fn load(&self) -> Result<Graph, Failure> {
        let g = load_graph(&self.graph, self.prob).map_err(|e| Failure::Io(e.to_string()))?;
        info!("{}: {} nodes, {} edges", self.graph.display(), g.node_count(), g.edge_count());
        Ok(g)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| Failure::Io(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure::Io(e.to_string())
}

/// Per-replicate rows, then one aggregate row per round and schedule.
fn cmd_trace(x: &Experiment) -> Result<(), Failure> {
    let g = x.load()?;
    let kind = x.kind();
    let mut w = csv::Writer::from_writer(output(&x.out)?);
    w.write_record(["row", "policy", "d", "replicate", "round", "active_count", "mean_active", "stderr"])
        .map_err(io_err)?;
    for &sched in &x.d {
        info!("trace {} d={}", kind.name(), sched.label());
        let traces = run_replicates(&g, kind, x.k as usize, sched, x.reps as usize, x.seed, x.exec())
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let d = sched.label();
        for (r, t) in traces.iter().enumerate() {
            for (round, count) in t.active_per_round.iter().enumerate() {
                let (r, round, count) = (r.to_string(), (round + 1).to_string(), count.to_string());
                w.write_record(["replicate", kind.name(), &d, &r, &round, &count, "", ""]).map_err(io_err)?;
            }
        }
        let agg = aggregate(&traces);
        for (round, (m, s)) in agg.round_mean.iter().zip(&agg.round_stderr).enumerate() {
            let (round, m, s) = ((round + 1).to_string(), m.to_string(), s.to_string());
            w.write_record(["aggregate", kind.name(), &d, "", &round, "", &m, &s]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Rows `policy,d,mean_final,stderr,replicates`.
fn cmd_sweep(x: &Experiment) -> Result<(), Failure> {
    let g = x.load()?;
    let kind = x.kind();
    let mut w = csv::Writer::from_writer(output(&x.out)?);
    w.write_record(["policy", "d", "mean_final", "stderr", "replicates"]).map_err(io_err)?;
    for &sched in &x.d {
        info!("sweep {} d={}", kind.name(), sched.label());
        let traces = run_replicates(&g, kind, x.k as usize, sched, x.reps as usize, x.seed, x.exec())
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let agg = aggregate(&traces);
        w.write_record([
            kind.name(),
            &sched.label(),
            &agg.mean.to_string(),
            &agg.stderr.to_string(),
            &agg.replicates.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

fn cmd_verify(v: &VerifyArgs) -> Result<(), Failure> {
    if v.instances == 0 {
        warn!("--instances 0: nothing to check");
    }
    let cfg = BatteryConfig { instances: v.instances, seed: v.seed, inject_fault: v.inject_fault };
    let report = run_battery(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = output(&v.out)?;
    out.write_all(report.render().as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Trace(x) => cmd_trace(x),
        Command::Sweep(x) => cmd_sweep(x),
        Command::Verify(v) => cmd_verify(v),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
