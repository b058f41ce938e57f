use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use altroute::asymptotics::{alpha_schedule, bdar_capacity_bound, dar_capacity_lower_bound};
use altroute::engine::{EpochSample, EventOutcome, TraceRecord};
use altroute::harness::{self, ExperimentConfig, Observer, OutputFormat, RowWriter};
use altroute::metrics::per_node_tallies;
use altroute::oracle::{self, ChainOptions};
use altroute::{Capacity, Error, NetworkState, PolicyKind, ProbeSampling, SimParams};

#[derive(Parser)]
#[command(name = "altroute", version, about = "Alternative routing on complete graphs: simulation, exact chains, bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one parameter point and print a result row.
    Simulate(SimulateArgs),
    /// Run every point of a grid read from a config file.
    Sweep(SweepArgs),
    /// Solve the exact Markov chain of a tiny instance.
    Oracle(OracleArgs),
    /// Print leading-term capacity bounds and the alpha schedule summary.
    Bounds(BoundsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 16)]
    n: u32,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value = "inf")]
    b_alt: Capacity,
    #[arg(long, default_value = "0")]
    b_direct: Capacity,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value = "bdar-star")]
    policy: PolicyKind,
    #[arg(long, default_value = "without-replacement")]
    sampling: ProbeSampling,
    /// Warm-up time; defaults to 5 n.
    #[arg(long)]
    warmup: Option<f64>,
    /// Measurement time; defaults to 20 n.
    #[arg(long)]
    measure: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sample_every: f64,
    #[arg(long, default_value_t = 1)]
    replications: u32,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Write one CSV line per sampling epoch.
    #[arg(long)]
    epochs: Option<PathBuf>,
    /// Write every event as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write per-node L and M tallies at each epoch as JSON lines.
    #[arg(long)]
    per_node: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the output path in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<OutputFormat>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 3)]
    n: u32,
    #[arg(long, default_value = "1")]
    b_alt: Capacity,
    #[arg(long, default_value = "0")]
    b_direct: Capacity,
    #[arg(long, default_value_t = 1)]
    d: u32,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value = "bdar-star")]
    policy: PolicyKind,
    #[arg(long, default_value = "without-replacement")]
    sampling: ProbeSampling,
    #[arg(long, default_value_t = oracle::DEFAULT_MAX_STATES)]
    max_states: usize,
    /// Capacity used in place of an unbounded alternative channel.
    #[arg(long)]
    truncate: Option<u32>,
    #[arg(long, default_value_t = oracle::DEFAULT_TOL)]
    tol: f64,
    /// Write the chain's states and rates as JSON.
    #[arg(long)]
    chain: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024,2048")]
    n_list: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    d_list: Vec<u32>,
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_err(e: io::Error) -> Error {
    Error::Config(format!("i/o: {e}"))
}

#[derive(Default)]
struct Files {
    epochs: Option<BufWriter<File>>,
    trace: Option<BufWriter<File>>,
    per_node: Option<BufWriter<File>>,
    failed: Option<io::Error>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    replication: u32,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

#[derive(Serialize)]
struct PerNodeLine<'a> {
    replication: u32,
    t: f64,
    l_ge: &'a [Vec<u64>],
    m_ge: &'a [Vec<u64>],
}

impl Files {
    fn note(&mut self, r: io::Result<()>) {
        if let Err(e) = r {
            self.failed.get_or_insert(e);
        }
    }
}

impl Observer for Files {
    fn on_event(&mut self, replication: u32, outcome: &EventOutcome) {
        if let Some(w) = self.trace.as_mut() {
            let record = TraceRecord::from(outcome);
            let line = serde_json::to_string(&TraceLine { replication, record: &record }).expect("serializable");
            let r = writeln!(w, "{line}");
            self.note(r);
        }
    }

    fn on_epoch(&mut self, replication: u32, s: &EpochSample, state: &NetworkState) {
        if let Some(w) = self.epochs.as_mut() {
            let r = writeln!(w, "{replication},{},{},{},{},{}", s.t, s.max_load, s.p95_load, s.blocked, s.offered);
            self.note(r);
        }
        if let Some(w) = self.per_node.as_mut() {
            let (l, m) = per_node_tallies(state);
            let line = serde_json::to_string(&PerNodeLine { replication, t: s.t, l_ge: &l, m_ge: &m })
                .expect("serializable");
            let r = writeln!(w, "{line}");
            self.note(r);
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let cfg = ExperimentConfig {
        n: vec![a.n],
        d: vec![a.d],
        b_alt: vec![a.b_alt],
        b_direct: vec![a.b_direct],
        rho: vec![a.rho],
        policy: vec![a.policy],
        sampling: a.sampling,
        mu: a.mu,
        replications: a.replications,
        warmup: a.warmup,
        measure: a.measure,
        sample_interval: a.sample_every,
        batches: a.batches,
        level: a.level,
        seed: a.seed,
        threads: 1,
        output: a.out.clone(),
        format: a.format,
    };
    cfg.validate()?;
    let mut files = Files::default();
    if let Some(p) = &a.epochs {
        let mut w = create(p)?;
        writeln!(w, "# {}", harness::SCHEMA).map_err(io_err)?;
        writeln!(w, "replication,t,max_load,p95_load,blocked,offered").map_err(io_err)?;
        files.epochs = Some(w);
    }
    if let Some(p) = &a.trace {
        files.trace = Some(create(p)?);
    }
    if let Some(p) = &a.per_node {
        files.per_node = Some(create(p)?);
    }
    let row = harness::run_experiment_with(&cfg, &cfg.points()[0], &mut files)?;
    if let Some(e) = files.failed.take() {
        return Err(io_err(e));
    }
    for w in [files.epochs.as_mut(), files.trace.as_mut(), files.per_node.as_mut()].into_iter().flatten() {
        w.flush().map_err(io_err)?;
    }
    let mut out = RowWriter::new(output(a.out.as_deref())?, a.format)?;
    out.write(&row)
}

fn sweep(a: SweepArgs) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(out) = a.out {
        cfg.output = Some(out);
    }
    if let Some(f) = a.format {
        cfg.format = f;
    }
    if let Some(t) = a.threads {
        cfg.threads = t;
    }
    let mut out = RowWriter::new(output(cfg.output.as_deref())?, cfg.format)?;
    let rows = harness::sweep(&cfg, |row| out.write(row))?;
    let failed = rows.iter().filter(|r| r.is_error()).count();
    if failed > 0 {
        eprintln!("{failed} of {} points failed", rows.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    n: u32,
    d: u32,
    b_alt: Capacity,
    b_direct: Capacity,
    rho: f64,
    policy: PolicyKind,
    states: usize,
    transitions: usize,
    blocking: f64,
    residual: f64,
    max_load_distribution: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    erlang_b_direct: Option<f64>,
}

fn run_oracle(a: OracleArgs) -> Result<(), Error> {
    let params = SimParams {
        n: a.n,
        lambda: a.rho * a.mu,
        mu: a.mu,
        b_direct: a.b_direct,
        b_alt: a.b_alt,
        d: a.d,
        policy: a.policy,
        sampling: a.sampling,
        seed: 0,
    };
    let opts = ChainOptions { max_states: a.max_states, truncate_unbounded: a.truncate };
    let chain = oracle::build_chain(&params, opts)?;
    let dist = oracle::stationary_dist(&chain, a.tol)?;
    if let Some(p) = &a.chain {
        let mut w = create(p)?;
        serde_json::to_writer(&mut w, &chain.to_json()).map_err(|e| Error::Config(e.to_string()))?;
        w.flush().map_err(io_err)?;
    }
    let report = OracleReport {
        n: chain.params.n,
        d: chain.params.d,
        b_alt: chain.params.b_alt,
        b_direct: chain.params.b_direct,
        rho: a.rho,
        policy: chain.params.policy,
        states: chain.len(),
        transitions: chain.rates.len(),
        blocking: oracle::exact_blocking(&chain, &dist),
        residual: dist.residual,
        max_load_distribution: oracle::max_load_distribution(&chain, &dist),
        erlang_b_direct: chain.params.b_direct.finite().filter(|&b| b > 0).map(|b| oracle::erlang_b(b, a.rho)),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    let fail = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["n", "d", "bdar_bound", "dar_lower_bound", "i_star", "predicted_max_load", "predicted_window"])
        .map_err(fail)?;
    for &n in &a.n_list {
        for &d in &a.d_list {
            let dar = dar_capacity_lower_bound(n, d as f64)?;
            // the best-of-d bound and the schedule need d >= 2
            let (bdar, i_star, max_load, window) = if d >= 2 {
                let s = alpha_schedule(n, d, a.rho)?;
                (
                    bdar_capacity_bound(n, d as f64)?.to_string(),
                    s.i_star.to_string(),
                    s.predicted_max_load.to_string(),
                    s.predicted_window.to_string(),
                )
            } else {
                Default::default()
            };
            w.write_record([n.to_string(), d.to_string(), bdar, dar.to_string(), i_star, max_load, window])
                .map_err(fail)?;
        }
    }
    w.flush().map_err(io_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Bounds(a) => bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::OutOfDomain(_) | Error::InvalidPair { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
