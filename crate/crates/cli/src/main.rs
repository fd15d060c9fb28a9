use std::path::{Path, PathBuf};

use adapshare::agents::{self, AgentCheckpoint, TrainedPolicy};
use adapshare::harness::{self, SweepSpec};
use adapshare::ingest::{self, DATA_FORMAT};
use adapshare::synthgen::{self, DEFAULT_SEED};
use adapshare::{AgentKind, ExperimentConfig, Side};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "adapshare", version, about = "Demand-driven spectrum sharing between two networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resample two control-channel logs into an hourly demand series.
    Ingest(IngestArgs),
    /// Generate a synthetic demand series shaped like a reference series.
    Synth(SynthArgs),
    /// Train an agent and save its checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a solver on the evaluation split.
    Eval(EvalArgs),
    /// Run the pool-size by priority sweep and write CSV and SVG results.
    Sweep(SweepArgs),
    /// Serve a checkpoint over line-delimited JSON on TCP.
    Serve(ServeArgs),
    /// Redraw the sweep charts from an existing sweep.csv.
    Plot(PlotArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Log of network A.
    #[arg(long)]
    dci_a: PathBuf,
    /// Log of network B.
    #[arg(long)]
    dci_b: PathBuf,
    /// Window length in seconds.
    #[arg(long, default_value_t = 3600)]
    granularity: u64,
    /// DCI format counted as demand.
    #[arg(long, default_value = DATA_FORMAT)]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Reference demand series.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long, default_value_t = 860)]
    len: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw both networks from the statistics of network A.
    #[arg(long)]
    symmetric: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Overrides applied on top of an experiment configuration file.
#[derive(Args)]
struct ExperimentOverrides {
    /// TOML file with `ExperimentConfig` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    n_r: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ExperimentOverrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => harness::load_experiment_config(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = harness::seed_override()? {
            cfg.seed = seed;
        }
        if let Some(kind) = self.agent {
            cfg.agent_kind = kind;
        }
        if let Some(n_r) = self.n_r {
            cfg.env.n_r = n_r;
        }
        if let Some(zeta) = self.zeta {
            cfg.env.zeta = zeta;
        }
        if let Some(steps) = self.steps {
            cfg.train_steps = steps;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    exp: ExperimentOverrides,
    /// Where to write the trained agent.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Optional CSV of per-step rewards.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    exp: ExperimentOverrides,
    /// Learned agent to evaluate; without it `--agent` must name a solver.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory for the detail CSV and charts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// TOML file with `SweepSpec` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<AgentKind>>,
    #[arg(long, value_delimiter = ',')]
    n_r: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    zeta: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: String,
}

#[derive(Args)]
struct PlotArgs {
    /// A sweep.csv written by `sweep`.
    #[arg(long)]
    sweep: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest(a) => ingest_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    }
}

fn ingest_cmd(a: IngestArgs) -> Result<()> {
    let side = |path: &Path, side: Side| -> Result<_> {
        let records = ingest::parse_dci_csv(path).with_context(|| format!("reading {}", path.display()))?;
        let kept = ingest::filter_data_transmissions(&records, &a.format);
        Ok(ingest::resample_mean(&kept, a.granularity, side)?.trace(side))
    };
    let series = ingest::merge_series(&side(&a.dci_a, Side::A)?, &side(&a.dci_b, Side::B)?)?;
    series.save(&a.out)?;
    println!("wrote {} samples to {}", series.len(), a.out.display());
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> Result<()> {
    let reference = harness::load_dataset(&a.reference)?;
    let seed = match a.seed {
        Some(s) => s,
        None => harness::seed_override()?.unwrap_or(DEFAULT_SEED),
    };
    let series = synthgen::synthesize_pair(&reference, a.len, seed, a.symmetric)?;
    series.save(&a.out)?;
    for side in [Side::A, Side::B] {
        let reference_side = if a.symmetric { Side::A } else { side };
        let ks = synthgen::ks_distance(&series.trace(side), &reference.trace(reference_side))?;
        println!("network {side:?}: KS distance {ks:.4}");
    }
    println!("wrote {} samples to {}", series.len(), a.out.display());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = a.exp.resolve()?;
    if !cfg.agent_kind.is_learning() {
        bail!("{} has nothing to train; use `eval --agent {}`", cfg.agent_kind, cfg.agent_kind);
    }
    let series = harness::load_dataset(&a.data)?;
    let (policy, curve) = agents::train(&series, &cfg)?;
    let agent = policy.agent().expect("learning kind yields an agent");
    agent.checkpoint().save(&a.checkpoint)?;
    if let Some(path) = &a.curve {
        let mut text = String::from("step,reward,moving_average\n");
        for (i, (r, m)) in curve.rewards.iter().zip(&curve.moving_average).enumerate() {
            text.push_str(&format!("{i},{r},{m}\n"));
        }
        std::fs::write(path, text)?;
    }
    let cell = harness::evaluate_policy(&policy, &series, &cfg)?;
    print_report(&cell);
    println!("checkpoint written to {}", a.checkpoint.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let mut cfg = a.exp.resolve()?;
    let series = harness::load_dataset(&a.data)?;
    let policy = match &a.checkpoint {
        Some(path) => {
            let agent = AgentCheckpoint::load(path)?.into_agent()?;
            // The network fixes the observation layout; pool and priority may still be overridden.
            let env = *agent.env_config();
            cfg.env = env.with_pool(a.exp.n_r.unwrap_or(env.n_r), a.exp.zeta.unwrap_or(env.zeta));
            cfg.agent_kind = agent.kind();
            TrainedPolicy::Learned(Box::new(agent))
        }
        None if cfg.agent_kind.is_learning() => bail!("evaluating {} needs --checkpoint", cfg.agent_kind),
        None => agents::train(&series, &cfg)?.0,
    };
    let cell = harness::evaluate_policy(&policy, &series, &cfg)?;
    print_report(&cell);
    if let Some(out) = &a.out {
        harness::emit_results(std::slice::from_ref(&cell), out)?;
        println!("results written to {}", out.display());
    }
    Ok(())
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(path) => harness::load_sweep_spec(path)?,
        None => SweepSpec::default(),
    };
    if let Some(seed) = harness::seed_override()? {
        spec.base.seed = seed;
    }
    if let Some(v) = a.agents {
        spec.agent_kinds = v;
    }
    if let Some(v) = a.n_r {
        spec.n_r_values = v;
    }
    if let Some(v) = a.zeta {
        spec.zeta_values = v;
    }
    if let Some(v) = a.steps {
        spec.base.train_steps = v;
    }
    if let Some(v) = a.seed {
        spec.base.seed = v;
    }
    let series = harness::load_dataset(&a.data)?;
    let table = harness::run_sweep(&spec, &series)?;
    for cell in &table {
        print_report(cell);
    }
    harness::emit_results(&table, &a.out)?;
    println!("{} cells written to {}", table.len(), a.out.display());
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let service = harness::AllocationService::from_checkpoint(&a.checkpoint)?;
    let server = harness::Server::bind(&a.bind, service)?;
    println!("serving on {}", server.local_addr()?);
    server.run()?;
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let rows = harness::read_sweep_csv(&a.sweep)?;
    std::fs::create_dir_all(&a.out)?;
    for path in harness::render_sweep_charts(&rows, &a.out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn print_report(cell: &harness::CellResult) {
    let r = &cell.report;
    println!(
        "{:<10} n_r={:<5} zeta={:<4} S_a={:+.4} S_b={:+.4} fairness={:.4} J={:.5}",
        cell.agent, cell.n_r, cell.zeta, r.s_a, r.s_b, r.fairness, r.mean_j
    );
}
