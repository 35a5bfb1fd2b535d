use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use interrl::config::RunConfig;
use interrl::harness::{
    combination_label, emit_csv, run_config, run_experiment, summarize, OracleCache, SweepSpec, Threshold,
};
use interrl::teacher::evaluate_greedy;
use interrl::{env, EnvKind, RunSeed, Stream, TeacherQ};
use interrl_gateway::{Server, SessionOptions};
use log::info;

#[derive(Parser)]
#[command(name = "interrl", version, about = "Interactive reinforcement learning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for several seeded runs and write its results.
    Run(RunArgs),
    /// Run every combination of a sweep file.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Teacher utilities.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Host live training sessions.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Train a teacher and save its Q-table.
    Train {
        #[arg(long)]
        env: EnvKind,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Flags shared by `run` and `serve`; each one overrides the config file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Base configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    /// q, ab, cs, rs, qa or al.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    /// Feedback likelihood.
    #[arg(long = "L")]
    likelihood: Option<f64>,
    /// Feedback consistency.
    #[arg(long = "C")]
    consistency: Option<f64>,
    #[arg(long)]
    rh: Option<f64>,
    /// early, sporadic or late.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long = "B0")]
    b0: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    disable_at: Option<usize>,
    #[arg(long)]
    q_access: bool,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => RunConfig::defaults(self.env.unwrap_or(EnvKind::Pacman)),
        };
        if let Some(env) = self.env {
            if env != cfg.env {
                bail!("--env {env} conflicts with env = {} in the config file", cfg.env);
            }
        }
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
            Ok(())
        };
        set("method", self.method.clone())?;
        set("episodes", self.episodes.map(|v| v.to_string()))?;
        set("runs", self.runs.map(|v| v.to_string()))?;
        set("L", self.likelihood.map(|v| v.to_string()))?;
        set("C", self.consistency.map(|v| v.to_string()))?;
        set("r_h", self.rh.map(|v| v.to_string()))?;
        set("strategy", self.strategy.clone())?;
        set("b0", self.b0.map(|v| v.to_string()))?;
        set("seed", self.seed.map(|v| v.to_string()))?;
        set("disable_at", self.disable_at.map(|v| v.to_string()))?;
        if self.q_access {
            cfg.q_access = true;
        }
        Ok(cfg.validate().map_err(interrl::Error::Config)?)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Saved teacher to use instead of training one.
    #[arg(long)]
    oracle: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 7878)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Steps per second in the paced modes.
    #[arg(long, default_value_t = 2.0)]
    pace: f64,
    /// State messages every this many steps in autonomous mode.
    #[arg(long, default_value_t = 1)]
    emit_every: usize,
    /// Let the simulated teacher advise whenever the human is silent.
    #[arg(long)]
    hybrid: bool,
    /// Saved teacher for hybrid sessions.
    #[arg(long)]
    oracle: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Sweep { spec, out } => sweep(&spec, &out),
        Command::Oracle {
            command: OracleCommand::Train { env, episodes, seed, out },
        } => train(env, episodes, seed, &out),
        Command::Serve(args) => serve(args),
    }
}

fn load_oracle(path: &Path, cfg: &RunConfig) -> Result<TeacherQ> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let states = env::make(cfg.env).state_count();
    Ok(TeacherQ::read_snapshot(BufReader::new(file), states, cfg.env.action_count())?)
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config.build()?;
    let oracle = match (&args.oracle, cfg.needs_teacher()) {
        (_, false) => None,
        (Some(path), true) => Some(Arc::new(load_oracle(path, &cfg)?)),
        (None, true) => {
            info!("training teacher for {} episodes", cfg.oracle_episodes);
            Some(OracleCache::new().get(&cfg)?)
        }
    };
    info!("{} runs of {} episodes: {}", cfg.runs, cfg.episodes, combination_label(&cfg));
    let table = run_config(&cfg, oracle)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            emit_csv(&table, BufWriter::new(file))?;
        }
        None => emit_csv(&table, io::stdout().lock())?,
    }
    let summary = summarize(&table, &Threshold::for_env(cfg.env))?;
    eprintln!("{} {summary}", cfg.method);
    Ok(())
}

fn sweep(spec_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = SweepSpec::parse(&text).with_context(|| format!("in {}", spec_path.display()))?;
    let combos = spec.combinations()?.len();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    info!("{combos} combinations");
    let results = run_experiment(&spec, &mut OracleCache::new())?;
    let mut summary = BufWriter::new(File::create(out.join("summary.txt"))?);
    for r in &results {
        let label = combination_label(&r.config);
        let path = out.join(format!("{label}.csv"));
        emit_csv(&r.table, BufWriter::new(File::create(&path)?))?;
        let s = summarize(&r.table, &Threshold::for_env(r.config.env))?;
        writeln!(summary, "{label} {s}")?;
        println!("{label} {s}");
    }
    summary.flush()?;
    Ok(())
}

fn train(kind: EnvKind, episodes: Option<usize>, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut cfg = RunConfig::defaults(kind);
    if let Some(n) = episodes {
        cfg.oracle_episodes = n;
    }
    if let Some(s) = seed {
        cfg.oracle_seed = s;
    }
    if cfg.oracle_episodes == 0 {
        bail!("episodes must be positive");
    }
    let oracle = interrl::harness::oracle_for(&cfg)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    oracle.write_snapshot(BufWriter::new(file))?;

    let mut env = env::make(kind);
    let mut rng = RunSeed(cfg.oracle_seed).stream(Stream::Oracle);
    let max_steps = match kind {
        EnvKind::Pacman => 1_000,
        EnvKind::Cartpole => 200,
    };
    let returns = evaluate_greedy(&oracle, env.as_mut(), 100, max_steps, &mut rng)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    println!("trained {} episodes on {kind}; greedy mean return over 100 episodes {mean:.2}", cfg.oracle_episodes);
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let cfg = args.config.build()?;
    let oracle = if args.hybrid {
        Some(match &args.oracle {
            Some(path) => Arc::new(load_oracle(path, &cfg)?),
            None => {
                info!("training teacher for {} episodes", cfg.oracle_episodes);
                OracleCache::new().get(&cfg)?
            }
        })
    } else {
        None
    };
    let opts = SessionOptions {
        pace: args.pace,
        emit_every: args.emit_every,
        autostart: false,
        hybrid: args.hybrid,
    };
    let server = Server::bind((args.host.as_str(), args.port), cfg, opts, oracle)?;
    println!("listening on {}", server.local_addr()?);
    server.run()?;
    Ok(())
}
