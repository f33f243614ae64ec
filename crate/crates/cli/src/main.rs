use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use dinekit::config::{ConfigError, Overrides, RunConfig, ENV_PREFIX};
use dinekit::runner::{build, AnyEnv, Runner, Shared};
use dinekit::{scenario, server, sweep};
use dinekit_core::trace::Trace;

#[derive(Parser)]
#[command(
    name = "dinekit",
    version,
    about = "Train a reward-decomposed agent, record its decision trace and serve it",
    after_help = "Every flag except subcommand-specific ones can also be set through an \
                  environment variable named DINEKIT_<FLAG>, e.g. DINEKIT_SEED=3. \
                  Flags win over variables, variables win over the config file.\n\
                  Exit codes: 0 ok, 1 configuration error, 2 runtime failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, env = "DINEKIT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "DINEKIT_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "DINEKIT_STEPS")]
    steps: Option<u64>,
    /// Uncertain-action threshold in [0, 1].
    #[arg(long, env = "DINEKIT_RHO")]
    rho: Option<f64>,
    /// Extremum margin, >= 0.
    #[arg(long, env = "DINEKIT_PHI")]
    phi: Option<f64>,
    /// Trace file to write (train, demo) or read (serve, sweep, export).
    #[arg(long, env = "DINEKIT_TRACE")]
    trace: Option<PathBuf>,
    /// Listen address for the HTTP API.
    #[arg(long, env = "DINEKIT_ADDR")]
    addr: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the decision loop and write the trace.
    Train {
        #[command(flatten)]
        common: Common,
        /// Write the trained weights here.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Count DINEs over threshold grids; CSV on stdout or to --out.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API over a trace file, or over a live run with --live.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        live: bool,
    },
    /// Copy a window of a trace file.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the packaged step-increase scenario and report the response.
    Demo {
        #[command(flatten)]
        common: Common,
        /// Serve the resulting trace afterwards.
        #[arg(long)]
        serve: bool,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            steps: self.steps,
            rho: self.rho,
            phi: self.phi,
            trace: self.trace.clone(),
            addr: self.addr.clone(),
        }
    }

    fn resolve(&self, base: RunConfig) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => base,
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let config = e.chain().any(|c| {
                c.is::<ConfigError>() || matches!(c.downcast_ref(), Some(dinekit_core::Error::Config(_)))
            });
            eprintln!("error: {e:#}");
            ExitCode::from(if config { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train { common, checkpoint } => {
            let cfg = common.resolve(RunConfig::default())?;
            let mut runner = build(&cfg)?;
            train(&mut runner, cfg.steps)?;
            finish(&runner, &cfg)?;
            if let Some(p) = checkpoint.or(cfg.checkpoint.clone()) {
                runner.agent().to_checkpoint().save(&p)?;
                log::info!("weights written to {}", p.display());
            }
            Ok(())
        }
        Command::Sweep { common, out } => {
            let cfg = common.resolve(RunConfig::default())?;
            let trace = match &cfg.trace {
                Some(p) if p.exists() => Trace::import(p)?,
                _ => {
                    let mut runner = build(&cfg)?;
                    train(&mut runner, cfg.steps)?;
                    let shared = runner.shared();
                    let t = shared.trace.read().clone();
                    t
                }
            };
            let csv = sweep::to_csv(&sweep::sweep(&trace, &cfg.sweep, cfg.execution)?);
            match out {
                Some(p) => std::fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Serve { common, live } => {
            let cfg = common.resolve(RunConfig::default())?;
            let shared = if live {
                let mut runner = build(&cfg)?;
                let shared = runner.shared();
                let steps = cfg.steps;
                std::thread::spawn(move || {
                    if let Err(e) = train(&mut runner, steps) {
                        log::error!("live run stopped: {e}");
                    }
                });
                shared
            } else {
                let Some(p) = &cfg.trace else {
                    return Err(ConfigError("serve needs --trace or --live".into()).into());
                };
                Shared::new(Trace::import(p).with_context(|| format!("loading {}", p.display()))?)
            };
            serve_blocking(shared, &cfg)
        }
        Command::Export { common, from, to, out } => {
            let cfg = common.resolve(RunConfig::default())?;
            let Some(p) = &cfg.trace else {
                return Err(ConfigError("export needs --trace".into()).into());
            };
            if let (Some(f), Some(t)) = (from, to) {
                if f > t {
                    return Err(ConfigError(format!("--from {f} is after --to {t}")).into());
                }
            }
            let trace = Trace::import(p).with_context(|| format!("loading {}", p.display()))?;
            trace.export_window(&out, from, to)?;
            log::info!("{} records written to {}", trace.window(from, to)?.len(), out.display());
            Ok(())
        }
        Command::Demo { common, serve } => {
            let cfg = common.resolve(scenario::demo_config())?;
            if cfg.steps <= scenario::STEP_AT + 30 {
                bail!(ConfigError(format!(
                    "demo needs more than {} steps to cover the load step",
                    scenario::STEP_AT + 30
                )));
            }
            let mut runner = build(&cfg)?;
            train(&mut runner, cfg.steps)?;
            finish(&runner, &cfg)?;
            let shared = runner.shared();
            let report = {
                let trace = shared.trace.read();
                scenario::analyze_step(&trace, scenario::STEP_AT, 50, 20, 0.1)
            };
            match report {
                Some(r) => println!("{}", serde_json::to_string_pretty(&r)?),
                None => log::warn!("trace too short to analyze the load step"),
            }
            if serve {
                serve_blocking(shared, &cfg)?;
            }
            Ok(())
        }
    }
}

fn train(runner: &mut Runner<AnyEnv>, steps: u64) -> anyhow::Result<()> {
    let start = Instant::now();
    for i in 0..steps {
        runner
            .step()
            .with_context(|| format!("decision loop failed at step {}", runner.timestep()))?;
        if (i + 1) % 5_000 == 0 {
            log::info!("step {} / {steps} ({:.1?})", i + 1, start.elapsed());
        }
    }
    Ok(())
}

fn finish(runner: &Runner<AnyEnv>, cfg: &RunConfig) -> anyhow::Result<()> {
    let shared = runner.shared();
    let trace = shared.trace.read();
    let counts = trace.live_counts();
    let n = trace.len().max(1) as f64;
    let mean_reward = trace.records().iter().map(|r| r.total_reward()).sum::<f64>() / n;
    println!(
        "steps={} mean_reward={mean_reward:.4} uncertain={} extremum={}",
        trace.len(),
        counts.uncertain,
        counts.extremum
    );
    let episodes = runner.episode_returns();
    if !episodes.is_empty() {
        let mean = episodes.iter().sum::<f64>() / episodes.len() as f64;
        println!("episodes={} mean_episode_return={mean:.3}", episodes.len());
    }
    match &cfg.trace {
        Some(p) => {
            trace.export(p).with_context(|| format!("writing {}", p.display()))?;
            log::info!("trace written to {}", p.display());
        }
        None => log::info!("no trace path given ({ENV_PREFIX}TRACE or --trace); trace not written"),
    }
    Ok(())
}

fn serve_blocking(shared: Arc<Shared>, cfg: &RunConfig) -> anyhow::Result<()> {
    tokio::runtime::Runtime::new()?.block_on(server::serve(shared, cfg.execution, &cfg.addr))
}
