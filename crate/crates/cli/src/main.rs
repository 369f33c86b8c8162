use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use exo_gait::engine::{EngineConfig, DEFAULT_DT};
use exo_gait::params::{load_geometry, ParameterStore};
use exo_gait::planner::Behavior;
use exo_gait::trace::{export_csv, import_csv, normalize_steps, run_scripted, TraceRow};
use exo_pilot::{serve, ServiceConfig};

/// Exoskeleton gait trajectory engine.
#[derive(Parser)]
#[command(name = "exogait", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scripted sequence of continuously triggered steps and write the trace as CSV.
    Run {
        /// flat, stairs-up, stairs-down, ramp-up, ramp-down or stones:<m>
        #[arg(long)]
        behavior: Behavior,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Average the steps of a trace over normalized step time.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the engine to a pilot console over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
        /// State stream rate (Hz).
        #[arg(long, default_value_t = exo_pilot::server::DEFAULT_RATE_HZ)]
        rate: f64,
        /// Behavior selected at start-up.
        #[arg(long, default_value = "flat")]
        behavior: Behavior,
        #[command(flatten)]
        engine: EngineArgs,
    },
}

#[derive(Args)]
struct EngineArgs {
    /// Gait parameter config file (TOML).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Parameter set to use instead of the behavior's preset.
    #[arg(long = "set")]
    set: Option<String>,
    /// Leg geometry file (TOML).
    #[arg(long)]
    geom: Option<PathBuf>,
    /// Control period (s).
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
}

impl EngineArgs {
    fn config(&self, behavior: Behavior) -> Result<EngineConfig> {
        let mut store = ParameterStore::new();
        if let Some(path) = &self.params {
            store
                .load_file(path)
                .with_context(|| format!("loading parameters from {}", path.display()))?;
        }
        if let Some(name) = &self.set {
            if store.get(name).is_none() {
                let known: Vec<&str> = store.names().collect();
                bail!("unknown parameter set '{name}' (known: {})", known.join(", "));
            }
        }
        let geometry = match &self.geom {
            Some(path) => load_geometry(path).with_context(|| format!("loading geometry from {}", path.display()))?,
            None => Default::default(),
        };
        Ok(EngineConfig {
            geometry,
            dt: self.dt,
            behavior,
            store,
            params_name: self.set.clone(),
            ..EngineConfig::default()
        })
    }
}

fn run(behavior: Behavior, steps: usize, out: &Path, engine: &EngineArgs) -> Result<()> {
    let rows = run_scripted(engine.config(behavior)?, steps)?;
    export_csv(&rows, out).with_context(|| format!("writing {}", out.display()))?;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    println!(
        "{steps} {behavior} steps, {} rows, {:.3} s, hip advanced {:.4} m, rose {:.4} m -> {}",
        rows.len(),
        last.t - first.t,
        last.hip_frame_x - first.hip_frame_x,
        last.hip_frame_z - first.hip_frame_z,
        out.display()
    );
    Ok(())
}

fn normalize(input: &Path, out: &Path) -> Result<()> {
    let rows: Vec<TraceRow> = import_csv(input).with_context(|| format!("reading {}", input.display()))?;
    let n = normalize_steps(&rows)?;
    export_csv(&n.rows(), out).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "averaged {} steps, transfer region [{:.4}, {:.4}] -> {}",
        n.steps_averaged,
        n.transfer_region.0,
        n.transfer_region.1,
        out.display()
    );
    Ok(())
}

/// One line: context, then each cause not already spelled out by the one before.
fn diagnostic(err: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("exogait: error: {}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match cli.command {
        Command::Run {
            behavior,
            steps,
            out,
            engine,
        } => run(behavior, steps, &out, &engine),
        Command::Normalize { input, out } => normalize(&input, &out),
        Command::Serve {
            bind,
            rate,
            behavior,
            engine,
        } => {
            let service = serve(ServiceConfig {
                bind,
                rate_hz: rate,
                engine: engine.config(behavior)?,
                ..ServiceConfig::default()
            })?;
            println!("listening on {}", service.local_addr());
            service.wait();
            Ok(())
        }
    }
}
