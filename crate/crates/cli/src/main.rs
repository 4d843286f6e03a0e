use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use uscparity::harness::{self, RunConfig};
use uscparity::{ModelSelection, ParityLabel};

/// Steady pointers, fidelities and oracle checks for the two-qubit parity
/// measurement. Settings come from defaults, then `--config`, then
/// `USCPARITY_<KEY>` variables, then flags.
#[derive(Parser, Debug)]
#[command(name = "uscparity", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file or JSON object.
    #[arg(long, global = true, value_name = "PATH", env = "USCPARITY_CONFIG")]
    config: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "exact|rwa|both")]
    model: Option<ModelSelection>,
    /// Relative tolerance of the amplitude integration.
    #[arg(long, global = true, value_name = "FLOAT")]
    tol: Option<f64>,
    /// Horizon in units of 1/kappa.
    #[arg(long = "t-end", global = true, value_name = "FLOAT")]
    t_end: Option<f64>,
    /// Any configuration key, e.g. `--set g_over_kappa=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Steady (I, Q) of all four labels.
    PhasePortrait,
    /// Amplitude of one label against time.
    TimeTrace {
        #[arg(long)]
        label: Option<ParityLabel>,
    },
    /// Average fidelity over the g/omega_r x g/kappa grid.
    Heatmap {
        /// Axis `min:max:points[:log]`.
        #[arg(long = "g-over-kappa", value_name = "AXIS")]
        g_over_kappa: Option<String>,
        #[arg(long = "g-over-omega-r", value_name = "AXIS")]
        g_over_omega_r: Option<String>,
        #[arg(long, value_name = "FLOAT")]
        eps: Option<f64>,
    },
    /// Fidelity along g/omega_r at fixed g/kappa values.
    Cut {
        /// Comma-separated g/kappa values.
        #[arg(long = "g-over-kappa", value_name = "LIST")]
        g_over_kappa: Option<String>,
        #[arg(long, value_name = "FLOAT")]
        eps: Option<f64>,
    },
    /// Lindblad and quadrature oracles against the fast paths; exits with
    /// status 2 when a tolerance is breached.
    OracleCheck {
        /// Also run the full two-qubit Rabi comparison (about a minute).
        #[arg(long)]
        rabi: bool,
        /// Writes oracle and pointer trajectories here.
        #[arg(long = "trajectory-out", value_name = "PATH")]
        trajectory_out: Option<PathBuf>,
    },
}

fn build_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    for kv in &common.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k, v)?;
    }
    if let Some(p) = &common.out {
        cfg.out = Some(p.clone());
    }
    if let Some(m) = common.model {
        cfg.model = m;
    }
    if let Some(t) = common.tol {
        cfg.tol = t;
    }
    if let Some(t) = common.t_end {
        cfg.t_end = t;
    }
    Ok(cfg)
}

fn output(cfg: &RunConfig) -> Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = build_config(&cli.common)?;
    match cli.command {
        Command::PhasePortrait => {
            harness::run_phase_portrait(&cfg, output(&cfg)?)?;
        }
        Command::TimeTrace { label } => {
            let label = label.unwrap_or(cfg.label);
            harness::run_time_trace(&cfg, label, output(&cfg)?)?;
        }
        Command::Heatmap { g_over_kappa, g_over_omega_r, eps } => {
            if let Some(a) = g_over_kappa {
                cfg.set("sweep_g_over_kappa", &a)?;
            }
            if let Some(a) = g_over_omega_r {
                cfg.set("sweep_g_over_omega_r", &a)?;
            }
            if let Some(e) = eps {
                cfg.eps_over_kappa = e;
            }
            let points = harness::run_fidelity_heatmap(&cfg.sweep.clone(), &cfg, output(&cfg)?)?;
            let failed = points.iter().filter(|p| p.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} grid points failed; see the error column");
            }
        }
        Command::Cut { g_over_kappa, eps } => {
            if let Some(list) = g_over_kappa {
                cfg.set("cut_g_over_kappa", &list)?;
            }
            if let Some(e) = eps {
                cfg.eps_over_kappa = e;
            }
            let values = cfg.cut_g_over_kappa.clone();
            harness::run_fidelity_cut(&cfg, &values, output(&cfg)?)?;
        }
        Command::OracleCheck { rabi, trajectory_out } => {
            cfg.oracle_rabi |= rabi;
            if trajectory_out.is_some() {
                cfg.oracle_trajectory_out = trajectory_out;
            }
            let check = harness::run_oracle_check(&cfg, output(&cfg)?)?;
            if !check.passed() {
                for r in check.failures() {
                    eprintln!("violated: {} {} {} = {:e} (threshold {:e})", r.check, r.label, r.metric, r.value, r.threshold);
                }
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
