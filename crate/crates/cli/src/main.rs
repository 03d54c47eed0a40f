use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hj_cli::config::{ConfigFile, ExperimentConfig, ExperimentKind, Init, Overrides, OUT_DIR_ENV};
use hj_cli::experiments::run_experiment;
use hj_cli::{exit_code_for, EXIT_ASSERTION, EXIT_USAGE};
use hj_core::Builtin;

/// Lax-Oleinik experiments for H(x, Du) + sin(x) u = c on the circle.
#[derive(Debug, Parser)]
#[command(name = "hj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Builtin model: e1 or e3.
    #[arg(long, global = true)]
    model: Option<Builtin>,
    /// Right-hand side c.
    #[arg(long, global = true, allow_hyphen_values = true)]
    c: Option<f64>,
    /// Grid nodes.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Time step (automatic when omitted).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Time horizon.
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
    /// Output directory (falls back to $HJ_OUT_DIR, then ./hj-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG line plot.
    #[arg(long = "emit-svg", global = true)]
    emit_svg: bool,
    /// Exit with status 2 if any assertion fails.
    #[arg(long, global = true)]
    check: bool,
    /// Seed for randomized suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Maximal and minimal solutions, the forward conjugate and the Aubry set.
    Solve,
    /// Bisection bracket and inf-sup bound for the critical value.
    C0 {
        /// Initial bracket as lo,hi.
        #[arg(long, value_parser = parse_bracket, allow_hyphen_values = true)]
        bracket: Option<(f64, f64)>,
        /// Bisection steps.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Time evolution under the backward (or forward) semigroup.
    Evolve {
        /// const:<a>, umax+<a>, umin-<a> or mid+<a>.
        #[arg(long, allow_hyphen_values = true)]
        init: Option<Init>,
        /// Use the forward semigroup.
        #[arg(long)]
        forward: bool,
    },
    /// Contact Hamiltonian flow: rest points or one trajectory.
    Flow {
        /// Locate and classify the rest points.
        #[arg(long = "fixed-points")]
        fixed_points: bool,
        /// Initial state as x,u,p.
        #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
        state: Option<[f64; 3]>,
    },
    /// Shooting construction of the e3 solution at c = 0.
    Oracle,
    /// Randomized invariant suites.
    Properties {
        /// Cases per suite.
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Every acceptance criterion.
    All,
}

fn parse_floats(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() == count {
        Ok(v)
    } else {
        Err(format!("expected {count} comma-separated numbers, got {}", v.len()))
    }
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    parse_floats(s, 2).map(|v| (v[0], v[1]))
}

fn parse_state(s: &str) -> Result<[f64; 3], String> {
    parse_floats(s, 3).map(|v| [v[0], v[1], v[2]])
}

fn resolve(cli: Cli) -> hj_core::Result<ExperimentConfig> {
    let c = cli.common;
    let mut flags = Overrides {
        model: c.model,
        c: c.c,
        n: c.n,
        dt: c.dt,
        t_max: c.t_max,
        out: c.out,
        emit_svg: c.emit_svg,
        check: c.check,
        seed: c.seed,
        ..Overrides::default()
    };
    let kind = match cli.command {
        Command::Solve => ExperimentKind::Solve,
        Command::C0 { bracket, iterations } => {
            flags.bracket = bracket;
            flags.iterations = iterations;
            ExperimentKind::C0
        }
        Command::Evolve { init, forward } => {
            flags.init = init;
            flags.forward = forward;
            ExperimentKind::Evolve
        }
        Command::Flow { fixed_points, state } => {
            flags.fixed_points = fixed_points;
            flags.state = state;
            ExperimentKind::Flow
        }
        Command::Oracle => ExperimentKind::Oracle,
        Command::Properties { cases } => {
            flags.cases = cases;
            ExperimentKind::Properties
        }
        Command::All => ExperimentKind::All,
    };
    let file = c.config.as_deref().map(ConfigFile::load).transpose()?;
    let env_out = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    ExperimentConfig::resolve(kind, file, &flags, env_out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let cfg = match resolve(cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    match run_experiment(&cfg) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(report) = outcome.files.last() {
                println!("wrote {}", report.display());
            }
            if cfg.check && !outcome.passed() {
                ExitCode::from(EXIT_ASSERTION as u8)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
