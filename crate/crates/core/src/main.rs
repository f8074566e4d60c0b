use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paramest::harness::{emit_plot, export_csv, resolve_scenario, run_scenario, summary};
use paramest::signals::{builtin, excitation_profile, BUILTIN_NAMES};
use paramest::{verify, Error, Execution};

/// Like `println!`, but a closed stdout (e.g. piping into `head`) is not an
/// error worth a panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Online parameter estimators (GE, MGE, MRE, MGE_MRE, DREM) and their
/// benchmark scenarios.
#[derive(Debug, Parser)]
#[command(name = "paramest", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a builtin or file scenario and write CSV + SVG.
    Run {
        /// Builtin scenario name or path to a TOML scenario file.
        #[arg(long)]
        scenario: String,
        /// Integration step in seconds.
        #[arg(long)]
        dt: Option<f64>,
        /// Simulation horizon in seconds.
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        /// Output directory (default: current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin scenarios.
    List,
    /// Print the sliding-window excitation level ρ(t, T).
    CheckPe {
        #[arg(long)]
        scenario: String,
        /// Window length T in seconds.
        #[arg(long)]
        window: f64,
    },
    /// Run the self-check suite.
    Verify,
}

fn run(
    scenario: &str,
    dt: Option<f64>,
    t_end: Option<f64>,
    out: Option<PathBuf>,
) -> paramest::Result<()> {
    let mut cfg = resolve_scenario(scenario)?;
    if let Some(dt) = dt {
        cfg.settings.dt = dt;
    }
    if let Some(t_end) = t_end {
        cfg.settings.t_end = t_end;
    }
    let result = run_scenario(&cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let csv_prefix = cfg
        .outputs
        .csv
        .clone()
        .map_or_else(|| dir.join(&cfg.name), |p| dir.join(p));
    let svg_path = cfg
        .outputs
        .svg
        .clone()
        .map_or_else(|| dir.join(format!("{}.svg", cfg.name)), |p| dir.join(p));
    let written = export_csv(&result, &csv_prefix)?;
    emit_plot(&result, &svg_path)?;
    let _ = write!(std::io::stdout(), "{}", summary(&result));
    for p in written.iter().chain(std::iter::once(&svg_path)) {
        say!("wrote {}", p.display());
    }
    Ok(())
}

fn list() -> paramest::Result<()> {
    for name in BUILTIN_NAMES {
        let b = builtin(name)?;
        say!("{name}  {}", b.summary);
    }
    Ok(())
}

fn check_pe(scenario: &str, window: f64) -> paramest::Result<()> {
    let cfg = resolve_scenario(scenario)?;
    let t_end = cfg.settings.t_end;
    if window.is_nan() || window <= 0.0 || window > t_end {
        return Err(Error::Config(format!(
            "window must lie in (0, {t_end}], got {window}"
        )));
    }
    let dt = (window / 1000.0).min(1e-2);
    let starts: Vec<f64> = (0..)
        .map(|k| k as f64)
        .take_while(|t| t + window <= t_end + 1e-9)
        .collect();
    let profile = excitation_profile(
        cfg.problem.regressor(),
        &starts,
        window,
        dt,
        Execution::default(),
    )?;
    say!("# scenario {}, window T = {window}", cfg.name);
    say!("t,rho");
    for (t, rho) in profile {
        say!("{t},{rho:e}");
    }
    Ok(())
}

fn verify_all() -> bool {
    let outcomes = verify::run_all(Execution::default());
    let mut all = true;
    for o in &outcomes {
        all &= o.passed;
        say!(
            "{} [{:>7}] {:<48} {:6.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.seconds,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    say!("{} checks, {failed} failed", outcomes.len());
    all
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Run {
            scenario,
            dt,
            t_end,
            out,
        } => run(&scenario, dt, t_end, out),
        Command::List => list(),
        Command::CheckPe { scenario, window } => check_pe(&scenario, window),
        Command::Verify => {
            return if verify_all() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
