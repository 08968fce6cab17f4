use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tvmpc::harness::{builtin, builtin_scenarios, emit_csv, run_scenario, verify, ScenarioConfig};

#[derive(Parser)]
#[command(name = "tvmpc", about = "Time-varying MPC walking planner simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a `key = value` config file.
    Run {
        /// Scenario name (see `list`) or path to a config file.
        target: String,
        /// Write the per-cycle trace as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key, e.g. `--override noise_bound=0.01`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved configuration before running.
        #[arg(long)]
        show_config: bool,
    },
    /// List the built-in scenarios.
    List,
    /// Run the acceptance checks and print a pass/fail table.
    Verify,
}

fn load(target: &str, seed: Option<u64>, overrides: &[String]) -> tvmpc::Result<ScenarioConfig> {
    let mut cfg = match builtin(target) {
        Ok(cfg) => cfg,
        Err(_) if Path::new(target).exists() => ScenarioConfig::from_file(Path::new(target))?,
        Err(e) => return Err(e),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.apply_text(&overrides.join("\n"))?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(target: &str, out: Option<&Path>, seed: Option<u64>, overrides: &[String], show: bool) -> tvmpc::Result<bool> {
    let cfg = load(target, seed, overrides)?;
    if show {
        print!("{}", cfg.to_text());
    }
    let result = run_scenario(&cfg)?;
    if let Some(path) = out {
        emit_csv(&result.trace, path)?;
    }
    let m = &result.metrics;
    println!("scenario            {}", cfg.name);
    println!("cycles              {}", result.trace.rows.len());
    println!("completed           {}", m.completed);
    if let Some((row, reason)) = &m.abort {
        println!("aborted at row      {row}: {reason}");
    }
    println!("hard violations     {}", m.hard_violations);
    println!("slack activations   {}", m.slack_activations);
    println!("max |zmp - ref| x   {:.6} m", m.max_tracking_error[0]);
    println!("max |zmp - ref| y   {:.6} m", m.max_tracking_error[1]);
    println!("max dcm-support     {:.6} m", m.max_dcm_support_dist);
    Ok(m.is_clean())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            target,
            out,
            seed,
            overrides,
            show_config,
        } => run(&target, out.as_deref(), seed, &overrides, show_config),
        Command::List => {
            for b in builtin_scenarios() {
                println!("{:<14} {}", b.config.name, b.description);
            }
            Ok(true)
        }
        Command::Verify => {
            let report = verify::run_all();
            for c in &report {
                println!("{c}");
            }
            Ok(report.iter().all(|c| c.passed))
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
