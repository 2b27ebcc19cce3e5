//! Command-line front end: solve and compare instances, generate benchmark
//! instances, tune the Wasserstein radius and print the built-in fixtures.
//!
//! Reports are written as JSON to `--out` or to standard output. The process
//! exits with 0 on success, 2 when the solve found no feasible point and 1 on
//! any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use drccp::bench::{compare, generate, tune_radius, GeneratorPreset, PresetKind, RadiusChoice, ResourceFamily, TuneOptions};
use drccp::driver::{solve, Method, SolveOptions};
use drccp::model::{fixture, load_instance_file, save_instance, FixtureName, Order};

/// Exit code of a solve that found no feasible point.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "drccp", version, about = "Wasserstein distributionally robust chance-constrained programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solves an instance with one method.
    Solve {
        /// Instance file (JSON).
        #[arg(long)]
        instance: PathBuf,
        /// One of alsox, alsox-sharp, alsox-weak, cvar, bigm, brute.
        #[arg(long)]
        method: Method,
        /// Bisection width δ₁; defaults to 0.5 for binary X with an integral
        /// objective and 1e-2 otherwise.
        #[arg(long)]
        delta: Option<f64>,
        /// Time limit in seconds for branch-and-bound (Big-M and binary lower levels).
        #[arg(long)]
        time_limit: Option<f64>,
        /// Grid step of the brute-force method on continuous sets.
        #[arg(long)]
        grid_step: Option<f64>,
        /// Report file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves an instance with several methods and reports improvements.
    Compare {
        #[arg(long)]
        instance: PathBuf,
        /// Methods to run, comma separated or repeated.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        methods: Vec<Method>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        time_limit: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generates a benchmark instance.
    Gen {
        /// table1, table2, table3, table4 or resource.
        #[arg(long)]
        preset: PresetKind,
        /// Number of scenarios.
        #[arg(long = "N")]
        n_scenarios: usize,
        /// Decision dimension, or the number of users for the resource preset.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        /// Radius θ; the preset's radius if absent.
        #[arg(long)]
        theta: Option<f64>,
        /// Ball order: a number ≥ 1 or "inf"; the preset's order if absent.
        #[arg(long)]
        q: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of time slots (resource preset).
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        /// Demand slope (resource preset).
        #[arg(long, default_value_t = 1.0)]
        demand: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Picks the smallest radius whose out-of-sample satisfaction interval
    /// lies above that of the regular chance-constrained program.
    TuneRadius {
        /// Scenario family; only "resource" is built in.
        #[arg(long, default_value = "resource")]
        family: String,
        /// Radii as `start:step:end` or a comma-separated list.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        #[arg(long, default_value_t = 4)]
        users: usize,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        #[arg(long, default_value_t = 1.0)]
        demand: f64,
        #[arg(long = "N", default_value_t = 20)]
        n_scenarios: usize,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Noise level ρ of the evaluation scenarios.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value = "alsox-sharp")]
        method: Method,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prints a built-in fixture instance, or lists the fixture names.
    Fixtures {
        /// E1, E2, E3, E4, E5, GaussCond1 or GaussCond2.
        #[arg(long)]
        name: Option<FixtureName>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    emit(&serde_json::to_vec_pretty(value)?, out)
}

fn solve_options(delta: Option<f64>, time_limit: Option<f64>, grid_step: Option<f64>) -> Result<SolveOptions> {
    let mut opts = SolveOptions { delta1: delta, grid_step, ..SolveOptions::default() };
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            bail!("--delta must be positive and finite");
        }
    }
    if let Some(secs) = time_limit {
        let limit = Duration::try_from_secs_f64(secs).context("--time-limit must be a nonnegative number of seconds")?;
        opts.big_m.time_limit = Some(limit);
        opts.lower.time_limit = Some(limit);
    }
    Ok(opts)
}

fn parse_order(text: &str) -> Result<Order> {
    if text.eq_ignore_ascii_case("inf") {
        return Ok(Order::Infinity);
    }
    let q: f64 = text.parse().with_context(|| format!("invalid order \"{text}\""))?;
    if !(q >= 1.0 && q.is_finite()) {
        bail!("order must be \"inf\" or a number ≥ 1");
    }
    Ok(Order::Finite(q))
}

/// Parses `start:step:end` (inclusive, up to rounding) or `a,b,c`.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let [start, step, end] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<f64>());
        let (start, step, end) = (start?, step?, end?);
        if !(step > 0.0) || end < start {
            bail!("grid needs a positive step and end ≥ start");
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| start + k as f64 * step).collect());
    }
    text.split(',').map(|p| p.trim().parse::<f64>().with_context(|| format!("invalid radius \"{p}\""))).collect()
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve { instance, method, delta, time_limit, grid_step, out } => {
            let inst = load_instance_file(&instance).with_context(|| format!("loading {}", instance.display()))?;
            let report = solve(&inst, method, &solve_options(delta, time_limit, grid_step)?)?;
            emit_json(&report, out.as_deref())?;
            Ok(if report.feasible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INFEASIBLE) })
        }
        Command::Compare { instance, methods, delta, time_limit, out } => {
            let inst = load_instance_file(&instance).with_context(|| format!("loading {}", instance.display()))?;
            let opts = solve_options(delta, time_limit, None)?;
            let report = compare(&inst, &methods, delta, &opts)?;
            emit_json(&report, out.as_deref())?;
            let any_feasible = report.outcomes.iter().any(|o| o.feasible);
            Ok(if any_feasible { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INFEASIBLE) })
        }
        Command::Gen { preset, n_scenarios, n, eps, theta, q, seed, horizon, demand, out } => {
            let mut p = GeneratorPreset::new(preset, n_scenarios, n, eps, seed);
            if let Some(theta) = theta {
                p.theta = theta;
            }
            if let Some(q) = q {
                p.q = parse_order(&q)?;
            }
            p.horizon = horizon;
            p.demand = demand;
            emit(&save_instance(&generate(&p)?), out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::TuneRadius {
            family,
            grid,
            reps,
            users,
            horizon,
            demand,
            n_scenarios,
            eps,
            noise,
            method,
            delta,
            seed,
            out,
        } => {
            if !family.eq_ignore_ascii_case("resource") {
                bail!("unknown family \"{family}\"; only \"resource\" is built in");
            }
            let fam = ResourceFamily { users, horizon, demand, n_scenarios, epsilon: eps, noise };
            let opts = TuneOptions { method, seed, solve: solve_options(delta, None, None)? };
            let report = tune_radius(&fam, &parse_grid(&grid)?, reps, &opts)?;
            emit_json(&report, out.as_deref())?;
            Ok(if report.chosen == RadiusChoice::NoneDominates { ExitCode::from(EXIT_INFEASIBLE) } else { ExitCode::SUCCESS })
        }
        Command::Fixtures { name, out } => {
            match name {
                Some(name) => emit(&save_instance(&fixture(name)), out.as_deref())?,
                None => {
                    let names: Vec<String> = FixtureName::ALL.iter().map(|n| n.to_string()).collect();
                    emit(names.join("\n").as_bytes(), out.as_deref())?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 keeps meaning "infeasible".
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
