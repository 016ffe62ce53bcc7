use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use configbounds_cli::*;
use configbounds_core::configspace::{WdpGenConfig, DEFAULT_GRID_EPS, DEFAULT_R_GRID};
use configbounds_core::solver::RulePair;

#[derive(Parser)]
#[command(
    name = "configbounds",
    version,
    about = "Generalization bounds for tuned branch-and-bound"
)]
struct Cli {
    /// Output directory shared by all stages.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate winner-determination instances.
    Gen(GenArgs),
    /// Extract the tree-size dual of every instance.
    Duals(DualsArgs),
    /// Build the approximation profile and bound curves.
    Bounds(BoundsArgs),
    /// Check the cosine-family counterexample.
    Counterexample(CounterexampleArgs),
    /// Fit a k-piece approximation to one dual file.
    Fit(FitArgs),
    /// Empirical Rademacher complexity of the extracted duals.
    Rad(RadArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 10)]
    goods: usize,
    #[arg(long, default_value_t = 20)]
    bids: usize,
}

#[derive(Args)]
struct DualsArgs {
    /// Scoring-rule pair, e.g. `L,S` or `P-A`.
    #[arg(long, default_value = "L,S")]
    rules: RulePair,
    /// Tree-size cap: `auto` or a positive integer.
    #[arg(long, default_value = "auto")]
    kappa: String,
    /// Per-run cap used while selecting κ automatically.
    #[arg(long, default_value_t = DEFAULT_HARD_CAP)]
    hard_cap: u64,
    #[arg(long, default_value_t = DEFAULT_R_GRID)]
    r_grid: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_EPS)]
    grid_eps: f64,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value = "1..64")]
    j_range: String,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// Use the fixed δ = 0.01, slack 1/40 and baseline floor 0.023.
    #[arg(long)]
    reference_mode: bool,
    /// Override the variable count taken from the instances.
    #[arg(long)]
    n_vars: Option<u64>,
    /// Override the κ recorded in the dual files.
    #[arg(long)]
    kappa: Option<u64>,
    /// Comma-separated training-set sizes (default: 10^2..10^8, 4 per decade).
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<u64>>,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    gammas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    ps: Vec<f64>,
    #[arg(long = "ns", value_delimiter = ',', default_value = "4,8,12")]
    ns: Vec<usize>,
    #[arg(long = "c", value_delimiter = ',', default_value = "0.4,0.45")]
    cs: Vec<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// Dual file (dual extraction or bare piecewise function).
    dual: PathBuf,
    #[arg(long, short)]
    k: usize,
    /// Write the result here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RadArgs {
    /// Monte-Carlo draws in addition to the exact value (0 disables).
    #[arg(long, default_value_t = 0)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_kappa(s: &str, hard_cap: u64, r_grid: usize) -> CliResult<KappaSpec> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KappaSpec::Auto { r_grid, hard_cap });
    }
    match s.parse::<u64>() {
        Ok(k) if k > 0 => Ok(KappaSpec::Fixed(k)),
        _ => Err(CliError::Precondition(format!(
            "--kappa must be `auto` or a positive integer, got {s:?}"
        ))),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let threads = threads_from_env()?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Gen(a) => {
            let generator = WdpGenConfig {
                goods: a.goods,
                bids: a.bids,
                ..WdpGenConfig::default()
            };
            let m = cmd_gen(out, a.seed, a.instances, &generator)?;
            eprintln!(
                "wrote {} instances to {}",
                m.instances.len(),
                out.join(INSTANCES_DIR).display()
            );
        }
        Command::Duals(a) => {
            let kappa = parse_kappa(&a.kappa, a.hard_cap, a.r_grid)?;
            let s = cmd_duals(out, a.rules, kappa, a.grid_eps, threads)?;
            eprintln!(
                "kappa = {}; extracted {} duals, skipped {} existing",
                s.kappa,
                s.extracted.len(),
                s.skipped.len()
            );
        }
        Command::Bounds(a) => {
            let opts = BoundsOptions {
                j_range: parse_j_range(&a.j_range)?,
                delta: a.delta,
                reference_mode: a.reference_mode,
                schedule: a.schedule.unwrap_or_else(default_schedule),
                n_vars: a.n_vars,
                kappa: a.kappa,
            };
            let r = cmd_bounds(out, &opts)?;
            eprintln!(
                "n = {}, kappa = {}, j* = {}",
                r.n_vars, r.kappa, r.profile.j_star
            );
            for row in &r.curve.rows {
                println!(
                    "N={:<10} reported={:.6} worst_case={:.6} srm={:.6} (j={}) baseline={:.6}",
                    row.n,
                    row.reported(),
                    row.worst_case,
                    row.srm,
                    row.srm_best_j,
                    row.baseline
                );
            }
        }
        Command::Counterexample(a) => {
            let opts = CounterexampleOptions {
                gammas: a.gammas,
                ps: a.ps,
                ns: a.ns,
                cs: a.cs,
            };
            let r = cmd_counterexample(out, &opts)?;
            eprintln!(
                "{} approximation checks, {} demonstrations: {}",
                r.approximation.len(),
                r.demos.len(),
                if r.all_pass { "all pass" } else { "FAILURES" }
            );
            if !r.all_pass {
                return Err(CliError::Numerical(
                    "counterexample checks failed; see counterexample.json".into(),
                ));
            }
        }
        Command::Fit(a) => emit_json(a.output.as_deref(), &cmd_fit(&a.dual, a.k)?)?,
        Command::Rad(a) => emit_json(None, &cmd_rad(out, a.draws, a.seed, threads)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
