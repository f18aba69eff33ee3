//! Benchmark CLI: single runs, the six-row controller comparison, the
//! randomized property suites, and the analytic settling budget.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use phrc_core::control::assemble_fixed_time_bound;
use phrc_core::export::{export_comparison, export_run};
use phrc_core::metrics::{self, compare_variants, workspace_mass_sup};
use phrc_core::sim::{run_scenario, BreachMode};
use phrc_core::{checks, ControllerVariant, Error, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "phrc",
    version,
    about = "Two-link manipulator compliance-control benchmark",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller and export the trace with its plots.
    Run(RunArgs),
    /// Run all controller variants, model-based and model-free, on the same
    /// scenario; export the comparison table and per-row plots.
    Compare(CompareArgs),
    /// Execute the randomized property suites and report each one.
    Check(CheckArgs),
    /// Print the analytic settling budget for the configured gains.
    Bound(ScenarioOverrides),
}

#[derive(Args)]
struct ScenarioOverrides {
    /// Scenario TOML; missing keys fall back to the benchmark defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulation step override [s].
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon override [s].
    #[arg(long)]
    horizon: Option<f64>,
}

impl ScenarioOverrides {
    fn load(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ScenarioConfig::from_toml_str(&text)?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(horizon) = self.horizon {
            cfg.horizon = horizon;
        }
        Ok(cfg)
    }
}

fn parse_variant(s: &str) -> Result<ControllerVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    /// Controller to simulate: iblf, tviblf, or fxt-tviblf.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<ControllerVariant>,
    /// Replace the model-based feedforward with the adaptive network.
    #[arg(long, overrides_with = "model_based")]
    model_free: bool,
    /// Use the full model feedforward (default unless the config says
    /// otherwise).
    #[arg(long)]
    model_based: bool,
    /// Abort with a nonzero status on the first constraint violation.
    #[arg(long, overrides_with = "tolerant")]
    strict: bool,
    /// Clamp the controller's view on violations and keep going.
    #[arg(long)]
    tolerant: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// File stem; defaults to the variant name plus mb/nn.
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Seed for every suite's random sampling.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Samples for the model and barrier suites.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Samples for the scalar inequality suite.
    #[arg(long, default_value_t = 10_000)]
    lemma_samples: usize,
    /// Trajectories for the decay-ode positivity suite.
    #[arg(long, default_value_t = 500)]
    ode_samples: usize,
}

fn default_stem(variant: ControllerVariant, model_free: bool) -> String {
    format!("{variant}_{}", if model_free { "nn" } else { "mb" })
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = args.scenario.load()?;
    if let Some(v) = args.variant {
        cfg.variant = v;
    }
    if args.model_free {
        cfg.model_free = true;
    } else if args.model_based {
        cfg.model_free = false;
    }
    if args.strict {
        cfg.breach_mode = BreachMode::Strict;
    } else if args.tolerant {
        cfg.breach_mode = BreachMode::Tolerant;
    }

    let trace = run_scenario(&cfg)?;
    let stem = args
        .stem
        .unwrap_or_else(|| default_stem(cfg.variant, cfg.model_free));
    let files = export_run(&args.out, &trace, &stem)?;

    let duration = trace.duration();
    println!(
        "{} ({}), {} samples over {:.3} s",
        cfg.variant,
        if cfg.model_free { "model-free" } else { "model-based" },
        trace.records.len(),
        duration
    );
    println!(
        "  rmse: [{:.4e}, {:.4e}] m",
        metrics::rmse(&trace, 0, 0.0, duration)?,
        metrics::rmse(&trace, 1, 0.0, duration)?
    );
    if let Some(m) = metrics::constraint_margin(&trace) {
        println!(
            "  constraint margin: [{:.4}, {:.4}] m at t = [{:.2}, {:.2}] s",
            m.margin[0], m.margin[1], m.at[0], m.at[1]
        );
    }
    match metrics::settling_time(&trace, metrics::DEFAULT_SETTLING_BAND) {
        Some(s) => println!(
            "  settled {:.3} s after release (band {:.0e} m)",
            s.duration,
            metrics::DEFAULT_SETTLING_BAND
        ),
        None => println!("  no settling inside the band"),
    }
    if trace.breach_steps > 0 {
        println!("  tolerated breach steps: {}", trace.breach_steps);
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> anyhow::Result<()> {
    let cfg = args.scenario.load()?;
    let matrix = compare_variants(&cfg)?;
    let files = export_comparison(&args.out, &matrix)?;

    println!(
        "{:<12} {:<6} {:>11} {:>11} {:>9} {:>9} {:>9} {:>11} {:>8}",
        "variant", "model", "rmse1", "rmse2", "margin1", "margin2", "settle", "tmax", "breach"
    );
    for r in &matrix.reports {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3e}"));
        println!(
            "{:<12} {:<6} {:>11.3e} {:>11.3e} {:>9.4} {:>9.4} {:>9} {:>11} {:>8}",
            r.variant.to_string(),
            if r.model_free { "nn" } else { "mb" },
            r.rmse[0],
            r.rmse[1],
            r.margin[0],
            r.margin[1],
            opt(r.settling),
            opt(r.tmax),
            r.breaches
        );
    }
    println!("workspace inertia supremum: {:.4}", matrix.mass_sup);
    println!("wrote {} files under {}", files.len(), args.out.display());
    Ok(())
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    reports.extend(checks::dynamics_suite(args.seed, args.samples));
    reports.extend(checks::barrier_suite(args.seed, args.samples));
    reports.extend(checks::lemma_suite(args.seed, args.lemma_samples));
    reports.push(checks::ode_positivity_suite(args.seed, args.ode_samples));

    let mut failed = 0;
    for r in &reports {
        println!("{}", r.summary_line());
        if !r.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        anyhow::bail!("{failed} of {} property suites failed", reports.len());
    }
    println!("all {} property suites passed", reports.len());
    Ok(())
}

fn cmd_bound(args: ScenarioOverrides) -> anyhow::Result<()> {
    let cfg = args.load()?;
    cfg.validate()?;
    let mass_sup = workspace_mass_sup(&cfg.robot, &cfg.constraints);
    let budget = assemble_fixed_time_bound(&cfg.gains, 2, cfg.rbf.centers.len(), mass_sup)?;

    println!("workspace inertia supremum: {mass_sup:.6}");
    let names = [
        "position (high power)",
        "position (low power)",
        "velocity (high power)",
        "velocity (low power)",
        "weights (high power)",
        "weights (low power)",
    ];
    for (name, lam) in names.iter().zip(budget.lambda) {
        println!("  rate {name:<22} {lam:.6e}");
    }
    println!(
        "model-based: alpha = {:.6e}, beta = {:.6e}, settling bound = {:.4} s",
        budget.alpha_model_based, budget.beta_model_based, budget.tmax_model_based
    );
    println!(
        "model-free:  alpha = {:.6e}, beta = {:.6e}, settling bound = {:.4} s",
        budget.alpha_model_free, budget.beta_model_free, budget.tmax_model_free
    );
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Check(args) => cmd_check(args),
        Command::Bound(args) => cmd_bound(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let breach = err.chain().any(|cause| {
                matches!(
                    cause.downcast_ref::<Error>().map(Error::root),
                    Some(Error::ConstraintBreach { .. })
                )
            });
            if breach {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
