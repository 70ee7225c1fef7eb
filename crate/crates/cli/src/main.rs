use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aemod::harness::{load_config, run_experiment, write_csv, ExperimentKind, ExperimentSpec};
use aemod::optimizer::{solve, solve_same_class, suggest_and_improve, Suggestion};
use aemod::simulator::simulate_traced;
use aemod::zone::analytic_response_times;
use aemod::{
    build_policy, check_stability, effective_service_rates, fleet_rate_bound, simulate,
    DecisionSet, Error, PolicyKind, ZoneConfig,
};
use anyhow::Context;
use clap::{Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "aemod",
    version,
    about = "Charging and dispatch optimisation for an AEMoD service zone"
)]
struct Cli {
    /// Experiment spec (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the solver and simulation seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-class vehicle rates, service rates and margins of a policy.
    Rates(PolicyArgs),
    /// Stability report for a policy; exits with 3 when it is unstable.
    Check {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Required response-rate margin.
        #[arg(long, default_value_t = 0.0)]
        r: f64,
    },
    /// Solves for the optimal decisions.
    Optimize {
        /// Optimise charging only, with same-class dispatch.
        #[arg(long)]
        same_class: bool,
        /// Improves this (possibly infeasible) point instead of running the
        /// multi-start search.
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Simulates the zone under a policy.
    Simulate {
        #[command(flatten)]
        policy: PolicyArgs,
        /// Writes a tab-separated event trace of the first replication.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Runs the experiment in the config and writes CSV.
    Sweep,
    /// Compares every policy at the base configuration and writes CSV.
    Compare,
}

#[derive(clap::Args)]
struct PolicyArgs {
    /// Policy name, e.g. `optimal` or `split-proportional`.
    #[arg(long, default_value = "optimal")]
    policy: PolicyKind,
    /// Decision set as JSON `{"q": [...], "pi": [[...], ...]}`; overrides --policy.
    #[arg(long)]
    decisions: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 2,
        Some(e) if e.is_infeasible() => 3,
        Some(Error::Io(_)) => 2,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn spec(cli: &Cli) -> anyhow::Result<ExperimentSpec> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidConfig {
        field: "--config".into(),
        reason: "a config file is required".into(),
    })?;
    let mut spec = load_config(path)?;
    if let Some(seed) = cli.seed {
        spec.solver.seed = seed;
        if let Some(sim) = spec.sim.as_mut() {
            sim.seed = seed;
        }
    }
    Ok(spec)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, field: &str) -> anyhow::Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig {
            field: field.into(),
            reason: e.to_string(),
        })?,
    )
}

fn read_decisions(path: &Path, cfg: &ZoneConfig) -> anyhow::Result<DecisionSet> {
    let d: DecisionSet = read_json(path, "decisions")?;
    if d.n() != cfg.n() {
        return Err(Error::DimensionMismatch {
            what: "decision classes",
            expected: cfg.n(),
            found: d.n(),
        }
        .into());
    }
    Ok(d)
}

fn decisions(
    args: &PolicyArgs,
    spec: &ExperimentSpec,
    cfg: &ZoneConfig,
) -> anyhow::Result<DecisionSet> {
    match &args.decisions {
        Some(path) => read_decisions(path, cfg),
        None => Ok(build_policy(args.policy, cfg, &spec.solver)?),
    }
}

fn output(cli: &Cli) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(cli: &Cli, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut out = output(cli)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let spec = spec(cli)?;
    let cfg = spec.base_config()?;
    match &cli.command {
        Command::Rates(args) => {
            let d = decisions(args, &spec, &cfg)?;
            let rates = effective_service_rates(&cfg, &d)?;
            emit_json(
                cli,
                &json!({ "decisions": d, "rates": rates, "bound": fleet_rate_bound(&cfg) }),
            )?;
            Ok(0)
        }
        Command::Check { policy, r } => {
            let d = decisions(policy, &spec, &cfg)?;
            let report = check_stability(&cfg, &d, *r)?;
            let times = analytic_response_times(&cfg, &d).ok();
            let stable = report.is_stable() && report.response_limit_met.iter().all(|&b| b);
            emit_json(
                cli,
                &json!({ "stable": stable, "report": report, "response_times": times }),
            )?;
            Ok(if stable { 0 } else { 3 })
        }
        Command::Optimize {
            same_class,
            decisions,
        } => {
            let res = match (decisions, same_class) {
                (Some(path), _) => {
                    let suggestion: Suggestion = read_json(path, "decisions")?;
                    suggest_and_improve(&cfg, &suggestion, &spec.solver)?
                }
                (None, true) => solve_same_class(&cfg, &spec.solver)?,
                (None, false) => solve(&cfg, &spec.solver)?,
            };
            emit_json(cli, &serde_json::to_value(&res)?)?;
            Ok(0)
        }
        Command::Simulate { policy, trace } => {
            let d = decisions(policy, &spec, &cfg)?;
            let sim = spec.sim.clone().unwrap_or_default();
            let report = simulate(&cfg, &d, &sim)?;
            if let Some(path) = trace {
                let file = fs::File::create(path)
                    .with_context(|| format!("creating {}", path.display()))?;
                let mut w = BufWriter::new(file);
                simulate_traced(&cfg, &d, &sim, &mut w)?;
                w.flush()?;
            }
            emit_json(cli, &serde_json::to_value(&report)?)?;
            Ok(0)
        }
        Command::Sweep => {
            let table = run_experiment(&spec)?;
            write_csv(&table, output(cli)?)?;
            Ok(0)
        }
        Command::Compare => {
            let spec = ExperimentSpec {
                kind: ExperimentKind::PolicyCompare,
                sweep_values: Vec::new(),
                ..spec
            };
            let table = run_experiment(&spec)?;
            write_csv(&table, output(cli)?)?;
            Ok(0)
        }
    }
}
