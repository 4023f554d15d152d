use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use mfnav::harness::{
    bench_latency, emit_report, run_ablation, run_trial, write_timing_csv, AblationMode, AblationResults,
    PlannerKind, TrialResult, TrialStatus,
};
use mfnav::{load_scenario, Scenario};

/// Closed-loop trials, ablations and latency benchmarks for the multi-frame
/// point-constrained planner.
#[derive(Parser)]
#[command(name = "mfnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop trial.
    Run {
        /// Scenario file, or the name of a shipped scenario.
        scenario: String,
        #[arg(long, default_value = "gmm:multi_frame")]
        mode: AblationMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
        /// Also write per-cycle stage timings to `timing_<id>.csv`.
        #[arg(long, conflicts_with = "no_timing")]
        timing: bool,
    },
    /// Full factorial of scenarios x modes x seeds.
    Ablate {
        #[arg(required = true)]
        scenarios: Vec<String>,
        /// Comma-separated, e.g. `no_prediction,constant_velocity,gmm`.
        #[arg(long, value_delimiter = ',', default_value = "no_prediction,constant_velocity,gmm")]
        modes: Vec<AblationMode>,
        /// Comma-separated seeds or an inclusive range such as `0-4`.
        #[arg(long, default_value = "0-4", value_parser = parse_seeds)]
        seeds: SeedList,
        #[command(flatten)]
        common: Common,
    },
    /// Per-stage planning latency over closed-loop cycles.
    Bench {
        scenario: String,
        #[arg(long, default_value_t = 500)]
        cycles: usize,
        #[arg(long, default_value = "gmm:multi_frame")]
        mode: AblationMode,
        #[arg(long, default_value = "mfneupan")]
        planner: PlannerKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "mfneupan")]
    planner: PlannerKind,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Null every wall-clock field so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (
                    a.parse().map_err(|e| format!("`{part}`: {e}"))?,
                    b.parse().map_err(|e| format!("`{part}`: {e}"))?,
                );
                if a > b {
                    return Err(format!("empty seed range `{part}`"));
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|e| format!("`{part}`: {e}"))?),
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(SeedList(seeds))
}

fn scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if !path.exists() && Scenario::CANONICAL.contains(&arg) {
        return Ok(Scenario::canonical(arg)?);
    }
    load_scenario(path).with_context(|| format!("loading scenario `{arg}`"))
}

fn report(results: &AblationResults, common: &Common) -> Result<()> {
    let written = emit_report(results, &common.out, !common.no_timing)?;
    for row in &results.summary {
        println!(
            "{:<14} {:<28} {:<9} {}/{} reached, {} collided, mean path {}",
            row.scenario,
            row.mode,
            row.planner,
            row.successes,
            row.trials,
            row.collisions,
            row.mean_path_length_m.map_or("-".into(), |m| format!("{m:.3} m")),
        );
    }
    println!("wrote {} files to {}", written.len(), common.out.display());
    Ok(())
}

fn solver_errors(trials: &[TrialResult]) -> usize {
    trials.iter().filter(|t| t.status == TrialStatus::SolverError).count()
}

fn run(cli: Cli) -> Result<ExitCode> {
    let trials = match cli.command {
        Command::Run {
            scenario: name,
            mode,
            seed,
            common,
            timing,
        } => {
            let sc = scenario(&name)?;
            let trial = run_trial(&sc, mode, seed, common.planner);
            if let Some(e) = &trial.error {
                eprintln!("trial {}: {e}", trial.id());
            }
            let results = AblationResults::from_trials(vec![trial]);
            report(&results, &common)?;
            if timing {
                let t = &results.trials[0];
                write_timing_csv(&t.cycle_timings, &common.out.join(format!("timing_{}.csv", t.id())))?;
            }
            results.trials
        }
        Command::Ablate {
            scenarios,
            modes,
            seeds,
            common,
        } => {
            let scs = scenarios.iter().map(|s| scenario(s)).collect::<Result<Vec<_>>>()?;
            let results = run_ablation(&scs, &modes, &seeds.0, common.planner)?;
            for t in results.trials.iter().filter(|t| t.error.is_some()) {
                eprintln!("trial {}: {}", t.id(), t.error.as_deref().unwrap_or_default());
            }
            report(&results, &common)?;
            results.trials
        }
        Command::Bench {
            scenario: name,
            cycles,
            mode,
            planner,
            seed,
        } => {
            let sc = scenario(&name)?;
            let summary = bench_latency(&sc, mode, planner, cycles, seed)?;
            println!("{} cycles on {} ({mode}, {planner})", summary.cycles, sc.name);
            println!("{:<12} {:>10} {:>10} {:>10}", "stage", "mean ms", "p50 ms", "p95 ms");
            for s in &summary.stages {
                println!("{:<12} {:>10.3} {:>10.3} {:>10.3}", s.stage, s.mean_ms, s.p50_ms, s.p95_ms);
            }
            return Ok(ExitCode::SUCCESS);
        }
    };
    let failed = solver_errors(&trials);
    if failed > 0 {
        eprintln!("{failed} trial(s) ended in a solver error");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
