use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use mrnav_core::scenario::ScenarioConfig;
use mrnav_core::tracking::{validate_teb, DisturbancePolicy};
use mrnav_sim::cli_support::{
    metrics_json, to_json_line, PlanBenchReport, ValidateTebReport, ValidateTebRequest,
};
use mrnav_sim::oracle_check::eq2_eq3_max_discrepancy;
use mrnav_sim::runner::{run_scenario, RunError};
use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_INCOMPLETE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "mrnav",
    about = "Multi-robot navigation among pedestrians: plan, simulate, and audit probabilistically safe trajectories",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario, writing trace.jsonl and metrics.json.
    Run {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's sim.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's p_th.
        #[arg(long)]
        pth: Option<f64>,
        /// Override the scenario's replan period, seconds.
        #[arg(long = "replan-period")]
        replan_period: Option<f64>,
    },
    /// Empirically check a tracking error bound under both disturbance
    /// policies and report max errors.
    #[command(name = "validate-teb")]
    ValidateTeb {
        /// JSON file: {tracker?, teb, v_ref, steps?, seed?}.
        #[arg(long)]
        params: PathBuf,
    },
    /// Brute-force cross-checks.
    Oracle {
        #[command(subcommand)]
        check: OracleCheck,
    },
    /// Run a scenario and report planning/prediction time statistics.
    #[command(name = "plan-bench")]
    PlanBench {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCheck {
    /// Compare the exact joint collision probability against the marginal
    /// approximation on independent humans; they must agree to 1e-12.
    #[command(name = "eq2-eq3")]
    Eq2Eq3 {
        /// Grid side length in cells.
        #[arg(long)]
        grid: usize,
        /// Number of humans.
        #[arg(long)]
        humans: usize,
        /// Seeded random instances.
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn cmd_run(
    scenario: PathBuf,
    seed: Option<u64>,
    out: PathBuf,
    pth: Option<f64>,
    replan_period: Option<f64>,
) -> u8 {
    let mut config = match ScenarioConfig::from_file(&scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    if let Some(s) = seed {
        config.sim.seed = s;
    }
    if let Some(p) = pth {
        config.p_th = p;
    }
    if let Some(r) = replan_period {
        config.sim.replan_period_s = r;
    }

    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_VALIDATION;
    }
    let trace_path = out.join("trace.jsonl");
    let trace_file = match fs::File::create(&trace_path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", trace_path.display());
            return EXIT_VALIDATION;
        }
    };

    match run_scenario(&config, Some(Box::new(BufWriter::new(trace_file)))) {
        Ok(metrics) => {
            let metrics_path = out.join("metrics.json");
            if let Err(e) = fs::write(&metrics_path, metrics_json(&metrics) + "\n") {
                eprintln!("error: cannot write {}: {e}", metrics_path.display());
                return EXIT_VALIDATION;
            }
            println!("{}", metrics_json(&metrics));
            if metrics.completed {
                EXIT_OK
            } else {
                eprintln!("run incomplete: not all robots arrived within the time limit");
                EXIT_INCOMPLETE
            }
        }
        Err(e @ RunError::Validation(_)) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn cmd_validate_teb(params: PathBuf) -> u8 {
    let text = match fs::read_to_string(&params) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", params.display());
            return EXIT_VALIDATION;
        }
    };
    let req: ValidateTebRequest = match serde_json::from_str(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", params.display());
            return EXIT_VALIDATION;
        }
    };
    if !req.tracker.validate() {
        eprintln!(
            "error: tracker parameters invalid: need a_max > d_max >= 0, dt_sim > 0, k_p > 0"
        );
        return EXIT_VALIDATION;
    }
    let greedy = validate_teb(
        &req.tracker,
        &req.teb,
        req.v_ref,
        req.steps,
        DisturbancePolicy::WorstCaseGreedy,
        req.seed,
    );
    let random = validate_teb(
        &req.tracker,
        &req.teb,
        req.v_ref,
        req.steps,
        DisturbancePolicy::UniformRandom,
        req.seed,
    );
    let report = ValidateTebReport {
        teb: req.teb,
        contained: greedy.contained && random.contained,
        greedy,
        random,
    };
    println!("{}", to_json_line(&report));
    // A bound that fails containment is a finding, not an error.
    EXIT_OK
}

fn cmd_oracle_eq2_eq3(grid: usize, humans: usize, instances: usize, seed: u64) -> u8 {
    if grid == 0 || humans == 0 {
        eprintln!("error: grid and humans must be at least 1");
        return EXIT_VALIDATION;
    }
    if humans > 3 || grid > 8 {
        eprintln!("error: the joint enumeration is test-scale only (grid <= 8, humans <= 3)");
        return EXIT_VALIDATION;
    }
    let worst = eq2_eq3_max_discrepancy(grid, humans, instances, seed);
    println!("max absolute discrepancy: {worst:e}");
    if worst <= 1e-12 {
        EXIT_OK
    } else {
        eprintln!("joint and marginal collision probabilities disagree beyond 1e-12");
        EXIT_INCOMPLETE
    }
}

fn cmd_plan_bench(scenario: PathBuf) -> u8 {
    let config = match ScenarioConfig::from_file(&scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match run_scenario(&config, None) {
        Ok(m) => {
            let report = PlanBenchReport {
                completed: m.completed,
                rounds: m.rounds,
                plan_time_stats: m.plan_time_stats,
                prediction_time_stats: m.prediction_time_stats,
            };
            println!("{}", to_json_line(&report));
            if m.completed {
                EXIT_OK
            } else {
                EXIT_INCOMPLETE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version are not errors; anything else (unknown flags,
            // missing values) prints usage and exits 1.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let code = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            pth,
            replan_period,
        } => cmd_run(scenario, seed, out, pth, replan_period),
        Command::ValidateTeb { params } => cmd_validate_teb(params),
        Command::Oracle { check } => match check {
            OracleCheck::Eq2Eq3 {
                grid,
                humans,
                instances,
                seed,
            } => cmd_oracle_eq2_eq3(grid, humans, instances, seed),
        },
        Command::PlanBench { scenario } => cmd_plan_bench(scenario),
    };
    ExitCode::from(code)
}
