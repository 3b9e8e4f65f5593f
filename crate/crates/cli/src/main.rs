mod instance;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::Serialize;

use sdwan_core::experiment::{compare_modes, run_experiment};
use sdwan_core::qos::{policy_from_allocation, solve_qos_link, QosInstance};
use sdwan_core::report::RunReport;
use sdwan_core::scenario::{load_scenario, PolicyMode, Scenario};
use sdwan_core::spr::{extract_policy, local_search_spr, solve_spr, SprStatus};
use sdwan_core::{ExperimentError, ScenarioError, SprError};

use instance::{QosInstanceFile, SprInstanceFile, SprMethod};

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

/// Desk-scale SD-WAN lab: simulate routing/QoS policy modes and solve the
/// underlying optimization problems offline.
#[derive(Parser)]
#[command(name = "sdwan-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment and write its artifacts.
    Run {
        /// Scenario file, or `builtin:NAME`.
        #[arg(long)]
        scenario: String,
        /// Policy mode; defaults to the scenario's.
        #[arg(long, value_parser = PolicyMode::from_str)]
        mode: Option<PolicyMode>,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated seconds; defaults to the scenario's horizon.
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every mode/seed pair and tabulate seed-averaged results.
    Compare {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_delimiter = ',', value_parser = PolicyMode::from_str,
              default_value = "all-tns,mlu,mlu-qos")]
        modes: Vec<PolicyMode>,
        #[arg(long, value_delimiter = ',', default_value = "42")]
        seeds: Vec<u64>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a standalone routing instance and print the solution as JSON.
    SprSolve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Solve a single-link QoS instance and print the allocation as JSON.
    QosSolve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Parse and validate a scenario.
    Validate {
        #[arg(long)]
        scenario: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Display) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match e {
            ScenarioError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Self::new(code, e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Scenario(e) => e.into(),
            ExperimentError::Solver(_) | ExperimentError::EmptyStream => Self::new(EXIT_SOLVER, e),
            ExperimentError::Io { .. } | ExperimentError::Csv(_) | ExperimentError::Json(_) => {
                Self::new(EXIT_IO, e)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { scenario, mode, seed, horizon, out } => {
            let sc = load_scenario(&scenario)?;
            let mode = mode.unwrap_or(sc.control.policy_mode);
            let seed = seed.unwrap_or(sc.sim.seed);
            let horizon = horizon.unwrap_or(sc.sim.horizon_s);
            check_horizon(&sc, horizon)?;
            let report = run_experiment(&sc, mode, seed, horizon, &out)?;
            print_report(&report);
            println!("artifacts written to {}", out.display());
            Ok(())
        }
        Command::Compare { scenario, modes, seeds, horizon, out } => {
            let sc = load_scenario(&scenario)?;
            let horizon = horizon.unwrap_or(sc.sim.horizon_s);
            check_horizon(&sc, horizon)?;
            let cmp = compare_modes(&sc, &modes, &seeds, horizon, &out)?;
            print!("{}", cmp.to_csv()?);
            for (mode, seed, e) in &cmp.failures {
                eprintln!("run {} seed {seed} failed: {e}", mode.as_str());
            }
            match cmp.failures.first() {
                None => Ok(()),
                Some(_) => Err(Failure::new(EXIT_SOLVER, format!("{} run(s) failed", cmp.failures.len()))),
            }
        }
        Command::SprSolve { instance } => spr_solve(&instance),
        Command::QosSolve { instance } => qos_solve(&instance),
        Command::Validate { scenario } => {
            let sc = load_scenario(&scenario)?;
            println!(
                "ok: {} ({} nodes, {} links, {} flow groups, {} demands)",
                sc.name,
                sc.topology.nodes.len(),
                sc.topology.links.len(),
                sc.flow_groups.len(),
                sc.traffic.len()
            );
            Ok(())
        }
    }
}

fn check_horizon(sc: &Scenario, horizon: u64) -> Result<(), Failure> {
    if horizon == 0 {
        return Err(Failure::new(EXIT_VALIDATION, "horizon must be positive"));
    }
    let period = sc.sim.measurement_period_s;
    if ((horizon as f64 / period).round() * period - horizon as f64).abs() > 1e-9 {
        return Err(Failure::new(
            EXIT_VALIDATION,
            format!("horizon {horizon} s is not a multiple of the {period} s measurement period"),
        ));
    }
    Ok(())
}

fn print_report(r: &RunReport) {
    println!("{} / {} / seed {} / {} s", r.scenario, r.mode.as_str(), r.seed, r.horizon_s);
    println!("{:<14} {:>8} {:>10} {:>10}", "group", "sla %", "avg ms", "p95 ms");
    for g in &r.groups {
        println!(
            "{:<14} {:>8.1} {:>10.2} {:>10.2}",
            g.group.as_str(),
            g.sla_satisfaction_pct,
            g.avg_delay_ms,
            g.p95_delay_ms
        );
    }
    let peak = r.mlu.iter().copied().fold(0.0, f64::max);
    println!("peak MLU {peak:.3}; delivered {:.1} of {:.1} Mbit", r.delivered_mbit, r.offered_mbit);
}

fn read_instance<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_IO, e))?;
    writeln!(std::io::stdout().lock(), "{text}").map_err(|e| Failure::new(EXIT_IO, e))
}

fn spr_solve(path: &Path) -> Result<(), Failure> {
    let file: SprInstanceFile = read_instance(path)?;
    let dangling = file.dangling_links();
    if !dangling.is_empty() {
        return Err(Failure::new(EXIT_VALIDATION, dangling.join("; ")));
    }
    let instance = file.instance();
    let solved = match file.method {
        SprMethod::Lp => solve_spr(&instance, &file.delay_model),
        SprMethod::LocalSearch => local_search_spr(&instance, &file.delay_model, file.seed, 1000),
    };
    let solution = solved.map_err(|e: SprError| Failure::new(EXIT_SOLVER, e))?;
    #[derive(Serialize)]
    struct Out<'a> {
        solution: &'a sdwan_core::spr::SprSolution,
        policy: Option<sdwan_core::model::SprPolicy>,
    }
    let infeasible = solution.status == SprStatus::Infeasible;
    let policy = (!infeasible).then(|| extract_policy(&solution));
    print_json(&Out { solution: &solution, policy })?;
    if infeasible {
        return Err(Failure::new(EXIT_SOLVER, "routing instance is infeasible"));
    }
    Ok(())
}

fn qos_solve(path: &Path) -> Result<(), Failure> {
    let file: QosInstanceFile = read_instance(path)?;
    let tiers: BTreeMap<_, _> = file.classes.iter().map(|c| (c.group.clone(), c.tier)).collect();
    let instance = QosInstance::new(file.link, file.classes, &file.params);
    let solution =
        solve_qos_link(&instance, &file.delay_model).map_err(|e| Failure::new(EXIT_SOLVER, e))?;
    #[derive(Serialize)]
    struct Out<'a> {
        solution: &'a sdwan_core::qos::QosSolution,
        policy: sdwan_core::model::LinkQos,
    }
    print_json(&Out { solution: &solution, policy: policy_from_allocation(&solution, &tiers) })
}
