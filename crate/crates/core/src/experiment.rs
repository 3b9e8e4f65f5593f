//! Closed-loop runs, their on-disk artifacts, and mode comparisons.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, PolicyEvent};
use crate::error::{ExperimentError, SolverError};
use crate::report::{compute_report, E2eSample, RunReport};
use crate::scenario::{PolicyMode, Scenario};
use crate::sim::{EpochRecord, World};

/// In-memory result of one closed-loop run.
pub struct Trace {
    pub records: Vec<EpochRecord>,
    pub events: Vec<PolicyEvent>,
    pub spr_solves: usize,
    pub qos_solves: usize,
}

/// Runs controller and world in lockstep for `horizon_s` seconds.
///
/// Control steps happen at every whole second from 0 through the horizon
/// (inclusive); the world advances one measurement period between them.
pub fn simulate(
    scenario: &Scenario,
    mode: PolicyMode,
    seed: u64,
    horizon_s: u64,
) -> Result<Trace, SolverError> {
    let mut world = World::new(scenario, seed);
    let mut controller = Controller::new(scenario, mode);
    let period = scenario.sim.measurement_period_s;
    let epochs = (horizon_s as f64 / period).round() as u64;
    let mut records: Vec<EpochRecord> = Vec::with_capacity(epochs as usize);
    for epoch in 0..=epochs {
        if let Some(last) = records.last() {
            controller.observe(last);
        }
        let t = (epoch as f64 * period).round() as u64;
        controller.control_step(t)?;
        if epoch < epochs {
            records.push(world.run_epoch(&controller.spr_policy, &controller.qos_policy));
        }
    }
    Ok(Trace {
        records,
        events: controller.events,
        spr_solves: controller.spr_solves,
        qos_solves: controller.qos_solves,
    })
}

/// One row of metrics.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: u64,
    pub link: String,
    pub class: String,
    pub throughput: f64,
    pub delay: f64,
    pub loss: f64,
    pub utilization: f64,
}

pub fn metrics_rows(records: &[EpochRecord]) -> Vec<MetricsRow> {
    records
        .iter()
        .flat_map(|r| {
            r.links.iter().flat_map(move |l| {
                l.classes.iter().map(move |c| MetricsRow {
                    epoch: r.epoch,
                    link: l.link.to_string(),
                    class: c.group.to_string(),
                    throughput: c.throughput_mbps,
                    delay: c.delay_ms,
                    loss: c.loss_fraction,
                    utilization: l.utilization,
                })
            })
        })
        .collect()
}

pub struct RunArtifacts {
    pub report: RunReport,
    pub trace: Trace,
    pub samples: Vec<E2eSample>,
}

/// Simulates and summarizes without touching the filesystem.
pub fn evaluate(
    scenario: &Scenario,
    mode: PolicyMode,
    seed: u64,
    horizon_s: u64,
) -> Result<RunArtifacts, ExperimentError> {
    let trace = simulate(scenario, mode, seed, horizon_s)?;
    let body = compute_report(&trace.records, scenario)?;
    let report = RunReport {
        scenario: scenario.name.clone(),
        mode,
        seed,
        horizon_s,
        groups: body.groups,
        mlu: body.mlu,
        offered_mbit: body.offered_mbit,
        delivered_mbit: body.delivered_mbit,
        spr_solves: trace.spr_solves,
        qos_solves: trace.qos_solves,
    };
    Ok(RunArtifacts { report, trace, samples: body.samples })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), ExperimentError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes report.json, metrics.csv, e2e.csv and policy_log.jsonl into `out_dir`.
pub fn write_artifacts(run: &RunArtifacts, out_dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&run.report)?;
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;

    write_csv(&out_dir.join("metrics.csv"), &metrics_rows(&run.trace.records))?;
    write_csv(&out_dir.join("e2e.csv"), &run.samples)?;

    let path = out_dir.join("policy_log.jsonl");
    let file = File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    for e in &run.trace.events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(())
}

pub fn run_experiment(
    scenario: &Scenario,
    mode: PolicyMode,
    seed: u64,
    horizon_s: u64,
    out_dir: &Path,
) -> Result<RunReport, ExperimentError> {
    let run = evaluate(scenario, mode, seed, horizon_s)?;
    write_artifacts(&run, out_dir)?;
    Ok(run.report)
}

/// Seed-averaged figures for one group under one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub sla_satisfaction_pct: f64,
    pub avg_delay_ms: f64,
    pub p95_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub group: String,
    /// Aligned with `Comparison::modes`; `None` when every run of that mode failed.
    pub cells: Vec<Option<Cell>>,
}

#[derive(Debug)]
pub struct Comparison {
    pub modes: Vec<PolicyMode>,
    pub seeds: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<RunReport>,
    pub failures: Vec<(PolicyMode, u64, ExperimentError)>,
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String, ExperimentError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["group".to_string()];
        for m in &self.modes {
            for field in ["satisfaction_pct", "avg_delay_ms", "p95_delay_ms"] {
                header.push(format!("{}_{field}", m.as_str()));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.group.clone()];
            for cell in &row.cells {
                match cell {
                    Some(c) => {
                        for v in [c.sla_satisfaction_pct, c.avg_delay_ms, c.p95_delay_ms] {
                            rec.push(v.to_string());
                        }
                    }
                    None => rec.extend(std::iter::repeat_n("failed".to_string(), 3)),
                }
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error()).map_err(|source| {
            ExperimentError::Io { path: PathBuf::from("comparison.csv"), source }
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs every (mode, seed) pair as an independent world, each writing into
/// `out_dir/<mode>-seed<seed>`, then tabulates seed averages per group and mode
/// and writes `out_dir/comparison.csv`.
pub fn compare_modes(
    scenario: &Scenario,
    modes: &[PolicyMode],
    seeds: &[u64],
    horizon_s: u64,
    out_dir: &Path,
) -> Result<Comparison, ExperimentError> {
    let pairs: Vec<(PolicyMode, u64)> =
        modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let results: Vec<Result<RunReport, ExperimentError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = pairs
            .iter()
            .map(|&(mode, seed)| {
                let dir = out_dir.join(format!("{}-seed{seed}", mode.as_str()));
                scope.spawn(move || run_experiment(scenario, mode, seed, horizon_s, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for ((mode, seed), r) in pairs.into_iter().zip(results) {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push((mode, seed, e)),
        }
    }
    let rows = scenario
        .flow_groups
        .iter()
        .map(|g| ComparisonRow {
            group: g.id.to_string(),
            cells: modes
                .iter()
                .map(|&m| {
                    let runs: Vec<_> = reports
                        .iter()
                        .filter(|r| r.mode == m)
                        .filter_map(|r| r.groups.iter().find(|x| x.group == g.id))
                        .collect();
                    if runs.is_empty() {
                        return None;
                    }
                    let n = runs.len() as f64;
                    let mean = |f: fn(&crate::report::GroupReport) -> f64| {
                        runs.iter().map(|r| f(r)).sum::<f64>() / n
                    };
                    Some(Cell {
                        sla_satisfaction_pct: mean(|r| r.sla_satisfaction_pct),
                        avg_delay_ms: mean(|r| r.avg_delay_ms),
                        p95_delay_ms: mean(|r| r.p95_delay_ms),
                    })
                })
                .collect(),
        })
        .collect();
    let comparison =
        Comparison { modes: modes.to_vec(), seeds: seeds.to_vec(), rows, reports, failures };
    let path = out_dir.join("comparison.csv");
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    fs::write(&path, comparison.to_csv()?).map_err(io_err(&path))?;
    Ok(comparison)
}
