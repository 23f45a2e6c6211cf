//! Per-instance run reports and the line-delimited benchmark stream.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::write_instance;
use crate::graph::{TerminalSet, WeightedGraph};
use crate::invariant::InvariantCheck;
use crate::norms::NormSpec;
use crate::oracle::{brute_force_multiway, OracleBudget};
use crate::partitioning::{solve, PipelineConfig, TrialRecord, Variant};

/// SHA-256 of the canonical instance text, hex encoded.
pub fn instance_digest(graph: &WeightedGraph, terminals: &TerminalSet) -> String {
    hex::encode(Sha256::digest(write_instance(graph, terminals).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub backend: String,
    pub norm: String,
    pub trials: usize,
    pub variant: Variant,
    pub eps: f64,
    pub alpha_mult: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub solve_ms: Option<f64>,
    pub oracle_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Infeasible,
    Rejected,
    Invariant,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub id: usize,
    pub instance: String,
    pub digest: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub config: ConfigEcho,
    pub status: Status,
    pub objective: Option<f64>,
    pub cut_vector: Option<Vec<f64>>,
    pub assignment: Option<Vec<usize>>,
    pub trials: Vec<TrialRecord>,
    pub oracle_objective: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
    pub checks: Vec<InvariantCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pipeline only.
    Solve,
    /// Pipeline plus the brute-force oracle.
    Compare,
    /// Oracle in place of the pipeline; ratios are 1 by construction.
    OracleOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub mode: Mode,
    pub budget: OracleBudget,
    pub timings: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { mode: Mode::Solve, budget: OracleBudget::default(), timings: false }
    }
}

pub fn status_of(err: &Error) -> Status {
    match err {
        Error::Infeasible(_) | Error::GuessTooLow { .. } => Status::Infeasible,
        Error::AllTrialsRejected { .. } => Status::Rejected,
        Error::Invariant(_) => Status::Invariant,
        _ => Status::Error,
    }
}

fn ratio(objective: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        objective / oracle
    } else if objective <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn base_report(
    id: usize,
    name: &str,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    norm: String,
    cfg: &PipelineConfig,
    timings: bool,
) -> RunReport {
    RunReport {
        id,
        instance: name.to_string(),
        digest: instance_digest(graph, terminals),
        n: graph.n(),
        m: graph.edges().len(),
        k: terminals.k(),
        config: ConfigEcho {
            seed: cfg.seed,
            backend: cfg.utc.resolve(graph.n()).to_string(),
            norm,
            trials: cfg.trials,
            variant: cfg.variant,
            eps: cfg.eps_weights,
            alpha_mult: cfg.alpha_mult,
        },
        status: Status::Ok,
        objective: None,
        cut_vector: None,
        assignment: None,
        trials: Vec::new(),
        oracle_objective: None,
        ratio: None,
        timings: timings.then_some(Timings { solve_ms: None, oracle_ms: None }),
        checks: Vec::new(),
        error: None,
    }
}

/// Solves one instance and records everything into a report. Failures are
/// recorded in the report rather than returned.
pub fn run_instance(
    id: usize,
    name: &str,
    graph: &WeightedGraph,
    terminals: &TerminalSet,
    spec: &NormSpec,
    cfg: &PipelineConfig,
    opts: &RunOptions,
) -> RunReport {
    let mut report = base_report(id, name, graph, terminals, spec.tag(), cfg, opts.timings);
    let fail = |report: &mut RunReport, err: Error| {
        report.status = status_of(&err);
        report.error = Some(err.to_string());
    };

    if opts.mode != Mode::OracleOnly {
        let start = Instant::now();
        let result = solve(graph, terminals, spec, cfg);
        if let Some(t) = report.timings.as_mut() {
            t.solve_ms = Some(elapsed_ms(start));
        }
        match result {
            Ok(out) => {
                report.objective = Some(out.objective);
                report.assignment = Some(out.partition.assignment(graph.n()).into_iter().map(|a| a.map_or(0, |i| i + 1)).collect());
                report.cut_vector = Some(out.cut_vector.0);
                report.trials = out.trials;
                report.checks = out.checks;
            }
            Err(e) => {
                fail(&mut report, e);
                return report;
            }
        }
    }

    if opts.mode != Mode::Solve {
        let start = Instant::now();
        let result = brute_force_multiway(graph, terminals, spec, opts.budget);
        if let Some(t) = report.timings.as_mut() {
            t.oracle_ms = Some(elapsed_ms(start));
        }
        match result {
            Ok((part, value)) => {
                report.oracle_objective = Some(value);
                if opts.mode == Mode::OracleOnly {
                    report.objective = Some(value);
                    report.cut_vector = Some(part.cut_vector(graph).0);
                    report.assignment =
                        Some(part.assignment(graph.n()).into_iter().map(|a| a.map_or(0, |i| i + 1)).collect());
                }
                report.ratio = report.objective.map(|obj| ratio(obj, value));
            }
            Err(e) => fail(&mut report, e),
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub instances: usize,
    pub solved: usize,
    pub failed: usize,
    pub median_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    /// Rejected trials over all trials.
    pub rejection_rate: f64,
    /// Mean of `1/4 + 1/k` over the instances.
    pub nominal_rejection_bound: f64,
    pub invariant_failures: usize,
}

impl Summary {
    pub fn from_reports(reports: &[RunReport]) -> Summary {
        let mut ratios: Vec<f64> = reports.iter().filter_map(|r| r.ratio).collect();
        ratios.sort_by(f64::total_cmp);
        let median = (!ratios.is_empty()).then(|| {
            let mid = ratios.len() / 2;
            if ratios.len() % 2 == 1 {
                ratios[mid]
            } else {
                (ratios[mid - 1] + ratios[mid]) / 2.0
            }
        });
        let trials: usize = reports.iter().map(|r| r.trials.len()).sum();
        let rejected = reports.iter().flat_map(|r| &r.trials).filter(|t| !t.accepted).count();
        let invariant_failures = reports
            .iter()
            .filter(|r| r.status == Status::Invariant || r.checks.iter().any(|c| !c.passed))
            .count();
        let bound = reports.iter().map(|r| 0.25 + 1.0 / r.k as f64).sum::<f64>() / reports.len().max(1) as f64;
        Summary {
            instances: reports.len(),
            solved: reports.iter().filter(|r| r.status == Status::Ok).count(),
            failed: reports.iter().filter(|r| r.status != Status::Ok).count(),
            median_ratio: median,
            max_ratio: ratios.last().copied(),
            min_ratio: ratios.first().copied(),
            rejection_rate: rejected as f64 / trials.max(1) as f64,
            nominal_rejection_bound: bound,
            invariant_failures,
        }
    }
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    summary: &'a Summary,
}

pub struct BenchInstance {
    pub name: String,
    pub graph: WeightedGraph,
    pub terminals: TerminalSet,
}

/// Writes one JSON line per instance, then a `{"summary": ...}` line.
pub fn run_benchmark<W: Write>(
    instances: impl IntoIterator<Item = BenchInstance>,
    spec_for: &dyn Fn(usize) -> Result<NormSpec>,
    cfg: &PipelineConfig,
    opts: &RunOptions,
    out: &mut W,
) -> Result<Summary> {
    let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
    let mut reports = Vec::new();
    for (id, inst) in instances.into_iter().enumerate() {
        let report = match spec_for(inst.terminals.k()) {
            Ok(spec) => run_instance(id, &inst.name, &inst.graph, &inst.terminals, &spec, cfg, opts),
            Err(e) => {
                let mut r = base_report(id, &inst.name, &inst.graph, &inst.terminals, String::new(), cfg, false);
                r.status = status_of(&e);
                r.error = Some(e.to_string());
                r
            }
        };
        serde_json::to_writer(&mut *out, &report).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        writeln!(out).map_err(io)?;
        reports.push(report);
    }
    let summary = Summary::from_reports(&reports);
    serde_json::to_writer(&mut *out, &SummaryRecord { summary: &summary }).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    writeln!(out).map_err(io)?;
    Ok(summary)
}
