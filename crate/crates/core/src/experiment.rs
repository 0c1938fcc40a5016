//! Config-driven runs and their CSV/JSON artifacts.
//!
//! A config is a JSON document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "problem": { "name": "resource", "params": { "horizon": 10, "steps": 50 } },
//!   "marginal": { "dist": { "kind": "exponential", "rate": 1 }, "method": "sample", "n": 50 },
//!   "method": "sfw",
//!   "solver": { "iterations": 100, "samples": 5, "seed": 1 },
//!   "repeats": 1
//! }
//! ```
//!
//! Every artifact is a function of the config and the seed; wall-clock time is
//! only written when `solver.record_timing` is set.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, Space};
use crate::models::congestion::CongestionParams;
use crate::models::resource::ResourceParams;
use crate::models::{CongestionInstance, FiniteChoiceProblem, ResourceInstance, TrafficNetwork};
use crate::problem::{self, MfoProblem};
use crate::quantize::{self, QuantizeMethod, SourceDistribution};
use crate::solvers::{self, SolveReport, SolverConfig};
use crate::transport::{self, MetricSpec};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    /// `pigou`, `grid`, or `csv` (with `edges` and `ods` files).
    pub network: String,
    #[serde(default)]
    pub edges: Option<PathBuf>,
    #[serde(default)]
    pub ods: Option<PathBuf>,
    #[serde(default)]
    pub max_hops: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum ProblemSpec {
    Resource(ResourceParams),
    Congestion(CongestionParams),
    Traffic(TrafficSpec),
    /// The two-agent finite-choice example.
    Finite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalSpec {
    pub dist: SourceDistribution,
    pub method: QuantizeMethod,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fw,
    Sfw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub problem: ProblemSpec,
    /// Required for resource and congestion; traffic and finite carry their own marginal.
    #[serde(default)]
    pub marginal: Option<MarginalSpec>,
    pub method: Method,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: Option<PathBuf>,
    #[serde(default = "one")]
    pub repeats: usize,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| Err(Error::Config { field: field.into(), reason: reason.into() });
        if self.version != CONFIG_VERSION {
            return bad("version", &format!("unsupported version {}, expected {CONFIG_VERSION}", self.version));
        }
        if self.repeats == 0 {
            return bad("repeats", "must be at least 1");
        }
        self.solver.validate()?;
        match (&self.problem, &self.marginal) {
            (ProblemSpec::Resource(_) | ProblemSpec::Congestion(_), None) => bad("marginal", "required for this problem"),
            (_, Some(m)) if m.n == 0 => bad("marginal.n", "N must be at least 1"),
            (_, Some(m)) => m.dist.validate().map_err(|e| Error::Config { field: "marginal.dist".into(), reason: e.to_string() }),
            _ => Ok(()),
        }
    }
}

/// A built problem instance.
pub enum Instance {
    Resource(ResourceInstance),
    Congestion(CongestionInstance),
    Traffic(TrafficNetwork, EmpiricalMeasure),
    Finite(FiniteChoiceProblem),
}

impl Instance {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec {
            ProblemSpec::Resource(p) => Instance::Resource(ResourceInstance::new(p.clone())?),
            ProblemSpec::Congestion(p) => Instance::Congestion(CongestionInstance::new(p.clone())?),
            ProblemSpec::Finite => Instance::Finite(FiniteChoiceProblem::two_agent_example()),
            ProblemSpec::Traffic(t) => {
                let net = match t.network.as_str() {
                    "pigou" => TrafficNetwork::pigou(),
                    "grid" => TrafficNetwork::grid(),
                    "csv" => {
                        let missing = || Error::Config { field: "problem.params".into(), reason: "csv network needs `edges` and `ods`".into() };
                        let edges = File::open(t.edges.as_ref().ok_or_else(missing)?)?;
                        let ods = File::open(t.ods.as_ref().ok_or_else(missing)?)?;
                        let (net, demand) = TrafficNetwork::from_csv(edges, ods, t.max_hops)?;
                        return Ok(Instance::Traffic(net, demand));
                    }
                    other => {
                        return Err(Error::Config { field: "problem.params.network".into(), reason: format!("unknown network `{other}`") })
                    }
                };
                let demand = net.uniform_demand();
                Instance::Traffic(net, demand)
            }
        })
    }

    /// Default instance for a bare problem name.
    pub fn named(name: &str) -> Result<Self> {
        let spec = match name {
            "resource" => ProblemSpec::Resource(ResourceParams::default()),
            "congestion" => ProblemSpec::Congestion(CongestionParams::default()),
            "pigou" | "traffic" => ProblemSpec::Traffic(TrafficSpec { network: "pigou".into(), edges: None, ods: None, max_hops: None }),
            "grid" => ProblemSpec::Traffic(TrafficSpec { network: "grid".into(), edges: None, ods: None, max_hops: None }),
            "finite" => ProblemSpec::Finite,
            other => return Err(Error::invalid(format!("unknown problem `{other}`"))),
        };
        Self::build(&spec)
    }

    pub fn problem(&self) -> &dyn MfoProblem {
        match self {
            Instance::Resource(p) => p,
            Instance::Congestion(p) => p,
            Instance::Traffic(p, _) => p,
            Instance::Finite(p) => p,
        }
    }

    /// Marginal for a run: quantized from the config, or the instance's own.
    pub fn marginal(&self, spec: Option<&MarginalSpec>, seed: u64) -> Result<EmpiricalMeasure> {
        match (self, spec) {
            (_, Some(m)) => quantize::quantize(&m.dist, m.n, m.method, seed),
            (Instance::Traffic(_, demand), None) => Ok(demand.clone()),
            (Instance::Finite(p), None) => Ok(p.marginal()),
            _ => Err(Error::Config { field: "marginal".into(), reason: "required for this problem".into() }),
        }
    }

    /// Extra plot-ready CSV files for the final measure.
    pub fn write_dumps(&self, mu: &EmpiricalMeasure, dir: &Path) -> Result<()> {
        match self {
            Instance::Resource(p) => write_resource_dumps(p, mu, dir),
            Instance::Congestion(p) => write_congestion_dumps(p, mu, dir),
            Instance::Traffic(net, _) => write_traffic_dumps(net, mu, dir),
            Instance::Finite(_) => Ok(()),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_path(path)?)
}

/// `Q_t = Σ_atoms w q_t`.
pub fn aggregate_production(p: &ResourceInstance, mu: &EmpiricalMeasure) -> Vec<f64> {
    let mut total = vec![0.0; p.steps()];
    for a in mu.atoms() {
        for (t, q) in a.decision().0.iter().enumerate() {
            total[t] += a.w * q;
        }
    }
    total
}

fn write_resource_dumps(p: &ResourceInstance, mu: &EmpiricalMeasure, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("profiles.csv"))?;
    w.write_record(["atom", "x", "weight", "t", "time", "q", "stock"])?;
    for (i, a) in mu.atoms().iter().enumerate() {
        let q = &a.decision().0;
        let stock = p.stock_path(a.x.value(), q);
        for t in 0..q.len() {
            let time = t as f64 * p.dt();
            w.serialize((i, a.x.value(), a.w, t, time, q[t], stock[t]))?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("aggregate.csv"))?;
    w.write_record(["t", "time", "Q"])?;
    for (t, q) in aggregate_production(p, mu).into_iter().enumerate() {
        w.serialize((t, t as f64 * p.dt(), q))?;
    }
    w.flush()?;
    Ok(())
}

fn write_congestion_dumps(p: &CongestionInstance, mu: &EmpiricalMeasure, dir: &Path) -> Result<()> {
    let mut w = csv_writer(&dir.join("trajectories.csv"))?;
    w.write_record(["atom", "x", "weight", "t", "time", "position"])?;
    for (i, a) in mu.atoms().iter().enumerate() {
        for (t, pos) in a.decision().0.iter().enumerate() {
            w.serialize((i, a.x.value(), a.w, t, t as f64 * p.dt(), pos))?;
        }
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("arrivals.csv"))?;
    w.write_record(["atom", "x", "weight", "arrival_step"])?;
    for (i, a) in mu.atoms().iter().enumerate() {
        let arrival = p.arrival_step(&a.decision().0).map(|s| s as i64).unwrap_or(-1);
        w.serialize((i, a.x.value(), a.w, arrival))?;
    }
    w.flush()?;
    Ok(())
}

fn write_traffic_dumps(net: &TrafficNetwork, mu: &EmpiricalMeasure, dir: &Path) -> Result<()> {
    let loads = problem::aggregate(net, mu)?;
    let times = net.edge_times(&loads.values);
    let mut w = csv_writer(&dir.join("edge_flows.csv"))?;
    w.write_record(["edge", "from", "to", "flow", "time"])?;
    for (i, e) in net.edges().iter().enumerate() {
        w.serialize((i, e.from, e.to, loads.values[i], times[i]))?;
    }
    w.flush()?;
    let mut w = csv_writer(&dir.join("path_flows.csv"))?;
    w.write_record(["od", "origin", "dest", "path", "edges", "mass", "time"])?;
    for (od, paths) in net.path_report(mu)?.into_iter().enumerate() {
        let (o, d) = net.ods()[od];
        for (k, (mass, time)) in paths.into_iter().enumerate() {
            let edges = net.paths(od)[k].iter().map(|e| e.to_string()).collect::<Vec<_>>().join("-");
            w.serialize((od, o, d, k, edges, mass, time))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_history(report: &SolveReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "objective", "gap", "lambda_norm", "time_ms"])?;
    for r in &report.records {
        w.serialize((r.k, r.objective, r.gap, r.lambda_norm, r.time_ms))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

/// Outcome of one solve.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub marginal: EmpiricalMeasure,
    pub report: SolveReport,
}

/// Quantize, solve, and return the report; no files written.
pub fn solve_once(config: &ExperimentConfig, instance: &Instance, seed: u64) -> Result<RunOutcome> {
    let marginal = instance.marginal(config.marginal.as_ref(), seed)?;
    let solver = SolverConfig { seed, ..config.solver.clone() };
    let problem = instance.problem();
    let report = match config.method {
        Method::Fw => solvers::fw_solve(problem, &marginal, &solver)?,
        Method::Sfw => solvers::sfw_solve(problem, &marginal, &solver)?,
    };
    Ok(RunOutcome { seed, marginal, report })
}

fn write_outcome(config: &ExperimentConfig, instance: &Instance, outcome: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_history(&outcome.report, &dir.join("history.csv"))?;
    let r = &outcome.report;
    let final_json = json!({
        "method": r.method,
        "seed": outcome.seed,
        "objective": r.objective(),
        "gap": r.gap(),
        "best_lower_bound": r.best_lower_bound(),
        "stopped_early": r.stopped_early,
        "beyond_guarantee": r.beyond_guarantee,
        "constants": instance.problem().constants(),
        "certificate": r.certificate,
        "marginal": outcome.marginal,
        "measure": r.measure,
        "config": config,
    });
    write_json(&dir.join("final.json"), &final_json)?;
    instance.write_dumps(&r.measure, dir)
}

/// Summary of [`run`].
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub objectives: Vec<f64>,
    pub gaps: Vec<f64>,
}

/// Runs the experiment into `out_dir`.
///
/// With one repeat the artifacts land directly in `out_dir`; otherwise each
/// repeat `r` (seed `seed + r`) gets `out_dir/repeat_r/` and a `batch.csv`
/// summary is written, plus `batch_Q.csv` (mean and standard deviation of the
/// aggregate production) for the resource model.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    let instance = Instance::build(&config.problem)?;
    let base = config.solver.seed;
    fs::create_dir_all(out_dir)?;
    if config.repeats == 1 {
        let outcome = solve_once(config, &instance, base)?;
        write_outcome(config, &instance, &outcome, out_dir)?;
        return Ok(RunSummary {
            out_dir: out_dir.to_path_buf(),
            seeds: vec![base],
            objectives: vec![outcome.report.objective()],
            gaps: vec![outcome.report.gap()],
        });
    }
    let outcomes: Vec<RunOutcome> = (0..config.repeats)
        .into_par_iter()
        .map(|r| solve_once(config, &instance, base.wrapping_add(r as u64)))
        .collect::<Result<_>>()?;
    for (r, outcome) in outcomes.iter().enumerate() {
        write_outcome(config, &instance, outcome, &out_dir.join(format!("repeat_{r}")))?;
    }
    let mut w = csv_writer(&out_dir.join("batch.csv"))?;
    w.write_record(["repeat", "seed", "objective", "gap"])?;
    for (r, o) in outcomes.iter().enumerate() {
        w.serialize((r, o.seed, o.report.objective(), o.report.gap()))?;
    }
    w.flush()?;
    if let Instance::Resource(p) = &instance {
        let profiles: Vec<Vec<f64>> = outcomes.iter().map(|o| aggregate_production(p, &o.report.measure)).collect();
        let (mean, std) = mean_std(&profiles);
        let mut w = csv_writer(&out_dir.join("batch_Q.csv"))?;
        w.write_record(["t", "time", "mean_Q", "std_Q"])?;
        for t in 0..mean.len() {
            w.serialize((t, t as f64 * p.dt(), mean[t], std[t]))?;
        }
        w.flush()?;
    }
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        seeds: outcomes.iter().map(|o| o.seed).collect(),
        objectives: outcomes.iter().map(|o| o.report.objective()).collect(),
        gaps: outcomes.iter().map(|o| o.report.gap()).collect(),
    })
}

/// Columnwise mean and sample standard deviation.
pub fn mean_std(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let len = rows.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..len).map(|t| rows.iter().map(|r| r[t]).sum::<f64>() / n).collect();
    let std = (0..len)
        .map(|t| {
            if rows.len() < 2 {
                return 0.0;
            }
            (rows.iter().map(|r| (r[t] - mean[t]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect();
    (mean, std)
}

/// A measure file: either a bare measure or a `final.json` with its certificate.
pub fn load_measure(path: &Path) -> Result<(EmpiricalMeasure, Option<f64>)> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if let Some(m) = value.get("measure") {
        let measure: EmpiricalMeasure = serde_json::from_value(m.clone())?;
        let gap = value.get("certificate").and_then(|c| c.get("gap")).and_then(Value::as_f64);
        return Ok((measure, gap));
    }
    Ok((serde_json::from_value(value)?, None))
}

/// Bridged measure plus its certified bound.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeOutcome {
    pub measure: EmpiricalMeasure,
    pub coupling: Value,
    pub d1: f64,
    /// Suboptimality bound of `μ₀`.
    pub eps0: f64,
    /// `ε₀ + 2 L_g (C + L M) d₁`.
    pub eta: f64,
    pub objective: f64,
    /// FW gap of the bridged measure, an a posteriori bound to compare with `eta`.
    pub gap: f64,
}

/// Moves `μ₀` onto `m₁`. When `eps0` is `None` it is computed from the FW gap of `μ₀`.
pub fn bridge_run(
    problem: &dyn MfoProblem,
    metric: &MetricSpec,
    mu0: &EmpiricalMeasure,
    m1: &EmpiricalMeasure,
    eps0: Option<f64>,
) -> Result<BridgeOutcome> {
    if m1.space() != Space::X {
        return Err(Error::SpaceMismatch { expected: "X".into(), found: m1.space().to_string() });
    }
    let eps0 = match eps0 {
        Some(e) => e,
        None => problem::fw_gap(problem, mu0)?.gap,
    };
    let bridged = transport::bridge(mu0, m1, problem, metric)?;
    let k = problem.constants();
    let eta = eps0 + 2.0 * k.stability_factor() * bridged.d1;
    let cert = problem::fw_gap(problem, &bridged.measure)?;
    Ok(BridgeOutcome {
        coupling: bridged.coupling.to_json_value(),
        d1: bridged.d1,
        eps0,
        eta,
        objective: cert.primal_value,
        gap: cert.gap,
        measure: bridged.measure,
    })
}

/// Summary of a run directory.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub iterations: usize,
    pub final_objective: f64,
    pub final_gap: f64,
    pub min_gap: f64,
    pub best_lower_bound: f64,
    /// `final_objective − best_lower_bound`, bounded by `min_gap`.
    pub certified_suboptimality: f64,
    pub negative_gaps: usize,
}

/// Reads `history.csv` from a run directory.
pub fn report(dir: &Path) -> Result<RunReport> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        k: usize,
        objective: f64,
        gap: f64,
    }
    let mut reader = csv::Reader::from_path(dir.join("history.csv"))?;
    let rows: Vec<Row> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    let last = rows.last().ok_or_else(|| Error::invalid("history.csv has no records"))?;
    let best_lower_bound = rows.iter().map(|r| r.objective - r.gap).fold(f64::NEG_INFINITY, f64::max);
    Ok(RunReport {
        iterations: rows.len(),
        final_objective: last.objective,
        final_gap: last.gap,
        min_gap: rows.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min),
        best_lower_bound,
        certified_suboptimality: last.objective - best_lower_bound,
        negative_gaps: rows.iter().filter(|r| r.gap < 0.0).count(),
    })
}
