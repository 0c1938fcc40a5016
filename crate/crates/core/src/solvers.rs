//! Frank-Wolfe and Stochastic Frank-Wolfe over an empirical marginal `m_N`,
//! plus a dual descent used to compute reference values.
//!
//! Frank-Wolfe mixes the current measure with the linearized minimizer:
//! `μ^{k+1} = (1 − ω_k) μ^k + ω_k μ_{λ^k}` with `λ^k = ∇f(∫ g dμ^k)`. The support
//! grows by at most `N` atoms per iteration.
//!
//! Stochastic Frank-Wolfe keeps one decision per agent. Each of the `n_k`
//! candidates lets every agent switch to its best response with probability
//! `ω_k`; the candidate with the lowest objective becomes the next state.
//! With the monotone guard the incumbent competes too.

use std::sync::Arc;
use std::time::Instant;

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, AtomIndex, Decision, EmpiricalMeasure, ParamPoint, Space};
use crate::problem::{self, AggregateVector, DualCertificate, MfoProblem};

/// Step sizes `ω_k`, `k = 0, 1, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// `2 / (k + 2)`.
    Standard,
    /// `1 / (k + 1)` (fictitious play).
    Harmonic,
    Constant { omega: f64 },
}

impl StepRule {
    pub fn omega(&self, k: usize) -> f64 {
        match self {
            StepRule::Standard => 2.0 / (k as f64 + 2.0),
            StepRule::Harmonic => 1.0 / (k as f64 + 1.0),
            StepRule::Constant { omega } => *omega,
        }
    }
}

/// Number of simulated candidates `n_k` per SFW iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SampleSchedule {
    Constant(usize),
    /// `n_k = list[k]`, the last entry repeating.
    List(Vec<usize>),
}

impl SampleSchedule {
    pub fn at(&self, k: usize) -> usize {
        match self {
            SampleSchedule::Constant(n) => *n,
            SampleSchedule::List(v) => v.get(k).or(v.last()).copied().unwrap_or(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Iteration count `K`.
    pub iterations: usize,
    pub step: StepRule,
    pub samples: SampleSchedule,
    pub seed: u64,
    /// Keep the incumbent among the SFW candidates.
    pub monotone_guard: bool,
    /// Stop once the FW gap of the current iterate is at most this.
    pub gap_tol: Option<f64>,
    /// Fill the `time_ms` column; off by default so reruns are byte-identical.
    pub record_timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 100,
            step: StepRule::Standard,
            samples: SampleSchedule::Constant(1),
            seed: 0,
            monotone_guard: true,
            gap_tol: None,
            record_timing: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::Config { field: field.into(), reason });
        if self.iterations == 0 {
            return bad("iterations", "K must be at least 1".into());
        }
        match &self.samples {
            SampleSchedule::Constant(0) => return bad("samples", "n_k must be at least 1".into()),
            SampleSchedule::List(v) if v.is_empty() || v.contains(&0) => {
                return bad("samples", "schedule must be non-empty with n_k ≥ 1".into())
            }
            _ => {}
        }
        if let StepRule::Constant { omega } = self.step {
            if !(0.0..=1.0).contains(&omega) {
                return bad("step", format!("ω = {omega} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub gap: f64,
    pub lambda_norm: f64,
    pub time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    /// One record per iterate `μ^1, …, μ^K`.
    pub records: Vec<IterationRecord>,
    pub measure: EmpiricalMeasure,
    pub certificate: DualCertificate,
    pub seed: u64,
    pub stopped_early: bool,
    /// SFW with `K > 2N`, outside the range covered by its expectation bound.
    pub beyond_guarantee: bool,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.certificate.primal_value
    }

    pub fn gap(&self) -> f64 {
        self.certificate.gap
    }

    /// Best lower bound on the optimal value seen along the run.
    pub fn best_lower_bound(&self) -> f64 {
        self.records.iter().map(|r| r.objective - r.gap).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One decision per support point of a uniform marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub points: Vec<ParamPoint>,
    pub y: Vec<Decision>,
}

impl AgentState {
    pub fn is_feasible<P: MfoProblem + ?Sized>(&self, problem: &P) -> bool {
        self.points.iter().zip(&self.y).all(|(x, y)| problem.feasible(x, y))
    }

    /// `(1/N) Σ δ_{(x_i, y_i)}`, without merging.
    pub fn to_measure(&self) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::uniform_z(self.points.iter().cloned().zip(self.y.iter().cloned()).collect())
    }
}

/// `f((1/N) Σ g(x_i, y_i))`.
pub fn candidate_objective<P: MfoProblem + ?Sized>(problem: &P, state: &AgentState) -> Result<f64> {
    if !state.is_feasible(problem) {
        return Err(Error::Infeasible { x: vec![], reason: "agent state has an infeasible decision".into() });
    }
    let n = state.points.len() as f64;
    let mut beta = AggregateVector::zeros(problem.h_weights());
    for (x, y) in state.points.iter().zip(&state.y) {
        beta.add_scaled(1.0 / n, &problem.g_eval(x, y));
    }
    Ok(problem.f_value(&beta))
}

fn support_points(m: &EmpiricalMeasure) -> Result<Vec<ParamPoint>> {
    if m.space() != Space::X {
        return Err(Error::SpaceMismatch { expected: "X".into(), found: m.space().to_string() });
    }
    Ok(m.atoms().iter().map(|a| a.x.clone()).collect())
}

/// Best responses at `λ = ∇f(aggregate of the best responses to λ = 0)`.
fn initial_decisions<P: MfoProblem + ?Sized>(problem: &P, m: &EmpiricalMeasure) -> Result<Vec<Decision>> {
    let points = support_points(m)?;
    let zero = AggregateVector::zeros(problem.h_weights());
    let ys = problem::best_responses(problem, &zero, &points)?;
    let mut beta = AggregateVector::zeros(problem.h_weights());
    for ((a, x), y) in m.atoms().iter().zip(&points).zip(&ys) {
        beta.add_scaled(a.w, &problem.g_eval(x, y));
    }
    problem::best_responses(problem, &problem.f_grad(&beta), &points)
}

/// Frank-Wolfe iterate with lazily scaled weights: the weight of atom `i` is `raw[i] · scale`.
struct FwMeasure {
    atoms: Vec<Atom>,
    scale: f64,
    index: AtomIndex,
}

impl FwMeasure {
    fn new(atoms: Vec<Atom>) -> Self {
        let mut m = FwMeasure { atoms: Vec::new(), scale: 1.0, index: AtomIndex::default() };
        m.absorb(atoms, 1.0);
        m
    }

    fn absorb(&mut self, atoms: Vec<Atom>, factor: f64) {
        for mut a in atoms {
            a.w *= factor;
            match self.index.find_or_register(&self.atoms, &a) {
                Some(i) => self.atoms[i].w += a.w,
                None => self.atoms.push(a),
            }
        }
    }

    /// `(1 − ω) self + ω new`.
    fn mix(&mut self, new: Vec<Atom>, omega: f64) {
        if omega >= 1.0 {
            *self = FwMeasure::new(new);
            return;
        }
        self.scale *= 1.0 - omega;
        if self.scale < 1e-150 {
            for a in &mut self.atoms {
                a.w *= self.scale;
            }
            self.scale = 1.0;
        }
        let factor = omega / self.scale;
        self.absorb(new, factor);
    }

    fn measure(&self) -> Result<EmpiricalMeasure> {
        let atoms = self.atoms.iter().map(|a| Atom { w: a.w * self.scale, ..a.clone() }).filter(|a| a.w > 0.0).collect();
        EmpiricalMeasure::normalized(Space::Z, atoms)
    }
}

fn elapsed_ms(config: &SolverConfig, start: &Instant) -> f64 {
    if config.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

/// Frank-Wolfe from the default initialization.
pub fn fw_solve<P: MfoProblem + ?Sized>(problem: &P, m: &EmpiricalMeasure, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let ys = initial_decisions(problem, m)?;
    let atoms = m.atoms().iter().zip(ys).map(|(a, y)| Atom::on_z(a.x.clone(), y, a.w)).collect();
    fw_solve_from(problem, &EmpiricalMeasure::new(Space::Z, atoms)?, config)
}

/// Frank-Wolfe from a given feasible `μ⁰`; the marginal is `π₁#μ⁰`.
pub fn fw_solve_from<P: MfoProblem + ?Sized>(
    problem: &P,
    mu0: &EmpiricalMeasure,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    problem::check_feasible(problem, mu0)?;
    let start = Instant::now();
    let m = mu0.first_marginal()?;
    let points = support_points(&m)?;
    let mut iterate = FwMeasure::new(mu0.atoms().to_vec());
    let mut beta = problem::aggregate(problem, mu0)?;
    let mut records = Vec::with_capacity(config.iterations);
    let mut stopped_early = false;

    for k in 0..config.iterations {
        let lambda = problem.f_grad(&beta);
        let ys = match problem::best_responses(problem, &lambda, &points) {
            Ok(ys) => ys,
            Err(e) => return Err(abort(problem, "fw", config, k, records, iterate.measure()?, e)),
        };
        let br: Vec<Atom> = m.atoms().iter().zip(ys).map(|(a, y)| Atom::on_z(a.x.clone(), y, a.w)).collect();
        let beta_br = problem::aggregate_unchecked(problem, &br);
        if k > 0 {
            let gap = lambda.dot(&beta) - lambda.dot(&beta_br);
            records.push(IterationRecord {
                k,
                objective: problem.f_value(&beta),
                gap,
                lambda_norm: lambda.norm(),
                time_ms: elapsed_ms(config, &start),
            });
            if config.gap_tol.is_some_and(|tol| gap <= tol) {
                stopped_early = true;
                break;
            }
        }
        let omega = config.step.omega(k);
        beta = beta.lerp(&beta_br, omega);
        iterate.mix(br, omega);
    }

    let measure = iterate.measure()?;
    let certificate = problem::fw_gap(problem, &measure)?;
    if !stopped_early {
        records.push(IterationRecord {
            k: config.iterations,
            objective: certificate.primal_value,
            gap: certificate.gap,
            lambda_norm: certificate.lambda.norm(),
            time_ms: elapsed_ms(config, &start),
        });
    }
    Ok(SolveReport {
        method: "fw".into(),
        records,
        measure,
        certificate,
        seed: config.seed,
        stopped_early,
        beyond_guarantee: false,
    })
}

fn abort<P: MfoProblem + ?Sized>(
    problem: &P,
    method: &str,
    config: &SolverConfig,
    k: usize,
    records: Vec<IterationRecord>,
    measure: EmpiricalMeasure,
    error: Error,
) -> Error {
    let beta = problem::aggregate_unchecked(problem, measure.atoms());
    let lambda = problem.f_grad(&beta);
    let primal_value = problem.f_value(&beta);
    let certificate = DualCertificate { lambda, dual_value: f64::NAN, primal_value, gap: f64::NAN };
    let partial = SolveReport {
        method: method.into(),
        records,
        measure,
        certificate,
        seed: config.seed,
        stopped_early: true,
        beyond_guarantee: false,
    };
    Error::Aborted { iteration: k, source: Box::new(error), partial: Box::new(partial) }
}

/// Bernoulli draws `P^{k,j}_i`, `i = 0..n`: ChaCha8 keyed by the seed, stream `k`,
/// and word offset fixed by `(j, i)`, so every draw is addressable on its own.
fn switch_mask(seed_rng: &ChaCha8Rng, k: usize, j: usize, n: usize, dist: &Bernoulli) -> Vec<bool> {
    let mut rng = seed_rng.clone();
    rng.set_stream(k as u64);
    rng.set_word_pos(2 * (j as u128) * (n as u128));
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// Stochastic Frank-Wolfe on a uniform marginal.
pub fn sfw_solve<P: MfoProblem + ?Sized>(problem: &P, m: &EmpiricalMeasure, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    if !m.is_uniform(1e-12) {
        return Err(Error::invalid("stochastic Frank-Wolfe needs a uniform marginal"));
    }
    let ys = initial_decisions(problem, m)?;
    let state = AgentState { points: support_points(m)?, y: ys };
    sfw_solve_from(problem, state, config)
}

/// Stochastic Frank-Wolfe from a given feasible agent state.
pub fn sfw_solve_from<P: MfoProblem + ?Sized>(problem: &P, mut state: AgentState, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let n = state.points.len();
    if n == 0 || state.y.len() != n {
        return Err(Error::invalid("agent state needs one decision per agent"));
    }
    if !state.is_feasible(problem) {
        return Err(Error::Infeasible { x: vec![], reason: "initial agent state is infeasible".into() });
    }
    let start = Instant::now();
    let inv_n = 1.0 / n as f64;
    let weights: Arc<[f64]> = problem.h_weights();
    let mut g: Vec<AggregateVector> = state.points.iter().zip(&state.y).map(|(x, y)| problem.g_eval(x, y)).collect();
    let mean = |g: &[AggregateVector]| {
        let mut b = AggregateVector::zeros(weights.clone());
        for v in g {
            b.add_scaled(inv_n, v);
        }
        b
    };
    let mut beta = mean(&g);
    let seed_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.iterations);
    let mut stopped_early = false;

    for k in 0..config.iterations {
        let lambda = problem.f_grad(&beta);
        let br = match problem::best_responses(problem, &lambda, &state.points) {
            Ok(ys) => ys,
            Err(e) => return Err(abort(problem, "sfw", config, k, records, state.to_measure()?, e)),
        };
        let g_br: Vec<AggregateVector> = state.points.par_iter().zip(&br).map(|(x, y)| problem.g_eval(x, y)).collect();
        if k > 0 {
            let gap = lambda.dot(&beta) - inv_n * g_br.iter().map(|v| lambda.dot(v)).sum::<f64>();
            records.push(IterationRecord {
                k,
                objective: problem.f_value(&beta),
                gap,
                lambda_norm: lambda.norm(),
                time_ms: elapsed_ms(config, &start),
            });
            if config.gap_tol.is_some_and(|tol| gap <= tol) {
                stopped_early = true;
                break;
            }
        }
        let omega = config.step.omega(k);
        let dist = Bernoulli::new(omega.clamp(0.0, 1.0)).map_err(|e| Error::invalid(e.to_string()))?;
        let mut best: Option<(f64, Vec<bool>)> = None;
        for j in 0..config.samples.at(k) {
            let mask = switch_mask(&seed_rng, k, j, n, &dist);
            let mut cand = AggregateVector::zeros(weights.clone());
            for (i, &p) in mask.iter().enumerate() {
                cand.add_scaled(inv_n, if p { &g_br[i] } else { &g[i] });
            }
            let value = problem.f_value(&cand);
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, mask));
            }
        }
        let (value, mask) = best.expect("n_k ≥ 1");
        if config.monotone_guard && !(value < problem.f_value(&beta)) {
            continue;
        }
        for (i, p) in mask.into_iter().enumerate() {
            if p {
                state.y[i] = br[i].clone();
                g[i] = g_br[i].clone();
            }
        }
        beta = mean(&g);
    }

    let measure = state.to_measure()?;
    let certificate = problem::fw_gap(problem, &measure)?;
    if !stopped_early {
        records.push(IterationRecord {
            k: config.iterations,
            objective: certificate.primal_value,
            gap: certificate.gap,
            lambda_norm: certificate.lambda.norm(),
            time_ms: elapsed_ms(config, &start),
        });
    }
    Ok(SolveReport {
        method: "sfw".into(),
        records,
        measure,
        certificate,
        seed: config.seed,
        stopped_early,
        beyond_guarantee: config.iterations > 2 * n,
    })
}

/// Result of [`dual_descent`].
#[derive(Clone, Debug)]
pub struct DualSolve {
    pub lambda: AggregateVector,
    /// `linearized_solve(λ)`, the primal measure recovered from the dual point.
    pub measure: EmpiricalMeasure,
    pub certificate: DualCertificate,
    pub iterations: usize,
}

/// Averaged best-response iteration on the dual variable,
/// `λ ← (1 − τ) λ + τ ∇f(∫ g d linearized_solve(λ))`.
///
/// When `f*` is a quadratic on its domain this is gradient descent on the
/// strongly convex dual `D_m` and converges linearly. Stops when the FW gap of
/// the recovered measure is at most `tol`.
///
/// The recovered measure puts each agent on a single best response, so the
/// iteration only settles when those are unique, as in the resource and
/// congestion models. With finitely many options it can cycle; check
/// `certificate.gap` on return.
pub fn dual_descent<P: MfoProblem + ?Sized>(
    problem: &P,
    m: &EmpiricalMeasure,
    tau: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DualSolve> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!("step τ = {tau} outside (0, 1]")));
    }
    let zero = AggregateVector::zeros(problem.h_weights());
    let mut lambda = problem.f_grad(&problem::aggregate(problem, &problem::linearized_solve(problem, &zero, m)?)?);
    let mut iterations = 0;
    loop {
        let mu = problem::linearized_solve(problem, &lambda, m)?;
        let certificate = problem::fw_gap(problem, &mu)?;
        if certificate.gap <= tol || iterations >= max_iter {
            return Ok(DualSolve { lambda, measure: mu, certificate, iterations });
        }
        let target = certificate.lambda.clone();
        lambda = lambda.lerp(&target, tau);
        iterations += 1;
    }
}
