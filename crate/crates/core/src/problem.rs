//! The MFO problem contract and the analysis operations built on it:
//! aggregation, the linearized subproblem, the Frank-Wolfe gap certificate,
//! the dual objective and the directional derivative of the value function.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, Decision, EmpiricalMeasure, ParamPoint, Space};
use crate::transport::MetricSpec;

/// An element of the Hilbert space `H`, stored as a finite vector with a
/// diagonal-weight inner product `⟨a, b⟩ = Σ w_i a_i b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateVector {
    pub values: Vec<f64>,
    pub weights: Arc<[f64]>,
}

impl AggregateVector {
    pub fn new(values: Vec<f64>, weights: Arc<[f64]>) -> Self {
        debug_assert_eq!(values.len(), weights.len());
        AggregateVector { values, weights }
    }

    pub fn zeros(weights: Arc<[f64]>) -> Self {
        AggregateVector { values: vec![0.0; weights.len()], weights }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn dot(&self, other: &AggregateVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.weights.iter())
            .map(|((a, b), w)| w * a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &AggregateVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> AggregateVector {
        AggregateVector::new(self.values.iter().map(|v| alpha * v).collect(), self.weights.clone())
    }

    pub fn sub(&self, other: &AggregateVector) -> AggregateVector {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    /// `(1 - omega) self + omega other`.
    pub fn lerp(&self, other: &AggregateVector, omega: f64) -> AggregateVector {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| (1.0 - omega) * a + omega * b).collect();
        AggregateVector::new(values, self.weights.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Regularity constants of a problem instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Lipschitz modulus of `∇f`.
    pub l: f64,
    /// `sup ‖g‖`.
    pub m: f64,
    /// `sup ‖g(z₁) − g(z₂)‖²`.
    pub d: f64,
    /// `sup ‖∇f(∫ g dμ)‖`.
    pub c: f64,
    /// Lipschitz modulus of `x ↦ g(x, Z_x)` (Hausdorff sense).
    pub l_g: f64,
}

impl Constants {
    /// `L_g (C + L M)`, the sensitivity of the value to the marginal in `d₁`.
    pub fn stability_factor(&self) -> f64 {
        self.l_g * (self.c + self.l * self.m)
    }
}

/// A mean field optimization problem `min f(∫ g dμ)` over `μ` with prescribed first marginal.
///
/// Implementations must be safe to query concurrently for distinct `x`.
pub trait MfoProblem: Send + Sync {
    fn name(&self) -> &str;

    /// Diagonal weights of the inner product on `H`.
    fn h_weights(&self) -> Arc<[f64]>;

    fn g_eval(&self, x: &ParamPoint, y: &Decision) -> AggregateVector;

    fn f_value(&self, beta: &AggregateVector) -> f64;

    /// Riesz representative of `∇f(β)` in `H`; this is the dual variable `λ`.
    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector;

    /// Fenchel conjugate `f*(λ)`, `+∞` outside its domain.
    fn f_conj(&self, _lambda: &AggregateVector) -> Result<f64> {
        Err(Error::ConjugateUnavailable)
    }

    /// A member of `argmin_{y ∈ Z_x} ⟨λ, g(x, y)⟩`.
    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> Result<Decision>;

    /// `y ∈ Z_x`.
    fn feasible(&self, x: &ParamPoint, y: &Decision) -> bool;

    /// A decision `y' ∈ Z_{x'}` with `‖g(x', y') − g(x, y)‖ ≤ L_g d(x, x')`.
    fn transport_select(&self, x: &ParamPoint, y: &Decision, x_new: &ParamPoint) -> Result<Decision>;

    fn constants(&self) -> Constants;

    /// Metric on `X` used for transport.
    fn metric(&self) -> MetricSpec {
        MetricSpec::Euclidean
    }
}

/// Primal/dual certificate at a feasible measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: AggregateVector,
    /// `D_m(λ) = f*(λ) − ∫ u_λ dm`.
    pub dual_value: f64,
    /// `f(∫ g dμ)`.
    pub primal_value: f64,
    /// `primal_value + dual_value`, an upper bound on the suboptimality of `μ`.
    pub gap: f64,
}

impl DualCertificate {
    /// Lower bound on the optimal value, from weak duality.
    pub fn lower_bound(&self) -> f64 {
        -self.dual_value
    }
}

pub fn check_feasible<P: MfoProblem + ?Sized>(problem: &P, mu: &EmpiricalMeasure) -> Result<()> {
    if mu.space() != Space::Z {
        return Err(Error::SpaceMismatch { expected: "Z".into(), found: mu.space().to_string() });
    }
    for a in mu.atoms() {
        if !problem.feasible(&a.x, a.decision()) {
            return Err(Error::Infeasible { x: a.x.0.clone(), reason: "atom outside Z_x".into() });
        }
    }
    Ok(())
}

/// `∫ g dμ` as an exact finite sum.
pub fn aggregate<P: MfoProblem + ?Sized>(problem: &P, mu: &EmpiricalMeasure) -> Result<AggregateVector> {
    check_feasible(problem, mu)?;
    Ok(aggregate_unchecked(problem, mu.atoms()))
}

pub(crate) fn aggregate_unchecked<P: MfoProblem + ?Sized>(problem: &P, atoms: &[Atom]) -> AggregateVector {
    let mut beta = AggregateVector::zeros(problem.h_weights());
    for a in atoms {
        beta.add_scaled(a.w, &problem.g_eval(&a.x, a.decision()));
    }
    beta
}

/// `f(∫ g dμ)`.
pub fn objective<P: MfoProblem + ?Sized>(problem: &P, mu: &EmpiricalMeasure) -> Result<f64> {
    Ok(problem.f_value(&aggregate(problem, mu)?))
}

/// `u_λ(x) = min_{y ∈ Z_x} ⟨λ, g(x, y)⟩` together with its minimizer.
pub fn u_lambda<P: MfoProblem + ?Sized>(
    problem: &P,
    lambda: &AggregateVector,
    x: &ParamPoint,
) -> Result<(f64, Decision)> {
    let y = problem.best_response(lambda, x)?;
    Ok((lambda.dot(&problem.g_eval(x, &y)), y))
}

/// Best responses at every support point of `m`, in support order.
pub fn best_responses<P: MfoProblem + ?Sized>(
    problem: &P,
    lambda: &AggregateVector,
    points: &[ParamPoint],
) -> Result<Vec<Decision>> {
    points
        .par_iter()
        .enumerate()
        .map(|(agent, x)| {
            let y = problem
                .best_response(lambda, x)
                .map_err(|e| Error::Oracle { agent, reason: e.to_string() })?;
            if !problem.feasible(x, &y) {
                return Err(Error::Oracle { agent, reason: "best response is infeasible".into() });
            }
            Ok(y)
        })
        .collect()
}

/// Minimizer of `μ ↦ ∫ ⟨λ, g⟩ dμ` over measures with first marginal `m`:
/// one best response per support point.
pub fn linearized_solve<P: MfoProblem + ?Sized>(
    problem: &P,
    lambda: &AggregateVector,
    m: &EmpiricalMeasure,
) -> Result<EmpiricalMeasure> {
    let points: Vec<ParamPoint> = m.atoms().iter().map(|a| a.x.clone()).collect();
    let ys = best_responses(problem, lambda, &points)?;
    let atoms = m.atoms().iter().zip(ys).map(|(a, y)| Atom::on_z(a.x.clone(), y, a.w)).collect();
    EmpiricalMeasure::new(Space::Z, atoms)
}

/// `∫ u_λ dm`, evaluated through the best-response oracle.
pub fn integrated_u<P: MfoProblem + ?Sized>(problem: &P, lambda: &AggregateVector, m: &EmpiricalMeasure) -> Result<f64> {
    let points: Vec<ParamPoint> = m.atoms().iter().map(|a| a.x.clone()).collect();
    let ys = best_responses(problem, lambda, &points)?;
    Ok(m.atoms().iter().zip(&ys).map(|(a, y)| a.w * lambda.dot(&problem.g_eval(&a.x, y))).sum())
}

/// Frank-Wolfe gap at `μ`: `⟨λ̄, β⟩ − ∫ u_λ̄ dm` with `β = ∫ g dμ`, `λ̄ = ∇f(β)`.
///
/// The dual value is evaluated at `λ̄` through Fenchel's equality
/// `f*(λ̄) = ⟨λ̄, β⟩ − f(β)`, so `f_conj` is not needed here.
pub fn fw_gap<P: MfoProblem + ?Sized>(problem: &P, mu: &EmpiricalMeasure) -> Result<DualCertificate> {
    let beta = aggregate(problem, mu)?;
    let lambda = problem.f_grad(&beta);
    let m = mu.first_marginal()?;
    let int_u = integrated_u(problem, &lambda, &m)?;
    let primal_value = problem.f_value(&beta);
    let conj = lambda.dot(&beta) - primal_value;
    let dual_value = conj - int_u;
    Ok(DualCertificate { gap: lambda.dot(&beta) - int_u, lambda, dual_value, primal_value })
}

/// `D_m(λ) = f*(λ) − ∫ u_λ dm`; `+∞` when `λ ∉ dom f*`.
pub fn dual_value<P: MfoProblem + ?Sized>(problem: &P, lambda: &AggregateVector, m: &EmpiricalMeasure) -> Result<f64> {
    let conj = problem.f_conj(lambda)?;
    if conj == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(conj - integrated_u(problem, lambda, m)?)
}

/// `∫ u_{λ*} d(m1 − m0)`, the derivative of `t ↦ val(P_{(1−t)m0 + t m1})` at `t = 0⁺`.
pub fn value_directional_derivative<P: MfoProblem + ?Sized>(
    problem: &P,
    m0: &EmpiricalMeasure,
    m1: &EmpiricalMeasure,
    lambda_star: &AggregateVector,
) -> Result<f64> {
    Ok(integrated_u(problem, lambda_star, m1)? - integrated_u(problem, lambda_star, m0)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::finite::FiniteChoiceProblem;
    use crate::models::traffic::TrafficNetwork;
    use approx::assert_abs_diff_eq;

    fn pigou() -> TrafficNetwork {
        TrafficNetwork::pigou()
    }

    #[test]
    fn aggregate_of_dirac_and_midpoint() {
        let p = pigou();
        let x = p.od_point(0);
        let (y1, y2) = (p.path_decision(0, 0), p.path_decision(0, 1));
        let dirac = EmpiricalMeasure::dirac_z(x.clone(), y1.clone());
        assert_eq!(aggregate(&p, &dirac).unwrap().values, vec![1.0, 0.0]);
        let half = EmpiricalMeasure::uniform_z(vec![(x.clone(), y1), (x, y2)]).unwrap();
        assert_eq!(aggregate(&p, &half).unwrap().values, vec![0.5, 0.5]);
    }

    #[test]
    fn aggregate_rejects_infeasible() {
        let p = pigou();
        let bad = EmpiricalMeasure::dirac_z(p.od_point(0), Decision(vec![1.0, 1.0]));
        assert!(matches!(aggregate(&p, &bad), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn u_lambda_zero() {
        let p = pigou();
        let (v, y) = u_lambda(&p, &AggregateVector::zeros(p.h_weights()), &p.od_point(0)).unwrap();
        assert_eq!(v, 0.0);
        assert!(p.feasible(&p.od_point(0), &y));
    }

    #[test]
    fn linearized_solve_pigou_prefers_cheaper_edge() {
        let p = pigou();
        let lambda = AggregateVector::new(vec![0.3, 1.0], p.h_weights());
        let m = EmpiricalMeasure::dirac_x(p.od_point(0));
        let mu = linearized_solve(&p, &lambda, &m).unwrap();
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.atoms()[0].decision(), &p.path_decision(0, 0));
        let cost = mu.integrate(|a| lambda.dot(&p.g_eval(&a.x, a.decision())));
        assert_abs_diff_eq!(cost, integrated_u(&p, &lambda, &m).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn gap_of_pigou_on_slow_edge() {
        let p = pigou();
        let mu = EmpiricalMeasure::dirac_z(p.od_point(0), p.path_decision(0, 1));
        let cert = fw_gap(&p, &mu).unwrap();
        assert_eq!(cert.lambda.values, vec![0.0, 1.0]);
        assert_abs_diff_eq!(cert.gap, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cert.gap, cert.primal_value + cert.dual_value, epsilon = 1e-15);
    }

    #[test]
    fn gap_zero_at_equilibrium() {
        let p = pigou();
        let mu = EmpiricalMeasure::dirac_z(p.od_point(0), p.path_decision(0, 0));
        let cert = fw_gap(&p, &mu).unwrap();
        assert_eq!(cert.gap, 0.0);
    }

    #[test]
    fn dual_value_quadratic_at_zero() {
        let p = FiniteChoiceProblem::two_agent_example();
        let m = p.marginal();
        let lambda = AggregateVector::zeros(p.h_weights());
        assert_abs_diff_eq!(dual_value(&p, &lambda, &m).unwrap(), 0.0);
    }

    #[test]
    fn dual_value_needs_conjugate() {
        let p = pigou();
        let m = EmpiricalMeasure::dirac_x(p.od_point(0));
        assert!(matches!(
            dual_value(&p, &AggregateVector::zeros(p.h_weights()), &m),
            Err(Error::ConjugateUnavailable)
        ));
    }

    #[test]
    fn directional_derivative_vanishes_on_same_marginal() {
        let p = FiniteChoiceProblem::two_agent_example();
        let m = p.marginal();
        let lambda = AggregateVector::new(vec![0.3, -0.2], p.h_weights());
        assert_eq!(value_directional_derivative(&p, &m, &m, &lambda).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_vector_algebra() {
        let w: Arc<[f64]> = Arc::from(vec![1.0, 2.0]);
        let a = AggregateVector::new(vec![1.0, 1.0], w.clone());
        let b = AggregateVector::new(vec![2.0, -1.0], w);
        assert_eq!(a.dot(&b), 2.0 - 2.0);
        assert_eq!(a.norm_sq(), 3.0);
        assert_eq!(a.lerp(&b, 0.5).values, vec![1.5, 0.0]);
        assert_eq!(b.sub(&a).values, vec![1.0, -2.0]);
    }
}
