//! Competition between producers of an exhaustible resource, discretized in time.
//!
//! A producer with stock `x` chooses extraction rates `q ∈ [0, ½]^M` with
//! `Δt Σ q_t ≤ x`. With `w_t = Δt e^{−r t Δt}`,
//!
//! ```text
//!     g(x, q) = ( Σ_t w_t (q_t² − q_t), q ),     f(β) = β₀ + (ε/2) Σ_t w_t β_t²
//! ```
//!
//! on `H = ℝ × ℝ^M` with weights `(1, w_0, …, w_{M−1})`. At `λ = ∇f(β) = (1, εQ)`
//! the best response is the producer's optimal extraction against the
//! aggregate production `Q`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Decision, ParamPoint};
use crate::problem::{AggregateVector, Constants, MfoProblem};

/// Upper bound on extraction rates.
pub const Q_MAX: f64 = 0.5;

/// Slack on the budget constraint in feasibility checks.
const BUDGET_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceParams {
    /// Horizon `T`.
    pub horizon: f64,
    /// Number of time steps `M`.
    pub steps: usize,
    /// Discount rate `r`.
    pub discount: f64,
    /// Price impact `ε` of the aggregate production.
    pub epsilon: f64,
}

impl Default for ResourceParams {
    fn default() -> Self {
        ResourceParams { horizon: 10.0, steps: 50, discount: 1.0, epsilon: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct ResourceInstance {
    params: ResourceParams,
    dt: f64,
    /// `w_t = Δt e^{−r t Δt}`.
    time_weights: Vec<f64>,
    weights: Arc<[f64]>,
}

/// Best response together with its budget multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub q: Vec<f64>,
    /// Multiplier `θ ≥ 0` of `Δt Σ q ≤ x`.
    pub theta: f64,
}

impl ResourceInstance {
    pub fn new(params: ResourceParams) -> Result<Self> {
        if !(params.horizon > 0.0 && params.horizon.is_finite()) {
            return Err(Error::Config { field: "horizon".into(), reason: "must be positive".into() });
        }
        if params.steps == 0 {
            return Err(Error::Config { field: "steps".into(), reason: "must be at least 1".into() });
        }
        if !(params.discount >= 0.0) {
            return Err(Error::Config { field: "discount".into(), reason: "must be non-negative".into() });
        }
        if !(params.epsilon > 0.0 && params.epsilon <= 1.0) {
            return Err(Error::Config { field: "epsilon".into(), reason: "must lie in (0, 1]".into() });
        }
        let dt = params.horizon / params.steps as f64;
        let time_weights: Vec<f64> = (0..params.steps).map(|t| dt * (-params.discount * t as f64 * dt).exp()).collect();
        let mut w = vec![1.0];
        w.extend(&time_weights);
        Ok(ResourceInstance { params, dt, time_weights, weights: Arc::from(w) })
    }

    pub fn params(&self) -> &ResourceParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.params.steps
    }

    /// `w_t = Δt e^{−r t Δt}`.
    pub fn time_weights(&self) -> &[f64] {
        &self.time_weights
    }

    /// `λ = (1, ε Q)` for an aggregate production profile `Q`.
    pub fn price_signal(&self, production: &[f64]) -> AggregateVector {
        let mut v = vec![1.0];
        v.extend(production.iter().map(|q| self.params.epsilon * q));
        AggregateVector::new(v, self.weights.clone())
    }

    /// Remaining stock `X_t = x − Δt Σ_{s<t} q_s` for `t = 0..=M`.
    pub fn stock_path(&self, x: f64, q: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(q.len() + 1);
        let mut s = x;
        out.push(s);
        for v in q {
            s -= self.dt * v;
            out.push(s);
        }
        out
    }

    /// Exact minimizer of `⟨λ, g(x, ·)⟩` over the feasible set, with its multiplier.
    ///
    /// For `λ₀ > 0` the minimizer is `q_t(θ) = clamp((λ₀ − λ_t − θ e^{rtΔt}) / (2λ₀), 0, ½)`
    /// with `θ` the smallest multiplier that meets the budget; `Δt Σ q_t(θ)` is
    /// piecewise linear in `θ`, so `θ` is located among the breakpoints and then
    /// solved for exactly. For `λ₀ = 0` the problem is linear and filled greedily.
    pub fn extraction(&self, lambda: &AggregateVector, x: f64) -> Result<Extraction> {
        let m = self.params.steps;
        if lambda.dim() != m + 1 || !lambda.is_finite() {
            return Err(Error::invalid("price signal has the wrong dimension or is not finite"));
        }
        if !(x >= 0.0) {
            return Err(Error::invalid(format!("stock {x} must be non-negative")));
        }
        let l0 = lambda.values[0];
        let lt = &lambda.values[1..];
        if l0 < 0.0 {
            return Err(Error::invalid("λ₀ < 0 makes the best response unbounded"));
        }
        // e^{rtΔt} = Δt / w_t
        let growth: Vec<f64> = self.time_weights.iter().map(|w| self.dt / w).collect();
        if l0 == 0.0 {
            return Ok(self.linear_fill(lt, &growth, x));
        }
        let q_at = |theta: f64| -> Vec<f64> {
            (0..m)
                .map(|t| ((l0 - lt[t] - theta * growth[t]) / (2.0 * l0)).clamp(0.0, Q_MAX))
                .collect()
        };
        let spend = |q: &[f64]| self.dt * q.iter().sum::<f64>();
        let free = q_at(0.0);
        if spend(&free) <= x {
            return Ok(Extraction { q: free, theta: 0.0 });
        }
        // q_t leaves ½ at θ = −λ_t / growth and reaches 0 at θ = (λ₀ − λ_t) / growth
        let mut breaks: Vec<f64> = Vec::with_capacity(2 * m);
        for t in 0..m {
            for b in [-lt[t] / growth[t], (l0 - lt[t]) / growth[t]] {
                if b > 0.0 {
                    breaks.push(b);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        // first breakpoint where spending drops to the budget
        let hi_idx = breaks.partition_point(|&b| spend(&q_at(b)) > x);
        let lo = if hi_idx == 0 { 0.0 } else { breaks[hi_idx - 1] };
        let hi = breaks[hi_idx];
        // on [lo, hi] the active set is fixed: spend(θ) = a − θ b
        let mid = 0.5 * (lo + hi);
        let (mut a, mut b) = (0.0, 0.0);
        for t in 0..m {
            let raw = (l0 - lt[t] - mid * growth[t]) / (2.0 * l0);
            if raw >= Q_MAX {
                a += self.dt * Q_MAX;
            } else if raw > 0.0 {
                a += self.dt * (l0 - lt[t]) / (2.0 * l0);
                b += self.dt * growth[t] / (2.0 * l0);
            }
        }
        let theta = if b > 0.0 { ((a - x) / b).clamp(lo, hi) } else { hi };
        let mut q = q_at(theta);
        // absorb rounding so the budget holds exactly
        let excess = spend(&q) - x;
        if excess > 0.0 {
            if let Some(t) = (0..m).rev().find(|&t| q[t] > 0.0) {
                q[t] = (q[t] - excess / self.dt).max(0.0);
            }
        }
        Ok(Extraction { q, theta })
    }

    /// `λ₀ = 0`: minimize `Σ w_t λ_t q_t`; cheapest steps per unit of stock first.
    fn linear_fill(&self, lt: &[f64], growth: &[f64], x: f64) -> Extraction {
        let m = lt.len();
        let mut order: Vec<usize> = (0..m).filter(|&t| lt[t] < 0.0).collect();
        // price per unit of stock spent is λ_t / e^{rtΔt}
        order.sort_by(|&s, &t| (lt[s] / growth[s]).total_cmp(&(lt[t] / growth[t])).then(s.cmp(&t)));
        let mut q = vec![0.0; m];
        let mut left = x;
        let mut theta = 0.0;
        for t in order {
            if left <= 0.0 {
                break;
            }
            let take = Q_MAX.min(left / self.dt);
            q[t] = take;
            left -= take * self.dt;
            if take < Q_MAX {
                theta = -lt[t] / growth[t];
            }
        }
        Extraction { q, theta }
    }

    /// Truncation in time order to the new budget: `q'_t = min(q_t, remaining / Δt)`.
    pub fn truncate(&self, q: &[f64], budget: f64) -> Vec<f64> {
        let mut left = budget.max(0.0);
        q.iter()
            .map(|&v| {
                let take = if left <= 1e-12 { 0.0 } else { v.min(left / self.dt) };
                left -= take * self.dt;
                take
            })
            .collect()
    }

    /// `W = Σ_t w_t`.
    fn total_weight(&self) -> f64 {
        self.time_weights.iter().sum()
    }
}

impl MfoProblem for ResourceInstance {
    fn name(&self) -> &str {
        "resource"
    }

    fn h_weights(&self) -> Arc<[f64]> {
        self.weights.clone()
    }

    fn g_eval(&self, _x: &ParamPoint, y: &Decision) -> AggregateVector {
        let q = &y.0;
        let mut v = Vec::with_capacity(q.len() + 1);
        v.push(self.time_weights.iter().zip(q).map(|(w, q)| w * (q * q - q)).sum());
        v.extend_from_slice(q);
        AggregateVector::new(v, self.weights.clone())
    }

    fn f_value(&self, beta: &AggregateVector) -> f64 {
        let quad: f64 = self.time_weights.iter().zip(&beta.values[1..]).map(|(w, b)| w * b * b).sum();
        beta.values[0] + 0.5 * self.params.epsilon * quad
    }

    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector {
        let mut v = vec![1.0];
        v.extend(beta.values[1..].iter().map(|b| self.params.epsilon * b));
        AggregateVector::new(v, self.weights.clone())
    }

    /// `f*(1, λ₂) = ‖λ₂‖² / (2ε)`, `+∞` when `λ₀ ≠ 1`.
    fn f_conj(&self, lambda: &AggregateVector) -> Result<f64> {
        if (lambda.values[0] - 1.0).abs() > 1e-12 {
            return Ok(f64::INFINITY);
        }
        let sq: f64 = self.time_weights.iter().zip(&lambda.values[1..]).map(|(w, l)| w * l * l).sum();
        Ok(sq / (2.0 * self.params.epsilon))
    }

    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> Result<Decision> {
        Ok(Decision(self.extraction(lambda, x.value())?.q))
    }

    fn feasible(&self, x: &ParamPoint, y: &Decision) -> bool {
        y.0.len() == self.params.steps
            && y.0.iter().all(|&q| (0.0..=Q_MAX).contains(&q))
            && self.dt * y.0.iter().sum::<f64>() <= x.value() + BUDGET_TOL
    }

    fn transport_select(&self, x: &ParamPoint, y: &Decision, x_new: &ParamPoint) -> Result<Decision> {
        if x_new.value() >= x.value() {
            return Ok(y.clone());
        }
        Ok(Decision(self.truncate(&y.0, x_new.value())))
    }

    /// With `W = Σ w_t`: `|g₀| ≤ W/4` and `‖q‖² ≤ W/4`. Truncating to a budget
    /// smaller by `δ` removes `Δq ≥ 0` with `Δt Σ Δq ≤ δ` and `Δq_t ≤ δ/Δt`, so
    /// `|Δg₀| ≤ δ` and `‖Δq‖² ≤ δ²/Δt`.
    fn constants(&self) -> Constants {
        let w = self.total_weight();
        let eps = self.params.epsilon;
        Constants {
            l: eps,
            m: (w * w / 16.0 + w / 4.0).sqrt(),
            d: w * w / 16.0 + w / 4.0,
            c: (1.0 + eps * eps * w / 4.0).sqrt(),
            l_g: (1.0 + 1.0 / self.dt).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atom, EmpiricalMeasure, Space};
    use crate::problem::{aggregate, u_lambda};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ResourceInstance {
        ResourceInstance::new(ResourceParams { horizon: 10.0, steps: 20, discount: 1.0, epsilon: 1.0 }).unwrap()
    }

    fn linear_cost(p: &ResourceInstance, lambda: &AggregateVector, q: &[f64]) -> f64 {
        lambda.dot(&p.g_eval(&ParamPoint::scalar(0.0), &Decision(q.to_vec())))
    }

    /// Euclidean projection onto `{q ∈ [0, ½]^M, Δt Σ q ≤ x}` by bisection on the shift.
    fn project(q: &[f64], dt: f64, x: f64) -> Vec<f64> {
        let clip = |s: f64| q.iter().map(|v| (v - s).clamp(0.0, Q_MAX)).collect::<Vec<_>>();
        let spend = |v: &[f64]| dt * v.iter().sum::<f64>();
        if spend(&clip(0.0)) <= x {
            return clip(0.0);
        }
        let (mut lo, mut hi) = (0.0, q.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if spend(&clip(mid)) > x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        clip(hi)
    }

    /// Accelerated projected gradient, independent of the breakpoint solver.
    fn projected_gradient(p: &ResourceInstance, lambda: &AggregateVector, x: f64) -> Vec<f64> {
        let (l0, lt) = (lambda.values[0], &lambda.values[1..]);
        let w = p.time_weights();
        let step = 1.0 / (2.0 * l0 * w.iter().fold(0.0f64, |a, b| a.max(*b)));
        let grad = |q: &[f64]| -> Vec<f64> { (0..q.len()).map(|t| w[t] * (l0 * (2.0 * q[t] - 1.0) + lt[t])).collect() };
        let mut q = vec![0.0; p.steps()];
        let mut z = q.clone();
        let mut t_k = 1.0f64;
        for _ in 0..50000 {
            let g = grad(&z);
            let trial: Vec<f64> = z.iter().zip(&g).map(|(v, g)| v - step * g).collect();
            let next = project(&trial, p.dt(), x);
            let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
            let moved = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            z = next.iter().zip(&q).map(|(a, b)| a + (t_k - 1.0) / t_next * (a - b)).collect();
            q = next;
            t_k = t_next;
            if moved < 1e-15 {
                break;
            }
        }
        q
    }

    #[test]
    fn empty_stock_extracts_nothing() {
        let p = small();
        let q = p.extraction(&p.price_signal(&[0.3; 20]), 0.0).unwrap().q;
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ample_stock_extracts_half() {
        let p = small();
        let lambda = p.price_signal(&[0.0; 20]);
        let (value, y) = u_lambda(&p, &lambda, &ParamPoint::scalar(5.0)).unwrap();
        assert!(y.0.iter().all(|&v| v == 0.5));
        let w: f64 = p.time_weights().iter().sum();
        assert_abs_diff_eq!(value, -0.25 * w, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_of_constant_half() {
        let p = small();
        let mu = EmpiricalMeasure::dirac_z(ParamPoint::scalar(10.0), Decision(vec![0.5; 20]));
        let beta = aggregate(&p, &mu).unwrap();
        let expected: f64 = p.time_weights().iter().map(|w| w * (0.25 - 0.5)).sum();
        assert_abs_diff_eq!(beta.values[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn conjugate_domain() {
        let p = small();
        let mut lam = p.price_signal(&[0.2; 20]);
        let sq: f64 = p.time_weights().iter().map(|w| w * 0.04).sum();
        assert_abs_diff_eq!(p.f_conj(&lam).unwrap(), sq / 2.0, epsilon = 1e-15);
        lam.values[0] = 0.5;
        assert_eq!(p.f_conj(&lam).unwrap(), f64::INFINITY);
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let p = small();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let prod: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..0.5)).collect();
            let lambda = p.price_signal(&prod);
            let x = rng.random_range(0.0..6.0);
            let exact = p.extraction(&lambda, x).unwrap().q;
            let oracle = projected_gradient(&p, &lambda, x);
            let (a, b) = (linear_cost(&p, &lambda, &exact), linear_cost(&p, &lambda, &oracle));
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            assert!(a <= b + 1e-12);
        }
    }

    #[test]
    fn kkt_conditions_hold() {
        let p = small();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let prod: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..0.5)).collect();
            let lambda = p.price_signal(&prod);
            let x = rng.random_range(0.0..6.0);
            let Extraction { q, theta } = p.extraction(&lambda, x).unwrap();
            let spend = p.dt() * q.iter().sum::<f64>();
            assert!(spend <= x + 1e-12);
            assert!(theta >= 0.0);
            assert!((theta * (spend - x)).abs() <= 1e-9);
            assert!(q.iter().all(|v| (0.0..=0.5).contains(v)));
            assert!(p.stock_path(x, &q).iter().all(|&s| s >= -1e-12));
            // stationarity of the Lagrangian per coordinate
            for t in 0..20 {
                let w = p.time_weights()[t];
                let grad = w * (2.0 * q[t] - 1.0 + lambda.values[t + 1]) + theta * p.dt();
                if q[t] > 0.0 && q[t] < 0.5 {
                    assert!(grad.abs() <= 1e-10, "t={t} grad={grad}");
                } else if q[t] == 0.0 {
                    assert!(grad >= -1e-10);
                } else {
                    assert!(grad <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn linear_price_fills_cheapest_steps() {
        let p = small();
        let mut lambda = p.price_signal(&[0.0; 20]);
        lambda.values[0] = 0.0;
        lambda.values[3] = -1.0;
        lambda.values[8] = -2.0;
        let q = p.extraction(&lambda, 0.75).unwrap().q;
        // Δt = 0.5: full rate on both steps spends 0.5 of the stock
        assert_eq!(q[7], 0.5);
        assert_eq!(q[2], 0.5);
        assert!(q.iter().enumerate().all(|(t, &v)| t == 2 || t == 7 || v == 0.0));
        lambda.values[0] = -1.0;
        assert!(p.extraction(&lambda, 1.0).is_err());
    }

    #[test]
    fn truncation_examples() {
        let p = ResourceInstance::new(ResourceParams { horizon: 10.0, steps: 20, ..Default::default() }).unwrap();
        let q = vec![0.5; 20];
        let x = ParamPoint::scalar(5.0);
        assert_eq!(p.transport_select(&x, &Decision(q.clone()), &x).unwrap().0, q);
        let cut = p.transport_select(&x, &Decision(q), &ParamPoint::scalar(2.5)).unwrap().0;
        assert!(cut[..10].iter().all(|&v| v == 0.5));
        assert!(cut[10..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn selection_lipschitz_on_random_samples() {
        let p = small();
        let l_g = p.constants().l_g;
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x: f64 = rng.random_range(0.0..6.0);
            let raw: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..0.5)).collect();
            let q = p.truncate(&raw, x);
            let xn = rng.random_range(0.0..6.0);
            let (xp, xnp) = (ParamPoint::scalar(x), ParamPoint::scalar(xn));
            let qn = p.transport_select(&xp, &Decision(q.clone()), &xnp).unwrap();
            assert!(p.feasible(&xnp, &qn));
            let shift = p.g_eval(&xnp, &qn).sub(&p.g_eval(&xp, &Decision(q))).norm();
            if x != xn {
                worst = worst.max(shift / (x - xn).abs());
            }
        }
        assert!(worst <= l_g, "{worst} > {l_g}");
    }

    #[test]
    fn constants_dominate_samples() {
        let p = small();
        let k = p.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut g_all = Vec::new();
        for _ in 0..2000 {
            let q: Vec<f64> = (0..20).map(|_| if rng.random_bool(0.3) { 0.5 } else { rng.random_range(0.0..0.5) }).collect();
            g_all.push(p.g_eval(&ParamPoint::scalar(10.0), &Decision(q)));
        }
        for pair in g_all.windows(2) {
            assert!(pair[0].norm() <= k.m);
            assert!(pair[0].sub(&pair[1]).norm_sq() <= k.d);
            let beta = pair[0].lerp(&pair[1], 0.3);
            assert!(p.f_grad(&beta).norm() <= k.c + 1e-12);
            let lhs = p.f_grad(&pair[0]).sub(&p.f_grad(&pair[1])).norm();
            assert!(lhs <= k.l * pair[0].sub(&pair[1]).norm() + 1e-12);
        }
        assert!(k.d <= 4.0 * k.m * k.m);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = small();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let v: Vec<f64> = (0..21).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta = AggregateVector::new(v, p.h_weights());
        let grad = p.f_grad(&beta);
        let h = 1e-6;
        for i in 0..21 {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up.values[i] += h;
            dn.values[i] -= h;
            // the Riesz representative is the partial derivative divided by the weight
            let fd = (p.f_value(&up) - p.f_value(&dn)) / (2.0 * h) / p.h_weights()[i];
            assert!((fd - grad.values[i]).abs() <= 1e-6 * (1.0 + grad.values[i].abs()));
        }
    }

    proptest! {
        #[test]
        fn fenchel_young(prod in proptest::collection::vec(0.0..0.5f64, 20), lam in proptest::collection::vec(-1.0..1.0f64, 20)) {
            let p = small();
            let beta = AggregateVector::new(std::iter::once(-0.3).chain(prod).collect(), p.h_weights());
            let lambda = p.price_signal(&lam);
            prop_assert!(p.f_value(&beta) + p.f_conj(&lambda).unwrap() >= lambda.dot(&beta) - 1e-12);
            let tight = p.f_grad(&beta);
            let gap = p.f_value(&beta) + p.f_conj(&tight).unwrap() - tight.dot(&beta);
            prop_assert!(gap.abs() <= 1e-8);
        }

        #[test]
        fn best_response_feasible(stock in 0.0..8.0f64, prod in proptest::collection::vec(0.0..0.5f64, 20)) {
            let p = small();
            let q = p.extraction(&p.price_signal(&prod), stock).unwrap().q;
            let mu = EmpiricalMeasure::new(Space::Z, vec![Atom::on_z(ParamPoint::scalar(stock), Decision(q), 1.0)]).unwrap();
            prop_assert!(aggregate(&p, &mu).is_ok());
        }
    }
}
