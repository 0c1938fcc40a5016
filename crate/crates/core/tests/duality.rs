//! Dual problem, value function and model contracts checked across crates' public API.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfo::models::congestion::CongestionParams;
use mfo::models::resource::ResourceParams;
use mfo::models::{CongestionInstance, FiniteChoiceProblem, ResourceInstance, TrafficNetwork};
use mfo::problem::{self, AggregateVector};
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers;
use mfo::transport::{self, MetricSpec};
use mfo::{EmpiricalMeasure, MfoProblem, ParamPoint};

const EXP1: SourceDistribution = SourceDistribution::Exponential { rate: 1.0 };

fn resource(steps: usize) -> ResourceInstance {
    ResourceInstance::new(ResourceParams { horizon: 10.0, steps, discount: 1.0, epsilon: 1.0 }).unwrap()
}

fn small_congestion() -> CongestionInstance {
    CongestionInstance::new(CongestionParams { steps: 8, grid_points: 61, ..Default::default() }).unwrap()
}

/// `λ = (1, λ₂)` with `λ₂` uniform in `[−1, 1]`: the effective domain of the resource conjugate.
fn resource_lambda(p: &ResourceInstance, rng: &mut ChaCha8Rng) -> AggregateVector {
    let mut lam = p.price_signal(&vec![0.0; p.steps()]);
    for v in &mut lam.values[1..] {
        *v = rng.random_range(-1.0..1.0);
    }
    lam
}

fn random_beta(weights: std::sync::Arc<[f64]>, rng: &mut ChaCha8Rng) -> AggregateVector {
    let values = (0..weights.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    AggregateVector::new(values, weights)
}

fn check_gradient<P: MfoProblem>(p: &P, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let beta = random_beta(p.h_weights(), &mut rng);
        let grad = p.f_grad(&beta);
        let mut dir = random_beta(p.h_weights(), &mut rng);
        dir.values.iter_mut().for_each(|v| *v -= 0.5);
        let h = 1e-5;
        let mut plus = beta.clone();
        plus.add_scaled(h, &dir);
        let mut minus = beta.clone();
        minus.add_scaled(-h, &dir);
        let fd = (p.f_value(&plus) - p.f_value(&minus)) / (2.0 * h);
        let exact = grad.dot(&dir);
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{}: {fd} vs {exact}", p.name());
    }
}

#[test]
fn gradients_match_central_differences() {
    check_gradient(&resource(10), 1);
    check_gradient(&small_congestion(), 2);
    check_gradient(&TrafficNetwork::grid(), 3);
    check_gradient(&FiniteChoiceProblem::two_agent_example(), 4);
}

#[test]
fn diameter_below_four_m_squared() {
    let constants = [
        resource(50).constants(),
        small_congestion().constants(),
        TrafficNetwork::grid().constants(),
        TrafficNetwork::pigou().constants(),
        FiniteChoiceProblem::two_agent_example().constants(),
    ];
    for k in constants {
        assert!(k.d <= 4.0 * k.m * k.m + 1e-12, "{k:?}");
    }
}

#[test]
fn fenchel_young_on_congestion() {
    let p = small_congestion();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let beta = random_beta(p.h_weights(), &mut rng);
        let grad = p.f_grad(&beta);
        let tight = p.f_value(&beta) + p.f_conj(&grad).unwrap() - grad.dot(&beta);
        assert!(tight.abs() <= 1e-8);
        let mut lam = random_beta(p.h_weights(), &mut rng);
        lam.values[0] = 1.0;
        assert!(p.f_value(&beta) + p.f_conj(&lam).unwrap() >= lam.dot(&beta) - 1e-12);
    }
}

#[test]
fn dual_is_strongly_convex() {
    let p = resource(20);
    let l = p.constants().l;
    let m = quantize::quantize_sample(&EXP1, 8, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..30 {
        let (a, b) = (resource_lambda(&p, &mut rng), resource_lambda(&p, &mut rng));
        let mid = a.lerp(&b, 0.5);
        let d = |lam: &AggregateVector| problem::dual_value(&p, lam, &m).unwrap();
        let gap = 0.5 * d(&a) + 0.5 * d(&b) - d(&mid);
        assert!(gap >= a.sub(&b).norm_sq() / (8.0 * l) - 1e-10, "{gap}");
    }
}

#[test]
fn weak_duality_for_random_multipliers() {
    let p = resource(20);
    let m = quantize::quantize_sample(&EXP1, 8, 5).unwrap();
    let sol = solvers::dual_descent(&p, &m, 0.8, 1e-11, 2000).unwrap();
    let val = sol.certificate.primal_value;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..30 {
        let lam = resource_lambda(&p, &mut rng);
        assert!(-problem::dual_value(&p, &lam, &m).unwrap() <= val + 1e-10);
    }
}

#[test]
fn zero_gap_means_best_responses_on_the_support() {
    let p = resource(20);
    let m = quantize::quantize_sample(&EXP1, 10, 6).unwrap();
    let sol = solvers::dual_descent(&p, &m, 0.8, 1e-12, 2000).unwrap();
    let cert = problem::fw_gap(&p, &sol.measure).unwrap();
    assert!(cert.gap <= 1e-9);
    for a in sol.measure.atoms() {
        let br = p.best_response(&cert.lambda, &a.x).unwrap();
        assert!(br.approx_eq(a.decision(), 1e-5));
    }
}

#[test]
fn u_lambda_lipschitz_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = resource(20);
    let k = p.constants();
    for _ in 0..50 {
        let (l1, l2) = (resource_lambda(&p, &mut rng), resource_lambda(&p, &mut rng));
        let (x1, x2) = (ParamPoint::scalar(rng.random_range(0.0..4.0)), ParamPoint::scalar(rng.random_range(0.0..4.0)));
        let (u1, _) = problem::u_lambda(&p, &l1, &x1).unwrap();
        let (u2, _) = problem::u_lambda(&p, &l2, &x2).unwrap();
        let bound = k.l_g * l1.norm() * (x1.value() - x2.value()).abs() + k.m * l1.sub(&l2).norm();
        assert!((u1 - u2).abs() <= bound + 1e-7);
    }
    let net = TrafficNetwork::grid();
    let k = net.constants();
    let metric = net.metric();
    for _ in 0..50 {
        let l1 = AggregateVector::new((0..10).map(|_| rng.random_range(0.0..2.0)).collect(), net.h_weights());
        let l2 = AggregateVector::new((0..10).map(|_| rng.random_range(0.0..2.0)).collect(), net.h_weights());
        let (a, b) = (rng.random_range(0..3), rng.random_range(0..3));
        let (x1, x2) = (net.od_point(a), net.od_point(b));
        let (u1, _) = problem::u_lambda(&net, &l1, &x1).unwrap();
        let (u2, _) = problem::u_lambda(&net, &l2, &x2).unwrap();
        let bound = k.l_g * l1.norm() * metric.distance(&x1, &x2) + k.m * l1.sub(&l2).norm();
        assert!((u1 - u2).abs() <= bound + 1e-7);
    }
}

#[test]
fn dual_stability_across_marginals() {
    let p = resource(20);
    let k = p.constants();
    let marginals: Vec<EmpiricalMeasure> = (0..6).map(|s| quantize::quantize_sample(&EXP1, 20, 30 + s).unwrap()).collect();
    let sols: Vec<_> = marginals.iter().map(|m| solvers::dual_descent(&p, m, 0.8, 1e-12, 2000).unwrap()).collect();
    let c_star = sols.iter().map(|s| s.certificate.lambda.norm()).fold(0.0, f64::max);
    for i in 0..marginals.len() {
        for j in 0..i {
            let d1 = transport::wasserstein1(&marginals[i], &marginals[j], &MetricSpec::Euclidean).unwrap();
            let diff = sols[i].certificate.lambda.sub(&sols[j].certificate.lambda).norm_sq();
            let slack = 2.0 * k.l * (sols[i].certificate.gap + sols[j].certificate.gap);
            assert!(diff <= 2.0 * c_star * k.l_g * k.l * d1 + slack, "{diff} vs d₁ = {d1}");
        }
    }
}

#[test]
fn more_stock_lowers_the_value() {
    let p = resource(20);
    let m0 = EmpiricalMeasure::uniform_x(vec![ParamPoint::scalar(0.5), ParamPoint::scalar(1.0)]).unwrap();
    let m1 = EmpiricalMeasure::uniform_x(vec![ParamPoint::scalar(1.0), ParamPoint::scalar(2.0)]).unwrap();
    let sol = solvers::dual_descent(&p, &m0, 0.8, 1e-12, 2000).unwrap();
    let v = problem::value_directional_derivative(&p, &m0, &m1, &sol.certificate.lambda).unwrap();
    assert!(v <= 0.0);
    assert_eq!(problem::value_directional_derivative(&p, &m0, &m0, &sol.certificate.lambda).unwrap(), 0.0);
}

#[test]
fn swapped_weights_match_finite_difference() {
    let p = resource(10);
    let k = p.constants();
    let pts = [ParamPoint::scalar(0.7), ParamPoint::scalar(2.5)];
    let with = |w: f64| {
        EmpiricalMeasure::new(
            mfo::Space::X,
            vec![mfo::Atom::on_x(pts[0].clone(), w), mfo::Atom::on_x(pts[1].clone(), 1.0 - w)],
        )
        .unwrap()
    };
    let (m0, m1) = (with(0.3), with(0.7));
    let t = 1e-2;
    let mt = m0.mix(&m1, t).unwrap();
    let s0 = solvers::dual_descent(&p, &m0, 0.8, 1e-13, 5000).unwrap();
    let st = solvers::dual_descent(&p, &mt, 0.8, 1e-13, 5000).unwrap();
    let slope = (st.certificate.primal_value - s0.certificate.primal_value) / t;
    let v = problem::value_directional_derivative(&p, &m0, &m1, &s0.certificate.lambda).unwrap();
    let tol = k.l * k.d * t / 2.0 + (s0.certificate.gap + st.certificate.gap) / t;
    assert!((slope - v).abs() <= tol, "{slope} vs {v}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gap_is_nonnegative_and_bounds_suboptimality(seed in 0u64..1000, k in 1usize..30) {
        let p = resource(10);
        let m = quantize::quantize_sample(&EXP1, 6, seed).unwrap();
        let rep = solvers::fw_solve(&p, &m, &solvers::SolverConfig { iterations: k, ..Default::default() }).unwrap();
        let val = solvers::dual_descent(&p, &m, 0.8, 1e-12, 2000).unwrap();
        let lower = val.certificate.primal_value - val.certificate.gap;
        for r in &rep.records {
            prop_assert!(r.gap >= -1e-12);
        }
        prop_assert!(rep.objective() - lower <= rep.gap() + 1e-10);
    }
}
