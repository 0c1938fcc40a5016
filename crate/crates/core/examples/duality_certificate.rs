//! Certificates without knowing the optimum.
//!
//! Every Frank-Wolfe iterate comes with a multiplier `λ = ∇f(∫ g dμ)` whose dual
//! value bounds the optimum from below, so `objective − lower bound` is a
//! suboptimality guarantee.
//!
//! The finite-choice model has a mixed optimum that FW approaches from the
//! outside; on the resource model, where best responses are unique, dual
//! descent closes the gap to round-off.

use mfo::models::{FiniteChoiceProblem, ResourceInstance};
use mfo::problem;
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers::{self, SolverConfig};

fn main() -> mfo::Result<()> {
    let p = FiniteChoiceProblem::two_agent_example();
    let fw = solvers::fw_solve(&p, &p.marginal(), &SolverConfig { iterations: 1024, ..Default::default() })?;
    println!("{:>5} {:>14} {:>14} {:>12}", "k", "objective", "lower bound", "gap");
    for r in fw.records.iter().filter(|r| r.k.is_power_of_two()) {
        println!("{:>5} {:>14.10} {:>14.10} {:>12.3e}", r.k, r.objective, r.objective - r.gap, r.gap);
    }
    println!("best lower bound over the run: {:.10}", fw.best_lower_bound());
    for a in fw.measure.atoms() {
        println!("  agent {:?} plays {:?} with weight {:.4}", a.x.0, a.decision().0, a.w);
    }

    let r = ResourceInstance::new(Default::default())?;
    let m = quantize::quantize_grid(&SourceDistribution::Exponential { rate: 1.0 }, 25)?;
    let dd = solvers::dual_descent(&r, &m, 0.8, 1e-13, 1000)?;
    println!("\nresource, dual descent: {} steps", dd.iterations);
    println!("  primal  f(∫ g dμ) = {:.15}", dd.certificate.primal_value);
    println!("  dual       −D(λ)  = {:.15}", -problem::dual_value(&r, &dd.certificate.lambda, &m)?);
    println!("  gap               = {:.2e}", dd.certificate.gap);
    Ok(())
}
