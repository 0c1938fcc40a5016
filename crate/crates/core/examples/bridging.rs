//! Reuse a solution computed for one population on a nearby population.
//!
//! Solve the resource game for 30 sampled stocks, then move the solution onto a
//! second sample by optimal transport. The certified bound `eta` needs no new
//! solve; the FW gap of the moved measure is printed for comparison, together
//! with the error against a fresh solve.

use mfo::experiment;
use mfo::models::ResourceInstance;
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers::{self, SolverConfig};
use mfo::transport::MetricSpec;

fn main() -> mfo::Result<()> {
    let p = ResourceInstance::new(Default::default())?;
    let dist = SourceDistribution::Exponential { rate: 1.0 };
    let m0 = quantize::quantize_sample(&dist, 30, 1)?;
    let mu0 = solvers::fw_solve(&p, &m0, &SolverConfig { iterations: 300, ..Default::default() })?;
    println!("source: objective {:.6}, gap {:.2e}", mu0.objective(), mu0.gap());

    println!("\n{:>5} {:>10} {:>10} {:>10} {:>12}", "seed", "d1", "eta", "gap", "true error");
    for seed in 2..8 {
        let m1 = quantize::quantize_sample(&dist, 30, seed)?;
        let b = experiment::bridge_run(&p, &MetricSpec::Euclidean, &mu0.measure, &m1, Some(mu0.gap()))?;
        let fresh = solvers::dual_descent(&p, &m1, 0.8, 1e-10, 5000)?;
        let err = b.objective - fresh.certificate.primal_value;
        println!("{seed:>5} {:>10.4} {:>10.4} {:>10.2e} {err:>12.2e}", b.d1, b.eta, b.gap);
    }
    Ok(())
}
