//! Stochastic Frank-Wolfe updates a random subset of agents per step.
//! Each step costs `n_k` oracle calls instead of `N`, and with `n_k = N` the
//! method reduces to a pure-strategy variant of Frank-Wolfe.

use std::time::Instant;

use mfo::models::ResourceInstance;
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers::{self, SampleSchedule, SolverConfig};

fn main() -> mfo::Result<()> {
    let p = ResourceInstance::new(Default::default())?;
    let m = quantize::quantize_sample(&SourceDistribution::Exponential { rate: 1.0 }, 60, 3)?;
    let reference = solvers::dual_descent(&p, &m, 0.8, 1e-11, 5000)?;
    let val = reference.certificate.lower_bound();
    let k = 200;

    println!("{:<12} {:>14} {:>12} {:>10}", "method", "suboptimality", "gap", "ms");
    let start = Instant::now();
    let fw = solvers::fw_solve(&p, &m, &SolverConfig { iterations: k, ..Default::default() })?;
    println!("{:<12} {:>14.3e} {:>12.3e} {:>10}", "fw", fw.objective() - val, fw.gap(), start.elapsed().as_millis());

    for n_k in [1, 5, 20, 60] {
        let cfg = SolverConfig { iterations: k, samples: SampleSchedule::Constant(n_k), seed: 9, ..Default::default() };
        let start = Instant::now();
        let sfw = solvers::sfw_solve(&p, &m, &cfg)?;
        let label = format!("sfw n_k={n_k}");
        println!("{label:<12} {:>14.3e} {:>12.3e} {:>10}", sfw.objective() - val, sfw.gap(), start.elapsed().as_millis());
    }
    Ok(())
}
