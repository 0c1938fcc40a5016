//! Minimal-time evacuation of a corridor. Agents start on `[0, 0.2]` and
//! walk to the exit at 1; crowding slows everyone down.
//!
//! With `alpha = 0` everybody walks at full speed. With congestion switched on,
//! the agents nearest the back wait, and their mean arrival step moves later.

use mfo::models::congestion::CongestionParams;
use mfo::models::CongestionInstance;
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers::{self, SolverConfig};
use mfo::EmpiricalMeasure;

fn mean_arrival(p: &CongestionInstance, mu: &EmpiricalMeasure, range: std::ops::Range<f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for a in mu.atoms().iter().filter(|a| range.contains(&a.x.value())) {
        let step = p.arrival_step(&a.decision().0).unwrap_or(p.params().steps + 1);
        num += a.w * step as f64;
        den += a.w;
    }
    num / den
}

fn main() -> mfo::Result<()> {
    let crowd = quantize::quantize_grid(&SourceDistribution::Uniform { a: 0.0, b: 0.2 }, 40)?;
    let cfg = SolverConfig { iterations: 200, ..Default::default() };

    println!("{:>6} {:>12} {:>10} {:>14} {:>14}", "alpha", "objective", "gap", "back decile", "front decile");
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let p = CongestionInstance::new(CongestionParams { alpha, ..Default::default() })?;
        let rep = solvers::fw_solve(&p, &crowd, &cfg)?;
        let back = mean_arrival(&p, &rep.measure, 0.0..0.02);
        let front = mean_arrival(&p, &rep.measure, 0.18..0.2);
        println!("{alpha:>6.1} {:>12.6} {:>10.2e} {back:>14.3} {front:>14.3}", rep.objective(), rep.gap());
    }
    Ok(())
}
