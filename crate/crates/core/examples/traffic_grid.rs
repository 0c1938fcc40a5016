//! Three origin-destination pairs on a 3×3 grid with BPR latencies.
//! Prints each used path with its mass and cost next to the cheapest cost.

use mfo::models::TrafficNetwork;
use mfo::solvers::{self, SolverConfig};

fn main() -> mfo::Result<()> {
    let net = TrafficNetwork::grid();
    let cfg = SolverConfig { iterations: 3000, gap_tol: Some(1e-7), ..Default::default() };
    let report = solvers::fw_solve(&net, &net.uniform_demand(), &cfg)?;
    println!("stopped after {} iterations, gap {:.2e}", report.records.len(), report.gap());

    for (od, paths) in net.path_report(&report.measure)?.iter().enumerate() {
        let (o, d) = net.ods()[od];
        let best = paths.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        println!("\n{o} -> {d}  (cheapest {best:.5})");
        for (i, &(mass, cost)) in paths.iter().enumerate().filter(|(_, p)| p.0 > 1e-6) {
            println!("  {:<20} mass {mass:.4}  cost {cost:.5}", format!("{:?}", net.paths(od)[i]));
        }
    }
    Ok(())
}
