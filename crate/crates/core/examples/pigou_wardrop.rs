//! Pigou's two-road network: Frank-Wolfe converges to the Wardrop split where
//! every used road has the same travel time.
//!
//! ```text
//! cargo run --example pigou_wardrop
//! ```

use mfo::models::TrafficNetwork;
use mfo::problem;
use mfo::solvers::{self, SolverConfig};

fn main() -> mfo::Result<()> {
    let net = TrafficNetwork::pigou();
    let demand = net.uniform_demand();
    let report = solvers::fw_solve(&net, &demand, &SolverConfig { iterations: 400, ..Default::default() })?;

    println!("{:>5} {:>14} {:>12}", "k", "objective", "gap");
    for r in report.records.iter().filter(|r| r.k.is_power_of_two() || r.k == report.records.len()) {
        println!("{:>5} {:>14.9} {:>12.3e}", r.k, r.objective, r.gap);
    }

    let loads = problem::aggregate(&net, &report.measure)?;
    let times = net.edge_times(&loads.values);
    println!();
    for (i, (q, t)) in loads.values.iter().zip(&times).enumerate() {
        println!("road {i}: flow {q:.4}, travel time {t:.4}");
    }
    Ok(())
}
