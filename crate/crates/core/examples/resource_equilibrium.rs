//! Producers with exponentially distributed stocks compete on a market with
//! linear inverse demand. Solves to high accuracy, then prints the aggregate
//! production path and when each producer runs dry.
//!
//! ```text
//! cargo run --release --example resource_equilibrium -- 40
//! ```

use mfo::experiment::aggregate_production;
use mfo::models::resource::ResourceParams;
use mfo::models::ResourceInstance;
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers;

fn main() -> mfo::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let p = ResourceInstance::new(ResourceParams { steps: 40, ..Default::default() })?;
    let stocks = quantize::quantize_grid(&SourceDistribution::Exponential { rate: 1.0 }, n)?;

    let sol = solvers::dual_descent(&p, &stocks, 0.8, 1e-10, 5000)?;
    println!("{} dual steps, gap {:.2e}, objective {:.8}", sol.iterations, sol.certificate.gap, sol.certificate.primal_value);

    let q = aggregate_production(&p, &sol.measure);
    println!("\n  t      Q_t");
    for (t, v) in q.iter().enumerate().step_by(4) {
        println!("{:>5.2} {v:>8.4}", t as f64 * p.dt());
    }

    println!("\n stock  depleted at");
    for a in sol.measure.atoms() {
        let path = p.stock_path(a.x.value(), &a.decision().0);
        let step = path.iter().position(|&s| s <= 1e-9);
        let when = step.map_or("never".to_string(), |s| format!("{:.2}", s as f64 * p.dt()));
        println!("{:>6.3}  {when}", a.x.value());
    }
    Ok(())
}
