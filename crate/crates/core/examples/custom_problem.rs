//! Implementing [`MfoProblem`] for a model of your own.
//!
//! Residents spread along `[0, 1]` each pick one of three charging stations.
//! A resident at `x` choosing station `j` contributes one unit of load to `j`
//! and walks `|x − s_j|`. The planner minimizes
//!
//! ```text
//!     f(β) = (c/2) Σ_j β_j² + β_walk
//! ```
//!
//! so stations fill up until the marginal crowding cost balances the walk.

use std::sync::Arc;

use mfo::problem::{self, AggregateVector, Constants, MfoProblem};
use mfo::quantize::{self, SourceDistribution};
use mfo::solvers::{self, SolverConfig};
use mfo::transport;
use mfo::{Decision, Error, ParamPoint};

struct Stations {
    sites: Vec<f64>,
    crowding: f64,
    /// Residents live on `[0, reach]`.
    reach: f64,
    weights: Arc<[f64]>,
}

impl Stations {
    fn new(sites: Vec<f64>, crowding: f64, reach: f64) -> Self {
        let weights = Arc::from(vec![1.0; sites.len() + 1]);
        Stations { sites, crowding, reach, weights }
    }

    fn choice(&self, y: &Decision) -> Option<usize> {
        let j = y.0.first()?.round();
        (y.0.len() == 1 && j >= 0.0 && (j as usize) < self.sites.len() && y.0[0] == j).then_some(j as usize)
    }

    fn walk_share(&self) -> usize {
        self.sites.len()
    }
}

impl MfoProblem for Stations {
    fn name(&self) -> &str {
        "stations"
    }

    fn h_weights(&self) -> Arc<[f64]> {
        self.weights.clone()
    }

    fn g_eval(&self, x: &ParamPoint, y: &Decision) -> AggregateVector {
        let j = self.choice(y).expect("not a station");
        let mut v = vec![0.0; self.sites.len() + 1];
        v[j] = 1.0;
        v[self.walk_share()] = (x.value() - self.sites[j]).abs();
        AggregateVector::new(v, self.weights.clone())
    }

    fn f_value(&self, beta: &AggregateVector) -> f64 {
        let (load, walk) = beta.values.split_at(self.walk_share());
        0.5 * self.crowding * load.iter().map(|b| b * b).sum::<f64>() + walk[0]
    }

    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector {
        let mut v: Vec<f64> = beta.values.iter().map(|b| self.crowding * b).collect();
        v[self.walk_share()] = 1.0;
        AggregateVector::new(v, self.weights.clone())
    }

    fn f_conj(&self, lambda: &AggregateVector) -> mfo::Result<f64> {
        let (load, walk) = lambda.values.split_at(self.walk_share());
        if walk[0] != 1.0 {
            return Ok(f64::INFINITY);
        }
        Ok(load.iter().map(|l| l * l).sum::<f64>() / (2.0 * self.crowding))
    }

    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> mfo::Result<Decision> {
        let price = |j: usize| lambda.values[j] + lambda.values[self.walk_share()] * (x.value() - self.sites[j]).abs();
        let best = (0..self.sites.len()).min_by(|&a, &b| price(a).total_cmp(&price(b)));
        best.map(|j| Decision(vec![j as f64])).ok_or_else(|| Error::InvalidArgument("no stations".into()))
    }

    fn feasible(&self, _x: &ParamPoint, y: &Decision) -> bool {
        self.choice(y).is_some()
    }

    fn transport_select(&self, _x: &ParamPoint, y: &Decision, _x_new: &ParamPoint) -> mfo::Result<Decision> {
        Ok(y.clone())
    }

    fn constants(&self) -> Constants {
        let walk = self.sites.iter().map(|s| s.max(self.reach - s)).fold(0.0, f64::max);
        Constants {
            l: self.crowding,
            m: (1.0 + walk * walk).sqrt(),
            d: 2.0 + walk * walk,
            c: (self.crowding * self.crowding + 1.0).sqrt(),
            l_g: 1.0,
        }
    }
}

fn main() -> mfo::Result<()> {
    let p = Stations::new(vec![0.1, 0.5, 0.9], 0.8, 1.2);
    let town = quantize::quantize_grid(&SourceDistribution::Uniform { a: 0.0, b: 1.0 }, 50)?;
    let rep = solvers::fw_solve(&p, &town, &SolverConfig { iterations: 500, ..Default::default() })?;
    let beta = problem::aggregate(&p, &rep.measure)?;
    println!("objective {:.6}, gap {:.2e}", rep.objective(), rep.gap());
    println!("loads {:.4?}, mean walk {:.4}", &beta.values[..3], beta.values[3]);

    // A town that grew to the east: reuse the plan instead of solving again.
    let grown = quantize::quantize_grid(&SourceDistribution::Uniform { a: 0.0, b: 1.2 }, 50)?;
    let moved = transport::bridge(&rep.measure, &grown, &p, &p.metric())?;
    let k = p.constants();
    let cert = problem::fw_gap(&p, &moved.measure)?;
    println!(
        "moved by d1 = {:.3}: objective {:.6}, certified within {:.4}, observed gap {:.2e}",
        moved.d1,
        cert.primal_value,
        rep.gap() + 2.0 * k.stability_factor() * moved.d1,
        cert.gap
    );
    Ok(())
}
