//! Agents with finitely many options and a quadratic aggregate cost.
//!
//! Agent `i` sits at `x = i` and picks option `o`, contributing the vector
//! `g(i, o) = options[i][o]`. The cost is `f(β) = ½‖β − c‖²`, so the mixed
//! problem is a small convex QP that can be checked by enumeration.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::{Atom, Decision, EmpiricalMeasure, ParamPoint, Space};
use crate::problem::{AggregateVector, Constants, MfoProblem};

#[derive(Clone, Debug)]
pub struct FiniteChoiceProblem {
    options: Vec<Vec<Vec<f64>>>,
    target: Vec<f64>,
    weights: Arc<[f64]>,
    population: Vec<f64>,
}

impl FiniteChoiceProblem {
    /// `options[i]` lists the `g` vectors available to agent `i`; `population[i]` is its mass.
    pub fn new(options: Vec<Vec<Vec<f64>>>, target: Vec<f64>, population: Vec<f64>) -> Result<Self> {
        let dim = target.len();
        if options.is_empty() || options.len() != population.len() {
            return Err(Error::invalid("need one population weight per agent"));
        }
        for (i, opts) in options.iter().enumerate() {
            if opts.is_empty() {
                return Err(Error::invalid(format!("agent {i} has no options")));
            }
            if opts.iter().any(|g| g.len() != dim || g.iter().any(|v| !v.is_finite())) {
                return Err(Error::invalid(format!("agent {i} has an option of the wrong dimension")));
            }
        }
        let total: f64 = population.iter().sum();
        if (total - 1.0).abs() > 1e-12 || population.iter().any(|&w| w < 0.0) {
            return Err(Error::invalid("population weights must form a probability vector"));
        }
        Ok(FiniteChoiceProblem { options, target, weights: Arc::from(vec![1.0; dim]), population })
    }

    /// Two agents in the plane with two options each.
    pub fn two_agent_example() -> Self {
        FiniteChoiceProblem::new(
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![1.0, 1.0], vec![0.0, 0.5]]],
            vec![0.6, 0.3],
            vec![0.5, 0.5],
        )
        .expect("valid example")
    }

    pub fn agent_point(&self, i: usize) -> ParamPoint {
        ParamPoint::scalar(i as f64)
    }

    pub fn option_decision(&self, o: usize) -> Decision {
        Decision(vec![o as f64])
    }

    pub fn num_options(&self, i: usize) -> usize {
        self.options[i].len()
    }

    /// The parameter distribution `m`.
    pub fn marginal(&self) -> EmpiricalMeasure {
        let atoms = self.population.iter().enumerate().map(|(i, &w)| Atom::on_x(self.agent_point(i), w)).collect();
        EmpiricalMeasure::new(Space::X, atoms).expect("population validated")
    }

    /// The measure putting probability `probs[i][o]` on option `o` of agent `i`.
    pub fn mixed_measure(&self, probs: &[Vec<f64>]) -> Result<EmpiricalMeasure> {
        let mut atoms = Vec::new();
        for (i, p) in probs.iter().enumerate() {
            for (o, &q) in p.iter().enumerate() {
                if q > 0.0 {
                    atoms.push(Atom::on_z(self.agent_point(i), self.option_decision(o), self.population[i] * q));
                }
            }
        }
        EmpiricalMeasure::new(Space::Z, atoms)
    }

    fn agent_index(&self, x: &ParamPoint) -> Option<usize> {
        let v = *x.0.first()?;
        if x.0.len() != 1 || v < 0.0 || v.fract() != 0.0 || v as usize >= self.options.len() {
            return None;
        }
        Some(v as usize)
    }

    fn option_index(&self, i: usize, y: &Decision) -> Option<usize> {
        let v = *y.0.first()?;
        if y.0.len() != 1 || v < 0.0 || v.fract() != 0.0 || v as usize >= self.options[i].len() {
            return None;
        }
        Some(v as usize)
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
    }

    fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let one_way = |p: &[Vec<f64>], q: &[Vec<f64>]| {
            p.iter().map(|u| q.iter().map(|v| Self::dist(u, v)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        one_way(a, b).max(one_way(b, a))
    }
}

impl MfoProblem for FiniteChoiceProblem {
    fn name(&self) -> &str {
        "finite"
    }

    fn h_weights(&self) -> Arc<[f64]> {
        self.weights.clone()
    }

    fn g_eval(&self, x: &ParamPoint, y: &Decision) -> AggregateVector {
        let i = self.agent_index(x).expect("unknown agent");
        let o = self.option_index(i, y).expect("unknown option");
        AggregateVector::new(self.options[i][o].clone(), self.weights.clone())
    }

    fn f_value(&self, beta: &AggregateVector) -> f64 {
        0.5 * beta.values.iter().zip(&self.target).map(|(b, c)| (b - c) * (b - c)).sum::<f64>()
    }

    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector {
        let values = beta.values.iter().zip(&self.target).map(|(b, c)| b - c).collect();
        AggregateVector::new(values, self.weights.clone())
    }

    fn f_conj(&self, lambda: &AggregateVector) -> Result<f64> {
        Ok(lambda.values.iter().zip(&self.target).map(|(l, c)| 0.5 * l * l + l * c).sum())
    }

    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> Result<Decision> {
        let i = self.agent_index(x).ok_or_else(|| Error::invalid(format!("unknown agent {:?}", x.0)))?;
        let mut best = (0, f64::INFINITY);
        for (o, g) in self.options[i].iter().enumerate() {
            let v: f64 = lambda.values.iter().zip(g).map(|(l, gv)| l * gv).sum();
            if v < best.1 {
                best = (o, v);
            }
        }
        Ok(self.option_decision(best.0))
    }

    fn feasible(&self, x: &ParamPoint, y: &Decision) -> bool {
        self.agent_index(x).is_some_and(|i| self.option_index(i, y).is_some())
    }

    fn transport_select(&self, x: &ParamPoint, y: &Decision, x_new: &ParamPoint) -> Result<Decision> {
        let i = self.agent_index(x).ok_or_else(|| Error::invalid("unknown source agent"))?;
        let j = self.agent_index(x_new).ok_or_else(|| Error::invalid("unknown target agent"))?;
        let o = self.option_index(i, y).ok_or_else(|| Error::invalid("unknown option"))?;
        if i == j {
            return Ok(y.clone());
        }
        let from = &self.options[i][o];
        let mut best = (0, f64::INFINITY);
        for (p, g) in self.options[j].iter().enumerate() {
            let d = Self::dist(from, g);
            if d < best.1 {
                best = (p, d);
            }
        }
        Ok(self.option_decision(best.0))
    }

    fn constants(&self) -> Constants {
        let all: Vec<&Vec<f64>> = self.options.iter().flatten().collect();
        let zero = vec![0.0; self.target.len()];
        let m = all.iter().map(|g| Self::dist(g, &zero)).fold(0.0, f64::max);
        let mut d: f64 = 0.0;
        for a in &all {
            for b in &all {
                d = d.max(Self::dist(a, b).powi(2));
            }
        }
        let reach: f64 = self
            .options
            .iter()
            .zip(&self.population)
            .map(|(opts, w)| w * opts.iter().map(|g| Self::dist(g, &zero)).fold(0.0, f64::max))
            .sum();
        let c = reach + Self::dist(&self.target, &zero);
        let mut l_g: f64 = 0.0;
        for i in 0..self.options.len() {
            for j in 0..i {
                l_g = l_g.max(Self::hausdorff(&self.options[i], &self.options[j]) / (i - j) as f64);
            }
        }
        Constants { l: 1.0, m, d, c, l_g }
    }
}
