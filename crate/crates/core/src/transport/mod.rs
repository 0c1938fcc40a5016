//! Exact optimal transport between finitely supported marginals, the gluing
//! construction, and the bridging method which carries a solution for one
//! marginal over to another.
//!
//! Bridging `μ₀ ∈ P_{m₀}(Z)` to a new marginal `m₁`:
//!
//! 1. solve the transport problem between `m₀ = π₁#μ₀` and `m₁` (cost `d₁(m₀, m₁)`);
//! 2. glue `μ₀` with the plan `ρ` into `ν ∈ P(Z × X)`, `ν = Σ μ₀(x, y) δ_{(x,y)} ⊗ ρ_x`;
//! 3. push `ν` forward by the problem's selection `(x, y, x') ↦ (x', s(x, y, x'))`.

mod hungarian;
mod metric;
mod simplex;

pub use metric::MetricSpec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{merge_atoms, Atom, Decision, EmpiricalMeasure, ParamPoint, Space};
use crate::problem::MfoProblem;

/// Tolerance on coupling marginals.
pub const MARGINAL_TOL: f64 = 1e-9;

/// A transport plan between two finitely supported measures on `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// `(source index, target index, mass)`, sorted by indices, mass > 0.
    pub entries: Vec<(usize, usize, f64)>,
    pub source: EmpiricalMeasure,
    pub target: EmpiricalMeasure,
    /// `Σ mass · d(source, target)`.
    pub cost: f64,
}

#[derive(Serialize, Deserialize)]
struct CouplingJson {
    cost: f64,
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// Largest deviation of the row sums from the source weights.
    pub fn row_residual(&self) -> f64 {
        let mut rows = vec![0.0; self.source.len()];
        for &(i, _, f) in &self.entries {
            rows[i] += f;
        }
        rows.iter().zip(self.source.atoms()).map(|(r, a)| (r - a.w).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation of the column sums from the target weights.
    pub fn col_residual(&self) -> f64 {
        let mut cols = vec![0.0; self.target.len()];
        for &(_, j, f) in &self.entries {
            cols[j] += f;
        }
        cols.iter().zip(self.target.atoms()).map(|(c, a)| (c - a.w).abs()).fold(0.0, f64::max)
    }

    /// `{"cost": c, "entries": [[i, j, mass], ...]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CouplingJson { cost: self.cost, entries: self.entries.clone() })?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({ "cost": self.cost, "entries": self.entries })
    }
}

fn cost_matrix(m0: &EmpiricalMeasure, m1: &EmpiricalMeasure, metric: &MetricSpec) -> Result<Vec<f64>> {
    let mut cost = Vec::with_capacity(m0.len() * m1.len());
    for a in m0.atoms() {
        for b in m1.atoms() {
            let d = metric.distance(&a.x, &b.x);
            if !d.is_finite() {
                return Err(Error::invalid(format!("metric is not finite between {:?} and {:?}", a.x.0, b.x.0)));
            }
            cost.push(d);
        }
    }
    Ok(cost)
}

fn expect_x(m: &EmpiricalMeasure) -> Result<()> {
    if m.space() == Space::X {
        Ok(())
    } else {
        Err(Error::SpaceMismatch { expected: "X".into(), found: m.space().to_string() })
    }
}

/// Exact solution of `min Σ d(x, x') ρ(x, x')` over couplings of `m0` and `m1`.
///
/// Equal-size uniform marginals go through the Hungarian algorithm; everything
/// else through the transportation simplex. The cost equals `d₁(m0, m1)`.
pub fn ot_solve(m0: &EmpiricalMeasure, m1: &EmpiricalMeasure, metric: &MetricSpec) -> Result<Coupling> {
    expect_x(m0)?;
    expect_x(m1)?;
    let cost = cost_matrix(m0, m1, metric)?;
    let n = m1.len();
    let entries = if m0.len() == m1.len() && m0.is_uniform(0.0) && m1.is_uniform(0.0) {
        let sigma = hungarian::hungarian(&cost, n);
        sigma.iter().enumerate().map(|(i, &j)| (i, j, m0.atoms()[i].w)).collect()
    } else {
        let supply: Vec<f64> = m0.atoms().iter().map(|a| a.w).collect();
        let demand: Vec<f64> = m1.atoms().iter().map(|a| a.w).collect();
        simplex::solve_transport(&supply, &demand, &cost)?
    };
    let total = entries.iter().map(|&(i, j, f)| f * cost[i * n + j]).sum();
    Ok(Coupling { entries, source: m0.clone(), target: m1.clone(), cost: total })
}

/// `d₁(m0, m1)`.
///
/// On the real line with the Euclidean metric this is `∫ |F₀ − F₁|`, computed
/// by a sweep over the merged sorted supports; otherwise it is the cost of
/// [`ot_solve`].
pub fn wasserstein1(m0: &EmpiricalMeasure, m1: &EmpiricalMeasure, metric: &MetricSpec) -> Result<f64> {
    expect_x(m0)?;
    expect_x(m1)?;
    let on_line = |m: &EmpiricalMeasure| m.atoms().iter().all(|a| a.x.0.len() == 1);
    if matches!(metric, MetricSpec::Euclidean) && on_line(m0) && on_line(m1) {
        return Ok(line_d1(m0, m1));
    }
    Ok(ot_solve(m0, m1, metric)?.cost)
}

fn line_d1(m0: &EmpiricalMeasure, m1: &EmpiricalMeasure) -> f64 {
    let mut events: Vec<(f64, f64)> = m0.atoms().iter().map(|a| (a.x.value(), a.w)).collect();
    events.extend(m1.atoms().iter().map(|a| (a.x.value(), -a.w)));
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    total
}

/// Optimal matching between two uniform measures with the same number of atoms.
pub fn assignment_solve(m0: &EmpiricalMeasure, m1: &EmpiricalMeasure, metric: &MetricSpec) -> Result<Vec<usize>> {
    expect_x(m0)?;
    expect_x(m1)?;
    if m0.len() != m1.len() {
        return Err(Error::invalid(format!("support sizes differ: {} vs {}", m0.len(), m1.len())));
    }
    let tol = 1e-12;
    if !m0.is_uniform(tol) || !m1.is_uniform(tol) {
        return Err(Error::invalid("assignment requires uniform weights"));
    }
    let cost = cost_matrix(m0, m1, metric)?;
    Ok(hungarian::hungarian(&cost, m0.len()))
}

/// An atom of a measure on `Z × X`.
#[derive(Clone, Debug, PartialEq)]
pub struct GluedAtom {
    pub x: ParamPoint,
    pub y: Decision,
    pub x_to: ParamPoint,
    pub w: f64,
}

/// A finitely supported measure on `Z × X`.
#[derive(Clone, Debug, PartialEq)]
pub struct GluedMeasure {
    pub atoms: Vec<GluedAtom>,
}

impl GluedMeasure {
    /// `π₁₂#ν`.
    pub fn project_z(&self) -> Result<EmpiricalMeasure> {
        let atoms = self.atoms.iter().map(|a| Atom::on_z(a.x.clone(), a.y.clone(), a.w));
        EmpiricalMeasure::new(Space::Z, merge_atoms(atoms))
    }

    /// `π₃#ν`.
    pub fn project_target(&self) -> Result<EmpiricalMeasure> {
        let atoms = self.atoms.iter().map(|a| Atom::on_x(a.x_to.clone(), a.w));
        EmpiricalMeasure::new(Space::X, merge_atoms(atoms))
    }

    /// `∫ d(x, x') dν`.
    pub fn transport_cost(&self, metric: &MetricSpec) -> f64 {
        self.atoms.iter().map(|a| a.w * metric.distance(&a.x, &a.x_to)).sum()
    }
}

/// Gluing of `μ₀` (on `Z`) and a plan `ρ` whose source is `π₁#μ₀`:
/// `ν = Σ_{(x,y)} μ₀(x, y) δ_{(x,y)} ⊗ ρ_x` with `ρ_x = ρ(x, ·) / m₀(x)`.
pub fn glue(mu0: &EmpiricalMeasure, rho: &Coupling) -> Result<GluedMeasure> {
    let m0 = mu0.first_marginal()?;
    let source = rho.source.atoms();
    // locate each marginal point of μ₀ in the plan's source
    let mut slot_of = Vec::with_capacity(m0.len());
    for a in m0.atoms() {
        let idx = source
            .iter()
            .position(|s| s.x.approx_eq(&a.x, crate::measures::MERGE_TOL))
            .ok_or_else(|| Error::MarginalMismatch(format!("point {:?} missing from the plan's source", a.x.0)))?;
        if (source[idx].w - a.w).abs() > MARGINAL_TOL {
            return Err(Error::MarginalMismatch(format!(
                "weight of {:?}: μ₀ has {}, plan source has {}",
                a.x.0, a.w, source[idx].w
            )));
        }
        slot_of.push(idx);
    }
    if m0.len() != source.len() {
        return Err(Error::MarginalMismatch("plan source has points outside supp μ₀".into()));
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); source.len()];
    for &(i, j, f) in &rho.entries {
        rows[i].push((j, f / source[i].w));
    }
    let mut atoms = Vec::new();
    for a in mu0.atoms() {
        let i = source
            .iter()
            .position(|s| s.x.approx_eq(&a.x, crate::measures::MERGE_TOL))
            .expect("checked above");
        for &(j, p) in &rows[i] {
            atoms.push(GluedAtom {
                x: a.x.clone(),
                y: a.decision().clone(),
                x_to: rho.target.atoms()[j].x.clone(),
                w: a.w * p,
            });
        }
    }
    Ok(GluedMeasure { atoms })
}

/// Result of the bridging method.
#[derive(Clone, Debug)]
pub struct Bridged {
    /// `μ₁ ∈ P_{m₁}(Z)`.
    pub measure: EmpiricalMeasure,
    pub coupling: Coupling,
    /// `d₁(m₀, m₁)`.
    pub d1: f64,
}

/// Moves `mu0` (feasible, marginal `m₀`) to a measure with marginal `m1`.
pub fn bridge<P: MfoProblem + ?Sized>(
    mu0: &EmpiricalMeasure,
    m1: &EmpiricalMeasure,
    problem: &P,
    metric: &MetricSpec,
) -> Result<Bridged> {
    crate::problem::check_feasible(problem, mu0)?;
    let m0 = mu0.first_marginal()?;
    let coupling = ot_solve(&m0, m1, metric)?;
    let nu = glue(mu0, &coupling)?;
    let mut moved = Vec::with_capacity(nu.atoms.len());
    for a in &nu.atoms {
        let y_new = problem.transport_select(&a.x, &a.y, &a.x_to)?;
        if !problem.feasible(&a.x_to, &y_new) {
            return Err(Error::Infeasible {
                x: a.x_to.0.clone(),
                reason: "transport selection returned a decision outside Z_x'".into(),
            });
        }
        moved.push(Atom::on_z(a.x_to.clone(), y_new, a.w));
    }
    let measure = EmpiricalMeasure::new(Space::Z, merge_atoms(moved))?;
    Ok(Bridged { d1: coupling.cost, measure, coupling })
}
