//! Path-based traffic assignment.
//!
//! Agents are origin-destination pairs `x = (o, d)` and choose a simple path
//! `y ⊂ E` from `o` to `d`, encoded as an edge-indicator vector. The aggregate
//! `q = ∫ g dμ` is the vector of edge loads and `f(q) = Σ_e Φ_e(q_e)` with
//! `Φ_e' = φ_e`, so `λ = ∇f(q)` lists the edge travel times and a solution is a
//! Wardrop equilibrium: every used path is a shortest path under `λ`.

use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, Decision, EmpiricalMeasure, ParamPoint, Space};
use crate::problem::{AggregateVector, Constants, MfoProblem};
use crate::transport::MetricSpec;

/// Edge travel time as a function of its load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Latency {
    /// `a q + b`.
    Affine { a: f64, b: f64 },
    /// `Σ_k c_k q^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `t0 (1 + alpha (q / capacity)^beta)`.
    Bpr { t0: f64, alpha: f64, beta: f64, capacity: f64 },
}

impl Latency {
    /// `φ(q)`.
    pub fn value(&self, q: f64) -> f64 {
        match self {
            Latency::Affine { a, b } => a * q + b,
            Latency::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * q + c),
            Latency::Bpr { t0, alpha, beta, capacity } => t0 * (1.0 + alpha * (q.max(0.0) / capacity).powf(*beta)),
        }
    }

    /// `Φ(q) = ∫₀^q φ`.
    pub fn primitive(&self, q: f64) -> f64 {
        match self {
            Latency::Affine { a, b } => 0.5 * a * q * q + b * q,
            Latency::Polynomial { coeffs } => {
                coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc * q + c / (k + 1) as f64) * q
            }
            Latency::Bpr { t0, alpha, beta, capacity } => {
                let q = q.max(0.0);
                t0 * (q + alpha * capacity * (q / capacity).powf(beta + 1.0) / (beta + 1.0))
            }
        }
    }

    /// `φ'(q)`.
    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            Latency::Affine { a, .. } => *a,
            Latency::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * q + k as f64 * c),
            Latency::Bpr { t0, alpha, beta, capacity } => {
                if q <= 0.0 {
                    if *beta == 1.0 {
                        t0 * alpha / capacity
                    } else {
                        0.0
                    }
                } else {
                    t0 * alpha * beta / capacity * (q / capacity).powf(beta - 1.0)
                }
            }
        }
    }

    /// Non-decreasing and non-negative with non-decreasing slope on `[0, ∞)`.
    fn validate(&self) -> Result<()> {
        let ok = match self {
            Latency::Affine { a, b } => *a >= 0.0 && *b >= 0.0,
            Latency::Polynomial { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| *c >= 0.0),
            Latency::Bpr { t0, alpha, beta, capacity } => *t0 >= 0.0 && *alpha >= 0.0 && *beta >= 1.0 && *capacity > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("latency {self:?} must have non-negative coefficients (BPR: beta ≥ 1)")))
        }
    }

    fn parse(kind: &str, coeffs: &[f64]) -> Result<Self> {
        let latency = match (kind, coeffs) {
            ("affine", [a, b]) => Latency::Affine { a: *a, b: *b },
            ("poly" | "polynomial", c) if !c.is_empty() => Latency::Polynomial { coeffs: c.to_vec() },
            ("bpr", [t0, alpha, beta, capacity]) => {
                Latency::Bpr { t0: *t0, alpha: *alpha, beta: *beta, capacity: *capacity }
            }
            _ => return Err(Error::invalid(format!("cannot read latency `{kind}` with {} coefficients", coeffs.len()))),
        };
        latency.validate()?;
        Ok(latency)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub latency: Latency,
}

/// A network with its origin-destination pairs and their admissible paths.
#[derive(Clone, Debug)]
pub struct TrafficNetwork {
    num_nodes: usize,
    edges: Vec<Edge>,
    ods: Vec<(usize, usize)>,
    /// Per OD pair, simple paths as edge-id sequences, sorted lexicographically.
    paths: Vec<Vec<Vec<usize>>>,
    weights: Arc<[f64]>,
    hops: MetricSpec,
}

impl TrafficNetwork {
    /// Enumerates the simple paths with at most `max_hops` edges for every OD pair.
    pub fn new(num_nodes: usize, edges: Vec<Edge>, ods: Vec<(usize, usize)>, max_hops: Option<usize>) -> Result<Self> {
        for (i, e) in edges.iter().enumerate() {
            if e.from >= num_nodes || e.to >= num_nodes || e.from == e.to {
                return Err(Error::invalid(format!("edge {i} ({} → {}) is not a valid arc", e.from, e.to)));
            }
            e.latency.validate()?;
        }
        if ods.is_empty() {
            return Err(Error::invalid("no origin-destination pairs"));
        }
        let max_hops = max_hops.unwrap_or(num_nodes.saturating_sub(1)).max(1);
        let mut paths = Vec::with_capacity(ods.len());
        for &(o, d) in &ods {
            if o >= num_nodes || d >= num_nodes || o == d {
                return Err(Error::invalid(format!("OD pair ({o}, {d}) is not valid")));
            }
            let mut found = simple_paths(num_nodes, &edges, o, d, max_hops);
            if found.is_empty() {
                return Err(Error::invalid(format!("no path from {o} to {d} within {max_hops} hops")));
            }
            found.sort();
            paths.push(found);
        }
        let arcs: Vec<(usize, usize)> = edges.iter().map(|e| (e.from, e.to)).collect();
        let hops = MetricSpec::graph_hop(num_nodes, &arcs);
        let weights = Arc::from(vec![1.0; edges.len()]);
        Ok(TrafficNetwork { num_nodes, edges, ods, paths, weights, hops })
    }

    /// Two parallel edges from node 0 to node 1 with `φ₁(q) = q` and `φ₂ = 1`.
    pub fn pigou() -> Self {
        let edges = vec![
            Edge { from: 0, to: 1, latency: Latency::Affine { a: 1.0, b: 0.0 } },
            Edge { from: 0, to: 1, latency: Latency::Affine { a: 0.0, b: 1.0 } },
        ];
        TrafficNetwork::new(2, edges, vec![(0, 1)], None).expect("valid network")
    }

    /// A 2 × 4 grid with rightward and downward arcs (10 edges) and three OD pairs.
    ///
    /// Node `(r, c)` has id `4r + c`.
    pub fn grid() -> Self {
        let mut edges = Vec::new();
        let lat = [
            Latency::Affine { a: 1.0, b: 0.5 },
            Latency::Bpr { t0: 0.4, alpha: 0.15, beta: 4.0, capacity: 0.5 },
            Latency::Polynomial { coeffs: vec![0.3, 0.2, 0.6] },
        ];
        for r in 0..2 {
            for c in 0..3 {
                edges.push(Edge { from: 4 * r + c, to: 4 * r + c + 1, latency: lat[(r + c) % 3].clone() });
            }
        }
        for c in 0..4 {
            edges.push(Edge { from: c, to: 4 + c, latency: Latency::Affine { a: 0.5 + 0.25 * c as f64, b: 0.2 } });
        }
        TrafficNetwork::new(8, edges, vec![(0, 7), (1, 7), (0, 6)], None).expect("valid network")
    }

    /// Reads an edge list (`from,to,phi_kind,coeffs...`) and an OD list
    /// (`origin,dest,demand`). Returns the network and the normalized demand.
    pub fn from_csv<E: Read, O: Read>(edges: E, ods: O, max_hops: Option<usize>) -> Result<(Self, EmpiricalMeasure)> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(edges);
        let mut list = Vec::new();
        let mut num_nodes = 0;
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Config { field: format!("edges line {}", line + 2), reason: what.to_string() };
            if rec.len() < 3 {
                return Err(bad("expected from,to,phi_kind,coeffs..."));
            }
            let from: usize = rec[0].parse().map_err(|_| bad("bad `from`"))?;
            let to: usize = rec[1].parse().map_err(|_| bad("bad `to`"))?;
            let coeffs = rec.iter().skip(3).filter(|s| !s.is_empty()).map(str::parse).collect::<std::result::Result<Vec<f64>, _>>();
            let coeffs = coeffs.map_err(|_| bad("bad coefficient"))?;
            let latency = Latency::parse(&rec[2], &coeffs).map_err(|e| bad(&e.to_string()))?;
            num_nodes = num_nodes.max(from + 1).max(to + 1);
            list.push(Edge { from, to, latency });
        }
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(ods);
        let mut pairs = Vec::new();
        let mut demand = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Config { field: format!("od line {}", line + 2), reason: what.to_string() };
            if rec.len() != 3 {
                return Err(bad("expected origin,dest,demand"));
            }
            let o: usize = rec[0].parse().map_err(|_| bad("bad origin"))?;
            let d: usize = rec[1].parse().map_err(|_| bad("bad dest"))?;
            let q: f64 = rec[2].parse().map_err(|_| bad("bad demand"))?;
            if !(q > 0.0) {
                return Err(bad("demand must be positive"));
            }
            pairs.push((o, d));
            demand.push(q);
        }
        let net = TrafficNetwork::new(num_nodes, list, pairs, max_hops)?;
        let atoms = (0..demand.len()).map(|i| Atom::on_x(net.od_point(i), demand[i])).collect();
        let m = EmpiricalMeasure::normalized(Space::X, atoms)?;
        Ok((net, m))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn ods(&self) -> &[(usize, usize)] {
        &self.ods
    }

    /// Paths of OD pair `od` as edge-id sequences.
    pub fn paths(&self, od: usize) -> &[Vec<usize>] {
        &self.paths[od]
    }

    pub fn od_point(&self, od: usize) -> ParamPoint {
        let (o, d) = self.ods[od];
        ParamPoint(vec![o as f64, d as f64])
    }

    /// Edge-indicator decision for path `path` of OD pair `od`.
    pub fn path_decision(&self, od: usize, path: usize) -> Decision {
        let mut y = vec![0.0; self.edges.len()];
        for &e in &self.paths[od][path] {
            y[e] = 1.0;
        }
        Decision(y)
    }

    /// Uniform demand over the OD pairs.
    pub fn uniform_demand(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::uniform_x((0..self.ods.len()).map(|i| self.od_point(i)).collect()).expect("non-empty")
    }

    pub fn od_index(&self, x: &ParamPoint) -> Option<usize> {
        if x.0.len() != 2 {
            return None;
        }
        self.ods.iter().position(|&(o, d)| x.0[0] == o as f64 && x.0[1] == d as f64)
    }

    /// Index of the path encoded by `y`, if it is admissible for `od`.
    pub fn path_index(&self, od: usize, y: &Decision) -> Option<usize> {
        if y.0.len() != self.edges.len() {
            return None;
        }
        self.paths[od].iter().position(|p| {
            let mut count = 0;
            for (e, &v) in y.0.iter().enumerate() {
                if v == 1.0 {
                    count += 1;
                } else if v != 0.0 {
                    return false;
                }
                if v == 1.0 && !p.contains(&e) {
                    return false;
                }
            }
            count == p.len()
        })
    }

    /// `Σ_{e ∈ path} λ_e`.
    pub fn path_cost(&self, lambda: &[f64], path: &[usize]) -> f64 {
        path.iter().map(|&e| lambda[e]).sum()
    }

    /// Edge travel times `φ_e(q_e)`.
    pub fn edge_times(&self, loads: &[f64]) -> Vec<f64> {
        self.edges.iter().zip(loads).map(|(e, &q)| e.latency.value(q)).collect()
    }

    /// Per OD pair and path: (mass, travel time) under the loads induced by `mu`.
    pub fn path_report(&self, mu: &EmpiricalMeasure) -> Result<Vec<Vec<(f64, f64)>>> {
        let loads = crate::problem::aggregate(self, mu)?;
        let times = self.edge_times(&loads.values);
        let mut report: Vec<Vec<(f64, f64)>> =
            self.paths.iter().map(|ps| ps.iter().map(|p| (0.0, self.path_cost(&times, p))).collect()).collect();
        for a in mu.atoms() {
            let od = self.od_index(&a.x).ok_or_else(|| Error::invalid("unknown OD pair"))?;
            let p = self.path_index(od, a.decision()).ok_or_else(|| Error::invalid("unknown path"))?;
            report[od][p].0 += a.w;
        }
        Ok(report)
    }

    fn path_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let only_a = a.iter().filter(|e| !b.contains(e)).count();
        let only_b = b.iter().filter(|e| !a.contains(e)).count();
        ((only_a + only_b) as f64).sqrt()
    }
}

fn simple_paths(num_nodes: usize, edges: &[Edge], origin: usize, dest: usize, max_hops: usize) -> Vec<Vec<usize>> {
    let mut out_arcs = vec![Vec::new(); num_nodes];
    for (id, e) in edges.iter().enumerate() {
        out_arcs[e.from].push(id);
    }
    let mut found = Vec::new();
    let mut visited = vec![false; num_nodes];
    let mut stack = Vec::new();
    fn dfs(
        node: usize,
        dest: usize,
        max_hops: usize,
        edges: &[Edge],
        out_arcs: &[Vec<usize>],
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        found: &mut Vec<Vec<usize>>,
    ) {
        if node == dest {
            found.push(stack.clone());
            return;
        }
        if stack.len() == max_hops {
            return;
        }
        visited[node] = true;
        for &id in &out_arcs[node] {
            let next = edges[id].to;
            if !visited[next] {
                stack.push(id);
                dfs(next, dest, max_hops, edges, out_arcs, visited, stack, found);
                stack.pop();
            }
        }
        visited[node] = false;
    }
    dfs(origin, dest, max_hops, edges, &out_arcs, &mut visited, &mut stack, &mut found);
    found
}

impl MfoProblem for TrafficNetwork {
    fn name(&self) -> &str {
        "traffic"
    }

    fn h_weights(&self) -> Arc<[f64]> {
        self.weights.clone()
    }

    fn g_eval(&self, _x: &ParamPoint, y: &Decision) -> AggregateVector {
        AggregateVector::new(y.0.clone(), self.weights.clone())
    }

    fn f_value(&self, beta: &AggregateVector) -> f64 {
        self.edges.iter().zip(&beta.values).map(|(e, &q)| e.latency.primitive(q)).sum()
    }

    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector {
        AggregateVector::new(self.edge_times(&beta.values), self.weights.clone())
    }

    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> Result<Decision> {
        let od = self.od_index(x).ok_or_else(|| Error::invalid(format!("no paths for OD pair {:?}", x.0)))?;
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.paths[od].iter().enumerate() {
            let c = self.path_cost(&lambda.values, p);
            if c < best.1 {
                best = (i, c);
            }
        }
        Ok(self.path_decision(od, best.0))
    }

    fn feasible(&self, x: &ParamPoint, y: &Decision) -> bool {
        self.od_index(x).is_some_and(|od| self.path_index(od, y).is_some())
    }

    fn transport_select(&self, x: &ParamPoint, y: &Decision, x_new: &ParamPoint) -> Result<Decision> {
        let from = self.od_index(x).ok_or_else(|| Error::invalid("unknown source OD pair"))?;
        let to = self.od_index(x_new).ok_or_else(|| Error::invalid("unknown target OD pair"))?;
        if from == to {
            return Ok(y.clone());
        }
        let p = self.path_index(from, y).ok_or_else(|| Error::invalid("decision is not an admissible path"))?;
        let path = &self.paths[from][p];
        let mut best = (0, f64::INFINITY);
        for (i, q) in self.paths[to].iter().enumerate() {
            let d = self.path_distance(path, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(self.path_decision(to, best.0))
    }

    fn constants(&self) -> Constants {
        let all: Vec<&Vec<usize>> = self.paths.iter().flatten().collect();
        let m = all.iter().map(|p| (p.len() as f64).sqrt()).fold(0.0, f64::max);
        let mut d: f64 = 0.0;
        for a in &all {
            for b in &all {
                d = d.max(self.path_distance(a, b).powi(2));
            }
        }
        // loads lie in [0, 1]; slopes and values are non-decreasing there
        let l = self.edges.iter().map(|e| e.latency.derivative(1.0)).fold(0.0, f64::max);
        let c = self.edges.iter().map(|e| e.latency.value(1.0).powi(2)).sum::<f64>().sqrt();
        let mut l_g: f64 = 0.0;
        for i in 0..self.ods.len() {
            for j in 0..i {
                let dist = self.hops.distance(&self.od_point(i), &self.od_point(j));
                if !(dist.is_finite() && dist > 0.0) {
                    continue;
                }
                let one_way = |a: &[Vec<usize>], b: &[Vec<usize>]| {
                    a.iter()
                        .map(|p| b.iter().map(|q| self.path_distance(p, q)).fold(f64::INFINITY, f64::min))
                        .fold(0.0, f64::max)
                };
                let h = one_way(&self.paths[i], &self.paths[j]).max(one_way(&self.paths[j], &self.paths[i]));
                l_g = l_g.max(h / dist);
            }
        }
        Constants { l, m, d, c, l_g }
    }

    fn metric(&self) -> MetricSpec {
        self.hops.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::aggregate;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lambda(net: &TrafficNetwork, v: Vec<f64>) -> AggregateVector {
        AggregateVector::new(v, net.h_weights())
    }

    #[test]
    fn pigou_best_responses() {
        let net = TrafficNetwork::pigou();
        let x = net.od_point(0);
        assert_eq!(net.best_response(&lambda(&net, vec![0.7, 1.0]), &x).unwrap(), net.path_decision(0, 0));
        assert_eq!(net.best_response(&lambda(&net, vec![1.5, 1.0]), &x).unwrap(), net.path_decision(0, 1));
        // λ ≡ 0: lexicographically first path
        assert_eq!(net.best_response(&lambda(&net, vec![0.0, 0.0]), &x).unwrap(), net.path_decision(0, 0));
    }

    #[test]
    fn potential_gradient() {
        let affine = Latency::Affine { a: 2.0, b: 0.3 };
        assert_eq!(affine.value(0.0), 0.3);
        let net = TrafficNetwork::pigou();
        let g = net.f_grad(&lambda(&net, vec![1.0, 0.0]));
        assert_eq!(g.values, vec![1.0, 1.0]);
    }

    #[test]
    fn latency_primitive_and_slope_by_finite_differences() {
        let cases = [
            Latency::Affine { a: 1.5, b: 0.2 },
            Latency::Polynomial { coeffs: vec![0.3, 0.2, 0.6, 0.1] },
            Latency::Bpr { t0: 0.4, alpha: 0.15, beta: 4.0, capacity: 0.5 },
        ];
        let h = 1e-5;
        for lat in &cases {
            for i in 1..20 {
                let q = i as f64 / 20.0;
                let dphi = (lat.primitive(q + h) - lat.primitive(q - h)) / (2.0 * h);
                assert!((dphi - lat.value(q)).abs() < 1e-7, "{lat:?} at {q}");
                let dd = (lat.value(q + h) - lat.value(q - h)) / (2.0 * h);
                assert!((dd - lat.derivative(q)).abs() < 1e-6, "{lat:?} at {q}");
            }
        }
    }

    #[test]
    fn grid_has_ten_edges_and_enumerates_paths() {
        let net = TrafficNetwork::grid();
        assert_eq!(net.edges().len(), 10);
        // from (0,0) to (1,3): go down in one of the four columns
        assert_eq!(net.paths(0).len(), 4);
        assert_eq!(net.paths(1).len(), 3);
        assert_eq!(net.paths(2).len(), 3);
        for ps in &net.paths {
            assert!(ps.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn grid_best_response_matches_enumeration() {
        let net = TrafficNetwork::grid();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let l: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            for od in 0..net.ods().len() {
                let y = net.best_response(&lambda(&net, l.clone()), &net.od_point(od)).unwrap();
                let chosen = net.path_cost(&l, &net.paths(od)[net.path_index(od, &y).unwrap()]);
                let best = net.paths(od).iter().map(|p| net.path_cost(&l, p)).fold(f64::INFINITY, f64::min);
                assert_eq!(chosen, best);
            }
        }
    }

    #[test]
    fn selection_respects_the_set_lipschitz_constant() {
        let net = TrafficNetwork::grid();
        let k = net.constants();
        let metric = net.metric();
        for from in 0..3 {
            for to in 0..3 {
                for p in 0..net.paths(from).len() {
                    let y = net.path_decision(from, p);
                    let (x, xn) = (net.od_point(from), net.od_point(to));
                    let yn = net.transport_select(&x, &y, &xn).unwrap();
                    assert!(net.feasible(&xn, &yn));
                    let shift = net.g_eval(&xn, &yn).sub(&net.g_eval(&x, &y)).norm();
                    assert!(shift <= k.l_g * metric.distance(&x, &xn) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn constants_dominate_samples() {
        let net = TrafficNetwork::grid();
        let k = net.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = net.uniform_demand();
        for _ in 0..2000 {
            let atoms: Vec<Atom> = m
                .atoms()
                .iter()
                .enumerate()
                .map(|(od, a)| {
                    let p = rng.random_range(0..net.paths(od).len());
                    Atom::on_z(a.x.clone(), net.path_decision(od, p), a.w)
                })
                .collect();
            let mu = EmpiricalMeasure::new(Space::Z, atoms).unwrap();
            let beta = aggregate(&net, &mu).unwrap();
            assert!(net.f_grad(&beta).norm() <= k.c + 1e-12);
            let b2 = lambda(&net, beta.values.iter().map(|v| v * rng.random::<f64>()).collect());
            let lhs = net.f_grad(&beta).sub(&net.f_grad(&b2)).norm();
            assert!(lhs <= k.l * beta.sub(&b2).norm() + 1e-12);
        }
        for a in net.paths.iter().flatten() {
            assert!((a.len() as f64).sqrt() <= k.m);
        }
    }

    #[test]
    fn aggregate_counts_edge_loads() {
        let net = TrafficNetwork::grid();
        let m = net.uniform_demand();
        let atoms = m.atoms().iter().enumerate().map(|(od, a)| Atom::on_z(a.x.clone(), net.path_decision(od, 0), a.w)).collect();
        let mu = EmpiricalMeasure::new(Space::Z, atoms).unwrap();
        let beta = aggregate(&net, &mu).unwrap();
        assert_abs_diff_eq!(beta.values.iter().sum::<f64>(), net.paths.iter().map(|p| p[0].len() as f64).sum::<f64>() / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_loading() {
        let edges = "from,to,phi_kind,c0,c1\n0,1,affine,1,0\n0,1,affine,0,1\n";
        let ods = "origin,dest,demand\n0,1,2.0\n";
        let (net, m) = TrafficNetwork::from_csv(edges.as_bytes(), ods.as_bytes(), None).unwrap();
        assert_eq!(net.paths(0).len(), 2);
        assert_eq!(m.atoms()[0].w, 1.0);
        let bad = "from,to,phi_kind,c0\n0,1,affine,1\n";
        assert!(matches!(TrafficNetwork::from_csv(bad.as_bytes(), ods.as_bytes(), None), Err(Error::Config { .. })));
    }

    #[test]
    fn disconnected_od_is_rejected() {
        let edges = vec![Edge { from: 0, to: 1, latency: Latency::Affine { a: 1.0, b: 0.0 } }];
        assert!(TrafficNetwork::new(3, edges, vec![(0, 2)], None).is_err());
    }
}
