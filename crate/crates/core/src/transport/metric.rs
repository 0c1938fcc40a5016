use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::measures::ParamPoint;

/// Ground metric `d_X` on the parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean,
    /// Coordinates are node ids; the distance is the sum over coordinates of
    /// hop counts in an undirected graph (`hops[a][b]`).
    GraphHop { hops: Vec<Vec<f64>> },
    /// Explicit distance table over a finite point set.
    Table { points: Vec<ParamPoint>, dist: Vec<Vec<f64>> },
}

impl MetricSpec {
    /// Hop metric of the undirected version of a graph on `num_nodes` nodes.
    pub fn graph_hop(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); num_nodes];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let hops = (0..num_nodes)
            .map(|src| {
                let mut dist = vec![f64::INFINITY; num_nodes];
                dist[src] = 0.0;
                let mut queue = VecDeque::from([src]);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[u] {
                        if dist[v].is_infinite() {
                            dist[v] = dist[u] + 1.0;
                            queue.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect();
        MetricSpec::GraphHop { hops }
    }

    pub fn distance(&self, a: &ParamPoint, b: &ParamPoint) -> f64 {
        match self {
            MetricSpec::Euclidean => {
                a.0.iter().zip(&b.0).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            }
            MetricSpec::GraphHop { hops } => a
                .0
                .iter()
                .zip(&b.0)
                .map(|(u, v)| {
                    let (i, j) = (*u as usize, *v as usize);
                    hops.get(i).and_then(|row| row.get(j)).copied().unwrap_or(f64::NAN)
                })
                .sum(),
            MetricSpec::Table { points, dist } => {
                let find = |p: &ParamPoint| points.iter().position(|q| q.approx_eq(p, 1e-12));
                match (find(a), find(b)) {
                    (Some(i), Some(j)) => dist[i][j],
                    _ => f64::NAN,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn euclidean_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let metric = MetricSpec::Euclidean;
        for _ in 0..200 {
            let p: Vec<ParamPoint> =
                (0..3).map(|_| ParamPoint(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])).collect();
            let d = |i: usize, j: usize| metric.distance(&p[i], &p[j]);
            assert_eq!(d(0, 1), d(1, 0));
            assert_eq!(d(0, 0), 0.0);
            assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
        }
    }

    #[test]
    fn graph_hop_on_path_graph() {
        let metric = MetricSpec::graph_hop(4, &[(0, 1), (1, 2), (2, 3)]);
        let od = |a: f64, b: f64| ParamPoint(vec![a, b]);
        assert_eq!(metric.distance(&od(0.0, 3.0), &od(1.0, 3.0)), 1.0);
        assert_eq!(metric.distance(&od(0.0, 3.0), &od(3.0, 0.0)), 6.0);
        assert_eq!(metric.distance(&od(2.0, 1.0), &od(2.0, 1.0)), 0.0);
        let pts: Vec<_> = [(0.0, 1.0), (2.0, 3.0), (1.0, 1.0)].iter().map(|&(a, b)| od(a, b)).collect();
        assert!(metric.distance(&pts[0], &pts[1]) <= metric.distance(&pts[0], &pts[2]) + metric.distance(&pts[2], &pts[1]));
    }

    #[test]
    fn table_lookup() {
        let points = vec![ParamPoint::scalar(0.0), ParamPoint::scalar(1.0)];
        let metric = MetricSpec::Table { points: points.clone(), dist: vec![vec![0.0, 2.5], vec![2.5, 0.0]] };
        assert_eq!(metric.distance(&points[0], &points[1]), 2.5);
        assert!(metric.distance(&points[0], &ParamPoint::scalar(5.0)).is_nan());
    }
}
