//! Primal network simplex for the balanced transportation problem
//!
//! ```text
//!     min Σ c_ij x_ij   s.t.  Σ_j x_ij = a_i,  Σ_i x_ij = b_j,  x ≥ 0
//! ```
//!
//! The basis is a spanning tree of the bipartite graph rows ∪ columns with
//! exactly `m + n − 1` basic cells (degenerate cells carry zero flow).

use std::collections::VecDeque;

use crate::error::{Error, Result};

struct Tree {
    m: usize,
    n: usize,
    /// Basic cells as (row, col).
    cells: Vec<(usize, usize)>,
    /// Flow on every cell, row-major.
    flow: Vec<f64>,
    basic: Vec<bool>,
}

impl Tree {
    fn northwest_corner(supply: &[f64], demand: &[f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut tree = Tree { m, n, cells: Vec::with_capacity(m + n - 1), flow: vec![0.0; m * n], basic: vec![false; m * n] };
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]).max(0.0);
            tree.flow[i * n + j] = q;
            tree.basic[i * n + j] = true;
            tree.cells.push((i, j));
            s[i] -= q;
            d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        tree
    }

    /// Adjacency over nodes `0..m` (rows) and `m..m+n` (columns); entries are cell ids.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push(k);
            adj[self.m + j].push(k);
        }
        adj
    }

    fn potentials(&self, cost: &[f64], adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut u = vec![f64::NAN; m];
        let mut v = vec![f64::NAN; n];
        u[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &k in &adj[node] {
                let (i, j) = self.cells[k];
                let c = cost[i * n + j];
                if node < m {
                    if v[j].is_nan() {
                        v[j] = c - u[i];
                        queue.push_back(m + j);
                    }
                } else if u[i].is_nan() {
                    u[i] = c - v[j];
                    queue.push_back(i);
                }
            }
        }
        (u, v)
    }

    /// Cells on the tree path from column node `m + j` to row node `i`, in path order.
    fn path(&self, adj: &[Vec<usize>], from_col: usize, to_row: usize) -> Vec<usize> {
        let start = self.m + from_col;
        let mut parent_cell = vec![usize::MAX; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == to_row {
                break;
            }
            for &k in &adj[node] {
                let (i, j) = self.cells[k];
                let other = if node < self.m { self.m + j } else { i };
                if !seen[other] {
                    seen[other] = true;
                    parent_cell[other] = k;
                    queue.push_back(other);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = to_row;
        while node != start {
            let k = parent_cell[node];
            cells.push(k);
            let (i, j) = self.cells[k];
            node = if node < self.m { self.m + j } else { i };
        }
        cells.reverse();
        cells
    }
}

/// Solves the balanced transportation problem exactly; returns the positive
/// entries of an optimal plan sorted by (row, col).
pub(crate) fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("empty marginal"));
    }
    if cost.len() != m * n || cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("cost matrix must be finite with shape m × n"));
    }
    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let tol = 1e-12 * scale;
    let mut tree = Tree::northwest_corner(supply, demand);
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;

    for _ in 0..max_pivots {
        let adj = tree.adjacency();
        let (u, v) = tree.potentials(cost, &adj);
        // Dantzig pricing; Bland's first-improving rule after a long degenerate run
        let bland = degenerate_run > m + n;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if tree.basic[i * n + j] {
                    continue;
                }
                let r = cost[i * n + j] - u[i] - v[j];
                if r < -tol && entering.is_none_or(|(_, _, best)| r < best) {
                    entering = Some((i, j, r));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            let mut out: Vec<(usize, usize, f64)> = tree
                .cells
                .iter()
                .map(|&(i, j)| (i, j, tree.flow[i * n + j]))
                .filter(|&(_, _, f)| f > 0.0)
                .collect();
            out.sort_by_key(|e| (e.0, e.1));
            return Ok(out);
        };

        // cycle: entering (+), then alternating −, +, ... along the tree path col ej → row ei
        let path = tree.path(&adj, ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let (i, j) = tree.cells[k];
                let f = tree.flow[i * n + j];
                if f < theta {
                    theta = f;
                    leave = k;
                }
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            let (i, j) = tree.cells[k];
            if pos % 2 == 0 {
                tree.flow[i * n + j] -= theta;
            } else {
                tree.flow[i * n + j] += theta;
            }
        }
        let (li, lj) = tree.cells[leave];
        tree.flow[li * n + lj] = 0.0;
        tree.basic[li * n + lj] = false;
        tree.flow[ei * n + ej] = theta;
        tree.basic[ei * n + ej] = true;
        tree.cells[leave] = (ei, ej);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }
    Err(Error::invalid("transportation simplex did not terminate"))
}
