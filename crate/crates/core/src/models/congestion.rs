//! Minimal-time travel on `[0, 1]` with a smoothed congestion penalty.
//!
//! Agents start at `x ∈ [0, 1]` and follow non-decreasing trajectories
//! `γ₀ = x, 0 ≤ γ_{t+1} − γ_t ≤ V̄Δt`, paying `Δt` per step spent before the
//! target and a penalty on the squared occupancy of `J` cells of width
//! `Δx = 1/J`. Cell indicators are replaced by smooth bumps `h_1..h_J` built
//! from `φ_k`, and the time-to-target indicator by `h₀`:
//!
//! ```text
//!     g(x, γ) = ( Δt Σ_{t<M} h₀(γ_t), (h_j(γ_t))_{t<M, 1≤j≤J} )
//!     f(β)    = β₀ + (α/Δx) Σ_{t,j} Δt β_{t,j}²
//! ```
//!
//! The occupancy block is laid out time-major: `β[1 + t·J + (j − 1)]`.
//! Best responses are computed by dynamic programming on a position grid.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Decision, ParamPoint};
use crate::problem::{AggregateVector, Constants, MfoProblem};

const TRAJ_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CongestionParams {
    /// Number of cells `J`.
    pub cells: usize,
    /// Smoothing parameter `k ≥ J`.
    pub smoothing: f64,
    /// Maximal speed `V̄`.
    pub max_speed: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Congestion penalty `α ≥ 0`.
    pub alpha: f64,
    /// Positions on `[0, grid_max]` used by the DP.
    pub grid_points: usize,
    pub grid_max: f64,
}

impl Default for CongestionParams {
    fn default() -> Self {
        CongestionParams {
            cells: 5,
            smoothing: 20.0,
            max_speed: 3.0,
            horizon: 1.0,
            steps: 20,
            alpha: 1.0,
            grid_points: 401,
            grid_max: 1.2,
        }
    }
}

/// `φ_k(x) = 1 / (1 + e^{1/(kx) − 1/(1 − kx)})` on `(0, 1/k)`, `0` before and `1` after.
pub fn phi(k: f64, x: f64) -> f64 {
    let u = k * x;
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / u - 1.0 / (1.0 - u)).exp())
    }
}

/// Lipschitz constant of `φ_k`: the profile `ψ(u) = φ_1(u)` has slope at most 2, reached at `u = ½`.
pub fn phi_lipschitz(k: f64) -> f64 {
    2.0 * k
}

#[derive(Clone, Debug)]
pub struct CongestionInstance {
    params: CongestionParams,
    dt: f64,
    dx: f64,
    weights: Arc<[f64]>,
}

impl CongestionInstance {
    pub fn new(params: CongestionParams) -> Result<Self> {
        let bad = |field: &str, reason: &str| Err(Error::Config { field: field.into(), reason: reason.into() });
        if params.cells == 0 {
            return bad("cells", "must be at least 1");
        }
        if !(params.smoothing >= params.cells as f64) {
            return bad("smoothing", "must be at least the number of cells");
        }
        if !(params.max_speed > 0.0) || !(params.horizon > 0.0) || params.steps == 0 {
            return bad("max_speed", "speed, horizon and steps must be positive");
        }
        if !(params.alpha >= 0.0) {
            return bad("alpha", "must be non-negative");
        }
        if params.grid_points < 2 || !(params.grid_max >= 1.0) {
            return bad("grid_points", "need at least two grid points on [0, grid_max] with grid_max ≥ 1");
        }
        let dt = params.horizon / params.steps as f64;
        let dx = 1.0 / params.cells as f64;
        let mut w = vec![1.0];
        w.extend(std::iter::repeat_n(dt, params.cells * params.steps));
        Ok(CongestionInstance { params, dt, dx, weights: Arc::from(w) })
    }

    pub fn params(&self) -> &CongestionParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid_spacing(&self) -> f64 {
        self.params.grid_max / (self.params.grid_points - 1) as f64
    }

    /// Grid steps covered per time step at full speed.
    pub fn max_grid_step(&self) -> usize {
        (self.params.max_speed * self.dt / self.grid_spacing() + 1e-9).floor() as usize
    }

    /// `(h₀(x), h₁(x), …, h_J(x))`.
    pub fn bumps(&self, x: f64) -> Vec<f64> {
        let k = self.params.smoothing;
        let j_max = self.params.cells;
        let mut out = Vec::with_capacity(j_max + 1);
        out.push(1.0 - phi(k, x - 1.0 + 1.0 / k));
        // h_j(x) = φ_k(x − b_{j−1} + 1/k) − φ_k(x − b_j + 1/k) with b_j = j Δx
        let edge = |j: usize| phi(k, x - j as f64 / j_max as f64 + 1.0 / k);
        let mut left = edge(0);
        for j in 1..=j_max {
            let right = edge(j);
            out.push(left - right);
            left = right;
        }
        out
    }

    /// First time index with `γ_t ≥ 1`.
    pub fn arrival_step(&self, gamma: &[f64]) -> Option<usize> {
        gamma.iter().position(|&p| p >= 1.0 - TRAJ_TOL)
    }

    /// Trajectory at full speed from `x`, capped at the end of the grid.
    pub fn max_speed_trajectory(&self, x: f64) -> Vec<f64> {
        let h = self.grid_spacing();
        let top = self.top_index(x);
        let s = self.max_grid_step();
        (0..=self.params.steps).map(|t| x + (t * s).min(top) as f64 * h).collect()
    }

    fn top_index(&self, x: f64) -> usize {
        ((self.params.grid_max - x) / self.grid_spacing() + 1e-9).floor().max(0.0) as usize
    }

    /// Grid-optimal minimizer of `⟨λ, g(x, ·)⟩` over trajectories on `x + hℕ`.
    ///
    /// Backward DP with a sliding-window minimum over the reachable range; ties
    /// go to the farthest position. An agent already past the target stays put.
    pub fn trajectory(&self, lambda: &AggregateVector, x: f64) -> Result<Vec<f64>> {
        let (m, j_max) = (self.params.steps, self.params.cells);
        if lambda.dim() != 1 + m * j_max || !lambda.is_finite() {
            return Err(Error::invalid("price signal has the wrong dimension or is not finite"));
        }
        if !(0.0..=self.params.grid_max).contains(&x) {
            return Err(Error::invalid(format!("start {x} outside [0, {}]", self.params.grid_max)));
        }
        let l0 = lambda.values[0];
        if l0 < 0.0 {
            return Err(Error::invalid("λ₀ < 0 rewards staying away from the target"));
        }
        if x >= 1.0 {
            return Ok(vec![x; m + 1]);
        }
        let h = self.grid_spacing();
        let n = self.top_index(x);
        let s = self.max_grid_step();
        let bumps: Vec<Vec<f64>> = (0..=n).map(|i| self.bumps(x + i as f64 * h)).collect();
        let stage_cost = |t: usize, i: usize| -> f64 {
            let b = &bumps[i];
            let occ = &lambda.values[1 + t * j_max..1 + (t + 1) * j_max];
            self.dt * (l0 * b[0] + occ.iter().zip(&b[1..]).map(|(l, v)| l * v).sum::<f64>())
        };
        let mut value = vec![0.0; n + 1];
        let mut choice = vec![vec![0usize; n + 1]; m];
        for t in (0..m).rev() {
            let mut next = vec![0.0; n + 1];
            // window [i, i + s]; front holds the minimum, farthest index among ties
            let mut window: VecDeque<usize> = VecDeque::new();
            for i in (0..=n).rev() {
                while window.back().is_some_and(|&b| value[b] > value[i]) {
                    window.pop_back();
                }
                window.push_back(i);
                while window.front().is_some_and(|&f| f > i + s) {
                    window.pop_front();
                }
                let best = *window.front().expect("window holds i");
                choice[t][i] = best;
                next[i] = stage_cost(t, i) + value[best];
            }
            value = next;
        }
        let mut gamma = Vec::with_capacity(m + 1);
        let mut i = 0;
        gamma.push(x);
        for row in &choice {
            i = row[i];
            gamma.push(x + i as f64 * h);
        }
        Ok(gamma)
    }

    /// `⟨λ, g(x, γ)⟩` written out as the running cost.
    pub fn running_cost(&self, lambda: &AggregateVector, gamma: &[f64]) -> f64 {
        let j_max = self.params.cells;
        (0..self.params.steps)
            .map(|t| {
                let b = self.bumps(gamma[t]);
                let occ = &lambda.values[1 + t * j_max..1 + (t + 1) * j_max];
                self.dt * (lambda.values[0] * b[0] + occ.iter().zip(&b[1..]).map(|(l, v)| l * v).sum::<f64>())
            })
            .sum()
    }
}

impl MfoProblem for CongestionInstance {
    fn name(&self) -> &str {
        "congestion"
    }

    fn h_weights(&self) -> Arc<[f64]> {
        self.weights.clone()
    }

    fn g_eval(&self, _x: &ParamPoint, y: &Decision) -> AggregateVector {
        let (m, j_max) = (self.params.steps, self.params.cells);
        let mut v = vec![0.0; 1 + m * j_max];
        for t in 0..m {
            let b = self.bumps(y.0[t]);
            v[0] += self.dt * b[0];
            v[1 + t * j_max..1 + (t + 1) * j_max].copy_from_slice(&b[1..]);
        }
        AggregateVector::new(v, self.weights.clone())
    }

    fn f_value(&self, beta: &AggregateVector) -> f64 {
        let sq: f64 = beta.values[1..].iter().map(|b| b * b).sum();
        beta.values[0] + self.params.alpha / self.dx * self.dt * sq
    }

    fn f_grad(&self, beta: &AggregateVector) -> AggregateVector {
        let c = 2.0 * self.params.alpha / self.dx;
        let mut v = vec![1.0];
        v.extend(beta.values[1..].iter().map(|b| c * b));
        AggregateVector::new(v, self.weights.clone())
    }

    /// `f*(1, λ₂) = Δx ‖λ₂‖² / (4α)`, `+∞` off `{λ₀ = 1}`.
    fn f_conj(&self, lambda: &AggregateVector) -> Result<f64> {
        if (lambda.values[0] - 1.0).abs() > 1e-12 {
            return Ok(f64::INFINITY);
        }
        let sq: f64 = lambda.values[1..].iter().map(|l| self.dt * l * l).sum();
        if self.params.alpha == 0.0 {
            return Ok(if sq == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok(self.dx * sq / (4.0 * self.params.alpha))
    }

    fn best_response(&self, lambda: &AggregateVector, x: &ParamPoint) -> Result<Decision> {
        Ok(Decision(self.trajectory(lambda, x.value())?))
    }

    fn feasible(&self, x: &ParamPoint, y: &Decision) -> bool {
        let g = &y.0;
        let step = self.params.max_speed * self.dt;
        g.len() == self.params.steps + 1
            && (g[0] - x.value()).abs() <= TRAJ_TOL
            && g.windows(2).all(|w| w[1] - w[0] >= -TRAJ_TOL && w[1] - w[0] <= step + TRAJ_TOL)
            && g.iter().all(|&p| p >= -TRAJ_TOL && p <= self.params.grid_max + TRAJ_TOL)
    }

    /// Translate by `x' − x`, then cap at the end of the state space.
    fn transport_select(&self, x: &ParamPoint, y: &Decision, x_new: &ParamPoint) -> Result<Decision> {
        let shift = x_new.value() - x.value();
        if shift == 0.0 {
            return Ok(y.clone());
        }
        if !(0.0..=self.params.grid_max).contains(&x_new.value()) {
            return Err(Error::invalid(format!("target start {} outside the state space", x_new.value())));
        }
        let gamma = y.0.iter().enumerate().map(|(t, p)| if t == 0 { x_new.value() } else { (p + shift).min(self.params.grid_max) });
        Ok(Decision(gamma.collect()))
    }

    /// Pointwise `Σ_j h_j ≤ 1` and at most two bumps move at once, each with slope
    /// at most `Lip φ_k`; hence `‖Δg‖² ≤ (T² + 2T) Lip² δ²` for a shift `δ`.
    fn constants(&self) -> Constants {
        let t = self.params.horizon;
        let slope = 2.0 * self.params.alpha / self.dx;
        Constants {
            l: slope,
            m: (t * t + t).sqrt(),
            d: t * t + 2.0 * t,
            c: (1.0 + slope * slope * t).sqrt(),
            l_g: phi_lipschitz(self.params.smoothing) * (t * t + 2.0 * t).sqrt(),
        }
    }
}
