//! Mean field optimization over probability measures with a prescribed first marginal.
//!
//! The problem solved throughout the crate is
//!
//! ```text
//!     minimize  f( ∫ g dμ )   over μ ∈ P(Z) with π₁#μ = m
//! ```
//!
//! where `Z` is the graph of a feasibility map `x ↦ Z_x`, `g: Z → H` takes values
//! in a Hilbert space and `f: H → ℝ` is convex with Lipschitz gradient.
//!
//! - [`measures`]: finitely supported measures on `X` and `Z`, marginals, disintegration.
//! - [`transport`]: exact optimal transport, gluing, and the bridging method that
//!   moves an approximate solution from one marginal to another.
//! - [`problem`]: the [`problem::MfoProblem`] contract plus gap and dual certificates.
//! - [`solvers`]: Frank-Wolfe and Stochastic Frank-Wolfe over empirical marginals.
//! - [`quantize`]: discretization of a continuous marginal.
//! - [`models`]: traffic assignment, exhaustible-resource competition, minimal-time
//!   congestion, and a small finite-choice model.
//! - [`experiment`]: config-driven runs writing CSV/JSON artifacts (used by the `mfo` binary).

pub mod error;
pub mod experiment;
pub mod measures;
pub mod models;
pub mod problem;
pub mod quantize;
pub mod solvers;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{Atom, Decision, EmpiricalMeasure, ParamPoint, Space};
pub use problem::{AggregateVector, Constants, DualCertificate, MfoProblem};
