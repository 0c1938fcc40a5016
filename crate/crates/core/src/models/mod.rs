//! Concrete problems with exact best-response and transport-selection oracles.
//!
//! - [`traffic`]: path-based traffic assignment; equilibria are Wardrop equilibria.
//! - [`resource`]: producers extracting an exhaustible resource under a common price.
//! - [`congestion`]: minimal-time travel on `[0, 1]` with a smoothed density penalty.
//! - [`finite`]: finitely many options per agent; small enough to brute-force.

pub mod congestion;
pub mod finite;
pub mod resource;
pub mod traffic;

pub use congestion::CongestionInstance;
pub use finite::FiniteChoiceProblem;
pub use resource::ResourceInstance;
pub use traffic::TrafficNetwork;
