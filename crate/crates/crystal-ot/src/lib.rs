//! Optimal transport under crystalline (polyhedral) norms on R^N.
//!
//! The library computes, for discrete measures:
//!
//! - exact Kantorovich solutions under the squared crystalline distance d²,
//!   with Kantorovich potentials ([`solver`]);
//! - the secondary-variational plan Π(μ,ν): among all d²-optimal couplings,
//!   the one minimizing the squared Euclidean cost, obtained both by
//!   restricting to the dual-tight edge set and by a lexicographic weighted
//!   solve ([`selection`]);
//! - displacement interpolation along the Euclidean geodesic flow
//!   `G(x,y)(t) = (1−t)x + ty` and binned entropy along the curve, checking
//!   the K-convexity inequality of the entropy ([`interpolation`]);
//! - a verification harness with brute-force oracles, seeded random suites,
//!   and a scenario-driven CLI ([`harness`]).

pub mod error;
pub mod geometry;
pub mod harness;
pub mod interpolation;
pub mod measures;
pub mod selection;
pub mod solver;

pub use error::{Error, Result};
