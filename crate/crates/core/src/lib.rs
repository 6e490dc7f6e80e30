//! Throughput-optimal priority-based routing for opportunistic wireless
//! networks.
//!
//! The crate models a single-destination network under a probabilistic
//! local broadcast channel and provides:
//!
//! * rank orderings (ordered partitions of the relays) and their algebra,
//! * bivariate weight functions `f(m, n)` and the penalty `Λ_f`,
//! * resolution of the unique cone containing a backlog vector, for the
//!   general and the path-connected family, with brute-force oracles,
//! * the piecewise-quadratic Lyapunov function and its gradient,
//! * concrete policies (f-policy, path-connected f-policy, backpressure,
//!   ORCD) and a slotted simulator with drift estimation,
//! * a small dense simplex solver used to test arrival vectors against the
//!   stability region.
//!
//! Cone, weight and Lyapunov code is generic over [`Scalar`], so the same
//! routines run on `f64`, `f32` and exact rationals. The aliases below fix
//! the common choices.

pub mod capacity;
pub mod cones;
pub mod config;
pub mod model;
pub mod nodeset;
pub mod policies;
pub mod ranking;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod simplex;
pub mod topologies;
pub mod trace;
pub mod verify;
pub mod weights;

pub use cones::ConeResolution;
pub use model::{NetworkModel, Outcome};
pub use nodeset::{NodeId, NodeSet};
pub use ranking::RankOrdering;
pub use scalar::Scalar;
pub use weights::WeightTable;

/// Exact rational scalar used for boundary-exact computations.
pub type Rational = num::BigRational;

/// Weight function over `f64`, the default for simulation and policies.
pub type WeightFunction = WeightTable<f64>;
/// Weight function over `f32`.
pub type WeightFunction32 = WeightTable<f32>;
/// Weight function over exact rationals.
pub type ExactWeightFunction = WeightTable<Rational>;
