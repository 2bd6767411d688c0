//! Permanent-adoption threshold cascades on two-community configuration-model
//! random graphs.
//!
//! The crate cross-validates three views of the same process:
//!
//! * [`cascade`]: the exact Markov chain that reveals the random multigraph
//!   while the cascade spreads, plus a brute-force closure oracle on explicit
//!   graphs;
//! * [`meanfield`]: the map `F` on inactivity probabilities `μ ∈ [0,1]^4`, the
//!   census map `Φ`, and the fixed point `F^∞(1)`;
//! * [`ode`]: the four-dimensional flow whose trajectory tracks the scaled
//!   chain, in both physical time and the denominator-free parameterization.
//!
//! [`contagion`] decides whether a vanishing seed set triggers a cascade via the
//! Perron root of `∇F` at the no-seed point, and [`experiment`] wires everything
//! into config-driven runs with CSV/JSON output.

pub mod binom;
pub mod cascade;
pub mod contagion;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod rng;

pub use dist::{DegreeDistribution, DistKind};
pub use error::{Error, Result};
pub use meanfield::{MuState, PhiPair};
pub use model::{Community, ModelSpec, SeedingRule, ThresholdRule};
