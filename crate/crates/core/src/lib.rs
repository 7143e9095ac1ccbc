//! Exact algebra and coarse-geometry experiments on free products of free
//! abelian groups.
//!
//! The library provides:
//!
//! - exact normal forms, word lengths and ball enumeration for groups of the
//!   form `Z^{n_1} * ... * Z^{n_k}` ([`group`]);
//! - left-invariant metrics on such a group (standard word metric, word
//!   metrics for alternative generating sets, square-root perturbations and
//!   basepoint shifts), together with rough-geodesicity checks and
//!   quasi-geodesic sampling ([`metrics`]);
//! - nearest-point projections onto peripheral cosets with empirical
//!   verification of the almost-projection axioms and estimation of the
//!   system constants `C`, `L`, `R` ([`projections`]);
//! - head/tail perturbations producing elements with the good periodicity
//!   property, and verification of that property on powers ([`periodicity`]);
//! - translation lengths, marked-length-spectrum comparison, additivity
//!   defects and the rigidity bound ([`spectrum`]);
//! - a deterministic experiment harness emitting JSON-lines records
//!   ([`experiment`], [`report`], [`config`]).
//!
//! Metric values are generic over a floating scalar via [`Real`]; the derived
//! goodness constants are kept in exact `Rational64` arithmetic so the strict
//! inequality chain between them stays auditable.

pub mod config;
pub mod error;
pub mod experiment;
pub mod group;
pub mod metrics;
pub mod periodicity;
pub mod projections;
pub mod rational;
pub mod report;
pub mod rng;
pub mod spectrum;

use std::fmt;

/// Scalar type for metric values. `f64` everywhere in the CLI; `f32` works
/// for the word-metric kinds at desk scale.
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}


/// Concrete aliases used by the CLI and the acceptance suite.
pub type Metric64 = metrics::LeftInvariantMetric<f64>;
pub type Metric32 = metrics::LeftInvariantMetric<f32>;

pub use group::{FreeProductPresentation, GroupElement};
pub use metrics::{DiscretePath, LeftInvariantMetric};
pub use periodicity::GoodnessConstants;
pub use projections::{PeripheralCoset, SystemConstants};
