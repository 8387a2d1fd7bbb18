//! Multi-resource fair allocation with exact arithmetic.
//!
//! Three allocators over the same scenario model:
//!
//! * [`drf`]: progressive filling, one whole task at a time to the user
//!   with the lowest allocated dominant share.
//! * [`edrf`]: divisible allocation in synchronized rounds, no integrality.
//! * [`pdrf`]: closed-form precomputation of whole-task counts from the
//!   cycle structure of progressive filling, plus a single top-up sweep.
//!
//! [`cycles`] analyzes that cycle structure directly, and [`harness`] draws
//! seeded random scenarios to measure how far precomputation deviates from
//! filling task by task.
//!
//! All share arithmetic uses [`Rational`], an exact arbitrary-precision
//! fraction; results are deterministic and independent of evaluation order.

pub mod cycles;
pub mod drf;
pub mod edrf;
mod error;
pub mod harness;
pub mod pdrf;
pub mod rational;
pub mod scenario;

pub use error::{Error, ValidationIssue};
pub use rational::Rational;
pub use scenario::{
    dominant_share, fractional_demands, scenario_from_json, validate_scenario, Allocation,
    DemandVector, DominantShare, ResourceVector, Scenario, UserDemand, UserId, WeightMode,
    WeightVector,
};
