//! Co-evolution of quadruped gait and leg morphology in a surrogate
//! environment.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod fitness;
pub mod gait;
pub mod nsga2;
pub mod params;
pub mod surrogate;

pub use error::{Error, Result};
pub use fitness::{Evaluation, Fitness, FitnessConfig, Outcome};
pub use params::{decode, encode, GaitSpec, Genome};
