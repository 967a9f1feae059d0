//! Closed-form distributions and bound constants.

pub mod constants;
pub mod distributions;
pub mod special;

pub use constants::{BoundConstants, BoundInputs, ConstraintCheck, KappaBranches};
pub use distributions::OrderStatSpec;
