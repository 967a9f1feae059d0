//! Constrained restricted invertibility.
//!
//! Greedy selection of columns almost orthogonal to a direction, random
//! extraction of a well-conditioned subset, certified estimates of the
//! worst-case selection value over the sphere, the closed-form quantities that
//! bound it, and Monte Carlo audits of those bounds.

// `!(x > 0.0)` deliberately rejects NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod selection;
pub mod sphere;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{ColumnMatrix, IndexSet, Matrix};
pub use sphere::{EpsNet, RngStream};
