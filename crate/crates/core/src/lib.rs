//! Adaptive multivariable smooth second-order sliding-mode control.
//!
//! * [`linalg`]: symmetric eigenvalues, Kronecker expansion, PD checks.
//! * [`laws`]: adaptive gains, controller and disturbance observer.
//! * [`certificate`]: Lyapunov matrices, decay constants, settling-time and
//!   residual-set formulas.
//! * [`sim`]: fixed-step simulation of `ẋ1 = u + d1`.
//! * [`metrics`]: settling time, ultimate bound, chattering index.
//! * [`experiment`]: reference scenarios and the report pipeline.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod certificate;
pub mod disturbance;
pub mod error;
pub mod experiment;
pub mod laws;
pub mod linalg;
pub mod metrics;
pub mod sim;
pub mod trajectory;
pub mod vector;

pub use error::{Error, Result};
