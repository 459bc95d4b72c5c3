//! Distributionally robust optimization with moment ambiguity sets, solved
//! through the Moment-SOS hierarchy with an embedded conic solver.

// `!(a < b)` rejects NaN on purpose; index loops mirror the matrix formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod conesolve;
pub mod drom;
pub mod error;
pub mod linalg;
pub mod momentkit;
pub mod polycore;
pub mod soskit;

pub use error::{DromError, Result};
