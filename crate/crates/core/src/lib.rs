//! Online synthesis of state-feedback gains that minimize an upper bound on
//! the H2 cost of a discrete-time linear plant while keeping the closed-loop
//! H-infinity norm below a prescribed level, with regret measured against
//! the best fixed gain in hindsight.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod bench;
pub mod error;
pub mod numkernel;
pub mod online;
pub mod riccati;
pub mod sysmodel;

pub use error::{Error, InitFailure, Result};
