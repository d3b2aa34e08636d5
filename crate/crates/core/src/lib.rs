//! Exact-arithmetic laboratory for expander graphs, constraint
//! satisfaction, locally testable codes, and gap amplification.

pub mod error;
pub mod exactmath;
pub mod specgraph;
pub mod csp;
pub mod hadamard;
pub mod dinur;
pub mod harness;

pub use error::{Error, Result};
