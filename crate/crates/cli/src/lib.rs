//! Pipeline behind the `configbounds` binary.
//!
//! Every stage reads and writes plain files under one output directory:
//!
//! ```text
//! instances/manifest.json, instances/inst_NNNN.json   gen
//! duals/kappa.json, duals/dual_NNNN.json              duals
//! profile.csv, bounds.csv                             bounds
//! counterexample.json                                 counterexample
//! ```
//!
//! All outputs are pure functions of the inputs and the root seed; the
//! worker count only changes wall time.

pub mod error;
pub mod pipeline;

pub use error::{CliError, CliResult};
pub use pipeline::*;
