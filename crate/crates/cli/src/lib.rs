//! File formats and command implementations behind the `stabrad` binary.
//!
//! Problems are JSON files naming Matrix Market matrices; results are JSON
//! records that carry a certificate `(U, V)` so the radius can be re-checked
//! without rerunning the solver.

pub mod commands;
mod error;
pub mod mm;
pub mod output;
pub mod problem;
pub mod record;

pub use error::{CliError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
