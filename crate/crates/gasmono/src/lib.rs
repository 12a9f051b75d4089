//! File formats and command-line front end for the gas network solver.

pub mod cli;
pub mod error;
pub mod io;

pub use error::{CliError, Result};
pub use gasmono_core as core;
