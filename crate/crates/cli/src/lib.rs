//! File formats, basis cache, benchmark harness and command line front end
//! for the `mstsvd` denoisers. This is the only crate that touches the
//! filesystem.

pub mod bench;
pub mod cache;
pub mod cli;
pub mod error;
pub mod io;

pub use cli::run;
pub use error::{CliError, CliResult};
