//! Command-line harness around `tdas-dicke-core`: TOML configuration,
//! scenario runners writing CSV/JSON data files, and per-figure presets.

// `!(x >= 0.0)` is the NaN-rejecting form used for config validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{Config, Scenario};
pub use error::CliError;
pub use runner::{run, RunReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reads `TDAS_THREADS` (a positive integer) and sizes the global rayon
/// pool accordingly. Unset means rayon's default.
pub fn init_thread_pool() -> Result<(), CliError> {
    let Ok(v) = std::env::var("TDAS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::config(format!("TDAS_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config(format!("cannot size thread pool: {e}")))
}
