//! Command-line front end: configuration, single-point commands, figure
//! data, sweeps and the validation suite.

pub mod checks;
pub mod commands;
pub mod config;
mod error;
pub mod output;
pub mod sweep;

pub use error::{CliError, Result};

/// Environment variable bounding the worker pool.
pub const THREADS_ENV: &str = "HYDROFRICTION_THREADS";

/// Worker pool for sweeps and figure data, sized by `HYDROFRICTION_THREADS`
/// when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var(THREADS_ENV) {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}: expected a positive integer, got `{s}`")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))
}
