//! Experiment runner for RIS-assisted group key generation sweeps.

pub mod config;
pub mod nist_run;
pub mod pipeline;
pub mod sweep;

/// Environment variable naming the default worker-thread count.
pub const WORKERS_ENV: &str = "GKG_WORKERS";

/// Builds the global rayon pool: explicit flag wins, then the environment
/// variable, then the rayon default (one thread per core).
pub fn init_workers(workers: Option<usize>) -> Result<(), rayon::ThreadPoolBuildError> {
    let n = workers.or_else(|| {
        std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok())
    });
    match n {
        Some(n) if n > 0 => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()
        }
        _ => Ok(()),
    }
}
