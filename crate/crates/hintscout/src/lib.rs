//! File formats, JSON exports and the workflows behind the `hintscout`
//! command. The numerics live in [`hintscout_core`], re-exported here as
//! [`core`].

pub use hintscout_core as core;

pub mod check;
mod error;
pub mod export;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use error::{Error, Result};
pub use manifest::{load_dump, Dump, DumpManifest, LayerEntry};
pub use pipeline::{cmd_select, cmd_similarity, ReprOptions, SelectOptions};

/// Size the global worker pool from `HINTSCOUT_THREADS` (unset or 0 means
/// one worker per core).
pub fn init_threads_from_env() -> Result<()> {
    let threads = match std::env::var("HINTSCOUT_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::Usage(format!(
                "HINTSCOUT_THREADS must be a non-negative integer, got {v:?}"
            ))
        })?,
        Err(_) => 0,
    };
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}
