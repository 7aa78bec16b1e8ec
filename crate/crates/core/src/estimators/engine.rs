use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::stats::MultiStats;
use crate::vecspace::RngStream;

/// Draws per block. Block `b` always uses `stream.substream(b)`.
pub const BLOCK_SIZE: usize = 8192;

/// Runs `n` draws of a `k`-vector observable in parallel blocks.
///
/// `f` fills its output slice from one draw. Blocks are merged in index
/// order, so the result is bit-identical for any thread count.
pub fn run_blocks<F>(n: usize, k: usize, stream: &RngStream, f: F) -> Result<MultiStats>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) -> Result<()> + Sync,
{
    let blocks = n.div_ceil(BLOCK_SIZE);
    let parts: Vec<Result<MultiStats>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b as u64).rng();
            let count = BLOCK_SIZE.min(n - b * BLOCK_SIZE);
            let mut stats = MultiStats::new(k);
            let mut obs = vec![0.0; k];
            for _ in 0..count {
                f(&mut rng, &mut obs)?;
                if let Some(bad) = obs.iter().find(|v| !v.is_finite()) {
                    return Err(LabError::NonFinite(format!("Monte Carlo draw produced {bad}")));
                }
                stats.push(&obs);
            }
            Ok(stats)
        })
        .collect();
    let mut total = MultiStats::new(k);
    for part in parts {
        total.merge(&part?);
    }
    Ok(total)
}
