//! Seeded, block-parallel Monte Carlo engine.
//!
//! Work is cut into fixed-size blocks. Block `i` always draws from ChaCha
//! stream `i` of a generator keyed by the root seed, and block results are
//! reduced in index order, so every estimate is bit-identical regardless of
//! how many rayon workers run it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

/// Samples per block.
pub const BLOCK_SIZE: usize = 4096;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a root seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Generator for one block of one seeded run.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    rng.set_stream(block);
    rng
}

fn block_ranges(n: usize) -> impl IndexedParallelIterator<Item = (u64, usize, usize)> {
    let blocks = n.div_ceil(BLOCK_SIZE);
    (0..blocks).into_par_iter().map(move |b| {
        let start = b * BLOCK_SIZE;
        let len = BLOCK_SIZE.min(n - start);
        (b as u64, start, len)
    })
}

/// Sum of `draw` over `n` seeded samples.
///
/// `draw(rng, index)` produces one sample's contribution; `index` is the
/// global sample index, used for error reporting.
pub fn seeded_sum<F>(n: usize, seed: u64, draw: F) -> Result<f64>
where
    F: Fn(&mut ChaCha8Rng, usize) -> Result<f64> + Sync,
{
    let partials: Vec<f64> = block_ranges(n)
        .map(|(block, start, len)| {
            let mut rng = block_rng(seed, block);
            let mut acc = 0.0;
            for i in start..start + len {
                acc += draw(&mut rng, i)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(partials.iter().sum())
}

/// Collects `n` seeded samples in index order.
pub fn seeded_collect<T, F>(n: usize, seed: u64, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
{
    let blocks: Vec<Vec<T>> = block_ranges(n)
        .map(|(block, start, len)| {
            let mut rng = block_rng(seed, block);
            (start..start + len).map(|i| draw(&mut rng, i)).collect()
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Ordered, deterministic sum of a slice computed in parallel chunks.
pub fn ordered_sum<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync,
{
    let partials: Vec<f64> = items
        .par_chunks(BLOCK_SIZE)
        .map(|chunk| chunk.iter().map(&f).sum::<f64>())
        .collect();
    partials.iter().sum()
}
