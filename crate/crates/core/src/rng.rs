//! Seed management.
//!
//! A master seed fans out into ChaCha streams addressed by a small path of
//! indices (task, grid point, batch). Distinct paths select distinct ChaCha
//! stream ids, so results do not depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples handled by one RNG stream in the parallel Monte Carlo loops.
pub const BATCH_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    master: u64,
    stream: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// A child stream. Children of distinct indices never collide with each
    /// other or with their parent's other descendants at the same depth.
    pub fn child(&self, index: u64) -> Self {
        Self {
            master: self.master,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `samples` draws of `draw` in fixed-size batches, one stream per
/// batch, in parallel; the output order is the batch order.
pub fn par_samples<T, F>(seed: SeedStream, samples: usize, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    use rayon::prelude::*;
    let batches = samples.div_ceil(BATCH_SIZE);
    let chunks: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed.child(b as u64).rng();
            let len = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}
