//! Reproducible random streams.
//!
//! Every replica owns a ChaCha8 generator keyed by the 64-bit base seed and
//! positioned on stream number `replica` (`set_stream`). ChaCha keys are
//! derived from the base seed with `seed_from_u64` (PCG32 expansion), so the
//! mapping `(base_seed, replica) -> stream` is fixed and platform independent.
//! Work is handed to rayon one replica per item and collected in index order,
//! so any reduction over the returned vector is identical for every thread
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::geometry::Vector;

pub type SimRng = ChaCha8Rng;

pub fn replica_rng(base_seed: u64, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(replica);
    rng
}

/// Centered Gaussian vector with covariance `variance * I`.
#[inline]
pub fn gaussian<const D: usize, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Vector<D> {
    let s = variance.sqrt();
    let mut v = [0.0; D];
    for c in v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *c = s * z;
    }
    Vector(v)
}

/// Run `n` independent replicas in parallel; results come back in replica order.
pub fn run_replicas<T, F>(n: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(base_seed, i as u64);
            f(i, &mut rng)
        })
        .collect()
}

/// Split `total` work units into `batches` nearly equal chunk sizes.
pub fn batch_sizes(total: usize, batches: usize) -> Vec<usize> {
    let base = total / batches;
    let extra = total % batches;
    (0..batches).map(|i| base + usize::from(i < extra)).collect()
}
