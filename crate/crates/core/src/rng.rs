//! Counter-based random streams.
//!
//! Every Monte Carlo path owns the ChaCha stream selected by its index, keyed
//! by the user seed. A path's draws therefore never depend on which worker
//! simulates it or in which order paths are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type PathRng = ChaCha8Rng;

/// Generator for path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[inline]
pub fn normal(rng: &mut PathRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_normals(rng: &mut PathRng, out: &mut [f64]) {
    for v in out {
        *v = normal(rng);
    }
}
