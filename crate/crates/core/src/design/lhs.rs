use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::space::DesignSpace;

/// Latin hypercube sample of `n` points. Each dimension gets one point per
/// equal stratum, uniformly placed inside it, strata shuffled independently.
pub fn lhs_sample(space: &DesignSpace, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lhs_with_rng(space, n, &mut rng)
}

pub fn lhs_with_rng<R: Rng>(space: &DesignSpace, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; space.dim()]; n];
    if n == 0 {
        return out;
    }
    for d in 0..space.dim() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let lo = space.lower[d];
        let width = space.range(d) / n as f64;
        for (row, stratum) in out.iter_mut().zip(strata) {
            let u: f64 = rng.random();
            // Guard the open upper edge against rounding.
            row[d] = (lo + (stratum as f64 + u) * width).min(space.upper[d]);
        }
    }
    out
}
