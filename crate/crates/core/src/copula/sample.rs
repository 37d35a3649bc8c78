use rand::distr::Open01;
use rand::Rng;

use super::{CopulaModel, Pair};
use crate::rng::{self, tag};

/// Draws `n` pairs by conditional inversion: `v ~ U(0,1)`, `w ~ U(0,1)`,
/// `u = h⁻¹(w | v)`. Deterministic in `seed`.
pub fn sample(model: &CopulaModel, n: usize, seed: u64) -> Vec<Pair> {
    let mut rng = rng::stream(seed, tag::COPULA_SAMPLE, &[]);
    sample_with(model, n, &mut rng)
}

pub(crate) fn sample_with<R: Rng>(model: &CopulaModel, n: usize, rng: &mut R) -> Vec<Pair> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.sample(Open01);
            let w: f64 = rng.sample(Open01);
            (model.h_inverse(w, v), v)
        })
        .collect()
}
