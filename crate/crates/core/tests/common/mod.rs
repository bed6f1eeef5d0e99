#![allow(dead_code)]

use detbundle::linalg::{CMat, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    gaussian(rng, n, n).qr().q()
}

pub fn hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = gaussian(rng, n, n);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}
