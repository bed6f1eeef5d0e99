use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use detbundle::detline::{cocycle_defect, transition};
use detbundle::linalg::{CMat, C64};
use detbundle::{BlockOperator, Result, TraceClassPerturbation};

pub struct SweepOutcome {
    pub trials: usize,
    pub max_relative_defect: f64,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Random `(T, A, B, C)` with `n ≤ 16` and kernels of dimension up to 3.
pub fn random_cocycle_sweep(seed: u64, trials: usize, tol: f64) -> Result<SweepOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let n = rng.random_range(1..=16);
        let d = rng.random_range(0..=n.min(3));
        let u = gaussian(&mut rng, n).qr().q();
        let v = gaussian(&mut rng, n).qr().q();
        let sigma = CMat::from_fn(n, n, |r, c| {
            if r == c && r < n - d {
                C64::new(0.5 + r as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let t = BlockOperator::new(u * sigma * v.adjoint())?;
        let a = TraceClassPerturbation::new(gaussian(&mut rng, n))?;
        let b = TraceClassPerturbation::new(gaussian(&mut rng, n))?;
        let c = TraceClassPerturbation::new(gaussian(&mut rng, n))?;
        let defect = cocycle_defect(&t, &a, &b, &c, tol)?;
        let scale = transition(&t, &a, &c, tol)?.norm();
        worst = worst.max(defect / scale);
    }
    Ok(SweepOutcome {
        trials,
        max_relative_defect: worst,
    })
}
