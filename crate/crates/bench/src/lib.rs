//! Shared fixtures for the criterion benches.

use nalgebra::{DMatrix, DVector};
use ncreg::Dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Gaussian design with a sparse truth `(3, 1.5, 0, 0, 2, 0, ...)` plus unit noise.
pub fn regression(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let x = DMatrix::from_fn(n, p, |_, _| draw());
    let mut w = DVector::zeros(p);
    for (j, v) in [3.0, 1.5, 0.0, 0.0, 2.0].iter().enumerate().take(p) {
        w[j] = *v;
    }
    let noise = DVector::from_fn(n, |_, _| draw());
    let y = &x * w + noise;
    Dataset::new(x, y).expect("finite data")
}

/// Labels in {0, 1} from a logistic model on the same design.
pub fn classification(n: usize, p: usize, seed: u64) -> Dataset {
    let d = regression(n, p, seed);
    let y = d.y.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    Dataset::new(d.x, y).expect("finite data")
}
