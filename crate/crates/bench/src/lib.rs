//! Fixtures shared by the criterion benchmarks.

use snapqv::hilbert::haar_unitary;
use snapqv::lindblad::DensityMatrix;
use snapqv::{rng, Operator, C64};

pub const CHI: f64 = 2.0 * std::f64::consts::PI * 1e6;

pub fn haar(d: usize, seed: u64) -> Operator {
    haar_unitary(d, &mut rng::rng_from_seed(seed))
}

/// First column of a seeded Haar unitary.
pub fn haar_state(d: usize, seed: u64) -> Vec<C64> {
    let u = haar(d, seed);
    (0..d).map(|i| u.get(i, 0)).collect()
}

/// |0⟩ ⊗ |g⟩ on an `n`-level cavity.
pub fn vacuum(n: usize) -> DensityMatrix {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[0] = C64::new(1.0, 0.0);
    DensityMatrix::product_pure(&v, false).expect("vacuum is a valid state")
}
