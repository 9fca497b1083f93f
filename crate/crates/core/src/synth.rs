//! Random admissible chains for testing and benchmarking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chain::TransitionMatrix;
use crate::loan_tape::ChainConfig;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Minimum probability mass each transient row sends straight to an
/// absorbing state, which keeps every generated chain applicable.
const MIN_ABSORBING_MASS: f64 = 0.1;

/// Generates a random canonical-form chain with `n_transient` transient
/// states whose non-absorbing states are all genuinely transient.
///
/// Every transient row mixes a random distribution with at least 10%
/// direct absorption, so the transient block is strictly substochastic
/// and classification always returns an applicable verdict.
pub fn random_applicable_chain<T: Scalar>(seed: u64, n_transient: usize) -> TransitionMatrix<T> {
    assert!(n_transient >= 2, "need the forborne state plus one month");
    let mut cfg = ChainConfig::<T>::new(n_transient);
    cfg.npl_threshold = cfg.npl_threshold.min(n_transient - 1);
    let n = cfg.n_states();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Matrix::<T>::zeros(n, n);
    entries[(0, 0)] = T::one();
    entries[(1, 1)] = T::one();

    // forborne: survives with some probability, fails otherwise
    let p: f64 = rng.random_range(0.05..0.95);
    entries[(2, 0)] = T::from_f64(p);
    entries[(2, 1)] = T::from_f64(1.0 - p);

    for i in 3..n {
        let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for v in raw.iter_mut() {
            *v /= total;
        }
        // guaranteed leak to the absorbing pair
        let cure_share: f64 = rng.random_range(0.0..1.0);
        let free = 1.0 - MIN_ABSORBING_MASS;
        let mut row: Vec<f64> = raw.iter().map(|v| v * free).collect();
        row[0] += MIN_ABSORBING_MASS * cure_share;
        row[1] += MIN_ABSORBING_MASS * (1.0 - cure_share);
        // exact renormalization against accumulated rounding
        let sum: f64 = row.iter().sum();
        for (j, v) in row.iter().enumerate() {
            entries[(i, j)] = T::from_f64(v / sum);
        }
    }

    TransitionMatrix::new(entries, cfg).expect("generated chain satisfies the invariants")
}
