//! Fixtures shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varsphere::simulation::simulate_sample;
use varsphere::{Resultant, Weights};

/// Normed resultants of one simulated 21-variable sample of size `n`, with the true partition.
pub fn sample(n: usize, seed: u64) -> (Weights, Vec<Resultant>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = simulate_sample(n, std::f64::consts::FRAC_PI_3, 0.1, &mut rng).expect("valid design");
    let w = Weights::uniform(n);
    let rs = s.resultants(&w).expect("encodable sample");
    (w, rs, s.truth)
}
