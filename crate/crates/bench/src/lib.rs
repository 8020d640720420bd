//! Seeded fixtures shared by the benchmarks.

use ksep_core::states::{random_density, random_product_factors};
use ksep_core::{DensityMatrix, ProductProbe};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random rank-`rank` state on `n` qubits.
pub fn qubit_state(n: usize, rank: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_density(&vec![2; n], rank, &mut rng).expect("valid qubit dims")
}

pub fn qubit_probe(n: usize, seed: u64) -> ProductProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = vec![2; n];
    ProductProbe::new(
        random_product_factors(&dims, &mut rng),
        random_product_factors(&dims, &mut rng),
    )
    .expect("unit factors")
}
