//! Fixtures shared by the kernel benchmarks.

use num_complex::Complex64 as C64;
use quasilocal::chain::{build_hamiltonian, rng_for, sample_disorder, symmetric_uniform};
use quasilocal::{OperatorSum, PauliString};

/// The disordered chain for `seed`.
pub fn chain(seed: u64, length: usize, gamma: f64) -> OperatorSum {
    build_hamiltonian(&sample_disorder(seed, length, gamma).expect("valid chain")).expect("valid hamiltonian")
}

/// `terms` random Pauli words on `n` sites with coefficients in `[-1, 1)`.
pub fn random_sum(n: usize, terms: usize, seed: u64) -> OperatorSum {
    let mut rng = rng_for(seed);
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let words = (0..terms).map(|_| {
        let x = rand::RngCore::next_u64(&mut rng) & mask;
        let z = rand::RngCore::next_u64(&mut rng) & mask;
        let c = symmetric_uniform(&mut rng);
        (PauliString::new(n, x, z).expect("masked word"), C64::new(c, 0.0))
    });
    OperatorSum::from_terms(n, words).expect("valid sum")
}

/// `σz` on `site`.
pub fn sigma_z(n: usize, site: usize) -> OperatorSum {
    OperatorSum::from_word(PauliString::sigma_z(n, site), C64::new(1.0, 0.0))
}
