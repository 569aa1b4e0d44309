//! Fixtures shared by the criterion benchmarks.

use frfkit_core::bench::{
    equidistant, f_rat, sample_random_circuit, CIRCUIT_OMEGA_MAX, CIRCUIT_OMEGA_MIN,
};
use frfkit_core::interpolate::{validate_training, TrainingSet, ValidatedTraining};

/// `n` equidistant samples of the rational test function on `[0, 1]`.
pub fn frat_training(n: usize) -> ValidatedTraining {
    let ts = TrainingSet::from_fn(&equidistant(0.0, 1.0, n), f_rat).expect("finite samples");
    validate_training(ts, true).expect("distinct frequencies")
}

/// `n` equidistant samples of a random circuit with two dominant branches.
pub fn circuit_training(n: usize, seed: u64) -> TrainingSet {
    let spec = sample_random_circuit(1000, seed, true);
    TrainingSet::from_fn(&equidistant(CIRCUIT_OMEGA_MIN, CIRCUIT_OMEGA_MAX, n), |w| {
        spec.admittance_omega(w)
    })
    .expect("finite samples")
}
