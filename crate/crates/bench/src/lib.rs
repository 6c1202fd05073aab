//! Deterministic fixtures for the kernel benchmarks: seeded random
//! operators and the small scenarios the solvers are exercised on.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use qpm_core::quantum::random_density;
use qpm_core::scenario::{identity_target, ScenarioSpec};
use qpm_core::tensor::Operator;
use qpm_core::{Dims, InputSet, MessageKind, ResourceSpec};

/// Seeded full-rank density operator on `n` qubits.
pub fn qubit_density(n: usize, seed: u64) -> Operator {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dims = Dims::new(vec![2; n]).expect("qubit dims");
    let total = dims.total();
    random_density(dims, total, &mut rng).expect("density fixture")
}

/// One-qubit relay task on the SIC grid: reproduce the input on demand.
pub fn relay_scenario() -> ScenarioSpec {
    let target = identity_target(&[2]).expect("identity target");
    ScenarioSpec::new(vec![2], InputSet::DesignGrid, 1, 2, vec![target])
        .expect("relay scenario")
}

/// Two-bit classical channel with a maximally entangled qubit pair.
pub fn relay_resource() -> ResourceSpec {
    let state = qpm_core::quantum::max_entangled(2)
        .expect("pair state")
        .projector();
    ResourceSpec::new(4, state, 1, MessageKind::Classical).expect("relay resource")
}
