//! The universal two-qubit protocol: one shared qubit pair, a four-outcome
//! measurement on the two input qubits and the sender's entangled half,
//! and input-independent Pauli corrections.
//!
//! For every product pure input `ψ_1 ⊗ ψ_2` and receiver choice `y`, the
//! output is exactly `(5/6) ψ_y + (1/6) ψ_y^⊥` — equivalently
//! `(2/3) ψ_y + (1/6) 1` — so the fidelity is `5/6` for every input, and
//! the exact closed forms for mixed inputs, entangled inputs, and noisy
//! resources below all follow from the same construction.

use crate::error::{Error, Result};
use crate::quantum::{fidelity, fidelity_to_pure, max_entangled, ChoiState, Povm, WeylOps};
use crate::scenario::{
    avg_fidelity, partial_trace_target, ClassicalProtocol, InputSet, MessageKind, Protocol,
    ResourceSpec, ScenarioSpec,
};
use crate::tensor::{kron, kron_vec, partial_trace, permute_vec, Dims, Operator, PureVector, C64};

/// The eight orthonormal states on `[input 1, input 2, sender half]` whose
/// rank-2 sums form the encoding measurement: from the fiducial
/// `√(2/3)|001⟩ − (1/√6)(|010⟩ + |100⟩)`, state `(c_0, c_1, k)` is
/// `X^{c_1+c_0+k} Z^{c_1} ⊗ X^{c_1+k} Z^{c_0} ⊗ X^k` applied to it.
/// Returned grouped by message: index `c * 2 + k` with `c = 2 c_0 + c_1`.
pub fn encoder_states() -> Result<Vec<PureVector>> {
    let dims = Dims::new(vec![2, 2, 2])?;
    let mut amps = vec![C64::new(0.0, 0.0); 8];
    amps[0b001] = C64::new((2.0f64 / 3.0).sqrt(), 0.0);
    amps[0b010] = C64::new(-1.0 / 6.0f64.sqrt(), 0.0);
    amps[0b100] = C64::new(-1.0 / 6.0f64.sqrt(), 0.0);
    let fiducial = PureVector::new(dims, amps)?;
    let weyl = WeylOps::new(2)?;
    let mut states = Vec::with_capacity(8);
    for c0 in 0..2usize {
        for c1 in 0..2usize {
            for k in 0..2usize {
                let first = weyl.op((c1 + c0 + k) % 2, c1);
                let second = weyl.op((c1 + k) % 2, c0);
                let third = weyl.op(k, 0);
                let op = kron(&kron(first, second)?, third)?;
                states.push(fiducial.apply(&op));
            }
        }
    }
    Ok(states)
}

/// The four rank-2 encoding effects (message `c = 2 c_0 + c_1`).
pub fn encoder_effects() -> Result<Vec<Operator>> {
    let states = encoder_states()?;
    Ok((0..4)
        .map(|c| {
            states[2 * c]
                .projector()
                .add(&states[2 * c + 1].projector())
        })
        .collect())
}

/// The receiver's correction unitaries, indexed `[message][y]`.
///
/// With `m = y + 1` (the two receiver choices as 1 and 2), message
/// `c = (c_0, c_1)` is corrected by
/// `X^{1 + m c_0 + c_1} Z^{1 + (1+m) c_0 + m c_1}` (exponents mod 2).
pub fn correction_unitaries() -> Result<Vec<Vec<Operator>>> {
    let weyl = WeylOps::new(2)?;
    let mut table = Vec::with_capacity(4);
    for c0 in 0..2usize {
        for c1 in 0..2usize {
            let mut per_y = Vec::with_capacity(2);
            for y in 0..2usize {
                let m = y + 1;
                let xe = (1 + m * c0 + c1) % 2;
                let ze = (1 + (1 + m) * c0 + m * c1) % 2;
                per_y.push(weyl.op(xe, ze).clone());
            }
            table.push(per_y);
        }
    }
    Ok(table)
}

/// The universal protocol for two qubit inputs: one shared maximally
/// entangled qubit pair, the four-outcome measurement above, and the
/// fixed Pauli corrections.  Its output law is
/// `τ = (2/3) ψ_y + (1/6) 1` for every product pure input.
pub fn universal_protocol_2qubit() -> Result<ClassicalProtocol> {
    let resource = ResourceSpec::new(
        4,
        max_entangled(2)?.projector(),
        1,
        MessageKind::Classical,
    )?;
    let encoder = Povm::new(encoder_effects()?)?;
    let decoders = correction_unitaries()?
        .into_iter()
        .map(|per_y| {
            per_y
                .iter()
                .map(ChoiState::from_unitary)
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    ClassicalProtocol::new(resource, encoder, decoders)
}

/// The scenario the universal protocol addresses: two qubit inputs, the
/// receiver asks for one of them (partial-trace targets).
pub fn universal_scenario(input_set: InputSet) -> Result<ScenarioSpec> {
    let dims = vec![2usize, 2];
    let targets = (0..2)
        .map(|y| partial_trace_target(&dims, y))
        .collect::<Result<Vec<_>>>()?;
    ScenarioSpec::new(dims, input_set, 2, 2, targets)
}

/// Exact fidelity of the universal protocol on two mixed inputs of purity
/// `t = tr(ρ²) ∈ [1/2, 1]`:
/// `F(t) = (1 + 4t + √2 √(8t² − 21t + 13)) / 6`.
pub fn mixed_input_fidelity(t: f64) -> Result<f64> {
    if !(0.5..=1.0 + 1e-12).contains(&t) {
        return Err(Error::invalid(
            "purity",
            format!("qubit purity must lie in [1/2, 1], got {t}"),
        ));
    }
    let t = t.min(1.0);
    let radicand = (8.0 * t * t - 21.0 * t + 13.0).max(0.0);
    Ok((1.0 + 4.0 * t + std::f64::consts::SQRT_2 * radicand.sqrt()) / 6.0)
}

/// Runs the universal protocol on the product of two rank-2 mixed inputs
/// `ρ_i = λ ψ_i + (1−λ) ψ_i^⊥` (independent seeded random bases) by
/// expanding over the eigenbasis products, and returns the fidelity of the
/// output to `ρ_y` for `y = 0` and `y = 1`.
pub fn universal_mixed_simulation(lambda: f64, seed: u64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(
            "weight",
            format!("mixing weight must lie in [0, 1], got {lambda}"),
        ));
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let bases: Vec<[PureVector; 2]> = (0..2)
        .map(|_| {
            let psi = crate::quantum::haar_state(Dims::single(2)?, &mut rng);
            let perp = orthogonal_qubit(&psi)?;
            Ok([psi, perp])
        })
        .collect::<Result<Vec<_>>>()?;
    let weights = [lambda, 1.0 - lambda];

    // All four eigenvector products, run through the protocol exactly.
    let catalogue: Vec<PureVector> = (0..4)
        .map(|idx| kron_vec(&bases[0][idx / 2], &bases[1][idx % 2]))
        .collect::<Result<Vec<_>>>()?;
    let scenario = ScenarioSpec::from_catalogue(
        vec![2, 2],
        catalogue,
        4,
        2,
        2,
        (0..2)
            .map(|y| partial_trace_target(&[2, 2], y))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let protocol = Protocol::Classical(universal_protocol_2qubit()?);
    let table = protocol.correlations(&scenario)?;

    let mut out = [0.0f64; 2];
    for (y, slot) in out.iter_mut().enumerate() {
        // τ(ρ_1 ⊗ ρ_2) by linearity of the protocol in its input.
        let mut tau = Operator::zeros(Dims::single(2)?);
        for idx in 0..4 {
            let w = weights[idx / 2] * weights[idx % 2];
            tau = tau.add(&table.entry(idx, y).scale_re(w));
        }
        let target = bases[y][0]
            .projector()
            .scale_re(lambda)
            .add(&bases[y][1].projector().scale_re(1.0 - lambda));
        *slot = fidelity(&tau, &target)?;
    }
    Ok((out[0], out[1]))
}

/// Exact fidelity of the universal protocol when each input is half of an
/// entangled pair `cos θ |00⟩ + sin θ |11⟩`, judged jointly with the
/// reference half: `F(θ) = 5/6 − sin²(2θ)/12` for `θ ∈ [0, π/4]`.
pub fn swap_fidelity(theta: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&theta) {
        return Err(Error::invalid(
            "angle",
            format!("entangling angle must lie in [0, π/4], got {theta}"),
        ));
    }
    let s = (2.0 * theta).sin();
    Ok(5.0 / 6.0 - s * s / 12.0)
}

/// Simulates the entanglement-swapping use of the universal protocol: both
/// inputs are halves of pairs `|ψ_θ⟩ = cos θ |00⟩ + sin θ |11⟩` held with
/// external references, the protocol runs on the two input halves, and the
/// returned values are the fidelities of the joint (reference `y`, output)
/// states with `ψ_θ`, for `y = 0` and `y = 1`.
///
/// This is a six-qubit density-operator simulation — the references never
/// pass through the protocol interfaces.
pub fn universal_swap_simulation(theta: f64) -> Result<(f64, f64)> {
    if !(0.0..=std::f64::consts::FRAC_PI_4 + 1e-12).contains(&theta) {
        return Err(Error::invalid(
            "angle",
            format!("entangling angle must lie in [0, π/4], got {theta}"),
        ));
    }
    let pair_dims = Dims::new(vec![2, 2])?;
    let mut amps = vec![C64::new(0.0, 0.0); 4];
    amps[0] = C64::new(theta.cos(), 0.0);
    amps[3] = C64::new(theta.sin(), 0.0);
    let pair = PureVector::new(pair_dims, amps)?;

    // Order [R1, A'1, R2, A'2, A, B], then bring the measured factors to
    // the front: [A'1, A'2, A, R1, R2, B].
    let raw = kron_vec(&kron_vec(&pair, &pair)?, &max_entangled(2)?)?;
    let arranged = permute_vec(&raw, &[1, 3, 4, 0, 2, 5])?;
    let rho = arranged.projector();

    let effects = encoder_effects()?;
    let corrections = correction_unitaries()?;
    let id2 = Operator::identity(Dims::single(2)?);
    let id_rest = Operator::identity(Dims::new(vec![2, 2, 2])?);

    let mut out = [0.0f64; 2];
    for (y, slot) in out.iter_mut().enumerate() {
        let mut tau = Operator::zeros(Dims::new(vec![2, 2, 2])?);
        for (c, effect) in effects.iter().enumerate() {
            let lifted = kron(effect, &id_rest)?;
            let sub = partial_trace(&rho.mul(&lifted), &[3, 4, 5])?;
            let correction = kron(&kron(&id2, &id2)?, &corrections[c][y])?;
            tau = tau.add(&correction.mul(&sub).mul(&correction.adjoint()));
        }
        // Keep (R_y, output).
        let joint = partial_trace(&tau, &[y, 2])?;
        *slot = fidelity_to_pure(&joint, &pair);
    }
    Ok((out[0], out[1]))
}

/// Runs the universal protocol with the noisy resource
/// `ρ_v = v φ⁺ + (1−v) 1/4` for each visibility in `grid`, returning
/// `(v, design-average fidelity)` pairs.  The exact law is
/// `F(v) = v (5/6) + (1−v)/2`, crossing the classical value `2/3` at
/// `v = 1/2`.
pub fn noisy_resource_sweep(grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let clean = universal_protocol_2qubit()?;
    let scenario = universal_scenario(InputSet::DesignGrid)?;
    let phi = max_entangled(2)?.projector();
    let mixed = Operator::identity(Dims::new(vec![2, 2])?).scale_re(0.25);
    grid.iter()
        .map(|&v| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(
                    "visibility",
                    format!("visibility must lie in [0, 1], got {v}"),
                ));
            }
            let resource = ResourceSpec::new(
                4,
                phi.scale_re(v).add(&mixed.scale_re(1.0 - v)),
                1,
                MessageKind::Classical,
            )?;
            let noisy = ClassicalProtocol::new(
                resource,
                clean.encoder().clone(),
                clean.decoders().to_vec(),
            )?;
            let table = Protocol::Classical(noisy).correlations(&scenario)?;
            Ok((v, avg_fidelity(&table, &scenario)?))
        })
        .collect()
}

/// The state orthogonal to a qubit pure state.
fn orthogonal_qubit(psi: &PureVector) -> Result<PureVector> {
    if psi.dims().total() != 2 {
        return Err(Error::dim("orthogonal complement shortcut needs a qubit".to_string()));
    }
    let a = psi.vector()[0];
    let b = psi.vector()[1];
    PureVector::new(psi.dims().clone(), vec![-b.conj(), a.conj()])
}
