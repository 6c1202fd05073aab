//! Transformations between classical- and quantum-message protocols that
//! preserve the correlation table exactly.
//!
//! Quantum → classical: teleport the message register through an extra
//! maximally entangled pair.  The sender's channel followed by a
//! generalized Bell measurement on (message, her extra half) becomes a
//! POVM with `d_C²` outcomes; the receiver pre-corrects his extra half
//! with the matching Weyl unitary before running the original decoder.
//!
//! Classical → quantum: dense-code the classical message (alphabet must be
//! a perfect square `d_C²`) into a `d_C`-dimensional register using one
//! extra maximally entangled pair; the receiver discriminates the
//! displaced entangled basis perfectly and runs the original decoder.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::quantum::{
    bell_basis, choi_from_kraus, kraus_from_choi, max_entangled, KrausOp, Povm, WeylOps,
};
use crate::scenario::{
    ClassicalProtocol, MessageKind, QuantumProtocol, ResourceSpec,
};
use crate::tensor::{hermitian_eig, kron, permute_subsystems, Dims, Operator, C64};

/// Appends a maximally entangled pair of local dimension `d_c` to a shared
/// state ordered `[sender.., receiver..]`, returning the state ordered
/// `[sender.., pair_half, receiver.., pair_half]`.
fn extend_resource(resource: &ResourceSpec, d_extra: usize) -> Result<Operator> {
    let p = resource.alice_factors();
    let q = resource.shared_state().dims().len() - p;
    let joint = kron(
        resource.shared_state(),
        &max_entangled(d_extra)?.projector(),
    )?;
    // [a.., b.., E_A, E_B] → [a.., E_A, b.., E_B]
    let mut perm = Vec::with_capacity(p + q + 2);
    perm.extend(0..p);
    perm.push(p + q);
    perm.extend(p..p + q);
    perm.push(p + q + 1);
    permute_subsystems(&joint, &perm)
}

/// Rewrites a quantum-message protocol as a classical-message protocol
/// with alphabet `d_C²` and one extra shared maximally entangled pair,
/// reproducing its correlation table exactly.
pub fn classicalize(protocol: &QuantumProtocol) -> Result<ClassicalProtocol> {
    let d_c = protocol.resource().d_c();
    let resource = ResourceSpec::new(
        d_c * d_c,
        extend_resource(protocol.resource(), d_c)?,
        protocol.resource().alice_factors() + 1,
        MessageKind::Classical,
    )?;

    // Encoder: the channel's adjoint applied to each Bell projector on
    // (message, sender pair half), realised through the Kraus form so the
    // effects are manifestly positive.
    let kraus = kraus_from_choi(protocol.encoder())?;
    let id_c = DMatrix::<C64>::identity(d_c, d_c);
    let lifted: Vec<DMatrix<C64>> =
        kraus.iter().map(|k| k.matrix().kronecker(&id_c)).collect();
    let effect_dims = protocol.encoder().in_dims().join(&Dims::single(d_c)?)?;
    let basis = bell_basis(d_c)?;
    let effects = basis
        .iter()
        .map(|phi| {
            let proj = phi.projector();
            let mut m = DMatrix::<C64>::zeros(effect_dims.total(), effect_dims.total());
            for l in &lifted {
                m += l.adjoint() * proj.matrix() * l;
            }
            Operator::new(effect_dims.clone(), m)
        })
        .collect::<Result<Vec<_>>>()?;
    let encoder = Povm::new(effects)?;

    // Decoders: correct the teleportation residual on the received pair
    // half, then run the original decoder.
    let weyl = WeylOps::new(d_c)?;
    let id_b = Operator::identity(protocol.resource().bob_dims());
    let decoders = (0..d_c * d_c)
        .map(|label| {
            let (u, v) = weyl.unflat(label);
            let w = kron(&id_b, weyl.op(u, v))?;
            protocol
                .decoders()
                .iter()
                .map(|eta| eta.pre_compose_unitary(&w))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    ClassicalProtocol::new(resource, encoder, decoders)
}

/// Rewrites a classical-message protocol as a quantum-message protocol of
/// message dimension `√alphabet` (the alphabet must be a perfect square)
/// with one extra shared maximally entangled pair, reproducing its
/// correlation table exactly.
pub fn quantize(protocol: &ClassicalProtocol) -> Result<QuantumProtocol> {
    let alphabet = protocol.resource().d_c();
    let d_c = (alphabet as f64).sqrt().round() as usize;
    if d_c * d_c != alphabet {
        return Err(Error::AlphabetMismatch(format!(
            "dense coding needs a perfect-square alphabet, got {alphabet}"
        )));
    }
    let resource = ResourceSpec::new(
        d_c,
        extend_resource(protocol.resource(), d_c)?,
        protocol.resource().alice_factors() + 1,
        MessageKind::Quantum,
    )?;
    let weyl = WeylOps::new(d_c)?;

    // Encoder: measure the original POVM, then displace the sender's pair
    // half by the outcome's Weyl unitary and send it.
    let in_dims = protocol.encoder().dims().join(&Dims::single(d_c)?)?;
    let out_dims = Dims::single(d_c)?;
    let d_meas = protocol.encoder().dims().total();
    let mut kraus = Vec::new();
    for (c, effect) in protocol.encoder().elements().iter().enumerate() {
        let (u_idx, v_idx) = weyl.unflat(c);
        let u_c = weyl.op(u_idx, v_idx);
        let (vals, vecs) = hermitian_eig(effect)?;
        for (j, &val) in vals.iter().enumerate() {
            if val <= 1e-12 {
                continue;
            }
            let w = vecs.matrix().column(j) * C64::new(val.sqrt(), 0.0);
            let m = DMatrix::<C64>::from_fn(d_c, d_meas * d_c, |o, col| {
                let meas = col / d_c;
                let delta = col % d_c;
                w[meas].conj() * u_c.get(o, delta)
            });
            kraus.push(KrausOp::new(out_dims.clone(), in_dims.clone(), m)?);
        }
    }
    let encoder = choi_from_kraus(&kraus)?;

    // Decoders: discriminate the displaced entangled basis on (received
    // register, receiver pair half) — outcome `c` with certainty — then run
    // the original decoder for `(c, y)`.
    let bob = protocol.resource().bob_dims();
    let d_b = bob.total();
    let scale = 1.0 / (d_c as f64).sqrt();
    let dec_in = bob.join(&Dims::single(d_c)?)?.join(&Dims::single(d_c)?)?;
    let y_count = protocol.y_count();
    let mut decoders = Vec::with_capacity(y_count);
    for y in 0..y_count {
        let mut all_kraus = Vec::new();
        for c in 0..alphabet {
            let (u_idx, v_idx) = weyl.unflat(c);
            let u_c = weyl.op(u_idx, v_idx);
            for k in kraus_from_choi(protocol.decoder(c, y))? {
                let out = k.out_dims().clone();
                let d_out = out.total();
                let m = DMatrix::<C64>::from_fn(d_out, d_b * d_c * d_c, |o, col| {
                    let gamma = col % d_c;
                    let delta = (col / d_c) % d_c;
                    let b = col / (d_c * d_c);
                    k.matrix()[(o, b)] * (u_c.get(gamma, delta) * scale).conj()
                });
                all_kraus.push(KrausOp::new(out, dec_in.clone(), m)?);
            }
        }
        decoders.push(choi_from_kraus(&all_kraus)?);
    }

    QuantumProtocol::new(resource, encoder, decoders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{standard_teleport_protocol, universal_protocol_2qubit};
    use crate::protocols::universal::universal_scenario;
    use crate::quantum::{random_choi, random_density, ChoiState};
    use crate::scenario::{avg_fidelity, InputSet, Protocol, ScenarioSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn tables_match(a: &Protocol, b: &Protocol, s: &ScenarioSpec, tol: f64) {
        let ta = a.correlations(s).unwrap();
        let tb = b.correlations(s).unwrap();
        for k in 0..ta.k_count() {
            for y in 0..ta.y_count() {
                let dev = ta.entry(k, y).max_abs_diff(tb.entry(k, y));
                assert!(dev < tol, "tables differ by {dev:.3e} at (k={k}, y={y})");
            }
        }
    }

    fn teleport_scenario(d: usize) -> ScenarioSpec {
        ScenarioSpec::new(
            vec![d],
            InputSet::DesignGridAugmented { extra: 10, seed: 2 },
            1,
            d,
            vec![ChoiState::identity(d).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn quantize_teleportation_keeps_unit_fidelity() {
        let classical = standard_teleport_protocol(2).unwrap();
        let quantum = quantize(&classical).unwrap();
        let s = teleport_scenario(2);
        let table = Protocol::Quantum(quantum).correlations(&s).unwrap();
        assert!((avg_fidelity(&table, &s).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_preserves_teleportation_table() {
        let classical = standard_teleport_protocol(2).unwrap();
        let round = classicalize(&quantize(&classical).unwrap()).unwrap();
        let s = teleport_scenario(2);
        tables_match(
            &Protocol::Classical(classical),
            &Protocol::Classical(round),
            &s,
            1e-9,
        );
    }

    #[test]
    fn quantize_universal_preserves_table() {
        let classical = universal_protocol_2qubit().unwrap();
        let quantum = quantize(&classical).unwrap();
        let s = universal_scenario(InputSet::DesignGridAugmented { extra: 15, seed: 8 })
            .unwrap();
        tables_match(
            &Protocol::Classical(classical),
            &Protocol::Quantum(quantum),
            &s,
            1e-9,
        );
    }

    #[test]
    fn classicalize_random_quantum_protocol_preserves_table() {
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        let shared = random_density(Dims::new(vec![2, 2]).unwrap(), 3, &mut rng).unwrap();
        let resource = ResourceSpec::new(2, shared, 1, MessageKind::Quantum).unwrap();
        let encoder = random_choi(
            Dims::single(2).unwrap(),
            Dims::new(vec![2, 2]).unwrap(),
            4,
            &mut rng,
        )
        .unwrap();
        let decoders = (0..2)
            .map(|_| {
                random_choi(
                    Dims::single(2).unwrap(),
                    Dims::new(vec![2, 2]).unwrap(),
                    4,
                    &mut rng,
                )
                .unwrap()
            })
            .collect();
        let quantum = QuantumProtocol::new(resource, encoder, decoders).unwrap();
        let classical = classicalize(&quantum).unwrap();

        let s = ScenarioSpec::new(
            vec![2],
            InputSet::DesignGridAugmented { extra: 12, seed: 5 },
            2,
            2,
            vec![ChoiState::identity(2).unwrap(), ChoiState::identity(2).unwrap()],
        )
        .unwrap();
        tables_match(
            &Protocol::Quantum(quantum),
            &Protocol::Classical(classical),
            &s,
            1e-9,
        );
    }

    #[test]
    fn quantize_rejects_non_square_alphabet() {
        // A three-message protocol: measure a qutrit input in the
        // computational basis, receiver (one qubit, no sender share)
        // discards and re-prepares a fixed state.
        let dims3 = Dims::single(3).unwrap();
        let effects = (0..3)
            .map(|i| {
                let mut m = DMatrix::<C64>::zeros(3, 3);
                m[(i, i)] = C64::new(1.0, 0.0);
                Operator::new(dims3.clone(), m).unwrap()
            })
            .collect();
        let encoder = Povm::new(effects).unwrap();
        let shared = Operator::identity(Dims::single(2).unwrap()).scale_re(0.5);
        let resource = ResourceSpec::new(3, shared, 0, MessageKind::Classical).unwrap();
        let replace = {
            // Trace out the receiver qubit and emit |0⟩: Kraus |0⟩⟨b|.
            let kraus: Vec<KrausOp> = (0..2)
                .map(|b| {
                    let mut m = DMatrix::<C64>::zeros(3, 2);
                    m[(0, b)] = C64::new(1.0, 0.0);
                    KrausOp::new(dims3.clone(), Dims::single(2).unwrap(), m).unwrap()
                })
                .collect();
            choi_from_kraus(&kraus).unwrap()
        };
        let decoders = vec![vec![replace]; 3];
        let protocol = ClassicalProtocol::new(resource, encoder, decoders).unwrap();
        assert!(matches!(
            quantize(&protocol),
            Err(Error::AlphabetMismatch(_))
        ));
    }

    #[test]
    fn classicalize_rejects_oversize_message() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let shared = random_density(Dims::new(vec![2, 2]).unwrap(), 2, &mut rng).unwrap();
        let resource = ResourceSpec::new(16, shared, 1, MessageKind::Quantum).unwrap();
        let encoder = random_choi(
            Dims::single(16).unwrap(),
            Dims::new(vec![2, 2]).unwrap(),
            2,
            &mut rng,
        )
        .unwrap();
        // Rank ≥ d_in/d_out so the Choi marginal tr_out η is invertible.
        let decoders = vec![random_choi(
            Dims::single(2).unwrap(),
            Dims::new(vec![2, 16]).unwrap(),
            16,
            &mut rng,
        )
        .unwrap()];
        let quantum = QuantumProtocol::new(resource, encoder, decoders).unwrap();
        assert!(matches!(
            classicalize(&quantum),
            Err(Error::CapacityExceeded(_))
        ));
    }
}
