//! Analytic protocols: exact teleportation, its composition with random
//! access codes, the universal two-qubit construction, no-signaling boxes,
//! and the transformations between classical- and quantum-message
//! protocols.

pub mod nsbox;
pub mod rac;
pub mod transform;
pub mod universal;

pub use nsbox::{local_deterministic_box, ns_box, uniform_box, NsBox, Rational};
pub use rac::{rac_bound, rac_from_box, ClassicalRac, QuantumRac, RacStrategy};
pub use transform::{classicalize, quantize};
pub use universal::{
    mixed_input_fidelity, noisy_resource_sweep, swap_fidelity, universal_mixed_simulation,
    universal_protocol_2qubit, universal_scenario, universal_swap_simulation,
};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::quantum::{bell_basis, bell_povm, haar_state, max_entangled, sic_states, WeylOps};
use crate::scenario::{
    partial_trace_target, ClassicalProtocol, CorrelationTable, MessageKind, ResourceSpec,
    ScenarioSpec,
};
use crate::tensor::{kron, kron_vec, partial_trace, Dims, Operator, PureVector};
use crate::tol;

use nsbox::unflatten_input;
use rac::{gl2_label_maps, LabelMap};

/// The exact teleportation protocol for one `d`-dimensional input: shared
/// maximally entangled pair, generalized Bell measurement on the input and
/// the sender's half, and the matching Weyl correction on the receiver's
/// half.  Output equals the input exactly for every message outcome.
pub fn standard_teleport_protocol(d: usize) -> Result<ClassicalProtocol> {
    if !(2..=4).contains(&d) {
        return Err(Error::UnsupportedDimension(format!(
            "teleportation construction shipped for d in 2..=4, got {d}"
        )));
    }
    let resource = ResourceSpec::new(
        d * d,
        max_entangled(d)?.projector(),
        1,
        MessageKind::Classical,
    )?;
    let encoder = bell_povm(d)?;
    let weyl = WeylOps::new(d)?;
    let decoders = (0..d * d)
        .map(|label| {
            let (u, v) = weyl.unflat(label);
            Ok(vec![crate::quantum::ChoiState::from_unitary(weyl.op(u, v))?])
        })
        .collect::<Result<Vec<_>>>()?;
    ClassicalProtocol::new(resource, encoder, decoders)
}

/// Shape of a stochastic teleportation task: `n` independent
/// `d`-dimensional pure inputs, one of which (chosen by the receiver's
/// input `y`) must be reproduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StochasticTeleportSpec {
    pub n: usize,
    pub d: usize,
}

impl StochasticTeleportSpec {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || !(2..=4).contains(&d) {
            return Err(Error::UnsupportedDimension(format!(
                "need n >= 1 and d in 2..=4, got n={n}, d={d}"
            )));
        }
        let branches = (d * d).checked_pow(n as u32);
        if branches.is_none() || branches.unwrap() > (1 << 16) {
            return Err(Error::capacity(format!(
                "message branch enumeration d^(2n) too large for n={n}, d={d}"
            )));
        }
        Ok(Self { n, d })
    }

    /// Scenario with SIC product-grid averaging plus `extra` seeded random
    /// spot checks; targets are the partial traces onto each input slot.
    pub fn scenario(&self, extra: usize, seed: u64) -> Result<ScenarioSpec> {
        let dims = vec![self.d; self.n];
        let targets = (0..self.n)
            .map(|y| partial_trace_target(&dims, y))
            .collect::<Result<Vec<_>>>()?;
        ScenarioSpec::new(
            dims,
            crate::scenario::InputSet::DesignGridAugmented { extra, seed },
            self.n,
            self.d,
            targets,
        )
    }
}

/// A stochastic teleportation protocol assembled from `n` exact
/// teleportations and a random access code that tells the receiver which
/// correction to apply.
///
/// The sender Bell-measures each input against her half of the `k`-th
/// entangled pair, collects the outcome labels `x = (x_1, …, x_n)`, and the
/// code transmits enough about `x` for the receiver to guess `x_y`.  The
/// receiver applies the Weyl correction for his guess to his half of the
/// `y`-th pair.  Right guesses reproduce the input exactly; wrong guesses
/// leave a residual Weyl rotation.
#[derive(Clone, Debug)]
pub struct ComposedTeleport {
    spec: StochasticTeleportSpec,
    rac: RacStrategy,
    corrections: Vec<Operator>,
    bell_lifted: Vec<Operator>,
    maps: Vec<(LabelMap, LabelMap)>,
}

/// Composes a random access code strategy with the exact teleportation
/// layer.  The code's slot count and dimension must match the task.
pub fn compose_stochastic_teleport(
    rac: RacStrategy,
    spec: StochasticTeleportSpec,
) -> Result<ComposedTeleport> {
    if rac.n() != spec.n || rac.d() != spec.d {
        return Err(Error::AlphabetMismatch(format!(
            "code covers n={}, d={}, task needs n={}, d={}",
            rac.n(),
            rac.d(),
            spec.n,
            spec.d
        )));
    }
    let d = spec.d;
    let weyl = WeylOps::new(d)?;
    let corrections = weyl.all().to_vec();
    let id_b = Operator::identity(Dims::single(d)?);
    let bell_lifted = bell_basis(d)?
        .iter()
        .map(|state| kron(&state.projector(), &id_b))
        .collect::<Result<Vec<_>>>()?;
    let maps = gl2_label_maps(d)
        .into_iter()
        .map(|m| {
            let inv = m.inverse();
            (m, inv)
        })
        .collect();
    Ok(ComposedTeleport { spec, rac, corrections, bell_lifted, maps })
}

impl ComposedTeleport {
    pub fn spec(&self) -> StochasticTeleportSpec {
        self.spec
    }

    pub fn rac(&self) -> &RacStrategy {
        &self.rac
    }

    /// The exact average fidelity this composition attains over
    /// Haar-random inputs: `(d·P + 1)/(d + 1)` where `P` is the code's
    /// success probability.
    pub fn formula_fidelity(&self) -> Result<f64> {
        let p = self.rac.p_rac()?;
        let d = self.spec.d as f64;
        Ok((d * p + 1.0) / (d + 1.0))
    }

    /// Sub-normalized receiver states after the Bell measurement on one
    /// input: entry `v` is the receiver-half state for message outcome `v`
    /// (trace `1/d^2`), computed by contracting the measurement against
    /// `ψ ⊗ φ+` rather than by assuming the teleportation identity.
    fn measured_substates(&self, input: &PureVector) -> Result<Vec<Operator>> {
        let d = self.spec.d;
        if input.dims().total() != d {
            return Err(Error::dim(format!(
                "input has dimension {}, task is {d}-dimensional",
                input.dims().total()
            )));
        }
        let joint = kron_vec(input, &max_entangled(d)?)?.projector();
        self.bell_lifted
            .iter()
            .map(|proj| partial_trace(&joint.mul(proj), &[2]))
            .collect()
    }

    /// The receiver's output state for per-slot pure inputs and slot
    /// choice `y`.  With `symmetrize`, the parties average over a shared
    /// relabeling of the message alphabet (an invertible linear map on
    /// Weyl pairs), which spreads wrong-guess errors uniformly without
    /// changing the success rate; without it the output may depend on the
    /// input even when the average fidelity matches the formula.
    pub fn output_state(
        &self,
        inputs: &[PureVector],
        y: usize,
        symmetrize: bool,
    ) -> Result<Operator> {
        let subs = inputs
            .iter()
            .map(|psi| self.measured_substates(psi))
            .collect::<Result<Vec<_>>>()?;
        let sub_refs: Vec<&[Operator]> = subs.iter().map(|s| s.as_slice()).collect();
        self.output_from_substates(&sub_refs, y, symmetrize)
    }

    fn output_from_substates(
        &self,
        subs: &[&[Operator]],
        y: usize,
        symmetrize: bool,
    ) -> Result<Operator> {
        let n = self.spec.n;
        let d = self.spec.d;
        let k = d * d;
        if subs.len() != n || y >= n {
            return Err(Error::dim(format!(
                "got {} inputs and slot {y}, task has n={n}",
                subs.len()
            )));
        }
        let traces: Vec<Vec<f64>> = subs
            .iter()
            .map(|per_v| per_v.iter().map(|s| s.trace().re).collect())
            .collect();

        let identity = [(LabelMap::identity(d), LabelMap::identity(d))];
        let maps: &[(LabelMap, LabelMap)] =
            if symmetrize { &self.maps } else { &identity };

        let x_count = k.pow(n as u32);
        let mut digits = vec![0usize; n];
        let mut relabeled = vec![0usize; n];
        let mut tau = Operator::zeros(Dims::single(d)?);
        for (map, inv) in maps {
            for x in 0..x_count {
                unflatten_input(x, n, k, &mut digits);
                let mut weight = 1.0;
                for slot in 0..n {
                    if slot != y {
                        weight *= traces[slot][digits[slot]];
                    }
                }
                for (slot, &t) in digits.iter().enumerate() {
                    relabeled[slot] = map.apply(t);
                }
                let q = self.rac.guess_distribution(&relabeled, y)?;
                let sub = &subs[y][digits[y]];
                for (raw_guess, &prob) in q.iter().enumerate() {
                    if prob == 0.0 {
                        continue;
                    }
                    let guess = inv.apply(raw_guess);
                    let u = &self.corrections[guess];
                    let corrected = u.mul(sub).mul(&u.adjoint());
                    tau = tau.add(&corrected.scale_re(weight * prob));
                }
            }
        }
        Ok(tau.scale_re(1.0 / maps.len() as f64))
    }

    /// Simulates the composition over the SIC product grid plus `extra`
    /// seeded random spot-check inputs, returning the scenario and the
    /// full table of receiver output states.
    pub fn evaluate(
        &self,
        extra: usize,
        seed: u64,
        symmetrize: bool,
    ) -> Result<(ScenarioSpec, CorrelationTable)> {
        let n = self.spec.n;
        let d = self.spec.d;

        // Distinct per-slot states: the d^2 SIC states (shared by all grid
        // tuples) followed by fresh Haar states for the spot checks.
        let mut slot_states = sic_states(d)?;
        let k = slot_states.len();
        let mut tuples: Vec<Vec<usize>> = Vec::new();
        let mut grid_tuple = vec![0usize; n];
        loop {
            tuples.push(grid_tuple.clone());
            // Advance odometer, first slot slowest.
            let mut slot = n;
            loop {
                if slot == 0 {
                    break;
                }
                slot -= 1;
                grid_tuple[slot] += 1;
                if grid_tuple[slot] < k {
                    break;
                }
                grid_tuple[slot] = 0;
            }
            if grid_tuple.iter().all(|&t| t == 0) {
                break;
            }
        }
        let grid_count = tuples.len();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..extra {
            let mut tuple = Vec::with_capacity(n);
            for _ in 0..n {
                slot_states.push(haar_state(Dims::single(d)?, &mut rng));
                tuple.push(slot_states.len() - 1);
            }
            tuples.push(tuple);
        }

        let substates = slot_states
            .iter()
            .map(|s| self.measured_substates(s))
            .collect::<Result<Vec<_>>>()?;

        let catalogue = tuples
            .iter()
            .map(|tuple| {
                let mut joined = slot_states[tuple[0]].clone();
                for &idx in &tuple[1..] {
                    joined = kron_vec(&joined, &slot_states[idx])?;
                }
                Ok(joined)
            })
            .collect::<Result<Vec<_>>>()?;

        let dims = vec![d; n];
        let targets = (0..n)
            .map(|y| partial_trace_target(&dims, y))
            .collect::<Result<Vec<_>>>()?;
        let scenario = ScenarioSpec::from_catalogue(
            dims,
            catalogue,
            grid_count,
            n,
            d,
            targets,
        )?;

        let mut entries = Vec::with_capacity(tuples.len() * n);
        for tuple in &tuples {
            let subs: Vec<&[Operator]> =
                tuple.iter().map(|&idx| substates[idx].as_slice()).collect();
            for y in 0..n {
                entries.push(self.output_from_substates(&subs, y, symmetrize)?);
            }
        }
        let table = CorrelationTable::new(entries, tuples.len(), n, tol::SOLVER)?;
        Ok((scenario, table))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{fidelity_to_pure, haar_state, ChoiState};
    use crate::scenario::{avg_fidelity, indep_spread, worst_fidelity, Protocol};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn teleport_scenario(d: usize, extra: usize) -> ScenarioSpec {
        let target = vec![ChoiState::identity(d).unwrap()];
        ScenarioSpec::new(
            vec![d],
            crate::scenario::InputSet::DesignGridAugmented { extra, seed: 7 },
            1,
            d,
            target,
        )
        .unwrap()
    }

    #[test]
    fn teleportation_is_exact_for_d2_and_d3() {
        for d in [2usize, 3] {
            let protocol = Protocol::Classical(standard_teleport_protocol(d).unwrap());
            let scenario = teleport_scenario(d, 20);
            let table = protocol.correlations(&scenario).unwrap();
            assert!((avg_fidelity(&table, &scenario).unwrap() - 1.0).abs() < 1e-12);
            assert!((worst_fidelity(&table, &scenario).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn teleportation_outputs_equal_inputs_pointwise() {
        let d = 4;
        let protocol = Protocol::Classical(standard_teleport_protocol(d).unwrap());
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let psi = haar_state(Dims::single(d).unwrap(), &mut rng);
            let scenario = ScenarioSpec::from_catalogue(
                vec![d],
                vec![psi.clone()],
                1,
                1,
                d,
                vec![ChoiState::identity(d).unwrap()],
            )
            .unwrap();
            let table = protocol.correlations(&scenario).unwrap();
            assert!(
                table.entry(0, 0).max_abs_diff(&psi.projector()) < 1e-10,
                "teleported state differs from input"
            );
        }
    }

    #[test]
    fn wrong_correction_breaks_teleportation() {
        let d = 2;
        let good = standard_teleport_protocol(d).unwrap();
        let weyl = WeylOps::new(d).unwrap();
        // Swap two corrections: message 1 gets message 2's unitary and
        // vice versa.
        let decoders = (0..4)
            .map(|label| {
                let swapped = match label {
                    1 => 2,
                    2 => 1,
                    other => other,
                };
                let (u, v) = weyl.unflat(swapped);
                vec![ChoiState::from_unitary(weyl.op(u, v)).unwrap()]
            })
            .collect();
        let bad = ClassicalProtocol::new(
            good.resource().clone(),
            good.encoder().clone(),
            decoders,
        )
        .unwrap();
        let scenario = teleport_scenario(d, 0);
        let table = Protocol::Classical(bad).correlations(&scenario).unwrap();
        let f = avg_fidelity(&table, &scenario).unwrap();
        assert!(f < 1.0 - 1e-3, "mislabeled corrections still gave {f}");
    }

    #[test]
    fn unsupported_dimension_is_rejected() {
        assert!(matches!(
            standard_teleport_protocol(5),
            Err(Error::UnsupportedDimension(_))
        ));
        assert!(StochasticTeleportSpec::new(0, 2).is_err());
    }

    #[test]
    fn perfect_box_composition_teleports_exactly() {
        for (n, d) in [(1usize, 2usize), (2, 2), (3, 2), (2, 3)] {
            let spec = StochasticTeleportSpec::new(n, d).unwrap();
            let rac = rac_from_box(ns_box(n, d).unwrap());
            let composed = compose_stochastic_teleport(rac, spec).unwrap();
            assert!((composed.formula_fidelity().unwrap() - 1.0).abs() < 1e-12);

            let mut rng = ChaCha12Rng::seed_from_u64(11);
            let inputs: Vec<PureVector> = (0..n)
                .map(|_| haar_state(Dims::single(d).unwrap(), &mut rng))
                .collect();
            for y in 0..n {
                let tau = composed.output_state(&inputs, y, false).unwrap();
                let f = fidelity_to_pure(&tau, &inputs[y]);
                assert!(
                    (f - 1.0).abs() < 1e-12,
                    "(n,d,y)=({n},{d},{y}) fidelity {f}"
                );
            }
        }
    }

    #[test]
    fn blind_guessing_composition_gives_half() {
        let spec = StochasticTeleportSpec::new(2, 2).unwrap();
        let rac = rac_from_box(uniform_box(2, 2).unwrap());
        let composed = compose_stochastic_teleport(rac, spec).unwrap();
        assert!((composed.formula_fidelity().unwrap() - 0.5).abs() < 1e-12);
        let (scenario, table) = composed.evaluate(0, 5, false).unwrap();
        let avg = avg_fidelity(&table, &scenario).unwrap();
        assert!((avg - 0.5).abs() < 1e-9, "simulated average {avg}");
    }

    #[test]
    fn biased_errors_need_symmetrization_for_universality() {
        // One slot, near-perfect code with a single systematic mistake:
        // label 0 is decoded as 1, everything else verbatim.  Succeeds with
        // probability 3/4, but every failure is the same Weyl error, so the
        // raw output law is input-dependent.
        let encoder: Vec<usize> = (0..4).collect();
        let decoders = vec![vec![1, 1, 2, 3]];
        let rac = RacStrategy::Classical(
            ClassicalRac::new(1, 2, encoder, decoders).unwrap(),
        );
        let spec = StochasticTeleportSpec::new(1, 2).unwrap();
        let composed = compose_stochastic_teleport(rac, spec).unwrap();
        let formula = composed.formula_fidelity().unwrap();
        assert!((formula - 5.0 / 6.0).abs() < 1e-12);

        // Without the shared relabeling the output law is input-dependent.
        let (scenario, raw) = composed.evaluate(120, 9, false).unwrap();
        let spread = indep_spread(&raw, &scenario).unwrap();
        assert!(spread > 1e-3, "expected visible spread, got {spread}");
        // The design-grid average still matches the formula exactly.
        let avg = avg_fidelity(&raw, &scenario).unwrap();
        assert!((avg - formula).abs() < 1e-9, "raw average {avg} vs {formula}");

        // With it the two-point output law holds pointwise.
        let (scenario, sym) = composed.evaluate(120, 9, true).unwrap();
        let spread = indep_spread(&sym, &scenario).unwrap();
        assert!(spread < 1e-10, "symmetrized spread {spread}");
        let avg = avg_fidelity(&sym, &scenario).unwrap();
        assert!((avg - formula).abs() < 1e-9);
        let worst = worst_fidelity(&sym, &scenario).unwrap();
        assert!((worst - formula).abs() < 1e-9);
        assert!(crate::scenario::is_universal(&sym, &scenario).unwrap());
    }

    #[test]
    fn formula_matches_simulation_for_partial_classical_code() {
        // Send the first slot's label: slot 0 always right, slot 1 blind.
        let k = 4;
        let encoder: Vec<usize> = (0..k * k).map(|x| x / k).collect();
        let decoders = vec![(0..k).collect::<Vec<usize>>(); 2];
        let rac = RacStrategy::Classical(
            ClassicalRac::new(2, 2, encoder, decoders).unwrap(),
        );
        let spec = StochasticTeleportSpec::new(2, 2).unwrap();
        let composed = compose_stochastic_teleport(rac, spec).unwrap();
        let formula = composed.formula_fidelity().unwrap();
        // P = 5/8, so F = (2 * 5/8 + 1)/3 = 3/4.
        assert!((formula - 0.75).abs() < 1e-12);
        for symmetrize in [false, true] {
            let (scenario, table) = composed.evaluate(0, 5, symmetrize).unwrap();
            let avg = avg_fidelity(&table, &scenario).unwrap();
            assert!(
                (avg - formula).abs() < 1e-9,
                "symmetrize={symmetrize} average {avg} vs {formula}"
            );
        }
    }

    #[test]
    fn composition_rejects_mismatched_alphabets() {
        let spec = StochasticTeleportSpec::new(2, 2).unwrap();
        let rac = rac_from_box(ns_box(2, 3).unwrap());
        assert!(matches!(
            compose_stochastic_teleport(rac, spec),
            Err(Error::AlphabetMismatch(_))
        ));
    }
}
