//! See-saw for entanglement-assisted random-access codes.
//!
//! The sender holds `n` uniformly random symbols from the alphabet `[d²]`,
//! measures her share of a bipartite state with a POVM chosen by the data
//! string, and transmits the outcome (the message).  The receiver, asked
//! for slot `y`, measures his share with a POVM chosen by `(y, message)`
//! and announces the outcome as his guess.  The average success
//! probability is bilinear in the two measurement families, so alternating
//! over them is a pair of measurement-design SDPs — the same structure as
//! the fidelity see-saw, with success probability as the objective.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::optimizer::sdp::{BlockSpec, Constraint, SdpProblem, SdpSolution};
use crate::optimizer::{init_measurement, repair_povm, solve_step, SeesawConfig, Tracker, RESTART_STRIDE};
use crate::protocols::nsbox::unflatten_input;
use crate::protocols::{QuantumRac, RacStrategy};
use crate::quantum::{is_density, Povm};
use crate::tensor::{kron, partial_trace, Dims, Operator};
use crate::tol;

/// Outcome of [`rac_seesaw`].
#[derive(Debug, Clone)]
pub struct RacSeesawReport {
    /// The best strategy found (always the entangled-measurement variant).
    pub best: RacStrategy,
    /// Its exact success probability, computed by enumeration.
    pub best_value: f64,
    /// The derived seed of the restart that produced it.
    pub best_seed: u64,
    /// Success probability after every accepted sub-step of the winning
    /// restart.
    pub trace: Vec<f64>,
    /// Best value reached by each restart, in restart order.
    pub restart_values: Vec<f64>,
}

/// How strongly the receiver's decoding depends on the received message:
/// the largest Frobenius distance between same-outcome effects of two
/// decoding POVMs that differ only in the message,
/// `max_{y, c ≠ c', g} ‖B^{y,c}_g − B^{y,c'}_g‖`.
///
/// Zero means the receiver ignores the message entirely when choosing his
/// measurement; a strictly positive value witnesses that the found
/// strategy adapts the measurement (or at least its outcome labeling) to
/// the message.
pub fn measurement_adaptivity(strategy: &QuantumRac) -> f64 {
    let mut worst = 0.0f64;
    for row in strategy.bob() {
        for c in 0..row.len() {
            for c2 in c + 1..row.len() {
                for (e1, e2) in row[c].elements().iter().zip(row[c2].elements()) {
                    let diff = e1.add(&e2.scale_re(-1.0)).norm();
                    worst = worst.max(diff);
                }
            }
        }
    }
    worst
}

/// Maximize the success probability of the `n`-slot, `d²`-valued
/// random-access code assisted by the two-party state `shared` (factors
/// `[A, B]`) and a classical message from the alphabet `[messages]`,
/// alternating SDPs over the sender's and the receiver's measurements.
/// Deterministic for a fixed config; `cfg.objective` and
/// `cfg.optimize_state` are ignored (the success probability is a single
/// average and the shared state is held fixed).
pub fn rac_seesaw(
    n: usize,
    d: usize,
    shared: &Operator,
    messages: usize,
    cfg: &SeesawConfig,
) -> Result<RacSeesawReport> {
    if n == 0 || d < 2 || messages == 0 {
        return Err(Error::Config(
            "need n >= 1, d >= 2, and at least one message".into(),
        ));
    }
    if cfg.restarts == 0 || cfg.max_outer == 0 || cfg.window == 0 {
        return Err(Error::Config(
            "restarts, max_outer, and window must all be positive".into(),
        ));
    }
    if shared.dims().len() != 2 {
        return Err(Error::dim(format!(
            "shared state must have exactly two factors [A, B], got {:?}",
            shared.dims().factors()
        )));
    }
    if !is_density(shared, tol::ALGEBRAIC) {
        return Err(Error::invalid("rac_seesaw", "shared operator is not a density operator"));
    }
    let k = d * d;
    let x_count = k.pow(n as u32);

    let mut best: Option<(QuantumRac, f64, u64, Vec<f64>)> = None;
    let mut restart_values = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let rseed = cfg.seed.wrapping_add((r as u64).wrapping_mul(RESTART_STRIDE));
        let mut rng = ChaCha12Rng::seed_from_u64(rseed);
        let dims_a = Dims::single(shared.dims().factors()[0])?;
        let dims_b = Dims::single(shared.dims().factors()[1])?;
        let mut alice: Vec<Povm> = (0..x_count)
            .map(|_| init_measurement(&dims_a, messages, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut bob: Vec<Vec<Povm>> = (0..n)
            .map(|_| {
                (0..messages)
                    .map(|_| init_measurement(&dims_b, k, &mut rng))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let mut tracker = Tracker::new(cfg.window, cfg.window_tol);
        let mut incumbent = (alice.clone(), bob.clone());
        let v0 = success_probability(n, d, shared, &alice, &bob)?;
        tracker.observe(v0);
        let mut warm: [Option<SdpSolution>; 2] = [None, None];

        for outer in 0..cfg.max_outer {
            // sender step: one measurement-design SDP per data string,
            // batched into a single problem
            let prob = build_sender_sdp(n, d, shared, messages, &bob)?;
            let sol = solve_step(&prob, cfg, warm[0].as_ref(), outer, "sender measurement")?;
            for (x, povm) in alice.iter_mut().enumerate() {
                *povm = repair_povm(&sol.blocks[x * messages..(x + 1) * messages])?;
            }
            warm[0] = Some(sol);
            let v = success_probability(n, d, shared, &alice, &bob)?;
            if tracker.observe(v) {
                incumbent = (alice.clone(), bob.clone());
            }

            // receiver step: one per (slot, message), batched likewise
            let prob = build_receiver_sdp(n, d, shared, messages, &alice)?;
            let sol = solve_step(&prob, cfg, warm[1].as_ref(), outer, "receiver measurement")?;
            for (y, row) in bob.iter_mut().enumerate() {
                for (c, povm) in row.iter_mut().enumerate() {
                    let base = (y * messages + c) * k;
                    *povm = repair_povm(&sol.blocks[base..base + k])?;
                }
            }
            warm[1] = Some(sol);
            let v = success_probability(n, d, shared, &alice, &bob)?;
            if tracker.observe(v) {
                incumbent = (alice.clone(), bob.clone());
            }

            if tracker.cycle_done(v) {
                break;
            }
        }

        let strategy =
            QuantumRac::new(n, d, shared.clone(), incumbent.0, incumbent.1)?;
        restart_values.push(tracker.best_value);
        if best.as_ref().is_none_or(|(_, bv, _, _)| tracker.best_value > *bv) {
            best = Some((strategy, tracker.best_value, rseed, tracker.trace));
        }
    }
    let (strategy, best_value, best_seed, trace) = best.expect("at least one restart ran");
    Ok(RacSeesawReport {
        best: RacStrategy::Quantum(strategy),
        best_value,
        best_seed,
        trace,
        restart_values,
    })
}

fn success_probability(
    n: usize,
    d: usize,
    shared: &Operator,
    alice: &[Povm],
    bob: &[Vec<Povm>],
) -> Result<f64> {
    let strategy = QuantumRac::new(n, d, shared.clone(), alice.to_vec(), bob.to_vec())?;
    RacStrategy::Quantum(strategy).p_rac()
}

/// `tr_B[(1 ⊗ q) ρ]`, the sender-side operator weighting her effects.
fn traced_with_receiver(shared: &Operator, q: &Operator) -> Result<Operator> {
    let lift = kron(&Operator::identity(Dims::single(shared.dims().factors()[0])?), q)?;
    Ok(partial_trace(&lift.mul(shared), &[0])?.herm_part())
}

/// `tr_A[(p ⊗ 1) ρ]`, the receiver-side operator weighting his effects.
fn traced_with_sender(shared: &Operator, p: &Operator) -> Result<Operator> {
    let lift = kron(p, &Operator::identity(Dims::single(shared.dims().factors()[1])?))?;
    Ok(partial_trace(&lift.mul(shared), &[1])?.herm_part())
}

/// Blocks `A^x_c` (index `x·messages + c`), completeness per data string,
/// objective `Σ tr[A^x_c T^x_c] / (n·d^{2n})` with
/// `T^x_c = Σ_y tr_B[(1 ⊗ B^{y,c}_{x_y}) ρ]`.
fn build_sender_sdp(
    n: usize,
    d: usize,
    shared: &Operator,
    messages: usize,
    bob: &[Vec<Povm>],
) -> Result<SdpProblem> {
    let k = d * d;
    let x_count = k.pow(n as u32);
    let dims_a = Dims::single(shared.dims().factors()[0])?;
    let scale = 1.0 / (n as f64 * x_count as f64);
    let mut blocks = Vec::with_capacity(x_count * messages);
    let mut objective = Vec::with_capacity(x_count * messages);
    let mut constraints = Vec::with_capacity(x_count);
    let mut digits = vec![0usize; n];
    for x in 0..x_count {
        unflatten_input(x, n, k, &mut digits);
        for c in 0..messages {
            blocks.push(BlockSpec::new(format!("encode_{x}_{c}"), dims_a.clone()));
            let mut t = Operator::zeros(dims_a.clone());
            for (y, row) in bob.iter().enumerate() {
                t = t.add(&traced_with_receiver(shared, &row[c].elements()[digits[y]])?);
            }
            objective.push(t.scale_re(scale));
        }
        constraints.push(Constraint::BlockSum {
            blocks: (x * messages..(x + 1) * messages).collect(),
            target: Operator::identity(dims_a.clone()),
        });
    }
    SdpProblem::new(blocks, objective, 0, Vec::new(), constraints)
}

/// Blocks `B^{y,c}_g` (index `(y·messages + c)·d² + g`), completeness per
/// `(slot, message)`, objective `Σ tr[B^{y,c}_g W^{y,c}_g] / (n·d^{2n})`
/// with `W^{y,c}_g = Σ_{x : x_y = g} tr_A[(A^x_c ⊗ 1) ρ]`.
fn build_receiver_sdp(
    n: usize,
    d: usize,
    shared: &Operator,
    messages: usize,
    alice: &[Povm],
) -> Result<SdpProblem> {
    let k = d * d;
    let x_count = k.pow(n as u32);
    let dims_b = Dims::single(shared.dims().factors()[1])?;
    let scale = 1.0 / (n as f64 * x_count as f64);
    let mut blocks = Vec::with_capacity(n * messages * k);
    let mut objective = Vec::with_capacity(n * messages * k);
    let mut constraints = Vec::with_capacity(n * messages);
    // cache the traced sender effects, shared across slots
    let mut traced = Vec::with_capacity(x_count);
    for povm in alice {
        let row: Vec<Operator> = povm
            .elements()
            .iter()
            .map(|e| traced_with_sender(shared, e))
            .collect::<Result<Vec<_>>>()?;
        traced.push(row);
    }
    let mut digits = vec![0usize; n];
    for y in 0..n {
        for c in 0..messages {
            let base = blocks.len();
            for g in 0..k {
                blocks.push(BlockSpec::new(format!("decode_{y}_{c}_{g}"), dims_b.clone()));
                let mut w = Operator::zeros(dims_b.clone());
                for x in 0..x_count {
                    unflatten_input(x, n, k, &mut digits);
                    if digits[y] == g {
                        w = w.add(&traced[x][c]);
                    }
                }
                objective.push(w.scale_re(scale));
            }
            constraints.push(Constraint::BlockSum {
                blocks: (base..base + k).collect(),
                target: Operator::identity(dims_b.clone()),
            });
        }
    }
    SdpProblem::new(blocks, objective, 0, Vec::new(), constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::max_entangled;

    fn random_strategy(
        seed: u64,
        n: usize,
        d: usize,
        shared: &Operator,
        messages: usize,
    ) -> (Vec<Povm>, Vec<Vec<Povm>>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let k = d * d;
        let x_count = k.pow(n as u32);
        let dims_a = Dims::single(shared.dims().factors()[0]).unwrap();
        let dims_b = Dims::single(shared.dims().factors()[1]).unwrap();
        let alice = (0..x_count)
            .map(|_| init_measurement(&dims_a, messages, &mut rng).unwrap())
            .collect();
        let bob = (0..n)
            .map(|_| {
                (0..messages)
                    .map(|_| init_measurement(&dims_b, k, &mut rng).unwrap())
                    .collect()
            })
            .collect();
        (alice, bob)
    }

    #[test]
    fn step_objectives_match_enumeration() {
        let shared = max_entangled(4).unwrap().projector();
        let (alice, bob) = random_strategy(41, 2, 2, &shared, 4);
        let p_exact = success_probability(2, 2, &shared, &alice, &bob).unwrap();

        let prob = build_sender_sdp(2, 2, &shared, 4, &bob).unwrap();
        let current: Vec<Operator> = alice
            .iter()
            .flat_map(|povm| povm.elements().iter().cloned())
            .collect();
        assert!((prob.value_at(&current, &[]) - p_exact).abs() < 1e-9);

        let prob = build_receiver_sdp(2, 2, &shared, 4, &alice).unwrap();
        let current: Vec<Operator> = bob
            .iter()
            .flat_map(|row| row.iter())
            .flat_map(|povm| povm.elements().iter().cloned())
            .collect();
        assert!((prob.value_at(&current, &[]) - p_exact).abs() < 1e-9);
    }

    #[test]
    fn single_slot_code_becomes_lossless() {
        // with as many messages as data values the sender can just announce
        // the data; the see-saw must find a perfect strategy
        let shared = max_entangled(2).unwrap().projector();
        let cfg = SeesawConfig {
            restarts: 2,
            max_outer: 30,
            ..SeesawConfig::new(19)
        };
        let report = rac_seesaw(1, 2, &shared, 4, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-4,
            "single-slot see-saw reached {}",
            report.best_value
        );
        let again = rac_seesaw(1, 2, &shared, 4, &cfg).unwrap();
        assert_eq!(report.best_value.to_bits(), again.best_value.to_bits());
        assert_eq!(report.trace.len(), again.trace.len());
        for (a, b) in report.trace.iter().zip(&again.trace) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn trace_is_monotone() {
        let shared = max_entangled(4).unwrap().projector();
        let cfg = SeesawConfig {
            restarts: 1,
            max_outer: 8,
            ..SeesawConfig::new(23)
        };
        let report = rac_seesaw(2, 2, &shared, 4, &cfg).unwrap();
        for w in report.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-7, "success regressed from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn adaptivity_is_zero_for_message_blind_decoding() {
        let shared = max_entangled(2).unwrap().projector();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let dims_b = Dims::single(2).unwrap();
        let fixed = init_measurement(&dims_b, 4, &mut rng).unwrap();
        let (alice, _) = random_strategy(5, 1, 2, &shared, 4);
        let bob = vec![vec![fixed.clone(), fixed.clone(), fixed.clone(), fixed]];
        let strategy = QuantumRac::new(1, 2, shared, alice, bob).unwrap();
        assert!(measurement_adaptivity(&strategy) < 1e-12);
    }

    #[test]
    fn entangled_pair_code_beats_classical_and_adapts() {
        // two slots over [4], maximally entangled state of local dimension
        // 4, four messages: the optimal entangled strategy reaches 3/4
        // (the best message-only strategy stops at 5/8)
        let shared = max_entangled(4).unwrap().projector();
        let cfg = SeesawConfig {
            restarts: 2,
            max_outer: 40,
            ..SeesawConfig::new(7)
        };
        let report = rac_seesaw(2, 2, &shared, 4, &cfg).unwrap();
        assert!(
            report.best_value >= 0.75 - 1e-4,
            "pair-code see-saw reached {}",
            report.best_value
        );
        let strategy = match &report.best {
            RacStrategy::Quantum(q) => q,
            _ => unreachable!(),
        };
        assert!(
            measurement_adaptivity(strategy) > 1e-2,
            "optimal decoding unexpectedly ignores the message"
        );
    }
}
