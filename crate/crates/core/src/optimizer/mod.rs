//! Numerical optimization of prepare-and-measure protocols.
//!
//! An alternating (see-saw) search over the protocol pieces: with all but
//! one piece frozen, the average (or worst-case) fidelity is linear in the
//! remaining piece, so each step is a small semidefinite program.  The
//! module provides the conic solver ([`sdp`]), the per-step program
//! builders ([`builders`]), the outer loop with restarts ([`seesaw_run`]),
//! and a see-saw for entanglement-assisted random-access codes ([`rac`]).
//!
//! The outer loop is deterministic: restart `i` derives its stream from
//! `seed + i·golden`, solves are warm-started from the previous cycle, and
//! every solver output is repaired onto the exact feasible set before it is
//! accepted, so reported fidelities always come from valid protocols.

pub mod builders;
pub mod rac;
pub mod sdp;

pub use builders::{
    build_decoder_sdp, build_measurement_sdp, build_quantum_decoder_sdp,
    build_quantum_encoder_sdp, build_state_sdp, init_measurement, repair_choi, repair_povm,
    FidelityObjective,
};
pub use rac::{measurement_adaptivity, rac_seesaw, RacSeesawReport};
pub use sdp::{sdp_solve, sdp_solve_with, BlockSpec, Constraint, SdpProblem, SdpSolution, SdpStatus};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::quantum::{random_choi, random_density};
use crate::scenario::{
    avg_fidelity, worst_fidelity, ClassicalProtocol, MessageKind, Protocol, QuantumProtocol,
    ResourceSpec, ScenarioSpec,
};
use crate::tensor::{psd_project, Dims};
use crate::tol;

/// Knobs of the alternating search.  [`SeesawConfig::new`] fills in the
/// defaults; individual fields can then be overridden by struct update.
#[derive(Debug, Clone)]
pub struct SeesawConfig {
    /// Maximum optimization cycles per restart.
    pub max_outer: usize,
    /// Stop a restart once this many consecutive cycles move the objective
    /// by no more than `window_tol` in total.
    pub window: usize,
    pub window_tol: f64,
    /// Independent random initializations; the first uses the caller's
    /// template protocol as-is, later ones redraw measurement/channels.
    pub restarts: usize,
    pub seed: u64,
    pub objective: FidelityObjective,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    /// Also optimize the shared resource state each cycle.
    pub optimize_state: bool,
}

impl SeesawConfig {
    pub fn new(seed: u64) -> Self {
        SeesawConfig {
            max_outer: 500,
            window: 3,
            window_tol: tol::SEESAW_WINDOW,
            restarts: 20,
            seed,
            objective: FidelityObjective::Average,
            solver_tol: 1e-8,
            solver_max_iter: 100_000,
            optimize_state: false,
        }
    }
}

/// Outcome of a see-saw search.
#[derive(Debug, Clone)]
pub struct SeesawReport {
    /// The best protocol found, already repaired onto the feasible set.
    pub best: Protocol,
    /// Its objective (average or worst-case fidelity, per the config).
    pub best_value: f64,
    /// The derived seed of the restart that produced it.
    pub best_seed: u64,
    /// Objective after each optimization cycle of the winning restart.
    pub trace: Vec<f64>,
    /// Best value reached by each restart, in restart order — the spread
    /// over restarts is a (heuristic) signal of landscape roughness.
    pub restart_values: Vec<f64>,
}

fn evaluate(s: &ScenarioSpec, p: &Protocol, objective: FidelityObjective) -> Result<f64> {
    let table = p.correlations(s)?;
    match objective {
        FidelityObjective::Average => avg_fidelity(&table, s),
        FidelityObjective::Worst => worst_fidelity(&table, s),
    }
}

pub(crate) const RESTART_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Maximize the scenario fidelity over one protocol piece at a time,
/// cycling measurement/encoder → decoders (→ resource state), from
/// `cfg.restarts` random starting points drawn for the given resource.
/// Deterministic for a fixed config.
pub fn seesaw_run(
    s: &ScenarioSpec,
    r: &ResourceSpec,
    cfg: &SeesawConfig,
) -> Result<SeesawReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let template = initial_protocol(s, r, &mut rng)?;
    seesaw_from(s, &template, cfg)
}

/// [`seesaw_run`] with the worst-case objective: maximize the minimum
/// fidelity over the whole catalogue and all receiver inputs.
pub fn seesaw_worstcase(
    s: &ScenarioSpec,
    r: &ResourceSpec,
    cfg: &SeesawConfig,
) -> Result<SeesawReport> {
    let cfg = SeesawConfig { objective: FidelityObjective::Worst, ..cfg.clone() };
    seesaw_run(s, r, &cfg)
}

/// See-saw warm-started from a caller-supplied protocol: the first restart
/// refines `template` as given; later restarts redraw its optimizable
/// pieces at random.
pub fn seesaw_from(
    s: &ScenarioSpec,
    template: &Protocol,
    cfg: &SeesawConfig,
) -> Result<SeesawReport> {
    if cfg.restarts == 0 || cfg.max_outer == 0 || cfg.window == 0 {
        return Err(Error::Config(
            "restarts, max_outer, and window must all be positive".into(),
        ));
    }
    let mut best: Option<(Protocol, f64, u64, Vec<f64>)> = None;
    let mut restart_values = Vec::with_capacity(cfg.restarts);
    for r in 0..cfg.restarts {
        let rseed = cfg.seed.wrapping_add((r as u64).wrapping_mul(RESTART_STRIDE));
        let start = if r == 0 {
            template.clone()
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(rseed);
            randomize(template, cfg.optimize_state, &mut rng)?
        };
        let (p, v, trace) = match start {
            Protocol::Classical(p) => run_restart_classical(s, p, cfg)?,
            Protocol::Quantum(p) => run_restart_quantum(s, p, cfg)?,
        };
        restart_values.push(v);
        if best.as_ref().is_none_or(|(_, bv, _, _)| v > *bv) {
            best = Some((p, v, rseed, trace));
        }
    }
    let (best, best_value, best_seed, trace) = best.expect("at least one restart ran");
    Ok(SeesawReport { best, best_value, best_seed, trace, restart_values })
}

/// A full-support random protocol with the shapes implied by the scenario
/// and resource: POVM encoder on inputs ⊗ sender share (classical message)
/// or a random channel into the message space (quantum), and full-rank
/// random decoding channels on the receiver's side.
fn initial_protocol(
    s: &ScenarioSpec,
    r: &ResourceSpec,
    rng: &mut ChaCha12Rng,
) -> Result<Protocol> {
    let shared_factors = r.shared_state().dims().factors().to_vec();
    let (alice_part, bob_part) = shared_factors.split_at(r.alice_factors());
    let enc_factors: Vec<usize> =
        s.input_dims().iter().chain(alice_part.iter()).copied().collect();
    let enc_dims = Dims::new(enc_factors)?;
    let bob_dims = if bob_part.is_empty() {
        Dims::scalar()
    } else {
        Dims::new(bob_part.to_vec())?
    };
    let out_dims = Dims::single(s.output_dim())?;
    let d_c = r.d_c();
    match r.message_kind() {
        MessageKind::Classical => {
            let encoder = init_measurement(&enc_dims, d_c, rng)?;
            let rank = out_dims.total() * bob_dims.total();
            let decoders = (0..d_c)
                .map(|_| {
                    (0..s.y_count())
                        .map(|_| random_choi(out_dims.clone(), bob_dims.clone(), rank, rng))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Protocol::Classical(ClassicalProtocol::new(r.clone(), encoder, decoders)?))
        }
        MessageKind::Quantum => {
            let msg_dims = Dims::single(d_c)?;
            let encoder =
                random_choi(msg_dims.clone(), enc_dims.clone(), d_c * enc_dims.total(), rng)?;
            let dec_in_factors: Vec<usize> =
                bob_part.iter().copied().chain(std::iter::once(d_c)).collect();
            let dec_in = Dims::new(dec_in_factors)?;
            let rank = out_dims.total() * dec_in.total();
            let decoders = (0..s.y_count())
                .map(|_| random_choi(out_dims.clone(), dec_in.clone(), rank, rng))
                .collect::<Result<Vec<_>>>()?;
            Ok(Protocol::Quantum(QuantumProtocol::new(r.clone(), encoder, decoders)?))
        }
    }
}

/// Solve one sub-problem, treating an infeasibility report as a solver
/// failure at the given outer iteration (the sub-problems are feasible by
/// construction — the incumbent protocol piece satisfies the constraints).
pub(crate) fn solve_step(
    prob: &SdpProblem,
    cfg: &SeesawConfig,
    warm: Option<&SdpSolution>,
    outer: usize,
    what: &str,
) -> Result<SdpSolution> {
    let sol = sdp_solve_with(prob, cfg.solver_tol, cfg.solver_max_iter, warm)?;
    if sol.status == SdpStatus::Infeasible {
        return Err(Error::SolverFailure {
            step: outer,
            detail: format!(
                "{what} sub-problem reported infeasible (primal residual {:.3e})",
                sol.primal_residual
            ),
        });
    }
    Ok(sol)
}

/// Redraw the optimizable pieces of a template protocol (fresh projective
/// measurement / fresh full-rank channels).  The resource state is kept
/// from the template unless the state itself is being optimized, in which
/// case later restarts explore state space with a full-rank random state.
fn randomize(template: &Protocol, redraw_state: bool, rng: &mut ChaCha12Rng) -> Result<Protocol> {
    let resource = |r: &ResourceSpec, rng: &mut ChaCha12Rng| -> Result<ResourceSpec> {
        if !redraw_state {
            return Ok(r.clone());
        }
        let dims = r.shared_state().dims().clone();
        let rank = dims.total();
        ResourceSpec::new(r.d_c(), random_density(dims, rank, rng)?, r.alice_factors(), r.message_kind())
    };
    match template {
        Protocol::Classical(p) => {
            let encoder = init_measurement(p.encoder().dims(), p.resource().d_c(), rng)?;
            let decoders = p
                .decoders()
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|eta| {
                            let out = eta.out_dims();
                            let inp = eta.in_dims();
                            let rank = out.total() * inp.total();
                            random_choi(out, inp, rank, rng)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            let resource = resource(p.resource(), rng)?;
            Ok(Protocol::Classical(ClassicalProtocol::new(resource, encoder, decoders)?))
        }
        Protocol::Quantum(p) => {
            let enc = p.encoder();
            let encoder = random_choi(
                enc.out_dims(),
                enc.in_dims(),
                enc.out_dims().total() * enc.in_dims().total(),
                rng,
            )?;
            let decoders = p
                .decoders()
                .iter()
                .map(|eta| {
                    let rank = eta.out_dims().total() * eta.in_dims().total();
                    random_choi(eta.out_dims(), eta.in_dims(), rank, rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let resource = resource(p.resource(), rng)?;
            Ok(Protocol::Quantum(QuantumProtocol::new(resource, encoder, decoders)?))
        }
    }
}

/// Incumbent tracking + convergence window shared by the restart loops.
/// The trace records the objective after every sub-step; the convergence
/// window looks at whole optimization cycles.
pub(crate) struct Tracker {
    pub(crate) best_value: f64,
    pub(crate) trace: Vec<f64>,
    cycles: Vec<f64>,
    window: usize,
    window_tol: f64,
}

impl Tracker {
    pub(crate) fn new(window: usize, window_tol: f64) -> Self {
        Tracker {
            best_value: f64::NEG_INFINITY,
            trace: Vec::new(),
            cycles: Vec::new(),
            window,
            window_tol,
        }
    }

    /// Record a sub-step value; returns true when it improves the incumbent.
    pub(crate) fn observe(&mut self, value: f64) -> bool {
        self.trace.push(value);
        if value > self.best_value {
            self.best_value = value;
            true
        } else {
            false
        }
    }

    /// Record a finished cycle; returns true once the last `window` cycles
    /// moved the objective by no more than `window_tol` in total.
    pub(crate) fn cycle_done(&mut self, value: f64) -> bool {
        self.cycles.push(value);
        if self.cycles.len() <= self.window {
            return false;
        }
        let recent = &self.cycles[self.cycles.len() - 1 - self.window..];
        let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= self.window_tol
    }
}

fn run_restart_classical(
    s: &ScenarioSpec,
    start: ClassicalProtocol,
    cfg: &SeesawConfig,
) -> Result<(Protocol, f64, Vec<f64>)> {
    let d_c = start.resource().d_c();
    let y_count = s.y_count();
    let mut current = start;
    let mut tracker = Tracker::new(cfg.window, cfg.window_tol);
    let mut best = current.clone();
    let v0 = evaluate(s, &Protocol::Classical(current.clone()), cfg.objective)?;
    tracker.observe(v0);
    let mut warm: [Option<SdpSolution>; 3] = [None, None, None];

    for outer in 0..cfg.max_outer {
        // measurement step
        let prob = build_measurement_sdp(s, &current, cfg.objective)?;
        let sol = solve_step(&prob, cfg, warm[0].as_ref(), outer, "measurement")?;
        let povm = repair_povm(&sol.blocks[..d_c])?;
        warm[0] = Some(sol);
        current = ClassicalProtocol::new(
            current.resource().clone(),
            povm,
            current.decoders().to_vec(),
        )?;
        let v = evaluate(s, &Protocol::Classical(current.clone()), cfg.objective)?;
        if tracker.observe(v) {
            best = current.clone();
        }

        // decoder step
        let prob = build_decoder_sdp(s, &current, cfg.objective)?;
        let sol = solve_step(&prob, cfg, warm[1].as_ref(), outer, "decoder")?;
        let mut decoders = Vec::with_capacity(d_c);
        for c in 0..d_c {
            let mut row = Vec::with_capacity(y_count);
            for y in 0..y_count {
                let n_out = current.decoder(c, y).out_dims().len();
                row.push(repair_choi(&sol.blocks[c * y_count + y], n_out)?);
            }
            decoders.push(row);
        }
        warm[1] = Some(sol);
        current = ClassicalProtocol::new(
            current.resource().clone(),
            current.encoder().clone(),
            decoders,
        )?;
        let mut v = evaluate(s, &Protocol::Classical(current.clone()), cfg.objective)?;
        if tracker.observe(v) {
            best = current.clone();
        }

        // resource-state step
        if cfg.optimize_state {
            let prob =
                build_state_sdp(s, &Protocol::Classical(current.clone()), cfg.objective)?;
            let sol = solve_step(&prob, cfg, warm[2].as_ref(), outer, "resource state")?;
            let state = psd_project(&sol.blocks[0])?;
            let state = state.scale_re(1.0 / state.trace().re.max(1e-300));
            warm[2] = Some(sol);
            let resource = ResourceSpec::new(
                d_c,
                state,
                current.resource().alice_factors(),
                current.resource().message_kind(),
            )?;
            current = ClassicalProtocol::new(
                resource,
                current.encoder().clone(),
                current.decoders().to_vec(),
            )?;
            v = evaluate(s, &Protocol::Classical(current.clone()), cfg.objective)?;
            if tracker.observe(v) {
                best = current.clone();
            }
        }

        if tracker.cycle_done(v) {
            break;
        }
    }
    Ok((Protocol::Classical(best), tracker.best_value, tracker.trace))
}

fn run_restart_quantum(
    s: &ScenarioSpec,
    start: QuantumProtocol,
    cfg: &SeesawConfig,
) -> Result<(Protocol, f64, Vec<f64>)> {
    let y_count = s.y_count();
    let mut current = start;
    let mut tracker = Tracker::new(cfg.window, cfg.window_tol);
    let mut best = current.clone();
    let v0 = evaluate(s, &Protocol::Quantum(current.clone()), cfg.objective)?;
    tracker.observe(v0);
    let mut warm: [Option<SdpSolution>; 3] = [None, None, None];

    for outer in 0..cfg.max_outer {
        // encoding-channel step
        let prob = build_quantum_encoder_sdp(s, &current, cfg.objective)?;
        let sol = solve_step(&prob, cfg, warm[0].as_ref(), outer, "encoder")?;
        let n_out = current.encoder().out_dims().len();
        let encoder = repair_choi(&sol.blocks[0], n_out)?;
        warm[0] = Some(sol);
        current = QuantumProtocol::new(
            current.resource().clone(),
            encoder,
            current.decoders().to_vec(),
        )?;
        let v = evaluate(s, &Protocol::Quantum(current.clone()), cfg.objective)?;
        if tracker.observe(v) {
            best = current.clone();
        }

        // decoder step
        let prob = build_quantum_decoder_sdp(s, &current, cfg.objective)?;
        let sol = solve_step(&prob, cfg, warm[1].as_ref(), outer, "decoder")?;
        let mut decoders = Vec::with_capacity(y_count);
        for (y, eta) in current.decoders().iter().enumerate() {
            decoders.push(repair_choi(&sol.blocks[y], eta.out_dims().len())?);
        }
        warm[1] = Some(sol);
        current = QuantumProtocol::new(
            current.resource().clone(),
            current.encoder().clone(),
            decoders,
        )?;
        let mut v = evaluate(s, &Protocol::Quantum(current.clone()), cfg.objective)?;
        if tracker.observe(v) {
            best = current.clone();
        }

        // resource-state step
        if cfg.optimize_state {
            let prob = build_state_sdp(s, &Protocol::Quantum(current.clone()), cfg.objective)?;
            let sol = solve_step(&prob, cfg, warm[2].as_ref(), outer, "resource state")?;
            let state = psd_project(&sol.blocks[0])?;
            let state = state.scale_re(1.0 / state.trace().re.max(1e-300));
            warm[2] = Some(sol);
            let resource = ResourceSpec::new(
                current.resource().d_c(),
                state,
                current.resource().alice_factors(),
                current.resource().message_kind(),
            )?;
            current = QuantumProtocol::new(
                resource,
                current.encoder().clone(),
                current.decoders().to_vec(),
            )?;
            v = evaluate(s, &Protocol::Quantum(current.clone()), cfg.objective)?;
            if tracker.observe(v) {
                best = current.clone();
            }
        }

        if tracker.cycle_done(v) {
            break;
        }
    }
    Ok((Protocol::Quantum(best), tracker.best_value, tracker.trace))
}

#[cfg(test)]
mod seesaw_tests {
    use super::*;
    use crate::protocols::standard_teleport_protocol;
    use crate::quantum::{max_entangled, random_choi, random_density};
    use crate::scenario::{identity_target, partial_trace_target, InputSet, MessageKind};
    use crate::tensor::Dims;

    fn relay_scenario() -> ScenarioSpec {
        ScenarioSpec::new(
            vec![2],
            InputSet::DesignGrid,
            1,
            2,
            vec![identity_target(&[2]).unwrap()],
        )
        .unwrap()
    }

    fn pair_scenario() -> ScenarioSpec {
        ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGrid,
            2,
            2,
            vec![
                partial_trace_target(&[2, 2], 0).unwrap(),
                partial_trace_target(&[2, 2], 1).unwrap(),
            ],
        )
        .unwrap()
    }

    fn random_classical_template(seed: u64, s: &ScenarioSpec, d_c: usize) -> Protocol {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let shared = max_entangled(2).unwrap().projector();
        let resource = ResourceSpec::new(d_c, shared, 1, MessageKind::Classical).unwrap();
        let enc_dims = Dims::new(vec![s.input_total(), 2]).unwrap();
        let encoder = init_measurement(&enc_dims, d_c, &mut rng).unwrap();
        let decoders = (0..d_c)
            .map(|_| {
                (0..s.y_count())
                    .map(|_| {
                        random_choi(
                            Dims::single(s.output_dim()).unwrap(),
                            Dims::single(2).unwrap(),
                            2 * s.output_dim(),
                            &mut rng,
                        )
                        .unwrap()
                    })
                    .collect()
            })
            .collect();
        Protocol::Classical(ClassicalProtocol::new(resource, encoder, decoders).unwrap())
    }

    fn random_quantum_template(seed: u64, s: &ScenarioSpec, d_c: usize) -> Protocol {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let shared = random_density(Dims::new(vec![2, 2]).unwrap(), 4, &mut rng).unwrap();
        let resource = ResourceSpec::new(d_c, shared, 1, MessageKind::Quantum).unwrap();
        let in_dims = Dims::new(vec![s.input_total(), 2]).unwrap();
        let encoder = random_choi(
            Dims::single(d_c).unwrap(),
            in_dims.clone(),
            d_c * in_dims.total(),
            &mut rng,
        )
        .unwrap();
        let dec_in = Dims::new(vec![2, d_c]).unwrap();
        let decoders = (0..s.y_count())
            .map(|_| {
                random_choi(
                    Dims::single(s.output_dim()).unwrap(),
                    dec_in.clone(),
                    s.output_dim() * dec_in.total(),
                    &mut rng,
                )
                .unwrap()
            })
            .collect();
        Protocol::Quantum(QuantumProtocol::new(resource, encoder, decoders).unwrap())
    }

    #[test]
    fn seesaw_reaches_perfect_relay_from_random_start() {
        let s = relay_scenario();
        let resource = ResourceSpec::new(
            4,
            max_entangled(2).unwrap().projector(),
            1,
            MessageKind::Classical,
        )
        .unwrap();
        let cfg = SeesawConfig {
            restarts: 3,
            max_outer: 60,
            ..SeesawConfig::new(2024)
        };
        let report = seesaw_run(&s, &resource, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-4,
            "relay see-saw reached {}",
            report.best_value
        );
    }

    #[test]
    fn seesaw_trace_is_monotone_and_deterministic() {
        let s = pair_scenario();
        let template = random_classical_template(7, &s, 2);
        let cfg = SeesawConfig {
            restarts: 2,
            max_outer: 12,
            ..SeesawConfig::new(55)
        };
        let a = seesaw_from(&s, &template, &cfg).unwrap();
        for w in a.trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-7,
                "objective regressed from {} to {}",
                w[0],
                w[1]
            );
        }
        let b = seesaw_from(&s, &template, &cfg).unwrap();
        assert_eq!(a.best_value.to_bits(), b.best_value.to_bits());
        assert_eq!(a.best_seed, b.best_seed);
        assert_eq!(a.trace.len(), b.trace.len());
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let va: Vec<u64> = a.restart_values.iter().map(|v| v.to_bits()).collect();
        let vb: Vec<u64> = b.restart_values.iter().map(|v| v.to_bits()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn seesaw_is_a_fixed_point_at_teleportation() {
        let s = relay_scenario();
        let template = Protocol::Classical(standard_teleport_protocol(2).unwrap());
        let cfg = SeesawConfig {
            restarts: 1,
            max_outer: 8,
            ..SeesawConfig::new(1)
        };
        let report = seesaw_from(&s, &template, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-7,
            "teleportation degraded to {}",
            report.best_value
        );
        // re-solving any one step at the optimum must not improve it
        let p = match &report.best {
            Protocol::Classical(p) => p.clone(),
            _ => unreachable!(),
        };
        for prob in [
            build_measurement_sdp(&s, &p, FidelityObjective::Average).unwrap(),
            build_decoder_sdp(&s, &p, FidelityObjective::Average).unwrap(),
        ] {
            let sol = sdp_solve(&prob).unwrap();
            assert!(
                sol.objective <= report.best_value + 1e-7,
                "re-solve improved {} over {}",
                sol.objective,
                report.best_value
            );
        }
    }

    #[test]
    fn quantum_seesaw_routes_the_input_through_the_message() {
        // with a quantum message as large as the input, a perfect relay
        // needs no entanglement at all; the see-saw must find it
        let s = relay_scenario();
        let template = random_quantum_template(300, &s, 2);
        let cfg = SeesawConfig {
            restarts: 2,
            max_outer: 40,
            ..SeesawConfig::new(77)
        };
        let report = seesaw_from(&s, &template, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-3,
            "quantum relay see-saw reached {}",
            report.best_value
        );
    }

    #[test]
    fn worstcase_seesaw_keeps_teleportation_exact() {
        let s = relay_scenario();
        let template = Protocol::Classical(standard_teleport_protocol(2).unwrap());
        let cfg = SeesawConfig {
            restarts: 1,
            max_outer: 6,
            objective: FidelityObjective::Worst,
            ..SeesawConfig::new(5)
        };
        let report = seesaw_from(&s, &template, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-4,
            "worst-case value {}",
            report.best_value
        );
    }

    #[test]
    fn worstcase_entry_point_matches_objective() {
        let s = relay_scenario();
        let resource = ResourceSpec::new(
            4,
            max_entangled(2).unwrap().projector(),
            1,
            MessageKind::Classical,
        )
        .unwrap();
        let cfg = SeesawConfig {
            restarts: 1,
            max_outer: 25,
            ..SeesawConfig::new(13)
        };
        let report = seesaw_worstcase(&s, &resource, &cfg).unwrap();
        let table = report.best.correlations(&s).unwrap();
        let worst = worst_fidelity(&table, &s).unwrap();
        assert!(
            (worst - report.best_value).abs() < 1e-12,
            "reported {} but recomputed worst-case is {}",
            report.best_value,
            worst
        );
    }

    #[test]
    fn state_optimization_recovers_entanglement() {
        // start from a product resource state: without entanglement a
        // 1-bit relay cannot exceed the classical ceiling, with state
        // optimization enabled the see-saw should improve beyond it
        let s = relay_scenario();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut shared = crate::quantum::haar_state(Dims::single(2).unwrap(), &mut rng)
            .projector();
        shared = crate::tensor::kron(
            &shared,
            &crate::quantum::haar_state(Dims::single(2).unwrap(), &mut rng).projector(),
        )
        .unwrap();
        let resource = ResourceSpec::new(4, shared, 1, MessageKind::Classical).unwrap();
        let enc_dims = Dims::new(vec![2, 2]).unwrap();
        let encoder = init_measurement(&enc_dims, 4, &mut rng).unwrap();
        let decoders = (0..4)
            .map(|_| {
                vec![random_choi(
                    Dims::single(2).unwrap(),
                    Dims::single(2).unwrap(),
                    4,
                    &mut rng,
                )
                .unwrap()]
            })
            .collect();
        let template = Protocol::Classical(
            ClassicalProtocol::new(resource, encoder, decoders).unwrap(),
        );
        let cfg = SeesawConfig {
            restarts: 2,
            max_outer: 40,
            optimize_state: true,
            ..SeesawConfig::new(31)
        };
        let report = seesaw_from(&s, &template, &cfg).unwrap();
        assert!(
            report.best_value >= 1.0 - 1e-3,
            "state-optimizing see-saw reached {}",
            report.best_value
        );
    }
}
