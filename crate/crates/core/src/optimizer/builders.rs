//! Per-step semidefinite programs for the alternating fidelity search.
//!
//! With every other piece of a protocol frozen, the (average or worst-case)
//! fidelity is linear in the remaining piece, and the piece's feasible set
//! is a product of PSD cones cut by affine completeness/marginal
//! constraints.  Each builder here contracts the frozen pieces into the
//! objective coefficients of such a program, using exactly the same index
//! conventions as the correlation routines, so that the SDP objective value
//! *is* the fidelity the full simulation would report (for rank-one
//! targets).
//!
//! Worst-case variants introduce one free scalar `t` and a slack per
//! catalogue entry and receiver input, maximizing `t` subject to
//! `F_{k,y} − slack_{k,y} = t`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quantum::{ChoiState, Povm};
use crate::scenario::{
    contract_classical, contract_quantum, ClassicalProtocol, QuantumProtocol, ScenarioSpec,
};
use crate::tensor::{
    hermitian_eig, kron, partial_trace, permute_subsystems, psd_project, rebuild_from_eig, Dims,
    Operator, C64,
};
use crate::tol;

use super::sdp::{BlockSpec, Constraint, SdpProblem};

/// Figure of merit a sub-problem maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FidelityObjective {
    /// Mean fidelity over the averaging part of the catalogue and all
    /// receiver inputs; the SDP objective value equals that mean.
    Average,
    /// Minimum fidelity over the whole catalogue (including spot-check
    /// inputs) and all receiver inputs, via an epigraph scalar.
    Worst,
}

/// Rewrap an operator in the given subsystem structure (same total size).
fn with_dims(dims: &Dims, op: Operator) -> Result<Operator> {
    if op.dims() == dims {
        Ok(op)
    } else {
        Operator::new(dims.clone(), op.matrix().clone())
    }
}

/// `tr_out[(t ⊗ 1_in) η]` — how a decoding channel scores target `t` as an
/// operator on its input space: `tr[Λ(σ) t] = d_in · tr[σ · backactionᵀ]`.
fn backaction(target: &Operator, eta: &ChoiState) -> Result<Operator> {
    let eye_in = Operator::identity(eta.in_dims());
    let lifted = with_dims(eta.operator().dims(), kron(target, &eye_in)?)?;
    let n_out = eta.out_dims().len();
    let n_total = eta.operator().dims().len();
    let keep: Vec<usize> = (n_out..n_total).collect();
    Ok(partial_trace(&lifted.mul(eta.operator()), &keep)?.herm_part())
}

/// All target states `Θ_y(ψ_k)` for the catalogue, k-major, with a check
/// that they are rank one (the linear objective `tr[τ t]` equals the
/// fidelity only then).
fn target_grid(s: &ScenarioSpec) -> Result<Vec<Vec<Operator>>> {
    let mut grid = Vec::with_capacity(s.catalogue().len());
    for k in 0..s.catalogue().len() {
        let mut row = Vec::with_capacity(s.y_count());
        for y in 0..s.y_count() {
            let t = s.target_state(k, y)?;
            let purity = t.mul(&t).trace().re / t.trace().re.powi(2).max(1e-300);
            if (purity - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(
                    "scenario",
                    format!(
                        "target for input {k}, setting {y} has purity {purity:.6}; \
                         the see-saw requires rank-one targets"
                    ),
                ));
            }
            row.push(t);
        }
        grid.push(row);
    }
    Ok(grid)
}

/// Assemble an [`SdpProblem`] from per-(k,y) fidelity decompositions
/// `F_{k,y} = Σ_b tr[X_b · coeff_b]` (k-major over the full catalogue).
fn assemble(
    mut blocks: Vec<BlockSpec>,
    mut constraints: Vec<Constraint>,
    per_ky: Vec<Vec<(usize, Operator)>>,
    s: &ScenarioSpec,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let y_count = s.y_count();
    match objective {
        FidelityObjective::Average => {
            let scale = 1.0 / (s.avg_count() * y_count) as f64;
            let mut obj: Vec<Operator> = blocks
                .iter()
                .map(|b| Operator::zeros(b.dims.clone()))
                .collect();
            for k in 0..s.avg_count() {
                for y in 0..y_count {
                    for (b, c) in &per_ky[k * y_count + y] {
                        obj[*b] = obj[*b].add(&c.scale_re(scale));
                    }
                }
            }
            let obj = obj.into_iter().map(|o| o.herm_part()).collect();
            SdpProblem::new(blocks, obj, 0, vec![], constraints)
        }
        FidelityObjective::Worst => {
            let base = blocks.len();
            let k_count = s.catalogue().len();
            for k in 0..k_count {
                for y in 0..y_count {
                    blocks.push(BlockSpec::new(format!("slack_{k}_{y}"), Dims::scalar()));
                }
            }
            let one = Operator::identity(Dims::scalar());
            for k in 0..k_count {
                for y in 0..y_count {
                    let mut terms: Vec<(usize, Operator)> = per_ky[k * y_count + y]
                        .iter()
                        .map(|(b, c)| (*b, c.herm_part()))
                        .collect();
                    terms.push((base + k * y_count + y, one.scale_re(-1.0)));
                    constraints.push(Constraint::Linear {
                        terms,
                        scalar_terms: vec![(0, -1.0)],
                        rhs: 0.0,
                    });
                }
            }
            let obj: Vec<Operator> = blocks
                .iter()
                .map(|b| Operator::zeros(b.dims.clone()))
                .collect();
            SdpProblem::new(blocks, obj, 1, vec![1.0], constraints)
        }
    }
}

// ---------------------------------------------------------------------------
// classical-message steps
// ---------------------------------------------------------------------------

/// Decoder back-actions `W̃_{c,y,k}` for a classical protocol, indexed
/// `[k][y][c]`.
fn classical_backactions(
    s: &ScenarioSpec,
    p: &ClassicalProtocol,
    targets: &[Vec<Operator>],
) -> Result<Vec<Vec<Vec<Operator>>>> {
    let d_c = p.resource().d_c();
    let mut out = Vec::with_capacity(s.catalogue().len());
    for t_row in targets.iter() {
        let mut per_y = Vec::with_capacity(s.y_count());
        for (y, t) in t_row.iter().enumerate() {
            let mut per_c = Vec::with_capacity(d_c);
            for c in 0..d_c {
                per_c.push(backaction(t, p.decoder(c, y))?);
            }
            per_y.push(per_c);
        }
        out.push(per_y);
    }
    Ok(out)
}

/// Effective sender operators `M̃^c_ψ = tr_in[(ψ ⊗ 1_A) M^c]`, indexed
/// `[k][c]`.
fn sender_contractions(s: &ScenarioSpec, p: &ClassicalProtocol) -> Result<Vec<Vec<Operator>>> {
    let eye_a = Operator::identity(p.resource().alice_dims());
    let n_in = s.input_dims().len();
    let alice_indices: Vec<usize> = (n_in..n_in + p.resource().alice_factors()).collect();
    let mut out = Vec::with_capacity(s.catalogue().len());
    for psi in s.catalogue() {
        let lifted = kron(&psi.projector(), &eye_a)?;
        let mut per_c = Vec::with_capacity(p.encoder().len());
        for effect in p.encoder().elements() {
            per_c.push(partial_trace(&lifted.mul(effect), &alice_indices)?.herm_part());
        }
        out.push(per_c);
    }
    Ok(out)
}

/// Optimize the sender's measurement with the resource state and all
/// decoders frozen.  One PSD block per message value `c`, living on the
/// encoder's input⊗A space, constrained to sum to the identity.
pub fn build_measurement_sdp(
    s: &ScenarioSpec,
    p: &ClassicalProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let backs = classical_backactions(s, p, &targets)?;
    let rho = p.resource().shared_state();
    let d_b = p.resource().bob_dims().total() as f64;
    let eye_a = Operator::identity(p.resource().alice_dims());
    let n_a = p.resource().alice_factors();
    let keep_a: Vec<usize> = (0..n_a).collect();
    let d_c = p.resource().d_c();
    let enc_dims = p.encoder().dims().clone();

    let blocks: Vec<BlockSpec> = (0..d_c)
        .map(|c| BlockSpec::new(format!("effect_{c}"), enc_dims.clone()))
        .collect();
    let constraints = vec![Constraint::BlockSum {
        blocks: (0..d_c).collect(),
        target: Operator::identity(enc_dims.clone()),
    }];

    let mut per_ky = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for (k, psi) in s.catalogue().iter().enumerate() {
        let proj = psi.projector();
        for y in 0..s.y_count() {
            let mut terms = Vec::with_capacity(d_c);
            for c in 0..d_c {
                // R = tr_B[ρ (1_A ⊗ W̃ᵀ)]: the resource state weighted by
                // how the decoders score message c
                let lifted = kron(&eye_a, &backs[k][y][c].transpose())?;
                let r = partial_trace(&rho.mul(&lifted), &keep_a)?;
                let coeff = with_dims(&enc_dims, kron(&proj, &r)?.scale_re(d_b))?;
                terms.push((c, coeff.herm_part()));
            }
            per_ky.push(terms);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

/// Optimize all decoding channels with the measurement and resource state
/// frozen.  One PSD block per (message, receiver input) pair — the Choi
/// operator of that decoder — each constrained to the channel marginal
/// `tr_out η = 1/d_B`.
pub fn build_decoder_sdp(
    s: &ScenarioSpec,
    p: &ClassicalProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let senders = sender_contractions(s, p)?;
    let rho = p.resource().shared_state();
    let d_a = p.resource().alice_dims().total();
    let bob = p.resource().bob_dims();
    let d_b = bob.total() as f64;
    let d_c = p.resource().d_c();
    let y_count = s.y_count();
    let d_out = s.output_dim();

    let mut blocks = Vec::with_capacity(d_c * y_count);
    let mut constraints = Vec::with_capacity(d_c * y_count);
    for c in 0..d_c {
        for y in 0..y_count {
            let dims = p.decoder(c, y).operator().dims().clone();
            blocks.push(BlockSpec::new(format!("decoder_{c}_{y}"), dims));
            constraints.push(Constraint::OutMarginal {
                block: c * y_count + y,
                d_out,
                target: Operator::identity(bob.clone()).scale_re(1.0 / d_b),
            });
        }
    }

    let mut per_ky = Vec::with_capacity(s.catalogue().len() * y_count);
    for k in 0..s.catalogue().len() {
        // sub-normalized receiver states, one per message value
        let sigmas: Vec<Operator> = (0..d_c)
            .map(|c| contract_classical(&senders[k][c], rho, d_a, bob.clone()))
            .collect();
        for y in 0..y_count {
            let mut terms = Vec::with_capacity(d_c);
            for (c, sigma) in sigmas.iter().enumerate() {
                let dims = p.decoder(c, y).operator().dims().clone();
                let coeff = with_dims(
                    &dims,
                    kron(&targets[k][y], &sigma.transpose())?.scale_re(d_b),
                )?;
                terms.push((c * y_count + y, coeff.herm_part()));
            }
            per_ky.push(terms);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

/// Optimize the shared resource state with the encoder (measurement or
/// channel) and decoders frozen.  A single PSD block on `A ⊗ B` with unit
/// trace.
pub fn build_state_sdp(
    s: &ScenarioSpec,
    p: &crate::scenario::Protocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    match p {
        crate::scenario::Protocol::Classical(p) => build_state_classical(s, p, objective),
        crate::scenario::Protocol::Quantum(p) => build_state_quantum(s, p, objective),
    }
}

fn build_state_classical(
    s: &ScenarioSpec,
    p: &ClassicalProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let backs = classical_backactions(s, p, &targets)?;
    let senders = sender_contractions(s, p)?;
    let rho_dims = p.resource().shared_state().dims().clone();
    let d_b = p.resource().bob_dims().total() as f64;
    let d_c = p.resource().d_c();

    let blocks = vec![BlockSpec::new("resource", rho_dims.clone())];
    let constraints = vec![Constraint::Trace { block: 0, rhs: 1.0 }];

    let mut per_ky = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for k in 0..s.catalogue().len() {
        for y in 0..s.y_count() {
            let mut h = Operator::zeros(rho_dims.clone());
            for c in 0..d_c {
                let term = kron(&senders[k][c], &backs[k][y][c].transpose())?.scale_re(d_b);
                h = h.add(&with_dims(&rho_dims, term)?);
            }
            per_ky.push(vec![(0, h.herm_part())]);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

// ---------------------------------------------------------------------------
// quantum-message steps
// ---------------------------------------------------------------------------

/// Decoder score operators `S^{CB}_{y,k}` on `C ⊗ B`: the back-action
/// `V = tr_out[(t ⊗ 1_{BC}) η_y]` transposed, scaled by `d_B·d_C`, and
/// reordered so the message register comes first — the contraction kernel
/// shared by all three quantum-message steps, with
/// `F_{k,y} = tr[σ_{CB} · S^{CB}ᵀ]` restated as needed per step.
fn quantum_scores(
    s: &ScenarioSpec,
    p: &QuantumProtocol,
    targets: &[Vec<Operator>],
) -> Result<Vec<Vec<Operator>>> {
    let bob = p.resource().bob_dims();
    let d_c = p.resource().d_c();
    let d_bc = (bob.total() * d_c) as f64;
    let structured = bob.join(&Dims::single(d_c)?)?;
    let n_b = bob.len();
    let perm: Vec<usize> = std::iter::once(n_b).chain(0..n_b).collect();
    let mut out = Vec::with_capacity(s.catalogue().len());
    for t_row in targets.iter() {
        let mut per_y = Vec::with_capacity(s.y_count());
        for (y, t) in t_row.iter().enumerate() {
            let v = backaction(t, &p.decoders()[y])?;
            let s_bc = with_dims(&structured, v.transpose().scale_re(d_bc))?;
            per_y.push(permute_subsystems(&s_bc, &perm)?);
        }
        out.push(per_y);
    }
    Ok(out)
}

/// Effective encoder operators `μ̃_ψ = tr_in[(1_C ⊗ ψᵀ ⊗ 1_A) μ]` on
/// `C ⊗ A`, one per catalogue entry.
fn encoder_contractions(s: &ScenarioSpec, p: &QuantumProtocol) -> Result<Vec<Operator>> {
    let d_c = p.resource().d_c();
    let eye_c = Operator::identity(Dims::single(d_c)?);
    let eye_a = Operator::identity(p.resource().alice_dims());
    let n_in = s.input_dims().len();
    let keep: Vec<usize> = std::iter::once(0)
        .chain(1 + n_in..1 + n_in + p.resource().alice_factors())
        .collect();
    let mu = p.encoder().operator();
    s.catalogue()
        .iter()
        .map(|psi| {
            // the keep indices refer to the lift's [C, input…, A…] factor
            // structure, so rewrap μ into it rather than the other way round
            let lift = kron(&kron(&eye_c, &psi.projector().transpose())?, &eye_a)?;
            let mu_c = with_dims(lift.dims(), mu.clone())?;
            partial_trace(&lift.mul(&mu_c), &keep)
        })
        .collect()
}

/// Optimize the encoding channel `A'⊗A → C` with the resource state and
/// decoders frozen.  A single PSD block — the encoder's Choi operator —
/// with the channel marginal `tr_C μ = 1/d_in`.
pub fn build_quantum_encoder_sdp(
    s: &ScenarioSpec,
    p: &QuantumProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let scores = quantum_scores(s, p, &targets)?;
    let rho = p.resource().shared_state();
    let d_a = p.resource().alice_dims().total();
    let d_b = p.resource().bob_dims().total();
    let d_c = p.resource().d_c();
    let mu_dims = p.encoder().operator().dims().clone();
    let d_m = p.encoder().in_dims().total();
    let scale = d_m as f64;

    let blocks = vec![BlockSpec::new("encoder", mu_dims.clone())];
    let constraints = vec![Constraint::OutMarginal {
        block: 0,
        d_out: d_c,
        target: Operator::identity(p.encoder().in_dims()).scale_re(1.0 / d_m as f64),
    }];

    let mut per_ky = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for (k, psi) in s.catalogue().iter().enumerate() {
        let proj = psi.projector();
        let d_in = proj.dim();
        for y in 0..s.y_count() {
            let s_cb = &scores[k][y];
            // Q[(c,a),(c',a')] = Σ_{b,b'} ρ[(a',b),(a,b')] · S[(c,b'),(c',b)]
            let qdim = d_c * d_a;
            let q = DMatrix::<C64>::from_fn(qdim, qdim, |row, col| {
                let (c1, a1) = (row / d_a, row % d_a);
                let (c2, a2) = (col / d_a, col % d_a);
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..d_b {
                    for bp in 0..d_b {
                        acc += rho.get(a2 * d_b + b, a1 * d_b + bp)
                            * s_cb.get(c1 * d_b + bp, c2 * d_b + b);
                    }
                }
                acc
            });
            // Γ[(c,(i,a)),(c',(i',a'))] = scale · ψ[i',i] · Q[(c,a),(c',a')]
            let g = DMatrix::<C64>::from_fn(d_c * d_m, d_c * d_m, |row, col| {
                let (c1, m1) = (row / d_m, row % d_m);
                let (c2, m2) = (col / d_m, col % d_m);
                let (i1, a1) = (m1 / d_a, m1 % d_a);
                let (i2, a2) = (m2 / d_a, m2 % d_a);
                proj.get(i2, i1) * q[(c1 * d_a + a1, c2 * d_a + a2)] * scale
            });
            let _ = d_in;
            let gamma = Operator::new(mu_dims.clone(), g)?.herm_part();
            per_ky.push(vec![(0, gamma)]);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

/// Optimize all decoding channels `B⊗C → output` with the encoder and
/// resource state frozen.  One PSD block per receiver input, with the
/// channel marginal `tr_out η = 1/(d_B·d_C)`.
pub fn build_quantum_decoder_sdp(
    s: &ScenarioSpec,
    p: &QuantumProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let encs = encoder_contractions(s, p)?;
    let rho = p.resource().shared_state();
    let d_a = p.resource().alice_dims().total();
    let bob = p.resource().bob_dims();
    let d_c = p.resource().d_c();
    let d_bc = (bob.total() * d_c) as f64;
    let d_m = p.encoder().in_dims().total() as f64;
    let y_count = s.y_count();
    let d_out = s.output_dim();
    let n_b = bob.len();
    let perm_to_bc: Vec<usize> = (1..=n_b).chain(std::iter::once(0)).collect();

    let mut blocks = Vec::with_capacity(y_count);
    let mut constraints = Vec::with_capacity(y_count);
    for (y, eta) in p.decoders().iter().enumerate() {
        blocks.push(BlockSpec::new(
            format!("decoder_{y}"),
            eta.operator().dims().clone(),
        ));
        constraints.push(Constraint::OutMarginal {
            block: y,
            d_out,
            target: Operator::identity(eta.in_dims()).scale_re(1.0 / d_bc),
        });
    }

    let mut per_ky = Vec::with_capacity(s.catalogue().len() * y_count);
    for (k, mu_tilde) in encs.iter().enumerate() {
        let sigma_cb = contract_quantum(mu_tilde, rho, d_a, d_c, &bob, d_m)?;
        let sigma_bc = permute_subsystems(&sigma_cb, &perm_to_bc)?;
        for y in 0..y_count {
            let dims = p.decoders()[y].operator().dims().clone();
            let coeff = with_dims(
                &dims,
                kron(&targets[k][y], &sigma_bc.transpose())?.scale_re(d_bc),
            )?;
            per_ky.push(vec![(y, coeff.herm_part())]);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

fn build_state_quantum(
    s: &ScenarioSpec,
    p: &QuantumProtocol,
    objective: FidelityObjective,
) -> Result<SdpProblem> {
    let targets = target_grid(s)?;
    let scores = quantum_scores(s, p, &targets)?;
    let encs = encoder_contractions(s, p)?;
    let rho_dims = p.resource().shared_state().dims().clone();
    let d_a = p.resource().alice_dims().total();
    let d_b = p.resource().bob_dims().total();
    let d_c = p.resource().d_c();
    let scale = p.encoder().in_dims().total() as f64;

    let blocks = vec![BlockSpec::new("resource", rho_dims.clone())];
    let constraints = vec![Constraint::Trace { block: 0, rhs: 1.0 }];

    let dim = d_a * d_b;
    let mut per_ky = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for (k, mu_tilde) in encs.iter().enumerate() {
        for y in 0..s.y_count() {
            let s_cb = &scores[k][y];
            // H[(a,b'),(a',b)] = scale · Σ_{c,c'} μ̃[(c,a'),(c',a)] · S[(c',b'),(c,b)]
            let h = DMatrix::<C64>::from_fn(dim, dim, |row, col| {
                let (a1, bp) = (row / d_b, row % d_b);
                let (a2, b) = (col / d_b, col % d_b);
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..d_c {
                    for cp in 0..d_c {
                        acc += mu_tilde.get(c * d_a + a2, cp * d_a + a1)
                            * s_cb.get(cp * d_b + bp, c * d_b + b);
                    }
                }
                acc * scale
            });
            per_ky.push(vec![(0, Operator::new(rho_dims.clone(), h)?.herm_part())]);
        }
    }
    assemble(blocks, constraints, per_ky, s, objective)
}

// ---------------------------------------------------------------------------
// cone repairs: solver output → exactly feasible protocol pieces
// ---------------------------------------------------------------------------

/// `S^{-1/2}` with eigenvalues floored at a relative threshold, so nearly
/// singular normalizations stay finite.
fn inv_sqrt_floored(op: &Operator) -> Result<(Operator, f64)> {
    let (vals, vecs) = hermitian_eig(op)?;
    let vmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let floor = (vmax * 1e-12).max(1e-300);
    let inv: Vec<f64> = vals.iter().map(|&l| 1.0 / l.max(floor).sqrt()).collect();
    Ok((rebuild_from_eig(&inv, &vecs), floor))
}

/// Turn approximate effects into an exactly valid POVM: clip each to the
/// PSD cone, normalize the sum to the identity by a symmetric sandwich,
/// and spread any residual (from floored near-null directions) uniformly.
pub fn repair_povm(effects: &[Operator]) -> Result<Povm> {
    if effects.is_empty() {
        return Err(Error::invalid("POVM repair", "no effects"));
    }
    let dims = effects[0].dims().clone();
    let clipped: Vec<Operator> = effects
        .iter()
        .map(psd_project)
        .collect::<Result<Vec<_>>>()?;
    let mut sum = Operator::zeros(dims.clone());
    for e in &clipped {
        sum = sum.add(e);
    }
    let (t, _) = inv_sqrt_floored(&sum)?;
    let mut fixed: Vec<Operator> = clipped
        .iter()
        .map(|e| t.mul(e).mul(&t).herm_part())
        .collect();
    let mut total = Operator::zeros(dims.clone());
    for e in &fixed {
        total = total.add(e);
    }
    // the deficit I − T S T is PSD because flooring only shrinks T S T
    let deficit = psd_project(&Operator::identity(dims).sub(&total))?;
    let share = deficit.scale_re(1.0 / fixed.len() as f64);
    for e in &mut fixed {
        *e = e.add(&share);
    }
    Povm::with_tolerance(fixed, tol::ALGEBRAIC)
}

/// Turn an approximate Choi operator into an exactly valid one: clip to the
/// PSD cone, sandwich with `(1 ⊗ S^{-1/2})` so the input marginal becomes
/// `1/d_in`, and pad any floored-direction deficit with a depolarizing
/// component.
pub fn repair_choi(op: &Operator, n_out: usize) -> Result<ChoiState> {
    let dims = op.dims().clone();
    let out_factors = &dims.factors()[..n_out];
    let in_factors = &dims.factors()[n_out..];
    let d_out: usize = out_factors.iter().product();
    let in_dims = if in_factors.is_empty() {
        Dims::scalar()
    } else {
        Dims::new(in_factors.to_vec())?
    };
    let d_in = in_dims.total();
    let zeta = psd_project(op)?;
    if zeta.trace().re < 1e-12 {
        // nothing to normalize: fall back to the fully depolarizing channel
        let flat = Operator::identity(dims).scale_re(1.0 / (d_out * d_in) as f64);
        return ChoiState::with_tolerance(flat, n_out, tol::ALGEBRAIC);
    }
    let keep_in: Vec<usize> = (n_out..dims.len()).collect();
    let marginal = partial_trace(&zeta, &keep_in)?;
    let (t, _) = inv_sqrt_floored(&marginal)?;
    let eye_out = Operator::identity(if n_out == 0 {
        Dims::scalar()
    } else {
        Dims::new(out_factors.to_vec())?
    });
    let sandwich = with_dims(&dims, kron(&eye_out, &t)?)?;
    let main = sandwich
        .mul(&zeta)
        .mul(&sandwich)
        .scale_re(1.0 / d_in as f64)
        .herm_part();
    // pad directions lost to the eigenvalue floor with a depolarizing term
    let achieved = partial_trace(&main, &keep_in)?;
    let deficit = psd_project(
        &Operator::identity(in_dims)
            .scale_re(1.0 / d_in as f64)
            .sub(&achieved),
    )?;
    let pad = with_dims(
        &dims,
        kron(&eye_out.scale_re(1.0 / d_out as f64), &deficit)?,
    )?;
    ChoiState::with_tolerance(main.add(&pad), n_out, tol::ALGEBRAIC)
}

// ---------------------------------------------------------------------------
// initial pieces for restarts
// ---------------------------------------------------------------------------

/// A random projective-bundle POVM: conjugate the computational basis by a
/// Haar unitary and partition it into `d_c` groups of near-equal size (the
/// trailing groups stay empty when `d_c` exceeds the space dimension).
pub fn init_measurement(dims: &Dims, d_c: usize, rng: &mut impl Rng) -> Result<Povm> {
    if d_c == 0 {
        return Err(Error::invalid("POVM init", "no outcomes"));
    }
    let d = dims.total();
    if d_c > d {
        // more outcomes than dimensions: a basis partition would leave
        // dead outcomes, so build a full-support random POVM from Haar
        // states instead (outer products, then a completeness sandwich)
        let outers: Vec<Operator> = (0..d_c)
            .map(|_| Ok(crate::quantum::haar_state(dims.clone(), rng).projector()))
            .collect::<Result<Vec<_>>>()?;
        return repair_povm(&outers);
    }
    let u = crate::quantum::haar_unitary(dims.clone(), rng);
    let base = d / d_c;
    let rem = d % d_c;
    let mut effects = Vec::with_capacity(d_c);
    let mut next = 0usize;
    for c in 0..d_c {
        let size = base + usize::from(c < rem);
        let mut m = DMatrix::<C64>::zeros(d, d);
        for j in next..next + size {
            let col = u.matrix().column(j);
            m += &col * col.adjoint();
        }
        next += size;
        effects.push(Operator::new(dims.clone(), m)?);
    }
    Povm::with_tolerance(effects, tol::ALGEBRAIC)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::standard_teleport_protocol;
    use crate::quantum::{max_entangled, random_choi, random_density};
    use crate::scenario::{
        avg_fidelity, correlations_classical, correlations_quantum, identity_target,
        partial_trace_target, worst_fidelity, InputSet, MessageKind, Protocol, ResourceSpec,
    };
    use crate::tensor::PureVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use super::super::sdp::{sdp_solve, sdp_solve_with, SdpStatus};

    /// Two-qubit pair-guessing scenario: inputs `[2,2]`, two receiver
    /// settings asking for the first or second input qubit.
    fn rac_scenario(extra: usize) -> ScenarioSpec {
        ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGridAugmented { extra, seed: 71 },
            2,
            2,
            vec![
                partial_trace_target(&[2, 2], 0).unwrap(),
                partial_trace_target(&[2, 2], 1).unwrap(),
            ],
        )
        .unwrap()
    }

    /// Single-qubit relay scenario with an identity target.
    fn relay_scenario(extra: usize) -> ScenarioSpec {
        ScenarioSpec::new(
            vec![2],
            InputSet::DesignGridAugmented { extra, seed: 72 },
            1,
            2,
            vec![identity_target(&[2]).unwrap()],
        )
        .unwrap()
    }

    fn random_classical(seed: u64, s: &ScenarioSpec, d_c: usize) -> ClassicalProtocol {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let shared = random_density(Dims::new(vec![2, 2]).unwrap(), 4, &mut rng).unwrap();
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
                            4,
                            &mut rng,
                        )
                        .unwrap()
                    })
                    .collect()
            })
            .collect();
        ClassicalProtocol::new(resource, encoder, decoders).unwrap()
    }

    fn random_quantum(seed: u64, s: &ScenarioSpec, d_c: usize) -> QuantumProtocol {
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
        QuantumProtocol::new(resource, encoder, decoders).unwrap()
    }

    fn objective_at_classical(s: &ScenarioSpec, p: &ClassicalProtocol, which: &str) -> f64 {
        match which {
            "measurement" => {
                let prob = build_measurement_sdp(s, p, FidelityObjective::Average).unwrap();
                prob.value_at(p.encoder().elements(), &[])
            }
            "decoder" => {
                let prob = build_decoder_sdp(s, p, FidelityObjective::Average).unwrap();
                let blocks: Vec<Operator> = p
                    .decoders()
                    .iter()
                    .flat_map(|row| row.iter().map(|eta| eta.operator().clone()))
                    .collect();
                prob.value_at(&blocks, &[])
            }
            "state" => {
                let prob = build_state_sdp(
                    s,
                    &Protocol::Classical(p.clone()),
                    FidelityObjective::Average,
                )
                .unwrap();
                prob.value_at(std::slice::from_ref(p.resource().shared_state()), &[])
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn classical_objectives_match_simulation() {
        let s = rac_scenario(2);
        for seed in [11u64, 12] {
            let p = random_classical(seed, &s, 2);
            let f = avg_fidelity(&correlations_classical(&p, &s).unwrap(), &s).unwrap();
            for which in ["measurement", "decoder", "state"] {
                let v = objective_at_classical(&s, &p, which);
                assert!(
                    (v - f).abs() < 1e-9,
                    "seed {seed} {which}: SDP objective {v} vs simulated {f}"
                );
            }
        }
    }

    #[test]
    fn quantum_objectives_match_simulation() {
        let s = relay_scenario(2);
        for seed in [21u64, 22] {
            let p = random_quantum(seed, &s, 2);
            let f = avg_fidelity(&correlations_quantum(&p, &s).unwrap(), &s).unwrap();

            let enc = build_quantum_encoder_sdp(&s, &p, FidelityObjective::Average).unwrap();
            let v = enc.value_at(std::slice::from_ref(p.encoder().operator()), &[]);
            assert!((v - f).abs() < 1e-9, "seed {seed} encoder: {v} vs {f}");

            let dec = build_quantum_decoder_sdp(&s, &p, FidelityObjective::Average).unwrap();
            let blocks: Vec<Operator> =
                p.decoders().iter().map(|eta| eta.operator().clone()).collect();
            let v = dec.value_at(&blocks, &[]);
            assert!((v - f).abs() < 1e-9, "seed {seed} decoder: {v} vs {f}");

            let st =
                build_state_sdp(&s, &Protocol::Quantum(p.clone()), FidelityObjective::Average)
                    .unwrap();
            let v = st.value_at(std::slice::from_ref(p.resource().shared_state()), &[]);
            assert!((v - f).abs() < 1e-9, "seed {seed} state: {v} vs {f}");
        }
    }

    #[test]
    fn worst_case_constraints_match_simulation() {
        // at a feasible point (the frozen protocol itself + slacks), the
        // epigraph constraints hold exactly with t = min_{k,y} F_{k,y}
        let s = rac_scenario(2);
        let p = random_classical(31, &s, 2);
        let table = correlations_classical(&p, &s).unwrap();
        let worst = worst_fidelity(&table, &s).unwrap();
        let prob = build_measurement_sdp(&s, &p, FidelityObjective::Worst).unwrap();
        // solve and confirm the optimum is at least the current worst value
        let sol = sdp_solve_with(&prob, 1e-8, 40_000, None).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            sol.scalars[0] >= worst - 1e-6,
            "optimized worst {} below incumbent {}",
            sol.scalars[0],
            worst
        );
    }

    #[test]
    fn decoder_step_on_teleportation_stays_perfect() {
        let p = standard_teleport_protocol(2).unwrap();
        let s = relay_scenario(0);
        let prob = build_decoder_sdp(&s, &p, FidelityObjective::Average).unwrap();
        let sol = sdp_solve(&prob).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            (sol.objective - 1.0).abs() < 1e-6,
            "teleportation decoder step reached {}",
            sol.objective
        );
    }

    #[test]
    fn measurement_step_on_teleportation_stays_perfect() {
        let p = standard_teleport_protocol(2).unwrap();
        let s = relay_scenario(0);
        let prob = build_measurement_sdp(&s, &p, FidelityObjective::Average).unwrap();
        let sol = sdp_solve(&prob).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(
            (sol.objective - 1.0).abs() < 1e-6,
            "teleportation measurement step reached {}",
            sol.objective
        );
    }

    #[test]
    fn repair_povm_fixes_perturbed_effects() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let dims = Dims::new(vec![2, 2]).unwrap();
        let clean = init_measurement(&dims, 4, &mut rng).unwrap();
        let noisy: Vec<Operator> = clean
            .elements()
            .iter()
            .map(|e| {
                let g = DMatrix::<C64>::from_fn(4, 4, |_, _| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let noise = Operator::new(dims.clone(), g).unwrap().herm_part();
                e.add(&noise.scale_re(1e-3))
            })
            .collect();
        let repaired = repair_povm(&noisy).unwrap();
        // close to the perturbed input, exactly complete
        for (e, n) in repaired.elements().iter().zip(&noisy) {
            assert!(e.max_abs_diff(n) < 1e-2);
        }
    }

    #[test]
    fn repair_choi_restores_marginal() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let clean = random_choi(
            Dims::single(2).unwrap(),
            Dims::single(2).unwrap(),
            4,
            &mut rng,
        )
        .unwrap();
        let g = DMatrix::<C64>::from_fn(4, 4, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let noise = Operator::new(clean.operator().dims().clone(), g)
            .unwrap()
            .herm_part();
        let noisy = clean.operator().add(&noise.scale_re(1e-3));
        let repaired = repair_choi(&noisy, 1).unwrap();
        assert!(repaired.operator().max_abs_diff(&noisy) < 1e-2);
    }

    #[test]
    fn repair_povm_handles_rank_deficient_sums() {
        // all weight on one effect, others zero: repair must still produce
        // a complete POVM
        let dims = Dims::single(2).unwrap();
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 0)] = C64::new(1.0, 0.0);
        let spike = Operator::new(dims.clone(), m).unwrap();
        let zero = Operator::zeros(dims);
        let povm = repair_povm(&[spike, zero]).unwrap();
        assert_eq!(povm.len(), 2);
    }

    #[test]
    fn init_measurement_handles_more_outcomes_than_dimensions() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let povm = init_measurement(&Dims::single(2).unwrap(), 3, &mut rng).unwrap();
        assert_eq!(povm.len(), 3);
        // every outcome must stay alive (full-support initialization)
        for effect in povm.elements() {
            assert!(effect.trace().re > 1e-3, "dead outcome in initial POVM");
        }
    }

    #[test]
    fn entangled_inputs_are_scored_correctly() {
        // the objective/simulation identity must hold beyond product
        // inputs: extend a pair-input catalogue with an entangled state
        // under an identity target (which keeps every target rank one)
        let phi = max_entangled(2).unwrap();
        let mut catalogue: Vec<PureVector> = rac_scenario(0).catalogue().to_vec();
        catalogue.push(phi);
        let avg = catalogue.len();
        let s = ScenarioSpec::from_catalogue(
            vec![2, 2],
            catalogue,
            avg,
            1,
            4,
            vec![identity_target(&[2, 2]).unwrap()],
        )
        .unwrap();
        let p = random_classical(41, &s, 2);
        let f = avg_fidelity(&correlations_classical(&p, &s).unwrap(), &s).unwrap();
        let v = objective_at_classical(&s, &p, "measurement");
        assert!((v - f).abs() < 1e-9, "{v} vs {f}");
    }

    #[test]
    fn mixed_targets_are_rejected() {
        // a partial-trace target is mixed on an entangled input; the linear
        // objective cannot express its fidelity, so the builder must refuse
        let phi = max_entangled(2).unwrap();
        let s = ScenarioSpec::from_catalogue(
            vec![2, 2],
            vec![phi],
            1,
            1,
            2,
            vec![partial_trace_target(&[2, 2], 0).unwrap()],
        )
        .unwrap();
        let p = random_classical(43, &s, 2);
        assert!(build_measurement_sdp(&s, &p, FidelityObjective::Average).is_err());
    }
}
