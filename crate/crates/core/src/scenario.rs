//! Prepare-and-measure scenarios with quantum inputs.
//!
//! A scenario fixes the input ensemble (product pure states over the factors
//! of `H_in`), the number of receiver inputs `Y`, the output dimension, and a
//! target channel `Θ_y` per receiver input. A protocol — entangled resource
//! plus encoder and decoders, with either a classical or a quantum message —
//! induces a table of output states `τ_{ψ,y}`, and three metrics are defined
//! on that table: average fidelity against the targets, worst-case fidelity,
//! and the fidelity spread that witnesses input-independence.
//!
//! Space layout: the sender holds the input register `A'` and her resource
//! share `A`; the receiver holds `B` and (for quantum messages) the message
//! register `C`. Encoders act on `A'⊗A`; classical decoders map `B` to the
//! output, quantum decoders map `B⊗C` to the output.

use crate::error::{Error, Result};
use crate::quantum::{
    choi_from_kraus, fidelity, haar_state, product_design, ChoiState, Design2, KrausOp, Povm,
};
use crate::tensor::{
    kron, kron_vec, partial_trace, permute_subsystems, Dims, Operator, PureVector, C64,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// How the input catalogue is populated.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum InputSet {
    /// An explicit list of pure states on the joined input space. The
    /// average fidelity runs over all of them.
    Explicit(Vec<Vec<(f64, f64)>>),
    /// The grid of all products of per-factor SIC states. Degree-2
    /// averages over this grid equal Haar averages exactly.
    DesignGrid,
    /// The design grid plus `extra` seeded Haar-random product states.
    /// The extras join the worst-case and spread scans but not the
    /// average (which stays an exact design average).
    DesignGridAugmented { extra: usize, seed: u64 },
}

/// A fully specified scenario: input structure, receiver input count,
/// output dimension, and one target channel per receiver input.
///
/// The input catalogue is materialized eagerly at construction; evaluation
/// functions iterate over the fixed catalogue.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    input_dims: Vec<usize>,
    input_set: InputSet,
    y_count: usize,
    output_dim: usize,
    targets: Vec<ChoiState>,
    catalogue: Vec<PureVector>,
    avg_count: usize,
}

impl ScenarioSpec {
    pub fn new(
        input_dims: Vec<usize>,
        input_set: InputSet,
        y_count: usize,
        output_dim: usize,
        targets: Vec<ChoiState>,
    ) -> Result<Self> {
        let joined = Dims::new(input_dims.clone())?;
        let d_in = joined.total();
        if y_count == 0 {
            return Err(Error::invalid("scenario", "y_count must be positive"));
        }
        if targets.len() != y_count {
            return Err(Error::invalid(
                "scenario",
                format!("{} targets for y_count {y_count}", targets.len()),
            ));
        }
        for (y, t) in targets.iter().enumerate() {
            if t.in_dims().total() != d_in || t.out_dims().total() != output_dim {
                return Err(Error::dim(format!(
                    "target {y} maps dimension {} to {}, scenario expects {d_in} to {output_dim}",
                    t.in_dims().total(),
                    t.out_dims().total()
                )));
            }
        }
        let (catalogue, avg_count) = materialize(&input_dims, &joined, &input_set)?;
        Ok(ScenarioSpec {
            input_dims,
            input_set,
            y_count,
            output_dim,
            targets,
            catalogue,
            avg_count,
        })
    }

    /// Builds a scenario over a caller-supplied catalogue whose first
    /// `avg_count` entries form the averaging set (the caller asserts they
    /// constitute an exact degree-2 averaging set if the average is to be
    /// read as a Haar average); any remaining entries are treated as random
    /// spot checks for the worst-case and spread scans.
    pub fn from_catalogue(
        input_dims: Vec<usize>,
        catalogue: Vec<PureVector>,
        avg_count: usize,
        y_count: usize,
        output_dim: usize,
        targets: Vec<ChoiState>,
    ) -> Result<Self> {
        let joined = Dims::new(input_dims.clone())?;
        if catalogue.is_empty() || avg_count == 0 || avg_count > catalogue.len() {
            return Err(Error::invalid(
                "scenario",
                "catalogue must be non-empty with 1 <= avg_count <= its length",
            ));
        }
        for state in &catalogue {
            if state.dims() != &joined {
                return Err(Error::dim(format!(
                    "catalogue state on {:?}, scenario inputs are {:?}",
                    state.dims().factors(),
                    joined.factors()
                )));
            }
        }
        let input_set = InputSet::Explicit(
            catalogue
                .iter()
                .map(|s| s.vector().iter().map(|c| (c.re, c.im)).collect())
                .collect(),
        );
        let mut spec = ScenarioSpec::new(input_dims, input_set, y_count, output_dim, targets)?;
        spec.catalogue = catalogue;
        spec.avg_count = avg_count;
        Ok(spec)
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn input_total(&self) -> usize {
        self.input_dims.iter().product()
    }

    pub fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    pub fn y_count(&self) -> usize {
        self.y_count
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn targets(&self) -> &[ChoiState] {
        &self.targets
    }

    /// The full materialized input catalogue.
    pub fn catalogue(&self) -> &[PureVector] {
        &self.catalogue
    }

    /// Leading catalogue entries that enter the average (the design grid,
    /// or everything for explicit input sets).
    pub fn avg_count(&self) -> usize {
        self.avg_count
    }

    /// The target output state `Θ_y(ψ_k)` for catalogue entry `k`.
    pub fn target_state(&self, k: usize, y: usize) -> Result<Operator> {
        self.targets[y].apply(&self.catalogue[k].projector())
    }

    /// Whether the catalogue is strong enough that a tiny fidelity spread
    /// is accepted as evidence of input-independence: at least 100 random
    /// spot checks beyond the averaging set.
    pub fn certifies_universality(&self) -> bool {
        self.catalogue.len() >= self.avg_count + 100
    }
}

fn materialize(
    input_dims: &[usize],
    joined: &Dims,
    set: &InputSet,
) -> Result<(Vec<PureVector>, usize)> {
    match set {
        InputSet::Explicit(raw) => {
            let states = raw
                .iter()
                .map(|amps| {
                    PureVector::new(
                        joined.clone(),
                        amps.iter().map(|&(re, im)| C64::new(re, im)).collect(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            if states.is_empty() {
                return Err(Error::invalid("scenario", "empty explicit input set"));
            }
            let n = states.len();
            Ok((states, n))
        }
        InputSet::DesignGrid => {
            let grid = design_grid(input_dims)?;
            let n = grid.len();
            Ok((grid, n))
        }
        InputSet::DesignGridAugmented { extra, seed } => {
            let mut grid = design_grid(input_dims)?;
            let n = grid.len();
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            for _ in 0..*extra {
                let mut factors = input_dims.iter();
                let first = haar_state(Dims::single(*factors.next().unwrap())?, &mut rng);
                let state = factors.try_fold(first, |acc, &d| {
                    kron_vec(&acc, &haar_state(Dims::single(d)?, &mut rng))
                })?;
                grid.push(state);
            }
            Ok((grid, n))
        }
    }
}

fn design_grid(input_dims: &[usize]) -> Result<Vec<PureVector>> {
    let designs = input_dims
        .iter()
        .map(|&d| Design2::sic(d))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Design2> = designs.iter().collect();
    product_design(&refs)
}

/// Whether the message register carries classical or quantum information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MessageKind {
    Classical,
    Quantum,
}

/// The communication resources of a protocol: message size, the shared
/// entangled state, and the message kind.
#[derive(Debug, Clone)]
pub struct ResourceSpec {
    d_c: usize,
    shared_state: Operator,
    alice_factors: usize,
    message_kind: MessageKind,
}

impl ResourceSpec {
    /// `shared_state` lives on `A ⊗ B` with the first `alice_factors`
    /// subsystems forming the sender's share (the rest is the receiver's;
    /// an empty receiver share models no shared entanglement).
    pub fn new(
        d_c: usize,
        shared_state: Operator,
        alice_factors: usize,
        message_kind: MessageKind,
    ) -> Result<Self> {
        if d_c == 0 {
            return Err(Error::invalid("resource", "message size must be positive"));
        }
        if alice_factors > shared_state.dims().len() {
            return Err(Error::dim(format!(
                "alice_factors {alice_factors} exceeds {} subsystems",
                shared_state.dims().len()
            )));
        }
        if (shared_state.trace().re - 1.0).abs() > 1e-9 || shared_state.trace().im.abs() > 1e-9 {
            return Err(Error::invalid("resource", "shared state must have unit trace"));
        }
        if !shared_state.is_hermitian(1e-9) {
            return Err(Error::invalid("resource", "shared state must be Hermitian"));
        }
        let min = shared_state.herm_part().min_eigenvalue()?;
        if min < -1e-9 {
            return Err(Error::invalid(
                "resource",
                format!("shared state has eigenvalue {min:.3e}"),
            ));
        }
        Ok(ResourceSpec { d_c, shared_state, alice_factors, message_kind })
    }

    pub fn d_c(&self) -> usize {
        self.d_c
    }

    pub fn shared_state(&self) -> &Operator {
        &self.shared_state
    }

    pub fn message_kind(&self) -> MessageKind {
        self.message_kind
    }

    pub fn alice_factors(&self) -> usize {
        self.alice_factors
    }

    pub fn alice_dims(&self) -> Dims {
        let f = &self.shared_state.dims().factors()[..self.alice_factors];
        if f.is_empty() {
            Dims::scalar()
        } else {
            Dims::new(f.to_vec()).expect("validated at construction")
        }
    }

    pub fn bob_dims(&self) -> Dims {
        let f = &self.shared_state.dims().factors()[self.alice_factors..];
        if f.is_empty() {
            Dims::scalar()
        } else {
            Dims::new(f.to_vec()).expect("validated at construction")
        }
    }
}

/// A protocol sending a classical message: a POVM on `A'⊗A` with one
/// outcome per message value, and a decoding channel per (message, y).
#[derive(Debug, Clone)]
pub struct ClassicalProtocol {
    resource: ResourceSpec,
    encoder: Povm,
    /// decoders[c][y]
    decoders: Vec<Vec<ChoiState>>,
}

impl ClassicalProtocol {
    pub fn new(
        resource: ResourceSpec,
        encoder: Povm,
        decoders: Vec<Vec<ChoiState>>,
    ) -> Result<Self> {
        if resource.message_kind != MessageKind::Classical {
            return Err(Error::invalid("protocol", "resource is not classical"));
        }
        if encoder.len() != resource.d_c {
            return Err(Error::invalid(
                "protocol",
                format!("{} encoder outcomes for message size {}", encoder.len(), resource.d_c),
            ));
        }
        if decoders.len() != resource.d_c {
            return Err(Error::invalid(
                "protocol",
                format!("{} decoder rows for message size {}", decoders.len(), resource.d_c),
            ));
        }
        let d_a = resource.alice_dims().total();
        if encoder.dims().total() % d_a != 0 {
            return Err(Error::dim(
                "encoder space is not divisible by the sender's resource share".to_string(),
            ));
        }
        let y_count = decoders
            .first()
            .map(|row| row.len())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid("protocol", "no decoders"))?;
        let d_b = resource.bob_dims().total();
        for row in &decoders {
            if row.len() != y_count {
                return Err(Error::invalid("protocol", "ragged decoder table"));
            }
            for eta in row {
                if eta.in_dims().total() != d_b {
                    return Err(Error::dim(format!(
                        "decoder input dimension {} does not match receiver share {d_b}",
                        eta.in_dims().total()
                    )));
                }
            }
        }
        Ok(ClassicalProtocol { resource, encoder, decoders })
    }

    pub fn resource(&self) -> &ResourceSpec {
        &self.resource
    }

    pub fn encoder(&self) -> &Povm {
        &self.encoder
    }

    pub fn decoders(&self) -> &[Vec<ChoiState>] {
        &self.decoders
    }

    pub fn decoder(&self, c: usize, y: usize) -> &ChoiState {
        &self.decoders[c][y]
    }

    pub fn y_count(&self) -> usize {
        self.decoders[0].len()
    }

    /// Input dimension the encoder expects (total over the input factors).
    pub fn input_total(&self) -> usize {
        self.encoder.dims().total() / self.resource.alice_dims().total()
    }
}

/// A protocol sending a quantum message: an encoding channel
/// `A'⊗A → C` in Choi form, and a decoding channel `B⊗C → output` per y.
#[derive(Debug, Clone)]
pub struct QuantumProtocol {
    resource: ResourceSpec,
    encoder: ChoiState,
    /// decoders[y], input ordered `B ⊗ C`
    decoders: Vec<ChoiState>,
}

impl QuantumProtocol {
    pub fn new(
        resource: ResourceSpec,
        encoder: ChoiState,
        decoders: Vec<ChoiState>,
    ) -> Result<Self> {
        if resource.message_kind != MessageKind::Quantum {
            return Err(Error::invalid("protocol", "resource is not quantum"));
        }
        if encoder.out_dims().total() != resource.d_c {
            return Err(Error::dim(format!(
                "encoder output dimension {} does not match message size {}",
                encoder.out_dims().total(),
                resource.d_c
            )));
        }
        let d_a = resource.alice_dims().total();
        if encoder.in_dims().total() % d_a != 0 {
            return Err(Error::dim(
                "encoder space is not divisible by the sender's resource share".to_string(),
            ));
        }
        if decoders.is_empty() {
            return Err(Error::invalid("protocol", "no decoders"));
        }
        let d_b = resource.bob_dims().total();
        for eta in &decoders {
            if eta.in_dims().total() != d_b * resource.d_c {
                return Err(Error::dim(format!(
                    "decoder input dimension {} does not match B⊗C = {}",
                    eta.in_dims().total(),
                    d_b * resource.d_c
                )));
            }
        }
        Ok(QuantumProtocol { resource, encoder, decoders })
    }

    pub fn resource(&self) -> &ResourceSpec {
        &self.resource
    }

    pub fn encoder(&self) -> &ChoiState {
        &self.encoder
    }

    pub fn decoders(&self) -> &[ChoiState] {
        &self.decoders
    }

    pub fn y_count(&self) -> usize {
        self.decoders.len()
    }

    pub fn input_total(&self) -> usize {
        self.encoder.in_dims().total() / self.resource.alice_dims().total()
    }
}

/// Either protocol kind, for call sites that handle both uniformly.
#[derive(Debug, Clone)]
pub enum Protocol {
    Classical(ClassicalProtocol),
    Quantum(QuantumProtocol),
}

impl Protocol {
    pub fn correlations(&self, s: &ScenarioSpec) -> Result<CorrelationTable> {
        match self {
            Protocol::Classical(p) => correlations_classical(p, s),
            Protocol::Quantum(p) => correlations_quantum(p, s),
        }
    }

    pub fn resource(&self) -> &ResourceSpec {
        match self {
            Protocol::Classical(p) => p.resource(),
            Protocol::Quantum(p) => p.resource(),
        }
    }
}

/// The output states `τ_{ψ,y}` a protocol induces, indexed by
/// (catalogue position, receiver input).
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    entries: Vec<Operator>,
    k_count: usize,
    y_count: usize,
}

impl CorrelationTable {
    /// `entries` in k-major order (all y for input 0, then input 1, …).
    /// Every entry must be a state: unit trace and PSD within `tol`.
    pub fn new(entries: Vec<Operator>, k_count: usize, y_count: usize, tol: f64) -> Result<Self> {
        if entries.len() != k_count * y_count {
            return Err(Error::dim(format!(
                "{} entries for {k_count}×{y_count} table",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if (e.trace().re - 1.0).abs() > tol || e.trace().im.abs() > tol {
                return Err(Error::invalid(
                    "correlation table",
                    format!("entry {i} has trace {:.9}", e.trace().re),
                ));
            }
            let min = e.herm_part().min_eigenvalue()?;
            if min < -tol {
                return Err(Error::invalid(
                    "correlation table",
                    format!("entry {i} has eigenvalue {min:.3e}"),
                ));
            }
        }
        Ok(CorrelationTable { entries, k_count, y_count })
    }

    pub fn entry(&self, k: usize, y: usize) -> &Operator {
        &self.entries[k * self.y_count + y]
    }

    pub fn k_count(&self) -> usize {
        self.k_count
    }

    pub fn y_count(&self) -> usize {
        self.y_count
    }
}

/// `σ[b,b'] = Σ_{a,a'} M̃[a',a] · ρ[(a,b),(a',b')]` — the receiver's
/// sub-normalized state given an effective sender operator on `A`, without
/// forming any operator on the full `A'⊗A⊗B` space.
pub(crate) fn contract_classical(
    m_tilde: &Operator,
    rho: &Operator,
    d_a: usize,
    out_dims: Dims,
) -> Operator {
    let d_b = out_dims.total();
    let mut m = DMatrix::<C64>::zeros(d_b, d_b);
    for b in 0..d_b {
        for bp in 0..d_b {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..d_a {
                for ap in 0..d_a {
                    acc += m_tilde.get(ap, a) * rho.get(a * d_b + b, ap * d_b + bp);
                }
            }
            m[(b, bp)] = acc;
        }
    }
    Operator::new(out_dims, m).expect("dimensions fixed by construction")
}

/// `σ[(c,b),(c',b')] = scale · Σ_{a,a'} μ̃[(c,a'),(c',a)] · ρ[(a',b),(a,b')]`
/// on `[C, B…]` — the joint message/receiver state for a quantum message.
pub(crate) fn contract_quantum(
    mu_tilde: &Operator,
    rho: &Operator,
    d_a: usize,
    d_c: usize,
    bob: &Dims,
    scale: f64,
) -> Result<Operator> {
    let d_b = bob.total();
    let out_dims = Dims::single(d_c)?.join(bob)?;
    let n = d_c * d_b;
    let mut m = DMatrix::<C64>::zeros(n, n);
    for cm in 0..d_c {
        for cp in 0..d_c {
            for b in 0..d_b {
                for bp in 0..d_b {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..d_a {
                        for ap in 0..d_a {
                            acc += mu_tilde.get(cm * d_a + ap, cp * d_a + a)
                                * rho.get(ap * d_b + b, a * d_b + bp);
                        }
                    }
                    m[(cm * d_b + b, cp * d_b + bp)] = acc * scale;
                }
            }
        }
    }
    Operator::new(out_dims, m)
}

/// Compatibility checks shared by both correlation functions.
fn check_compat(
    s: &ScenarioSpec,
    input_total: usize,
    y_count: usize,
    decoder_out: usize,
) -> Result<()> {
    if input_total != s.input_total() {
        return Err(Error::dim(format!(
            "protocol expects input dimension {input_total}, scenario provides {}",
            s.input_total()
        )));
    }
    if y_count != s.y_count() {
        return Err(Error::dim(format!(
            "protocol has {y_count} decoder settings, scenario has {}",
            s.y_count()
        )));
    }
    if decoder_out != s.output_dim() {
        return Err(Error::dim(format!(
            "decoders output dimension {decoder_out}, scenario expects {}",
            s.output_dim()
        )));
    }
    Ok(())
}

/// Run a classical-message protocol over the scenario's catalogue:
/// `τ_{ψ,y} = Σ_c Λ_{c,y}(σ_{c|ψ})` with
/// `σ_{c|ψ} = tr_{A'A}[(ψ⊗ρ)(M^c⊗1_B)]`.
pub fn correlations_classical(
    p: &ClassicalProtocol,
    s: &ScenarioSpec,
) -> Result<CorrelationTable> {
    check_compat(
        s,
        p.input_total(),
        p.y_count(),
        p.decoders[0][0].out_dims().total(),
    )?;
    let rho = p.resource.shared_state();
    let d_a = p.resource.alice_dims().total();
    let bob = p.resource.bob_dims();
    let eye_a = Operator::identity(p.resource.alice_dims());
    let alice_indices: Vec<usize> = {
        let n_in = s.input_dims().len();
        (n_in..n_in + p.resource.alice_factors()).collect()
    };
    let mut entries = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for psi in s.catalogue() {
        // effective encoder operators on A for this input
        let lifted_psi = kron(&psi.projector(), &eye_a)?;
        let mut sigmas = Vec::with_capacity(p.encoder.len());
        let mut total = 0.0;
        for effect in p.encoder.elements() {
            let m_tilde = partial_trace(&lifted_psi.mul(effect), &alice_indices)?;
            let sigma = contract_classical(&m_tilde, rho, d_a, bob.clone());
            total += sigma.trace().re;
            sigmas.push(sigma);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "protocol",
                format!("message probabilities sum to {total:.12}"),
            ));
        }
        for y in 0..s.y_count() {
            let mut tau = Operator::zeros(p.decoders[0][y].out_dims());
            for (c, sigma) in sigmas.iter().enumerate() {
                tau = tau.add(&p.decoders[c][y].apply(sigma)?);
            }
            entries.push(tau);
        }
    }
    CorrelationTable::new(entries, s.catalogue().len(), s.y_count(), 1e-8)
}

/// Run a quantum-message protocol over the scenario's catalogue:
/// `τ_{ψ,y} = Λ_y(σ_ψ)` with
/// `σ_ψ = d_{A'A}·tr_{A'A}[(1_C ⊗ (ψ⊗ρ)^{T_{A'A}})(μ ⊗ 1_B)]` reordered
/// from `[C,B]` to the decoder's `[B,C]` input.
pub fn correlations_quantum(p: &QuantumProtocol, s: &ScenarioSpec) -> Result<CorrelationTable> {
    check_compat(
        s,
        p.input_total(),
        p.y_count(),
        p.decoders[0].out_dims().total(),
    )?;
    let rho = p.resource.shared_state();
    let d_a = p.resource.alice_dims().total();
    let d_c = p.resource.d_c();
    let bob = p.resource.bob_dims();
    let d_in_enc = p.encoder.in_dims().total();
    let n_in = s.input_dims().len();
    // μ̃_ψ = tr_{A'}[(1_C ⊗ ψᵀ ⊗ 1_A) μ] on [C, A]; the transpose comes from
    // the Choi action of the encoding channel
    let eye_c = Operator::identity(Dims::single(d_c)?);
    let eye_a = Operator::identity(p.resource.alice_dims());
    let keep_in_mu: Vec<usize> = std::iter::once(0)
        .chain(1 + n_in..1 + n_in + p.resource.alice_factors())
        .collect();
    let mut entries = Vec::with_capacity(s.catalogue().len() * s.y_count());
    for psi in s.catalogue() {
        let lift = kron(&kron(&eye_c, &psi.projector().transpose())?, &eye_a)?;
        let mu_tilde = partial_trace(&lift.mul(p.encoder.operator()), &keep_in_mu)?;
        let sigma_cb = contract_quantum(&mu_tilde, rho, d_a, d_c, &bob, d_in_enc as f64)?;
        if (sigma_cb.trace().re - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "protocol",
                format!("message state has trace {:.12}", sigma_cb.trace().re),
            ));
        }
        // reorder [C, B…] → [B…, C]
        let n_b = bob.len();
        let perm: Vec<usize> = (1..=n_b).chain(std::iter::once(0)).collect();
        let sigma_bc = permute_subsystems(&sigma_cb, &perm)?;
        for eta in &p.decoders {
            entries.push(eta.apply(&sigma_bc)?);
        }
    }
    CorrelationTable::new(entries, s.catalogue().len(), s.y_count(), 1e-8)
}

/// Fidelities `F(τ_{ψ_k,y}, Θ_y(ψ_k))` for every catalogue entry, k-major.
pub fn fidelity_table(t: &CorrelationTable, s: &ScenarioSpec) -> Result<Vec<Vec<f64>>> {
    if t.k_count() != s.catalogue().len() || t.y_count() != s.y_count() {
        return Err(Error::dim("table shape does not match scenario".to_string()));
    }
    let mut rows = Vec::with_capacity(t.k_count());
    for k in 0..t.k_count() {
        let mut row = Vec::with_capacity(t.y_count());
        for y in 0..t.y_count() {
            let target = s.target_state(k, y)?;
            row.push(fidelity(t.entry(k, y), &target)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Average fidelity over receiver inputs and the averaging part of the
/// catalogue (the design grid when one was requested, so the value is an
/// exact Haar average for degree-2 protocols).
pub fn avg_fidelity(t: &CorrelationTable, s: &ScenarioSpec) -> Result<f64> {
    let f = fidelity_table(t, s)?;
    let k = s.avg_count();
    let total: f64 = f.iter().take(k).map(|row| row.iter().sum::<f64>()).sum();
    Ok(total / (k * s.y_count()) as f64)
}

/// Minimum fidelity over the whole catalogue (including spot-check inputs)
/// and all receiver inputs. A discrete lower-bound scan, not a continuous
/// certificate.
pub fn worst_fidelity(t: &CorrelationTable, s: &ScenarioSpec) -> Result<f64> {
    let f = fidelity_table(t, s)?;
    Ok(f.iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

/// Max − min fidelity over the whole catalogue: zero for protocols whose
/// performance is independent of the inputs.
pub fn indep_spread(t: &CorrelationTable, s: &ScenarioSpec) -> Result<f64> {
    let f = fidelity_table(t, s)?;
    let max = f.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = f.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// Whether the table is flagged universal: negligible spread on a
/// catalogue strong enough to witness it (design grid + ≥100 random
/// spot checks; degree-2 exactness alone cannot certify pointwise
/// constancy).
pub fn is_universal(t: &CorrelationTable, s: &ScenarioSpec) -> Result<bool> {
    Ok(s.certifies_universality() && indep_spread(t, s)? < 1e-6)
}

/// The Choi state of the partial-trace map keeping factor `keep` of the
/// listed input factors — the natural target for protocols that must
/// deliver one of several input states on demand.
pub fn partial_trace_target(input_dims: &[usize], keep: usize) -> Result<ChoiState> {
    if keep >= input_dims.len() {
        return Err(Error::InvalidSubsystem(format!(
            "keep index {keep} out of range for {} factors",
            input_dims.len()
        )));
    }
    let in_dims = Dims::new(input_dims.to_vec())?;
    let out_dims = Dims::single(input_dims[keep])?;
    let traced: Vec<usize> = (0..input_dims.len()).filter(|&i| i != keep).collect();
    let keep_offsets = in_dims.sub_offsets(&[keep]);
    let traced_offsets = in_dims.sub_offsets(&traced);
    let d_out = out_dims.total();
    let d_in = in_dims.total();
    let mut kraus = Vec::with_capacity(traced_offsets.len());
    for &ot in &traced_offsets {
        let mut m = DMatrix::<C64>::zeros(d_out, d_in);
        for (o, &ok) in keep_offsets.iter().enumerate() {
            m[(o, ok + ot)] = C64::new(1.0, 0.0);
        }
        kraus.push(KrausOp::new(out_dims.clone(), in_dims.clone(), m)?);
    }
    choi_from_kraus(&kraus)
}

/// The Choi state of the identity map on the listed factors.
pub fn identity_target(input_dims: &[usize]) -> Result<ChoiState> {
    let dims = Dims::new(input_dims.to_vec())?;
    let n = dims.total();
    let eye = KrausOp::new(dims.clone(), dims, DMatrix::<C64>::identity(n, n))?;
    choi_from_kraus(&[eye])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{max_entangled, random_density};
    use crate::tol;

    fn depolarizing_choi(d_in: usize, d_out: usize) -> ChoiState {
        let dims = Dims::new(vec![d_out, d_in]).unwrap();
        let n = dims.total();
        let op = Operator::identity(dims).scale_re(1.0 / n as f64);
        ChoiState::new(op, 1).unwrap()
    }

    /// Coin-flip encoder ⊗ depolarizing decoders: τ = I/d_out always.
    #[test]
    fn trivial_protocol_fully_depolarizes() {
        let d = 2;
        let phi = max_entangled(d).unwrap().projector();
        let resource = ResourceSpec::new(2, phi, 1, MessageKind::Classical).unwrap();
        // encoder: {I/2, I/2} on A'⊗A — a uniformly random message
        let enc_dims = Dims::new(vec![d, d]).unwrap();
        let half = Operator::identity(enc_dims).scale_re(0.5);
        let encoder = Povm::new(vec![half.clone(), half]).unwrap();
        let decoders = vec![
            vec![depolarizing_choi(d, d)],
            vec![depolarizing_choi(d, d)],
        ];
        let p = ClassicalProtocol::new(resource, encoder, decoders).unwrap();
        let s = ScenarioSpec::new(
            vec![d],
            InputSet::DesignGridAugmented { extra: 10, seed: 7 },
            1,
            d,
            vec![identity_target(&[d]).unwrap()],
        )
        .unwrap();
        let t = correlations_classical(&p, &s).unwrap();
        let mixed = Operator::identity(Dims::single(d).unwrap()).scale_re(0.5);
        for k in 0..t.k_count() {
            assert!(t.entry(k, 0).max_abs_diff(&mixed) < 1e-12);
        }
        // fully depolarized table with qubit targets: every fidelity 1/2
        assert!((avg_fidelity(&t, &s).unwrap() - 0.5).abs() < 1e-10);
        assert!((worst_fidelity(&t, &s).unwrap() - 0.5).abs() < 1e-10);
        assert!(indep_spread(&t, &s).unwrap() < 1e-10);
        assert!(!is_universal(&t, &s).unwrap()); // only 10 spot checks
    }

    /// Identity-channel encoder with d_C = d_{A'}·d_A: the message carries
    /// everything, and a discard-B, trace-out-A decoder reproduces exact
    /// teleportation.
    #[test]
    fn quantum_identity_message_teleports() {
        let d = 2;
        let phi = max_entangled(d).unwrap().projector();
        let resource = ResourceSpec::new(4, phi, 1, MessageKind::Quantum).unwrap();
        let enc_dims = Dims::new(vec![d, d]).unwrap();
        let eye = KrausOp::new(
            enc_dims.clone(),
            enc_dims.clone(),
            DMatrix::<C64>::identity(4, 4),
        )
        .unwrap();
        let encoder = choi_from_kraus(&[eye]).unwrap();
        // decoder on [B, C=(A', A)] → A' content: discard B, trace A
        let in_dims = Dims::new(vec![d, d, d]).unwrap();
        let out_dims = Dims::single(d).unwrap();
        let mut kraus = Vec::new();
        for b in 0..d {
            for a in 0..d {
                let mut m = DMatrix::<C64>::zeros(d, d * d * d);
                for o in 0..d {
                    m[(o, b * d * d + o * d + a)] = C64::new(1.0, 0.0);
                }
                kraus.push(KrausOp::new(out_dims.clone(), in_dims.clone(), m).unwrap());
            }
        }
        let decoder = choi_from_kraus(&kraus).unwrap();
        let p = QuantumProtocol::new(resource, encoder, vec![decoder]).unwrap();
        let s = ScenarioSpec::new(
            vec![d],
            InputSet::DesignGridAugmented { extra: 20, seed: 3 },
            1,
            d,
            vec![identity_target(&[d]).unwrap()],
        )
        .unwrap();
        let t = correlations_quantum(&p, &s).unwrap();
        for (k, psi) in s.catalogue().iter().enumerate() {
            assert!(t.entry(k, 0).max_abs_diff(&psi.projector()) < 1e-10);
        }
        assert!((avg_fidelity(&t, &s).unwrap() - 1.0).abs() < 1e-10);
        assert!((worst_fidelity(&t, &s).unwrap() - 1.0).abs() < 1e-10);
    }

    /// Depolarizing the message makes the table input-independent.
    #[test]
    fn quantum_depolarizing_encoder_is_input_independent() {
        let d = 2;
        let phi = max_entangled(d).unwrap().projector();
        let resource = ResourceSpec::new(2, phi, 1, MessageKind::Quantum).unwrap();
        // encoder Choi = I/(d_C · d_{A'}d_A) on [C, A', A]
        let dims = Dims::new(vec![2, 2, 2]).unwrap();
        let encoder =
            ChoiState::new(Operator::identity(dims).scale_re(1.0 / 8.0), 1).unwrap();
        // decoder: discard B, output the message qubit
        let in_dims = Dims::new(vec![d, d]).unwrap();
        let out_dims = Dims::single(d).unwrap();
        let mut kraus = Vec::new();
        for b in 0..d {
            let mut m = DMatrix::<C64>::zeros(d, d * d);
            for o in 0..d {
                m[(o, b * d + o)] = C64::new(1.0, 0.0);
            }
            kraus.push(KrausOp::new(out_dims.clone(), in_dims.clone(), m).unwrap());
        }
        let decoder = choi_from_kraus(&kraus).unwrap();
        let p = QuantumProtocol::new(resource, encoder, vec![decoder]).unwrap();
        let s = ScenarioSpec::new(
            vec![d],
            InputSet::DesignGridAugmented { extra: 100, seed: 11 },
            1,
            d,
            vec![identity_target(&[d]).unwrap()],
        )
        .unwrap();
        let t = correlations_quantum(&p, &s).unwrap();
        let first = t.entry(0, 0).clone();
        for k in 1..t.k_count() {
            assert!(t.entry(k, 0).max_abs_diff(&first) < 1e-12);
        }
        assert!(is_universal(&t, &s).unwrap());
    }

    #[test]
    fn partial_trace_target_keeps_the_right_factor() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let dims = [2usize, 3];
        for keep in 0..2 {
            let target = partial_trace_target(&dims, keep).unwrap();
            let a = random_density(Dims::single(2).unwrap(), 2, &mut rng).unwrap();
            let b = random_density(Dims::single(3).unwrap(), 3, &mut rng).unwrap();
            let joint = kron(&a, &b).unwrap();
            let out = target.apply(&joint).unwrap();
            let expect = if keep == 0 { &a } else { &b };
            assert!(out.max_abs_diff(expect) < 1e-10);
        }
    }

    #[test]
    fn catalogue_materialization_counts() {
        let s = ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGrid,
            2,
            2,
            vec![
                partial_trace_target(&[2, 2], 0).unwrap(),
                partial_trace_target(&[2, 2], 1).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(s.catalogue().len(), 16);
        assert_eq!(s.avg_count(), 16);
        assert!(!s.certifies_universality());

        let s = ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGridAugmented { extra: 100, seed: 5 },
            2,
            2,
            vec![
                partial_trace_target(&[2, 2], 0).unwrap(),
                partial_trace_target(&[2, 2], 1).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(s.catalogue().len(), 116);
        assert_eq!(s.avg_count(), 16);
        assert!(s.certifies_universality());

        // same seed → same catalogue
        let s2 = ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGridAugmented { extra: 100, seed: 5 },
            2,
            2,
            vec![
                partial_trace_target(&[2, 2], 0).unwrap(),
                partial_trace_target(&[2, 2], 1).unwrap(),
            ],
        )
        .unwrap();
        for (a, b) in s.catalogue().iter().zip(s2.catalogue()) {
            assert!((a.inner(b).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn scenario_rejects_mismatched_targets() {
        // wrong input dimension
        assert!(ScenarioSpec::new(
            vec![2, 2],
            InputSet::DesignGrid,
            1,
            2,
            vec![identity_target(&[2]).unwrap()],
        )
        .is_err());
        // wrong count
        assert!(ScenarioSpec::new(
            vec![2],
            InputSet::DesignGrid,
            2,
            2,
            vec![identity_target(&[2]).unwrap()],
        )
        .is_err());
    }

    #[test]
    fn resource_rejects_non_states() {
        let d = 2;
        let bad = Operator::identity(Dims::new(vec![d, d]).unwrap()); // trace 4
        assert!(ResourceSpec::new(2, bad, 1, MessageKind::Classical).is_err());
        let w = crate::quantum::WeylOps::new(2).unwrap();
        let herm_not_psd = kron(w.z(), w.z()).unwrap().scale_re(0.25); // trace …
        // trace is 4·(1/4)·(tr Z)² = 0, not 1 — and not PSD either
        assert!(ResourceSpec::new(2, herm_not_psd, 1, MessageKind::Classical).is_err());
    }

    #[test]
    fn metric_ordering_holds() {
        // an intentionally lopsided protocol: one fixed output state
        let d = 2;
        let phi = max_entangled(d).unwrap().projector();
        let resource = ResourceSpec::new(1, phi, 1, MessageKind::Classical).unwrap();
        let enc_dims = Dims::new(vec![d, d]).unwrap();
        let encoder = Povm::new(vec![Operator::identity(enc_dims)]).unwrap();
        // decoder replaces B with |0⟩: Kraus K_b = |0⟩⟨b|
        let out = Dims::single(d).unwrap();
        let mut kraus = Vec::new();
        for b in 0..d {
            let mut m = DMatrix::<C64>::zeros(d, d);
            m[(0, b)] = C64::new(1.0, 0.0);
            kraus.push(KrausOp::new(out.clone(), out.clone(), m).unwrap());
        }
        let decoder = choi_from_kraus(&kraus).unwrap();
        let p = ClassicalProtocol::new(resource, encoder, vec![vec![decoder]]).unwrap();
        let s = ScenarioSpec::new(
            vec![d],
            InputSet::DesignGridAugmented { extra: 25, seed: 1 },
            1,
            d,
            vec![identity_target(&[d]).unwrap()],
        )
        .unwrap();
        let t = correlations_classical(&p, &s).unwrap();
        let avg = avg_fidelity(&t, &s).unwrap();
        let worst = worst_fidelity(&t, &s).unwrap();
        let spread = indep_spread(&t, &s).unwrap();
        assert!(worst <= avg + tol::CONSTRUCTION);
        assert!(avg <= 1.0 + tol::CONSTRUCTION);
        assert!(spread > 1e-3, "constant-output protocol must have spread");
        // design average of ⟨0|ψ|0⟩ is exactly 1/2
        assert!((avg - 0.5).abs() < 1e-10);
    }
}
