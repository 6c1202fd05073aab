//! Quantum primitives: states, fidelity, Weyl operators, Bell bases, POVMs,
//! channels in Choi and Kraus form, and spherical 2-designs.
//!
//! Conventions (see the crate root): Choi operators live on `out ⊗ in` with
//! unit trace and `tr_out = I/d_in`; maximally entangled states are
//! normalized; Weyl operators satisfy `ZX = ωXZ` with `ω = exp(2πi/d)`.

use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eig, kron, kron_vec, partial_trace, rebuild_from_eig, Dims, Operator, PureVector,
    C64,
};
use crate::tol;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

// ---------------------------------------------------------------------------
// States and fidelity
// ---------------------------------------------------------------------------

/// Whether `op` is a density operator: Hermitian, PSD, unit trace.
pub fn is_density(op: &Operator, tol: f64) -> bool {
    op.is_hermitian(tol::HERMITICITY.max(tol))
        && (op.trace().re - 1.0).abs() <= tol
        && op.trace().im.abs() <= tol
        && op.min_eigenvalue().map(|l| l >= -tol).unwrap_or(false)
}

/// tr(ρ²)/tr(ρ)² — equals 1 exactly when a PSD operator has rank one.
pub fn normalized_purity(op: &Operator) -> f64 {
    let t = op.trace().re;
    if t.abs() < 1e-300 {
        return 0.0;
    }
    op.trace_product(op).re / (t * t)
}

/// Uhlmann fidelity `F(σ, ρ) = (tr √(√ρ σ √ρ))²` between density operators.
///
/// When either argument is rank one (detected via its purity), the identity
/// `F(σ, |ψ⟩⟨ψ|) = ⟨ψ|σ|ψ⟩` is used instead of the general matrix-root
/// route, which is both faster and numerically exact at rank one.
pub fn fidelity(sigma: &Operator, rho: &Operator) -> Result<f64> {
    if sigma.dim() != rho.dim() {
        return Err(Error::dim(format!(
            "fidelity between dimensions {} and {}",
            sigma.dim(),
            rho.dim()
        )));
    }
    for (name, op) in [("first", sigma), ("second", rho)] {
        if !op.is_hermitian(tol::HERMITICITY) {
            return Err(Error::invalid(
                "density operator",
                format!("{name} argument is not Hermitian"),
            ));
        }
        // loose unit-trace check: callers hand in solver output that is
        // feasible only to its convergence tolerance
        if (op.trace().re - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(
                "density operator",
                format!("{name} argument has trace {:.9}", op.trace().re),
            ));
        }
    }
    // rank-one shortcut on whichever argument qualifies
    if normalized_purity(rho) >= 1.0 - tol::RANK_ONE {
        return Ok(fidelity_rank_one(sigma, rho)?);
    }
    if normalized_purity(sigma) >= 1.0 - tol::RANK_ONE {
        return Ok(fidelity_rank_one(rho, sigma)?);
    }
    // tr √(√ρ σ √ρ) = Σ singular values of √σ·√ρ — the singular-value form
    // avoids squaring the condition number in the triple product
    let root_rho = rho.sqrt_psd(tol::ALGEBRAIC)?;
    let root_sigma = sigma.sqrt_psd(tol::ALGEBRAIC)?;
    let product = root_sigma.matrix() * root_rho.matrix();
    let sum: f64 = product.singular_values().iter().sum();
    Ok(sum * sum)
}

/// F(σ, |ψ⟩⟨ψ|) for a rank-one `pure` given as an operator.
fn fidelity_rank_one(sigma: &Operator, pure: &Operator) -> Result<f64> {
    let (vals, vecs) = hermitian_eig(pure)?;
    let top = vals.len() - 1;
    // normalize away the (unit) trace so mild numerical drift cancels
    let scale = vals[top].max(0.0) / pure.trace().re.max(1e-300);
    let n = vecs.dim();
    let psi = PureVector::normalized(
        pure.dims().clone(),
        (0..n).map(|i| vecs.get(i, top)).collect(),
    )?;
    Ok(sigma.expectation(&psi) * scale)
}

/// F(σ, |ψ⟩⟨ψ|) = ⟨ψ|σ|ψ⟩ directly against a pure state.
pub fn fidelity_to_pure(sigma: &Operator, psi: &PureVector) -> f64 {
    sigma.expectation(psi)
}

/// Normalized maximally entangled state `(1/√d) Σ_j |jj⟩` on `[d, d]`.
pub fn max_entangled(d: usize) -> Result<PureVector> {
    let dims = Dims::new(vec![d, d])?;
    let amp = 1.0 / (d as f64).sqrt();
    let mut data = vec![c(0.0, 0.0); d * d];
    for j in 0..d {
        data[j * d + j] = c(amp, 0.0);
    }
    PureVector::new(dims, data)
}

/// The swap operator on `[d, d]`: `SWAP|i,j⟩ = |j,i⟩`.
pub fn swap_operator(d: usize) -> Result<Operator> {
    let dims = Dims::new(vec![d, d])?;
    let mut op = Operator::zeros(dims);
    for i in 0..d {
        for j in 0..d {
            op.set(j * d + i, i * d + j, c(1.0, 0.0));
        }
    }
    Ok(op)
}

// ---------------------------------------------------------------------------
// Weyl (generalized Pauli) operators
// ---------------------------------------------------------------------------

/// The d² Weyl operators `XᵘZᵛ` on a single d-dimensional system.
///
/// `X|j⟩ = |j+1 mod d⟩` and `Z|j⟩ = ω^j|j⟩` with `ω = exp(2πi/d)`, so that
/// `ZX = ωXZ`. A pair label `(u, v)` flattens to `u·d + v`.
#[derive(Debug, Clone)]
pub struct WeylOps {
    d: usize,
    ops: Vec<Operator>,
}

impl WeylOps {
    pub fn new(d: usize) -> Result<Self> {
        let dims = Dims::single(d)?;
        let mut x = Operator::zeros(dims.clone());
        let mut z = Operator::zeros(dims.clone());
        for j in 0..d {
            x.set((j + 1) % d, j, c(1.0, 0.0));
            let phase = 2.0 * PI * j as f64 / d as f64;
            z.set(j, j, c(phase.cos(), phase.sin()));
        }
        // powers of X and Z, then all products XᵘZᵛ
        let mut x_pow = vec![Operator::identity(dims.clone())];
        let mut z_pow = vec![Operator::identity(dims)];
        for k in 1..d {
            x_pow.push(x_pow[k - 1].mul(&x));
            z_pow.push(z_pow[k - 1].mul(&z));
        }
        let mut ops = Vec::with_capacity(d * d);
        for u in 0..d {
            for v in 0..d {
                ops.push(x_pow[u].mul(&z_pow[v]));
            }
        }
        Ok(WeylOps { d, ops })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `XᵘZᵛ` (exponents taken mod d).
    pub fn op(&self, u: usize, v: usize) -> &Operator {
        &self.ops[(u % self.d) * self.d + (v % self.d)]
    }

    pub fn x(&self) -> &Operator {
        self.op(1, 0)
    }

    pub fn z(&self) -> &Operator {
        self.op(0, 1)
    }

    /// Flat label of the pair `(u, v)`.
    pub fn flat(&self, u: usize, v: usize) -> usize {
        (u % self.d) * self.d + (v % self.d)
    }

    /// Pair `(u, v)` of a flat label.
    pub fn unflat(&self, label: usize) -> (usize, usize) {
        (label / self.d % self.d, label % self.d)
    }

    /// All d² operators in flat-label order.
    pub fn all(&self) -> &[Operator] {
        &self.ops
    }

    /// The twirl `(1/d²) Σ_{u,v} W ρ W†`, which sends every operator to
    /// `tr(ρ)·I/d`.
    pub fn twirl(&self, rho: &Operator) -> Operator {
        let mut acc = Operator::zeros(rho.dims().clone());
        for w in &self.ops {
            acc = acc.add(&w.mul(rho).mul(&w.adjoint()));
        }
        acc.scale_re(1.0 / (self.d * self.d) as f64)
    }
}

/// `XᵘZᵛ` with strict exponent bounds `0 ≤ u, v < d`.
pub fn weyl(d: usize, u: usize, v: usize) -> Result<Operator> {
    if u >= d || v >= d {
        return Err(Error::invalid(
            "Weyl exponents",
            format!("(u, v) = ({u}, {v}) out of range for d = {d}"),
        ));
    }
    Ok(WeylOps::new(d)?.op(u, v).clone())
}

/// The twirl `(1/d²) Σ_{u,v} XᵘZᵛ ρ (XᵘZᵛ)†` over the full Weyl group of
/// `ρ`'s total dimension; maps every operator to `tr(ρ)·I/d`.
pub fn weyl_twirl(rho: &Operator) -> Result<Operator> {
    Ok(WeylOps::new(rho.dim())?.twirl(rho))
}

/// The generalized Bell basis `|Φ_{u,v}⟩ = (XᵘZᵛ ⊗ 1)|φ⁺⟩` on `[d, d]`,
/// in flat-label order `u·d + v`.
pub fn bell_basis(d: usize) -> Result<Vec<PureVector>> {
    let weyl = WeylOps::new(d)?;
    let phi = max_entangled(d)?;
    let eye = Operator::identity(Dims::single(d)?);
    let mut basis = Vec::with_capacity(d * d);
    for w in weyl.all() {
        basis.push(phi.apply(&kron(w, &eye)?));
    }
    Ok(basis)
}

/// The projective measurement onto the generalized Bell basis.
pub fn bell_povm(d: usize) -> Result<Povm> {
    let basis = bell_basis(d)?;
    Povm::new(basis.iter().map(|b| b.projector()).collect())
}

// ---------------------------------------------------------------------------
// POVMs
// ---------------------------------------------------------------------------

/// A positive operator-valued measure: Hermitian PSD elements summing to
/// the identity (all within [`tol::ALGEBRAIC`]).
#[derive(Debug, Clone)]
pub struct Povm {
    elements: Vec<Operator>,
}

impl Povm {
    pub fn new(elements: Vec<Operator>) -> Result<Self> {
        Self::with_tolerance(elements, tol::ALGEBRAIC)
    }

    /// Validate with an explicit tolerance (solver output is only feasible
    /// to its convergence tolerance).
    pub fn with_tolerance(elements: Vec<Operator>, tol: f64) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::invalid("POVM", "no elements"))?;
        let dims = first.dims().clone();
        let mut sum = Operator::zeros(dims.clone());
        for (k, e) in elements.iter().enumerate() {
            if e.dims() != &dims {
                return Err(Error::dim(format!("POVM element {k} has mismatched dimensions")));
            }
            if !e.is_hermitian(tol) {
                return Err(Error::invalid("POVM", format!("element {k} is not Hermitian")));
            }
            let min = e.herm_part().min_eigenvalue()?;
            if min < -tol {
                return Err(Error::invalid(
                    "POVM",
                    format!("element {k} has eigenvalue {min:.3e}"),
                ));
            }
            sum = sum.add(e);
        }
        let dev = sum.max_abs_diff(&Operator::identity(dims));
        if dev > tol {
            return Err(Error::invalid(
                "POVM",
                format!("elements sum to identity only within {dev:.3e}"),
            ));
        }
        Ok(Povm { elements })
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dims(&self) -> &Dims {
        self.elements[0].dims()
    }

    /// Outcome probabilities on a state (clamped against small negatives).
    pub fn probabilities(&self, rho: &Operator) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| e.trace_product(rho).re.max(0.0))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Channels: Kraus and Choi forms
// ---------------------------------------------------------------------------

/// A (generally rectangular) Kraus operator mapping `in` to `out`.
#[derive(Debug, Clone)]
pub struct KrausOp {
    out_dims: Dims,
    in_dims: Dims,
    m: DMatrix<C64>,
}

impl KrausOp {
    pub fn new(out_dims: Dims, in_dims: Dims, m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != out_dims.total() || m.ncols() != in_dims.total() {
            return Err(Error::dim(format!(
                "Kraus operator is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                out_dims.total(),
                in_dims.total()
            )));
        }
        Ok(KrausOp { out_dims, in_dims, m })
    }

    /// A square operator viewed as a Kraus operator.
    pub fn from_operator(op: &Operator) -> Self {
        KrausOp {
            out_dims: op.dims().clone(),
            in_dims: op.dims().clone(),
            m: op.matrix().clone(),
        }
    }

    pub fn out_dims(&self) -> &Dims {
        &self.out_dims
    }

    pub fn in_dims(&self) -> &Dims {
        &self.in_dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    /// `K X K†`.
    pub fn conjugate(&self, x: &Operator) -> Operator {
        debug_assert_eq!(x.dim(), self.in_dims.total());
        let m = &self.m * x.matrix() * self.m.adjoint();
        Operator::new(self.out_dims.clone(), m).expect("shape checked at construction")
    }

    /// `K |ψ⟩` (not normalized).
    pub fn apply_vec(&self, psi: &PureVector) -> DVector<C64> {
        &self.m * psi.vector()
    }
}

/// Σ K†K over a Kraus family.
pub fn kraus_completeness(kraus: &[KrausOp]) -> Result<Operator> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::invalid("Kraus family", "no operators"))?;
    let n = first.in_dims.total();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    for k in kraus {
        acc += k.m.adjoint() * &k.m;
    }
    Operator::new(first.in_dims.clone(), acc)
}

/// A channel in Choi form: a state on `out ⊗ in` with unit trace and
/// `tr_out = I/d_in`. The channel acts as `Λ(X) = d_in·tr_in[(1 ⊗ Xᵀ) η]`.
#[derive(Debug, Clone)]
pub struct ChoiState {
    op: Operator,
    n_out: usize,
}

impl ChoiState {
    /// Validate and wrap. `op` must carry the joined `out ⊗ in` dimension
    /// list, with `n_out` leading factors forming the output.
    pub fn new(op: Operator, n_out: usize) -> Result<Self> {
        Self::with_tolerance(op, n_out, tol::ALGEBRAIC)
    }

    pub fn with_tolerance(op: Operator, n_out: usize, tol: f64) -> Result<Self> {
        if n_out > op.dims().len() {
            return Err(Error::dim(format!(
                "n_out {n_out} exceeds {} subsystems",
                op.dims().len()
            )));
        }
        if !op.is_hermitian(tol) {
            return Err(Error::invalid("Choi state", "not Hermitian"));
        }
        let min = op.herm_part().min_eigenvalue()?;
        if min < -tol {
            return Err(Error::invalid(
                "Choi state",
                format!("eigenvalue {min:.3e} below zero"),
            ));
        }
        let state = ChoiState { op, n_out };
        let d_in = state.in_dims().total();
        let marginal = state.trace_out_output()?;
        let target = Operator::identity(marginal.dims().clone()).scale_re(1.0 / d_in as f64);
        let dev = marginal.max_abs_diff(&target);
        if dev > tol {
            return Err(Error::invalid(
                "Choi state",
                format!("output marginal deviates from I/d_in by {dev:.3e}"),
            ));
        }
        Ok(state)
    }

    /// The Choi state of the identity channel on dimension `d` (the
    /// maximally entangled projector).
    pub fn identity(d: usize) -> Result<Self> {
        ChoiState::new(max_entangled(d)?.projector(), 1)
    }

    /// Choi state of conjugation by a unitary.
    pub fn from_unitary(u: &Operator) -> Result<Self> {
        choi_from_kraus(&[KrausOp::from_operator(u)])
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn out_dims(&self) -> Dims {
        let f = &self.op.dims().factors()[..self.n_out];
        if f.is_empty() {
            Dims::scalar()
        } else {
            Dims::new(f.to_vec()).expect("validated at construction")
        }
    }

    pub fn in_dims(&self) -> Dims {
        let f = &self.op.dims().factors()[self.n_out..];
        if f.is_empty() {
            Dims::scalar()
        } else {
            Dims::new(f.to_vec()).expect("validated at construction")
        }
    }

    fn trace_out_output(&self) -> Result<Operator> {
        let keep: Vec<usize> = (self.n_out..self.op.dims().len()).collect();
        partial_trace(&self.op, &keep)
    }

    /// Apply the represented channel: `Λ(X) = d_in·tr_in[(1 ⊗ Xᵀ) η]`.
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        let in_dims = self.in_dims();
        if x.dim() != in_dims.total() {
            return Err(Error::dim(format!(
                "channel input has dimension {}, operator has {}",
                in_dims.total(),
                x.dim()
            )));
        }
        let eye_out = Operator::identity(self.out_dims());
        let lifted = kron(&eye_out, &x.transpose())?;
        let keep: Vec<usize> = (0..self.n_out).collect();
        let reduced = partial_trace(&lifted.mul(&self.op), &keep)?;
        Ok(reduced.scale_re(in_dims.total() as f64))
    }

    /// Choi state of `X ↦ Λ(U X U†)`: `(1 ⊗ Uᵀ) η (1 ⊗ Ū)`.
    pub fn pre_compose_unitary(&self, u: &Operator) -> Result<ChoiState> {
        let in_dims = self.in_dims();
        if u.dim() != in_dims.total() {
            return Err(Error::dim("unitary does not match channel input"));
        }
        let eye_out = Operator::identity(self.out_dims());
        let lift = kron(&eye_out, &u.transpose())?;
        let op = lift.mul(&self.op).mul(&lift.adjoint());
        ChoiState::new(op, self.n_out)
    }

    /// Choi state of `X ↦ V Λ(X) V†`: `(V ⊗ 1) η (V† ⊗ 1)`.
    pub fn post_compose_unitary(&self, v: &Operator) -> Result<ChoiState> {
        let out_dims = self.out_dims();
        if v.dim() != out_dims.total() {
            return Err(Error::dim("unitary does not match channel output"));
        }
        let eye_in = Operator::identity(self.in_dims());
        let lift = kron(v, &eye_in)?;
        let op = lift.mul(&self.op).mul(&lift.adjoint());
        ChoiState::new(op, self.n_out)
    }
}

/// Build the Choi state of the channel with the given Kraus family.
///
/// With normalized `|φ⁺⟩` on the doubled input space this is
/// `η = Σ_K (K ⊗ 1)|φ⁺⟩⟨φ⁺|(K ⊗ 1)†`; completeness `Σ K†K = I` is checked.
pub fn choi_from_kraus(kraus: &[KrausOp]) -> Result<ChoiState> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::invalid("Kraus family", "no operators"))?;
    let out_dims = first.out_dims.clone();
    let in_dims = first.in_dims.clone();
    let d_in = in_dims.total();
    let d_out = out_dims.total();
    let total = out_dims.join(&in_dims)?;
    let n = total.total();
    let mut acc = DMatrix::<C64>::zeros(n, n);
    let amp = 1.0 / (d_in as f64).sqrt();
    for k in kraus {
        if k.out_dims.total() != d_out || k.in_dims.total() != d_in {
            return Err(Error::dim("Kraus family has mismatched shapes"));
        }
        // |w⟩ = (K ⊗ 1)|φ⁺⟩ has components w[(a,b)] = K[a,b]/√d_in
        let mut w = DVector::<C64>::zeros(n);
        for a in 0..d_out {
            for b in 0..d_in {
                w[a * d_in + b] = k.m[(a, b)] * amp;
            }
        }
        acc += &w * w.adjoint();
    }
    let completeness = kraus_completeness(kraus)?;
    let dev = completeness.max_abs_diff(&Operator::identity(in_dims));
    if dev > tol::ALGEBRAIC {
        return Err(Error::invalid(
            "Kraus family",
            format!("Σ K†K deviates from identity by {dev:.3e}"),
        ));
    }
    ChoiState::new(Operator::new(total, acc)?, out_dims.len())
}

/// Extract a Kraus family from a Choi state (eigenvalues below `1e-12` are
/// dropped). Round-trips with [`choi_from_kraus`] up to Kraus-family gauge.
pub fn kraus_from_choi(choi: &ChoiState) -> Result<Vec<KrausOp>> {
    let (vals, vecs) = hermitian_eig(choi.operator())?;
    let out_dims = choi.out_dims();
    let in_dims = choi.in_dims();
    let d_in = in_dims.total();
    let d_out = out_dims.total();
    let mut kraus = Vec::new();
    for (k, &l) in vals.iter().enumerate() {
        if l <= 1e-12 {
            continue;
        }
        let scale = (d_in as f64 * l).sqrt();
        let mut m = DMatrix::<C64>::zeros(d_out, d_in);
        for a in 0..d_out {
            for b in 0..d_in {
                m[(a, b)] = vecs.get(a * d_in + b, k) * scale;
            }
        }
        kraus.push(KrausOp::new(out_dims.clone(), in_dims.clone(), m)?);
    }
    Ok(kraus)
}

// ---------------------------------------------------------------------------
// SIC-POVMs and 2-designs
// ---------------------------------------------------------------------------

/// Fiducial vector whose Weyl orbit is a symmetric informationally complete
/// set (d ∈ {2, 3, 4}).
///
/// * d = 2: the closed form `(√((1+1/√3)/2), e^{iπ/4}√((1−1/√3)/2))` — the
///   orbit is a regular tetrahedron on the Bloch sphere.
/// * d = 3: the closed form `(0, 1, −1)/√2`.
/// * d = 4: constants frozen from a high-precision numerical search
///   (Gauss–Newton refinement of the equiangularity residual); the orbit
///   deviates from exact equiangularity by less than 1e-14.
pub fn sic_fiducial(d: usize) -> Result<PureVector> {
    let dims = Dims::single(d.max(2))?;
    match d {
        2 => {
            let s3 = 3f64.sqrt();
            let a = ((1.0 + 1.0 / s3) / 2.0).sqrt();
            let b = ((1.0 - 1.0 / s3) / 2.0).sqrt();
            let phase = c((PI / 4.0).cos(), (PI / 4.0).sin());
            PureVector::new(dims, vec![c(a, 0.0), phase * b])
        }
        3 => {
            let s = 1.0 / 2f64.sqrt();
            PureVector::new(dims, vec![c(0.0, 0.0), c(s, 0.0), c(-s, 0.0)])
        }
        4 => PureVector::normalized(
            dims,
            vec![
                c(0.16100605756297598, 0.1206395323292115),
                c(0.29802920318270115, 0.2680634754635474),
                c(0.2912495951075296, -0.38870300779275957),
                c(0.7502848558532068, 0.0),
            ],
        ),
        _ => Err(Error::UnsupportedDimension(format!(
            "SIC fiducials are provided for d ∈ {{2, 3, 4}}, got {d}"
        ))),
    }
}

/// The d² SIC states `XᵘZᵛ|fiducial⟩` in flat-label order.
pub fn sic_states(d: usize) -> Result<Vec<PureVector>> {
    let fiducial = sic_fiducial(d)?;
    let weyl = WeylOps::new(d)?;
    Ok(weyl
        .all()
        .iter()
        .map(|w| {
            let v = fiducial.apply(w);
            PureVector::normalized(v.dims().clone(), v.vector().iter().copied().collect())
                .expect("Weyl orbit of a unit vector")
        })
        .collect())
}

/// The SIC measurement: d² elements `(1/d)|ψ_{u,v}⟩⟨ψ_{u,v}|`.
pub fn sic_povm(d: usize) -> Result<Povm> {
    let states = sic_states(d)?;
    Povm::new(
        states
            .iter()
            .map(|s| s.projector().scale_re(1.0 / d as f64))
            .collect(),
    )
}

/// A finite set of unit vectors forming a (uniform-weight) spherical
/// 2-design: `(1/K) Σ_k (|ψ_k⟩⟨ψ_k|)^{⊗2} = 2 P_sym / (d(d+1))`.
///
/// The defining property is verified at construction.
#[derive(Debug, Clone)]
pub struct Design2 {
    states: Vec<PureVector>,
}

impl Design2 {
    pub fn new(states: Vec<PureVector>) -> Result<Self> {
        let design = Design2 { states };
        let residual = design.second_moment_residual()?;
        if residual > 1e-8 {
            return Err(Error::invalid(
                "2-design",
                format!("second moment deviates from 2P_sym/(d(d+1)) by {residual:.3e}"),
            ));
        }
        Ok(design)
    }

    /// The SIC 2-design in dimension d ∈ {2, 3, 4}.
    pub fn sic(d: usize) -> Result<Self> {
        Design2::new(sic_states(d)?)
    }

    /// The six eigenstates of the qubit Pauli operators (three mutually
    /// unbiased bases), another qubit 2-design.
    pub fn qubit_mub() -> Result<Self> {
        let dims = Dims::single(2)?;
        let s = 1.0 / 2f64.sqrt();
        let states = vec![
            PureVector::new(dims.clone(), vec![c(1., 0.), c(0., 0.)])?,
            PureVector::new(dims.clone(), vec![c(0., 0.), c(1., 0.)])?,
            PureVector::new(dims.clone(), vec![c(s, 0.), c(s, 0.)])?,
            PureVector::new(dims.clone(), vec![c(s, 0.), c(-s, 0.)])?,
            PureVector::new(dims.clone(), vec![c(s, 0.), c(0., s)])?,
            PureVector::new(dims, vec![c(s, 0.), c(0., -s)])?,
        ];
        Design2::new(states)
    }

    pub fn states(&self) -> &[PureVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// Frobenius distance between the empirical second moment and
    /// `2 P_sym / (d(d+1))`.
    pub fn second_moment_residual(&self) -> Result<f64> {
        let first = self
            .states
            .first()
            .ok_or_else(|| Error::invalid("2-design", "no states"))?;
        let d = first.dim();
        let k = self.states.len() as f64;
        let mut moment = Operator::zeros(first.dims().join(first.dims())?);
        for s in &self.states {
            if s.dim() != d {
                return Err(Error::dim("design states have mixed dimensions"));
            }
            let p = s.projector();
            moment = moment.add(&kron(&p, &p)?);
        }
        moment = moment.scale_re(1.0 / k);
        let dims2 = Dims::new(vec![d, d])?;
        let sym = Operator::identity(dims2)
            .add(&swap_operator(d)?)
            .scale_re(0.5);
        let target = sym.scale_re(2.0 / (d * (d + 1)) as f64);
        Ok(moment.sub(&target).norm())
    }
}

/// All tensor products across the given designs, one factor from each
/// (uniform weights), ordered with the first factor's label slowest.
/// Errors when the product dimension exceeds the supported capacity.
pub fn product_design(designs: &[&Design2]) -> Result<Vec<PureVector>> {
    let first = designs
        .first()
        .ok_or_else(|| Error::invalid("product design", "zero factors"))?;
    let mut out: Vec<PureVector> = first.states().to_vec();
    for design in &designs[1..] {
        let mut next = Vec::with_capacity(out.len() * design.len());
        for a in &out {
            for b in design.states() {
                next.push(kron_vec(a, b)?);
            }
        }
        out = next;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Haar-random objects
// ---------------------------------------------------------------------------

/// Haar-distributed unitary via QR of a Ginibre matrix with the standard
/// phase fix.
pub fn haar_unitary(dims: Dims, rng: &mut impl Rng) -> Operator {
    let n = dims.total();
    let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
        c(gauss(rng), gauss(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    Operator::new(dims, q).expect("square by construction")
}

/// Haar-random pure state.
pub fn haar_state(dims: Dims, rng: &mut impl Rng) -> PureVector {
    let n = dims.total();
    let data: Vec<C64> = (0..n).map(|_| c(gauss(rng), gauss(rng))).collect();
    PureVector::normalized(dims, data).expect("Gaussian vector is nonzero a.s.")
}

/// Random density operator: a Haar state on `dims ⊗ env(rank)`, reduced.
pub fn random_density(dims: Dims, rank: usize, rng: &mut impl Rng) -> Result<Operator> {
    let n = dims.total();
    let r = rank.clamp(1, n);
    let mut m = DMatrix::<C64>::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            m[(i, j)] = c(gauss(rng), gauss(rng));
        }
    }
    let w = &m * m.adjoint();
    let t = w.trace();
    Operator::new(dims, w / t)
}

/// Random channel in Choi form with the given Kraus rank: a Wishart matrix
/// on `out ⊗ in`, normalized so the output marginal is exactly `I/d_in`.
pub fn random_choi(
    out_dims: Dims,
    in_dims: Dims,
    rank: usize,
    rng: &mut impl Rng,
) -> Result<ChoiState> {
    let joined = out_dims.join(&in_dims)?;
    let n = joined.total();
    let d_in = in_dims.total();
    let r = rank.max(1);
    let mut g = DMatrix::<C64>::zeros(n, r);
    for i in 0..n {
        for j in 0..r {
            g[(i, j)] = c(gauss(rng), gauss(rng));
        }
    }
    let w = Operator::new(joined, &g * g.adjoint())?;
    // normalize the input-side marginal: η = (1 ⊗ S^{-1/2}) W (1 ⊗ S^{-1/2}) / d_in
    let keep: Vec<usize> = (out_dims.len()..out_dims.len() + in_dims.len()).collect();
    let marginal = partial_trace(&w, &keep)?;
    let s_inv_root = marginal.inv_sqrt_pd(1e-12)?;
    let lift = kron(&Operator::identity(out_dims.clone()), &s_inv_root)?;
    let op = lift.mul(&w).mul(&lift.adjoint()).scale_re(1.0 / d_in as f64);
    ChoiState::new(op.herm_part(), out_dims.len())
}

/// Standard normal sample (Box–Muller).
fn gauss(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Rebuild an operator from clipped eigenvalues ≥ `floor`.
pub fn clip_spectrum(op: &Operator, floor: f64) -> Result<Operator> {
    let (vals, vecs) = hermitian_eig(op)?;
    Ok(rebuild_from_eig(
        &vals.iter().map(|&l| l.max(floor)).collect::<Vec<_>>(),
        &vecs,
    ))
}
