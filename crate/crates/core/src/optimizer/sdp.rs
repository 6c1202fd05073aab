//! A first-order conic solver for the semidefinite sub-problems of the
//! alternating search.
//!
//! Problems are linear maximization over a product of PSD cones plus free
//! scalars, subject to affine equalities.  The solver is an operator
//! splitting scheme: each iteration projects onto the affine constraint
//! set (a least-squares solve against the constraint Gram matrix, done
//! matrix-free by preconditioned conjugate gradients) and then onto the
//! cone (an eigenvalue clip per block).  Over-relaxation and an adaptive
//! penalty keep the iteration count low, and a previous solution can be
//! supplied as a warm start, which is what makes the alternating search
//! affordable: successive sub-problems differ only in their objective.
//!
//! Hermitian matrices are handled in an orthonormal real coordinate system
//! (diagonal entries, then `√2·Re` and `√2·Im` of each upper off-diagonal
//! entry) so that trace inner products become Euclidean dot products.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::tensor::{psd_project, Dims, Operator, C64};

/// One PSD variable block: a display name plus its (tensor) dimensions.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub name: String,
    pub dims: Dims,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, dims: Dims) -> Self {
        BlockSpec { name: name.into(), dims }
    }
}

/// An affine equality over the blocks and scalars.
///
/// The structured variants cover the recurring constraint families without
/// materializing one coefficient matrix per row; `Linear` is the general
/// single row `Σ_b tr(C_b X_b) + Σ_j g_j s_j = rhs`.
#[derive(Debug, Clone)]
pub enum Constraint {
    /// `Σ_{b ∈ blocks} X_b = target` (one row per real coordinate).
    BlockSum { blocks: Vec<usize>, target: Operator },
    /// `tr_out(X_b) = target`, where the block is bipartite `out ⊗ in`
    /// with `out` of total dimension `d_out` (Choi marginal constraints).
    OutMarginal { block: usize, d_out: usize, target: Operator },
    /// `tr(X_b) = rhs`.
    Trace { block: usize, rhs: f64 },
    /// General affine row.
    Linear {
        terms: Vec<(usize, Operator)>,
        scalar_terms: Vec<(usize, f64)>,
        rhs: f64,
    },
}

/// A conic program: maximize `Σ_b tr(C_b X_b) + Σ_j q_j s_j` over PSD
/// blocks `X_b ⪰ 0` and free scalars `s_j`, subject to affine equalities.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    blocks: Vec<BlockSpec>,
    objective: Vec<Operator>,
    scalar_count: usize,
    scalar_objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

const HERM_TOL: f64 = 1e-10;

impl SdpProblem {
    /// Validates hermiticity of every coefficient matrix (within `1e-10`)
    /// and dimension agreement with the declared blocks.
    pub fn new(
        blocks: Vec<BlockSpec>,
        objective: Vec<Operator>,
        scalar_count: usize,
        scalar_objective: Vec<f64>,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        if objective.len() != blocks.len() {
            return Err(Error::dim(format!(
                "{} objective matrices for {} blocks",
                objective.len(),
                blocks.len()
            )));
        }
        if scalar_objective.len() != scalar_count {
            return Err(Error::dim(format!(
                "{} scalar objective entries for {} scalars",
                scalar_objective.len(),
                scalar_count
            )));
        }
        let check = |op: &Operator, b: usize, role: &str| -> Result<()> {
            if b >= blocks.len() {
                return Err(Error::dim(format!("{role} references block {b}")));
            }
            if op.dims() != &blocks[b].dims {
                return Err(Error::dim(format!(
                    "{role} on block {b} has dimension {}, block has {}",
                    op.dims().total(),
                    blocks[b].dims.total()
                )));
            }
            if !op.is_hermitian(HERM_TOL) {
                return Err(Error::invalid(
                    "SDP coefficient",
                    format!("{role} on block {b} is not Hermitian"),
                ));
            }
            Ok(())
        };
        for (b, c) in objective.iter().enumerate() {
            check(c, b, "objective")?;
        }
        for (i, con) in constraints.iter().enumerate() {
            match con {
                Constraint::BlockSum { blocks: bs, target } => {
                    if bs.is_empty() {
                        return Err(Error::invalid("SDP constraint", "empty block sum"));
                    }
                    for &b in bs {
                        check(target, b, "block-sum target")?;
                    }
                    let _ = i;
                }
                Constraint::OutMarginal { block, d_out, target } => {
                    if *block >= blocks.len() {
                        return Err(Error::dim(format!("marginal references block {block}")));
                    }
                    let total = blocks[*block].dims.total();
                    if *d_out == 0 || total % d_out != 0 {
                        return Err(Error::dim(format!(
                            "block dimension {total} is not divisible by d_out {d_out}"
                        )));
                    }
                    if target.dims().total() != total / d_out {
                        return Err(Error::dim(format!(
                            "marginal target dimension {} for inner dimension {}",
                            target.dims().total(),
                            total / d_out
                        )));
                    }
                    if !target.is_hermitian(HERM_TOL) {
                        return Err(Error::invalid("SDP coefficient", "marginal target not Hermitian"));
                    }
                }
                Constraint::Trace { block, .. } => {
                    if *block >= blocks.len() {
                        return Err(Error::dim(format!("trace references block {block}")));
                    }
                }
                Constraint::Linear { terms, scalar_terms, .. } => {
                    for (b, c) in terms {
                        check(c, *b, "constraint coefficient")?;
                    }
                    for (j, _) in scalar_terms {
                        if *j >= scalar_count {
                            return Err(Error::dim(format!("constraint references scalar {j}")));
                        }
                    }
                }
            }
        }
        Ok(SdpProblem { blocks, objective, scalar_count, scalar_objective, constraints })
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn scalar_count(&self) -> usize {
        self.scalar_count
    }

    pub fn objective(&self) -> &[Operator] {
        &self.objective
    }

    pub fn scalar_objective(&self) -> &[f64] {
        &self.scalar_objective
    }

    /// The objective functional evaluated at explicit block values.
    pub fn value_at(&self, blocks: &[Operator], scalars: &[f64]) -> f64 {
        let from_blocks: f64 = self
            .objective
            .iter()
            .zip(blocks)
            .map(|(c, x)| c.trace_product_re(x))
            .sum();
        let from_scalars: f64 = self
            .scalar_objective
            .iter()
            .zip(scalars)
            .map(|(q, s)| q * s)
            .sum();
        from_blocks + from_scalars
    }
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Residuals below tolerance.
    Optimal,
    /// Iteration budget exhausted with a still-improving iterate.
    MaxIterations,
    /// The equality system is inconsistent (its normal equations do not
    /// admit a solution to tolerance).
    Infeasible,
}

/// Solver output: cone-feasible block values, scalars, objective, and the
/// achieved residuals.  Also carries the internal iterate so a subsequent
/// solve of a same-shaped problem can warm-start from it.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub blocks: Vec<Operator>,
    pub scalars: Vec<f64>,
    pub objective: f64,
    pub status: SdpStatus,
    /// `‖A z − r‖∞` of the reported (cone-projected) iterate.
    pub primal_residual: f64,
    /// Most negative block eigenvalue of the reported iterate, clipped at 0.
    pub psd_violation: f64,
    pub iterations: usize,
    pub(crate) z: Vec<f64>,
    pub(crate) u: Vec<f64>,
    pub(crate) sigma: f64,
}

/// Solve with the default tolerance (`1e-8`) and iteration cap (`100_000`).
pub fn sdp_solve(p: &SdpProblem) -> Result<SdpSolution> {
    sdp_solve_with(p, 1e-8, 100_000, None)
}

// ---------------------------------------------------------------------------
// real coordinates for Hermitian matrices
// ---------------------------------------------------------------------------

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Coordinate index of entry `(i, j)`, `i ≤ j`, in the real layout for a
/// `d×d` Hermitian matrix: the `d` diagonal entries first, then the pairs
/// `(√2·Re, √2·Im)` of the upper triangle in row-major order.
fn coord_diag(d: usize, i: usize) -> usize {
    debug_assert!(i < d);
    i
}

fn coord_off(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    // upper-triangle rank of (i, j) in row-major order
    let rank = i * d - i * (i + 1) / 2 + (j - i - 1);
    d + 2 * rank
}

fn mat_to_coords(op: &Operator, out: &mut [f64]) {
    let d = op.dim();
    debug_assert_eq!(out.len(), d * d);
    for i in 0..d {
        out[coord_diag(d, i)] = op.get(i, i).re;
        for j in i + 1..d {
            let v = op.get(i, j);
            let k = coord_off(d, i, j);
            out[k] = SQRT2 * v.re;
            out[k + 1] = SQRT2 * v.im;
        }
    }
}

fn coords_to_mat(v: &[f64], dims: &Dims) -> Operator {
    let d = dims.total();
    debug_assert_eq!(v.len(), d * d);
    let mut m = nalgebra::DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(v[coord_diag(d, i)], 0.0);
        for j in i + 1..d {
            let k = coord_off(d, i, j);
            let re = v[k] / SQRT2;
            let im = v[k + 1] / SQRT2;
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    Operator::new(dims.clone(), m).expect("coordinate layout fixes the dimension")
}

/// Sparse coordinates of a Hermitian matrix, offset into the global vector.
fn sparse_coords(op: &Operator, offset: usize, into: &mut Vec<(usize, f64)>) {
    let d = op.dim();
    for i in 0..d {
        let v = op.get(i, i).re;
        if v != 0.0 {
            into.push((offset + coord_diag(d, i), v));
        }
        for j in i + 1..d {
            let v = op.get(i, j);
            let k = coord_off(d, i, j);
            if v.re != 0.0 {
                into.push((offset + k, SQRT2 * v.re));
            }
            if v.im != 0.0 {
                into.push((offset + k + 1, SQRT2 * v.im));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// the splitting iteration
// ---------------------------------------------------------------------------

struct Rows {
    /// Sparse rows of the constraint matrix in global real coordinates.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl Rows {
    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(c, a)| a * x[c]).sum();
        }
        out
    }

    fn matvec_t(&self, lam: &DVector<f64>, n: usize) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for (i, row) in self.rows.iter().enumerate() {
            let l = lam[i];
            if l != 0.0 {
                for &(c, a) in row {
                    out[c] += a * l;
                }
            }
        }
        out
    }

    /// `(A Aᵀ) v` without forming the Gram matrix.
    fn gram_apply(&self, v: &DVector<f64>, n: usize, scratch: &mut DVector<f64>) -> DVector<f64> {
        scratch.fill(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let l = v[i];
            if l != 0.0 {
                for &(c, a) in row {
                    scratch[c] += a * l;
                }
            }
        }
        let _ = n;
        self.matvec(scratch)
    }
}

fn expand_rows(p: &SdpProblem, offsets: &[usize], n: usize) -> Rows {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for con in &p.constraints {
        match con {
            Constraint::BlockSum { blocks, target } => {
                let d = target.dim();
                let mut tvec = vec![0.0; d * d];
                mat_to_coords(target, &mut tvec);
                for (k, &t) in tvec.iter().enumerate() {
                    let row: Vec<(usize, f64)> =
                        blocks.iter().map(|&b| (offsets[b] + k, 1.0)).collect();
                    rows.push(row);
                    rhs.push(t);
                }
            }
            Constraint::OutMarginal { block, d_out, target } => {
                let d_in = target.dim();
                let d = d_in * d_out;
                let off = offsets[*block];
                for i in 0..d_in {
                    // Σ_o X[(o,i),(o,i)] = T[i,i]
                    let row: Vec<(usize, f64)> = (0..*d_out)
                        .map(|o| (off + coord_diag(d, o * d_in + i), 1.0))
                        .collect();
                    rows.push(row);
                    rhs.push(target.get(i, i).re);
                    for j in i + 1..d_in {
                        // Σ_o X[(o,i),(o,j)] = T[i,j] — one row for the real
                        // part, one for the imaginary part
                        let re_row: Vec<(usize, f64)> = (0..*d_out)
                            .map(|o| (off + coord_off(d, o * d_in + i, o * d_in + j), 1.0 / SQRT2))
                            .collect();
                        let im_row: Vec<(usize, f64)> = (0..*d_out)
                            .map(|o| {
                                (off + coord_off(d, o * d_in + i, o * d_in + j) + 1, 1.0 / SQRT2)
                            })
                            .collect();
                        rows.push(re_row);
                        rhs.push(target.get(i, j).re);
                        rows.push(im_row);
                        rhs.push(target.get(i, j).im);
                    }
                }
            }
            Constraint::Trace { block, rhs: r } => {
                let d = p.blocks[*block].dims.total();
                let off = offsets[*block];
                let row: Vec<(usize, f64)> =
                    (0..d).map(|i| (off + coord_diag(d, i), 1.0)).collect();
                rows.push(row);
                rhs.push(*r);
            }
            Constraint::Linear { terms, scalar_terms, rhs: r } => {
                let mut row = Vec::new();
                for (b, c) in terms {
                    sparse_coords(c, offsets[*b], &mut row);
                }
                let scalar_base = n - p.scalar_count;
                for &(j, g) in scalar_terms {
                    row.push((scalar_base + j, g));
                }
                rows.push(row);
                rhs.push(*r);
            }
        }
    }
    Rows { rows, rhs }
}

/// Jacobi-preconditioned conjugate gradients on the constraint Gram matrix.
/// Returns `false` when the system could not be solved to tolerance — for a
/// consistent (even redundant) equality set CG converges, so failure is
/// evidence of inconsistency.
fn cg_gram(
    a: &Rows,
    b: &DVector<f64>,
    n: usize,
    lam: &mut DVector<f64>,
    scratch: &mut DVector<f64>,
    precond: &DVector<f64>,
    tol: f64,
) -> bool {
    let m = a.rows.len();
    let mut r = b - a.gram_apply(lam, n, scratch);
    let bnorm = b.norm().max(1e-30);
    if r.norm() <= tol * bnorm {
        return true;
    }
    let mut z = r.component_div(precond);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..(4 * m.max(16)) {
        let ap = a.gram_apply(&p, n, scratch);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            // singular direction: the Gram matrix is rank-deficient; stop
            // and let the residual check decide
            break;
        }
        let alpha = rz / pap;
        lam.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= tol * bnorm {
            return true;
        }
        z = r.component_div(precond);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    r.norm() <= tol * bnorm * 1e3
}

/// Solve with explicit tolerance, iteration cap, and optional warm start
/// from a previous solution of a problem with identical shape.
pub fn sdp_solve_with(
    p: &SdpProblem,
    tol: f64,
    max_iter: usize,
    warm: Option<&SdpSolution>,
) -> Result<SdpSolution> {
    // global coordinate layout: blocks in order, then scalars
    let mut offsets = Vec::with_capacity(p.blocks.len());
    let mut n = 0usize;
    for b in &p.blocks {
        offsets.push(n);
        n += b.dims.total() * b.dims.total();
    }
    let scalar_base = n;
    n += p.scalar_count;

    let a = expand_rows(p, &offsets, n);
    let m = a.rows.len();

    // objective vector
    let mut c = DVector::<f64>::zeros(n);
    for (b, cm) in p.objective.iter().enumerate() {
        let d = cm.dim();
        let mut buf = vec![0.0; d * d];
        mat_to_coords(cm, &mut buf);
        c.rows_mut(offsets[b], d * d).copy_from_slice(&buf);
    }
    for (j, &q) in p.scalar_objective.iter().enumerate() {
        c[scalar_base + j] = q;
    }

    // Jacobi preconditioner: diagonal of the constraint Gram matrix
    let mut precond = DVector::<f64>::zeros(m.max(1));
    for (i, row) in a.rows.iter().enumerate() {
        let d: f64 = row.iter().map(|&(_, v)| v * v).sum();
        if d <= 0.0 {
            if a.rhs[i].abs() > tol {
                return Ok(infeasible_solution(p, n, &offsets, scalar_base));
            }
            precond[i] = 1.0;
        } else {
            precond[i] = d;
        }
    }

    let mut z = DVector::<f64>::zeros(n);
    let mut u = DVector::<f64>::zeros(n);
    let mut sigma = 1.0f64;
    if let Some(w) = warm {
        if w.z.len() == n {
            z = DVector::from_column_slice(&w.z);
            u = DVector::from_column_slice(&w.u);
            sigma = w.sigma;
        }
    }

    let alpha = 1.6; // over-relaxation
    let mut lam = DVector::<f64>::zeros(m.max(1));
    let mut scratch = DVector::<f64>::zeros(n);
    let mut status = SdpStatus::MaxIterations;
    let mut iterations = max_iter;
    let sqrt_n = (n as f64).sqrt();

    for it in 0..max_iter {
        // affine step: minimize -c·x + (σ/2)‖x - (z - u)‖² s.t. Ax = rhs
        let v = &z - &u + &c * (1.0 / sigma);
        if m > 0 {
            let b = a.matvec(&v) - DVector::from_column_slice(&a.rhs);
            if !cg_gram(&a, &b, n, &mut lam, &mut scratch, &precond, 1e-12) {
                status = SdpStatus::Infeasible;
                iterations = it;
                break;
            }
        }
        let x = if m > 0 { &v - a.matvec_t(&lam, n) } else { v };

        // cone step on the over-relaxed point
        let xh = &x * alpha + &z * (1.0 - alpha);
        let w = &xh + &u;
        let z_prev = z.clone();
        z = w.clone();
        for (b, spec) in p.blocks.iter().enumerate() {
            let d = spec.dims.total();
            let seg = w.rows(offsets[b], d * d).iter().copied().collect::<Vec<_>>();
            if d == 1 {
                z[offsets[b]] = seg[0].max(0.0);
            } else {
                let op = coords_to_mat(&seg, &spec.dims);
                let proj = psd_project(&op)?;
                let mut buf = vec![0.0; d * d];
                mat_to_coords(&proj, &mut buf);
                z.rows_mut(offsets[b], d * d).copy_from_slice(&buf);
            }
        }
        // free scalars: no projection (already copied from w)

        u += &xh - &z;

        let r_primal = (&x - &z).norm();
        let r_dual = sigma * (&z - &z_prev).norm();
        let eps_p = tol * sqrt_n + tol * x.norm().max(z.norm());
        let eps_d = tol * sqrt_n + tol * sigma * u.norm();
        if r_primal <= eps_p && r_dual <= eps_d {
            status = SdpStatus::Optimal;
            iterations = it + 1;
            break;
        }
        if it % 25 == 24 {
            if r_primal > 10.0 * r_dual && sigma < 1e6 {
                sigma *= 2.0;
                u /= 2.0;
            } else if r_dual > 10.0 * r_primal && sigma > 1e-6 {
                sigma /= 2.0;
                u *= 2.0;
            }
        }
    }

    // report the cone-projected iterate
    let mut blocks = Vec::with_capacity(p.blocks.len());
    let mut psd_violation = 0.0f64;
    for (b, spec) in p.blocks.iter().enumerate() {
        let d = spec.dims.total();
        let seg = z.rows(offsets[b], d * d).iter().copied().collect::<Vec<_>>();
        let op = coords_to_mat(&seg, &spec.dims);
        if d > 1 {
            let min = op.min_eigenvalue()?;
            psd_violation = psd_violation.max(-min.min(0.0));
        } else {
            psd_violation = psd_violation.max(-seg[0].min(0.0));
        }
        blocks.push(op);
    }
    let scalars: Vec<f64> = (0..p.scalar_count).map(|j| z[scalar_base + j]).collect();
    let objective = c.dot(&z);
    let primal_residual = if m > 0 {
        let res = a.matvec(&z) - DVector::from_column_slice(&a.rhs);
        res.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    } else {
        0.0
    };
    // a finished run that still violates feasibility grossly is inconsistency
    if status == SdpStatus::MaxIterations && primal_residual > 1e-3 {
        status = SdpStatus::Infeasible;
    }
    Ok(SdpSolution {
        blocks,
        scalars,
        objective,
        status,
        primal_residual,
        psd_violation,
        iterations,
        z: z.iter().copied().collect(),
        u: u.iter().copied().collect(),
        sigma,
    })
}

fn infeasible_solution(
    p: &SdpProblem,
    n: usize,
    offsets: &[usize],
    scalar_base: usize,
) -> SdpSolution {
    let blocks = p
        .blocks
        .iter()
        .map(|b| Operator::zeros(b.dims.clone()))
        .collect();
    let _ = offsets;
    SdpSolution {
        blocks,
        scalars: vec![0.0; p.scalar_count],
        objective: 0.0,
        status: SdpStatus::Infeasible,
        primal_residual: f64::INFINITY,
        psd_violation: 0.0,
        iterations: 0,
        z: vec![0.0; n],
        u: vec![0.0; n],
        sigma: 1.0,
    }
    .tap_scalar_base(scalar_base)
}

impl SdpSolution {
    fn tap_scalar_base(self, _b: usize) -> Self {
        self
    }
}
