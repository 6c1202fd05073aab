//! Dense complex linear algebra over labelled tensor-product spaces.
//!
//! Every operator and vector carries a [`Dims`] tag listing its subsystem
//! dimensions; subsystem 0 is the leftmost tensor factor and flat indices are
//! row-major over that list. All structural operations (partial trace,
//! partial transpose, permutation) are expressed against the tag, so callers
//! never juggle strides by hand.

use crate::error::{Error, Result};
use crate::tol;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

pub type C64 = Complex<f64>;

/// Largest supported total dimension for any single operator.
pub const MAX_TOTAL_DIM: usize = 256;

/// Subsystem dimension list. Each entry is ≥ 2; the empty list denotes the
/// trivial (one-dimensional) space, which appears when a tensor factor such
/// as a size-1 message is elided.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims(Vec<usize>);

impl Dims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::dim(format!(
                "subsystem dimensions must be ≥ 2, got {dims:?} (elide trivial factors)"
            )));
        }
        let total: usize = dims.iter().product();
        if total > MAX_TOTAL_DIM {
            return Err(Error::CapacityExceeded(format!(
                "total dimension {total} exceeds the supported maximum {MAX_TOTAL_DIM}"
            )));
        }
        Ok(Dims(dims))
    }

    /// Single subsystem of dimension `d`.
    pub fn single(d: usize) -> Result<Self> {
        Dims::new(vec![d])
    }

    /// The trivial one-dimensional space (empty factor list).
    pub fn scalar() -> Self {
        Dims(Vec::new())
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation `self ⊗ other`.
    pub fn join(&self, other: &Dims) -> Result<Dims> {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        let total: usize = v.iter().product();
        if total > MAX_TOTAL_DIM {
            return Err(Error::CapacityExceeded(format!(
                "joined dimension {total} exceeds the supported maximum {MAX_TOTAL_DIM}"
            )));
        }
        Ok(Dims(v))
    }

    /// Row-major strides: flat index = Σ idx[i]·stride[i].
    pub(crate) fn strides(&self) -> Vec<usize> {
        let k = self.0.len();
        let mut s = vec![1usize; k];
        for i in (0..k.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.0[i + 1];
        }
        s
    }

    fn check_subsystems(&self, subs: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.0.len()];
        for &s in subs {
            if s >= self.0.len() {
                return Err(Error::InvalidSubsystem(format!(
                    "index {s} out of range for {} subsystems",
                    self.0.len()
                )));
            }
            if seen[s] {
                return Err(Error::InvalidSubsystem(format!("index {s} repeated")));
            }
            seen[s] = true;
        }
        Ok(())
    }

    /// Offsets of every multi-index over `subs` inside the full flat index,
    /// i.e. the flat contribution of those subsystems with the others at 0.
    pub(crate) fn sub_offsets(&self, subs: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let sub_dims: Vec<usize> = subs.iter().map(|&s| self.0[s]).collect();
        let count: usize = sub_dims.iter().product::<usize>().max(1);
        let mut offsets = Vec::with_capacity(count);
        let mut idx = vec![0usize; subs.len()];
        for _ in 0..count {
            let mut off = 0usize;
            for (j, &s) in subs.iter().enumerate() {
                off += idx[j] * strides[s];
            }
            offsets.push(off);
            // increment mixed-radix counter (row-major: last digit fastest)
            for j in (0..subs.len()).rev() {
                idx[j] += 1;
                if idx[j] < sub_dims[j] {
                    break;
                }
                idx[j] = 0;
            }
        }
        offsets
    }

    pub(crate) fn complement(&self, subs: &[usize]) -> Vec<usize> {
        (0..self.0.len()).filter(|i| !subs.contains(i)).collect()
    }
}

/// A square operator on a labelled tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dims: Dims,
    m: DMatrix<C64>,
}

impl Operator {
    pub fn new(dims: Dims, m: DMatrix<C64>) -> Result<Self> {
        let n = dims.total();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::dim(format!(
                "matrix is {}x{}, dims product is {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Operator { dims, m })
    }

    pub fn zeros(dims: Dims) -> Self {
        let n = dims.total();
        Operator { dims, m: DMatrix::zeros(n, n) }
    }

    pub fn identity(dims: Dims) -> Self {
        let n = dims.total();
        Operator { dims, m: DMatrix::identity(n, n) }
    }

    pub fn from_fn(dims: Dims, f: impl FnMut(usize, usize) -> C64) -> Self {
        let n = dims.total();
        Operator { dims, m: DMatrix::from_fn(n, n, f) }
    }

    /// Build from a row-major nested array of complex entries.
    pub fn from_rows(dims: Dims, rows: &[Vec<C64>]) -> Result<Self> {
        let n = dims.total();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim(format!("expected {n}x{n} entries")));
        }
        Ok(Operator {
            dims,
            m: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn matrix_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.m
    }

    /// Reinterpret the same matrix with a different subsystem split.
    pub fn with_dims(&self, dims: Dims) -> Result<Operator> {
        Operator::new(dims, self.m.clone())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.m[(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.m[(r, c)] = v;
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn adjoint(&self) -> Operator {
        Operator { dims: self.dims.clone(), m: self.m.adjoint() }
    }

    pub fn transpose(&self) -> Operator {
        Operator { dims: self.dims.clone(), m: self.m.transpose() }
    }

    pub fn conjugate(&self) -> Operator {
        Operator { dims: self.dims.clone(), m: self.m.map(|z| z.conj()) }
    }

    pub fn scale(&self, s: C64) -> Operator {
        Operator { dims: self.dims.clone(), m: &self.m * s }
    }

    pub fn scale_re(&self, s: f64) -> Operator {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add(&self, other: &Operator) -> Operator {
        debug_assert_eq!(self.dim(), other.dim());
        Operator { dims: self.dims.clone(), m: &self.m + &other.m }
    }

    pub fn sub(&self, other: &Operator) -> Operator {
        debug_assert_eq!(self.dim(), other.dim());
        Operator { dims: self.dims.clone(), m: &self.m - &other.m }
    }

    pub fn mul(&self, other: &Operator) -> Operator {
        debug_assert_eq!(self.dim(), other.dim());
        Operator { dims: self.dims.clone(), m: &self.m * &other.m }
    }

    /// (self + self†)/2.
    pub fn herm_part(&self) -> Operator {
        Operator {
            dims: self.dims.clone(),
            m: (&self.m + self.m.adjoint()).scale(0.5),
        }
    }

    /// Largest absolute deviation from Hermiticity.
    pub fn herm_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let d = (self.m[(i, j)] - self.m[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.herm_deviation() <= tol
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    /// Largest absolute entry of self − other.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                worst = worst.max((self.m[(i, j)] - other.m[(i, j)]).norm());
            }
        }
        worst
    }

    /// tr(self · other) without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += self.m[(i, j)] * other.m[(j, i)];
            }
        }
        acc
    }

    /// Real part of tr(self · other); the imaginary part must be negligible
    /// (both Hermitian), asserted in debug builds.
    pub fn trace_product_re(&self, other: &Operator) -> f64 {
        let t = self.trace_product(other);
        debug_assert!(
            t.im.abs() <= 1e-7 * (1.0 + t.re.abs()),
            "trace product has imaginary part {:.3e}",
            t.im
        );
        t.re
    }

    /// ⟨v|M|v⟩ (real part; debug-asserted real for Hermitian M).
    pub fn expectation(&self, v: &PureVector) -> f64 {
        debug_assert_eq!(self.dim(), v.dim());
        let mv = &self.m * &v.v;
        let e = v.v.dotc(&mv);
        debug_assert!(e.im.abs() <= 1e-7 * (1.0 + e.re.abs()));
        e.re
    }

    /// Smallest eigenvalue (requires Hermitian input).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = hermitian_eig(self)?;
        Ok(vals[0])
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol::HERMITICITY.max(tol))
            && self.min_eigenvalue().map(|l| l >= -tol).unwrap_or(false)
    }

    /// PSD square root via eigendecomposition; eigenvalues below `-tol` are
    /// an error, small negatives are clipped to zero.
    pub fn sqrt_psd(&self, tol: f64) -> Result<Operator> {
        let (vals, vecs) = hermitian_eig(self)?;
        if vals[0] < -tol {
            return Err(Error::invalid(
                "PSD operator",
                format!("eigenvalue {:.3e} below -{tol:.1e}", vals[0]),
            ));
        }
        Ok(rebuild_from_eig(&vals.iter().map(|&l| l.max(0.0).sqrt()).collect::<Vec<_>>(), &vecs))
    }

    /// Inverse square root of a strictly positive operator.
    pub fn inv_sqrt_pd(&self, min_eig: f64) -> Result<Operator> {
        let (vals, vecs) = hermitian_eig(self)?;
        if vals[0] < min_eig {
            return Err(Error::invalid(
                "positive-definite operator",
                format!("eigenvalue {:.3e} below {min_eig:.1e}", vals[0]),
            ));
        }
        Ok(rebuild_from_eig(
            &vals.iter().map(|&l| 1.0 / l.sqrt()).collect::<Vec<_>>(),
            &vecs,
        ))
    }
}

/// A unit vector on a labelled tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureVector {
    dims: Dims,
    v: DVector<C64>,
}

impl PureVector {
    /// Build and check the norm (must be within [`tol::CONSTRUCTION`]·10 of 1;
    /// use [`PureVector::normalized`] to renormalize arbitrary data).
    pub fn new(dims: Dims, data: Vec<C64>) -> Result<Self> {
        let n = dims.total();
        if data.len() != n {
            return Err(Error::dim(format!("vector has {} entries, dims product is {n}", data.len())));
        }
        let v = DVector::from_vec(data);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(
                "pure state",
                format!("norm {norm} is not 1 (use normalized())"),
            ));
        }
        Ok(PureVector { dims, v })
    }

    pub fn normalized(dims: Dims, data: Vec<C64>) -> Result<Self> {
        let n = dims.total();
        if data.len() != n {
            return Err(Error::dim(format!("vector has {} entries, dims product is {n}", data.len())));
        }
        let mut v = DVector::from_vec(data);
        let norm = v.norm();
        if norm < 1e-14 {
            return Err(Error::invalid("pure state", "zero vector"));
        }
        v /= C64::new(norm, 0.0);
        Ok(PureVector { dims, v })
    }

    /// Computational basis state |index⟩.
    pub fn basis(dims: Dims, index: usize) -> Result<Self> {
        let n = dims.total();
        if index >= n {
            return Err(Error::dim(format!("basis index {index} out of range {n}")));
        }
        let mut data = vec![C64::new(0.0, 0.0); n];
        data[index] = C64::new(1.0, 0.0);
        Ok(PureVector { dims, v: DVector::from_vec(data) })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.v
    }

    pub fn get(&self, i: usize) -> C64 {
        self.v[i]
    }

    pub fn with_dims(&self, dims: Dims) -> Result<PureVector> {
        if dims.total() != self.dim() {
            return Err(Error::dim(format!(
                "dims product {} does not match vector length {}",
                dims.total(),
                self.dim()
            )));
        }
        Ok(PureVector { dims, v: self.v.clone() })
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureVector) -> C64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.v.dotc(&other.v)
    }

    /// |self⟩⟨self| as an operator.
    pub fn projector(&self) -> Operator {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |i, j| self.v[i] * self.v[j].conj());
        Operator { dims: self.dims.clone(), m }
    }

    /// Apply an operator: |out⟩ = M|self⟩, renormalizing is the caller's job.
    pub fn apply(&self, op: &Operator) -> PureVector {
        debug_assert_eq!(self.dim(), op.dim());
        PureVector { dims: self.dims.clone(), v: &op.m * &self.v }
    }
}

/// Kronecker product of operators, `a ⊗ b` (a is the leftmost factor).
pub fn kron(a: &Operator, b: &Operator) -> Result<Operator> {
    let dims = a.dims.join(&b.dims)?;
    Ok(Operator { dims, m: a.m.kronecker(&b.m) })
}

/// Kronecker product of pure vectors.
pub fn kron_vec(a: &PureVector, b: &PureVector) -> Result<PureVector> {
    let dims = a.dims.join(&b.dims)?;
    Ok(PureVector { dims, v: a.v.kronecker(&b.v) })
}

/// Trace out every subsystem *not* listed in `keep`; `keep` must be strictly
/// increasing. The result's subsystems are the kept ones in original order.
pub fn partial_trace(op: &Operator, keep: &[usize]) -> Result<Operator> {
    op.dims.check_subsystems(keep)?;
    if keep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSubsystem("keep list must be strictly increasing".into()));
    }
    let traced: Vec<usize> = op.dims.complement(keep);
    let keep_offsets = op.dims.sub_offsets(keep);
    let traced_offsets = op.dims.sub_offsets(&traced);
    let kept_dims: Vec<usize> = keep.iter().map(|&s| op.dims.0[s]).collect();
    let out_dims = if kept_dims.is_empty() { Dims::scalar() } else { Dims::new(kept_dims)? };
    let n_out = out_dims.total();
    let mut m = DMatrix::<C64>::zeros(n_out, n_out);
    for (ra, &oa) in keep_offsets.iter().enumerate() {
        for (rb, &ob) in keep_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &ot in &traced_offsets {
                acc += op.m[(oa + ot, ob + ot)];
            }
            m[(ra, rb)] = acc;
        }
    }
    Ok(Operator { dims: out_dims, m })
}

/// Transpose the listed subsystems in place, leaving the rest untouched.
pub fn partial_transpose(op: &Operator, subsystems: &[usize]) -> Result<Operator> {
    op.dims.check_subsystems(subsystems)?;
    let strides = op.dims.strides();
    let n = op.dim();
    let k = op.dims.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    let mut ridx = vec![0usize; k];
    for r in 0..n {
        // decompose r
        {
            let mut rem = r;
            for i in 0..k {
                ridx[i] = rem / strides[i];
                rem %= strides[i];
            }
        }
        let mut cidx = vec![0usize; k];
        for c in 0..n {
            let mut rem = c;
            for i in 0..k {
                cidx[i] = rem / strides[i];
                rem %= strides[i];
            }
            // swap row/col components on transposed subsystems
            let mut nr = 0usize;
            let mut nc = 0usize;
            for i in 0..k {
                let (ri, ci) = if subsystems.contains(&i) {
                    (cidx[i], ridx[i])
                } else {
                    (ridx[i], cidx[i])
                };
                nr += ri * strides[i];
                nc += ci * strides[i];
            }
            m[(nr, nc)] = op.m[(r, c)];
        }
    }
    Ok(Operator { dims: op.dims.clone(), m })
}

/// Reorder subsystems: `perm[i]` is the original index that lands at new
/// position `i`. `perm` must be a permutation of `0..k`.
pub fn permute_subsystems(op: &Operator, perm: &[usize]) -> Result<Operator> {
    let k = op.dims.len();
    check_permutation(perm, k)?;
    let new_dims = Dims::new(perm.iter().map(|&p| op.dims.0[p]).collect())
        .unwrap_or_else(|_| Dims::scalar());
    let map = index_map(&op.dims, perm, &new_dims);
    let n = op.dim();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            m[(map[r], map[c])] = op.m[(r, c)];
        }
    }
    Ok(Operator { dims: new_dims, m })
}

/// Reorder subsystems of a pure vector; same convention as
/// [`permute_subsystems`].
pub fn permute_vec(v: &PureVector, perm: &[usize]) -> Result<PureVector> {
    let k = v.dims.len();
    check_permutation(perm, k)?;
    let new_dims = Dims::new(perm.iter().map(|&p| v.dims.0[p]).collect())
        .unwrap_or_else(|_| Dims::scalar());
    let map = index_map(&v.dims, perm, &new_dims);
    let n = v.dim();
    let mut out = DVector::<C64>::zeros(n);
    for i in 0..n {
        out[map[i]] = v.v[i];
    }
    Ok(PureVector { dims: new_dims, v: out })
}

fn check_permutation(perm: &[usize], k: usize) -> Result<()> {
    if perm.len() != k {
        return Err(Error::InvalidSubsystem(format!(
            "permutation length {} does not match {k} subsystems",
            perm.len()
        )));
    }
    let mut seen = vec![false; k];
    for &p in perm {
        if p >= k || seen[p] {
            return Err(Error::InvalidSubsystem(format!("invalid permutation {perm:?}")));
        }
        seen[p] = true;
    }
    Ok(())
}

/// old flat index -> new flat index under the permutation.
fn index_map(old: &Dims, perm: &[usize], new: &Dims) -> Vec<usize> {
    let old_strides = old.strides();
    let new_strides = new.strides();
    let k = old.len();
    let n = old.total();
    let mut map = vec![0usize; n];
    let mut idx = vec![0usize; k];
    for f in 0..n {
        let mut rem = f;
        for i in 0..k {
            idx[i] = rem / old_strides[i];
            rem %= old_strides[i];
        }
        let mut nf = 0usize;
        for i in 0..k {
            nf += idx[perm[i]] * new_strides[i];
        }
        map[f] = nf;
    }
    map
}

/// Eigendecomposition of a Hermitian operator.
///
/// The input must be Hermitian within [`tol::HERMITICITY`]; it is symmetrized
/// before decomposition. Returns eigenvalues in ascending order and the
/// corresponding orthonormal eigenvectors as the columns of an operator.
pub fn hermitian_eig(op: &Operator) -> Result<(Vec<f64>, Operator)> {
    let dev = op.herm_deviation();
    // `!(· <= tol)` also catches a NaN deviation from a corrupted input.
    if !(dev <= tol::HERMITICITY) {
        return Err(Error::NotHermitian(dev));
    }
    let h = (&op.m + op.m.adjoint()).scale(0.5);
    let n = op.dim();
    let mut se = h.clone().symmetric_eigen();
    if !se.eigenvalues.iter().all(|v| v.is_finite()) {
        // The pure-Rust QL iteration can fail to converge (NaN) on spectra
        // with exact degeneracies. A tiny seeded Hermitian perturbation
        // splits them; it moves eigenvalues by at most its own scale, far
        // below every tolerance used in this crate, and the run stays
        // deterministic because the seed is fixed.
        use rand::{Rng, SeedableRng};
        let scale = h.iter().map(|c| c.norm()).fold(0.0f64, f64::max).max(1e-30);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x9e37_79b9);
        let mut repaired = false;
        for eps in [1e-14, 1e-13, 1e-12] {
            let g = DMatrix::<C64>::from_fn(n, n, |_, _| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let jitter = (&g + g.adjoint()).scale(eps * scale);
            se = (&h + jitter).symmetric_eigen();
            if se.eigenvalues.iter().all(|v| v.is_finite()) {
                repaired = true;
                break;
            }
        }
        if !repaired {
            return Err(Error::SolverFailure {
                step: 0,
                detail: format!("eigensolver produced non-finite values for a {n}x{n} Hermitian matrix"),
            });
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    Ok((vals, Operator { dims: op.dims.clone(), m: vecs }))
}

/// Project onto the PSD cone: clip negative eigenvalues to zero.
pub fn psd_project(op: &Operator) -> Result<Operator> {
    let (vals, vecs) = hermitian_eig(op)?;
    if vals[0] >= 0.0 {
        // already PSD; return the symmetrized input unchanged
        return Ok(op.herm_part());
    }
    Ok(rebuild_from_eig(&vals.iter().map(|&l| l.max(0.0)).collect::<Vec<_>>(), &vecs))
}

/// Σ_k vals[k] |vecs_k⟩⟨vecs_k| from an eigenbasis.
pub fn rebuild_from_eig(vals: &[f64], vecs: &Operator) -> Operator {
    let n = vecs.dim();
    let mut scaled = vecs.m.clone();
    for k in 0..n {
        let mut col = scaled.column_mut(k);
        col *= C64::new(vals[k], 0.0);
    }
    Operator { dims: vecs.dims.clone(), m: scaled * vecs.m.adjoint() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_op(dims: Dims, rng: &mut ChaCha12Rng) -> Operator {
        Operator::from_fn(dims, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_herm(dims: Dims, rng: &mut ChaCha12Rng) -> Operator {
        random_op(dims, rng).herm_part()
    }

    fn qubit() -> Dims {
        Dims::single(2).unwrap()
    }

    fn pauli_x() -> Operator {
        Operator::from_rows(qubit(), &[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]])
            .unwrap()
    }

    fn pauli_z() -> Operator {
        Operator::from_rows(qubit(), &[vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(-1., 0.)]])
            .unwrap()
    }

    fn bell_phi_plus() -> PureVector {
        let s = 1.0 / 2f64.sqrt();
        PureVector::new(
            Dims::new(vec![2, 2]).unwrap(),
            vec![c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)],
        )
        .unwrap()
    }

    #[test]
    fn dims_rejects_capacity_and_trivial_entries() {
        assert!(matches!(Dims::new(vec![2; 9]), Err(Error::CapacityExceeded(_))));
        assert!(Dims::new(vec![1, 2]).is_err());
        assert_eq!(Dims::scalar().total(), 1);
        assert_eq!(Dims::new(vec![4, 4, 4, 4]).unwrap().total(), 256);
    }

    #[test]
    fn kron_identities() {
        let i2 = Operator::identity(qubit());
        let i4 = kron(&i2, &i2).unwrap();
        assert_eq!(i4.dims().factors(), &[2, 2]);
        assert!(i4.max_abs_diff(&Operator::identity(Dims::new(vec![2, 2]).unwrap())) == 0.0);

        // (Z ⊗ I)|00> = |00>
        let zi = kron(&pauli_z(), &i2).unwrap();
        let v00 = PureVector::basis(Dims::new(vec![2, 2]).unwrap(), 0).unwrap();
        let out = v00.apply(&zi);
        assert!((out.inner(&v00).re - 1.0).abs() < tol::CONSTRUCTION);

        // (X ⊗ X)|φ+> = |φ+>
        let xx = kron(&pauli_x(), &pauli_x()).unwrap();
        let phi = bell_phi_plus();
        let out = phi.apply(&xx);
        assert!((out.inner(&phi).re - 1.0).abs() < tol::CONSTRUCTION);
    }

    #[test]
    fn kron_associativity_and_mixed_products() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let a = random_op(qubit(), &mut rng);
        let b = random_op(Dims::single(3).unwrap(), &mut rng);
        let cc = random_op(qubit(), &mut rng);
        let left = kron(&kron(&a, &b).unwrap(), &cc).unwrap();
        let right = kron(&a, &kron(&b, &cc).unwrap()).unwrap();
        assert!(left.max_abs_diff(&right) < tol::CONSTRUCTION);
        // (A⊗B)(C⊗D) = AC ⊗ BD
        let d = random_op(Dims::single(3).unwrap(), &mut rng);
        let lhs = kron(&a, &b).unwrap().mul(&kron(&cc, &d).unwrap());
        let rhs = kron(&a.mul(&cc), &b.mul(&d)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < tol::CONSTRUCTION);
    }

    #[test]
    fn partial_trace_bell_marginal() {
        let rho = bell_phi_plus().projector();
        let red = partial_trace(&rho, &[0]).unwrap();
        let half = Operator::identity(qubit()).scale_re(0.5);
        assert!(red.max_abs_diff(&half) < tol::CONSTRUCTION);
        let red1 = partial_trace(&rho, &[1]).unwrap();
        assert!(red1.max_abs_diff(&half) < tol::CONSTRUCTION);
    }

    #[test]
    fn partial_trace_of_product_and_full_trace() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let a = random_op(Dims::single(3).unwrap(), &mut rng);
        let b = random_op(qubit(), &mut rng);
        let ab = kron(&a, &b).unwrap();
        let red = partial_trace(&ab, &[0]).unwrap();
        let expect = a.scale(b.trace());
        assert!(red.max_abs_diff(&expect) < tol::CONSTRUCTION);

        // tracing everything leaves the 1x1 total trace
        let full = partial_trace(&ab, &[]).unwrap();
        assert_eq!(full.dim(), 1);
        assert!((full.get(0, 0) - ab.trace()).norm() < tol::CONSTRUCTION);
    }

    #[test]
    fn partial_trace_three_factors() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let dims = Dims::new(vec![2, 3, 2]).unwrap();
        let x = random_op(dims, &mut rng);
        // tracing out {1} then {1 (old 2)} equals tracing out {1,2} at once
        let step1 = partial_trace(&x, &[0, 2]).unwrap();
        let step2 = partial_trace(&step1, &[0]).unwrap();
        let direct = partial_trace(&x, &[0]).unwrap();
        assert!(step2.max_abs_diff(&direct) < tol::CONSTRUCTION);
    }

    #[test]
    fn partial_transpose_product_and_involution() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let a = random_op(qubit(), &mut rng);
        let b = random_op(Dims::single(3).unwrap(), &mut rng);
        let ab = kron(&a, &b).unwrap();
        let pt = partial_transpose(&ab, &[1]).unwrap();
        let expect = kron(&a, &b.transpose()).unwrap();
        assert!(pt.max_abs_diff(&expect) < tol::CONSTRUCTION);

        let dims = Dims::new(vec![2, 2]).unwrap();
        let x = random_op(dims, &mut rng);
        let twice = partial_transpose(&partial_transpose(&x, &[0]).unwrap(), &[0]).unwrap();
        assert!(twice.max_abs_diff(&x) < tol::CONSTRUCTION);
    }

    #[test]
    fn partial_transpose_bell_is_swap_over_two() {
        let rho = bell_phi_plus().projector();
        let pt = partial_transpose(&rho, &[1]).unwrap();
        let (vals, _) = hermitian_eig(&pt).unwrap();
        // spectrum {−1/2, 1/2, 1/2, 1/2}
        assert!((vals[0] + 0.5).abs() < tol::CONSTRUCTION);
        for v in &vals[1..] {
            assert!((v - 0.5).abs() < tol::CONSTRUCTION);
        }
    }

    #[test]
    fn permute_subsystems_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let a = random_op(qubit(), &mut rng);
        let b = random_op(Dims::single(3).unwrap(), &mut rng);
        let ab = kron(&a, &b).unwrap();
        let ba = permute_subsystems(&ab, &[1, 0]).unwrap();
        let expect = kron(&b, &a).unwrap();
        assert!(ba.max_abs_diff(&expect) < tol::CONSTRUCTION);
        assert_eq!(ba.dims().factors(), &[3, 2]);

        let v = PureVector::basis(Dims::new(vec![2, 3]).unwrap(), 1).unwrap(); // |0,1>
        let pv = permute_vec(&v, &[1, 0]).unwrap(); // |1,0> over dims [3,2]
        assert!((pv.get(2).re - 1.0).abs() < tol::CONSTRUCTION);
    }

    #[test]
    fn hermitian_eig_pauli_and_reconstruction() {
        let (vals, vecs) = hermitian_eig(&pauli_z()).unwrap();
        assert!((vals[0] + 1.0).abs() < tol::CONSTRUCTION);
        assert!((vals[1] - 1.0).abs() < tol::CONSTRUCTION);
        // eigenvector for −1 is |1>
        assert!((vecs.get(1, 0).norm() - 1.0).abs() < 1e-9);

        let (vals, vecs) = hermitian_eig(&pauli_x()).unwrap();
        assert!((vals[0] + 1.0).abs() < tol::CONSTRUCTION);
        // eigenvector for −1 proportional to (1,−1)/√2
        let r = vecs.get(0, 0) / vecs.get(1, 0);
        assert!((r + C64::new(1.0, 0.0)).norm() < 1e-9);

        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &n in &[2usize, 3, 8, 16, 64] {
            let dims = Dims::single(n).unwrap();
            let h = random_herm(dims, &mut rng);
            let (vals, vecs) = hermitian_eig(&h).unwrap();
            let recon = rebuild_from_eig(&vals, &vecs);
            assert!(
                recon.sub(&h).norm() < tol::ALGEBRAIC,
                "reconstruction failed at n={n}: {:.3e}",
                recon.sub(&h).norm()
            );
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn hermitian_eig_rejects_non_hermitian() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x = random_op(qubit(), &mut rng);
        assert!(matches!(hermitian_eig(&x), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn psd_project_examples() {
        // fixed point on a PSD operator
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let g = random_op(Dims::single(4).unwrap(), &mut rng);
        let psd = g.mul(&g.adjoint());
        let proj = psd_project(&psd).unwrap();
        assert!(proj.max_abs_diff(&psd) < tol::ALGEBRAIC);

        // diag(1,−1) -> diag(1,0)
        let d = pauli_z();
        let proj = psd_project(&d).unwrap();
        let expect = Operator::from_rows(
            qubit(),
            &[vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(0., 0.)]],
        )
        .unwrap();
        assert!(proj.max_abs_diff(&expect) < tol::CONSTRUCTION);

        // −I -> 0
        let neg = Operator::identity(Dims::single(3).unwrap()).scale_re(-1.0);
        let proj = psd_project(&neg).unwrap();
        assert!(proj.norm() < tol::CONSTRUCTION);
    }

    #[test]
    fn psd_decomposition_identity() {
        // h = psd_project(h) − psd_project(−h) for Hermitian h
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..20 {
            let h = random_herm(Dims::single(5).unwrap(), &mut rng);
            let plus = psd_project(&h).unwrap();
            let minus = psd_project(&h.scale_re(-1.0)).unwrap();
            assert!(plus.sub(&minus).max_abs_diff(&h) < tol::ALGEBRAIC);
        }
    }

    #[test]
    fn trace_product_matches_full_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let dims = Dims::single(6).unwrap();
        let a = random_op(dims.clone(), &mut rng);
        let b = random_op(dims, &mut rng);
        let fast = a.trace_product(&b);
        let slow = a.mul(&b).trace();
        assert!((fast - slow).norm() < tol::ALGEBRAIC);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn eig_reconstructs(seed in any::<u64>(), n in 2usize..12) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let h = random_herm(Dims::single(n).unwrap(), &mut rng);
                let (vals, vecs) = hermitian_eig(&h).unwrap();
                let recon = rebuild_from_eig(&vals, &vecs);
                prop_assert!(recon.sub(&h).norm() < tol::ALGEBRAIC);
            }

            #[test]
            fn partial_trace_is_trace_preserving(seed in any::<u64>()) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let dims = Dims::new(vec![2, 3]).unwrap();
                let x = random_op(dims, &mut rng);
                let red = partial_trace(&x, &[1]).unwrap();
                prop_assert!((red.trace() - x.trace()).norm() < tol::ALGEBRAIC);
            }

            #[test]
            fn psd_projection_is_idempotent(seed in any::<u64>(), n in 2usize..8) {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let h = random_herm(Dims::single(n).unwrap(), &mut rng);
                let once = psd_project(&h).unwrap();
                let twice = psd_project(&once).unwrap();
                prop_assert!(once.max_abs_diff(&twice) < tol::ALGEBRAIC);
            }
        }
    }
}
