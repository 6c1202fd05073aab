//! Random access code strategies over `n` slots of `d^2`-valued data.
//!
//! A strategy answers: given Alice's data `x` (one `d^2`-valued label per
//! slot) and Bob's slot choice `y`, with what probability does Bob guess
//! each candidate value for `x_y`?  Three concrete resources are covered:
//! a no-signaling box (Alice feeds `x` in, sends her outcome `a`, Bob
//! guesses `a + b mod d^2`), a deterministic classical code (encoding
//! table plus per-slot decoding tables), and an entanglement-assisted code
//! (shared state, encoding measurements per `x`, decoding measurements per
//! `(y, message)`).

use crate::error::{Error, Result};
use crate::quantum::{is_density, Povm};
use crate::tensor::{kron, partial_trace, Operator};
use crate::tol;

use super::nsbox::{flatten_input, unflatten_input, NsBox};

/// A deterministic classical code: Alice maps her data to a message,
/// Bob maps `(slot, message)` to a guess.
#[derive(Clone, Debug)]
pub struct ClassicalRac {
    n: usize,
    d: usize,
    encoder: Vec<usize>,
    decoders: Vec<Vec<usize>>,
}

impl ClassicalRac {
    /// `encoder[x_flat]` is the message (any finite alphabet), and
    /// `decoders[y][message]` is Bob's guess in `[d^2]`.
    pub fn new(
        n: usize,
        d: usize,
        encoder: Vec<usize>,
        decoders: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::invalid("ClassicalRac", "need n >= 1 and d >= 2"));
        }
        let k = d * d;
        let x_count = k.pow(n as u32);
        if encoder.len() != x_count {
            return Err(Error::invalid(
                "ClassicalRac",
                format!("encoder has {} entries, expected {x_count}", encoder.len()),
            ));
        }
        if decoders.len() != n {
            return Err(Error::invalid(
                "ClassicalRac",
                format!("need one decoder per slot ({n}), got {}", decoders.len()),
            ));
        }
        let m = decoders[0].len();
        if encoder.iter().any(|&c| c >= m) {
            return Err(Error::AlphabetMismatch(format!(
                "encoder emits a message outside the decoder alphabet [{m}]"
            )));
        }
        for (y, dec) in decoders.iter().enumerate() {
            if dec.len() != m {
                return Err(Error::invalid(
                    "ClassicalRac",
                    format!("decoder for slot {y} has alphabet {} != {m}", dec.len()),
                ));
            }
            if dec.iter().any(|&g| g >= k) {
                return Err(Error::invalid(
                    "ClassicalRac",
                    format!("decoder for slot {y} guesses outside [{k}]"),
                ));
            }
        }
        Ok(Self { n, d, encoder, decoders })
    }
}

/// An entanglement-assisted code: shared bipartite state, one encoding
/// measurement per data value `x` (outcome = classical message), one
/// decoding measurement per `(slot, message)` (outcome = guess).
#[derive(Clone, Debug)]
pub struct QuantumRac {
    n: usize,
    d: usize,
    shared: Operator,
    alice: Vec<Povm>,
    bob: Vec<Vec<Povm>>,
}

impl QuantumRac {
    /// `shared` must be a two-factor density operator `[A, B]`; `alice`
    /// holds one POVM on `A` per flattened data value, all with the same
    /// outcome count `m`; `bob[y][c]` is a `d^2`-outcome POVM on `B`.
    pub fn new(
        n: usize,
        d: usize,
        shared: Operator,
        alice: Vec<Povm>,
        bob: Vec<Vec<Povm>>,
    ) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::invalid("QuantumRac", "need n >= 1 and d >= 2"));
        }
        if shared.dims().len() != 2 {
            return Err(Error::dim(format!(
                "shared state must have exactly two factors [A, B], got {:?}",
                shared.dims().factors()
            )));
        }
        if !is_density(&shared, tol::ALGEBRAIC) {
            return Err(Error::invalid("QuantumRac", "shared operator is not a density operator"));
        }
        let k = d * d;
        let x_count = k.pow(n as u32);
        let d_a = shared.dims().factors()[0];
        let d_b = shared.dims().factors()[1];
        if alice.len() != x_count {
            return Err(Error::invalid(
                "QuantumRac",
                format!("need one encoding POVM per data value ({x_count}), got {}", alice.len()),
            ));
        }
        let m = alice[0].len();
        for povm in &alice {
            if povm.len() != m || povm.dims().total() != d_a {
                return Err(Error::invalid(
                    "QuantumRac",
                    "encoding POVMs must share outcome count and act on the A factor",
                ));
            }
        }
        if bob.len() != n {
            return Err(Error::invalid(
                "QuantumRac",
                format!("need decoding POVMs for {n} slots, got {}", bob.len()),
            ));
        }
        for row in &bob {
            if row.len() != m {
                return Err(Error::AlphabetMismatch(format!(
                    "decoding POVMs must be indexed by the message alphabet [{m}]"
                )));
            }
            for povm in row {
                if povm.len() != k || povm.dims().total() != d_b {
                    return Err(Error::invalid(
                        "QuantumRac",
                        "decoding POVMs must have d^2 outcomes and act on the B factor",
                    ));
                }
            }
        }
        Ok(Self { n, d, shared, alice, bob })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shared(&self) -> &Operator {
        &self.shared
    }

    /// One encoding POVM per flattened data value.
    pub fn alice(&self) -> &[Povm] {
        &self.alice
    }

    /// `bob()[y][c]` is the decoding POVM for slot `y` and message `c`.
    pub fn bob(&self) -> &[Vec<Povm>] {
        &self.bob
    }
}

/// A strategy for the `n`-slot, `d^2`-valued random access code.
#[derive(Clone, Debug)]
pub enum RacStrategy {
    /// No-signaling box: feed `x`, send outcome `a`, guess `a + b mod d^2`.
    NsBox(NsBox),
    /// Deterministic encoding and decoding tables.
    Classical(ClassicalRac),
    /// Shared entangled state with encoding/decoding measurements.
    Quantum(QuantumRac),
}

/// Wraps a no-signaling box as a strategy; its success rate is exactly the
/// box's Bell parameter.
pub fn rac_from_box(b: NsBox) -> RacStrategy {
    RacStrategy::NsBox(b)
}

impl RacStrategy {
    /// Number of data slots.
    pub fn n(&self) -> usize {
        match self {
            RacStrategy::NsBox(b) => b.n(),
            RacStrategy::Classical(c) => c.n,
            RacStrategy::Quantum(q) => q.n,
        }
    }

    /// Underlying dimension `d`; data values range over `[d^2]`.
    pub fn d(&self) -> usize {
        match self {
            RacStrategy::NsBox(b) => b.d(),
            RacStrategy::Classical(c) => c.d,
            RacStrategy::Quantum(q) => q.d,
        }
    }

    /// Outcome alphabet size `d^2`.
    pub fn outcome_count(&self) -> usize {
        let d = self.d();
        d * d
    }

    /// Number of flattened data values `d^(2n)`.
    pub fn x_count(&self) -> usize {
        self.outcome_count().pow(self.n() as u32)
    }

    /// Bob's guess distribution given data digits `x` and slot `y`:
    /// a length-`d^2` probability vector.
    pub fn guess_distribution(&self, x: &[usize], y: usize) -> Result<Vec<f64>> {
        let k = self.outcome_count();
        if x.len() != self.n() {
            return Err(Error::dim(format!(
                "data has {} slots, strategy expects {}",
                x.len(),
                self.n()
            )));
        }
        if x.iter().any(|&t| t >= k) || y >= self.n() {
            return Err(Error::InvalidSubsystem(format!(
                "data digits must lie in [{k}] and slot in [{}]",
                self.n()
            )));
        }
        match self {
            RacStrategy::NsBox(b) => {
                let x_flat = flatten_input(x, k);
                let mut q = vec![0.0; k];
                for a in 0..k {
                    for out in 0..k {
                        let p = b.p(a, out, x_flat, y);
                        if *p.numer() != 0 {
                            q[(a + out) % k] += *p.numer() as f64 / *p.denom() as f64;
                        }
                    }
                }
                Ok(q)
            }
            RacStrategy::Classical(c) => {
                let x_flat = flatten_input(x, k);
                let mut q = vec![0.0; k];
                q[c.decoders[y][c.encoder[x_flat]]] = 1.0;
                Ok(q)
            }
            RacStrategy::Quantum(qr) => {
                let x_flat = flatten_input(x, k);
                let mut q = vec![0.0; k];
                let id_b = Operator::identity(crate::tensor::Dims::single(
                    qr.shared.dims().factors()[1],
                )?);
                for (c, effect) in qr.alice[x_flat].elements().iter().enumerate() {
                    // Bob's unnormalised conditional state given message c.
                    let lifted = kron(effect, &id_b)?;
                    let weighted = lifted.mul(&qr.shared);
                    let conditional = partial_trace(&weighted, &[1])?;
                    for (guess, b_eff) in qr.bob[y][c].elements().iter().enumerate() {
                        q[guess] += conditional.trace_product_re(b_eff);
                    }
                }
                Ok(q)
            }
        }
    }

    /// Success probability for each slot: the average over uniformly random
    /// data of the probability that Bob's guess equals `x_y`.
    pub fn success_by_slot(&self) -> Result<Vec<f64>> {
        let k = self.outcome_count();
        let n = self.n();
        let x_count = self.x_count();
        let mut digits = vec![0usize; n];
        let mut by_slot = vec![0.0; n];
        for y in 0..n {
            for x in 0..x_count {
                unflatten_input(x, n, k, &mut digits);
                let q = self.guess_distribution(&digits, y)?;
                by_slot[y] += q[digits[y]];
            }
            by_slot[y] /= x_count as f64;
        }
        Ok(by_slot)
    }

    /// Average success probability over uniformly random data and slots.
    pub fn p_rac(&self) -> Result<f64> {
        let by_slot = self.success_by_slot()?;
        Ok(by_slot.iter().sum::<f64>() / by_slot.len() as f64)
    }

    /// Distribution of the correction error for slot `y`, as Weyl pair
    /// labels: entry `e = (i, j)` (flattened `i * d + j`) is the probability
    /// that the guess differs from `x_y` by `+ (i, j)` componentwise mod `d`.
    /// Entry 0 is the success probability for that slot.
    pub fn error_distribution(&self, y: usize) -> Result<Vec<f64>> {
        let k = self.outcome_count();
        let d = self.d();
        let n = self.n();
        let x_count = self.x_count();
        let mut digits = vec![0usize; n];
        let mut w = vec![0.0; k];
        for x in 0..x_count {
            unflatten_input(x, n, k, &mut digits);
            let q = self.guess_distribution(&digits, y)?;
            for (guess, &prob) in q.iter().enumerate() {
                w[pair_sub(guess, digits[y], d)] += prob;
            }
        }
        for entry in &mut w {
            *entry /= x_count as f64;
        }
        Ok(w)
    }
}

/// Upper bounds for codes assisted by a maximally entangled state of local
/// dimension `d^2` with rank-1 projective encodings: the success probability
/// is at most `(1 + (n-1)/d) / n`, and the induced teleportation fidelity is
/// at most `(2n + d - 1) / (n (d+1))`.
pub fn rac_bound(n: usize, d: usize) -> (f64, f64) {
    let (n_f, d_f) = (n as f64, d as f64);
    let p = (1.0 + (n_f - 1.0) / d_f) / n_f;
    let f = (2.0 * n_f + d_f - 1.0) / (n_f * (d_f + 1.0));
    (p, f)
}

/// Splits a flat label into its Weyl pair `(i, j)` with `label = i*d + j`.
pub(crate) fn pair_of(label: usize, d: usize) -> (usize, usize) {
    (label / d, label % d)
}

/// Flattens a Weyl pair.
pub(crate) fn label_of(i: usize, j: usize, d: usize) -> usize {
    (i % d) * d + (j % d)
}

/// Componentwise difference of pair labels mod `d`.
pub(crate) fn pair_sub(lhs: usize, rhs: usize, d: usize) -> usize {
    let (li, lj) = pair_of(lhs, d);
    let (ri, rj) = pair_of(rhs, d);
    label_of(li + d - ri, lj + d - rj, d)
}

/// A bijective relabeling of `[d^2]` acting linearly on Weyl pairs.
#[derive(Clone, Debug)]
pub(crate) struct LabelMap {
    map: Vec<usize>,
}

impl LabelMap {
    pub(crate) fn apply(&self, label: usize) -> usize {
        self.map[label]
    }

    /// The inverse permutation.
    pub(crate) fn inverse(&self) -> LabelMap {
        let mut inv = vec![0usize; self.map.len()];
        for (src, &dst) in self.map.iter().enumerate() {
            inv[dst] = src;
        }
        LabelMap { map: inv }
    }

    /// The identity relabeling on `[d^2]`.
    pub(crate) fn identity(d: usize) -> LabelMap {
        LabelMap { map: (0..d * d).collect() }
    }
}

/// All invertible linear maps on pairs mod `d` (the matrices over `Z_d`
/// whose determinant is a unit), as label permutations.  For prime `d` this
/// group acts transitively on the nonzero pair labels, which is what makes
/// relabeling-averaged failure errors uniform.
pub(crate) fn gl2_label_maps(d: usize) -> Vec<LabelMap> {
    let mut maps = Vec::new();
    for alpha in 0..d {
        for beta in 0..d {
            for gamma in 0..d {
                for delta in 0..d {
                    let det = (alpha * delta + d * d - ((beta * gamma) % (d * d))) % d;
                    if gcd(det, d) != 1 {
                        continue;
                    }
                    let map = (0..d * d)
                        .map(|label| {
                            let (i, j) = pair_of(label, d);
                            label_of(alpha * i + beta * j, gamma * i + delta * j, d)
                        })
                        .collect();
                    maps.push(LabelMap { map });
                }
            }
        }
    }
    maps
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::nsbox::{local_deterministic_box, ns_box, uniform_box};
    use crate::tensor::Dims;

    #[test]
    fn perfect_box_strategy_is_perfect() {
        for (n, d) in [(1, 2), (2, 2), (3, 2), (2, 3)] {
            let s = rac_from_box(ns_box(n, d).unwrap());
            let p = s.p_rac().unwrap();
            assert!((p - 1.0).abs() < 1e-12, "(n,d)=({n},{d}) gave {p}");
        }
    }

    #[test]
    fn box_strategy_matches_bell_parameter() {
        let b = local_deterministic_box(2, 2, |x| x[1], |_| 2).unwrap();
        let bell = b.bell_parameter();
        let bell_f = *bell.numer() as f64 / *bell.denom() as f64;
        let s = rac_from_box(b);
        assert!((s.p_rac().unwrap() - bell_f).abs() < 1e-12);
    }

    #[test]
    fn uniform_box_guesses_blindly() {
        let s = rac_from_box(uniform_box(2, 2).unwrap());
        assert!((s.p_rac().unwrap() - 0.25).abs() < 1e-12);
        let w = s.error_distribution(0).unwrap();
        for entry in w {
            assert!((entry - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_strategy_first_slot_only() {
        // Send the first slot's value verbatim; guess it for every slot.
        let k = 4;
        let encoder: Vec<usize> = (0..16).map(|x| x / k).collect();
        let decoders = vec![(0..k).collect::<Vec<_>>(); 2];
        let s = RacStrategy::Classical(ClassicalRac::new(2, 2, encoder, decoders).unwrap());
        let by_slot = s.success_by_slot().unwrap();
        assert!((by_slot[0] - 1.0).abs() < 1e-12);
        assert!((by_slot[1] - 0.25).abs() < 1e-12);
        assert!((s.p_rac().unwrap() - 0.625).abs() < 1e-12);
    }

    #[test]
    fn deterministic_quantum_strategy_matches_classical() {
        // Encode a classical table as measurements with deterministic
        // outcomes: effect `c` is the identity when c = encoder(x).
        let k = 4;
        let d_a = 2;
        let encoder: Vec<usize> = (0..16).map(|x| x % k).collect();
        let decoders = vec![(0..k).rev().collect::<Vec<_>>(), (0..k).collect::<Vec<_>>()];
        let one = Dims::single(d_a).unwrap();
        let shared = Operator::identity(Dims::new(vec![d_a, d_a]).unwrap()).scale_re(0.25);
        let alice: Vec<Povm> = encoder
            .iter()
            .map(|&c| {
                let mut effects = vec![Operator::zeros(one.clone()); k];
                effects[c] = Operator::identity(one.clone());
                Povm::new(effects).unwrap()
            })
            .collect();
        let bob: Vec<Vec<Povm>> = decoders
            .iter()
            .map(|dec| {
                dec.iter()
                    .map(|&guess| {
                        let mut effects = vec![Operator::zeros(one.clone()); k];
                        effects[guess] = Operator::identity(one.clone());
                        Povm::new(effects).unwrap()
                    })
                    .collect()
            })
            .collect();
        let quantum =
            RacStrategy::Quantum(QuantumRac::new(2, 2, shared, alice, bob).unwrap());
        let classical = RacStrategy::Classical(
            ClassicalRac::new(2, 2, encoder, decoders).unwrap(),
        );
        assert!((quantum.p_rac().unwrap() - classical.p_rac().unwrap()).abs() < 1e-12);
        for y in 0..2 {
            let wq = quantum.error_distribution(y).unwrap();
            let wc = classical.error_distribution(y).unwrap();
            for (a, b) in wq.iter().zip(&wc) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bounds_match_known_values() {
        let (p22, f22) = rac_bound(2, 2);
        assert!((p22 - 0.75).abs() < 1e-15);
        assert!((f22 - 5.0 / 6.0).abs() < 1e-15);
        let (p32, f32v) = rac_bound(3, 2);
        assert!((p32 - 2.0 / 3.0).abs() < 1e-15);
        assert!((f32v - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn gl2_maps_have_group_order_and_fix_zero() {
        for (d, order) in [(2usize, 6usize), (3, 48), (4, 96)] {
            let maps = gl2_label_maps(d);
            assert_eq!(maps.len(), order, "d = {d}");
            for m in &maps {
                assert_eq!(m.apply(0), 0);
            }
        }
    }

    #[test]
    fn gl2_is_transitive_on_nonzero_labels_for_prime_d() {
        for d in [2usize, 3] {
            let maps = gl2_label_maps(d);
            for target in 1..d * d {
                assert!(
                    maps.iter().any(|m| m.apply(1) == target),
                    "no map sends label 1 to {target} at d = {d}"
                );
            }
        }
        // d = 4 splits into two orbits: label (0,2) = 2 has order 2 and can
        // never reach an order-4 label like (0,1) = 1.
        let maps = gl2_label_maps(4);
        assert!(!maps.iter().any(|m| m.apply(2) == 1));
    }

    #[test]
    fn alphabet_mismatches_are_rejected() {
        let encoder = vec![5; 16]; // message outside [4]
        let decoders = vec![(0..4).collect::<Vec<_>>(); 2];
        assert!(matches!(
            ClassicalRac::new(2, 2, encoder, decoders),
            Err(Error::AlphabetMismatch(_))
        ));
    }
}
