//! No-signaling boxes for random access coding.
//!
//! A box is a bipartite conditional distribution `p(a, b | x, y)` with
//! `a, b` ranging over `[d^2]`, `x` over `[d^2]^n` (flattened row-major,
//! first slot slowest) and `y` over `[n]`.  Entries are exact rationals so
//! the no-signaling and normalisation invariants hold with zero residual,
//! not merely to floating-point tolerance.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Largest number of table entries we are willing to materialise.
const MAX_BOX_ENTRIES: usize = 4_000_000;

/// Exact probability used throughout the box layer.
pub type Rational = Ratio<u64>;

/// A no-signaling box over `n` slots of `d^2`-valued data.
///
/// Storage is dense: entry `(a, b, x, y)` lives at
/// `((y * x_count + x) * k + a) * k + b` with `k = d^2`.
#[derive(Clone, Debug)]
pub struct NsBox {
    n: usize,
    d: usize,
    table: Vec<Rational>,
}

impl NsBox {
    /// Validates and wraps a dense table laid out as documented on the type.
    ///
    /// Checks: non-negativity is structural (`Ratio<u64>`), normalisation of
    /// every conditional `p(·, · | x, y)`, and both no-signaling constraints,
    /// all by exact rational comparison.
    pub fn new(n: usize, d: usize, table: Vec<Rational>) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::invalid("NsBox", "need n >= 1 and d >= 2"));
        }
        let k = d * d;
        let x_count = checked_x_count(n, d)?;
        let expected = x_count
            .checked_mul(k * k)
            .and_then(|t| t.checked_mul(n))
            .ok_or_else(|| Error::capacity("no-signaling box table size overflows"))?;
        if expected > MAX_BOX_ENTRIES {
            return Err(Error::capacity(format!(
                "no-signaling box with n={n}, d={d} needs {expected} entries (cap {MAX_BOX_ENTRIES})"
            )));
        }
        if table.len() != expected {
            return Err(Error::invalid(
                "NsBox",
                format!("table has {} entries, expected {expected}", table.len()),
            ));
        }
        let boxed = Self { n, d, table };
        boxed.check_normalised()?;
        boxed.check_no_signaling()?;
        Ok(boxed)
    }

    /// Builds a box by evaluating `f(a, b, x, y)` over the whole index range.
    pub fn from_fn(
        n: usize,
        d: usize,
        mut f: impl FnMut(usize, usize, &[usize], usize) -> Rational,
    ) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::invalid("NsBox", "need n >= 1 and d >= 2"));
        }
        let k = d * d;
        let x_count = checked_x_count(n, d)?;
        let mut table = Vec::with_capacity(x_count * k * k * n);
        let mut digits = vec![0usize; n];
        for y in 0..n {
            for x in 0..x_count {
                unflatten_input(x, n, k, &mut digits);
                for a in 0..k {
                    for b in 0..k {
                        table.push(f(a, b, &digits, y));
                    }
                }
            }
        }
        Self::new(n, d, table)
    }

    /// Number of data slots `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Local Hilbert-space dimension `d`; outcomes range over `d^2`.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Outcome alphabet size `d^2`.
    pub fn outcome_count(&self) -> usize {
        self.d * self.d
    }

    /// Number of flattened Alice inputs, `d^(2n)`.
    pub fn x_count(&self) -> usize {
        self.outcome_count().pow(self.n as u32)
    }

    /// Exact probability `p(a, b | x, y)` with `x` flattened.
    pub fn p(&self, a: usize, b: usize, x: usize, y: usize) -> Rational {
        let k = self.outcome_count();
        self.table[((y * self.x_count() + x) * k + a) * k + b]
    }

    /// Alice's marginal `p_A(a | x)`; no-signaling makes it `y`-independent.
    pub fn marginal_a(&self, a: usize, x: usize) -> Rational {
        let k = self.outcome_count();
        (0..k).map(|b| self.p(a, b, x, 0)).sum()
    }

    /// Bob's marginal `p_B(b | y)`; no-signaling makes it `x`-independent.
    pub fn marginal_b(&self, b: usize, y: usize) -> Rational {
        let k = self.outcome_count();
        (0..k).map(|a| self.p(a, b, 0, y)).sum()
    }

    /// The Bell parameter: the average over `(x, y)` of the probability that
    /// `a + b = x_y (mod d^2)`.  Equals the success rate of the random access
    /// code that sends `a` and guesses `a + b`.
    pub fn bell_parameter(&self) -> Rational {
        let k = self.outcome_count();
        let x_count = self.x_count();
        let mut digits = vec![0usize; self.n];
        let mut total = Rational::new(0, 1);
        for y in 0..self.n {
            for x in 0..x_count {
                unflatten_input(x, self.n, k, &mut digits);
                let target = digits[y];
                for a in 0..k {
                    let b = (target + k - a % k) % k;
                    total += self.p(a, b, x, y);
                }
            }
        }
        total / Rational::new((self.n * x_count) as u64, 1)
    }

    /// Writes the table as CSV with header `a,b,x,y,p`, probabilities as
    /// floats.  `x` is the flattened input label.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "a,b,x,y,p")?;
        let k = self.outcome_count();
        for y in 0..self.n {
            for x in 0..self.x_count() {
                for a in 0..k {
                    for b in 0..k {
                        let p = self.p(a, b, x, y);
                        let v = *p.numer() as f64 / *p.denom() as f64;
                        writeln!(w, "{a},{b},{x},{y},{v:.12e}")?;
                    }
                }
            }
        }
        Ok(())
    }

    fn check_normalised(&self) -> Result<()> {
        let k = self.outcome_count();
        let one = Rational::new(1, 1);
        for y in 0..self.n {
            for x in 0..self.x_count() {
                let sum: Rational = (0..k)
                    .flat_map(|a| (0..k).map(move |b| (a, b)))
                    .map(|(a, b)| self.p(a, b, x, y))
                    .sum();
                if sum != one {
                    return Err(Error::invalid(
                        "NsBox",
                        format!("p(.,.|x={x},y={y}) sums to {sum}, not 1"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_no_signaling(&self) -> Result<()> {
        let k = self.outcome_count();
        // Alice's marginal must not depend on y.
        for x in 0..self.x_count() {
            for a in 0..k {
                let m0: Rational = (0..k).map(|b| self.p(a, b, x, 0)).sum();
                for y in 1..self.n {
                    let my: Rational = (0..k).map(|b| self.p(a, b, x, y)).sum();
                    if my != m0 {
                        return Err(Error::invalid(
                            "NsBox",
                            format!("p_A(a={a}|x={x}) depends on y (signaling to Alice)"),
                        ));
                    }
                }
            }
        }
        // Bob's marginal must not depend on x.
        for y in 0..self.n {
            for b in 0..k {
                let m0: Rational = (0..k).map(|a| self.p(a, b, 0, y)).sum();
                for x in 1..self.x_count() {
                    let mx: Rational = (0..k).map(|a| self.p(a, b, x, y)).sum();
                    if mx != m0 {
                        return Err(Error::invalid(
                            "NsBox",
                            format!("p_B(b={b}|y={y}) depends on x (signaling to Bob)"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The canonical perfect box: `p(a, b | x, y) = 1/d^2` exactly when
/// `a + b = x_y (mod d^2)` and zero otherwise.  Non-negative, normalised,
/// no-signaling (both marginals uniform `1/d^2`), and its Bell parameter
/// is exactly 1.
pub fn ns_box(n: usize, d: usize) -> Result<NsBox> {
    let k = d * d;
    NsBox::from_fn(n, d, |a, b, x, y| {
        if (a + b) % k == x[y] {
            Rational::new(1, k as u64)
        } else {
            Rational::new(0, 1)
        }
    })
}

/// The uniformly random box `p = 1/d^4`: no-signaling, carries no
/// correlation at all, so the derived code guesses blindly.
pub fn uniform_box(n: usize, d: usize) -> Result<NsBox> {
    let k = (d * d) as u64;
    NsBox::from_fn(n, d, |_, _, _, _| Rational::new(1, k * k))
}

/// A local deterministic box: `a = f(x)`, `b = g(y)` with certainty.
/// Trivially no-signaling; useful as a classical baseline fixture.
pub fn local_deterministic_box(
    n: usize,
    d: usize,
    f: impl Fn(&[usize]) -> usize,
    g: impl Fn(usize) -> usize,
) -> Result<NsBox> {
    NsBox::from_fn(n, d, |a, b, x, y| {
        if a == f(x) && b == g(y) {
            Rational::new(1, 1)
        } else {
            Rational::new(0, 1)
        }
    })
}

/// Splits a flattened input label into its `n` digits base `k = d^2`,
/// first slot slowest (row-major).
pub(crate) fn unflatten_input(x: usize, n: usize, k: usize, digits: &mut [usize]) {
    let mut rest = x;
    for slot in (0..n).rev() {
        digits[slot] = rest % k;
        rest /= k;
    }
    debug_assert_eq!(rest, 0);
    debug_assert_eq!(digits.len(), n);
}

/// Flattens `n` digits base `k = d^2` into a single label (row-major).
pub(crate) fn flatten_input(digits: &[usize], k: usize) -> usize {
    digits.iter().fold(0, |acc, &t| acc * k + t)
}

fn checked_x_count(n: usize, d: usize) -> Result<usize> {
    let k = d * d;
    let mut count = 1usize;
    for _ in 0..n {
        count = count
            .checked_mul(k)
            .ok_or_else(|| Error::capacity("input label space d^(2n) overflows"))?;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_box_2_2_marginals_and_bell() {
        let b = ns_box(2, 2).unwrap();
        let quarter = Rational::new(1, 4);
        for x in 0..b.x_count() {
            for a in 0..4 {
                assert_eq!(b.marginal_a(a, x), quarter);
            }
        }
        for y in 0..2 {
            for out in 0..4 {
                assert_eq!(b.marginal_b(out, y), quarter);
            }
        }
        assert_eq!(b.bell_parameter(), Rational::new(1, 1));
    }

    #[test]
    fn canonical_box_3_2_and_2_3_are_perfect() {
        let b32 = ns_box(3, 2).unwrap();
        assert_eq!(b32.bell_parameter(), Rational::new(1, 1));
        let b23 = ns_box(2, 3).unwrap();
        assert_eq!(b23.bell_parameter(), Rational::new(1, 1));
        let ninth = Rational::new(1, 9);
        assert_eq!(b23.marginal_a(5, 17), ninth);
        assert_eq!(b23.marginal_b(7, 1), ninth);
    }

    #[test]
    fn uniform_box_bell_parameter_is_guessing_rate() {
        let b = uniform_box(2, 2).unwrap();
        assert_eq!(b.bell_parameter(), Rational::new(1, 4));
    }

    #[test]
    fn local_deterministic_box_validates_and_underperforms() {
        let b = local_deterministic_box(2, 2, |x| x[0], |_| 0).unwrap();
        let p = b.bell_parameter();
        // Guess a + b = x_0: right half the time on y = 0, a quarter on y = 1.
        assert_eq!(p, Rational::new(5, 8));
        assert!(p < Rational::new(1, 1));
    }

    #[test]
    fn signaling_table_is_rejected() {
        // Alice's marginal depends on y: p(a,b|x,0) deterministic on a=0,
        // p(a,b|x,1) deterministic on a=1.
        let res = NsBox::from_fn(2, 2, |a, b, _, y| {
            if b == 0 && a == y {
                Rational::new(1, 1)
            } else {
                Rational::new(0, 1)
            }
        });
        assert!(res.is_err());
    }

    #[test]
    fn oversize_box_is_rejected() {
        assert!(matches!(
            ns_box(4, 4),
            Err(Error::CapacityExceeded(_))
        ));
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let b = ns_box(1, 2).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("a,b,x,y,p"));
        assert_eq!(text.lines().count(), 1 + 4 * 4 * 4);
        assert!(text.contains("2.5e-1") || text.contains("0.25") || text.contains("2.500000000000e-1"));
    }

    #[test]
    fn flatten_round_trip() {
        let mut digits = vec![0usize; 3];
        for x in 0..64 {
            unflatten_input(x, 3, 4, &mut digits);
            assert_eq!(flatten_input(&digits, 4), x);
        }
    }
}
