//! Exact sparse algebra: the lattice M = Z^2, arbitrary-precision rationals,
//! the M-graded Lie algebra Q[M] with the determinant bracket
//! [z^m, z^m'] = det(m, m') z^{m+m'}, and order-truncated series.
//!
//! Series are stored sparsely, keyed by (exponent, order), and kept in
//! canonical form: no zero coefficients, no repeated keys, no term above the
//! truncation order. The order of a term is either a power of the formal
//! parameter t or a square-free monomial in square-zero variables u_1..u_N
//! (used by the perturbation engine), encoded as a bitmask.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::AlgebraError;

/// Exact rational coefficient.
pub type Rat = num_rational::BigRational;

/// Shorthand for a rational from two machine integers.
pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from a single integer.
pub fn rat_int(num: i64) -> Rat {
    Rat::from(BigInt::from(num))
}

/// An element of the exponent lattice M = Z^2.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LatticeVector {
    pub a: i64,
    pub b: i64,
}

impl LatticeVector {
    pub const fn new(a: i64, b: i64) -> Self {
        Self { a, b }
    }

    pub fn zero() -> Self {
        Self::new(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    /// det(self, other) = self.a * other.b - self.b * other.a.
    pub fn det(&self, other: &Self) -> i64 {
        self.a * other.b - self.b * other.a
    }

    pub fn is_parallel(&self, other: &Self) -> bool {
        self.det(other) == 0
    }

    /// gcd of |a| and |b|; 0 for the zero vector.
    pub fn content(&self) -> u64 {
        (self.a.unsigned_abs()).gcd(&self.b.unsigned_abs())
    }

    /// The primitive vector m0 with self = content * m0. Panics on zero.
    pub fn primitive_part(&self) -> Self {
        let g = self.content();
        assert!(g != 0, "primitive_part of the zero vector");
        Self::new(self.a / g as i64, self.b / g as i64)
    }

    pub fn is_primitive(&self) -> bool {
        self.content() == 1
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.a, -self.b)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.a + other.a, self.b + other.b)
    }

    pub fn scale(&self, k: i64) -> Self {
        Self::new(self.a * k, self.b * k)
    }

    /// True if self = k * dir for some integer k >= 1.
    pub fn is_positive_multiple_of(&self, dir: &Self) -> bool {
        if self.is_zero() || dir.is_zero() || !self.is_parallel(dir) {
            return false;
        }
        self.a * dir.a + self.b * dir.b > 0
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Bookkeeping order of a series term: a power of t, or a square-free
/// monomial in the square-zero variables u_1..u_64 stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Order {
    T(u32),
    U(u64),
}

impl Order {
    /// Total degree: the power of t, or the number of u-variables.
    pub fn degree(&self) -> u32 {
        match self {
            Order::T(k) => *k,
            Order::U(mask) => mask.count_ones(),
        }
    }

    /// Product of orders. `None` means the product vanishes (square-zero).
    pub fn combine(&self, other: &Self) -> Result<Option<Order>, AlgebraError> {
        match (self, other) {
            (Order::T(a), Order::T(b)) => Ok(Some(Order::T(a + b))),
            (Order::U(a), Order::U(b)) => {
                if a & b != 0 {
                    Ok(None)
                } else {
                    Ok(Some(Order::U(a | b)))
                }
            }
            _ => Err(AlgebraError::MixedOrderKinds),
        }
    }

    pub fn is_power(&self) -> bool {
        matches!(self, Order::T(_))
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::T(k) => write!(f, "t^{k}"),
            Order::U(mask) => {
                let vars: Vec<String> = (0..64)
                    .filter(|j| mask & (1 << j) != 0)
                    .map(|j| format!("u{}", j + 1))
                    .collect();
                write!(f, "{}", vars.join("*"))
            }
        }
    }
}

/// A finite, canonically stored sum of terms c * z^m * (order), truncated so
/// that every retained term has order degree <= `truncation`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GradedSeries {
    terms: BTreeMap<(LatticeVector, Order), Rat>,
    truncation: u32,
}

impl GradedSeries {
    /// The zero series at a given truncation.
    pub fn zero(truncation: u32) -> Self {
        Self {
            terms: BTreeMap::new(),
            truncation,
        }
    }

    /// Build from raw terms, summing duplicates and dropping zeros and terms
    /// above the truncation. Terms of order zero are rejected.
    pub fn from_terms<I>(truncation: u32, terms: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = (LatticeVector, Order, Rat)>,
    {
        if truncation == 0 {
            return Err(AlgebraError::ZeroTruncation);
        }
        let mut out = Self::zero(truncation);
        for (m, o, c) in terms {
            if o.degree() == 0 {
                return Err(AlgebraError::ZeroOrder);
            }
            out.accumulate(m, o, c);
        }
        Ok(out)
    }

    /// A single term c * z^m * order.
    pub fn monomial(
        truncation: u32,
        m: LatticeVector,
        order: Order,
        coeff: Rat,
    ) -> Result<Self, AlgebraError> {
        Self::from_terms(truncation, [(m, order, coeff)])
    }

    fn accumulate(&mut self, m: LatticeVector, o: Order, c: Rat) {
        if c.is_zero() || o.degree() > self.truncation {
            return;
        }
        let entry = self.terms.entry((m, o)).or_insert_with(Rat::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&(m, o));
        }
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LatticeVector, &Order, &Rat)> {
        self.terms.iter().map(|((m, o), c)| (m, o, c))
    }

    pub fn coeff(&self, m: &LatticeVector, o: &Order) -> Rat {
        self.terms
            .get(&(*m, *o))
            .cloned()
            .unwrap_or_else(Rat::zero)
    }

    /// Sum of coefficients of z^m over all orders (evaluation at t = 1).
    pub fn coeff_total(&self, m: &LatticeVector) -> Rat {
        let mut acc = Rat::zero();
        for ((mm, _), c) in &self.terms {
            if mm == m {
                acc += c.clone();
            }
        }
        acc
    }

    /// Smallest order degree among retained terms.
    pub fn min_order(&self) -> Option<u32> {
        self.terms.keys().map(|(_, o)| o.degree()).min()
    }

    fn check_same_truncation(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.truncation != other.truncation {
            return Err(AlgebraError::TruncationMismatch(
                self.truncation,
                other.truncation,
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_truncation(other)?;
        let mut out = self.clone();
        for ((m, o), c) in &other.terms {
            out.accumulate(*m, *o, c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -c.clone();
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> Self {
        if k.is_zero() {
            return Self::zero(self.truncation);
        }
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= k.clone();
        }
        out
    }

    /// Determinant bracket, extended bilinearly. The order of a product term
    /// is the product of the factor orders; terms above the truncation (or
    /// killed by square-zero variables) are dropped.
    pub fn bracket(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_truncation(other)?;
        let mut out = Self::zero(self.truncation);
        for ((m1, o1), c1) in &self.terms {
            for ((m2, o2), c2) in &other.terms {
                let d = m1.det(m2);
                if d == 0 {
                    continue;
                }
                if o1.degree() + o2.degree() > self.truncation {
                    continue;
                }
                if let Some(o) = o1.combine(o2)? {
                    out.accumulate(m1.add(m2), o, c1 * c2 * rat_int(d));
                }
            }
        }
        Ok(out)
    }

    /// Commutative product z^m z^m' = z^{m+m'} (the underlying Poisson
    /// algebra product); used by the flow representation.
    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_same_truncation(other)?;
        let mut out = Self::zero(self.truncation);
        for ((m1, o1), c1) in &self.terms {
            for ((m2, o2), c2) in &other.terms {
                if o1.degree() + o2.degree() > self.truncation {
                    continue;
                }
                if let Some(o) = o1.combine(o2)? {
                    out.accumulate(m1.add(m2), o, c1 * c2);
                }
            }
        }
        Ok(out)
    }

    /// (1 + self)^e - 1 for an integer exponent e (possibly negative),
    /// truncated. Requires min_order >= 1, which holds for every stored
    /// series, so the binomial sum is finite.
    pub fn one_plus_pow_minus_one(&self, e: i64) -> Result<Self, AlgebraError> {
        let mut out = Self::zero(self.truncation);
        if e == 0 || self.is_zero() {
            return Ok(out);
        }
        let mut power = self.clone(); // self^j
        let mut coeff = Rat::one(); // binom(e, j) accumulates
        for j in 1..=self.truncation as i64 {
            coeff *= Rat::new(BigInt::from(e - j + 1), BigInt::from(j));
            if coeff.is_zero() {
                break;
            }
            out = out.add(&power.scale(&coeff))?;
            if j < self.truncation as i64 {
                power = power.mul(self)?;
                if power.is_zero() {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Drop all terms of order degree > n and set the truncation to n.
    pub fn truncate(&self, n: u32) -> Result<Self, AlgebraError> {
        if n == 0 {
            return Err(AlgebraError::ZeroTruncation);
        }
        let mut out = Self::zero(n);
        for ((m, o), c) in &self.terms {
            if o.degree() <= n {
                out.accumulate(*m, *o, c.clone());
            }
        }
        Ok(out)
    }

    /// Sub-series of terms whose order degree equals exactly k.
    pub fn order_part(&self, k: u32) -> Self {
        let mut out = Self::zero(self.truncation);
        for ((m, o), c) in &self.terms {
            if o.degree() == k {
                out.accumulate(*m, *o, c.clone());
            }
        }
        out
    }

    /// Distinct primitive directions of the exponents, sorted.
    pub fn support_directions(&self) -> Result<Vec<LatticeVector>, AlgebraError> {
        let mut dirs = std::collections::BTreeSet::new();
        for ((m, _), _) in &self.terms {
            if m.is_zero() {
                return Err(AlgebraError::ZeroExponent);
            }
            dirs.insert(m.primitive_part());
        }
        Ok(dirs.into_iter().collect())
    }

    /// Sub-series of terms with exponent a positive multiple of m0.
    pub fn component_along(&self, m0: &LatticeVector) -> Self {
        let mut out = Self::zero(self.truncation);
        for ((m, o), c) in &self.terms {
            if m.is_positive_multiple_of(m0) {
                out.accumulate(*m, *o, c.clone());
            }
        }
        out
    }

    /// Substitute t^k -> (u_1 + ... + u_n)^k in the square-zero ring
    /// (u_j^2 = 0), i.e. t^k -> k! * sum over k-subsets S of u_S, and split
    /// the result into one series per square-free monomial.
    pub fn split_monomial_components(&self, n: u32) -> Result<Vec<Self>, AlgebraError> {
        if n > 64 {
            return Err(AlgebraError::TooManyVariables(n));
        }
        let mut by_mask: BTreeMap<u64, Self> = BTreeMap::new();
        for ((m, o), c) in &self.terms {
            let k = match o {
                Order::T(k) => *k,
                Order::U(_) => return Err(AlgebraError::ExpectedPowerOrders),
            };
            if k > n {
                return Err(AlgebraError::SplitOrderExceeded { order: k, bound: n });
            }
            let factorial: Rat = (1..=k as i64).map(rat_int).product();
            for mask in subsets_of_size(n, k) {
                by_mask
                    .entry(mask)
                    .or_insert_with(|| Self::zero(self.truncation))
                    .accumulate(*m, Order::U(mask), c.clone() * factorial.clone());
            }
        }
        Ok(by_mask.into_values().collect())
    }

    /// Inverse of the square-zero substitution on its image: each class of
    /// monomials u_S with |S| = k is averaged and divided by k!, recovering
    /// the t-power series. This is the symmetrized retraction, so summing the
    /// split components and merging is the identity.
    pub fn merge_square_zero(&self, n: u32) -> Result<Self, AlgebraError> {
        let mut grouped: BTreeMap<(LatticeVector, u32), Rat> = BTreeMap::new();
        for ((m, o), c) in &self.terms {
            let k = match o {
                Order::T(_) => return Err(AlgebraError::ExpectedSquareZeroOrders),
                Order::U(mask) => mask.count_ones(),
            };
            *grouped.entry((*m, k)).or_insert_with(Rat::zero) += c.clone();
        }
        let mut out = Self::zero(self.truncation);
        for ((m, k), total) in grouped {
            let factorial: Rat = (1..=k as i64).map(rat_int).product();
            let classes = binomial(n as u64, k as u64);
            out.accumulate(m, Order::T(k), total / (factorial * classes));
        }
        Ok(out)
    }

    /// Canonical text form: "c * z^(a,b) * t^o + ...", in key order.
    pub fn to_text(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        self.iter()
            .map(|(m, o, c)| format!("{} * z^{} * {}", format_rat(c), m, o))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

impl fmt::Display for GradedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// "num/den" in lowest terms, denominator always present and positive.
pub fn format_rat(x: &Rat) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parse "num/den" or a bare integer.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = n.parse().ok()?;
    let den: BigInt = d.parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(Rat::new(num, den))
}

fn binomial(n: u64, k: u64) -> Rat {
    if k > n {
        return Rat::zero();
    }
    let mut acc = Rat::one();
    for j in 0..k {
        acc *= Rat::new(BigInt::from(n - j), BigInt::from(j + 1));
    }
    acc
}

/// All bitmasks with exactly k of the low n bits set, ascending.
fn subsets_of_size(n: u32, k: u32) -> Vec<u64> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    if k == 0 {
        out.push(0);
        return out;
    }
    let limit: u64 = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    // Gosper's hack: next larger integer with the same popcount.
    let mut v: u64 = (1u64 << k) - 1;
    while v <= limit {
        out.push(v);
        let c = v & v.wrapping_neg();
        let (r, overflow) = v.overflowing_add(c);
        if overflow {
            break;
        }
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(a: i64, b: i64) -> LatticeVector {
        LatticeVector::new(a, b)
    }

    fn term(a: i64, b: i64, k: u32, num: i64, den: i64) -> (LatticeVector, Order, Rat) {
        (m(a, b), Order::T(k), rat(num, den))
    }

    #[test]
    fn bracket_basic() {
        // [z^(1,0) t, z^(0,1) t] = z^(1,1) t^2
        let f = GradedSeries::from_terms(4, [term(1, 0, 1, 1, 1)]).unwrap();
        let g = GradedSeries::from_terms(4, [term(0, 1, 1, 1, 1)]).unwrap();
        let fg = f.bracket(&g).unwrap();
        assert_eq!(fg.coeff(&m(1, 1), &Order::T(2)), rat(1, 1));
        assert_eq!(fg.num_terms(), 1);
    }

    #[test]
    fn bracket_parallel_vanishes() {
        // [z^(2,1) t, z^(4,2) t] = 0
        let f = GradedSeries::from_terms(4, [term(2, 1, 1, 1, 1)]).unwrap();
        let g = GradedSeries::from_terms(4, [term(4, 2, 1, 1, 1)]).unwrap();
        assert!(f.bracket(&g).unwrap().is_zero());
    }

    #[test]
    fn bracket_negative_det() {
        // [z^(1,2) t, z^(3,1) t] = -5 z^(4,3) t^2
        let f = GradedSeries::from_terms(4, [term(1, 2, 1, 1, 1)]).unwrap();
        let g = GradedSeries::from_terms(4, [term(3, 1, 1, 1, 1)]).unwrap();
        let fg = f.bracket(&g).unwrap();
        assert_eq!(fg.coeff(&m(4, 3), &Order::T(2)), rat(-5, 1));
    }

    #[test]
    fn bracket_truncation_mismatch() {
        let f = GradedSeries::zero(3);
        let g = GradedSeries::zero(4);
        assert_eq!(
            f.bracket(&g).unwrap_err(),
            AlgebraError::TruncationMismatch(3, 4)
        );
    }

    #[test]
    fn truncate_drops_high_orders() {
        let f =
            GradedSeries::from_terms(2, [term(1, 0, 1, 1, 1), term(2, 0, 2, 1, 1)]).unwrap();
        let t = f.truncate(1).unwrap();
        assert_eq!(t.num_terms(), 1);
        assert_eq!(t.coeff(&m(1, 0), &Order::T(1)), rat(1, 1));
        // identity case
        let u = f.truncate(2).unwrap();
        assert_eq!(u, f);
    }

    #[test]
    fn truncate_h1_series() {
        // H1 to order 5, truncated to 3, keeps (-1)^{k-1}/k^2 for k <= 3.
        let h1 = GradedSeries::from_terms(
            5,
            (1..=5).map(|k| {
                (
                    m(k, 0),
                    Order::T(k as u32),
                    rat(if k % 2 == 1 { 1 } else { -1 }, k * k),
                )
            }),
        )
        .unwrap();
        let t = h1.truncate(3).unwrap();
        assert_eq!(t.num_terms(), 3);
        assert_eq!(t.coeff(&m(2, 0), &Order::T(2)), rat(-1, 4));
        assert_eq!(t.coeff(&m(3, 0), &Order::T(3)), rat(1, 9));
    }

    #[test]
    fn split_linear_term() {
        let f = GradedSeries::from_terms(2, [term(1, 0, 1, 1, 1)]).unwrap();
        let parts = f.split_monomial_components(2).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].coeff(&m(1, 0), &Order::U(0b01)), rat(1, 1));
        assert_eq!(parts[1].coeff(&m(1, 0), &Order::U(0b10)), rat(1, 1));
    }

    #[test]
    fn split_square_term() {
        let f = GradedSeries::from_terms(2, [term(2, 0, 2, 1, 1)]).unwrap();
        let parts = f.split_monomial_components(2).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].coeff(&m(2, 0), &Order::U(0b11)), rat(2, 1));
    }

    #[test]
    fn split_order_exceeds() {
        let f = GradedSeries::from_terms(3, [term(1, 0, 3, 1, 1)]).unwrap();
        assert!(matches!(
            f.split_monomial_components(2).unwrap_err(),
            AlgebraError::SplitOrderExceeded { order: 3, bound: 2 }
        ));
    }

    #[test]
    fn split_merge_roundtrip() {
        let f = GradedSeries::from_terms(
            3,
            [
                term(1, 0, 1, 2, 3),
                term(2, 0, 2, -1, 4),
                term(3, 0, 3, 5, 7),
                term(0, 1, 2, 1, 1),
            ],
        )
        .unwrap();
        let parts = f.split_monomial_components(3).unwrap();
        let mut total = GradedSeries::zero(3);
        for p in &parts {
            total = total.add(p).unwrap();
        }
        assert_eq!(total.merge_square_zero(3).unwrap(), f);
    }

    #[test]
    fn square_zero_bracket_annihilates() {
        let f = GradedSeries::monomial(4, m(1, 0), Order::U(0b01), rat(1, 1)).unwrap();
        let g = GradedSeries::monomial(4, m(0, 1), Order::U(0b01), rat(1, 1)).unwrap();
        assert!(f.bracket(&g).unwrap().is_zero());
        let h = GradedSeries::monomial(4, m(0, 1), Order::U(0b10), rat(1, 1)).unwrap();
        let fh = f.bracket(&h).unwrap();
        assert_eq!(fh.coeff(&m(1, 1), &Order::U(0b11)), rat(1, 1));
    }

    #[test]
    fn grading_of_bracket() {
        let f = GradedSeries::from_terms(6, [term(1, 0, 1, 1, 2), term(2, 1, 2, 3, 1)]).unwrap();
        let g = GradedSeries::from_terms(6, [term(0, 1, 1, 5, 1), term(1, -1, 3, -2, 7)]).unwrap();
        let fg = f.bracket(&g).unwrap();
        for (mm, o, _) in fg.iter() {
            // every exponent is a sum of one exponent of f and one of g,
            // with the matching order sum
            let mut found = false;
            for (m1, o1, _) in f.iter() {
                for (m2, o2, _) in g.iter() {
                    if m1.add(m2) == *mm && o1.degree() + o2.degree() == o.degree() {
                        found = true;
                    }
                }
            }
            assert!(found);
        }
    }

    #[test]
    fn one_plus_pow() {
        // (1+p)^2 - 1 = 2p + p^2, with p = z^(1,0) t
        let p = GradedSeries::from_terms(3, [term(1, 0, 1, 1, 1)]).unwrap();
        let q = p.one_plus_pow_minus_one(2).unwrap();
        assert_eq!(q.coeff(&m(1, 0), &Order::T(1)), rat(2, 1));
        assert_eq!(q.coeff(&m(2, 0), &Order::T(2)), rat(1, 1));
        // (1+p)^{-1} - 1 = -p + p^2 - p^3
        let r = p.one_plus_pow_minus_one(-1).unwrap();
        assert_eq!(r.coeff(&m(1, 0), &Order::T(1)), rat(-1, 1));
        assert_eq!(r.coeff(&m(2, 0), &Order::T(2)), rat(1, 1));
        assert_eq!(r.coeff(&m(3, 0), &Order::T(3)), rat(-1, 1));
    }

    #[test]
    fn rat_text_roundtrip() {
        let x = rat(-21, 6);
        let s = format_rat(&x);
        assert_eq!(s, "-7/2");
        assert_eq!(parse_rat(&s).unwrap(), x);
        assert_eq!(parse_rat("5").unwrap(), rat(5, 1));
        assert!(parse_rat("1/0").is_none());
    }
}
