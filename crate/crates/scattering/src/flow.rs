//! The nilpotent group G = exp(g (x) m_R): exponentials, logarithms,
//! composition, and path-ordered products of ray automorphisms.
//!
//! A group element is stored through its logarithm, a [`GradedSeries`] with
//! every term of order >= 1. Composition is computed through the faithful
//! Hamiltonian-flow action on the function algebra: the product of two flows
//! is evaluated on the generators x = z^(1,0), y = z^(0,1), the operator
//! logarithm is taken as a fixed-point expansion truncated at the working
//! order, and the result is pulled back to a Lie-algebra logarithm. The
//! adjoint action ([`GroupElement::act`]) exposes the same flow directly and
//! is used by tests to cross-check composition.

use std::collections::BTreeMap;

use num_traits::One;

use crate::algebra::{rat_int, GradedSeries, LatticeVector, Order, Rat};
use crate::error::AlgebraError;

/// Sign of a ray factor in a path-ordered product: +1 outgoing, -1 ingoing.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Epsilon {
    Outgoing,
    Ingoing,
}

/// An element exp(log) of the nilpotent group.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupElement {
    log: GradedSeries,
}

impl GroupElement {
    pub fn identity(truncation: u32) -> Self {
        Self {
            log: GradedSeries::zero(truncation),
        }
    }

    /// exp of a Lie algebra element; every term must have order >= 1,
    /// which `GradedSeries` guarantees by construction.
    pub fn exp(log: GradedSeries) -> Self {
        Self { log }
    }

    pub fn log(&self) -> &GradedSeries {
        &self.log
    }

    pub fn truncation(&self) -> u32 {
        self.log.truncation()
    }

    pub fn is_identity(&self) -> bool {
        self.log.is_zero()
    }

    pub fn inverse(&self) -> Self {
        Self {
            log: self.log.neg(),
        }
    }

    /// Adjoint (flow) action exp(ad_log) applied to a series: the sum
    /// sum_j ad^j(f)/j!, finite because ad raises the order.
    pub fn act(&self, f: &GradedSeries) -> Result<GradedSeries, AlgebraError> {
        let mut acc = f.clone();
        let mut term = f.clone();
        let mut factorial = Rat::one();
        for j in 1..=self.truncation() {
            term = self.log.bracket(&term)?;
            if term.is_zero() {
                break;
            }
            factorial *= rat_int(j as i64);
            acc = acc.add(&term.scale(&(Rat::one() / factorial.clone())))?;
        }
        Ok(acc)
    }

    /// Group product g1 * g2, acting as g1 after g2 under [`Self::act`].
    pub fn compose(&self, other: &Self) -> Result<Self, AlgebraError> {
        if self.truncation() != other.truncation() {
            return Err(AlgebraError::TruncationMismatch(
                self.truncation(),
                other.truncation(),
            ));
        }
        if self.is_identity() {
            return Ok(other.clone());
        }
        if other.is_identity() {
            return Ok(self.clone());
        }
        let n = self.truncation();
        let f1 = FlowImages::of(&self.log)?;
        let f2 = FlowImages::of(&other.log)?;
        let composed = f1.compose(&f2)?;
        let log = composed.into_log(n)?;
        Ok(Self { log })
    }

    /// Decompose log(g) into its components along distinct primitive
    /// exponent directions; the components sum back to log(g).
    pub fn graded_decompose(&self) -> Result<Vec<(LatticeVector, GradedSeries)>, AlgebraError> {
        let dirs = self.log.support_directions()?;
        let mut out = Vec::with_capacity(dirs.len());
        for d in dirs {
            out.push((d, self.log.component_along(&d)));
        }
        Ok(out)
    }
}

/// A flow automorphism recorded through its images of the two lattice
/// generators: theta(x) = x (1 + px), theta(y) = y (1 + py).
struct FlowImages {
    px: GradedSeries,
    py: GradedSeries,
}

impl FlowImages {
    /// Images of x and y under exp(D_H) for the Hamiltonian H.
    /// D_H(z^m') = [H, z^m'] and the flow of a monomial stays a monomial
    /// multiple, so theta(x) x^{-1} - 1 has all orders >= 1.
    fn of(h: &GradedSeries) -> Result<Self, AlgebraError> {
        let n = h.truncation();
        let x = LatticeVector::new(1, 0);
        let y = LatticeVector::new(0, 1);
        Ok(Self {
            px: flow_generator_image(h, &x, n)?,
            py: flow_generator_image(h, &y, n)?,
        })
    }

    /// theta applied to an arbitrary series: z^m maps to z^m (1+px)^a (1+py)^b.
    fn apply(&self, f: &GradedSeries) -> Result<GradedSeries, AlgebraError> {
        let n = f.truncation();
        let mut out = f.clone();
        // cache (1+px)^a (1+py)^b - 1 per exponent
        let mut cache: BTreeMap<LatticeVector, GradedSeries> = BTreeMap::new();
        for (m, o, c) in f.iter() {
            let head = o.degree();
            if head >= n {
                continue; // no room for corrections
            }
            let b = match cache.get(m) {
                Some(b) => b.clone(),
                None => {
                    let bx = self.px.one_plus_pow_minus_one(m.a)?;
                    let by = self.py.one_plus_pow_minus_one(m.b)?;
                    // (1+bx)(1+by) - 1 = bx + by + bx*by
                    let b = bx.add(&by)?.add(&bx.mul(&by)?)?;
                    cache.insert(*m, b.clone());
                    b
                }
            };
            if b.is_zero() {
                continue;
            }
            let base = GradedSeries::monomial(n, *m, *o, c.clone())?;
            out = out.add(&base.mul(&b)?)?;
        }
        Ok(out)
    }

    /// Composite flow: (self o other), i.e. apply other first.
    fn compose(&self, other: &Self) -> Result<Self, AlgebraError> {
        // theta12(x) x^{-1} = (1 + p1x) * theta1(1 + p2x) x-normalized
        let px = compose_generator(&self.px, self, &other.px)?;
        let py = compose_generator(&self.py, self, &other.py)?;
        Ok(Self { px, py })
    }

    /// Recover the Lie-algebra logarithm from the generator images.
    fn into_log(self, n: u32) -> Result<GradedSeries, AlgebraError> {
        // Operator logarithm on each generator, normalized by the generator:
        // L(x) x^{-1} = sum_j (-1)^{j+1}/j v_j with v_1 = px and
        // v_{j+1} = (1+px) theta(v_j) - v_j.
        let lx = self.generator_log(&self.px)?;
        let ly = self.generator_log(&self.py)?;
        // L = D_H with H = sum c_{m,o} z^m t^o:
        //   L(x) x^{-1} = sum c * det(m, (1,0)) z^m = sum -c m.b z^m
        //   L(y) y^{-1} = sum c * det(m, (0,1)) z^m = sum  c m.a z^m
        let mut h = GradedSeries::zero(n);
        let mut seen: BTreeMap<(LatticeVector, Order), Rat> = BTreeMap::new();
        for (m, o, c) in lx.iter() {
            if m.is_zero() {
                return Err(AlgebraError::Internal(
                    "flow logarithm has a central term".into(),
                ));
            }
            if m.b != 0 {
                seen.insert((*m, *o), -c.clone() / rat_int(m.b));
            }
        }
        for (m, o, c) in ly.iter() {
            if m.is_zero() {
                return Err(AlgebraError::Internal(
                    "flow logarithm has a central term".into(),
                ));
            }
            if m.a != 0 {
                let v = c.clone() / rat_int(m.a);
                if let Some(prev) = seen.get(&(*m, *o)) {
                    if *prev != v {
                        return Err(AlgebraError::Internal(format!(
                            "inconsistent logarithm recovery at z^{m} {o}"
                        )));
                    }
                } else {
                    seen.insert((*m, *o), v);
                }
            }
        }
        for ((m, o), c) in seen {
            h = h.add(&GradedSeries::monomial(n, m, o, c)?)?;
        }
        Ok(h)
    }

    fn generator_log(&self, p: &GradedSeries) -> Result<GradedSeries, AlgebraError> {
        let n = p.truncation();
        let mut acc = GradedSeries::zero(n);
        let mut v = p.clone();
        let mut j: i64 = 1;
        loop {
            let sign = if j % 2 == 1 {
                Rat::one()
            } else {
                -Rat::one()
            };
            acc = acc.add(&v.scale(&(sign / rat_int(j))))?;
            if j as u32 >= n {
                break;
            }
            // v_{j+1} = (1 + p) * theta(v_j) - v_j
            let tv = self.apply(&v)?;
            let next = tv.add(&p.mul(&tv)?)?.sub(&v)?;
            if next.is_zero() {
                break;
            }
            v = next;
            j += 1;
        }
        Ok(acc)
    }
}

/// theta12 generator image: p12 with 1 + p12 = (1 + p1) * theta1(1 + p2).
fn compose_generator(
    p1: &GradedSeries,
    theta1: &FlowImages,
    p2: &GradedSeries,
) -> Result<GradedSeries, AlgebraError> {
    let t2 = theta1.apply(p2)?;
    // (1+p1)(1+t2) - 1 = p1 + t2 + p1*t2
    p1.add(&t2)?.add(&p1.mul(&t2)?)
}

/// theta_H(z^g) z^{-g} - 1 for a generator exponent g, via the exponential
/// of the bracket derivation.
fn flow_generator_image(
    h: &GradedSeries,
    g: &LatticeVector,
    n: u32,
) -> Result<GradedSeries, AlgebraError> {
    // The generator z^g is tracked implicitly through the normalized series
    // f = theta(z^g) z^{-g} - 1: with hstar = sum c det(m, g) z^m one has
    // D_H(z^g) z^{-g} = hstar and D_H(z^g f) z^{-g} = hstar (1 + f) + [H, f],
    // since the bracket is a derivation of the monomial product.
    let mut hstar = GradedSeries::zero(n);
    for (m, o, c) in h.iter() {
        let d = m.det(g);
        if d != 0 {
            hstar = hstar.add(&GradedSeries::monomial(n, *m, *o, c.clone() * rat_int(d))?)?;
        }
    }
    // exp(D_H)(z^g) z^{-g} - 1 = sum_{j>=1} w_j / j! with
    // w_1 = hstar, w_{j+1} = hstar * w_j + [H, w_j].
    let mut acc = GradedSeries::zero(n);
    let mut w = hstar.clone();
    let mut factorial = Rat::one();
    for j in 1..=n {
        factorial *= rat_int(j as i64);
        if w.is_zero() {
            break;
        }
        acc = acc.add(&w.scale(&(Rat::one() / factorial.clone())))?;
        if j < n {
            w = hstar.mul(&w)?.add(&h.bracket(&w)?)?;
        }
    }
    Ok(acc)
}

/// Path-ordered product over ray factors listed in traversal order: the
/// first-visited ray is the rightmost factor of the product.
pub fn path_ordered_product(
    truncation: u32,
    factors: &[(GradedSeries, Epsilon)],
) -> Result<GroupElement, AlgebraError> {
    let mut acc = GroupElement::identity(truncation);
    for (h, eps) in factors {
        let g = match eps {
            Epsilon::Outgoing => GroupElement::exp(h.clone()),
            Epsilon::Ingoing => GroupElement::exp(h.neg()),
        };
        acc = g.compose(&acc)?;
    }
    Ok(acc)
}
