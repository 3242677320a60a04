//! Local scattering diagrams: rays through a single point, the anticlockwise
//! path-ordered product, consistency, and the order-by-order consistent
//! completion.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{GradedSeries, LatticeVector};
use crate::error::DiagramError;
use crate::flow::{path_ordered_product, Epsilon, GroupElement};

/// Whether a ray points towards the origin or away from it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Orientation {
    Ingoing,
    Outgoing,
}

/// A ray through the origin: a primitive travel direction, an orientation,
/// and an attached series whose exponents are positive multiples of the
/// negated direction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocalRay {
    pub direction: LatticeVector,
    pub orientation: Orientation,
    pub function: GradedSeries,
}

impl LocalRay {
    pub fn new(
        direction: LatticeVector,
        orientation: Orientation,
        function: GradedSeries,
    ) -> Result<Self, DiagramError> {
        if direction.is_zero() || !direction.is_primitive() {
            return Err(DiagramError::NonPrimitiveDirection(direction.a, direction.b));
        }
        let against = direction.neg();
        for (m, _, _) in function.iter() {
            if !m.is_positive_multiple_of(&against) {
                return Err(DiagramError::BadExponent(m.a, m.b));
            }
        }
        Ok(Self {
            direction,
            orientation,
            function,
        })
    }

    /// The support half-line of the ray: along the travel direction for an
    /// outgoing ray, opposite for an ingoing one.
    pub fn support_vector(&self) -> LatticeVector {
        match self.orientation {
            Orientation::Outgoing => self.direction,
            Orientation::Ingoing => self.direction.neg(),
        }
    }
}

/// A normalized local scattering diagram: at most one ray per
/// (direction, orientation), all functions at a common truncation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocalDiagram {
    rays: Vec<LocalRay>,
    truncation: u32,
}

impl LocalDiagram {
    pub fn new(truncation: u32, rays: Vec<LocalRay>) -> Result<Self, DiagramError> {
        let mut merged: BTreeMap<(LatticeVector, Orientation), GradedSeries> = BTreeMap::new();
        for ray in rays {
            if ray.function.truncation() != truncation {
                return Err(DiagramError::Algebra(
                    crate::error::AlgebraError::TruncationMismatch(
                        ray.function.truncation(),
                        truncation,
                    ),
                ));
            }
            let key = (ray.direction, ray.orientation);
            match merged.remove(&key) {
                Some(existing) => {
                    merged.insert(key, existing.add(&ray.function)?);
                }
                None => {
                    merged.insert(key, ray.function);
                }
            }
        }
        let rays = merged
            .into_iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|((direction, orientation), function)| LocalRay {
                direction,
                orientation,
                function,
            })
            .collect();
        Ok(Self { rays, truncation })
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn rays(&self) -> &[LocalRay] {
        &self.rays
    }

    pub fn ray(&self, direction: &LatticeVector, orientation: Orientation) -> Option<&LocalRay> {
        self.rays
            .iter()
            .find(|r| r.direction == *direction && r.orientation == orientation)
    }

    /// Factors of the boundary product in anticlockwise traversal order of
    /// the supports, starting just above the negative x-axis.
    fn ordered_factors(&self, level: Option<u32>) -> Result<Vec<(GradedSeries, Epsilon)>, DiagramError> {
        let mut indexed: Vec<&LocalRay> = self.rays.iter().collect();
        indexed.sort_by(|p, q| {
            cmp_angle(&p.support_vector(), &q.support_vector())
                .then_with(|| p.orientation.cmp(&q.orientation))
        });
        let mut out = Vec::with_capacity(indexed.len());
        for ray in indexed {
            let f = match level {
                Some(k) => ray.function.truncate(k)?,
                None => ray.function.clone(),
            };
            let eps = match ray.orientation {
                Orientation::Outgoing => Epsilon::Outgoing,
                Orientation::Ingoing => Epsilon::Ingoing,
            };
            out.push((f, eps));
        }
        Ok(out)
    }

    /// The anticlockwise path-ordered product of exp(H)^eps over all rays.
    pub fn boundary_product(&self) -> Result<GroupElement, DiagramError> {
        Ok(path_ordered_product(
            self.truncation,
            &self.ordered_factors(None)?,
        )?)
    }

    fn boundary_product_at_level(&self, k: u32) -> Result<GroupElement, DiagramError> {
        Ok(path_ordered_product(k, &self.ordered_factors(Some(k))?)?)
    }
}

/// Angular comparison of nonzero lattice vectors by angle in (-pi, pi],
/// ascending, measured anticlockwise from the positive x-axis. Exact.
pub fn cmp_angle(u: &LatticeVector, v: &LatticeVector) -> std::cmp::Ordering {
    fn region(w: &LatticeVector) -> u8 {
        // 0: lower half-plane (angle in (-pi, 0))
        // 1: positive x-axis (angle 0)
        // 2: upper half-plane (angle in (0, pi))
        // 3: negative x-axis (angle pi)
        if w.b < 0 {
            0
        } else if w.b == 0 {
            if w.a > 0 {
                1
            } else {
                3
            }
        } else {
            2
        }
    }
    let (ru, rv) = (region(u), region(v));
    ru.cmp(&rv).then_with(|| {
        // within an open half-plane, u precedes v iff v is anticlockwise of u
        let d = u.det(v);
        if d > 0 {
            std::cmp::Ordering::Less
        } else if d < 0 {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    })
}

/// True iff the anticlockwise path-ordered product is the identity at the
/// diagram's truncation.
pub fn is_consistent(diagram: &LocalDiagram) -> Result<bool, DiagramError> {
    Ok(diagram.boundary_product()?.is_identity())
}

/// The order-k defect components of the diagram: the product equals
/// exp(-sum_j g_j) mod m^{k+1}, and the returned list holds the pairs
/// (primitive exponent direction m_j, g_j) at order exactly k.
pub fn level_defect(
    diagram: &LocalDiagram,
    k: u32,
) -> Result<Vec<(LatticeVector, GradedSeries)>, DiagramError> {
    let p = diagram.boundary_product_at_level(k)?;
    let log = p.log();
    if log.is_zero() {
        return Ok(Vec::new());
    }
    // By induction the diagram is consistent mod m^k, so the logarithm is
    // concentrated in order exactly k.
    let low = log.min_order().unwrap_or(k);
    if low < k {
        return Err(DiagramError::Algebra(crate::error::AlgebraError::Internal(
            format!("defect at level {k} has a term of lower order {low}"),
        )));
    }
    let defect = log.order_part(k).neg();
    let mut out = Vec::new();
    for dir in defect.support_directions()? {
        out.push((dir, defect.component_along(&dir)));
    }
    Ok(out)
}

/// Append outgoing rays for the given defect components, at the diagram's
/// truncation, merging into existing rays of the same direction.
fn add_outgoing_components(
    diagram: &LocalDiagram,
    components: Vec<(LatticeVector, GradedSeries)>,
) -> Result<LocalDiagram, DiagramError> {
    if components.is_empty() {
        return Ok(diagram.clone());
    }
    let n = diagram.truncation();
    let mut rays = diagram.rays.clone();
    for (m0, g) in components {
        // g sits on the outgoing ray of support -R_{>=0} m0, whose travel
        // direction is -m0; lift it back to the common truncation.
        rays.push(LocalRay::new(m0.neg(), Orientation::Outgoing, g.truncate(n)?)?);
    }
    LocalDiagram::new(n, rays)
}

/// The consistent completion S(D): for k = 1..N the anticlockwise product is
/// decomposed as exp(-sum g_j) mod m^{k+1} and the outgoing rays
/// (-R_{>=0} m_j, g_j) are added. Only outgoing rays are added; restricting
/// the output to ingoing rays recovers the input's ingoing rays.
pub fn complete(diagram: &LocalDiagram) -> Result<LocalDiagram, DiagramError> {
    let mut current = diagram.clone();
    for k in 1..=diagram.truncation() {
        let components = level_defect(&current, k)?;
        current = add_outgoing_components(&current, components)?;
    }
    Ok(current)
}

/// Completion driven in a randomized order: at every order level the defect
/// components are inserted one at a time in a shuffled order, recomputing the
/// defect in between. The result must agree with [`complete`]; the order-k
/// corrections commute mod m^{k+1}, which is what this exercises.
pub fn complete_with_shuffle(
    diagram: &LocalDiagram,
    seed: u64,
) -> Result<LocalDiagram, DiagramError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = diagram.clone();
    for k in 1..=diagram.truncation() {
        let mut guard = 0u32;
        loop {
            let mut components = level_defect(&current, k)?;
            if components.is_empty() {
                break;
            }
            components.shuffle(&mut rng);
            let picked = components.swap_remove(0);
            current = add_outgoing_components(&current, vec![picked])?;
            guard += 1;
            if guard > 4096 {
                return Err(DiagramError::NonterminatingLevel(k));
            }
        }
    }
    Ok(current)
}

/// The rays of `completed` that are not in `input`, as per-direction deltas
/// of outgoing functions. Removing these from the completion recovers the
/// input diagram.
pub fn added_rays(input: &LocalDiagram, completed: &LocalDiagram) -> Vec<LocalRay> {
    let mut out = Vec::new();
    for ray in completed.rays() {
        if ray.orientation != Orientation::Outgoing {
            continue;
        }
        let delta = match input.ray(&ray.direction, Orientation::Outgoing) {
            Some(prev) => ray
                .function
                .sub(&prev.function)
                .expect("same truncation inside one diagram"),
            None => ray.function.clone(),
        };
        if !delta.is_zero() {
            out.push(LocalRay {
                direction: ray.direction,
                orientation: Orientation::Outgoing,
                function: delta,
            });
        }
    }
    out
}
