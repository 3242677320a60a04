//! The global scattering engine on a rectangular window of the region U
//! above the parabola y = -x^2/2.
//!
//! Geometry lives in the drawing plane (x, y); the exponent lattice of the
//! attached series is the integral affine one, in which the y-direction is
//! scaled by 3 relative to the drawing plane. A ray travelling in plane
//! direction (a, b) carries exponents that are positive multiples of the
//! negative of the primitive lattice vector along (a, 3b). This chart map is
//! what makes the pairing of two tangent-line rays at neighbouring parabola
//! points equal 3, as the sheaf-side wall-crossing requires.
//!
//! Completion processes order levels k = 1..N. New rays created at level k
//! carry functions of pure order k, so corrections within one level commute
//! modulo the next order and a single pass per level suffices; events inside
//! a level may therefore be processed in any order, or in parallel.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{GradedSeries, LatticeVector, Rat};
use crate::error::DiagramError;
use crate::scattering::geometry::{clip_to_window, ray_intersection, Point, Window};
use crate::scattering::local::{self, LocalDiagram, LocalRay, Orientation};
use crate::sources::Charge;

/// Primitive exponent-lattice direction of a plane direction (a, b).
pub fn exponent_dir(plane: &LatticeVector) -> LatticeVector {
    LatticeVector::new(plane.a, 3 * plane.b).primitive_part()
}

/// Primitive plane direction of an exponent-lattice direction (a, b).
pub fn plane_dir(exponent: &LatticeVector) -> LatticeVector {
    LatticeVector::new(3 * exponent.a, exponent.b).primitive_part()
}

/// A ray of the global diagram, stored outgoing from its base point.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GlobalRay {
    pub base: Point,
    pub dir: LatticeVector,
    pub function: GradedSeries,
    pub charge: Option<Charge>,
}

impl GlobalRay {
    pub fn new(
        base: Point,
        dir: LatticeVector,
        function: GradedSeries,
        charge: Option<Charge>,
    ) -> Result<Self, DiagramError> {
        if dir.is_zero() || !dir.is_primitive() {
            return Err(DiagramError::NonPrimitiveDirection(dir.a, dir.b));
        }
        if !base.in_closure_of_u() {
            return Err(DiagramError::BaseBelowParabola(
                base.x.to_string(),
                base.y.to_string(),
            ));
        }
        let against = exponent_dir(&dir).neg();
        for (m, _, _) in function.iter() {
            if !m.is_positive_multiple_of(&against) {
                return Err(DiagramError::BadExponent(m.a, m.b));
            }
        }
        Ok(Self {
            base,
            dir,
            function,
            charge,
        })
    }

    /// True when the base point sits on the parabola itself, i.e. the ray is
    /// part of the initial data rather than generated by scattering.
    pub fn is_initial(&self) -> bool {
        !self.base.strictly_above_parabola()
    }

    fn contains(&self, p: &Point) -> bool {
        crate::scattering::geometry::point_on_ray(&self.base, &self.dir, p)
    }
}

/// Query for [`GlobalDiagram::ray_functions_at`].
#[derive(Clone, Debug)]
pub enum VerticalQuery {
    /// All rays through a given point.
    At(Point),
    /// The merged function of the upward vertical rays on the line x = x0,
    /// read above the last scattering event.
    Asymptote(Rat),
}

/// A global scattering diagram on a window of U.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GlobalDiagram {
    rays: Vec<GlobalRay>,
    window: Window,
    truncation: u32,
}

impl GlobalDiagram {
    pub fn new(
        window: Window,
        truncation: u32,
        rays: Vec<GlobalRay>,
    ) -> Result<Self, DiagramError> {
        let mut merged: Vec<GlobalRay> = Vec::new();
        let mut index: BTreeMap<(Point, LatticeVector), usize> = BTreeMap::new();
        for ray in rays {
            if ray.function.truncation() != truncation {
                return Err(DiagramError::Algebra(
                    crate::error::AlgebraError::TruncationMismatch(
                        ray.function.truncation(),
                        truncation,
                    ),
                ));
            }
            if clip_to_window(&ray.base, &ray.dir, &window).is_none() {
                return Err(DiagramError::SupportOutsideWindow);
            }
            match index.get(&(ray.base.clone(), ray.dir)) {
                Some(&i) => {
                    merged[i].function = merged[i].function.add(&ray.function)?;
                    if merged[i].charge != ray.charge {
                        merged[i].charge = None;
                    }
                }
                None => {
                    index.insert((ray.base.clone(), ray.dir), merged.len());
                    merged.push(ray);
                }
            }
        }
        let mut diagram = Self {
            rays: merged,
            window,
            truncation,
        };
        diagram.sort_rays();
        Ok(diagram)
    }

    fn sort_rays(&mut self) {
        self.rays.sort_by(|p, q| {
            (&p.base, p.dir)
                .cmp(&(&q.base, q.dir))
        });
    }

    pub fn rays(&self) -> &[GlobalRay] {
        &self.rays
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    /// Candidate scattering points: intersections of ray supports within the
    /// window and strictly above the parabola, plus ray bases lying on other
    /// supports. Returns the rays through each point.
    fn candidate_points(&self) -> BTreeMap<Point, BTreeSet<usize>> {
        let mut map: BTreeMap<Point, BTreeSet<usize>> = BTreeMap::new();
        let pairs: Vec<(usize, usize, Point)> = (0..self.rays.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut found = Vec::new();
                for j in (i + 1)..self.rays.len() {
                    if let Some(p) = self.pair_point(i, j) {
                        found.push((i, j, p));
                    }
                }
                found.into_iter()
            })
            .collect();
        for (i, j, p) in pairs {
            let entry = map.entry(p).or_default();
            entry.insert(i);
            entry.insert(j);
        }
        map
    }

    /// Meeting point of two ray supports, restricted to the window and the
    /// open region above the parabola. Parallel rays only meet through a
    /// base point lying on the other support.
    fn pair_point(&self, i: usize, j: usize) -> Option<Point> {
        let (ri, rj) = (&self.rays[i], &self.rays[j]);
        let p = if ri.dir.is_parallel(&rj.dir) {
            if rj.contains(&ri.base) {
                ri.base.clone()
            } else if ri.contains(&rj.base) {
                rj.base.clone()
            } else {
                return None;
            }
        } else {
            ray_intersection(&ri.base, &ri.dir, &rj.base, &rj.dir)?
        };
        if self.window.contains(&p) && p.strictly_above_parabola() {
            Some(p)
        } else {
            None
        }
    }

    /// The local scattering diagram seen at a point: rays based there enter
    /// outgoing, rays passing through enter as an ingoing/outgoing pair.
    fn localize(&self, p: &Point, indices: &BTreeSet<usize>) -> Result<LocalDiagram, DiagramError> {
        let mut local = Vec::new();
        for &i in indices {
            let ray = &self.rays[i];
            let t_dir = exponent_dir(&ray.dir);
            if ray.base == *p {
                local.push(LocalRay::new(
                    t_dir,
                    Orientation::Outgoing,
                    ray.function.clone(),
                )?);
            } else {
                local.push(LocalRay::new(
                    t_dir,
                    Orientation::Ingoing,
                    ray.function.clone(),
                )?);
                local.push(LocalRay::new(
                    t_dir,
                    Orientation::Outgoing,
                    ray.function.clone(),
                )?);
            }
        }
        LocalDiagram::new(self.truncation, local)
    }

    /// Same as [`Self::localize`], but over pre-truncated level-k functions.
    fn localize_level(
        &self,
        p: &Point,
        indices: &BTreeSet<usize>,
        truncated: &[GradedSeries],
        k: u32,
    ) -> Result<LocalDiagram, DiagramError> {
        let mut local = Vec::new();
        for &i in indices {
            let ray = &self.rays[i];
            let t_dir = exponent_dir(&ray.dir);
            let f = truncated[i].clone();
            if ray.base == *p {
                local.push(LocalRay::new(t_dir, Orientation::Outgoing, f)?);
            } else {
                local.push(LocalRay::new(t_dir, Orientation::Ingoing, f.clone())?);
                local.push(LocalRay::new(t_dir, Orientation::Outgoing, f)?);
            }
        }
        LocalDiagram::new(k, local)
    }

    /// Decide whether a point can carry a defect at order exactly k, from
    /// the term-order bitmasks of the incident rays. The defect's order-k
    /// part consists of bracket words mixing at least two non-collinear
    /// directions (orders add along a word) and of linear parts of rays
    /// based at the point, so k must be a multiset sum of available term
    /// orders dominating some cross-direction pair, or a based-ray order.
    fn level_possible(
        &self,
        p: &Point,
        indices: &BTreeSet<usize>,
        order_masks: &[u64],
        k: u32,
    ) -> bool {
        debug_assert!(k <= 63);
        let bit = 1u64 << k;
        let cap: u64 = (1u64 << (k + 1)) - 1;
        let mut groups: BTreeMap<LatticeVector, u64> = BTreeMap::new();
        let mut solo: u64 = 0;
        for &i in indices {
            let ray = &self.rays[i];
            if ray.base == *p {
                solo |= order_masks[i];
            }
            let mut key = exponent_dir(&ray.dir);
            if key.a < 0 || (key.a == 0 && key.b < 0) {
                key = key.neg();
            }
            *groups.entry(key).or_insert(0) |= order_masks[i];
        }
        if solo & bit != 0 {
            return true;
        }
        if groups.len() < 2 {
            return false;
        }
        // two smallest minimal orders from distinct direction groups
        let mut mins: Vec<u32> = groups
            .values()
            .filter(|m| **m != 0)
            .map(|m| m.trailing_zeros())
            .collect();
        mins.sort_unstable();
        if mins.len() < 2 || mins[0] + mins[1] > k {
            return false;
        }
        // multiset-sum closure of all available term orders, capped at k
        let all: u64 = groups.values().fold(0, |acc, m| acc | m) & cap;
        let mut reach: u64 = 1; // empty sum
        loop {
            let mut next = reach;
            let mut rest = all;
            while rest != 0 {
                let o = rest.trailing_zeros();
                rest &= rest - 1;
                next |= (reach << o) & cap;
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        reach & bit != 0
    }

    /// Consistent completion of the diagram on its window: for each order
    /// level, every inconsistent point receives the outgoing rays of its
    /// local completion, extended to the window boundary.
    pub fn complete(&self) -> Result<Self, DiagramError> {
        self.complete_with_schedule(None)
    }

    /// Completion with an optional shuffled event schedule inside each order
    /// level. The output must not depend on the seed; determinism is part of
    /// the engine contract and is exercised by the test suite.
    pub fn complete_with_schedule(&self, seed: Option<u64>) -> Result<Self, DiagramError> {
        let n = self.truncation;
        let mut diagram = self.clone();
        let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
        // crossing map maintained incrementally as rays are appended
        let mut cross: BTreeMap<Point, BTreeSet<usize>> = BTreeMap::new();
        let mut discovered = 0usize;
        for k in 1..=n {
            // extend the crossing map with pairs involving new rays; a
            // non-parallel pair whose minimal orders already exceed the
            // truncation can never scatter and is not tracked (its members
            // still join any shared point through their other pairs)
            let total = diagram.rays.len();
            if discovered < total {
                let min_orders: Vec<u32> = diagram
                    .rays
                    .iter()
                    .map(|r| r.function.min_order().unwrap_or(n + 1))
                    .collect();
                let news: Vec<(Point, usize, usize)> = (0..total)
                    .into_par_iter()
                    .flat_map_iter(|i| {
                        let lo = discovered.max(i + 1);
                        let mut found = Vec::new();
                        for j in lo..total {
                            if !diagram.rays[i].dir.is_parallel(&diagram.rays[j].dir)
                                && min_orders[i] + min_orders[j] > n
                            {
                                continue;
                            }
                            if let Some(p) = diagram.pair_point(i, j) {
                                found.push((p, i, j));
                            }
                        }
                        found.into_iter()
                    })
                    .collect();
                for (p, i, j) in news {
                    let entry = cross.entry(p).or_default();
                    entry.insert(i);
                    entry.insert(j);
                }
                discovered = total;
            }
            // per-level caches: term-order bitmasks and truncated functions
            let order_masks: Vec<u64> = diagram
                .rays
                .par_iter()
                .map(|r| {
                    let mut mask = 0u64;
                    for (_, o, _) in r.function.iter() {
                        let d = o.degree();
                        if d <= 63 {
                            mask |= 1 << d;
                        }
                    }
                    mask
                })
                .collect();
            let truncated: Vec<GradedSeries> = diagram
                .rays
                .par_iter()
                .map(|r| r.function.truncate(k))
                .collect::<Result<_, _>>()?;
            // processable events at this level
            let mut events: Vec<(Point, BTreeSet<usize>)> = cross
                .par_iter()
                .filter(|(p, set)| diagram.level_possible(p, set, &order_masks, k))
                .map(|(p, set)| (p.clone(), set.clone()))
                .collect();
            if let Some(rng) = rng.as_mut() {
                events.shuffle(rng);
            }
            let produced: Result<Vec<Vec<(Point, LatticeVector, GradedSeries)>>, DiagramError> =
                events
                    .par_iter()
                    .map(|(p, set)| {
                        let local = diagram.localize_level(p, set, &truncated, k)?;
                        let components = local::level_defect(&local, k).map_err(|e| {
                            if let DiagramError::Algebra(crate::error::AlgebraError::Internal(
                                msg,
                            )) = &e
                            {
                                DiagramError::Algebra(crate::error::AlgebraError::Internal(
                                    format!("{msg} at point {p} with rays {set:?}"),
                                ))
                            } else {
                                e
                            }
                        })?;
                        Ok(components
                            .into_iter()
                            .map(|(m0, g)| (p.clone(), m0, g))
                            .collect())
                    })
                    .collect();
            // canonical merge, independent of event order
            let mut additions: BTreeMap<(Point, LatticeVector), GradedSeries> = BTreeMap::new();
            for batch in produced? {
                for (p, m0, g) in batch {
                    let dir = plane_dir(&m0.neg());
                    let lifted = g.truncate(self.truncation)?;
                    match additions.get_mut(&(p.clone(), dir)) {
                        Some(existing) => {
                            *existing = existing.add(&lifted)?;
                        }
                        None => {
                            additions.insert((p, dir), lifted);
                        }
                    }
                }
            }
            if std::env::var_os("SCATTERING_TRACE").is_some() {
                eprintln!(
                    "level {k}: rays {}, tracked points {}, events {}, additions {}",
                    diagram.rays.len(),
                    cross.len(),
                    events.len(),
                    additions.len()
                );
            }
            if additions.is_empty() {
                continue;
            }
            // merge into existing rays on the same (base, direction) or
            // append; either way the ray must belong to the tracked set of
            // its base point, since its linear part cancels that point's
            // defect at later levels even when all its pairs are prunable
            let mut index: BTreeMap<(Point, LatticeVector), usize> = BTreeMap::new();
            for (i, ray) in diagram.rays.iter().enumerate() {
                index.insert((ray.base.clone(), ray.dir), i);
            }
            for ((p, dir), g) in additions {
                let i = match index.get(&(p.clone(), dir)) {
                    Some(&i) => {
                        diagram.rays[i].function = diagram.rays[i].function.add(&g)?;
                        i
                    }
                    None => {
                        diagram.rays.push(GlobalRay::new(p.clone(), dir, g, None)?);
                        diagram.rays.len() - 1
                    }
                };
                cross.entry(p).or_default().insert(i);
            }
        }
        diagram.sort_rays();
        Ok(diagram)
    }

    /// Full consistency check at the diagram's truncation, at every
    /// candidate point of the window.
    pub fn is_consistent(&self) -> Result<bool, DiagramError> {
        for (p, set) in self.candidate_points() {
            let local = self.localize(&p, &set)?;
            if !local::is_consistent(&local)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The honest local diagram at a point, over all rays through it.
    pub fn local_diagram_at(&self, p: &Point) -> Result<LocalDiagram, DiagramError> {
        let mut indices = BTreeSet::new();
        for (i, ray) in self.rays.iter().enumerate() {
            if ray.contains(p) {
                indices.insert(i);
            }
        }
        self.localize(p, &indices)
    }

    /// Points of the window where the diagram fails local consistency.
    pub fn inconsistent_points(&self) -> Result<Vec<Point>, DiagramError> {
        let mut out = Vec::new();
        for (p, set) in self.candidate_points() {
            let local = self.localize(&p, &set)?;
            if !local::is_consistent(&local)? {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Ray data at a point, or the merged asymptotic function of a vertical
    /// line. Vertical rays all point upward and commute, so the asymptotic
    /// function is the sum of the functions of the upward rays at that
    /// abscissa whose support reaches the top edge.
    pub fn ray_functions_at(
        &self,
        query: &VerticalQuery,
    ) -> Result<Vec<(LatticeVector, GradedSeries)>, DiagramError> {
        match query {
            VerticalQuery::At(p) => {
                let mut out = Vec::new();
                for ray in &self.rays {
                    if ray.contains(p) {
                        out.push((ray.dir, ray.function.clone()));
                    }
                }
                Ok(out)
            }
            VerticalQuery::Asymptote(x0) => {
                if *x0 < self.window.x0 || *x0 > self.window.x1 {
                    return Err(DiagramError::SupportOutsideWindow);
                }
                let up = LatticeVector::new(0, 1);
                let mut total = GradedSeries::zero(self.truncation);
                for ray in &self.rays {
                    if ray.dir == up && ray.base.x == *x0 {
                        total = total.add(&ray.function)?;
                    }
                }
                if total.is_zero() {
                    Ok(Vec::new())
                } else {
                    Ok(vec![(up, total)])
                }
            }
        }
    }

    /// The merged asymptotic vertical function at x = x0 (zero series if no
    /// vertical rays live there).
    pub fn vertical_function(&self, x0: &Rat) -> Result<GradedSeries, DiagramError> {
        let fns = self.ray_functions_at(&VerticalQuery::Asymptote(x0.clone()))?;
        Ok(fns
            .into_iter()
            .next()
            .map(|(_, f)| f)
            .unwrap_or_else(|| GradedSeries::zero(self.truncation)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{rat, Order};

    fn pt(xn: i64, xd: i64, yn: i64, yd: i64) -> Point {
        Point::new(rat(xn, xd), rat(yn, yd))
    }

    fn lv(a: i64, b: i64) -> LatticeVector {
        LatticeVector::new(a, b)
    }

    fn window(x0: i64, x1: i64, y0: i64, y1: i64) -> Window {
        Window::new(rat(x0, 1), rat(x1, 1), rat(y0, 1), rat(y1, 1)).unwrap()
    }

    /// A ray with a single-term function in square-zero order.
    fn uray(n: u32, base: Point, dir: LatticeVector, mask: u64, c: (i64, i64)) -> GlobalRay {
        let m = exponent_dir(&dir).neg();
        let f = GradedSeries::monomial(n, m, Order::U(mask), rat(c.0, c.1)).unwrap();
        GlobalRay::new(base, dir, f, None).unwrap()
    }

    #[test]
    fn chart_maps_are_inverse() {
        for (a, b) in [(1, 0), (0, 1), (1, -1), (3, -1), (-2, 5), (1, -3)] {
            let u = lv(a, b).primitive_part();
            assert_eq!(plane_dir(&exponent_dir(&u)), u);
        }
        assert_eq!(exponent_dir(&lv(1, -1)), lv(1, -3));
        assert_eq!(exponent_dir(&lv(0, 1)), lv(0, 1));
        assert_eq!(plane_dir(&lv(0, -1)), lv(0, -1));
    }

    #[test]
    fn two_crossing_rays_emit_bracket_ray() {
        // square-zero orders: a single new ray carrying the bracket
        let w = window(-3, 3, 0, 4);
        let r1 = uray(2, pt(-2, 1, 1, 1), lv(1, 0), 0b01, (1, 1));
        let r2 = uray(2, pt(1, 1, 0, 1), lv(0, 1), 0b10, (1, 1));
        let d = GlobalDiagram::new(w, 2, vec![r1.clone(), r2.clone()]).unwrap();
        let s = d.complete().unwrap();
        assert!(s.is_consistent().unwrap());
        assert_eq!(s.rays().len(), 3);
        let new_ray = s
            .rays()
            .iter()
            .find(|r| r.base == pt(1, 1, 1, 1))
            .expect("new ray at the crossing");
        // exponents m1 = (-1,0), m2 = (0,-1) with det(m1, m2) = 1: the new
        // ray carries [H1, H2] = z^{(-1,-1)} u1 u2; the lattice direction
        // (1,1) maps to the plane direction (3,1)
        assert_eq!(new_ray.dir, lv(3, 1));
        let mf = new_ray.function.coeff(&lv(-1, -1), &Order::U(0b11));
        assert_eq!(mf, rat(1, 1));
    }

    #[test]
    fn parallel_rays_stay_unchanged() {
        let w = window(-3, 3, 0, 4);
        let r1 = uray(2, pt(-2, 1, 1, 1), lv(1, 0), 0b01, (1, 1));
        let r2 = uray(2, pt(-2, 1, 2, 1), lv(1, 0), 0b10, (1, 1));
        let d = GlobalDiagram::new(w, 2, vec![r1, r2]).unwrap();
        let s = d.complete().unwrap();
        assert_eq!(s.rays().len(), 2);
        assert!(s.is_consistent().unwrap());
    }

    #[test]
    fn completion_is_schedule_invariant() {
        let w = window(-4, 4, 0, 6);
        let rays = vec![
            uray(3, pt(-3, 1, 1, 1), lv(1, 0), 0b001, (1, 1)),
            uray(3, pt(1, 1, 0, 1), lv(0, 1), 0b010, (2, 1)),
            uray(3, pt(-1, 1, 0, 1), lv(0, 1), 0b100, (1, 2)),
        ];
        let d = GlobalDiagram::new(w, 3, rays).unwrap();
        let s = d.complete().unwrap();
        for seed in [1u64, 7, 42] {
            assert_eq!(d.complete_with_schedule(Some(seed)).unwrap(), s);
        }
        assert!(s.is_consistent().unwrap());
    }
}
