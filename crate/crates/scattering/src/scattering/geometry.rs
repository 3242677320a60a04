//! Exact rational plane geometry for the global engine: points, the window
//! rectangle, and ray-support predicates. No epsilons anywhere.

use crate::algebra::{LatticeVector, Rat};

/// A point of the plane with exact rational coordinates.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Point {
    pub x: Rat,
    pub y: Rat,
}

impl Point {
    pub fn new(x: Rat, y: Rat) -> Self {
        Self { x, y }
    }

    /// Strictly above the parabola y = -x^2/2, i.e. 2y + x^2 > 0.
    pub fn strictly_above_parabola(&self) -> bool {
        use num_traits::Zero;
        let v = self.y.clone() + self.y.clone() + self.x.clone() * self.x.clone();
        v > Rat::zero()
    }

    /// On or above the parabola.
    pub fn in_closure_of_u(&self) -> bool {
        use num_traits::Zero;
        let v = self.y.clone() + self.y.clone() + self.x.clone() * self.x.clone();
        v >= Rat::zero()
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rational rectangle [x0, x1] x [y0, y1].
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Window {
    pub x0: Rat,
    pub x1: Rat,
    pub y0: Rat,
    pub y1: Rat,
}

impl Window {
    pub fn new(x0: Rat, x1: Rat, y0: Rat, y1: Rat) -> Result<Self, crate::error::DiagramError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(crate::error::DiagramError::EmptyWindow);
        }
        let w = Self { x0, x1, y0, y1 };
        // corner checks against the closure of U
        let lo = Point::new(w.x0.clone(), w.y0.clone());
        let hi = Point::new(w.x1.clone(), w.y0.clone());
        if !lo.in_closure_of_u() || !hi.in_closure_of_u() {
            return Err(crate::error::DiagramError::WindowBelowParabola);
        }
        Ok(w)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }
}

/// Parameter of p along the ray base + s * dir, if p lies on the support
/// (s >= 0); exact.
pub fn ray_param(base: &Point, dir: &LatticeVector, p: &Point) -> Option<Rat> {
    use num_traits::Zero;
    let dx = p.x.clone() - base.x.clone();
    let dy = p.y.clone() - base.y.clone();
    let da = Rat::from_integer(dir.a.into());
    let db = Rat::from_integer(dir.b.into());
    // collinearity: dx * db == dy * da
    if dx.clone() * db.clone() != dy.clone() * da.clone() {
        return None;
    }
    let s = if dir.a != 0 { dx / da } else { dy / db };
    if s >= Rat::zero() {
        Some(s)
    } else {
        None
    }
}

pub fn point_on_ray(base: &Point, dir: &LatticeVector, p: &Point) -> bool {
    ray_param(base, dir, p).is_some()
}

/// Intersection point of two ray supports (non-parallel only). Both
/// parameters must be >= 0.
pub fn ray_intersection(
    base1: &Point,
    dir1: &LatticeVector,
    base2: &Point,
    dir2: &LatticeVector,
) -> Option<Point> {
    use num_traits::Zero;
    let det = dir1.det(dir2);
    if det == 0 {
        return None;
    }
    // solve base1 + s dir1 = base2 + u dir2
    let rx = base2.x.clone() - base1.x.clone();
    let ry = base2.y.clone() - base1.y.clone();
    let det_r = Rat::from_integer(det.into());
    // s = det(r, dir2) / det(dir1, dir2), u = det(r, dir1) / det(dir1, dir2)
    let d2a = Rat::from_integer(dir2.a.into());
    let d2b = Rat::from_integer(dir2.b.into());
    let d1a = Rat::from_integer(dir1.a.into());
    let d1b = Rat::from_integer(dir1.b.into());
    let s = (rx.clone() * d2b.clone() - ry.clone() * d2a.clone()) / det_r.clone();
    let u = (rx * d1b.clone() - ry * d1a.clone()) / det_r;
    if s < Rat::zero() || u < Rat::zero() {
        return None;
    }
    Some(Point::new(
        base1.x.clone() + s.clone() * d1a,
        base1.y.clone() + s * d1b,
    ))
}

/// The segment of the support inside the window, as a parameter interval
/// [s_lo, s_hi] intersected with s >= 0; `None` if the support misses the
/// window.
pub fn clip_to_window(
    base: &Point,
    dir: &LatticeVector,
    w: &Window,
) -> Option<(Rat, Rat)> {
    use num_traits::Zero;
    let mut lo = Rat::zero();
    let mut hi: Option<Rat> = None;
    // process each axis
    for (b, d, min, max) in [
        (base.x.clone(), dir.a, w.x0.clone(), w.x1.clone()),
        (base.y.clone(), dir.b, w.y0.clone(), w.y1.clone()),
    ] {
        if d == 0 {
            if b < min || b > max {
                return None;
            }
            continue;
        }
        let dr = Rat::from_integer(d.into());
        let t1 = (min - b.clone()) / dr.clone();
        let t2 = (max - b) / dr;
        let (a, z) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        if a > lo {
            lo = a;
        }
        hi = Some(match hi {
            None => z,
            Some(h) => {
                if z < h {
                    z
                } else {
                    h
                }
            }
        });
    }
    let hi = hi?;
    if lo > hi {
        return None;
    }
    Some((lo, hi))
}
