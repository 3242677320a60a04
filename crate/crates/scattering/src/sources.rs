//! Constructors of the initial diagrams: the two-ray diagram, the
//! curve-counting initial data on U lifted from the degeneration, and the
//! sheaf-side initial data defined by line bundle charges, together with
//! Chern characters and central charges.

use num_traits::Zero;

use crate::algebra::{rat, rat_int, GradedSeries, LatticeVector, Order, Rat};
use crate::error::DiagramError;
use crate::scattering::geometry::{clip_to_window, Point, Window};
use crate::scattering::global::{exponent_dir, GlobalDiagram, GlobalRay};
use crate::scattering::local::{LocalDiagram, LocalRay, Orientation};

/// A Chern character (rank, degree, Euler characteristic) in Z^3.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct Charge {
    pub r: i64,
    pub d: i64,
    pub chi: i64,
}

impl Charge {
    pub const fn new(r: i64, d: i64, chi: i64) -> Self {
        Self { r, d, chi }
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.r, -self.d, -self.chi)
    }
}

/// The charge of the line bundle O(n): rank 1, degree n,
/// Euler characteristic (n+1)(n+2)/2.
pub fn chern_of_line_bundle(n: i64) -> Charge {
    Charge::new(1, n, (n + 1) * (n + 2) / 2)
}

/// The value of a central charge at a point of U, kept exact: the imaginary
/// part is im_sign_factor * sqrt(im_radicand) and is never evaluated as a
/// float.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CentralChargeValue {
    pub re: Rat,
    pub im_sign_factor: Rat,
    pub im_radicand: Rat,
}

impl CentralChargeValue {
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && (self.im_sign_factor.is_zero() || self.im_radicand.is_zero())
    }
}

/// Z_gamma at (x, y): re = r y + d x + r + 3d/2 - chi, imaginary part
/// (d - r x) sqrt(x^2 + 2y). The point must lie on or above the parabola.
pub fn central_charge(g: &Charge, x: &Rat, y: &Rat) -> Result<CentralChargeValue, DiagramError> {
    let p = Point::new(x.clone(), y.clone());
    if !p.in_closure_of_u() {
        return Err(DiagramError::BaseBelowParabola(x.to_string(), y.to_string()));
    }
    let r = rat_int(g.r);
    let d = rat_int(g.d);
    let chi = rat_int(g.chi);
    let re = r.clone() * y.clone() + d.clone() * x.clone() + r.clone() + d.clone() * rat(3, 2) - chi;
    let im_sign_factor = d - r * x.clone();
    let im_radicand = x.clone() * x.clone() + rat_int(2) * y.clone();
    Ok(CentralChargeValue {
        re,
        im_sign_factor,
        im_radicand,
    })
}

/// The standard attached series sum_{k=1..N} ((-1)^{k-1}/k^2) z^{k m0} t^k
/// for a primitive exponent direction m0.
pub fn dilog_series(truncation: u32, m0: &LatticeVector) -> GradedSeries {
    GradedSeries::from_terms(
        truncation,
        (1..=truncation as i64).map(|k| {
            (
                m0.scale(k),
                Order::T(k as u32),
                rat(if k % 2 == 1 { 1 } else { -1 }, k * k),
            )
        }),
    )
    .expect("orders start at 1")
}

/// The two-ray diagram: ingoing rays along R m1 and R m2 with the standard
/// series attached. m1, m2 must be primitive and non-parallel.
pub fn build_gps_diagram(
    m1: &LatticeVector,
    m2: &LatticeVector,
    truncation: u32,
) -> Result<LocalDiagram, DiagramError> {
    if truncation == 0 {
        return Err(DiagramError::Algebra(crate::error::AlgebraError::ZeroTruncation));
    }
    if !m1.is_primitive() || m1.is_zero() {
        return Err(DiagramError::NonPrimitiveDirection(m1.a, m1.b));
    }
    if !m2.is_primitive() || m2.is_zero() {
        return Err(DiagramError::NonPrimitiveDirection(m2.a, m2.b));
    }
    if m1.is_parallel(m2) {
        return Err(DiagramError::ParallelDirections);
    }
    let rays = vec![
        LocalRay::new(m1.neg(), Orientation::Ingoing, dilog_series(truncation, m1))?,
        LocalRay::new(m2.neg(), Orientation::Ingoing, dilog_series(truncation, m2))?,
    ];
    LocalDiagram::new(truncation, rays)
}

/// Tangency point (n, -n^2/2) of the tangent line to the parabola.
pub fn tangency_point(n: i64) -> Point {
    Point::new(rat_int(n), rat(-n * n, 2))
}

/// Integers n whose tangent line {y = -n x + n^2/2} meets the window.
///
/// The tangent height n^2/2 - n x is linear in x, so the line meets the
/// window iff its value range over [x0, x1] overlaps [y0, y1]. Once |n| is
/// past the x-range, the minimum height grows monotonically, which bounds
/// the scan.
pub fn tangent_range(window: &Window) -> Vec<i64> {
    let height = |n: i64, x: &Rat| rat(n * n, 2) - rat_int(n) * x.clone();
    let meets = |n: i64| -> bool {
        let h0 = height(n, &window.x0);
        let h1 = height(n, &window.x1);
        let (lo, hi) = if h0 <= h1 { (h0, h1) } else { (h1, h0) };
        lo <= window.y1 && hi >= window.y0
    };
    let mut out = Vec::new();
    let mut n: i64 = 0;
    loop {
        if meets(n) {
            out.push(n);
        }
        // for n >= x1 the minimum height (taken at x1) increases with n
        if rat_int(n) >= window.x1 && height(n, &window.x1) > window.y1 {
            break;
        }
        n += 1;
    }
    n = -1;
    loop {
        if meets(n) {
            out.push(n);
        }
        if rat_int(n) <= window.x0 && height(n, &window.x0) > window.y1 {
            break;
        }
        n -= 1;
    }
    out.sort_unstable();
    out
}

/// The two outgoing tangent rays at (n, -n^2/2), with the standard series in
/// the stored orientation convention, annotated with the given charges.
fn tangent_rays(
    n: i64,
    truncation: u32,
    window: &Window,
    charges: Option<(Charge, Charge)>,
) -> Result<Vec<GlobalRay>, DiagramError> {
    let base = tangency_point(n);
    let mut out = Vec::new();
    // direction (-1, n) carries +gamma(O(n)); (1, -n) carries the shift
    let dirs = [
        (LatticeVector::new(-1, n), charges.map(|c| c.0)),
        (LatticeVector::new(1, -n), charges.map(|c| c.1)),
    ];
    for (dir, charge) in dirs {
        if clip_to_window(&base, &dir, window).is_none() {
            continue;
        }
        let m0 = exponent_dir(&dir).neg();
        let f = dilog_series(truncation, &m0);
        out.push(GlobalRay::new(base.clone(), dir, f, charge)?);
    }
    Ok(out)
}

/// Initial data lifted from the degeneration: for each integer n whose
/// tangent line meets the window, the two outgoing rays at (n, -n^2/2)
/// along (1, -n) and (-1, n) with the standard series.
pub fn build_p2e_initial(window: &Window, truncation: u32) -> Result<GlobalDiagram, DiagramError> {
    if truncation == 0 {
        return Err(DiagramError::Algebra(crate::error::AlgebraError::ZeroTruncation));
    }
    let mut rays = Vec::new();
    for n in tangent_range(window) {
        rays.extend(tangent_rays(n, truncation, window, None)?);
    }
    GlobalDiagram::new(window.clone(), truncation, rays)
}

/// Sheaf-side initial data: the same geometric rays as the curve-counting
/// side, annotated by the line bundle charges; the half-line of direction
/// (-1, n) carries +gamma(O(n)), the opposite one its negative.
pub fn build_sheaf_initial(
    window: &Window,
    truncation: u32,
) -> Result<GlobalDiagram, DiagramError> {
    if truncation == 0 {
        return Err(DiagramError::Algebra(crate::error::AlgebraError::ZeroTruncation));
    }
    let mut rays = Vec::new();
    for n in tangent_range(window) {
        let g = chern_of_line_bundle(n);
        rays.extend(tangent_rays(n, truncation, window, Some((g, g.neg())))?);
    }
    GlobalDiagram::new(window.clone(), truncation, rays)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn line_bundle_charges() {
        assert_eq!(chern_of_line_bundle(0), Charge::new(1, 0, 1));
        assert_eq!(chern_of_line_bundle(-1), Charge::new(1, -1, 0));
        assert_eq!(chern_of_line_bundle(1), Charge::new(1, 1, 3));
        // chi = (n+1)(n+2)/2 stays integral for negative n
        assert_eq!(chern_of_line_bundle(-3), Charge::new(1, -3, 1));
    }

    #[test]
    fn central_charge_values() {
        // gamma(O(0)) at the tangency point (0,0): everything vanishes
        let z = central_charge(&chern_of_line_bundle(0), &rat(0, 1), &rat(0, 1)).unwrap();
        assert!(z.re.is_zero());
        assert!(z.im_sign_factor.is_zero());
        assert!(z.im_radicand.is_zero());
        assert!(z.is_zero());
        // gamma = (0,1,1) at (-1/2, 7): re = -1/2 + 3/2 - 1 = 0
        let z = central_charge(&Charge::new(0, 1, 1), &rat(-1, 2), &rat(7, 1)).unwrap();
        assert!(z.re.is_zero());
        assert!(!z.is_zero());
        // below the parabola is rejected
        assert!(central_charge(&Charge::new(0, 1, 1), &rat(0, 1), &rat(-1, 1)).is_err());
    }

    #[test]
    fn real_part_is_tangent_line() {
        // re for gamma(O(n)) equals y + n x - n^2/2 at rational sample points
        for n in [-20i64, -7, -1, 0, 1, 3, 20] {
            let g = chern_of_line_bundle(n);
            for (x, y) in [(rat(1, 3), rat(5, 1)), (rat(-3, 2), rat(9, 4)), (rat(7, 5), rat(2, 1))]
            {
                let z = central_charge(&g, &x, &y).unwrap();
                let expected = y.clone() + rat_int(n) * x.clone() - rat(n * n, 2);
                assert_eq!(z.re, expected);
            }
            // the zero locus is tangent to the parabola exactly at (n, -n^2/2)
            let p = tangency_point(n);
            let z = central_charge(&g, &p.x, &p.y).unwrap();
            assert!(z.is_zero());
        }
    }

    #[test]
    fn gps_diagram_series_coefficients() {
        let m1 = LatticeVector::new(1, 0);
        let m2 = LatticeVector::new(0, 1);
        let d = build_gps_diagram(&m1, &m2, 3).unwrap();
        let r = d.ray(&m1.neg(), Orientation::Ingoing).unwrap();
        assert_eq!(r.function.coeff(&m1, &Order::T(1)), Rat::one());
        assert_eq!(r.function.coeff(&m1.scale(2), &Order::T(2)), rat(-1, 4));
        assert!(build_gps_diagram(&m1, &m1, 3).is_err());
        assert!(build_gps_diagram(&m1, &m2, 0).is_err());
        assert!(build_gps_diagram(&LatticeVector::new(2, 0), &m2, 3).is_err());
    }

    #[test]
    fn p2e_window_tangent_range() {
        // window [-1/2, 1/2] x [-1/8, 1/2] hosts n in {-1, 0, 1} only
        let w = Window::new(rat(-1, 2), rat(1, 2), rat(-1, 8), rat(1, 2)).unwrap();
        assert_eq!(tangent_range(&w), vec![-1, 0, 1]);
        // base point for n = 2 is (2, -2)
        assert_eq!(tangency_point(2), Point::new(rat(2, 1), rat(-2, 1)));
    }

    #[test]
    fn p2e_initial_rays_follow_convention() {
        let w = Window::new(rat(-1, 2), rat(1, 2), rat(-1, 8), rat(1, 2)).unwrap();
        let d = build_p2e_initial(&w, 2).unwrap();
        // n = 0: horizontal directions only
        let horiz: Vec<_> = d
            .rays()
            .iter()
            .filter(|r| r.base == tangency_point(0))
            .collect();
        assert_eq!(horiz.len(), 2);
        for r in horiz {
            assert_eq!(r.dir.b, 0);
            // exponents negatively collinear with the scaled direction
            let against = exponent_dir(&r.dir).neg();
            for (m, _, _) in r.function.iter() {
                assert!(m.is_positive_multiple_of(&against));
            }
        }
    }

    #[test]
    fn sheaf_initial_matches_p2e() {
        // bottom low enough that both tangent half-lines at n = 1 enter
        let w = Window::new(rat(-2, 1), rat(2, 1), rat(-2, 1), rat(2, 1)).unwrap();
        let a = build_p2e_initial(&w, 4).unwrap();
        let b = build_sheaf_initial(&w, 4).unwrap();
        assert_eq!(a.rays().len(), b.rays().len());
        for (ra, rb) in a.rays().iter().zip(b.rays().iter()) {
            assert_eq!(ra.base, rb.base);
            assert_eq!(ra.dir, rb.dir);
            assert_eq!(ra.function, rb.function);
        }
        // charge annotations on the sheaf side
        let plus = b
            .rays()
            .iter()
            .find(|r| r.base == tangency_point(1) && r.dir == LatticeVector::new(-1, 1))
            .unwrap();
        assert_eq!(plus.charge, Some(chern_of_line_bundle(1)));
        let minus = b
            .rays()
            .iter()
            .find(|r| r.base == tangency_point(1) && r.dir == LatticeVector::new(1, -1))
            .unwrap();
        assert_eq!(minus.charge, Some(chern_of_line_bundle(1).neg()));
    }
}
