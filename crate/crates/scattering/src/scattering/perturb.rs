//! Perturbation-based completion oracle.
//!
//! Each ray function is split into square-zero monomial pieces via
//! t = u_1 + ... + u_N, the pieces are translated by generic rational
//! offsets transverse to their directions, and every pairwise crossing is
//! resolved by the elementary rule: two pieces with exponent data H1, H2
//! (ordered so that det > 0) emit a single outgoing ray carrying [H1, H2].
//! When nothing is left to resolve, parallel rays are merged back and the
//! square-zero variables are folded into powers of t.
//!
//! The cascade intentionally avoids the group machinery of the direct
//! engine: brackets of square-zero pieces are the only algebra used, which
//! keeps this an independent oracle for [`local::complete`].

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Rat, GradedSeries, LatticeVector};
use crate::error::DiagramError;
use crate::scattering::geometry::Point;
use crate::scattering::local::{LocalDiagram, LocalRay, Orientation};

#[derive(Clone, Debug)]
struct Piece {
    base: Point,
    /// travel direction (primitive); pieces from ingoing rays are full
    /// lines, children are half-lines from their base
    travel: LatticeVector,
    full_line: bool,
    /// square-zero function; all exponents are positive multiples of
    /// -primitive(travel), and all orders share one u-mask
    function: GradedSeries,
    mask: u64,
}

fn piece_mask(f: &GradedSeries) -> Result<u64, DiagramError> {
    let mut mask: Option<u64> = None;
    for (_, o, _) in f.iter() {
        match o {
            crate::algebra::Order::U(m) => {
                if let Some(prev) = mask {
                    if prev != *m {
                        return Err(DiagramError::Algebra(
                            crate::error::AlgebraError::Internal(
                                "piece carries more than one u-monomial".into(),
                            ),
                        ));
                    }
                } else {
                    mask = Some(*m);
                }
            }
            _ => {
                return Err(DiagramError::Algebra(
                    crate::error::AlgebraError::ExpectedSquareZeroOrders,
                ))
            }
        }
    }
    Ok(mask.unwrap_or(0))
}

/// Meeting point of two piece supports, if any.
fn piece_crossing(a: &Piece, b: &Piece) -> Option<Point> {
    use num_traits::Zero;
    if a.travel.is_parallel(&b.travel) {
        return None;
    }
    // solve base_a + s da = base_b + u db with sign constraints
    let da = &a.travel;
    let db = &b.travel;
    let det = da.det(db);
    let rx = b.base.x.clone() - a.base.x.clone();
    let ry = b.base.y.clone() - a.base.y.clone();
    let det_r = Rat::from_integer(det.into());
    let s = (rx.clone() * Rat::from_integer(db.b.into())
        - ry.clone() * Rat::from_integer(db.a.into()))
        / det_r.clone();
    let u = (rx * Rat::from_integer(da.b.into()) - ry * Rat::from_integer(da.a.into())) / det_r;
    if !a.full_line && s <= Rat::zero() {
        return None;
    }
    if !b.full_line && u <= Rat::zero() {
        return None;
    }
    Some(Point::new(
        a.base.x.clone() + s.clone() * Rat::from_integer(da.a.into()),
        a.base.y.clone() + s * Rat::from_integer(da.b.into()),
    ))
}

fn passes_through(piece: &Piece, p: &Point) -> bool {
    use num_traits::Zero;
    let dx = p.x.clone() - piece.base.x.clone();
    let dy = p.y.clone() - piece.base.y.clone();
    let da = Rat::from_integer(piece.travel.a.into());
    let db = Rat::from_integer(piece.travel.b.into());
    if dx.clone() * db.clone() != dy.clone() * da.clone() {
        return false;
    }
    if piece.full_line {
        return true;
    }
    let s = if piece.travel.a != 0 { dx / da } else { dy / db };
    s >= Rat::zero()
}

/// Normalize the oracle input: every ray must be ingoing, possibly
/// accompanied by its own propagation (an outgoing ray on the opposite
/// support with the same or no function). Returns the ingoing rays.
fn ingoing_lines(diagram: &LocalDiagram) -> Result<Vec<LocalRay>, DiagramError> {
    let mut ingoing = Vec::new();
    for ray in diagram.rays() {
        match ray.orientation {
            Orientation::Ingoing => ingoing.push(ray.clone()),
            Orientation::Outgoing => {
                let matching = diagram.ray(&ray.direction, Orientation::Ingoing);
                match matching {
                    Some(in_ray) if in_ray.function == ray.function => {}
                    _ => return Err(DiagramError::UnsupportedOracleInput),
                }
            }
        }
    }
    Ok(ingoing)
}

/// Independent oracle for the local consistent completion.
pub fn complete_perturbed(diagram: &LocalDiagram) -> Result<LocalDiagram, DiagramError> {
    complete_perturbed_with_seed(diagram, 0x5eed)
}

pub fn complete_perturbed_with_seed(
    diagram: &LocalDiagram,
    seed: u64,
) -> Result<LocalDiagram, DiagramError> {
    let n = diagram.truncation();
    let ingoing = ingoing_lines(diagram)?;
    const MAX_ATTEMPTS: u32 = 8;
    let mut last_err = DiagramError::PerturbationCollision(0);
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        match run_cascade(&ingoing, n, &mut rng) {
            Ok(children) => {
                return assemble(diagram, &ingoing, children, n);
            }
            Err(DiagramError::PerturbationCollision(_)) => {
                last_err = DiagramError::PerturbationCollision(attempt + 1);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// Run the elementary-scattering cascade on perturbed piece lines; returns
/// the generated half-line pieces.
fn run_cascade(
    ingoing: &[LocalRay],
    n: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Piece>, DiagramError> {
    let denom: i64 = 99991;
    let mut pieces: Vec<Piece> = Vec::new();
    for ray in ingoing {
        // the support of the ingoing ray is opposite to its travel direction;
        // its pieces are full lines through a perturbed origin
        for part in ray.function.split_monomial_components(n)? {
            let mask = piece_mask(&part)?;
            // offset transverse to the direction
            let t = loop {
                let draw: i64 = rng.random_range(-(denom / 3)..=(denom / 3));
                if draw != 0 {
                    break Rat::new(draw.into(), denom.into());
                }
            };
            let perp = LatticeVector::new(-ray.direction.b, ray.direction.a);
            let base = Point::new(
                t.clone() * Rat::from_integer(perp.a.into()),
                t * Rat::from_integer(perp.b.into()),
            );
            pieces.push(Piece {
                base,
                travel: ray.direction,
                full_line: true,
                function: part,
                mask,
            });
        }
    }
    // resolve pairwise crossings, sweep by sweep, until saturation; each
    // pair is processed exactly once and children never unsettle already
    // processed pairs (their brackets carry strictly larger u-monomials)
    let mut resolved: std::collections::BTreeSet<(usize, usize)> = Default::default();
    loop {
        let mut new_children: Vec<Piece> = Vec::new();
        let count = pieces.len();
        for i in 0..count {
            for j in (i + 1)..count {
                if !resolved.insert((i, j)) {
                    continue;
                }
                if pieces[i].mask & pieces[j].mask != 0 {
                    continue;
                }
                let p = match piece_crossing(&pieces[i], &pieces[j]) {
                    Some(p) => p,
                    None => continue,
                };
                // genericity: no third piece may pass through the crossing
                for (k, other) in pieces.iter().enumerate() {
                    if k != i && k != j && passes_through(other, &p) {
                        return Err(DiagramError::PerturbationCollision(1));
                    }
                }
                // order the pair so the exponent determinant is positive
                let (first, second) = {
                    let mi = exponent_base(&pieces[i]);
                    let mj = exponent_base(&pieces[j]);
                    if mi.det(&mj) > 0 {
                        (i, j)
                    } else {
                        (j, i)
                    }
                };
                let bracket = pieces[first].function.bracket(&pieces[second].function)?;
                if bracket.is_zero() {
                    continue;
                }
                for m0 in bracket.support_directions()? {
                    let g = bracket.component_along(&m0);
                    let mask = piece_mask(&g)?;
                    new_children.push(Piece {
                        base: p.clone(),
                        travel: m0.neg(),
                        full_line: false,
                        function: g,
                        mask,
                    });
                }
            }
        }
        if new_children.is_empty() {
            break;
        }
        pieces.extend(new_children);
    }
    Ok(pieces.into_iter().filter(|p| !p.full_line).collect())
}

/// Exponent direction of a piece (primitive, pointing against travel).
fn exponent_base(p: &Piece) -> LatticeVector {
    p.travel.neg()
}

/// Merge parallel generated rays, fold u-monomials back into t-powers, and
/// assemble the completed diagram.
fn assemble(
    input: &LocalDiagram,
    ingoing: &[LocalRay],
    children: Vec<Piece>,
    n: u32,
) -> Result<LocalDiagram, DiagramError> {
    let mut by_dir: BTreeMap<LatticeVector, GradedSeries> = BTreeMap::new();
    for child in children {
        let entry = by_dir
            .entry(child.travel)
            .or_insert_with(|| GradedSeries::zero(n));
        *entry = entry.add(&child.function)?;
    }
    let mut rays: Vec<LocalRay> = input.rays().to_vec();
    // propagations of the ingoing rays not already present
    for ray in ingoing {
        if input.ray(&ray.direction, Orientation::Outgoing).is_none() {
            rays.push(LocalRay::new(
                ray.direction,
                Orientation::Outgoing,
                ray.function.clone(),
            )?);
        }
    }
    for (dir, f) in by_dir {
        let merged = f.merge_square_zero(n)?;
        if merged.is_zero() {
            continue;
        }
        rays.push(LocalRay::new(dir, Orientation::Outgoing, merged)?);
    }
    LocalDiagram::new(n, rays)
}
