//! Serialization: byte-stable JSON for diagrams and CSV for invariant
//! tables. Rationals always serialize as "num/den" strings, never floats.

use serde::{Deserialize, Serialize};

use crate::algebra::{format_rat, parse_rat, GradedSeries, LatticeVector, Order, Rat};
use crate::error::DiagramError;
use crate::invariants::InvariantTable;
use crate::scattering::geometry::{Point, Window};
use crate::scattering::global::{GlobalDiagram, GlobalRay};
use crate::scattering::local::{LocalDiagram, LocalRay, Orientation};
use crate::sources::Charge;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad rational literal: {0}")]
    BadRational(String),
    #[error("bad csv row: {0}")]
    BadCsv(String),
    #[error("square-zero orders cannot be serialized")]
    SquareZeroOrder,
    #[error(transparent)]
    Diagram(#[from] DiagramError),
}

#[derive(Serialize, Deserialize)]
struct TermDto {
    m: [i64; 2],
    order: u32,
    coeff: String,
}

#[derive(Serialize, Deserialize)]
struct GlobalRayDto {
    base: [String; 2],
    dir: [i64; 2],
    charge: Option<[i64; 3]>,
    function: Vec<TermDto>,
}

#[derive(Serialize, Deserialize)]
struct GlobalDiagramDto {
    truncation: u32,
    window: [String; 4],
    rays: Vec<GlobalRayDto>,
}

#[derive(Serialize, Deserialize)]
struct LocalRayDto {
    dir: [i64; 2],
    orient: String,
    function: Vec<TermDto>,
}

#[derive(Serialize, Deserialize)]
struct LocalDiagramDto {
    truncation: u32,
    rays: Vec<LocalRayDto>,
}

fn series_to_dto(f: &GradedSeries) -> Result<Vec<TermDto>, IoError> {
    let mut out = Vec::new();
    for (m, o, c) in f.iter() {
        let order = match o {
            Order::T(k) => *k,
            Order::U(_) => return Err(IoError::SquareZeroOrder),
        };
        out.push(TermDto {
            m: [m.a, m.b],
            order,
            coeff: format_rat(c),
        });
    }
    Ok(out)
}

fn series_from_dto(terms: &[TermDto], truncation: u32) -> Result<GradedSeries, IoError> {
    let mut items = Vec::new();
    for t in terms {
        let c = parse_rat(&t.coeff).ok_or_else(|| IoError::BadRational(t.coeff.clone()))?;
        items.push((LatticeVector::new(t.m[0], t.m[1]), Order::T(t.order), c));
    }
    GradedSeries::from_terms(truncation, items)
        .map_err(|e| IoError::Diagram(DiagramError::Algebra(e)))
}

fn rat_from_str(s: &str) -> Result<Rat, IoError> {
    parse_rat(s).ok_or_else(|| IoError::BadRational(s.to_string()))
}

/// Serialize a global diagram with a fixed field layout.
pub fn global_to_json(d: &GlobalDiagram) -> Result<String, IoError> {
    let dto = GlobalDiagramDto {
        truncation: d.truncation(),
        window: [
            format_rat(&d.window().x0),
            format_rat(&d.window().x1),
            format_rat(&d.window().y0),
            format_rat(&d.window().y1),
        ],
        rays: d
            .rays()
            .iter()
            .map(|r| {
                Ok(GlobalRayDto {
                    base: [format_rat(&r.base.x), format_rat(&r.base.y)],
                    dir: [r.dir.a, r.dir.b],
                    charge: r.charge.map(|c| [c.r, c.d, c.chi]),
                    function: series_to_dto(&r.function)?,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?,
    };
    Ok(serde_json::to_string_pretty(&dto)? + "\n")
}

pub fn global_from_json(s: &str) -> Result<GlobalDiagram, IoError> {
    let dto: GlobalDiagramDto = serde_json::from_str(s)?;
    let window = Window::new(
        rat_from_str(&dto.window[0])?,
        rat_from_str(&dto.window[1])?,
        rat_from_str(&dto.window[2])?,
        rat_from_str(&dto.window[3])?,
    )?;
    let mut rays = Vec::new();
    for r in &dto.rays {
        let base = Point::new(rat_from_str(&r.base[0])?, rat_from_str(&r.base[1])?);
        let function = series_from_dto(&r.function, dto.truncation)?;
        let charge = r.charge.map(|c| Charge::new(c[0], c[1], c[2]));
        rays.push(GlobalRay::new(
            base,
            LatticeVector::new(r.dir[0], r.dir[1]),
            function,
            charge,
        )?);
    }
    Ok(GlobalDiagram::new(window, dto.truncation, rays)?)
}

pub fn local_to_json(d: &LocalDiagram) -> Result<String, IoError> {
    let dto = LocalDiagramDto {
        truncation: d.truncation(),
        rays: d
            .rays()
            .iter()
            .map(|r| {
                Ok(LocalRayDto {
                    dir: [r.direction.a, r.direction.b],
                    orient: match r.orientation {
                        Orientation::Ingoing => "in".to_string(),
                        Orientation::Outgoing => "out".to_string(),
                    },
                    function: series_to_dto(&r.function)?,
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?,
    };
    Ok(serde_json::to_string_pretty(&dto)? + "\n")
}

pub fn local_from_json(s: &str) -> Result<LocalDiagram, IoError> {
    let dto: LocalDiagramDto = serde_json::from_str(s)?;
    let mut rays = Vec::new();
    for r in &dto.rays {
        let orientation = match r.orient.as_str() {
            "in" => Orientation::Ingoing,
            "out" => Orientation::Outgoing,
            other => return Err(IoError::BadCsv(format!("bad orientation: {other}"))),
        };
        rays.push(LocalRay::new(
            LatticeVector::new(r.dir[0], r.dir[1]),
            orientation,
            series_from_dto(&r.function, dto.truncation)?,
        )?);
    }
    Ok(LocalDiagram::new(dto.truncation, rays)?)
}

/// CSV emission of an invariant table: side,d,k_or_chi,value with exact
/// "num/den" values, in deterministic row order.
pub fn table_to_csv(t: &InvariantTable) -> String {
    let mut out = String::from("side,d,k_or_chi,value\n");
    for (label, map) in [
        ("gw", &t.gw),
        ("gw_bar", &t.gw_bar),
        ("bps", &t.bps),
        ("sheaf", &t.sheaf),
    ] {
        for ((d, k), v) in map.iter() {
            out.push_str(&format!("{label},{d},{k},{}\n", format_rat(v)));
        }
    }
    out
}

pub fn table_from_csv(s: &str) -> Result<InvariantTable, IoError> {
    let mut t = InvariantTable::default();
    for (i, line) in s.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(IoError::BadCsv(line.to_string()));
        }
        let d: u32 = parts[1]
            .parse()
            .map_err(|_| IoError::BadCsv(line.to_string()))?;
        let k: u32 = parts[2]
            .parse()
            .map_err(|_| IoError::BadCsv(line.to_string()))?;
        let v = rat_from_str(parts[3])?;
        match parts[0] {
            "gw" => t.gw.insert((d, k), v),
            "gw_bar" => t.gw_bar.insert((d, k), v),
            "bps" => t.bps.insert((d, k), v),
            "sheaf" => t.sheaf.insert((d, k), v),
            _ => return Err(IoError::BadCsv(line.to_string())),
        };
    }
    Ok(t)
}
