//! Deterministic SVG rendering of a global diagram: the parabola boundary,
//! initial rays styled apart from generated rays, and line thickness
//! decreasing with the minimal order of the ray function. Identical inputs
//! produce byte-identical output.

use num_traits::Signed;

use crate::algebra::{rat_int, Rat};
use crate::scattering::geometry::clip_to_window;
use crate::scattering::global::GlobalDiagram;

const SCALE: i64 = 96;
const PARABOLA_SAMPLES: i64 = 192;

/// Fixed-point decimal rendering of a rational with three fraction digits,
/// rounding half away from zero; exact integer arithmetic throughout.
fn decimal(q: &Rat) -> String {
    let scaled = q.clone() * rat_int(1000);
    let twice = scaled.clone() + scaled.clone();
    let adjust = if q.is_negative() { -rat_int(1) } else { rat_int(1) };
    let rounded = ((twice + adjust) / rat_int(2)).trunc().to_integer();
    let neg = rounded.is_negative();
    let abs = rounded.abs();
    let int = abs.clone() / 1000;
    let frac = abs % 1000;
    let mut s = format!("{}{}.{:03}", if neg { "-" } else { "" }, int, frac);
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.pop();
    }
    if s == "-0" {
        s = "0".to_string();
    }
    s
}

struct Mapper {
    x0: Rat,
    y1: Rat,
}

impl Mapper {
    fn x(&self, x: &Rat) -> String {
        decimal(&((x.clone() - self.x0.clone()) * rat_int(SCALE)))
    }
    fn y(&self, y: &Rat) -> String {
        decimal(&((self.y1.clone() - y.clone()) * rat_int(SCALE)))
    }
}

fn stroke_width(min_order: u32) -> &'static str {
    match min_order {
        0 | 1 => "2.4",
        2 => "1.7",
        3 => "1.2",
        4 => "0.85",
        5 => "0.6",
        _ => "0.4",
    }
}

/// Render the diagram to an SVG string.
pub fn render_svg(d: &GlobalDiagram) -> String {
    let w = d.window();
    let map = Mapper {
        x0: w.x0.clone(),
        y1: w.y1.clone(),
    };
    let width = decimal(&((w.x1.clone() - w.x0.clone()) * rat_int(SCALE)));
    let height = decimal(&((w.y1.clone() - w.y0.clone()) * rat_int(SCALE)));
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    // parabola y = -x^2/2, sampled uniformly in x, clipped to the window
    let mut points: Vec<String> = Vec::new();
    for i in 0..=PARABOLA_SAMPLES {
        let x = w.x0.clone()
            + (w.x1.clone() - w.x0.clone()) * rat_int(i) / rat_int(PARABOLA_SAMPLES);
        let y = -(x.clone() * x.clone()) / rat_int(2);
        if y < w.y0 || y > w.y1 {
            continue;
        }
        points.push(format!("{},{}", map.x(&x), map.y(&y)));
    }
    if points.len() >= 2 {
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
            points.join(" ")
        ));
    }
    // rays, in the diagram's canonical order
    for ray in d.rays() {
        let (s_lo, s_hi) = match clip_to_window(&ray.base, &ray.dir, w) {
            Some(seg) => seg,
            None => continue,
        };
        let at = |s: &Rat| {
            (
                ray.base.x.clone() + s.clone() * rat_int(ray.dir.a),
                ray.base.y.clone() + s.clone() * rat_int(ray.dir.b),
            )
        };
        let (ax, ay) = at(&s_lo);
        let (bx, by) = at(&s_hi);
        if ax == bx && ay == by {
            continue;
        }
        let color = if ray.is_initial() { "#1b6ca8" } else { "#c0392b" };
        let widthattr = stroke_width(ray.function.min_order().unwrap_or(6));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"{widthattr}\"/>\n",
            map.x(&ax),
            map.y(&ay),
            map.x(&bx),
            map.y(&by)
        ));
    }
    out.push_str("</svg>\n");
    out
}
