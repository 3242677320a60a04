//! Torsion combinatorics and the invariant extraction pipelines.
//!
//! The curve-counting side reads the vertical asymptotic functions of the
//! completed diagram, one line per torsion index, and solves a triangular
//! system for the counts N_{0,d}^k; a multiple-cover inversion then yields
//! integer-valued invariants expected to be independent of the contact
//! index k. The sheaf side reads the same vertical functions at the
//! abscissa determined by (d, chi) and inverts the multiple-cover weights
//! along that single line. All checks return structured reports with the
//! compared values, never bare booleans.
//!
//! Conventions pinned by the degree-1 and degree-2 calibrations:
//! the torsion index of the vertical line at abscissa x0 is the denominator
//! of x0 + 3/2, and the sheaf-side reading of a stored degree-d coefficient
//! carries the sign (-1)^{d-1}. Both are configurable and the calibration
//! tests assert the selected options are the unique working ones.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::algebra::{format_rat, rat, rat_int, GradedSeries, LatticeVector, Rat};
use crate::error::ExtractError;
use crate::scattering::geometry::Window;
use crate::scattering::global::GlobalDiagram;
use crate::sources;

/// Torsion index of a rational class: the smallest positive ell such that
/// (3 ell) x lies in 3Z, i.e. the denominator of x in lowest terms. Found
/// by direct scan rather than a closed form.
pub fn torsion_d(x0: &Rat) -> u64 {
    let mut ell: u64 = 1;
    loop {
        let v = x0.clone() * rat_int(ell as i64);
        if v.is_integer() {
            return ell;
        }
        ell += 1;
    }
}

/// Torsion index attached to the vertical line at abscissa x0 of the global
/// chart. The deck identification shifts the class by 3/2 relative to the
/// raw abscissa; the calibration checks pin this choice.
pub fn vertical_torsion_index(x0: &Rat) -> u64 {
    torsion_d(&(x0.clone() + rat(3, 2)))
}

/// Smallest positive ell with (3 ell) x = 0 in Z/(3k); brute force.
fn d_of_residue(x: u64, three_k: u64) -> u64 {
    let mut ell = 1u64;
    loop {
        if (3 * ell * x) % three_k == 0 {
            return ell;
        }
        ell += 1;
    }
}

/// Number of x in Z/(3 ell) with d(x) = ell, by enumeration.
pub fn count_r(ell: u64) -> u64 {
    assert!(ell >= 1);
    let n = 3 * ell;
    (0..n).filter(|&x| d_of_residue(x, n) == ell).count() as u64
}

/// Number of pairs (a, b) in Z/(3k) x Z/(3k) with d((a, b)) = k and
/// d(a) = ell, by enumeration; requires ell | k.
pub fn count_s(k: u64, ell: u64) -> Result<u64, ExtractError> {
    if ell == 0 || k % ell != 0 {
        return Err(ExtractError::NotADivisor(ell, k));
    }
    let n = 3 * k;
    let mut count = 0u64;
    for a in 0..n {
        if d_of_residue(a, n) != ell {
            continue;
        }
        for b in 0..n {
            // d((a,b)) = lcm(d(a), d(b)) computed directly
            let da = ell;
            let db = d_of_residue(b, n);
            let pair = num_integer::lcm(da, db);
            if pair == k {
                count += 1;
            }
        }
    }
    Ok(count)
}

pub fn divisors(d: u32) -> Vec<u32> {
    (1..=d).filter(|k| d % k == 0).collect()
}

/// Total coefficient of the vertical exponent of degree `deg` in an
/// asymptotic vertical function (summed over bookkeeping orders). The
/// exponent lattice carries the 3-scaled y-axis, so degree d sits at
/// (0, -3d).
pub fn vertical_degree_coefficient(f: &GradedSeries, deg: u32) -> Rat {
    f.coeff_total(&LatticeVector::new(0, -3 * (deg as i64)))
}

/// Solve the triangular system c_ell = sum_{ell | k | d} (s_{k,ell}/r_ell)
/// N_{0,d}^k for the counts N_{0,d}^k, given the vertical functions per
/// torsion index.
pub fn solve_gw_from_vertical(
    h_by_ell: &BTreeMap<u64, GradedSeries>,
    d: u32,
) -> Result<BTreeMap<u32, Rat>, ExtractError> {
    let divs = divisors(d);
    let mut counts: BTreeMap<u32, Rat> = BTreeMap::new();
    for &k in divs.iter().rev() {
        let h = h_by_ell
            .get(&(k as u64))
            .ok_or(ExtractError::MissingTorsionLine(k as u64))?;
        let c = vertical_degree_coefficient(h, d);
        let r_ell = count_r(k as u64);
        // subtract the contributions of the already solved larger k'
        let mut rhs = c;
        for &kp in divs.iter().rev() {
            if kp <= k || kp % k != 0 {
                continue;
            }
            let s = count_s(kp as u64, k as u64)?;
            rhs -= rat(s as i64, r_ell as i64) * counts[&kp].clone();
        }
        let s_kk = count_s(k as u64, k as u64)?;
        counts.insert(k, rhs * rat(r_ell as i64, s_kk as i64));
    }
    Ok(counts)
}

/// Indexed families of extracted invariants, all exact.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantTable {
    /// N_{0,d}^k keyed by (d, k) with k | d
    pub gw: BTreeMap<(u32, u32), Rat>,
    /// signed counts (-1)^{d-1} N_{0,d}^k
    pub gw_bar: BTreeMap<(u32, u32), Rat>,
    /// multiple-cover inverted invariants, expected integer and k-independent
    pub bps: BTreeMap<(u32, u32), Rat>,
    /// sheaf-side invariants keyed by (d, chi mod d)
    pub sheaf: BTreeMap<(u32, u32), Rat>,
}

/// Forward multiple-cover sum: gw_bar(d,k) = sum_{k|d'|d} bps(d',k)/(d/d')^2.
pub fn gw_bar_from_bps(
    bps: &BTreeMap<(u32, u32), Rat>,
    d: u32,
    k: u32,
) -> Result<Rat, ExtractError> {
    let mut acc = Rat::zero();
    for dp in divisors(d) {
        if dp % k != 0 {
            continue;
        }
        let cover = (d / dp) as i64;
        let v = bps
            .get(&(dp, k))
            .ok_or(ExtractError::MissingEntry(dp, k as i64))?;
        acc += v.clone() / rat_int(cover * cover);
    }
    Ok(acc)
}

/// Invert the multiple-cover sum recursively in d.
pub fn bps_from_gw_bar(
    gw_bar: &BTreeMap<(u32, u32), Rat>,
    d: u32,
    k: u32,
) -> Result<Rat, ExtractError> {
    let mut acc = gw_bar
        .get(&(d, k))
        .ok_or(ExtractError::MissingEntry(d, k as i64))?
        .clone();
    // requires the bps values of proper divisors; recurse
    for dp in divisors(d) {
        if dp == d || dp % k != 0 {
            continue;
        }
        let cover = (d / dp) as i64;
        let v = bps_from_gw_bar(gw_bar, dp, k)?;
        acc -= v / rat_int(cover * cover);
    }
    Ok(acc)
}

/// Sign map applied when reading a stored vertical coefficient as a
/// sheaf-side invariant. The degree-alternating option is the one validated
/// by the calibration identities.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum SheafSignMap {
    #[default]
    AlternatingByDegree,
    Identity,
}

impl SheafSignMap {
    fn apply(&self, deg: u32, v: Rat) -> Rat {
        match self {
            SheafSignMap::Identity => v,
            SheafSignMap::AlternatingByDegree => {
                if deg % 2 == 0 {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

/// Extract the sheaf invariant for (d, chi) from the completed diagram: the
/// vertical line x0 = chi/d - 3/2 carries the multiples of the primitive
/// class of degree d0 = d/gcd(d, chi); the stored coefficient of the
/// degree-j multiple is (sign) sum_{k' | j/d0} Omega(k' d0)/ (j/(k' d0))^2,
/// which is inverted along the line.
pub fn sheaf_omega_from_vertical(
    diagram: &GlobalDiagram,
    d: u32,
    chi: i64,
    sign: SheafSignMap,
) -> Result<Rat, ExtractError> {
    if diagram.truncation() < 2 * d {
        return Err(ExtractError::InsufficientOrder {
            degree: d,
            needed: 2 * d,
            have: diagram.truncation(),
        });
    }
    let x0 = rat(chi, d as i64) - rat(3, 2);
    if x0 < diagram.window().x0 || x0 > diagram.window().x1 {
        return Err(ExtractError::AsymptoteOutsideWindow(format_rat(&x0)));
    }
    let g = num_integer::gcd(chi.unsigned_abs(), d as u64).max(1);
    let d0 = if chi == 0 { 1 } else { d as u64 / g } as u32;
    let kmax = d / d0;
    let f = diagram
        .vertical_function(&x0)
        .map_err(ExtractError::Diagram)?;
    // invert the multiple-cover weights along this line
    let mut omegas: BTreeMap<u32, Rat> = BTreeMap::new();
    for k in 1..=kmax {
        let deg = k * d0;
        let stored = vertical_degree_coefficient(&f, deg);
        if stored.is_zero() && diagram.truncation() < 2 * deg {
            return Err(ExtractError::InsufficientOrder {
                degree: deg,
                needed: 2 * deg,
                have: diagram.truncation(),
            });
        }
        let mut acc = sign.apply(deg, stored);
        for kp in 1..k {
            if k % kp != 0 {
                continue;
            }
            let cover = (k / kp) as i64;
            acc -= omegas[&kp].clone() / rat_int(cover * cover);
        }
        omegas.insert(k, acc);
    }
    Ok(omegas[&kmax].clone())
}

/// Reading of the correspondence identity right-hand side.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum CorrespondenceReading {
    /// multiple-cover inverted invariants (the validated reading)
    #[default]
    Bps,
    /// signed raw counts
    SignedGw,
}

/// A pairwise equality report over a labelled family of exact values.
#[derive(Clone, Debug, PartialEq)]
pub struct EqualityReport {
    pub label: String,
    pub entries: Vec<(String, Rat)>,
    pub pass: bool,
    pub common: Option<Rat>,
}

impl EqualityReport {
    fn from_entries(label: String, entries: Vec<(String, Rat)>) -> Self {
        let pass = entries.windows(2).all(|w| w[0].1 == w[1].1);
        let common = if pass && !entries.is_empty() {
            Some(entries[0].1.clone())
        } else {
            None
        };
        Self {
            label,
            entries,
            pass,
            common,
        }
    }

    pub fn render(&self) -> String {
        let vals: Vec<String> = self
            .entries
            .iter()
            .map(|(k, v)| format!("{k} = {}", format_rat(v)))
            .collect();
        format!(
            "{}: {} [{}]",
            self.label,
            if self.pass { "PASS" } else { "FAIL" },
            vals.join(", ")
        )
    }
}

/// A two-sided identity report.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrespondenceReport {
    pub label: String,
    pub lhs: Rat,
    pub rhs: Rat,
    pub pass: bool,
}

impl CorrespondenceReport {
    pub fn render(&self) -> String {
        format!(
            "{}: {} [lhs = {}, rhs = {}]",
            self.label,
            if self.pass { "PASS" } else { "FAIL" },
            format_rat(&self.lhs),
            format_rat(&self.rhs)
        )
    }
}

/// k-independence of the inverted invariants at fixed degree.
pub fn check_takahashi(table: &InvariantTable, d: u32) -> Result<EqualityReport, ExtractError> {
    let mut entries = Vec::new();
    for k in divisors(d) {
        let v = table
            .bps
            .get(&(d, k))
            .ok_or(ExtractError::MissingEntry(d, k as i64))?;
        entries.push((format!("k={k}"), v.clone()));
    }
    Ok(EqualityReport::from_entries(
        format!("bps k-independence, d={d}"),
        entries,
    ))
}

/// chi-independence of the sheaf invariants at fixed degree.
pub fn check_chi_independence(
    table: &InvariantTable,
    d: u32,
) -> Result<EqualityReport, ExtractError> {
    let mut entries = Vec::new();
    for chi in 0..d {
        let v = table
            .sheaf
            .get(&(d, chi))
            .ok_or(ExtractError::MissingEntry(d, chi as i64))?;
        entries.push((format!("chi={chi}"), v.clone()));
    }
    Ok(EqualityReport::from_entries(
        format!("sheaf chi-independence, d={d}"),
        entries,
    ))
}

/// The correspondence identity: the sheaf invariant at (d, chi) equals
/// sum over ell | k | d of (s_{k,ell}/r_ell) times the curve-side invariant
/// at (d, k), with ell = d/gcd(d, chi).
pub fn check_correspondence(
    table: &InvariantTable,
    d: u32,
    chi: u32,
    reading: CorrespondenceReading,
) -> Result<CorrespondenceReport, ExtractError> {
    let lhs = table
        .sheaf
        .get(&(d, chi % d))
        .ok_or(ExtractError::MissingEntry(d, (chi % d) as i64))?
        .clone();
    let g = num_integer::gcd(chi as u64, d as u64).max(1);
    let ell = if chi == 0 { 1 } else { (d as u64) / g };
    let r_ell = count_r(ell);
    let mut rhs = Rat::zero();
    for k in divisors(d) {
        if (k as u64) % ell != 0 {
            continue;
        }
        let s = count_s(k as u64, ell)?;
        let side = match reading {
            CorrespondenceReading::Bps => &table.bps,
            CorrespondenceReading::SignedGw => &table.gw_bar,
        };
        let v = side
            .get(&(d, k))
            .ok_or(ExtractError::MissingEntry(d, k as i64))?;
        rhs += rat(s as i64, r_ell as i64) * v.clone();
    }
    Ok(CorrespondenceReport {
        label: format!("correspondence d={d}, chi={chi} ({reading:?})"),
        lhs: lhs.clone(),
        rhs: rhs.clone(),
        pass: lhs == rhs,
    })
}

/// Canonical abscissa of a vertical line with a given torsion index.
pub fn canonical_abscissa(ell: u64) -> Rat {
    rat(1, ell as i64) - rat(3, 2)
}

/// Counts read off a completed two-ray diagram: for coprime (a, b) the
/// outgoing ray of direction -(a m1 + b m2) carries the series
/// sum_k N^{ka,kb} z^{k(a m1 + b m2)} t^{k(a+b)}; returns the nonzero
/// N^{ka,kb} keyed by (a, b, k).
pub fn gps_counts(
    completed: &crate::scattering::local::LocalDiagram,
    m1: &LatticeVector,
    m2: &LatticeVector,
) -> Result<BTreeMap<(u32, u32, u32), Rat>, ExtractError> {
    use crate::scattering::local::Orientation;
    let n = completed.truncation();
    let mut out = BTreeMap::new();
    for a in 0..=n {
        for b in 0..=n {
            if a + b == 0 || a + b > n || num_integer::gcd(a, b) != 1 {
                continue;
            }
            let v = m1.scale(a as i64).add(&m2.scale(b as i64));
            let dir = v.primitive_part().neg();
            let ray = match completed.ray(&dir, Orientation::Outgoing) {
                Some(r) => r,
                None => continue,
            };
            for k in 1..=(n / (a + b)) {
                let c = ray
                    .function
                    .coeff(&v.scale(k as i64), &crate::algebra::Order::T(k * (a + b)));
                if !c.is_zero() {
                    out.insert((a, b, k), c);
                }
            }
        }
    }
    Ok(out)
}

/// CSV form of a two-ray count table: a,b,k,value.
pub fn gps_counts_to_csv(counts: &BTreeMap<(u32, u32, u32), Rat>) -> String {
    let mut out = String::from("a,b,k,value\n");
    for ((a, b, k), v) in counts {
        out.push_str(&format!("{a},{b},{k},{}\n", format_rat(v)));
    }
    out
}

/// Default window for an extraction up to a given degree: covers the
/// canonical extraction lines in [-3/2, -1/2] together with a halo of
/// tangent lines feeding their coefficients. Stability of the extracted
/// values under enlargement is part of the acceptance checks.
pub fn default_window(degree: u32) -> Window {
    window_with_halo(1.max(degree as i64 - 2))
}

/// Window spanning the tangent lines n in [-2-halo, halo], with headroom
/// above the pairwise tangent crossings.
pub fn window_with_halo(halo: i64) -> Window {
    let x0 = rat(-2 - halo, 1) - rat(1, 2);
    let x1 = rat(halo, 1) + rat(1, 2);
    let ytop = rat((halo + 2) * (halo + 2), 2) + rat_int(1);
    let corner = |x: &Rat| -> Rat { -(x.clone() * x.clone()) / rat_int(2) };
    let ymin = corner(&x0).max(corner(&x1)).max(-ytop.clone());
    Window::new(x0, x1, ymin, ytop).expect("halo window is valid")
}

/// A strictly larger window for stability checks: one more unit of halo.
pub fn enlarged_window(w: &Window) -> Window {
    let x0 = w.x0.clone() - rat_int(1);
    let x1 = w.x1.clone() + rat_int(1);
    let ytop = w.y1.clone() + rat(3, 1);
    let corner = |x: &Rat| -> Rat { -(x.clone() * x.clone()) / rat_int(2) };
    let ymin = corner(&x0).max(corner(&x1)).max(w.y0.clone() - rat_int(2));
    Window::new(x0, x1, ymin, ytop).expect("enlarged window is valid")
}

/// Default truncation order for a target degree.
pub fn default_order(degree: u32) -> u32 {
    2 * degree
}

/// Extraction options for the full pipeline.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub degree: u32,
    pub order: u32,
    pub window: Window,
    pub sign: SheafSignMap,
    pub reading: CorrespondenceReading,
    pub schedule_seed: Option<u64>,
}

impl PipelineConfig {
    pub fn for_degree(degree: u32) -> Self {
        Self {
            degree,
            order: default_order(degree),
            window: default_window(degree),
            sign: SheafSignMap::default(),
            reading: CorrespondenceReading::default(),
            schedule_seed: None,
        }
    }
}

/// Build the initial data, complete the diagram once, and run both
/// extractions. The curve-counting and sheaf-side initial diagrams are
/// equal apart from charge annotations (this is asserted), so one
/// completion serves both readings.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<(InvariantTable, GlobalDiagram), ExtractError> {
    let p2e = sources::build_p2e_initial(&cfg.window, cfg.order)?;
    let sheaf = sources::build_sheaf_initial(&cfg.window, cfg.order)?;
    if p2e.rays().len() != sheaf.rays().len()
        || p2e
            .rays()
            .iter()
            .zip(sheaf.rays().iter())
            .any(|(a, b)| a.base != b.base || a.dir != b.dir || a.function != b.function)
    {
        return Err(ExtractError::Algebra(crate::error::AlgebraError::Internal(
            "initial data mismatch between the two sides".into(),
        )));
    }
    let completed = p2e.complete_with_schedule(cfg.schedule_seed)?;
    let table = extract_table(&completed, cfg)?;
    Ok((table, completed))
}

/// Run both extractions on an already completed diagram.
pub fn extract_table(
    completed: &GlobalDiagram,
    cfg: &PipelineConfig,
) -> Result<InvariantTable, ExtractError> {
    let mut table = InvariantTable::default();
    // curve-counting side: one vertical line per torsion index
    let mut h_by_ell: BTreeMap<u64, GradedSeries> = BTreeMap::new();
    for d in 1..=cfg.degree {
        for ell in divisors(d) {
            let ell = ell as u64;
            if h_by_ell.contains_key(&ell) {
                continue;
            }
            let x0 = canonical_abscissa(ell);
            debug_assert_eq!(vertical_torsion_index(&x0), ell);
            if x0 < completed.window().x0 || x0 > completed.window().x1 {
                return Err(ExtractError::AsymptoteOutsideWindow(format_rat(&x0)));
            }
            let f = completed
                .vertical_function(&x0)
                .map_err(ExtractError::Diagram)?;
            h_by_ell.insert(ell, f);
        }
    }
    for d in 1..=cfg.degree {
        if cfg.order < 2 * d {
            return Err(ExtractError::InsufficientOrder {
                degree: d,
                needed: 2 * d,
                have: cfg.order,
            });
        }
        let counts = solve_gw_from_vertical(&h_by_ell, d)?;
        for (k, v) in counts {
            let signed = if d % 2 == 0 { -v.clone() } else { v.clone() };
            table.gw.insert((d, k), v);
            table.gw_bar.insert((d, k), signed);
        }
        for k in divisors(d) {
            let b = bps_from_gw_bar(&table.gw_bar, d, k)?;
            table.bps.insert((d, k), b);
        }
        for chi in 0..d {
            let omega = sheaf_omega_from_vertical(completed, d, chi as i64, cfg.sign)?;
            table.sheaf.insert((d, chi), omega);
        }
    }
    Ok(table)
}

/// True if every inverted invariant in the table is an integer.
pub fn all_bps_integral(table: &InvariantTable) -> bool {
    table
        .bps
        .values()
        .chain(table.sheaf.values())
        .all(|v| v.denom().is_one() || v.denom().clone().abs().is_one())
}
