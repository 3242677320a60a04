//! Acceptance suite: one test per criterion, exact rational equality
//! throughout (tolerance zero). Each test prints a PASS line with the
//! checked values; run with `--nocapture` to see them.
//!
//! The degree-4 stretch run is gated behind SCATTERING_DEGREE4=1.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use scattering::algebra::{format_rat, rat, GradedSeries, LatticeVector, Order, Rat};
use scattering::invariants::{
    self, all_bps_integral, canonical_abscissa, check_chi_independence, check_correspondence,
    check_takahashi, default_window, enlarged_window, gps_counts, sheaf_omega_from_vertical,
    vertical_torsion_index, CorrespondenceReading, InvariantTable, PipelineConfig, SheafSignMap,
};
use scattering::io;
use scattering::render::render_svg;
use scattering::scattering::global::GlobalDiagram;
use scattering::scattering::local::{self, LocalDiagram, LocalRay, Orientation};
use scattering::scattering::perturb;
use scattering::sources;

fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing fixture {path}: {e}"))
}

fn pipeline(cfg: PipelineConfig) -> (InvariantTable, GlobalDiagram) {
    invariants::run_pipeline(&cfg).expect("pipeline run")
}

fn run_d1() -> &'static (InvariantTable, GlobalDiagram) {
    static CELL: OnceLock<(InvariantTable, GlobalDiagram)> = OnceLock::new();
    CELL.get_or_init(|| pipeline(PipelineConfig::for_degree(1)))
}

fn run_d2() -> &'static (InvariantTable, GlobalDiagram) {
    static CELL: OnceLock<(InvariantTable, GlobalDiagram)> = OnceLock::new();
    CELL.get_or_init(|| pipeline(PipelineConfig::for_degree(2)))
}

fn run_d3() -> &'static (InvariantTable, GlobalDiagram) {
    static CELL: OnceLock<(InvariantTable, GlobalDiagram)> = OnceLock::new();
    CELL.get_or_init(|| pipeline(PipelineConfig::for_degree(3)))
}

fn li2(n: u32, m0: LatticeVector) -> GradedSeries {
    sources::dilog_series(n, &m0)
}

fn ingoing(support: LatticeVector, f: GradedSeries) -> LocalRay {
    LocalRay::new(support.neg(), Orientation::Ingoing, f).unwrap()
}

#[test]
fn criterion_01_local_engine_elementary_example() {
    let started = Instant::now();
    let input = io::local_from_json(&fixture("two_in_two_out.json")).unwrap();
    assert!(!local::is_consistent(&input).unwrap());
    let completed = local::complete(&input).unwrap();
    assert!(local::is_consistent(&completed).unwrap());
    let added = local::added_rays(&input, &completed);
    assert_eq!(added.len(), 1, "exactly one added ray");
    let m1 = LatticeVector::new(1, 0);
    let m2 = LatticeVector::new(0, 1);
    assert_eq!(added[0].direction, m1.add(&m2).neg());
    let h1 = input.ray(&m1.neg(), Orientation::Ingoing).unwrap();
    let h2 = input.ray(&m2.neg(), Orientation::Ingoing).unwrap();
    let bracket = h1.function.bracket(&h2.function).unwrap();
    assert_eq!(added[0].function, bracket);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 1, "runtime budget");
    eprintln!(
        "criterion 01 PASS: added exactly (-R(m1+m2), [H1,H2]) = {} in {elapsed:?}",
        bracket.to_text()
    );
}

/// Seeded random local diagram with up to `max_rays` ingoing rays.
fn random_local_diagram(rng: &mut StdRng) -> LocalDiagram {
    let pool = [
        LatticeVector::new(1, 0),
        LatticeVector::new(0, 1),
        LatticeVector::new(1, 1),
        LatticeVector::new(-1, 1),
        LatticeVector::new(1, -1),
        LatticeVector::new(2, 1),
        LatticeVector::new(1, 2),
        LatticeVector::new(-1, 0),
        LatticeVector::new(-1, -2),
    ];
    let truncation = rng.random_range(1..=5u32);
    let count = rng.random_range(1..=4usize);
    let mut picked: Vec<LatticeVector> = Vec::new();
    while picked.len() < count {
        let c = pool[rng.random_range(0..pool.len())];
        if !picked.contains(&c) {
            picked.push(c);
        }
    }
    let rays: Vec<LocalRay> = picked
        .into_iter()
        .map(|support| {
            let terms = rng.random_range(1..=2usize);
            let mut items = Vec::new();
            for _ in 0..terms {
                let order = rng.random_range(1..=truncation);
                let mult = rng.random_range(1..=2i64);
                let num = *[-2i64, -1, 1, 2, 3].get(rng.random_range(0..5)).unwrap();
                let den = *[1i64, 2, 3].get(rng.random_range(0..3)).unwrap();
                items.push((support.scale(mult), Order::T(order), rat(num, den)));
            }
            ingoing(
                support,
                GradedSeries::from_terms(truncation, items).unwrap(),
            )
        })
        .collect();
    LocalDiagram::new(truncation, rays).unwrap()
}

#[test]
fn criterion_02_oracle_equivalence_on_random_corpus() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xacce9);
    for case in 0..100 {
        let d = random_local_diagram(&mut rng);
        let direct = local::complete(&d).unwrap();
        let oracle = perturb::complete_perturbed(&d).unwrap();
        assert_eq!(direct, oracle, "case {case} diverged");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "runtime budget");
    eprintln!("criterion 02 PASS: 100 random diagrams, direct == perturbed, {elapsed:?}");
}

#[test]
fn criterion_03_idempotence_and_uniqueness() {
    let m1 = LatticeVector::new(1, 0);
    let m2 = LatticeVector::new(0, 1);
    let m3 = LatticeVector::new(-1, 1);
    let d = LocalDiagram::new(
        4,
        vec![
            ingoing(m1, li2(4, m1)),
            ingoing(m2, li2(4, m2)),
            ingoing(m3, li2(4, m3)),
        ],
    )
    .unwrap();
    let s = local::complete(&d).unwrap();
    assert_eq!(local::complete(&s).unwrap(), s, "idempotence");
    for seed in 0..10u64 {
        assert_eq!(
            local::complete_with_shuffle(&d, seed).unwrap(),
            s,
            "shuffle seed {seed}"
        );
    }
    eprintln!(
        "criterion 03 PASS: completion idempotent and invariant under 10 processing shuffles ({} rays in S(D))",
        s.rays().len()
    );
}

#[test]
fn criterion_04_two_ray_counts() {
    let m1 = LatticeVector::new(1, 0);
    let m2 = LatticeVector::new(0, 1);
    for n in [4u32, 5] {
        let d = sources::build_gps_diagram(&m1, &m2, n).unwrap();
        let direct = local::complete(&d).unwrap();
        let oracle = perturb::complete_perturbed(&d).unwrap();
        assert_eq!(direct, oracle, "engines at truncation {n}");
        let counts = gps_counts(&direct, &m1, &m2).unwrap();
        assert_eq!(counts[&(1, 1, 1)], rat(1, 1), "N^{{1,1}} = 1");
    }
    eprintln!("criterion 04 PASS: N^(1,1) = 1/1 and engines agree at truncations 4 and 5");
}

#[test]
fn criterion_05_initial_data_equality_and_tangency() {
    use scattering::scattering::geometry::Window;
    let windows = [
        Window::new(rat(-1, 2), rat(1, 2), rat(-1, 8), rat(1, 2)).unwrap(),
        Window::new(rat(-2, 1), rat(2, 1), rat(-2, 1), rat(2, 1)).unwrap(),
        Window::new(rat(-7, 2), rat(3, 2), rat(-9, 8), rat(11, 2)).unwrap(),
        Window::new(rat(-5, 1), rat(1, 1), rat(-1, 2), rat(8, 1)).unwrap(),
        Window::new(rat(-1, 1), rat(4, 1), rat(-1, 2), rat(6, 1)).unwrap(),
    ];
    for (i, w) in windows.iter().enumerate() {
        for order in 1..=6u32 {
            let a = sources::build_p2e_initial(w, order).unwrap();
            let b = sources::build_sheaf_initial(w, order).unwrap();
            assert_eq!(a.rays().len(), b.rays().len(), "window {i} order {order}");
            for (ra, rb) in a.rays().iter().zip(b.rays().iter()) {
                assert_eq!(ra.base, rb.base);
                assert_eq!(ra.dir, rb.dir);
                assert_eq!(ra.function, rb.function);
            }
        }
    }
    // {Re Z = 0} for gamma(O(n)) is the tangent line at (n, -n^2/2)
    for n in -20i64..=20 {
        let g = sources::chern_of_line_bundle(n);
        let p = sources::tangency_point(n);
        let z = sources::central_charge(&g, &p.x, &p.y).unwrap();
        assert!(z.is_zero(), "central charge vanishes at the tangency");
        for x in [rat(-5, 3), rat(1, 7), rat(22, 7)] {
            // on the zero line y = -n x + n^2/2 the radicand is (x - n)^2,
            // so the line touches the parabola exactly at x = n
            let y = -rat(n, 1) * x.clone() + rat(n * n, 2);
            let z = sources::central_charge(&g, &x, &y).unwrap();
            assert!(z.re == rat(0, 1));
            let expect = (x.clone() - rat(n, 1)) * (x.clone() - rat(n, 1));
            assert_eq!(z.im_radicand, expect);
        }
    }
    eprintln!(
        "criterion 05 PASS: initial data equal on 5 windows at orders 1..6; tangency exact for |n| <= 20"
    );
}

#[test]
fn criterion_06_degree_1_calibration() {
    let started = Instant::now();
    let (table, diagram) = run_d1();
    assert_eq!(table.bps[&(1, 1)], rat(1, 1), "curve-side invariant");
    let mut values = Vec::new();
    for chi in 0..=2i64 {
        let omega = sheaf_omega_from_vertical(diagram, 1, chi, SheafSignMap::default()).unwrap();
        assert_eq!(omega, rat(3, 1), "sheaf invariant at chi = {chi}");
        values.push(format!("chi={chi}: {}", format_rat(&omega)));
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "runtime budget");
    eprintln!(
        "criterion 06 PASS: curve side 1/1; sheaf side {} in {elapsed:?}",
        values.join(", ")
    );
}

#[test]
fn criterion_07_degree_2() {
    let (table, _) = run_d2();
    assert_eq!(table.sheaf[&(2, 0)], rat(-6, 1));
    assert_eq!(table.sheaf[&(2, 1)], rat(-6, 1));
    let tk = check_takahashi(table, 2).unwrap();
    assert!(tk.pass, "{}", tk.render());
    for chi in [0u32, 1] {
        let c = check_correspondence(table, 2, chi, CorrespondenceReading::Bps).unwrap();
        assert!(c.pass, "{}", c.render());
    }
    // the identity-based reading of the right-hand side is discriminated
    // away at (2, 0): both readings agree at degree 1, only the inverted
    // (multiple-cover) one survives degree 2
    let wrong = check_correspondence(table, 2, 0, CorrespondenceReading::SignedGw).unwrap();
    assert!(!wrong.pass, "signed-count reading must fail at (2,0)");
    eprintln!(
        "criterion 07 PASS: sheaf invariants -6/1 at both chi classes; k-independence {}; correspondence holds (and pins the inverted reading, raw reading gives {})",
        format_rat(tk.common.as_ref().unwrap()),
        format_rat(&wrong.rhs)
    );
}

#[test]
fn criterion_08_degree_3_property_suite() {
    let started = Instant::now();
    let (table, _) = run_d3();
    let tk = check_takahashi(table, 3).unwrap();
    assert!(tk.pass, "{}", tk.render());
    let chi = check_chi_independence(table, 3).unwrap();
    assert!(chi.pass, "{}", chi.render());
    for c in 0..3u32 {
        let r = check_correspondence(table, 3, c, CorrespondenceReading::Bps).unwrap();
        assert!(r.pass, "{}", r.render());
    }
    assert!(all_bps_integral(table), "integrality");
    let common = tk.common.clone().unwrap();
    let sheaf_common = chi.common.clone().unwrap();
    // order-stability of the recorded degree-3 value (criterion 10 hook)
    let mut refined = PipelineConfig::for_degree(3);
    refined.order += 1;
    let (table_up, _) = pipeline(refined);
    assert_eq!(table_up, *table, "order 6 -> 7 stability");
    let elapsed = started.elapsed();
    eprintln!(
        "criterion 08 PASS: degree-3 invariant {} (sheaf {}), all checks exact, stable under order 6 -> 7, {elapsed:?}",
        format_rat(&common),
        format_rat(&sheaf_common)
    );
}

#[test]
fn criterion_09_degree_4_stretch() {
    if std::env::var_os("SCATTERING_DEGREE4").is_none() {
        eprintln!(
            "criterion 09 SKIPPED: best-effort stretch run; set SCATTERING_DEGREE4=1 to enable"
        );
        return;
    }
    let started = Instant::now();
    let (table, _) = pipeline(PipelineConfig::for_degree(4));
    let tk = check_takahashi(&table, 4).unwrap();
    assert!(tk.pass, "{}", tk.render());
    eprintln!(
        "criterion 09 PASS: degree-4 k-independence over k in {{1,2,4}}, common value {} in {elapsed:?}",
        format_rat(tk.common.as_ref().unwrap()),
        elapsed = started.elapsed()
    );
}

#[test]
fn criterion_10_stability_under_refinement() {
    for degree in [1u32, 2] {
        let base = if degree == 1 { run_d1() } else { run_d2() };
        let mut refined = PipelineConfig::for_degree(degree);
        refined.order += 1;
        let (table_up, _) = pipeline(refined);
        assert_eq!(table_up, base.0, "degree {degree} order refinement");
        let mut wide = PipelineConfig::for_degree(degree);
        wide.window = enlarged_window(&wide.window);
        let (table_wide, _) = pipeline(wide);
        assert_eq!(table_wide, base.0, "degree {degree} window enlargement");
    }
    eprintln!(
        "criterion 10 PASS: degrees 1 and 2 stable under order+1 and window enlargement (degree 3 covered in criterion 08)"
    );
}

#[test]
fn criterion_11_determinism_and_parallelism() {
    let cfg = PipelineConfig::for_degree(1);
    let initial = sources::build_p2e_initial(&cfg.window, cfg.order).unwrap();
    let reference = initial.complete().unwrap();
    // schedule shuffles
    for seed in [3u64, 17, 2024] {
        let shuffled = initial.complete_with_schedule(Some(seed)).unwrap();
        assert_eq!(shuffled, reference, "schedule seed {seed}");
    }
    // single-threaded and multi-threaded pools
    for threads in [1usize, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let result = pool.install(|| initial.complete().unwrap());
        assert_eq!(result, reference, "{threads}-thread pool");
    }
    eprintln!(
        "criterion 11 PASS: completion identical across schedules and across 1-/4-thread pools ({} rays)",
        reference.rays().len()
    );
}

#[test]
fn criterion_12_io_byte_stability_and_check_exit() {
    // JSON round-trips byte-identically
    let w = default_window(1);
    let d = sources::build_sheaf_initial(&w, 2)
        .unwrap()
        .complete()
        .unwrap();
    let json = io::global_to_json(&d).unwrap();
    let reparsed = io::global_from_json(&json).unwrap();
    assert_eq!(io::global_to_json(&reparsed).unwrap(), json);
    let local_d = io::local_from_json(&fixture("two_in_two_out.json")).unwrap();
    let local_json = io::local_to_json(&local_d).unwrap();
    assert_eq!(
        io::local_to_json(&io::local_from_json(&local_json).unwrap()).unwrap(),
        local_json
    );
    // SVG golden bytes, stable across schedule seeds
    let golden_window =
        scattering::scattering::geometry::Window::new(rat(-1, 2), rat(1, 2), rat(-1, 8), rat(1, 2))
            .unwrap();
    let order1 = sources::build_p2e_initial(&golden_window, 1)
        .unwrap()
        .complete()
        .unwrap();
    let svg = render_svg(&order1);
    assert_eq!(svg, fixture("p2e_order1_golden.svg"), "golden SVG bytes");
    let order1_shuffled = sources::build_p2e_initial(&golden_window, 1)
        .unwrap()
        .complete_with_schedule(Some(99))
        .unwrap();
    assert_eq!(render_svg(&order1_shuffled), svg);
    // monotone ray counts between orders 3 and 4 on a fixed window
    let w34 = default_window(1);
    let r3 = sources::build_p2e_initial(&w34, 3).unwrap().complete().unwrap();
    let r4 = sources::build_p2e_initial(&w34, 4).unwrap().complete().unwrap();
    assert!(r4.rays().len() > r3.rays().len(), "order 4 has more rays");
    // the check command exits nonzero on a corrupted table, zero on a clean one
    let bin = env!("CARGO_BIN_EXE_scat");
    let fixture_dir = format!("{}/tests/fixtures", env!("CARGO_MANIFEST_DIR"));
    let bad = std::process::Command::new(bin)
        .args([
            "check",
            "--degree",
            "1",
            "--expected",
            &format!("{fixture_dir}/degree1_corrupted.csv"),
        ])
        .output()
        .unwrap();
    assert!(!bad.status.success(), "corrupted fixture must fail");
    let good = std::process::Command::new(bin)
        .args([
            "check",
            "--degree",
            "1",
            "--expected",
            &format!("{fixture_dir}/degree1_expected.csv"),
        ])
        .output()
        .unwrap();
    assert!(good.status.success(), "clean fixture must pass");
    eprintln!(
        "criterion 12 PASS: JSON and SVG byte-stable; check exits {} on corrupted and {} on clean fixtures",
        bad.status.code().unwrap_or(-1),
        good.status.code().unwrap_or(-1)
    );
}

#[test]
fn vertical_torsion_convention_is_calibrated() {
    // the torsion index of the canonical lines matches the deck-shifted
    // denominator; the raw denominator reading fails already at ell = 1
    for ell in 1..=4u64 {
        let x0 = canonical_abscissa(ell);
        assert_eq!(vertical_torsion_index(&x0), ell);
    }
    let x0 = canonical_abscissa(1);
    assert_eq!(invariants::torsion_d(&x0), 2, "raw denominator differs");
    // the sheaf sign map is pinned by degree 2: the identity option fails
    let (_, diagram) = run_d2();
    let alt = sheaf_omega_from_vertical(diagram, 2, 1, SheafSignMap::Identity).unwrap();
    assert_eq!(alt, rat(6, 1), "identity sign map gives the wrong sign");
    let good = sheaf_omega_from_vertical(diagram, 2, 1, SheafSignMap::default()).unwrap();
    assert_eq!(good, rat(-6, 1));
    eprintln!("torsion offset and sign map are the unique calibrated options");
}

#[test]
fn twist_periodicity_of_sheaf_invariants() {
    // tensoring by O(1) shifts chi by d: the extraction at chi and chi + d
    // reads different vertical lines but must agree
    let (_, diagram) = run_d2();
    let a = sheaf_omega_from_vertical(diagram, 2, 1, SheafSignMap::default()).unwrap();
    let b = sheaf_omega_from_vertical(diagram, 2, 3, SheafSignMap::default()).unwrap();
    assert_eq!(a, b);
    let mut seen = BTreeMap::new();
    for chi in 0..=2i64 {
        let (_, d1) = run_d1();
        let v = sheaf_omega_from_vertical(d1, 1, chi, SheafSignMap::default()).unwrap();
        seen.insert(chi, v);
    }
    assert!(seen.values().all(|v: &Rat| *v == rat(3, 1)));
    eprintln!("twist periodicity holds: chi and chi + d read equal invariants");
}
