//! Command-line surface for the scattering engine.
//!
//! Subcommands: `local` (complete a local diagram from JSON), `gps`
//! (two-ray scattering counts), `p2e` / `sheaf` (build and complete the
//! global diagram on a window, with optional SVG), `invariants` (full
//! extraction to a degree, CSV), and `check` (cross-validation report;
//! nonzero exit status when any check fails).
//!
//! The worker thread count follows the RAYON_NUM_THREADS environment
//! variable; all file outputs are byte-stable across runs and thread
//! counts.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scattering::algebra::{parse_rat, LatticeVector, Rat};
use scattering::invariants::{
    self, all_bps_integral, check_chi_independence, check_correspondence, check_takahashi,
    PipelineConfig,
};
use scattering::io;
use scattering::render::render_svg;
use scattering::scattering::geometry::Window;
use scattering::scattering::local;
use scattering::sources;

#[derive(Parser)]
#[command(name = "scat", version, about = "Exact scattering diagram computations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Truncation order (default: twice the degree where applicable)
    #[arg(long)]
    order: Option<u32>,
    /// Window as four rationals "x0,x1,y0,y1"
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Seed for the event-schedule shuffle (output must not depend on it)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Complete a local scattering diagram given as JSON
    Local {
        /// Input diagram file
        #[arg(long)]
        input: PathBuf,
        /// Output file for the completion (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-ray scattering: the count table of the completed diagram
    Gps {
        /// First primitive direction "a,b"
        #[arg(long)]
        m1: String,
        /// Second primitive direction "a,b"
        #[arg(long)]
        m2: String,
        /// Truncation order
        #[arg(long)]
        order: u32,
        /// Output CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and complete the curve-counting-side global diagram
    P2e {
        #[command(flatten)]
        common: GlobalArgs,
        /// Output JSON file (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Render the completed diagram to an SVG file
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Build and complete the sheaf-side global diagram
    Sheaf {
        #[command(flatten)]
        common: GlobalArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Full invariant extraction up to a degree, written as CSV
    Invariants {
        /// Largest curve degree to extract
        #[arg(long)]
        degree: u32,
        #[command(flatten)]
        common: GlobalArgs,
        /// Output CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cross-validation checks; exit nonzero if any fails
    Check {
        /// Largest curve degree to check
        #[arg(long)]
        degree: u32,
        #[command(flatten)]
        common: GlobalArgs,
        /// Compare the extracted table against a reference CSV
        #[arg(long)]
        expected: Option<PathBuf>,
        /// Also verify stability under order and window refinement
        #[arg(long)]
        stability: bool,
        /// Report file (stdout always gets a copy)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_direction(s: &str) -> Result<LatticeVector> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("direction must be \"a,b\", got {s:?}");
    }
    Ok(LatticeVector::new(
        parts[0].trim().parse().context("direction component")?,
        parts[1].trim().parse().context("direction component")?,
    ))
}

fn parse_window(s: &str) -> Result<Window> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        bail!("window must be \"x0,x1,y0,y1\", got {s:?}");
    }
    let q = |t: &str| -> Result<Rat> {
        parse_rat(t).with_context(|| format!("bad rational {t:?}"))
    };
    Ok(Window::new(q(parts[0])?, q(parts[1])?, q(parts[2])?, q(parts[3])?)?)
}

fn emit(path: &Option<PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn build_config(degree: u32, common: &GlobalArgs) -> Result<PipelineConfig> {
    if degree == 0 {
        bail!("degree must be at least 1");
    }
    let mut cfg = PipelineConfig::for_degree(degree);
    if let Some(o) = common.order {
        if o == 0 {
            bail!("order must be at least 1");
        }
        cfg.order = o;
    }
    if let Some(w) = &common.window {
        cfg.window = parse_window(w)?;
    }
    cfg.schedule_seed = common.seed;
    Ok(cfg)
}

fn run_global(
    side_sheaf: bool,
    common: &GlobalArgs,
    out: &Option<PathBuf>,
    svg: &Option<PathBuf>,
) -> Result<()> {
    let order = common.order.unwrap_or(4);
    let window = match &common.window {
        Some(w) => parse_window(w)?,
        None => invariants::default_window(order.div_ceil(2)),
    };
    let initial = if side_sheaf {
        sources::build_sheaf_initial(&window, order)?
    } else {
        sources::build_p2e_initial(&window, order)?
    };
    let completed = initial.complete_with_schedule(common.seed)?;
    emit(out, &io::global_to_json(&completed)?)?;
    if let Some(path) = svg {
        std::fs::write(path, render_svg(&completed))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_check(
    degree: u32,
    common: &GlobalArgs,
    expected: &Option<PathBuf>,
    stability: bool,
    out: &Option<PathBuf>,
) -> Result<bool> {
    let cfg = build_config(degree, common)?;
    let (table, completed) = invariants::run_pipeline(&cfg)?;
    let mut lines: Vec<String> = Vec::new();
    let mut all_pass = true;
    for d in 1..=degree {
        let t = check_takahashi(&table, d)?;
        all_pass &= t.pass;
        lines.push(t.render());
        let c = check_chi_independence(&table, d)?;
        all_pass &= c.pass;
        lines.push(c.render());
        for chi in 0..d {
            let r = check_correspondence(&table, d, chi, cfg.reading)?;
            all_pass &= r.pass;
            lines.push(r.render());
        }
    }
    let integral = all_bps_integral(&table);
    all_pass &= integral;
    lines.push(format!(
        "integrality of inverted invariants: {}",
        if integral { "PASS" } else { "FAIL" }
    ));
    if let Some(path) = expected {
        let reference = io::table_from_csv(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )?;
        let same = reference == table;
        all_pass &= same;
        lines.push(format!(
            "comparison against {}: {}",
            path.display(),
            if same { "PASS" } else { "FAIL" }
        ));
    }
    if stability {
        // order refinement
        let mut refined = cfg.clone();
        refined.order += 1;
        let (table_up, _) = invariants::run_pipeline(&refined)?;
        let same_order = table_up == table;
        all_pass &= same_order;
        lines.push(format!(
            "stability under order {} -> {}: {}",
            cfg.order,
            cfg.order + 1,
            if same_order { "PASS" } else { "FAIL" }
        ));
        // window enlargement
        let mut wide = cfg.clone();
        wide.window = invariants::enlarged_window(&cfg.window);
        let (table_wide, _) = invariants::run_pipeline(&wide)?;
        let same_window = table_wide == table;
        all_pass &= same_window;
        lines.push(format!(
            "stability under window enlargement: {}",
            if same_window { "PASS" } else { "FAIL" }
        ));
    }
    let _ = completed;
    lines.push(format!(
        "overall: {}",
        if all_pass { "PASS" } else { "FAIL" }
    ));
    let report = lines.join("\n") + "\n";
    print!("{report}");
    if let Some(path) = out {
        std::fs::write(path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(all_pass)
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Local { input, out } => {
            let text = std::fs::read_to_string(input)
                .with_context(|| format!("reading {}", input.display()))?;
            let diagram = io::local_from_json(&text)?;
            let completed = local::complete(&diagram)?;
            emit(out, &io::local_to_json(&completed)?)?;
            Ok(true)
        }
        Command::Gps { m1, m2, order, out } => {
            let m1 = parse_direction(m1)?;
            let m2 = parse_direction(m2)?;
            let diagram = sources::build_gps_diagram(&m1, &m2, *order)?;
            let completed = local::complete(&diagram)?;
            let counts = invariants::gps_counts(&completed, &m1, &m2)?;
            emit(out, &invariants::gps_counts_to_csv(&counts))?;
            Ok(true)
        }
        Command::P2e { common, out, svg } => {
            run_global(false, common, out, svg)?;
            Ok(true)
        }
        Command::Sheaf { common, out, svg } => {
            run_global(true, common, out, svg)?;
            Ok(true)
        }
        Command::Invariants {
            degree,
            common,
            out,
        } => {
            let cfg = build_config(*degree, common)?;
            let (table, _) = invariants::run_pipeline(&cfg)?;
            emit(out, &io::table_to_csv(&table))?;
            Ok(true)
        }
        Command::Check {
            degree,
            common,
            expected,
            stability,
            out,
        } => run_check(*degree, common, expected, *stability, out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
