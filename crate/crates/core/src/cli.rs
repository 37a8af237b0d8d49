//! The `qguess` command line: seeded verification sweeps, region data for
//! the guessing trade-off, and single-state walkthroughs.
//!
//! Exit status: 0 when every relation passes (inconclusive verdicts are
//! allowed and counted), 1 when any relation fails, 2 on usage or I/O errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::linalg::{random_pure_with, LabeledState, SystemLabel};
use crate::qops::{ghz, max_entangled, theta_state, ThetaFamily, A, B, E};
use crate::relations::{theta_grid, Analysis, RelationReport, Settings, Verdict};

/// Caps the worker threads of `verify`.
pub const THREADS_ENV: &str = "QGUESS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qguess", version, about = "Certified checks of guessing-game uncertainty relations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoState {
    /// Maximally entangled pair on A B.
    Phi,
    /// GHZ state on A B E.
    Ghz,
    /// `(cos θ|0⟩ + sin θ|0̃⟩)/√N` on A, with a trivial B.
    Theta,
    /// `|0⟩^A ⊗ |0⟩^B`.
    Product,
    /// Seeded random pure state on A B E.
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every relation on seeded random tripartite pure states.
    Verify {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..=16))]
        d: u64,
        /// Dimension of Bob's system (defaults to d).
        #[arg(long)]
        dim_b: Option<usize>,
        /// Dimension of the environment E (defaults to d).
        #[arg(long)]
        dim_e: Option<usize>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allowed violation of a relation.
        #[arg(long, default_value_t = 1e-6, value_parser = positive)]
        tol: f64,
        /// Target duality gap of the solvers.
        #[arg(long, default_value_t = 1e-7, value_parser = positive)]
        solver_tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Emit the achievable θ curve together with the trade-off caps.
    Region {
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        d: u64,
        #[arg(long, default_value_t = 257, value_parser = clap::value_parser!(u64).range(2..))]
        grid: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Walk through guessing, recovery and the bounds for one state.
    Demo {
        #[arg(long, value_enum)]
        state: DemoState,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..=16))]
        d: u64,
        #[arg(long)]
        dim_b: Option<usize>,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        theta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{v} is not a positive number")),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

fn open_output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(command: Command) -> Result<i32, RunError> {
    match command {
        Command::Verify {
            d,
            dim_b,
            dim_e,
            count,
            seed,
            tol,
            solver_tol,
            output,
            format,
        } => {
            let d = d as usize;
            let cfg = VerifyConfig {
                d,
                dim_b: dim_b.unwrap_or(d),
                dim_e: dim_e.unwrap_or(d),
                count: count as usize,
                seed,
                settings: Settings { tol, solver_tol },
            };
            if cfg.dim_b == 0 || cfg.dim_e == 0 {
                return Err(RunError::Usage("dimensions must be at least 1".into()));
            }
            let reports = run_verify(&cfg)?;
            let mut out = open_output(&output)?;
            write_reports(&mut out, &reports, format)?;
            out.flush()?;
            let summary = Summary::of(&reports);
            eprintln!(
                "{} states, {} reports: {} pass, {} inconclusive, {} fail",
                cfg.count, summary.total, summary.pass, summary.inconclusive, summary.fail
            );
            if summary.inconclusive > 0 {
                eprintln!("warning: {} inconclusive reports", summary.inconclusive);
            }
            Ok(if summary.fail > 0 { EXIT_FAIL } else { EXIT_OK })
        }
        Command::Region {
            d,
            grid,
            output,
            format,
        } => {
            let rows = region_rows(d as usize, grid as usize)?;
            let mut out = open_output(&output)?;
            write_region(&mut out, &rows, format)?;
            out.flush()?;
            Ok(EXIT_OK)
        }
        Command::Demo {
            state,
            d,
            dim_b,
            theta,
            seed,
            output,
        } => {
            let d = d as usize;
            let text = run_demo(state, d, dim_b.unwrap_or(d), theta, seed)?;
            let mut out = open_output(&output)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    pub d: usize,
    pub dim_b: usize,
    pub dim_e: usize,
    pub count: usize,
    pub seed: u64,
    pub settings: Settings,
}

/// Random pure state number `index` of a sweep: its own ChaCha stream, so
/// the state does not depend on scheduling or on the other states.
pub fn sweep_state(d: usize, dim_b: usize, dim_e: usize, seed: u64, index: usize) -> crate::Result<LabeledState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    random_pure_with(
        &[
            SystemLabel::new(A, d)?,
            SystemLabel::new(B, dim_b)?,
            SystemLabel::new(E, dim_e)?,
        ],
        &mut rng,
    )
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// All reports of a sweep, sorted by state index and then relation.
pub fn run_verify(cfg: &VerifyConfig) -> crate::Result<Vec<RelationReport>> {
    let work = || -> crate::Result<Vec<RelationReport>> {
        let per_state: Vec<crate::Result<Vec<RelationReport>>> = (0..cfg.count)
            .into_par_iter()
            .map(|i| {
                let st = sweep_state(cfg.d, cfg.dim_b, cfg.dim_e, cfg.seed, i)?;
                let reports = Analysis::new(&st, cfg.settings)?.check_all()?;
                Ok(reports
                    .into_iter()
                    .map(|r| r.with_origin(Some(cfg.seed), Some(i)))
                    .collect())
            })
            .collect();
        let mut all = Vec::new();
        for r in per_state {
            all.extend(r?);
        }
        all.sort_by_key(|r| (r.state, r.relation_id));
        Ok(all)
    };
    match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub total: usize,
    pub pass: usize,
    pub inconclusive: usize,
    pub fail: usize,
}

impl Summary {
    pub fn of(reports: &[RelationReport]) -> Self {
        let mut s = Summary {
            total: reports.len(),
            ..Summary::default()
        };
        for r in reports {
            match r.verdict {
                Verdict::Pass => s.pass += 1,
                Verdict::Inconclusive => s.inconclusive += 1,
                Verdict::Fail => s.fail += 1,
            }
        }
        s
    }
}

pub const REPORT_CSV_HEADER: &str =
    "state,seed,relation_id,lhs_lo,lhs_hi,rhs_lo,rhs_hi,slack,pass,verdict";

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Inconclusive => "INCONCLUSIVE",
        Verdict::Fail => "FAIL",
    }
}

fn write_reports(out: &mut dyn Write, reports: &[RelationReport], format: Format) -> io::Result<()> {
    match format {
        Format::Json => {
            for r in reports {
                writeln!(out, "{}", r.to_json())?;
            }
        }
        Format::Csv => {
            writeln!(out, "{REPORT_CSV_HEADER}")?;
            for r in reports {
                let opt = |x: Option<String>| x.unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    opt(r.state.map(|s| s.to_string())),
                    opt(r.seed.map(|s| s.to_string())),
                    r.relation_id,
                    format_sig(r.lhs_lo, 12),
                    format_sig(r.lhs_hi, 12),
                    format_sig(r.rhs_lo, 12),
                    format_sig(r.rhs_hi, 12),
                    format_sig(r.slack, 12),
                    r.pass,
                    verdict_str(r.verdict)
                )?;
            }
        }
    }
    Ok(())
}

/// `x` with `digits` significant digits in the style of C's `%g`: fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    // the exponent after rounding to `digits` significant digits
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub const REGION_CSV_HEADER: &str = "theta,p_z,p_x,thm3_pz_cap,thm3_px_cap";

/// One grid point of the achievable curve and the two trade-off caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRow {
    pub theta: f64,
    pub p_z: f64,
    pub p_x: f64,
    /// `1 − (p_x − 1/d)²`, the largest `p_z` compatible with this `p_x`.
    pub thm3_pz_cap: f64,
    /// `1 − (p_z − 1/d)²`.
    pub thm3_px_cap: f64,
}

pub fn region_rows(d: usize, grid: usize) -> crate::Result<Vec<RegionRow>> {
    if grid < 2 {
        return Err(Error::OutOfRange(format!("grid of {grid} points")));
    }
    let u = 1.0 / d as f64;
    theta_grid(grid)
        .into_iter()
        .map(|theta| {
            let fam = ThetaFamily::new(d, theta)?;
            let (p_z, p_x) = (fam.p_z(), fam.p_x());
            Ok(RegionRow {
                theta,
                p_z,
                p_x,
                thm3_pz_cap: 1.0 - (p_x - u).powi(2),
                thm3_px_cap: 1.0 - (p_z - u).powi(2),
            })
        })
        .collect()
}

fn write_region(out: &mut dyn Write, rows: &[RegionRow], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{REGION_CSV_HEADER}")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_sig(r.theta, 12),
                    format_sig(r.p_z, 12),
                    format_sig(r.p_x, 12),
                    format_sig(r.thm3_pz_cap, 12),
                    format_sig(r.thm3_px_cap, 12)
                )?;
            }
        }
        Format::Json => {
            for r in rows {
                writeln!(out, "{}", serde_json::to_string(r).expect("plain data"))?;
            }
        }
    }
    Ok(())
}

fn demo_state(kind: DemoState, d: usize, dim_b: usize, theta: f64, seed: u64) -> crate::Result<LabeledState> {
    match kind {
        DemoState::Phi => max_entangled(d),
        DemoState::Ghz => ghz(d),
        DemoState::Theta => {
            let trivial = LabeledState::basis_ket(&[SystemLabel::new(B, 1)?], &[0])?;
            theta_state(d, theta)?.tensor(&trivial)
        }
        DemoState::Product => LabeledState::basis_ket(
            &[SystemLabel::new(A, d)?, SystemLabel::new(B, dim_b)?],
            &[0, 0],
        ),
        DemoState::Random => sweep_state(d, dim_b, d, seed, 0),
    }
}

/// Human-readable walkthrough of one state.
pub fn run_demo(kind: DemoState, d: usize, dim_b: usize, theta: f64, seed: u64) -> crate::Result<String> {
    let st = demo_state(kind, d, dim_b, theta, seed)?;
    let a = Analysis::new(&st, Settings::default())?;
    let mut s = String::new();
    let names: Vec<String> = st.systems().iter().map(|l| l.to_string()).collect();
    let _ = writeln!(s, "state: {kind:?} on {}", names.join(" "));

    let _ = writeln!(s, "\nguessing probabilities [primal, dual] (gap, iterations)");
    let t1 = a.theorem1()?;
    for (name, c) in [
        ("P(Z^A|B)", a.p_z_given_b()?),
        ("P(X^A|B)", a.p_x_given_b()?),
        ("P(X^A|A'B) on psi_Z", &t1.x_prime),
        ("P(Z^A|E)", a.p_z_given_e()?),
    ] {
        let _ = writeln!(
            s,
            "  {name:<22} [{:.6}, {:.6}]  ({:.1e}, {})",
            c.p_primal, c.p_dual.min(1.0), c.gap, c.iterations
        );
    }

    let _ = writeln!(s, "\nrecovery circuit");
    let _ = writeln!(s, "  F(psi_Z, V_Z psi)          {:.6}", t1.chain.z_stage);
    let _ = writeln!(s, "  F(U_X psi_Z, V_X psi_Z)    {:.6}", t1.chain.x_stage);
    let _ = writeln!(s, "  circuit fidelity           {:.6}", t1.chain.total);
    let pz = a.p_z_given_b()?.p_primal.clamp(0.0, 1.0);
    let px = t1.x_prime.p_primal.clamp(0.0, 1.0);
    let bound = (pz.acos() + px.acos()).min(std::f64::consts::PI).cos();
    let _ = writeln!(s, "  cos(acos P_Z + acos P_X')  {bound:.6}");
    let f = a.recovery_fidelity()?;
    let _ = writeln!(s, "  F(A|B)                     [{:.6}, {:.6}]", f.fidelity.lo, f.fidelity.hi);

    let _ = writeln!(s, "\ndecoupling fidelities");
    let _ = writeln!(s, "  Q(Z^A|E)                   {:.6}", a.q_z_given_e()?);
    let _ = writeln!(s, "  Q(X^A|A'E) on psi_Z        {:.6}", a.q_x_given_copy_e()?);
    let sf = a.sigma_fidelity()?;
    let _ = writeln!(
        s,
        "  max_sigma F(psi_Z^AE, pi x sigma)  [{:.6}, {:.6}]",
        sf.fidelity.lo, sf.fidelity.hi
    );

    let _ = writeln!(s, "\nrelations");
    for r in a.check_all()? {
        let _ = writeln!(
            s,
            "  {:<8} lhs [{:.6}, {:.6}]  rhs [{:.6}, {:.6}]  {}",
            r.relation_id.as_str(),
            r.lhs_lo,
            r.lhs_hi,
            r.rhs_lo,
            r.rhs_hi,
            verdict_str(r.verdict)
        );
    }
    Ok(s)
}
