mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use csm_core::dump::cached_assembler;
use csm_core::hermite::{BasisSpec, DEFAULT_MAX_DIM, DEFAULT_QUAD_NODES};
use csm_core::operators::{Parity, PotentialKind};
use csm_core::spectral::{stabilized_points, theta_grid, ResonanceCriteria};
use csm_core::tonks::{tg_reference, TgConfig};
use csm_core::workflow::{coupling_grid, OneParticleScan, SolveOptions, TwoBodySolver};
use csm_core::CsmError;

use output::*;

const EXIT_CONFIG: u8 = 2;
const EXIT_NO_RESONANCE: u8 = 3;
const EXIT_DIAGNOSTIC: u8 = 4;

/// Complex-scaled resonances and correlations of two bosons in an open
/// one-dimensional well.
#[derive(Debug, Parser)]
#[command(name = "csm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stabilized one-particle resonances from a θ scan.
    OneParticle(OneParticleArgs),
    /// Eigenvalue trajectories over a θ grid.
    ThetaScan(ThetaScanArgs),
    /// Two-boson resonance at one coupling.
    TwoParticle(TwoParticleArgs),
    /// Two-boson resonances over a range of couplings.
    Sweep(SweepArgs),
    /// Infinite-repulsion reference.
    Tg(TgArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Common {
    /// Number of oscillator orbitals.
    #[arg(long, default_value_t = 90)]
    basis: usize,
    /// Gauss-Hermite nodes for matrix elements.
    #[arg(long, default_value_t = DEFAULT_QUAD_NODES)]
    quad: usize,
    #[arg(long, default_value_t = PotentialKind::OpenWell)]
    #[serde(serialize_with = "as_display")]
    potential: PotentialKind,
    /// Largest dense matrix dimension allowed.
    #[arg(long, default_value_t = DEFAULT_MAX_DIM)]
    max_dim: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    output: Option<PathBuf>,
    /// Exit with status 4 when any diagnostic flag is raised.
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    #[serde(skip)]
    jobs: Option<usize>,
    /// Leading occupancies reported per record.
    #[arg(long, default_value_t = 4)]
    head: usize,
    /// Stabilization threshold on |dW/dθ| / |W|.
    #[arg(long, default_value_t = 0.1)]
    max_rate: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Window {
    #[arg(long, default_value_t = 0.1)]
    theta_min: f64,
    #[arg(long, default_value_t = 0.3)]
    theta_max: f64,
    #[arg(long, default_value_t = 0.01)]
    theta_step: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OneParticleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    window: Window,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ThetaScanArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    window: Window,
    /// Scan the two-boson operator at this coupling instead of the
    /// one-particle operator.
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct Stabilization {
    /// Fixed scaling angle.
    #[arg(long, default_value_t = 0.2)]
    theta: f64,
    /// Search the stationary angle over the θ window instead of fixing it.
    #[arg(long)]
    restabilize: bool,
    #[command(flatten)]
    window: Window,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TwoParticleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    stab: Stabilization,
    #[arg(long, allow_negative_numbers = true)]
    g: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    stab: Stabilization,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    g_min: f64,
    #[arg(long, default_value_t = 45.0, allow_negative_numbers = true)]
    g_max: f64,
    #[arg(long, default_value_t = 10)]
    g_steps: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TgArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    window: Window,
    /// Angle at which both orbitals are taken.
    #[arg(long, default_value_t = 0.2)]
    theta: f64,
}

fn as_display<S: serde::Serializer>(v: &PotentialKind, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn exit_code(e: &CsmError) -> u8 {
    match e {
        CsmError::Config(_)
        | CsmError::AngleDomain(_)
        | CsmError::InsufficientQuadrature { .. }
        | CsmError::DimensionOverflow { .. } => EXIT_CONFIG,
        CsmError::NoResonance => EXIT_NO_RESONANCE,
        CsmError::Io(_) | CsmError::Dump(_) => 1,
        _ => EXIT_DIAGNOSTIC,
    }
}

struct Report {
    text: String,
    flagged: bool,
    /// First per-point failure in a sweep; other points are still written.
    partial: Option<CsmError>,
}

impl Common {
    fn spec(&self) -> Result<BasisSpec, CsmError> {
        Ok(BasisSpec::new(self.basis, self.quad)?.with_max_dim(self.max_dim))
    }

    fn criteria(&self) -> Result<ResonanceCriteria, CsmError> {
        if !(self.max_rate > 0.0) {
            return Err(CsmError::Config(format!("--max-rate must be positive, got {}", self.max_rate)));
        }
        Ok(ResonanceCriteria {
            max_relative_rate: self.max_rate,
            ..Default::default()
        })
    }

    fn solver(&self) -> Result<TwoBodySolver, CsmError> {
        let spec = self.spec()?;
        let parity = Some(Parity::Even);
        match std::env::var_os("CSM_CACHE_DIR") {
            Some(dir) if !dir.is_empty() => Ok(TwoBodySolver::from_assembler(cached_assembler(
                dir.as_ref(),
                &spec,
                self.potential,
                parity,
            )?)),
            _ => TwoBodySolver::with_parity(&spec, self.potential, parity),
        }
    }
}

impl Window {
    fn grid(&self) -> Result<Vec<f64>, CsmError> {
        theta_grid(self.theta_min, self.theta_max, self.theta_step)
    }
}

impl Stabilization {
    fn options(&self, criteria: ResonanceCriteria) -> Result<SolveOptions, CsmError> {
        Ok(SolveOptions {
            theta: self.theta,
            criteria,
            restabilize: if self.restabilize { Some(self.window.grid()?) } else { None },
            ..Default::default()
        })
    }
}

fn one_particle(a: &OneParticleArgs) -> Result<Report, CsmError> {
    let c = &a.common;
    let spec = c.spec()?;
    let scan = OneParticleScan::run(&spec, c.potential, &a.window.grid()?, &c.criteria()?)?;
    if scan.resonances.is_empty() {
        return Err(CsmError::NoResonance);
    }
    let records: Vec<ResonanceRecord> = scan
        .resonances
        .iter()
        .enumerate()
        .map(|(k, p)| ResonanceRecord::new(k, p))
        .collect();
    let flagged = records.iter().any(|r| r.ambiguous);
    let text = match c.format {
        Format::Csv => resonance_csv(&records, &[header_comment("one-particle", c)]),
        Format::Json => json("one-particle", a, &records),
    };
    Ok(Report {
        text,
        flagged,
        partial: None,
    })
}

fn theta_scan_cmd(a: &ThetaScanArgs) -> Result<Report, CsmError> {
    let c = &a.common;
    let thetas = a.window.grid()?;
    let criteria = c.criteria()?;
    let scan = match a.g {
        None => OneParticleScan::run(&c.spec()?, c.potential, &thetas, &criteria)?.scan,
        Some(g) => c.solver()?.scan(g, &thetas)?,
    };
    let stabilized = stabilized_points(&scan, &criteria);
    let record = ScanRecord::new(&scan, &stabilized);
    let flagged = record.trajectories.iter().any(|t| t.ambiguous);
    let text = match c.format {
        Format::Csv => scan_csv(&record, &[header_comment("theta-scan", c)]),
        Format::Json => json("theta-scan", a, std::slice::from_ref(&record)),
    };
    Ok(Report {
        text,
        flagged,
        partial: None,
    })
}

fn two_particle(a: &TwoParticleArgs) -> Result<Report, CsmError> {
    let c = &a.common;
    let opts = a.stab.options(c.criteria()?)?;
    let r = c.solver()?.solve(a.g, &opts)?;
    let records = vec![SweepRecord::new(&r, c.head)];
    Ok(sweep_report("two-particle", a, c, records, None))
}

fn sweep(a: &SweepArgs) -> Result<Report, CsmError> {
    let c = &a.common;
    let gs = coupling_grid(a.g_min, a.g_max, a.g_steps)?;
    let opts = a.stab.options(c.criteria()?)?;
    let solver = c.solver()?;
    let mut records = Vec::new();
    let mut partial = None;
    for (g, r) in gs.iter().zip(solver.sweep(&gs, &opts)) {
        match r {
            Ok(r) => records.push(SweepRecord::new(&r, c.head)),
            Err(e) => {
                eprintln!("g={g}: {e}");
                partial.get_or_insert(e);
            }
        }
    }
    Ok(sweep_report("sweep", a, c, records, partial))
}

fn sweep_report<A: Serialize>(
    command: &str,
    args: &A,
    c: &Common,
    records: Vec<SweepRecord>,
    partial: Option<CsmError>,
) -> Report {
    let flagged = records.iter().any(|r| !r.flags.is_empty());
    let text = match c.format {
        Format::Csv => sweep_csv(&records, c.head, &[header_comment(command, c)]),
        Format::Json => json(command, args, &records),
    };
    Report {
        text,
        flagged,
        partial,
    }
}

fn tg(a: &TgArgs) -> Result<Report, CsmError> {
    let c = &a.common;
    let config = TgConfig {
        thetas: a.window.grid()?,
        orbital_theta: a.theta,
        criteria: c.criteria()?,
        grid: None,
    };
    let r = tg_reference(&c.spec()?, c.potential, &config)?;
    let record = TgRecord::new(&r, a.theta, c.head);
    let flagged = r.analysis.path_defect > csm_core::workflow::PATH_FLAG;
    let text = match c.format {
        Format::Csv => tg_csv(&record, c.head, &[header_comment("tg", c)]),
        Format::Json => json("tg", a, std::slice::from_ref(&record)),
    };
    Ok(Report {
        text,
        flagged,
        partial: None,
    })
}

fn header_comment(command: &str, c: &Common) -> String {
    format!(
        "csm {command} basis={} quad={} potential={}",
        c.basis, c.quad, c.potential
    )
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::OneParticle(a) => &a.common,
        Command::ThetaScan(a) => &a.common,
        Command::TwoParticle(a) => &a.common,
        Command::Sweep(a) => &a.common,
        Command::Tg(a) => &a.common,
    }
}

fn run(cmd: &Command) -> Result<Report, CsmError> {
    match cmd {
        Command::OneParticle(a) => one_particle(a),
        Command::ThetaScan(a) => theta_scan_cmd(a),
        Command::TwoParticle(a) => two_particle(a),
        Command::Sweep(a) => sweep(a),
        Command::Tg(a) => tg(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = common(&cli.command).clone();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = c.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        pool = pool.num_threads(jobs);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = match pool.install(|| run(&cli.command)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &c.output {
        Some(path) => fs::write(path, &report.text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(report.text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Some(e) = report.partial {
        return ExitCode::from(exit_code(&e));
    }
    if report.flagged {
        eprintln!("warning: diagnostic flags raised (see output)");
        if c.strict {
            return ExitCode::from(EXIT_DIAGNOSTIC);
        }
    }
    ExitCode::SUCCESS
}
