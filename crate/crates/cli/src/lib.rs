//! Command-line front end: configuration, subcommands and report emission.

pub mod config;
pub mod error;
pub mod pipeline;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use plapsys::eigen::{comparison_constants, ComparisonConstants};
use plapsys::fixedpoint::{KValue, OuterEntry, Verdict};
use plapsys::io::{read_fields_csv, write_plot_data};
use plapsys::mesh::{gradient, Mesh};
use plapsys::real::sup_norm;
use serde::Serialize;

pub use config::{OutputKind, RunConfig};
pub use error::{CliError, EXIT_CHECK_FAILED, EXIT_NO_CONVERGENCE, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "plapsys", version, about = "Barriers and fixed points for singular p-Laplacian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving reports and field files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First eigenpairs of −Δ_p and −Δ_q.
    Eigen(Common),
    /// Torsion functions and their distance ratios.
    Torsion(Common),
    /// Search for C, build and certify the barrier pair.
    Barriers(Common),
    /// Full chain: barriers, Picard iteration and verification.
    Solve(Common),
    /// Check fields from a CSV file against the full system.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fields: PathBuf,
    },
    /// Estimate the gradient constants for pinning in a config.
    CalibrateK(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Eigen(_) => "eigen",
            Self::Torsion(_) => "torsion",
            Self::Barriers(_) => "barriers",
            Self::Solve(_) => "solve",
            Self::Verify { .. } => "verify",
            Self::CalibrateK(_) => "calibrate-k",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Self::Eigen(c) | Self::Torsion(c) | Self::Barriers(c) | Self::Solve(c) | Self::CalibrateK(c) => c,
            Self::Verify { common, .. } => common,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout/stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command; `Ok` carries a one-line summary.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    let common = cmd.common();
    let cfg = RunConfig::load(&common.config)?;
    let out = Output::new(&common.out_dir, &cfg, cmd.name())?;
    match cmd {
        Command::Eigen(_) => eigen(&cfg, &out),
        Command::Torsion(_) => torsion(&cfg, &out),
        Command::CalibrateK(_) => calibrate(&cfg, &out),
        Command::Barriers(_) => barriers(&cfg, &out),
        Command::Solve(_) => solve(&cfg, &out),
        Command::Verify { fields, .. } => verify(&cfg, &out, fields),
    }
}

struct Output<'a> {
    dir: PathBuf,
    cfg: &'a RunConfig,
    command: &'static str,
}

#[derive(Serialize)]
struct Report<'a, B> {
    command: &'a str,
    config: &'a RunConfig,
    result: B,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl<'a> Output<'a> {
    fn new(dir: &Path, cfg: &'a RunConfig, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            cfg,
            command,
        })
    }

    fn path(&self, kind: OutputKind) -> PathBuf {
        self.dir.join(self.cfg.file_name(kind, self.command))
    }

    fn create(&self, kind: OutputKind) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.path(kind);
        let file = File::create(&path).map_err(io_err(&path))?;
        Ok((path, BufWriter::new(file)))
    }

    fn report<B: Serialize>(&self, result: B) -> Result<PathBuf, CliError> {
        let report = Report {
            command: self.command,
            config: self.cfg,
            result,
        };
        let (path, mut w) = self.create(OutputKind::Report)?;
        serde_json::to_writer_pretty(&mut w, &report).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(&path))?;
        Ok(path)
    }

    /// Fields CSV and the matching plot-data file.
    fn fields(&self, mesh: &Mesh<f64>, columns: &[(&str, &[f64])]) -> Result<(), CliError> {
        let (path, w) = self.create(OutputKind::Fields)?;
        mesh.write_csv(w, columns).map_err(|e| wrap_io(e, &path))?;
        let (path, w) = self.create(OutputKind::Plot)?;
        write_plot_data(mesh, w, columns).map_err(|e| wrap_io(e, &path))?;
        Ok(())
    }

    fn trace(&self, lines: &str) -> Result<(), CliError> {
        let (path, mut w) = self.create(OutputKind::Trace)?;
        w.write_all(lines.as_bytes()).and_then(|_| w.flush()).map_err(io_err(&path))
    }
}

fn wrap_io(e: plapsys::Error, path: &Path) -> CliError {
    match e {
        plapsys::Error::Io(source) => CliError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other.into(),
    }
}

#[derive(Serialize)]
struct EigenSummary {
    p: f64,
    lambda: f64,
    iterations: usize,
    residual: f64,
}

#[derive(Serialize)]
struct EigenResult {
    eigen_p: EigenSummary,
    eigen_q: EigenSummary,
    comparison: ComparisonConstants<f64>,
}

fn eigen(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let mesh = pipeline::mesh(cfg)?;
    let (ep, eq) = pipeline::eigenpairs(cfg, &mesh)?;
    let summary = |e: &plapsys::eigen::EigenPair<f64>| EigenSummary {
        p: e.p,
        lambda: e.lambda,
        iterations: e.iterations,
        residual: e.residual,
    };
    let result = EigenResult {
        eigen_p: summary(&ep),
        eigen_q: summary(&eq),
        comparison: comparison_constants(&ep, &eq, &mesh)?,
    };
    out.fields(&mesh, &[("phi_p", &ep.phi), ("phi_q", &eq.phi)])?;
    let path = out.report(&result)?;
    Ok(format!(
        "eigen: lambda_p = {}, lambda_q = {}; report {}",
        ep.lambda,
        eq.lambda,
        path.display()
    ))
}

#[derive(Serialize)]
struct TorsionSummary {
    p: f64,
    max: f64,
    c0: f64,
    c1: f64,
    gradient_max: f64,
}

#[derive(Serialize)]
struct TorsionResult {
    torsion_p: TorsionSummary,
    torsion_q: TorsionSummary,
}

fn torsion(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let mesh = pipeline::mesh(cfg)?;
    let (x1, x2) = pipeline::torsions(cfg, &mesh)?;
    let summary = |p: f64, xi: &[f64]| -> Result<TorsionSummary, CliError> {
        let (c0, c1) = plapsys::barriers::torsion_constants(&mesh, xi)?;
        Ok(TorsionSummary {
            p,
            max: sup_norm(xi),
            c0,
            c1,
            gradient_max: gradient(&mesh, xi).sup_norm(),
        })
    };
    let result = TorsionResult {
        torsion_p: summary(cfg.p, &x1)?,
        torsion_q: summary(cfg.q, &x2)?,
    };
    out.fields(&mesh, &[("xi_p", &x1), ("xi_q", &x2)])?;
    let path = out.report(&result)?;
    Ok(format!(
        "torsion: max xi_p = {}, max xi_q = {}; report {}",
        result.torsion_p.max,
        result.torsion_q.max,
        path.display()
    ))
}

#[derive(Serialize)]
struct KPin {
    k_p: f64,
    k_q: f64,
}

#[derive(Serialize)]
struct KResult {
    k_p: KValue<f64>,
    k_q: KValue<f64>,
    /// Drop-in `k` block pinning these values.
    pin: KPin,
}

fn calibrate(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    let mesh = pipeline::mesh(cfg)?;
    let (k_p, k_q) = pipeline::k_values(cfg, &mesh)?;
    let result = KResult {
        k_p,
        k_q,
        pin: KPin {
            k_p: k_p.value,
            k_q: k_q.value,
        },
    };
    let path = out.report(&result)?;
    Ok(format!("calibrate-k: K_p = {}, K_q = {}; report {}", k_p.value, k_q.value, path.display()))
}

#[derive(Serialize)]
struct BarrierResult<'a> {
    constants: &'a plapsys::barriers::BarrierConstants<f64>,
    k_p: KValue<f64>,
    k_q: KValue<f64>,
    #[serde(flatten)]
    barriers: &'a pipeline::Barriers,
    pass: bool,
}

fn pair_columns(pair: &plapsys::barriers::BarrierPair<f64>) -> [(&'static str, &[f64]); 4] {
    [
        ("u_low", &pair.u_low.values),
        ("u_up", &pair.u_up.values),
        ("v_low", &pair.v_low.values),
        ("v_up", &pair.v_up.values),
    ]
}

fn barriers(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    cfg.check_hypotheses()?;
    let prep = pipeline::prepare(cfg)?;
    let b = pipeline::barriers(cfg, &prep)?;
    let pair = &b.pair;
    let mut columns = vec![("u", pair.u_low.values.values()), ("v", pair.v_low.values.values())];
    columns.extend(pair_columns(pair));
    out.fields(&prep.mesh, &columns)?;
    let pass = b.pass();
    let path = out.report(BarrierResult {
        constants: &pair.constants,
        k_p: prep.k_p,
        k_q: prep.k_q,
        barriers: &b,
        pass,
    })?;
    if !pass {
        return Err(CliError::Certification(b.failures()));
    }
    Ok(format!(
        "barriers: C = {}, min margin {:e}; report {}",
        b.search.c,
        b.search.certification.min_margin().min(b.upper_certification.min_margin()),
        path.display()
    ))
}

#[derive(Serialize)]
struct InnerSummary {
    sweeps: usize,
    residual_u: f64,
    residual_v: f64,
    max_monotone_violation: f64,
    monotone: bool,
}

#[derive(Serialize)]
struct SolveResult<'a> {
    constants: &'a plapsys::barriers::BarrierConstants<f64>,
    c: f64,
    barriers: &'a pipeline::Barriers,
    shift: &'a pipeline::Shift,
    k: plapsys::fixedpoint::KConfig<f64>,
    outer_iterations: usize,
    outer: &'a [OuterEntry],
    last_inner: InnerSummary,
    bracket_gap: &'a pipeline::BracketGap,
    verdict: &'a Verdict<f64>,
}

fn solve(cfg: &RunConfig, out: &Output) -> Result<String, CliError> {
    cfg.check_hypotheses()?;
    let prep = pipeline::prepare(cfg)?;
    let s = pipeline::solve(cfg, &prep)?;
    let sol = &s.solution;
    let pair = &s.barriers.pair;
    let mut columns = vec![("u", sol.u.values()), ("v", sol.v.values())];
    columns.extend(pair_columns(pair));
    out.fields(&prep.mesh, &columns)?;
    out.trace(&sol.last_inner.trace.to_json_lines())?;
    let inner = &sol.last_inner;
    let path = out.report(SolveResult {
        constants: &pair.constants,
        c: pair.c,
        barriers: &s.barriers,
        shift: &s.shift,
        k: sol.k,
        outer_iterations: sol.outer_iterations,
        outer: &sol.outer,
        last_inner: InnerSummary {
            sweeps: inner.sweeps,
            residual_u: inner.residual_u,
            residual_v: inner.residual_v,
            max_monotone_violation: inner.max_monotone_violation,
            monotone: inner.trace.monotone(),
        },
        bracket_gap: &s.gap,
        verdict: &sol.verdict,
    })?;
    if !sol.verdict.pass {
        return Err(CliError::Verification(pipeline::verdict_failures(&sol.verdict)));
    }
    Ok(format!(
        "solve: C = {}, {} outer iterations, c0~ = {}, residual {:e}; report {}",
        pair.c,
        sol.outer_iterations,
        sol.verdict.bounds.c0_tilde,
        sol.verdict.residual_u.max(sol.verdict.residual_v),
        path.display()
    ))
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    fields: String,
    c: f64,
    verdict: &'a Verdict<f64>,
}

fn verify(cfg: &RunConfig, out: &Output, fields: &Path) -> Result<String, CliError> {
    cfg.check_hypotheses()?;
    let prep = pipeline::prepare(cfg)?;
    let b = pipeline::barriers(cfg, &prep)?;
    let file = File::open(fields).map_err(io_err(fields))?;
    let table = read_fields_csv(&prep.mesh, file).map_err(|e| wrap_io(e, fields))?;
    let verdict = pipeline::verify_fields(cfg, &prep, &b.pair, table.column("u")?, table.column("v")?)?;
    let path = out.report(VerifyResult {
        fields: fields.display().to_string(),
        c: b.pair.c,
        verdict: &verdict,
    })?;
    if !verdict.pass {
        return Err(CliError::Verification(pipeline::verdict_failures(&verdict)));
    }
    Ok(format!(
        "verify: pass, c0~ = {}, residual {:e}; report {}",
        verdict.bounds.c0_tilde,
        verdict.residual_u.max(verdict.residual_v),
        path.display()
    ))
}
