//! Run configuration: one JSON document, every optional block defaulted.

use std::path::Path;

use plapsys::auxiliary::AuxConfig;
use plapsys::barriers::SearchConfig;
use plapsys::eigen::EigenConfig;
use plapsys::fixedpoint::PicardConfig;
use plapsys::hypotheses::{validate, ExponentSet, NonlinearitySpec, Role, ValidationReport};
use plapsys::plap::SolverConfig;
use plapsys::Domain;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainBlock {
    Interval { length: f64, resolution: usize },
    Rectangle { width: f64, height: f64, resolution: usize },
}

impl DomainBlock {
    pub fn domain(&self) -> Domain<f64> {
        match *self {
            Self::Interval { length, resolution } => Domain::interval(length, resolution),
            Self::Rectangle {
                width,
                height,
                resolution,
            } => Domain::rectangle(width, height, resolution),
        }
    }
}

/// Canonical nonlinearity: growth exponents plus gradient coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBlock {
    pub role: Role,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    #[serde(default)]
    pub a1: f64,
    #[serde(default)]
    pub a2: f64,
}

impl SpecBlock {
    pub fn exponents(&self) -> ExponentSet<f64> {
        ExponentSet {
            role: self.role,
            m: self.m,
            big_m: self.big_m,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            theta: self.theta,
        }
    }

    pub fn spec(&self) -> Result<NonlinearitySpec<f64>, CliError> {
        Ok(NonlinearitySpec::canonical(self.exponents(), self.a1, self.a2)?)
    }
}

/// Gradient-estimate constants. Unset values are estimated from probe
/// problems and multiplied by `inflation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KBlock {
    pub k_p: Option<f64>,
    pub k_q: Option<f64>,
    pub inflation: f64,
    pub seed: u64,
}

impl Default for KBlock {
    fn default() -> Self {
        Self {
            k_p: None,
            k_q: None,
            inflation: 2.0,
            seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuxBlock {
    pub tol_inner: f64,
    pub max_sweeps: usize,
    pub monotone_tol: f64,
    pub gauss_seidel: bool,
    /// Replaces the derived shift coefficient when set.
    pub rho_hat: Option<f64>,
}

impl Default for AuxBlock {
    fn default() -> Self {
        let a = AuxConfig::<f64>::default();
        Self {
            tol_inner: a.tol_inner,
            max_sweeps: a.max_sweeps,
            monotone_tol: a.monotone_tol,
            gauss_seidel: a.gauss_seidel,
            rho_hat: None,
        }
    }
}

impl AuxBlock {
    pub fn aux_config(&self) -> AuxConfig<f64> {
        AuxConfig {
            tol_inner: self.tol_inner,
            max_sweeps: self.max_sweeps,
            monotone_tol: self.monotone_tol,
            gauss_seidel: self.gauss_seidel,
        }
    }
}

/// Output file names, relative to the output directory. Unset names fall
/// back to `<command>_report.json`, `<command>_fields.csv`,
/// `<command>_plot.dat` and `<command>_trace.jsonl`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub report: Option<String>,
    pub fields: Option<String>,
    pub plot: Option<String>,
    pub trace: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainBlock,
    pub p: f64,
    pub q: f64,
    pub spec_f: SpecBlock,
    pub spec_g: SpecBlock,
    #[serde(default)]
    pub solver: SolverConfig<f64>,
    #[serde(default)]
    pub eigen: EigenConfig<f64>,
    #[serde(default)]
    pub search: SearchConfig<f64>,
    #[serde(default)]
    pub k: KBlock,
    #[serde(default)]
    pub aux: AuxBlock,
    #[serde(default)]
    pub fixed_point: PicardConfig<f64>,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Hypothesis checks on both exponent sets; errors list every failure.
    pub fn check_hypotheses(&self) -> Result<ValidationReport, CliError> {
        let report = validate(&self.spec_f.exponents(), &self.spec_g.exponents(), self.p, self.q);
        if report.pass {
            return Ok(report);
        }
        let failed: Vec<String> = report
            .failures()
            .iter()
            .map(|c| format!("{} (slack {:e})", c.name, c.slack))
            .collect();
        Err(CliError::Hypotheses(failed.join("; ")))
    }

    pub fn check_exponents(&self) -> Result<(), CliError> {
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(CliError::Invalid(format!("{name} must be a finite number > 1, got {v}")));
            }
        }
        Ok(())
    }

    pub fn file_name(&self, kind: OutputKind, command: &str) -> String {
        let (set, suffix) = match kind {
            OutputKind::Report => (&self.output.report, "report.json"),
            OutputKind::Fields => (&self.output.fields, "fields.csv"),
            OutputKind::Plot => (&self.output.plot, "plot.dat"),
            OutputKind::Trace => (&self.output.trace, "trace.jsonl"),
        };
        set.clone().unwrap_or_else(|| format!("{command}_{suffix}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputKind {
    Report,
    Fields,
    Plot,
    Trace,
}

// serde_json appends " at line L column C"; the position is reported separately
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}
