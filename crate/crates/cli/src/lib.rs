//! Command-line front end: reads measure files, dispatches to the closed
//! forms in `gw_gauss_core` and writes a versioned JSON result document.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid input,
//! 3 the entropic barycenter's epsilon condition is violated, 4 the discrete
//! solver did not converge during verification.

pub mod config;
pub mod output;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};

use gw_gauss_core::{
    entropic_igw_barycenter, igw_entropic, uigw_entropic, BarycenterSpec, Error as CoreError,
    GaussianMeasure, MeasureSpec,
};
use serde_json::json;

pub use config::{Args, Command, RunConfig};
pub use output::{to_json, Document, SCHEMA};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Core(CoreError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(CoreError::EpsilonConditionViolated { .. }) => 3,
            _ => 2,
        }
    }
}

/// Outcome of a successful run: the document plus the exit code it implies
/// (nonzero only for `verify`).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub document: Document,
    pub exit_code: u8,
}

pub fn read_measure(path: &Path) -> Result<GaussianMeasure, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: MeasureSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok(spec.to_measure()?)
}

fn igw(config: &RunConfig, measures: &[GaussianMeasure]) -> Result<Document, CliError> {
    let r = igw_entropic(&measures[0], &measures[1], config.epsilon)?;
    Ok(Document {
        schema: SCHEMA,
        command: config.command.name(),
        value: Some(r.value),
        plan: Some(json!(r.plan)),
        spectrum: None,
        diagnostics: json!({
            "epsilon": r.epsilon,
            "kappas": r.kappas,
            "swapped": r.swapped,
            "degenerate": r.degenerate,
        }),
        formula_flags: Vec::new(),
    })
}

fn uigw(config: &RunConfig, measures: &[GaussianMeasure]) -> Result<Document, CliError> {
    let tau = config.tau.expect("validated by RunConfig");
    let r = uigw_entropic(&measures[0], &measures[1], config.epsilon, tau)?;
    Ok(Document {
        schema: SCHEMA,
        command: config.command.name(),
        value: Some(r.value),
        plan: Some(json!(r.plan)),
        spectrum: None,
        diagnostics: json!({
            "epsilon": r.epsilon,
            "tau": r.tau,
            "mass": r.mass,
            "mass_sq": r.mass_sq,
            "upsilon": r.upsilon,
            "coords": r.coords,
            "swapped": r.swapped,
            "ordered": r.ordered,
        }),
        formula_flags: Vec::new(),
    })
}

/// `sum_l w_l IGW_eps(mu_l, barycenter)`, or `None` when the barycenter has
/// a vanishing eigenvalue and is not a valid Gaussian.
fn barycenter_objective(spec: &BarycenterSpec, spectrum: &[f64]) -> Result<Option<f64>, CliError> {
    let Ok(center) = GaussianMeasure::probability(spectrum) else {
        return Ok(None);
    };
    let mut total = 0.0;
    for (m, w) in spec.measures.iter().zip(&spec.weights) {
        total += w * igw_entropic(m, &center, spec.epsilon)?.value;
    }
    Ok(Some(total))
}

fn barycenter(config: &RunConfig, measures: Vec<GaussianMeasure>) -> Result<Document, CliError> {
    let spec = BarycenterSpec {
        measures,
        weights: config.weights.clone().expect("validated by RunConfig"),
        target_dim: config.target_dim.expect("validated by RunConfig"),
        epsilon: config.epsilon,
    };
    let r = entropic_igw_barycenter(&spec)?;
    let value = barycenter_objective(&spec, &r.spectrum)?;
    let flags = if spec.epsilon > 0.0 {
        vec![format!("{:?}", r.formula_flag)]
    } else {
        Vec::new()
    };
    Ok(Document {
        schema: SCHEMA,
        command: config.command.name(),
        value,
        plan: None,
        spectrum: Some(r.spectrum.clone()),
        diagnostics: json!({
            "epsilon": r.epsilon,
            "kappas": r.kappas,
            "a": r.a,
            "b": r.b,
            "condition_ok": r.condition_ok,
            "oracle_delta": r.oracle_delta,
        }),
        formula_flags: flags,
    })
}

/// 4 when the discrete solver did not converge, else 1 when any check
/// failed, else 0.
pub fn verify_exit_code(report: &verify::VerifyReport) -> u8 {
    if !report.converged() {
        4
    } else if !report.passed {
        1
    } else {
        0
    }
}

fn verify(config: &RunConfig) -> Result<RunOutput, CliError> {
    let report = verify::verify(config.suite.as_deref(), config.seed)?;
    let flags: Vec<String> = report
        .suites
        .iter()
        .flat_map(|s| s.formula_flags.clone())
        .collect();
    let exit_code = verify_exit_code(&report);
    Ok(RunOutput {
        document: Document {
            schema: SCHEMA,
            command: config.command.name(),
            value: Some(report.worst_ratio()),
            plan: None,
            spectrum: None,
            diagnostics: json!(report),
            formula_flags: flags,
        },
        exit_code,
    })
}

/// Evaluates `config` on the measure files in `inputs`.
pub fn run(config: &RunConfig, inputs: &[PathBuf]) -> Result<RunOutput, CliError> {
    if config.command == Command::Verify {
        return verify(config);
    }
    let measures = inputs
        .iter()
        .map(|p| read_measure(p))
        .collect::<Result<Vec<_>, _>>()?;
    let document = match config.command {
        Command::Igw => igw(config, &measures)?,
        Command::Uigw => uigw(config, &measures)?,
        Command::Barycenter => barycenter(config, measures)?,
        Command::Verify => unreachable!("handled above"),
    };
    Ok(RunOutput {
        document,
        exit_code: 0,
    })
}

/// Validates `args`, runs, and writes the document to `--out`, or returns
/// it for standard output when no path is given.
pub fn execute(args: &Args) -> Result<(String, u8), CliError> {
    let config = RunConfig::from_args(args)?;
    let out = run(&config, &args.inputs)?;
    let text = to_json(&out.document);
    if let Some(path) = &config.output_path {
        fs::write(path, &text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        return Ok((String::new(), out.exit_code));
    }
    Ok((text, out.exit_code))
}
