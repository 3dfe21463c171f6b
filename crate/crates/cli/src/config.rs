use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Balanced entropic IGW between two probability measures.
    Igw,
    /// Unbalanced entropic IGW between two scaled measures.
    Uigw,
    /// (Entropic) IGW barycenter of several probability measures.
    Barycenter,
    /// Randomized oracle cross-checks of the closed forms.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Igw => "igw",
            Command::Uigw => "uigw",
            Command::Barycenter => "barycenter",
            Command::Verify => "verify",
        }
    }
}

/// Closed-form Gromov-Wasserstein divergences and barycenters of Gaussians.
#[derive(Debug, Parser)]
#[command(name = "gw-gauss", version)]
pub struct Args {
    pub command: Command,
    /// Measure files: {"mass": m, "covariance": [[...]]} or {"mass": m, "spectrum": [...]}.
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub epsilon: f64,
    /// Marginal penalty (uigw only).
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Comma-separated barycenter weights.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub weights: Option<Vec<f64>>,
    /// Barycenter dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Verification suite (verify only).
    #[arg(long)]
    pub suite: Option<String>,
}

/// A validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub epsilon: f64,
    pub tau: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub target_dim: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub suite: Option<String>,
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self, CliError> {
        let cmd = args.command;
        let wants_tau = cmd == Command::Uigw;
        let wants_bary = cmd == Command::Barycenter;
        if args.tau.is_some() != wants_tau {
            return Err(CliError::Validation(if wants_tau {
                "uigw requires --tau".into()
            } else {
                format!("--tau is only accepted by uigw, not {}", cmd.name())
            }));
        }
        for (flag, given) in [
            ("--weights", args.weights.is_some()),
            ("--dim", args.dim.is_some()),
        ] {
            if given != wants_bary {
                return Err(CliError::Validation(if wants_bary {
                    format!("barycenter requires {flag}")
                } else {
                    format!("{flag} is only accepted by barycenter, not {}", cmd.name())
                }));
            }
        }
        if args.suite.is_some() && cmd != Command::Verify {
            return Err(CliError::Validation(format!(
                "--suite is only accepted by verify, not {}",
                cmd.name()
            )));
        }
        if !args.epsilon.is_finite() || args.epsilon < 0.0 {
            return Err(CliError::Validation(format!(
                "--epsilon must be finite and non-negative, got {}",
                args.epsilon
            )));
        }
        let expected_inputs = match cmd {
            Command::Igw | Command::Uigw => Some(2),
            Command::Verify => Some(0),
            Command::Barycenter => None,
        };
        match expected_inputs {
            Some(n) if args.inputs.len() != n => {
                return Err(CliError::Validation(format!(
                    "{} takes {n} measure files, got {}",
                    cmd.name(),
                    args.inputs.len()
                )));
            }
            None if args.inputs.is_empty() => {
                return Err(CliError::Validation(
                    "barycenter needs at least one measure file".into(),
                ));
            }
            _ => {}
        }
        Ok(RunConfig {
            command: cmd,
            epsilon: args.epsilon,
            tau: args.tau,
            weights: args.weights.clone(),
            target_dim: args.dim,
            output_path: args.out.clone(),
            seed: args.seed,
            suite: args.suite.clone(),
        })
    }
}
