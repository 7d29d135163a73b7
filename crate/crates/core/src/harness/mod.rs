//! Instance generation, experiment drivers and on-disk formats used by the CLI.

pub mod config;
pub mod experiments;
pub mod instance;
pub mod io;
pub mod rule;

use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiments::{
    diagnose, run_fig1, run_fig2, run_fig3, run_single, solver_config, DiagnoseOptions, DiagnoseReport, RunBundle,
    RunSummary, SweepRow, SweepSummary, FIG3_C_VALUES,
};
pub use instance::{gen_instance, Instance};
pub use rule::{Rule, RuleEnv};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("rule: {0}")]
    Rule(String),
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Penalty(#[from] crate::penalty::PenaltyError),
    #[error(transparent)]
    Dense(#[from] crate::dense::DenseError),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
}

impl HarnessError {
    /// Short machine-readable category for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            HarnessError::Config(_) | HarnessError::Rule(_) | HarnessError::Penalty(_) => "config",
            HarnessError::Io { .. } => "io",
            HarnessError::Format(_) => "format",
            HarnessError::Dense(_) | HarnessError::Sampling(_) | HarnessError::Objective(_) => "input",
            HarnessError::Solver(crate::solver::SolverError::Divergence { .. }) => "divergence",
            HarnessError::Solver(_) => "solver",
            HarnessError::Diagnostics(_) => "diagnostics",
        }
    }
}
