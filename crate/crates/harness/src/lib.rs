//! Experiment drivers for `fracwave`: convergence tables, the adaptive
//! Example 2 run, the kernel property suite and SOE certification reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod config;
pub mod converge;
pub mod output;
pub mod properties;
pub mod soe_cert;

pub use adaptive::{run_adaptive_experiment, AdaptiveExperiment, ExperimentConfig};
pub use config::{GammaSpec, MeshFamily, StudyConfig};
pub use converge::{run_convergence_study, ConvergenceReport};
pub use properties::{run_property_suite, PropertyConfig, SuiteReport};
pub use soe_cert::{certify_soe, SoeCertReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] fracwave::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: fracwave::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
