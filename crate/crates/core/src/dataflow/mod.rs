//! Turns raw task descriptions into step-wise training records: normalize, evolve,
//! instantiate against a template, execute, judge and post-process.

pub mod evolve;
pub mod execute;
pub mod instantiate;
pub mod normalize;
pub mod pipeline;
pub mod postprocess;
pub mod records;
pub mod schema;

pub use evolve::{evolve_corpus, evolve_task, EvolutionConfig};
pub use execute::{execute_trajectory, judge_trajectory, replay_final_canvas};
pub use instantiate::{instantiate, select_template};
pub use normalize::{normalize_sources, NormalizeConfig};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport, Stage};
pub use postprocess::{postprocess, trajectory_records};
pub use records::*;
pub use schema::{validate_input, validate_record};

use crate::env_sim::EnvError;
use crate::io::IoError;
use crate::oracle::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataflowError {
    #[error("no template matches task `{0}`")]
    NoTemplateMatch(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("validation failure: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
