//! Core library of the LAM workbench: a simulated document application, the data
//! pipeline that turns task descriptions into training records, toy policy models and
//! their training phases, the agent loop, and evaluation.

pub mod env_sim;
pub mod ops;
pub mod text;
pub mod goals;
pub mod oracle;
pub mod io;
pub mod dataflow;
pub mod policy;
pub mod training;
pub mod agent;
pub mod eval;
pub mod suite;
