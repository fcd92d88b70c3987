pub mod cli;
pub mod conditions;
pub mod config;
pub mod discretization;
pub mod domain;
pub mod error;
pub mod estimates;
pub mod expr;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod problem;
pub mod report;
pub mod serde_float;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
