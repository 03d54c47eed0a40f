use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("hamiltonian is not convex in p at x = {x}: second difference {second_difference:e}")]
    NotConvex { x: f64, second_difference: f64 },
    #[error("step size violates dt * lambda_max < 1 (dt = {dt}, lambda_max = {lambda_max})")]
    StepSize { dt: f64, lambda_max: f64 },
    #[error("optimizer touched the {what} range boundary at node {node}")]
    RangeBoundary { what: &'static str, node: usize },
    #[error("no solution at this c: iteration diverged down (min {min:e} at t = {t})")]
    Diverged { min: f64, t: f64 },
    #[error("no solution at this c: relaxation diverged down (min {min:e} after {sweeps} sweeps)")]
    NoSolution { min: f64, sweeps: usize },
    #[error("relaxation did not settle within {sweeps} sweeps (residual {residual:e})")]
    Stalled { sweeps: usize, residual: f64 },
    #[error("iteration did not settle before t_max = {t_max}")]
    TimeCapped { t_max: f64 },
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
