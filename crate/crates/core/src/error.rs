use thiserror::Error;

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("degenerate coframe: {0} vanishes or is non-positive on the sample grid")]
    DegenerateCoframe(&'static str),
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("Ehresmann form is not principal (max |d_u w_i| = {residual:e})")]
    NotPrincipal { residual: f64 },
    #[error("indeterminate branch: {quantity} is neither vanishing nor non-vanishing on the grid")]
    IndeterminateBranch { quantity: &'static str },
    #[error("hypothesis violated: {name} residual {residual:e} exceeds tolerance")]
    HypothesisViolated { name: String, residual: f64 },
    #[error("torsion vanishes on the grid; use the torsion-free branch of classify scm/pcs")]
    VanishingTorsion,
    #[error("wrong branch: {0}")]
    WrongBranch(String),
    #[error("degenerate induced metric on the sample grid")]
    DegenerateMetric,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
