use alloc::string::String;
use core::fmt;

use crate::metric::Label;

pub type Result<T> = core::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or inconsistent input data.
    Input,
    /// Invalid configuration values.
    Config,
    /// Numerical failure (loss of definiteness, divergence, non-convergence).
    Numerical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    NonFinite,
    /// A matrix expected to be PSD has an eigenvalue below tolerance.
    Indefinite {
        min_eigenvalue: f64,
    },
    /// A matrix expected to be positive definite is singular.
    Singular {
        min_eigenvalue: f64,
    },
    NoConvergence,
    /// A rank-one update would leave the positive definite cone.
    PositivityLoss {
        constraint: Option<usize>,
    },
    Divergence {
        step: usize,
        objective: f64,
    },
    InsufficientSamples {
        class: Label,
        needed: usize,
        available: usize,
    },
    InvalidInput(String),
    InvalidConfig(String),
    Unsupported(&'static str),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NonFinite
            | Error::InsufficientSamples { .. }
            | Error::InvalidInput(_) => ErrorKind::Input,
            Error::InvalidConfig(_) | Error::Unsupported(_) => ErrorKind::Config,
            Error::Indefinite { .. }
            | Error::Singular { .. }
            | Error::NoConvergence
            | Error::PositivityLoss { .. }
            | Error::Divergence { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite => write!(f, "input contains non-finite values"),
            Error::Indefinite { min_eigenvalue } => {
                write!(f, "matrix is indefinite (most negative eigenvalue {min_eigenvalue:e})")
            }
            Error::Singular { min_eigenvalue } => {
                write!(f, "matrix is singular (smallest eigenvalue {min_eigenvalue:e})")
            }
            Error::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
            Error::PositivityLoss { constraint: Some(c) } => {
                write!(f, "projection onto constraint {c} would lose positive definiteness")
            }
            Error::PositivityLoss { constraint: None } => {
                write!(f, "projection onto the MMD constraint would lose positive definiteness")
            }
            Error::Divergence { step, objective } => {
                write!(f, "objective diverged at step {step} (value {objective:e})")
            }
            Error::InsufficientSamples {
                class,
                needed,
                available,
            } => write!(
                f,
                "class {class}: protocol needs {needed} samples but only {available} available"
            ),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Unsupported(what) => write!(f, "unsupported operation: {what}"),
        }
    }
}

impl core::error::Error for Error {}
