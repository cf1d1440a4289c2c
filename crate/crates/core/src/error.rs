use thiserror::Error;

use crate::instance::Violation;

#[derive(Debug, Error)]
pub enum SpniError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no path from source to sink")]
    Unreachable,

    #[error("invalid instance: {}", join_violations(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, SpniError>;
