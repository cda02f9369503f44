use std::path::PathBuf;

use crate::geometry::Point2;

/// Errors produced across the mesh, solver, cell and study layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh is incompatible with periodicity: vertex {vertex} at ({x}, {y}) has no partner")]
    IncompatiblePeriodicMesh { vertex: usize, x: f64, y: f64 },

    #[error("factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("constraint block is rank deficient (Gram eigenvalue ratio {ratio:.3e})")]
    ConstraintDegenerate { ratio: f64 },

    #[error("coefficient is not elliptic at x = ({}, {}) along xi = ({}, {}): A xi . xi = {value:.3e}", x.x1, x.x2, xi.0, xi.1)]
    NotElliptic { x: Point2, xi: (f64, f64), value: f64 },

    #[error("oracle failure: {0}")]
    OracleFailure(String),

    #[error("degenerate cell: mean-gradient matrix has condition number {cond:.3e}")]
    DegenerateCell { cond: f64 },

    #[error("effective map has no sample for macro vertex {0}")]
    IncompleteEffectiveMap(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("study failed at {tuple}: {source}")]
    Study {
        tuple: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
