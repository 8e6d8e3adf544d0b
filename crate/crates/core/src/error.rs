use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("facet {facet}: {check}")]
    FacetInvariant { facet: usize, check: String },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("facet {facet:?}: edge length {length} mm is not below the tensile characteristic length {lt} mm (snap-back)")]
    SnapBack {
        facet: Option<usize>,
        length: f64,
        lt: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("tetrahedron {tet} inverted (volume {volume} mm^3)")]
    InvertedTet { tet: usize, volume: f64 },

    #[error("node {node} has zero mass but unconstrained dof {dof}")]
    ZeroMass { node: usize, dof: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("divergence at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("no convergence at step {step} (t = {time} s) after {iterations} iterations")]
    NonConvergence {
        step: usize,
        time: f64,
        iterations: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("field comparison: {0}")]
    Field(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures raised while integrating (as opposed to bad input).
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. }
                | Error::NonConvergence { .. }
                | Error::Singular { .. }
                | Error::NonFinite(_)
                | Error::InvertedTet { .. }
                | Error::SnapBack { .. }
        )
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
