use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("chart `{chart}`: {detail}")]
    ChartDomain { chart: String, detail: String },

    #[error("continuation broke down ({reason}); last good sigma = {last_good}")]
    Singularity { last_good: Complex64, reason: String },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("subspace meets its conjugate (relative smallest singular value {rel_sv:.3e})")]
    Transversality { rel_sv: f64 },

    #[error("conjugate point: {0}")]
    ConjugatePoint(String),

    #[error("degenerate Pade system: {0}")]
    PadeDegeneracy(String),

    #[error("Im f(i) is not positive definite (smallest eigenvalue {min_eig:.3e})")]
    Positivity { min_eig: f64 },

    #[error("series terms grow from term {term} on")]
    Divergence { term: usize },

    #[error("model `{model}` has no closed-form {what}")]
    UnsupportedModel { model: String, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
