use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("iteration failed: {0}")]
    Iteration(String),

    #[error("initial data violates admissibility bounds: {0}")]
    InitialData(String),

    #[error("blow-up at t = {t}: field {field} became non-finite at x = {x}")]
    BlowUp { t: f64, field: char, x: f64 },

    #[error(
        "box excursion of {excursion:e} in field {field} at t = {t}, x = {x}; reduce dt"
    )]
    Stability {
        t: f64,
        field: char,
        x: f64,
        excursion: f64,
    },

    #[error("front at x = {x} is within {guard} of the domain boundary at t = {t}")]
    Truncation { t: f64, x: f64, guard: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
