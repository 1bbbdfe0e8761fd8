use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid {field}: {message}")]
    InvalidParameter { field: String, message: String },

    #[error("toll {tau} is outside the interior range ({tau_low}, {tau_high}); the equilibrium is a corner")]
    NoInteriorRoot { tau: f64, tau_low: f64, tau_high: f64 },

    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    NotBracketed { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("design grid is empty")]
    EmptyGrid,

    #[error("invalid carpool model: {0}")]
    InvalidCarpoolModel(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("no decision-making class travels on both lanes at the misbehavior-free equilibrium")]
    NoSplitClass,

    #[error("grid too large: {points} points on one axis (limit {limit})")]
    GridTooLarge { points: usize, limit: usize },

    #[error("operation requires a uniform toll")]
    UniformTollRequired,
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.into(), message: message.into() }
    }
}
