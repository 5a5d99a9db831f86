use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("position {x} outside the basin [0, 1]")]
    OutsideDomain { x: f64 },

    #[error("non-positive growth rate: c_S* = {cs_star}, c_T(x_E) = {ct_e}")]
    NonPositiveGrowthRate { cs_star: f64, ct_e: f64 },

    #[error("time step {dt} violates the characteristic lock dt = dx = {dx}")]
    Cfl { dt: f64, dx: f64 },

    #[error("non-finite value in `{field}` at t = {t}")]
    NonFinite { field: &'static str, t: f64 },

    #[error("solution exceeded {bound} at t = {t}; last valid time {last_valid}")]
    BlowUp { t: f64, last_valid: f64, bound: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("eastern reflection is zero: homogeneous dynamics vanish in finite time")]
    TrivialHomogeneous,

    #[error("state is not on the tanh branch (beta * T^2 = {value}); use the coth or constant branch")]
    WrongBranch { value: f64 },

    #[error("parameter file: {0}")]
    ParamFile(String),
}
