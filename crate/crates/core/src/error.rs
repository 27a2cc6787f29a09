use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("primitive vectors are collinear or degenerate")]
    SingularLattice,

    #[error("Green's tensor is singular at R = 0")]
    SingularArgument,

    #[error("on the light cone (|q| = {q} = k0): q_z vanishes")]
    BranchSingularity { q: f64 },

    #[error("|q| = {q} lies outside the light cone")]
    OutsideLightCone { q: f64 },

    #[error("{what} did not converge: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    ConvergenceFailure {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("singular response matrix: {0}")]
    SingularResponse(String),

    #[error("problem size {size} exceeds the solver cap {cap}")]
    ResourceLimit { size: usize, cap: usize },

    #[error("visibility undefined for zero output intensity")]
    UndefinedVisibility,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by caller-supplied parameters rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::SingularLattice)
    }
}
