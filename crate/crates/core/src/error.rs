use alloc::string::String;

/// Errors raised by model construction, analysis and simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,

    #[error("transfer function is improper: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("closed-loop denominator cancels to zero")]
    DegenerateFeedback,

    #[error("transfer function has a pole on the imaginary axis at omega = {omega} rad/s")]
    PoleOnAxis { omega: f64 },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("Q-filter order {order} is below the plant relative degree; order >= {required} required")]
    FilterOrderTooLow { order: usize, required: usize },

    #[error("simulation diverged (non-finite state) at t = {time} s")]
    Divergence { time: f64 },

    #[error("regression matrix is rank deficient")]
    RankDeficient,

    #[error("algebraic loop through block {block}")]
    AlgebraicLoop { block: usize },

    #[error("unknown experiment case `{0}`")]
    UnknownCase(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, name: &'static str, reason: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason })
    }
}
