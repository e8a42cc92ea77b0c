use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("transition row (h={h}, s={s}, a={a}) sums to {sum}, expected 1")]
    Stochasticity { h: usize, s: usize, a: usize, sum: f64 },

    #[error("negative probability {value} at (h={h}, s={s}, a={a}, next={next})")]
    NegativeProbability { h: usize, s: usize, a: usize, next: usize, value: f64 },

    #[error("non-finite value at (h={h}, s={s}, a={a})")]
    NonFinite { h: usize, s: usize, a: usize },

    #[error("policy row (h={h}, s={s}) is not a distribution (sum {sum})")]
    PolicyRow { h: usize, s: usize, sum: f64 },

    #[error("action {action} out of range at (h={h}, s={s})")]
    InvalidAction { h: usize, s: usize, action: usize },

    #[error("instance too large: {policies} deterministic policies exceed the cap of {cap}")]
    TooLarge { policies: String, cap: usize },

    #[error("policy has gap {gap}, which exceeds epsilon = {epsilon}")]
    NotEpsilonOptimal { gap: f64, epsilon: f64 },

    #[error("the optimal occupancy measure is not unique")]
    NonUniqueOptimum,

    #[error("reachable triplet (h={h}, s={s}, a={a}) has never been visited")]
    Unvisited { h: usize, s: usize, a: usize },

    #[error("covering target is positive on unreachable triplet (h={h}, s={s}, a={a})")]
    InfeasibleTarget { h: usize, s: usize, a: usize },

    #[error("weight b[{index}] = {value} must be strictly positive")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
