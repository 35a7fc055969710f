use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {0} is outside the supported range 1..={max}", max = crate::pauli::MAX_SITES)]
    SiteOutOfRange(usize),

    #[error("term {string} does not fit in a window of {window} sites")]
    OutsideWindow { string: String, window: usize },

    #[error("operator window must be at least 1")]
    EmptyWindow,

    #[error("operator is not traceless")]
    NotTraceless,

    #[error("operator is not Hermitian")]
    NotHermitian,

    #[error("operator is not canonical (every term must act on site 1)")]
    NotCanonical,

    #[error("operator is zero")]
    ZeroOperator,

    #[error("a chain of {n} sites cannot hold an operator spanning {window} sites")]
    ChainTooShort { n: usize, window: usize },

    #[error("moment order {0} exceeds the supported maximum of 4")]
    MomentOrder(u32),

    #[error("no exactly {span}-local string with the required support appears in the expansion")]
    NoWitness { span: usize },

    #[error("witness check failed: {0}")]
    WitnessCheck(String),

    #[error("system size N = {n} exceeds the cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("momentum sectors hold {got} states in total, expected {expected}")]
    SectorBookkeeping { got: usize, expected: usize },

    #[error("observable `{id}` spans {window} sites and needs N >= {min_n}, got N = {n}")]
    ObservableWindow {
        id: String,
        window: usize,
        min_n: usize,
        n: usize,
    },

    #[error("unknown observable `{0}`")]
    UnknownObservable(String),

    #[error("eigendecomposition did not converge")]
    Eigen,

    #[error("least-squares design is rank deficient")]
    RankDeficient,

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("value {value} at N = {n} is not positive")]
    NonPositive { n: f64, value: f64 },

    #[error("polynomial degree {0} exceeds the maximum of 5")]
    Degree(usize),

    #[error("occupation parity does not match the sector")]
    ParityMismatch,

    #[error("occupation has {got} modes, model has {expected}")]
    ModeCount { got: usize, expected: usize },

    #[error("observable is not a transverse-field Ising bilinear: {0}")]
    NotBilinear(String),

    #[error("invalid operator expression `{expr}`: {reason}")]
    Parse { expr: String, reason: String },

    #[error("model file: {0}")]
    Model(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
