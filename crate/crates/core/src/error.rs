use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),

    #[error("state is not normalized (|<psi|psi> - 1| = {deviation:e})")]
    NotNormalized { deviation: f64 },

    #[error("weight {weight:e} within two photons of the truncation edge exceeds threshold {threshold:e}")]
    TruncationLeakage { weight: f64, threshold: f64 },

    #[error("relevant-operator index ({n}, {m}) exceeds the truncation")]
    IndexOutOfRange { n: usize, m: usize },

    #[error("series not converged: tail bound {tail:e} exceeds {bound:e}")]
    ConvergenceNotReached { tail: f64, bound: f64 },

    #[error("moment sum dominated by truncation (tail estimate {tail:e})")]
    TruncationDominated { tail: f64 },

    #[error("initial state carries atom-field coherence (max |<F>|, |<I>| = {0:e})")]
    NonDiagonalInitialState(f64),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("maximum number of integrator steps ({0}) exceeded")]
    MaxStepsExceeded(usize),

    #[error("bisection failed: target {target} outside bracket [{lo}, {hi}]")]
    BisectionFailed { target: f64, lo: f64, hi: f64 },

    #[error("Kerr susceptibilities must be equal for the Stark mapping (chi1 = {chi1}, chi2 = {chi2})")]
    KerrAsymmetry { chi1: f64, chi2: f64 },

    #[error("series of {len} samples is shorter than the smoothing window ({window})")]
    SeriesTooShort { len: usize, window: usize },

    #[error("csv output failed: {0}")]
    Csv(String),
}

impl Error {
    /// True for failures of a numerical method rather than of the inputs.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::ConvergenceNotReached { .. }
                | Error::TruncationDominated { .. }
                | Error::StepSizeUnderflow { .. }
                | Error::MaxStepsExceeded(_)
                | Error::BisectionFailed { .. }
                | Error::TruncationLeakage { .. }
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
