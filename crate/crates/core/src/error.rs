use thiserror::Error;

/// Every failure the numerical routines can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point x = {0} is not in the sliding region")]
    NotSliding(f64),
    #[error("X2+ does not change sign on [{0}, {1}]")]
    NoSignChange(f64, f64),
    #[error("more than one sign change of X2+ on [{0}, {1}]")]
    MultipleRoots(f64, f64),
    #[error("trajectory entered the escaping region at x = {0}")]
    EscapeRegion(f64),
    #[error("step limit of {0} steps exceeded")]
    StepLimitExceeded(usize),
    #[error("step size underflow at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("event not bracketed: {0}")]
    EventNotBracketed(String),
    #[error("orbit did not reach the target section: {0}")]
    NoArrival(String),
    #[error("smoothness index p = {0} is invalid for this profile")]
    InvalidP(u32),
    #[error("normal hyperbolicity lost at x = {0}")]
    HyperbolicityLost(f64),
    #[error("asymptotic series used at |u| = {0} < 5")]
    SeriesOutOfRange(f64),
    #[error("inner equation denominator vanished at u = {0}")]
    BlowUp(f64),
    #[error("seed inconsistent with the sign of c_p: {0}")]
    SeedInconsistent(String),
    #[error("start x = {0} lies outside the map's domain")]
    OutOfDomain(f64),
    #[error("exponent fit rejected, r^2 = {0}")]
    FitRejected(f64),
    #[error("tangential crossing of the section at x = {0}")]
    TangentialCrossing(f64),
    #[error("fixed-point iteration diverged: {0}")]
    IterationDiverged(String),
    #[error("saddle not resolved: {0}")]
    SaddleNotResolved(String),
    #[error("unknown model id `{0}`")]
    UnknownModel(String),
    #[error("bad model parameters: {0}")]
    BadParams(String),
    #[error("X- lost transversality at ({0}, {1})")]
    TransversalityLost(f64, f64),
}

pub type Result<T> = std::result::Result<T, Error>;
