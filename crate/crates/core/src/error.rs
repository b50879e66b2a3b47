use thiserror::Error;

pub type Result<T> = std::result::Result<T, QbmError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside profile domain [{t_min}, {t_max}]")]
    Domain { t: f64, t_min: f64, t_max: f64 },

    #[error("point ({x}, {y}) outside grid bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("profile `{0}` is not constant")]
    NotConstant(&'static str),

    #[error("overdamped regime: 4p - m q^2 = {discriminant} <= 0, lambda is not real")]
    Overdamped { discriminant: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("time step {dt} exceeds the admissible step {admissible} at t = {t}")]
    StepSize { dt: f64, admissible: f64, t: f64 },

    #[error("non-finite value detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("pulled-back points leave the grid: shift {shift} exceeds the allowed {allowed} on the {axis} axis; enlarge the grid by at least {required_margin}")]
    Coverage {
        axis: &'static str,
        shift: f64,
        allowed: f64,
        required_margin: f64,
    },

    #[error(
        "{axis} range [{need_min}, {need_max}] is not covered by the grid [{have_min}, {have_max}]"
    )]
    RangeCoverage {
        axis: &'static str,
        need_min: f64,
        need_max: f64,
        have_min: f64,
        have_max: f64,
    },

    #[error("quadratic form {value} is not positive at T = {t}")]
    NonPositiveForm { t: f64, value: f64 },

    #[error("degenerate reduction: {0}")]
    DegenerateReduction(String),

    #[error("ill-posed direction: diffusion S = {s} < 0 at t = {t}")]
    IllPosed { s: f64, t: f64 },

    #[error("rescaling is not monotone: S = {s} <= 0 at t = {t}")]
    Monotonicity { s: f64, t: f64 },

    #[error("rho fell below the floor {floor} at T = {t}")]
    Singularity { t: f64, floor: f64 },

    #[error("Wronskian drift {drift} exceeds tolerance at T = {t}; reduce the step size")]
    Accuracy { drift: f64, t: f64 },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("singular evaluation: {0}")]
    SingularEvaluation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QbmError {
    fn from(e: std::io::Error) -> Self {
        QbmError::Io(e.to_string())
    }
}
