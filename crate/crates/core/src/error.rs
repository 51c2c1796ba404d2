use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative time t = {0}")]
    NegativeTime(f64),

    #[error("quadrature on [{a}, {b}] did not converge within {max_depth} interval halvings")]
    QuadratureDiverged { a: f64, b: f64, max_depth: u32 },

    #[error("point x = {x} lies outside the evaluable domain [{lo}, {hi}] of the initial data")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },

    #[error("unsupported derivative order {0} (expected 0, 1 or 2)")]
    UnsupportedOrder(u8),

    #[error(
        "scale sigma = {sigma} is under-resolved (needs sigma >= 2 * spacing = {min}); \
         raise j_min or refine the grid"
    )]
    UnderResolved { sigma: f64, min: f64 },

    #[error("kernel of {taps} taps is wider than twice the signal length {len}")]
    KernelTooWide { taps: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-positive modulus {0} in scale chain")]
    NonPositiveModulus(f64),

    #[error("too few points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("degenerate ridge: {0}")]
    Degenerate(String),

    #[error("not hyperbolic: b^2 - ac = {discriminant}, c = {c}")]
    NotHyperbolic { discriminant: f64, c: f64 },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }
}
