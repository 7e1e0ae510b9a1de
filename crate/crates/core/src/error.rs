use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rejection sampler exceeded {0} iterations; angular weight bounds are misconfigured")]
    RejectionExhausted(usize),

    #[error("non-finite velocity at t = {t}; state restored to the last good snapshot")]
    CorruptedState { t: f64, last_good_t: f64 },

    #[error("rescaled energy {energy:e} left the admissible band [{lo:e}, {hi:e}] at s = {s}")]
    Divergence { s: f64, energy: f64, lo: f64, hi: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
