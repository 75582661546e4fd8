use thiserror::Error;

/// Errors raised by the model, the DPP machinery and the sampler.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The loadings matrix is (numerically) rank deficient.
    #[error("invalid loadings: smallest singular value {0:.3e} is below 1e-10")]
    InvalidLoadings(f64),

    /// A factorization that should succeed for a proper state did not.
    #[error("ill-conditioned state: {0}")]
    IllConditioned(String),

    /// Spectral density reached 1 somewhere on the lattice.
    #[error("DPP existence violated: phi({index}) = {value} >= 1")]
    Existence { index: usize, value: f64 },

    #[error("unsupported kernel family for {0}")]
    UnsupportedFamily(&'static str),

    #[error("column {0} has zero variance")]
    ZeroVariance(usize),

    #[error("sampler aborted at iteration {iter}: {source}")]
    Sampler {
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
