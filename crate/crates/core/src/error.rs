use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input domain error: {0}")]
    InputDomain(String),

    #[error("path diverged at t = {t} (|y| exceeded {threshold:e})")]
    Diverged { t: usize, threshold: f64 },

    #[error("family `{family}` does not support {operation}")]
    UnsupportedFamily {
        family: &'static str,
        operation: &'static str,
    },

    #[error("conditional CDF saturated to {value} at t = {t}, component {component}")]
    Saturation {
        t: usize,
        component: usize,
        value: f64,
    },

    #[error("ill-conditioned matrix (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error("degenerate maximising direction: |D'Phi'^h a| = {norm:e}")]
    DegenerateDirection { norm: f64 },

    #[error("degenerate variance in column {column}")]
    DegenerateVariance { column: usize },

    #[error(
        "mixing quadratic has no real root (discriminant {discriminant:e}, \
         regression residual {residual:e}, underidentified: {underidentified})"
    )]
    NoRealRoot {
        discriminant: f64,
        residual: f64,
        underidentified: bool,
    },

    #[error("1 + a12*a21 = {value:e} is too close to zero; mixing not identified by autocovariances")]
    Unidentified { value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InputDomain(msg.into()))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
