use thiserror::Error;

use crate::geometry::Frame;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// |det M| fell below the configured floor; the map is not a valid diffeomorphism there.
    #[error("Jacobian determinant {det:e} below floor {floor:e} at y=({y0}, {y1}), s={s}")]
    NonInvertibleJacobian {
        det: f64,
        floor: f64,
        y0: f64,
        y1: f64,
        s: f64,
    },

    #[error("point ({x0}, {x1}) at t={t} lies outside the {domain} domain")]
    OutOfDomain {
        x0: f64,
        x1: f64,
        t: f64,
        domain: &'static str,
    },

    #[error("expected a field in the {expected:?} frame, got {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },

    #[error("Jacobian determinant varies in space by {spread:e} (tolerance {tol:e}) at s={s}")]
    NonUniformJacobian { spread: f64, tol: f64, s: f64 },

    #[error("Gram-Schmidt pivot {pivot:e} for mode {index} below threshold {threshold:e} at s={s}")]
    DegenerateBasis {
        index: usize,
        pivot: f64,
        threshold: f64,
        s: f64,
    },

    #[error("non-finite coefficient after step {step} (t={t})")]
    NonFinite { step: usize, t: f64 },

    #[error("energy {energy:e} exceeded blow-up threshold {threshold:e} after step {step} (t={t})")]
    BlowUp {
        step: usize,
        t: f64,
        energy: f64,
        threshold: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("snapshot cache: {0}")]
    BadCache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonInvertibleJacobian { .. }
                | Error::NonUniformJacobian { .. }
                | Error::DegenerateBasis { .. }
                | Error::NonFinite { .. }
                | Error::BlowUp { .. }
                | Error::OutOfDomain { .. }
        )
    }
}
