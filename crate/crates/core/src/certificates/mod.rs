//! Numerical checks of the stability and instability arguments: the modal
//! Lyapunov certificate for the second-order loop, the invariant cone and
//! escape bounds for the superlinear loop, and the spectral obstruction for
//! the third-order loop. Everything here is sampling-based verification, not
//! a symbolic proof.

mod escape;
mod modal;
mod spectral;

pub use escape::*;
pub use modal::*;
pub use spectral::*;

use thiserror::Error;

use crate::gain_design::DesignError;
use crate::integrator::IntegratorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("eigenvalue triple is degenerate: {0}")]
    DegenerateTriple(String),
    #[error("the equilibrium shift needs a nonzero integral gain")]
    ShiftUndefined,
    #[error("loop gains {loop_gains:?} differ from the gains of the transform's eigenvalues {expected:?}")]
    GainsMismatch { loop_gains: [f64; 3], expected: [f64; 3] },
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("only {usable} usable samples, at least {needed} required")]
    InsufficientData { usable: usize, needed: usize },
    #[error("point {point:?} does not lie on facet {facet:?}")]
    NotOnFacet { facet: Facet, point: [f64; 3] },
    #[error("t = {t} is at or beyond the escape-time bound {bound}")]
    BeyondBound { t: f64, bound: f64 },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("cone parameter must be positive and finite, got {0}")]
    InvalidConeParameter(f64),
    #[error("no verified cone parameter after {0} doublings")]
    ConeSearchExhausted(usize),
    #[error("the integral gain must be nonzero")]
    ZeroIntegralGain,
    #[error("the reduced loop requires a zero integral gain")]
    NonZeroIntegralGain,
    #[error("Lipschitz bound must be positive, got {0}")]
    InvalidLipschitz(f64),
    #[error("no coefficient with distinct roots among {0} candidates")]
    CandidatesExhausted(usize),
    #[error("initial condition has imaginary residue {residual} relative to its norm")]
    ComplexInitialState { residual: f64 },
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
}
