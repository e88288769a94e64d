//! Autonomous closed-loop vector fields: the PID loop on a second-order plant,
//! the superlinear loop used for the finite-escape demonstration, and the
//! linear third-order loop used for the spectral obstruction.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::gain_design::PidGains;
use crate::integrator::VectorField;
use crate::plants::PlantFunction;

/// Floor applied to the base of the superlinear power before taking its log.
pub const SUPERLINEAR_BASE_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("setpoint has dimension {got}, plant has dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
}

/// PID loop on `ẍ = f(x, ẋ) + u`, integrated over the physical state
/// `(y₀, x₁, x₂)` where `y₀ = ∫(x₁ − y*)`.
#[derive(Debug, Clone)]
pub struct SecondOrderLoop {
    plant: PlantFunction,
    gains: PidGains,
    setpoint: Vec<f64>,
}

impl SecondOrderLoop {
    pub fn new(plant: PlantFunction, gains: PidGains, setpoint: Vec<f64>) -> Result<Self, LoopError> {
        if setpoint.len() != plant.dim() {
            return Err(LoopError::DimensionMismatch {
                expected: plant.dim(),
                got: setpoint.len(),
            });
        }
        Ok(Self {
            plant,
            gains,
            setpoint,
        })
    }

    pub fn plant(&self) -> &PlantFunction {
        &self.plant
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    pub fn setpoint(&self) -> &[f64] {
        &self.setpoint
    }

    pub fn dim(&self) -> usize {
        self.plant.dim()
    }

    pub fn state_dim(&self) -> usize {
        3 * self.dim()
    }

    /// `f(y*, 0)`, the force the integral term must cancel at rest.
    pub fn rest_force(&self) -> Vec<f64> {
        self.plant.evaluate(&self.setpoint, &vec![0.0; self.dim()])
    }

    /// The fixed point `(−f(y*,0)/k_i, y*, 0)`; undefined without integral action.
    pub fn equilibrium(&self) -> Option<Vec<f64>> {
        if self.gains.ki == 0.0 {
            return None;
        }
        let n = self.dim();
        let mut eq = vec![0.0; 3 * n];
        for (i, f) in self.rest_force().iter().enumerate() {
            eq[i] = -f / self.gains.ki;
            eq[n + i] = self.setpoint[i];
        }
        Some(eq)
    }

    pub fn derivative(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; state.len()];
        self.eval(state, &mut out);
        out
    }
}

impl VectorField for SecondOrderLoop {
    fn eval(&self, state: &[f64], deriv: &mut [f64]) {
        let n = self.dim();
        let (y0, rest) = state.split_at(n);
        let (x1, x2) = rest.split_at(n);
        let PidGains { kp, ki, kd } = self.gains;
        let (d0, drest) = deriv.split_at_mut(n);
        let (d1, d2) = drest.split_at_mut(n);
        self.plant.evaluate_into(x1, x2, d2);
        for i in 0..n {
            let e = x1[i] - self.setpoint[i];
            d0[i] = e;
            d1[i] = x2[i];
            d2[i] += kp * e + ki * y0[i] + kd * x2[i];
        }
    }
}

/// `(0, x₁(0), x₂(0))`: the integral of the error always starts at zero.
pub fn initial_state_from_physical(x1: &[f64], x2: &[f64], setpoint: &[f64]) -> Vec<f64> {
    assert_eq!(x1.len(), x2.len());
    assert_eq!(x1.len(), setpoint.len());
    let mut s = vec![0.0; x1.len()];
    s.extend_from_slice(x1);
    s.extend_from_slice(x2);
    s
}

/// Physical state `(y₀, x₁, x₂)` to error coordinates `(y₀, x₁ − y*, x₂)`.
pub fn error_coordinates(state: &[f64], setpoint: &[f64]) -> Vec<f64> {
    let n = setpoint.len();
    assert_eq!(state.len(), 3 * n);
    let mut out = state.to_vec();
    for i in 0..n {
        out[n + i] -= setpoint[i];
    }
    out
}

/// Scalar PID loop on `ẍ = ‖(x, ẋ)‖^{1+ε} + u`, written in error coordinates
/// `(∫e, e, ė)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperlinearLoop {
    epsilon: f64,
    gains: PidGains,
    setpoint: f64,
}

impl SuperlinearLoop {
    pub fn new(epsilon: f64, gains: PidGains, setpoint: f64) -> Result<Self, LoopError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(LoopError::NonPositiveEpsilon(epsilon));
        }
        Ok(Self {
            epsilon,
            gains,
            setpoint,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    pub fn setpoint(&self) -> f64 {
        self.setpoint
    }

    /// `((y₁+y*)² + y₂²)^{(1+ε)/2}` evaluated through `exp/ln` with a floored base.
    pub fn growth_term(&self, y1: f64, y2: f64) -> f64 {
        let base = (y1 + self.setpoint).powi(2) + y2 * y2;
        (0.5 * (1.0 + self.epsilon) * base.max(SUPERLINEAR_BASE_FLOOR).ln()).exp()
    }

    /// Right-hand side of the `ẏ₂` equation.
    pub fn acceleration(&self, y: &[f64; 3]) -> f64 {
        let PidGains { kp, ki, kd } = self.gains;
        self.growth_term(y[1], y[2]) + ki * y[0] + kp * y[1] + kd * y[2]
    }

    pub fn derivative(&self, y: &[f64; 3]) -> [f64; 3] {
        [y[1], y[2], self.acceleration(y)]
    }
}

impl VectorField for SuperlinearLoop {
    fn eval(&self, state: &[f64], deriv: &mut [f64]) {
        let y = [state[0], state[1], state[2]];
        deriv.copy_from_slice(&self.derivative(&y));
    }
}

/// Linear loop `ẏ = A y` obtained from the third-order plant with the
/// feedthrough nonlinearity `f = c·x₃`. The full loop has state
/// `(∫e, e, ė, ë)`; the reduced loop (no integral action) drops `∫e`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdOrderLoop {
    c: f64,
    gains: PidGains,
    reduced: bool,
}

impl ThirdOrderLoop {
    pub fn new(gains: PidGains, c: f64) -> Self {
        Self {
            c,
            gains,
            reduced: false,
        }
    }

    /// Three-state loop `(e, ė, ë)` for `k_i = 0`, last row `(k_p, k_d, c)`.
    pub fn reduced(gains: PidGains, c: f64) -> Self {
        Self {
            c,
            gains,
            reduced: true,
        }
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gains(&self) -> PidGains {
        self.gains
    }

    pub fn state_dim(&self) -> usize {
        if self.reduced {
            3
        } else {
            4
        }
    }

    fn last_row(&self) -> Vec<f64> {
        let PidGains { kp, ki, kd } = self.gains;
        if self.reduced {
            vec![kp, kd, self.c]
        } else {
            vec![ki, kp, kd, self.c]
        }
    }

    /// Companion matrix of the loop.
    pub fn matrix(&self) -> DMatrix<f64> {
        let d = self.state_dim();
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d - 1 {
            a[(i, i + 1)] = 1.0;
        }
        for (j, v) in self.last_row().into_iter().enumerate() {
            a[(d - 1, j)] = v;
        }
        a
    }

    /// Lower coefficients of the monic characteristic polynomial
    /// `λ⁴ − cλ³ − k_dλ² − k_pλ − k_i` (or `λ³ − cλ² − k_dλ − k_p` when reduced).
    pub fn characteristic_coeffs(&self) -> Vec<f64> {
        self.last_row().iter().rev().map(|v| -v).collect()
    }

    pub fn derivative(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; state.len()];
        self.eval(state, &mut out);
        out
    }
}

impl VectorField for ThirdOrderLoop {
    fn eval(&self, state: &[f64], deriv: &mut [f64]) {
        let d = self.state_dim();
        deriv[..d - 1].copy_from_slice(&state[1..d]);
        deriv[d - 1] = self
            .last_row()
            .iter()
            .zip(state)
            .map(|(a, y)| a * y)
            .sum();
    }
}
