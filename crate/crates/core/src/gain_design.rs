//! Stabilizing parameter regions for the PID loop on a second-order
//! Lipschitz plant, and the Vieta map between closed-loop eigenvalues and
//! PID gains.
//!
//! The closed-loop characteristic polynomial of the PID loop is
//! `λ³ − k_d λ² − k_p λ − k_i` (raised to the `n`-th power in dimension `n`).
//! A triple of distinct negative eigenvalues `Λ` certifies global exponential
//! regulation for every plant with Lipschitz constant `L` whenever
//! `L·φ(Λ)·h(Λ) < 1`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly;

/// Relative tolerance under which two eigenvalues count as coincident.
pub const DISTINCT_RTOL: f64 = 1e-9;
/// Relative tolerance under which a cubic root counts as real.
pub const REAL_ROOT_RTOL: f64 = 1e-9;

const SAMPLER_LAMBDA3_START: f64 = -10.0;
const SAMPLER_MAX_DOUBLINGS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("eigenvalue triple is degenerate: {0}")]
    DegenerateTriple(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("value must be finite: {0}")]
    NonFinite(String),
    #[error("Lipschitz bound must be finite and nonnegative, got {0}")]
    InvalidLipschitz(f64),
    #[error("region search exhausted after {0} doublings")]
    SearchExhausted(usize),
}

/// Design eigenvalues `Λ = (λ₁, λ₂, λ₃)` of the closed-loop cubic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenTriple {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl EigenTriple {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self, DesignError> {
        if !(lambda1.is_finite() && lambda2.is_finite() && lambda3.is_finite()) {
            return Err(DesignError::NonFinite(format!(
                "({lambda1}, {lambda2}, {lambda3})"
            )));
        }
        Ok(Self {
            lambda1,
            lambda2,
            lambda3,
        })
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lambda1, self.lambda2, self.lambda3]
    }

    pub fn product(&self) -> f64 {
        self.lambda1 * self.lambda2 * self.lambda3
    }

    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// True when every pair is separated by more than the relative tolerance.
    pub fn is_distinct(&self) -> bool {
        let [a, b, c] = self.as_array();
        !coincident(a, b) && !coincident(a, c) && !coincident(b, c)
    }

    pub fn all_negative(&self) -> bool {
        self.as_array().iter().all(|&v| v < 0.0)
    }
}

fn coincident(a: f64, b: f64) -> bool {
    (a - b).abs() <= DISTINCT_RTOL * 1.0_f64.max(a.abs()).max(b.abs())
}

/// PID gains `(k_p, k_i, k_d)` in the convention `u = k_p e + k_i ∫e + k_d ė`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self, DesignError> {
        if !(kp.is_finite() && ki.is_finite() && kd.is_finite()) {
            return Err(DesignError::NonFinite(format!("({kp}, {ki}, {kd})")));
        }
        Ok(Self { kp, ki, kd })
    }

    pub fn abs_sum(&self) -> f64 {
        self.kp.abs() + self.ki.abs() + self.kd.abs()
    }
}

/// Global Lipschitz constant `L ≥ 0` of the plant nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LipschitzBound(f64);

impl LipschitzBound {
    pub fn new(value: f64) -> Result<Self, DesignError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(DesignError::InvalidLipschitz(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureReason {
    NotReal,
    NotNegative,
    NotDistinct,
    ProductNotBelowOne,
}

/// Outcome of a region-membership test. Failures are data, never errors,
/// so grid sweeps always run to completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Triple the report was evaluated on (for `Ω_K`, the best labelling of the roots).
    pub lambda: Option<EigenTriple>,
    pub phi_value: f64,
    pub h_value: f64,
    pub product_l_phi_h: f64,
    pub member: bool,
    pub failure_reasons: Vec<FailureReason>,
}

impl RegionReport {
    fn from_reasons(
        lambda: Option<EigenTriple>,
        phi_value: f64,
        h_value: f64,
        product_l_phi_h: f64,
        failure_reasons: Vec<FailureReason>,
    ) -> Self {
        Self {
            lambda,
            phi_value,
            h_value,
            product_l_phi_h,
            member: failure_reasons.is_empty(),
            failure_reasons,
        }
    }
}

/// `φ(Λ)`, the weight that couples the plant nonlinearity into the modal
/// Lyapunov derivative.
pub fn phi(lam: &EigenTriple) -> Result<f64, DesignError> {
    if !lam.is_distinct() {
        return Err(DesignError::DegenerateTriple(format!(
            "repeated eigenvalue in {:?}",
            lam.as_array()
        )));
    }
    let [l1, l2, l3] = lam.as_array();
    let d32 = l3 - l2;
    let d31 = l3 - l1;
    let d21 = l2 - l1;
    let num = d32 * d32 + d31 * d31 + l3 * l3 * d21 * d21;
    let den = d31 * d31 * d21 * d21 * d32 * d32;
    Ok((num / den).sqrt())
}

/// `h(Λ)`, the bound on the operator norm of the map from modal to
/// error/velocity coordinates.
pub fn h(lam: &EigenTriple) -> Result<f64, DesignError> {
    if lam.lambda3 == 0.0 {
        return Err(DesignError::DegenerateTriple("lambda3 is zero".into()));
    }
    let [l1, l2, l3] = lam.as_array();
    Ok((3.0 + l1 * l1 + l2 * l2 + 1.0 / (l3 * l3)).sqrt())
}

pub fn in_omega_lambda(lam: &EigenTriple, l: LipschitzBound) -> RegionReport {
    let mut reasons = Vec::new();
    if !lam.all_negative() {
        reasons.push(FailureReason::NotNegative);
    }
    let phi_value = match phi(lam) {
        Ok(v) => v,
        Err(_) => {
            reasons.push(FailureReason::NotDistinct);
            f64::INFINITY
        }
    };
    let h_value = h(lam).unwrap_or(f64::INFINITY);
    let product = if l.value() == 0.0 {
        0.0
    } else {
        l.value() * phi_value * h_value
    };
    if !(product < 1.0) {
        reasons.push(FailureReason::ProductNotBelowOne);
    }
    RegionReport::from_reasons(Some(*lam), phi_value, h_value, product, reasons)
}

/// Vieta map: gains whose closed-loop cubic has roots exactly `Λ`.
pub fn lambda_to_gains(lam: &EigenTriple) -> PidGains {
    let [l1, l2, l3] = lam.as_array();
    PidGains {
        kp: -(l1 * l2 + l1 * l3 + l2 * l3),
        ki: l1 * l2 * l3,
        kd: l1 + l2 + l3,
    }
}

/// Roots of `λ³ − k_d λ² − k_p λ − k_i`, sorted by ascending real part.
pub fn gains_to_lambda(gains: &PidGains) -> [Complex64; 3] {
    let roots = poly::monic_roots(&closed_loop_cubic(gains));
    [roots[0], roots[1], roots[2]]
}

/// Lower coefficients of the monic closed-loop cubic.
pub fn closed_loop_cubic(gains: &PidGains) -> [f64; 3] {
    [-gains.kd, -gains.kp, -gains.ki]
}

/// Membership in `Ω_K`: the closed-loop roots must be real, negative, distinct,
/// and some labelling of them must lie in `Ω_Λ`. `φ` and `h` are not symmetric,
/// so all six labellings are tried and the one with the smallest product kept.
pub fn in_omega_k(gains: &PidGains, l: LipschitzBound) -> RegionReport {
    let roots = gains_to_lambda(gains);
    let all_real = roots
        .iter()
        .all(|r| r.im.abs() <= REAL_ROOT_RTOL * 1.0_f64.max(r.norm()));
    if !all_real {
        let mut reasons = vec![FailureReason::NotReal];
        if roots.iter().any(|r| r.re >= 0.0) {
            reasons.push(FailureReason::NotNegative);
        }
        return RegionReport::from_reasons(
            None,
            f64::INFINITY,
            f64::INFINITY,
            f64::INFINITY,
            reasons,
        );
    }
    let re = [roots[0].re, roots[1].re, roots[2].re];
    const PERMUTATIONS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best: Option<RegionReport> = None;
    for perm in PERMUTATIONS {
        let lam = EigenTriple {
            lambda1: re[perm[0]],
            lambda2: re[perm[1]],
            lambda3: re[perm[2]],
        };
        let report = in_omega_lambda(&lam, l);
        let better = match &best {
            None => true,
            Some(b) => {
                (report.member && !b.member)
                    || (report.member == b.member && report.product_l_phi_h < b.product_l_phi_h)
            }
        };
        if better {
            best = Some(report);
        }
    }
    best.expect("six labellings evaluated")
}

/// Closed-form gains on the two-parameter family `(−ε, −(1+ε), −a)`.
pub fn corollary_gains(epsilon: f64, a: f64, l: LipschitzBound) -> Result<PidGains, DesignError> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(DesignError::ParameterOutOfRange(format!(
            "epsilon must lie in (0, 1/4), got {epsilon}"
        )));
    }
    let a_min = (5.0 * l.value()).max(5.0);
    if !(a > a_min) || !a.is_finite() {
        return Err(DesignError::ParameterOutOfRange(format!(
            "a must exceed max(5L, 5) = {a_min}, got {a}"
        )));
    }
    Ok(lambda_to_gains(&corollary_triple(epsilon, a)))
}

/// The eigenvalue triple behind [`corollary_gains`].
pub fn corollary_triple(epsilon: f64, a: f64) -> EigenTriple {
    EigenTriple {
        lambda1: -epsilon,
        lambda2: -(1.0 + epsilon),
        lambda3: -a,
    }
}

/// Draw a member of `Ω_Λ`: distinct `λ₁, λ₂` uniform in `[−2, −0.01]`, then
/// push `λ₃` from −10 toward −∞ by doubling until the product condition holds.
pub fn sample_omega_lambda(l: LipschitzBound, seed: u64) -> Result<EigenTriple, DesignError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l1, l2) = loop {
        let a: f64 = rng.random_range(-2.0..=-0.01);
        let b: f64 = rng.random_range(-2.0..=-0.01);
        if !coincident(a, b) {
            break (a, b);
        }
    };
    let mut l3 = SAMPLER_LAMBDA3_START;
    for _ in 0..SAMPLER_MAX_DOUBLINGS {
        let lam = EigenTriple {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
        };
        if in_omega_lambda(&lam, l).member {
            return Ok(lam);
        }
        l3 *= 2.0;
    }
    Err(DesignError::SearchExhausted(SAMPLER_MAX_DOUBLINGS))
}

/// Determinant of the Jacobian of the Vieta map, `(λ₁−λ₂)(λ₁−λ₃)(λ₃−λ₂)`.
pub fn vieta_jacobian_det(lam: &EigenTriple) -> f64 {
    let [l1, l2, l3] = lam.as_array();
    (l1 - l2) * (l1 - l3) * (l3 - l2)
}
