//! Modal coordinates for the PID loop and the quadratic Lyapunov function
//! that certifies global exponential regulation.
//!
//! In error coordinates `Y = (y₀ − y₀*, x₁ − y*, x₂)` the loop reads
//! `Ẏ = A Y + (0, 0, g)` with `A` the block companion matrix of the closed-loop
//! cubic and `g = f(x₁, x₂) − f(y*, 0)`. Every matrix below is a 3×3 scalar
//! matrix Kronecker-multiplied by `I_n`, so all work is done on the scalar
//! blocks.

use nalgebra::{DMatrix, Matrix2x3, Matrix3};

use super::CertificateError;
use crate::closed_loop::SecondOrderLoop;
use crate::gain_design::{h, lambda_to_gains, phi, EigenTriple, LipschitzBound};
use crate::integrator::{norm, Trajectory};

const GAINS_MATCH_RTOL: f64 = 1e-9;
const RATE_FIT_MIN_SAMPLES: usize = 10;

/// `Y = P Z` with `P = W·diag(1/λ₁, 1/λ₂, 1/λ₃²)`, `W` the Vandermonde matrix
/// of `Λ`, so `A = P J P⁻¹` with `J = diag(Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTransform {
    lam: EigenTriple,
    n: usize,
    p: Matrix3<f64>,
    p_inv: Matrix3<f64>,
}

fn kron_identity(block: &[f64], rows: usize, cols: usize, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows * n, cols * n);
    for r in 0..rows {
        for c in 0..cols {
            let v = block[r * cols + c];
            for i in 0..n {
                m[(r * n + i, c * n + i)] = v;
            }
        }
    }
    m
}

fn row_major3(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

impl ModalTransform {
    pub fn new(lam: EigenTriple, n: usize) -> Result<Self, CertificateError> {
        if n == 0 {
            return Err(CertificateError::DimensionMismatch { expected: 1, got: 0 });
        }
        if !lam.is_distinct() {
            return Err(CertificateError::DegenerateTriple(format!(
                "repeated eigenvalue in {:?}",
                lam.as_array()
            )));
        }
        let l = lam.as_array();
        if l.iter().any(|&v| v == 0.0) {
            return Err(CertificateError::DegenerateTriple(format!(
                "zero eigenvalue in {l:?}"
            )));
        }
        let [l1, l2, l3] = l;
        let p = Matrix3::new(
            1.0 / l1, 1.0 / l2, 1.0 / (l3 * l3),
            1.0, 1.0, 1.0 / l3,
            l1, l2, 1.0,
        );
        // Row k of W⁻¹ is (∏_{j≠k} λⱼ, −Σ_{j≠k} λⱼ, 1) / ∏_{j≠k}(λₖ − λⱼ),
        // scaled by the k-th diagonal entry of diag(λ₁, λ₂, λ₃²).
        let weights = [l1, l2, l3 * l3];
        let mut p_inv = Matrix3::zeros();
        for k in 0..3 {
            let (a, b) = match k {
                0 => (l2, l3),
                1 => (l1, l3),
                _ => (l1, l2),
            };
            let den = (l[k] - a) * (l[k] - b);
            let s = weights[k] / den;
            p_inv[(k, 0)] = s * a * b;
            p_inv[(k, 1)] = -s * (a + b);
            p_inv[(k, 2)] = s;
        }
        Ok(Self { lam, n, p, p_inv })
    }

    pub fn lam(&self) -> EigenTriple {
        self.lam
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn p_scalar(&self) -> Matrix3<f64> {
        self.p
    }

    pub fn p_inv_scalar(&self) -> Matrix3<f64> {
        self.p_inv
    }

    /// Bottom two block rows of `P`, the map from `Z` to `(e, ė)`.
    pub fn p_prime_scalar(&self) -> Matrix2x3<f64> {
        self.p.fixed_rows::<2>(1).into_owned()
    }

    pub fn p(&self) -> DMatrix<f64> {
        kron_identity(&row_major3(&self.p), 3, 3, self.n)
    }

    pub fn p_inverse(&self) -> DMatrix<f64> {
        kron_identity(&row_major3(&self.p_inv), 3, 3, self.n)
    }

    pub fn p_prime(&self) -> DMatrix<f64> {
        let full = row_major3(&self.p);
        kron_identity(&full[3..], 2, 3, self.n)
    }

    pub fn j(&self) -> DMatrix<f64> {
        let l = self.lam.as_array();
        let diag = [l[0], 0.0, 0.0, 0.0, l[1], 0.0, 0.0, 0.0, l[2]];
        kron_identity(&diag, 3, 3, self.n)
    }

    /// Block companion matrix with last block row `(k_i I, k_p I, k_d I)`.
    pub fn companion(&self) -> DMatrix<f64> {
        let g = lambda_to_gains(&self.lam);
        let block = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, g.ki, g.kp, g.kd];
        kron_identity(&block, 3, 3, self.n)
    }

    /// Operator norm of `P′`; Kronecker products with `I_n` leave it unchanged.
    pub fn p_prime_norm(&self) -> f64 {
        self.p_prime_scalar()
            .singular_values()
            .iter()
            .fold(0.0_f64, |m, &s| m.max(s))
    }

    fn apply_blocks(&self, m: &Matrix3<f64>, v: &[f64]) -> Result<Vec<f64>, CertificateError> {
        let n = self.n;
        if v.len() != 3 * n {
            return Err(CertificateError::DimensionMismatch {
                expected: 3 * n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; 3 * n];
        for r in 0..3 {
            for c in 0..3 {
                let a = m[(r, c)];
                for i in 0..n {
                    out[r * n + i] += a * v[c * n + i];
                }
            }
        }
        Ok(out)
    }

    /// `Z = P⁻¹ Y`.
    pub fn to_modal(&self, y: &[f64]) -> Result<Vec<f64>, CertificateError> {
        self.apply_blocks(&self.p_inv, y)
    }

    /// `Y = P Z`.
    pub fn from_modal(&self, z: &[f64]) -> Result<Vec<f64>, CertificateError> {
        self.apply_blocks(&self.p, z)
    }
}

/// Block weights `(λ₂λ₃, λ₁λ₃, λ₁λ₂)` of the Lyapunov function.
fn lyapunov_weights(lam: &EigenTriple) -> [f64; 3] {
    let [l1, l2, l3] = lam.as_array();
    [l2 * l3, l1 * l3, l1 * l2]
}

/// `V(Z) = ½(λ₂λ₃‖z₀‖² + λ₁λ₃‖z₁‖² + λ₁λ₂‖z₂‖²)`.
pub fn lyapunov_value(z: &[f64], lam: &EigenTriple) -> f64 {
    assert_eq!(z.len() % 3, 0, "modal state must have 3n entries");
    let n = z.len() / 3;
    let w = lyapunov_weights(lam);
    0.5 * (0..3)
        .map(|k| w[k] * z[k * n..(k + 1) * n].iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
}

/// Error coordinates `Y = (y₀ − y₀*, x₁ − y*, x₂)` with `y₀* = −f(y*, 0)/k_i`.
pub fn proof_coordinates(lp: &SecondOrderLoop, physical: &[f64]) -> Result<Vec<f64>, CertificateError> {
    let eq = lp.equilibrium().ok_or(CertificateError::ShiftUndefined)?;
    if physical.len() != eq.len() {
        return Err(CertificateError::DimensionMismatch {
            expected: eq.len(),
            got: physical.len(),
        });
    }
    Ok(physical.iter().zip(&eq).map(|(x, e)| x - e).collect())
}

fn check_gains(lp: &SecondOrderLoop, transform: &ModalTransform) -> Result<(), CertificateError> {
    let g = lp.gains();
    let e = lambda_to_gains(&transform.lam);
    let have = [g.kp, g.ki, g.kd];
    let want = [e.kp, e.ki, e.kd];
    let scale = want.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if have.iter().zip(&want).any(|(a, b)| (a - b).abs() > GAINS_MATCH_RTOL * scale) {
        return Err(CertificateError::GainsMismatch {
            loop_gains: have,
            expected: want,
        });
    }
    Ok(())
}

/// Modal state of a physical state of the loop.
pub fn modal_state(
    lp: &SecondOrderLoop,
    transform: &ModalTransform,
    physical: &[f64],
) -> Result<Vec<f64>, CertificateError> {
    transform.to_modal(&proof_coordinates(lp, physical)?)
}

/// `V̇ = Σₖ wₖ zₖ·żₖ` with `ż = J Z + P⁻¹(0, 0, g)`.
pub fn lyapunov_derivative_along(
    lp: &SecondOrderLoop,
    transform: &ModalTransform,
    physical: &[f64],
) -> Result<f64, CertificateError> {
    if lp.gains().ki == 0.0 {
        return Err(CertificateError::ShiftUndefined);
    }
    check_gains(lp, transform)?;
    let n = lp.dim();
    if transform.dim() != n {
        return Err(CertificateError::DimensionMismatch {
            expected: n,
            got: transform.dim(),
        });
    }
    let z = modal_state(lp, transform, physical)?;
    let x1 = &physical[n..2 * n];
    let x2 = &physical[2 * n..];
    let f_now = lp.plant().evaluate(x1, x2);
    let f_rest = lp.rest_force();
    let g: Vec<f64> = f_now.iter().zip(&f_rest).map(|(a, b)| a - b).collect();

    let lam = transform.lam.as_array();
    let w = lyapunov_weights(&transform.lam);
    let p_inv = transform.p_inv_scalar();
    let mut vdot = 0.0;
    for k in 0..3 {
        for i in 0..n {
            let zk = z[k * n + i];
            let zdot = lam[k] * zk + p_inv[(k, 2)] * g[i];
            vdot += w[k] * zk * zdot;
        }
    }
    Ok(vdot)
}

/// `λ₁λ₂λ₃(1 − Lφh)`: negative exactly when the certificate closes.
pub fn vdot_margin(lam: &EigenTriple, l: LipschitzBound) -> Result<f64, CertificateError> {
    let product = if l.value() == 0.0 {
        0.0
    } else {
        l.value() * phi(lam)? * h(lam)?
    };
    Ok(lam.product() * (1.0 - product))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovCertificate {
    pub lam: EigenTriple,
    pub l: LipschitzBound,
    pub margin: f64,
}

impl LyapunovCertificate {
    pub fn new(lam: EigenTriple, l: LipschitzBound) -> Result<Self, CertificateError> {
        Ok(Self {
            lam,
            l,
            margin: vdot_margin(&lam, l)?,
        })
    }

    pub fn conclusive(&self) -> bool {
        self.margin < 0.0
    }
}

/// Least-squares slope of `ln‖x(t) − x*‖` over the second half of the
/// trajectory, ignoring samples at round-off level.
pub fn exponential_rate_fit(traj: &Trajectory, equilibrium: &[f64]) -> Result<f64, CertificateError> {
    let t_end = traj.final_time();
    let floor = 1e2 * f64::EPSILON;
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= 0.5 * t_end)
        .filter_map(|(t, s)| {
            let d: Vec<f64> = s.iter().zip(equilibrium).map(|(a, b)| a - b).collect();
            let r = norm(&d);
            (r > floor).then(|| (*t, r.ln()))
        })
        .collect();
    let insufficient = CertificateError::InsufficientData {
        usable: pts.len(),
        needed: RATE_FIT_MIN_SAMPLES,
    };
    if pts.len() < RATE_FIT_MIN_SAMPLES {
        return Err(insufficient);
    }
    let m = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - t_mean).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - t_mean) * (p.1 - y_mean)).sum();
    if sxx == 0.0 {
        return Err(insufficient);
    }
    Ok(sxy / sxx)
}
