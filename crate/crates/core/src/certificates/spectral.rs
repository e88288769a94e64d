//! Spectral obstruction for the third-order loop with feedthrough `f = c·x₃`.
//!
//! The loop matrix has characteristic polynomial
//! `g(λ) = λ⁴ − cλ³ − k_dλ² − k_pλ − k_i`, whose roots sum to `c`. With
//! `c > 0` some root has positive real part, so no PID gains make the loop
//! Hurwitz. A multiple root `w` satisfies `3g(w) − w g′(w) = 0`, i.e.
//! `w⁴ + k_d w² + 2k_p w + 3k_i = 0`, a set `R` that does not involve `c`; a
//! coefficient `c` avoiding the at most four values that put `R` on the
//! spectrum gives four distinct roots.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CertificateError;
use crate::closed_loop::ThirdOrderLoop;
use crate::gain_design::PidGains;
use crate::poly;

/// Relative residual below which a point of `R` counts as lying on the spectrum.
pub const MULTIPLE_ROOT_RTOL: f64 = 1e-9;
/// Imaginary residue (relative to the norm) above which an initial condition is complex.
pub const COMPLEX_STATE_RTOL: f64 = 1e-6;
const MAX_C_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub c: f64,
    pub eigenvalues: Vec<Complex64>,
    pub real_part_sum: f64,
    pub max_real_part: f64,
    pub distinct: bool,
    pub multiple_root_set: Vec<Complex64>,
    pub reduced: bool,
}

fn char_coeffs(gains: PidGains, c: f64, reduced: bool) -> Vec<f64> {
    let lp = if reduced {
        ThirdOrderLoop::reduced(gains, c)
    } else {
        ThirdOrderLoop::new(gains, c)
    };
    lp.characteristic_coeffs()
}

/// `(d−1)g − w g′` for the degree-`d` loop polynomial, negated to be monic.
fn multiple_root_coeffs(gains: PidGains, reduced: bool) -> Vec<f64> {
    if reduced {
        vec![0.0, gains.kd, 2.0 * gains.kp]
    } else {
        vec![0.0, gains.kd, 2.0 * gains.kp, 3.0 * gains.ki]
    }
}

/// Value and term scale of the derivative of a monic polynomial.
fn derivative_with_scale(coeffs: &[f64], z: Complex64) -> (Complex64, f64) {
    let d = coeffs.len();
    let r = z.norm();
    let (_, dp) = poly::eval_monic(coeffs, z);
    let mut scale = d as f64 * r.powi(d as i32 - 1);
    for (k, &a) in coeffs.iter().enumerate() {
        let power = d - 1 - k;
        if power > 0 {
            scale += power as f64 * a.abs() * r.powi(power as i32 - 1);
        }
    }
    (dp, scale)
}

/// `|g(w)| / scale`, the relative residual of the loop polynomial at `w`.
pub fn relative_residual(coeffs: &[f64], w: Complex64) -> f64 {
    let (p, _) = poly::eval_monic(coeffs, w);
    let scale = poly::term_scale(coeffs, w);
    if scale == 0.0 {
        0.0
    } else {
        p.norm() / scale
    }
}

fn is_multiple_root_witness(coeffs: &[f64], w: Complex64) -> bool {
    let (dp, dscale) = derivative_with_scale(coeffs, w);
    let dp_small = dscale == 0.0 || dp.norm() <= MULTIPLE_ROOT_RTOL * dscale;
    relative_residual(coeffs, w) <= MULTIPLE_ROOT_RTOL && dp_small
}

fn build_report(gains: PidGains, c: f64, reduced: bool) -> SpectralReport {
    let coeffs = char_coeffs(gains, c, reduced);
    let eigenvalues = poly::monic_roots(&coeffs);
    let r = poly::monic_roots(&multiple_root_coeffs(gains, reduced));
    let separated = eigenvalues.iter().enumerate().all(|(i, a)| {
        eigenvalues[i + 1..]
            .iter()
            .all(|b| (a - b).norm() > MULTIPLE_ROOT_RTOL * a.norm().max(b.norm()).max(1.0))
    });
    let distinct = separated && !r.iter().any(|w| is_multiple_root_witness(&coeffs, *w));
    SpectralReport {
        c,
        real_part_sum: eigenvalues.iter().map(|z| z.re).sum(),
        max_real_part: eigenvalues.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re)),
        eigenvalues,
        distinct,
        multiple_root_set: r,
        reduced,
    }
}

/// Spectrum of the four-state loop.
pub fn spectral_report(gains: PidGains, c: f64) -> SpectralReport {
    build_report(gains, c, false)
}

/// Spectrum of the three-state loop without integral action,
/// `λ³ − cλ² − k_dλ − k_p`.
pub fn spectral_report_reduced(gains: PidGains, c: f64) -> SpectralReport {
    build_report(gains, c, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientChoice {
    pub c: f64,
    pub candidates_tried: usize,
    /// Real coefficients that would put a point of `R` on the spectrum.
    pub excluded: Vec<f64>,
    /// Smallest relative residual of the loop polynomial over `R` at `c`.
    pub min_residual_over_r: f64,
}

/// Real values `c = (wᵈ − k_d w^{d−2} − …)/w^{d−1}` for `w ∈ R`.
fn excluded_values(gains: PidGains, reduced: bool) -> Vec<f64> {
    let r = poly::monic_roots(&multiple_root_coeffs(gains, reduced));
    let mut out: Vec<f64> = r
        .iter()
        .filter(|w| w.norm() > 0.0 && w.im.abs() <= 1e-12 * w.norm())
        .map(|w| {
            let w = w.re;
            if reduced {
                (w.powi(3) - gains.kd * w - gains.kp) / (w * w)
            } else {
                (w.powi(4) - gains.kd * w * w - gains.kp * w - gains.ki) / w.powi(3)
            }
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn select(gains: PidGains, l: f64, reduced: bool) -> Result<CoefficientChoice, CertificateError> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(CertificateError::InvalidLipschitz(l));
    }
    let r = poly::monic_roots(&multiple_root_coeffs(gains, reduced));
    for k in 1..=MAX_C_CANDIDATES {
        let c = l / k as f64;
        let coeffs = char_coeffs(gains, c, reduced);
        let min_residual = r
            .iter()
            .map(|w| relative_residual(&coeffs, *w))
            .fold(f64::INFINITY, f64::min);
        let clear_of_r = reduced || min_residual > MULTIPLE_ROOT_RTOL;
        if clear_of_r && build_report(gains, c, reduced).distinct {
            return Ok(CoefficientChoice {
                c,
                candidates_tried: k,
                excluded: excluded_values(gains, reduced),
                min_residual_over_r: min_residual,
            });
        }
    }
    Err(CertificateError::CandidatesExhausted(MAX_C_CANDIDATES))
}

/// First `c` in `L, L/2, L/3, …` whose loop polynomial has distinct roots and
/// keeps every point of `R` off the spectrum.
pub fn select_c_lemma_a(gains: PidGains, l: f64) -> Result<CoefficientChoice, CertificateError> {
    if gains.ki == 0.0 {
        return Err(CertificateError::ZeroIntegralGain);
    }
    select(gains, l, false)
}

/// Same search for the three-state loop (`k_i = 0`).
pub fn select_c_reduced(gains: PidGains, l: f64) -> Result<CoefficientChoice, CertificateError> {
    if gains.ki != 0.0 {
        return Err(CertificateError::NonZeroIntegralGain);
    }
    select(gains, l, true)
}

/// `P z` with `P` the Vandermonde matrix of `roots` (rows `1, λ, λ², …`).
pub fn vandermonde_apply(roots: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
    let d = roots.len();
    (0..d)
        .map(|row| {
            roots
                .iter()
                .zip(z)
                .map(|(lam, zk)| lam.powu(row as u32) * zk)
                .sum()
        })
        .collect()
}

/// Starting point `y(0) = P·(0, …, 0, −1, 1)` that excites only the two
/// rightmost modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergentStart {
    pub roots: Vec<Complex64>,
    pub y0: Vec<Complex64>,
    /// `‖Im y(0)‖ / ‖y(0)‖`.
    pub imaginary_residual: f64,
    pub reduced: bool,
}

impl DivergentStart {
    pub fn new(gains: PidGains, c: f64, reduced: bool) -> Self {
        let roots = poly::monic_roots(&char_coeffs(gains, c, reduced));
        let d = roots.len();
        let mut z = vec![Complex64::new(0.0, 0.0); d];
        z[d - 2] = Complex64::new(-1.0, 0.0);
        z[d - 1] = Complex64::new(1.0, 0.0);
        let y0 = vandermonde_apply(&roots, &z);
        let total = y0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let imag = y0.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        let imaginary_residual = if total == 0.0 { 0.0 } else { imag / total };
        Self {
            roots,
            y0,
            imaginary_residual,
            reduced,
        }
    }

    /// Rightmost root `λ₃`.
    pub fn top(&self) -> Complex64 {
        self.roots[self.roots.len() - 1]
    }

    /// Second rightmost root `λ₂`.
    pub fn second(&self) -> Complex64 {
        self.roots[self.roots.len() - 2]
    }

    pub fn is_real(&self) -> bool {
        self.imaginary_residual <= COMPLEX_STATE_RTOL
    }

    /// Index of the tracking error `e` in the state vector.
    pub fn error_index(&self) -> usize {
        if self.reduced {
            0
        } else {
            1
        }
    }

    /// Exact error component of the complex solution at time `t`.
    pub fn closed_form_error(&self, t: f64) -> Complex64 {
        if self.reduced {
            (self.top() * t).exp() - (self.second() * t).exp()
        } else {
            prop3_closed_form(self.second(), self.top(), t)
        }
    }

    /// `|λ₃ e^{λ₃t}| + |λ₂ e^{λ₂t}|` (or without the `λ` factors for the
    /// reduced loop): the size of the two terms of the closed form.
    pub fn closed_form_scale(&self, t: f64) -> f64 {
        let (a, b) = (self.top(), self.second());
        if self.reduced {
            (a * t).exp().norm() + (b * t).exp().norm()
        } else {
            (a * (a * t).exp()).norm() + (b * (b * t).exp()).norm()
        }
    }

    /// Real starting point `Re y(0) + Im y(0)`; its solution is the real plus
    /// imaginary part of the complex one.
    pub fn real_combination(&self) -> Vec<f64> {
        self.y0.iter().map(|v| v.re + v.im).collect()
    }
}

/// Real `y(0)` of the divergent solution, or `ComplexInitialState` when the
/// two rightmost modes do not combine into a real vector.
pub fn prop3_initial_condition(gains: PidGains, c: f64) -> Result<Vec<f64>, CertificateError> {
    let start = DivergentStart::new(gains, c, false);
    if !start.is_real() {
        return Err(CertificateError::ComplexInitialState {
            residual: start.imaginary_residual,
        });
    }
    Ok(start.y0.iter().map(|v| v.re).collect())
}

/// `λ₃e^{λ₃t} − λ₂e^{λ₂t}`.
pub fn prop3_closed_form(lambda2: Complex64, lambda3: Complex64, t: f64) -> Complex64 {
    lambda3 * (lambda3 * t).exp() - lambda2 * (lambda2 * t).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(kp: f64, ki: f64, kd: f64) -> PidGains {
        PidGains { kp, ki, kd }
    }

    #[test]
    fn zero_gains_unit_feedthrough() {
        let r = spectral_report(gains(0.0, 0.0, 0.0), 1.0);
        assert!((r.real_part_sum - 1.0).abs() < 1e-9);
        assert!((r.max_real_part - 1.0).abs() < 1e-9);
        assert!(!r.distinct);
    }

    #[test]
    fn multiple_root_set_is_the_stated_quartic() {
        let k = gains(-3.0, 2.0, 0.5);
        let r = spectral_report(k, 0.7);
        for w in &r.multiple_root_set {
            let v = w.powu(4) + k.kd * w * w + 2.0 * k.kp * w + 3.0 * k.ki;
            assert!(v.norm() < 1e-10 * (1.0 + w.norm().powi(4)));
        }
    }

    #[test]
    fn coefficient_selection_skips_double_root() {
        let k = gains(0.0, -1.0, 0.0);
        let choice = select_c_lemma_a(k, 1.0).unwrap();
        assert!(choice.c > 0.0 && choice.c <= 1.0);
        assert!(spectral_report(k, choice.c).distinct);
        assert!(choice.min_residual_over_r > MULTIPLE_ROOT_RTOL);
        assert_eq!(
            select_c_lemma_a(gains(1.0, 0.0, 1.0), 1.0),
            Err(CertificateError::ZeroIntegralGain)
        );
    }

    #[test]
    fn excluded_value_is_skipped() {
        // (λ+1)²(λ² − 3λ + 1) = λ⁴ − λ³ − 4λ² − λ + 1: a double root at −1 when c = 1
        let k = gains(1.0, -1.0, 4.0);
        assert!(!spectral_report(k, 1.0).distinct);
        let bad = excluded_values(k, false);
        assert!(bad.iter().any(|c| (c - 1.0).abs() < 1e-9), "{bad:?}");
        let choice = select_c_lemma_a(k, 1.0).unwrap();
        assert_eq!(choice.candidates_tried, 2);
        assert_eq!(choice.c, 0.5);
    }

    #[test]
    fn closed_form_examples() {
        let one = Complex64::new(1.0, 0.0);
        let two = Complex64::new(2.0, 0.0);
        assert_eq!(prop3_closed_form(one, two, 0.0), two - one);
        let v = prop3_closed_form(one, two, 1.0);
        assert!((v.re - (2.0 * 2f64.exp() - 1f64.exp())).abs() < 1e-12);
        assert!((v.re - 12.059830).abs() < 1e-5, "{}", v.re);
        let (a, b) = (0.3, 1.7);
        let l3 = Complex64::new(a, b);
        let l2 = l3.conj();
        for t in [0.0, 0.5, 2.0] {
            let lhs = prop3_closed_form(l2, l3, t).norm();
            let rhs = (a * t).exp() * (l3 * Complex64::new(0.0, 2.0 * b * t).exp() - l2).norm();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn initial_condition_for_real_roots() {
        // roots of λ⁴ − cλ³ − k_dλ² − k_pλ − k_i = (λ+1)(λ+2)(λ−1)(λ−3)
        // = λ⁴ − λ³ − 7λ² + λ + 6
        let k = gains(-1.0, -6.0, 7.0);
        let y0 = prop3_initial_condition(k, 1.0).unwrap();
        let start = DivergentStart::new(k, 1.0, false);
        assert!((start.top().re - 3.0).abs() < 1e-12);
        assert!((start.second().re - 1.0).abs() < 1e-12);
        assert!((y0[1] - 2.0).abs() < 1e-12);
        assert!((start.closed_form_error(0.0).re - y0[1]).abs() < 1e-12);
        assert_eq!(y0[0], 0.0);
    }

    #[test]
    fn zero_modal_vector_maps_to_zero() {
        let roots = vec![Complex64::new(-1.0, 0.0), Complex64::new(2.0, 0.5)];
        let z = vec![Complex64::new(0.0, 0.0); 2];
        assert!(vandermonde_apply(&roots, &z).iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn conjugate_top_pair_is_complex() {
        // (λ² − 2λ + 5)(λ² + 3λ + 2) = λ⁴ + λ³ + λ² + 11λ + 10, top pair 1 ± 2i
        let k = gains(-11.0, -10.0, -1.0);
        let c = -1.0;
        let start = DivergentStart::new(k, c, false);
        assert!((start.top() - Complex64::new(1.0, 2.0)).norm() < 1e-10);
        assert!(!start.is_real());
        assert!(matches!(
            prop3_initial_condition(k, c),
            Err(CertificateError::ComplexInitialState { .. })
        ));
    }

    #[test]
    fn reduced_variant() {
        let k = gains(-2.0, 0.0, -3.0);
        let choice = select_c_reduced(k, 1.0).unwrap();
        let r = spectral_report_reduced(k, choice.c);
        assert_eq!(r.eigenvalues.len(), 3);
        assert!((r.real_part_sum - choice.c).abs() < 1e-9);
        assert!(r.max_real_part > 0.0);
        assert!(select_c_reduced(gains(1.0, 1.0, 1.0), 1.0).is_err());
    }
}
