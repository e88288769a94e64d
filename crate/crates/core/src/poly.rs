//! Roots of small monic real polynomials.
//!
//! A monic polynomial of degree `d` is stored as its lower coefficients
//! `[a_{d-1}, ..., a_1, a_0]` for `λ^d + a_{d-1} λ^{d-1} + ... + a_0`.
//! Roots come from the eigenvalues of the companion matrix and are then
//! polished with a few Newton iterations on the polynomial itself. When the
//! Schur iteration does not converge (it can cycle on nilpotent companions)
//! the roots come from simultaneous Aberth–Ehrlich iteration instead.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;
use num_complex::Complex64;

const POLISH_ITERATIONS: usize = 5;
const SCHUR_ITERATIONS_PER_DEGREE: usize = 200;
const ABERTH_ITERATIONS: usize = 500;

/// Value and derivative of the monic polynomial at `z`.
pub fn eval_monic(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in coeffs {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Sum of the magnitudes of the individual terms at `z`; the natural scale
/// against which a residual `|p(z)|` should be judged.
pub fn term_scale(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    let d = coeffs.len();
    let mut scale = r.powi(d as i32);
    for (k, &a) in coeffs.iter().enumerate() {
        scale += a.abs() * r.powi((d - 1 - k) as i32);
    }
    scale
}

/// Companion matrix whose characteristic polynomial is the monic polynomial.
pub fn companion(coeffs: &[f64]) -> DMatrix<f64> {
    let d = coeffs.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    for (k, &a) in coeffs.iter().enumerate() {
        // a_{d-1-k} multiplies λ^{d-1-k}; it sits in row d-1-k of the last column.
        m[(d - 1 - k, d - 1)] = -a;
    }
    m
}

/// All `d` roots (with multiplicity), sorted by ascending real part and then
/// ascending imaginary part.
pub fn monic_roots(coeffs: &[f64]) -> Vec<Complex64> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    let d = coeffs.len();
    if coeffs.iter().all(|&a| a == 0.0) {
        return vec![Complex64::new(0.0, 0.0); d];
    }
    let mut roots: Vec<Complex64> =
        match Schur::try_new(companion(coeffs), f64::EPSILON, SCHUR_ITERATIONS_PER_DEGREE * d) {
            Some(schur) => schur.complex_eigenvalues().iter().map(|z| polish(coeffs, *z)).collect(),
            None => aberth(coeffs),
        };
    sort_roots(&mut roots);
    roots
}

/// Simultaneous root iteration started on a circle of the Cauchy radius.
fn aberth(coeffs: &[f64]) -> Vec<Complex64> {
    let d = coeffs.len();
    let radius = 1.0 + coeffs.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| Complex64::from_polar(radius, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / d as f64))
        .collect();
    for _ in 0..ABERTH_ITERATIONS {
        let mut moved = 0.0_f64;
        for i in 0..d {
            let (p, dp) = eval_monic(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..d).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    z
}

/// Newton polishing that only keeps an iterate when it lowers the residual,
/// so clustered roots are never pushed away from where the eigen-solver put them.
fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, mut dp) = eval_monic(coeffs, z);
    for _ in 0..POLISH_ITERATIONS {
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let (cp, cdp) = eval_monic(coeffs, candidate);
        if !(cp.norm() < p.norm()) {
            break;
        }
        z = candidate;
        p = cp;
        dp = cdp;
    }
    z
}

pub fn sort_roots(roots: &mut [Complex64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}
