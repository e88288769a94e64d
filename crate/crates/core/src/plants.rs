//! Plant nonlinearities `f(x, v)` for the unit-mass body `ẍ = f(x, ẋ) + u`,
//! a small catalog of named examples, and a sampling probe for Lipschitz
//! constants.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("unknown plant `{0}` (expected one of: {names})", names = CATALOG_NAMES.join(", "))]
    UnknownPlant(String),
    #[error("bad parameters for `{plant}`: {reason}")]
    BadParams { plant: String, reason: String },
}

pub const CATALOG_NAMES: [&str; 6] = [
    "zero",
    "linear",
    "sine_mix",
    "pendulum",
    "damped_spring",
    "power_law",
];

type ForceFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A nonlinearity `f: ℝⁿ × ℝⁿ → ℝⁿ` acting on (position, velocity).
#[derive(Clone)]
pub struct PlantFunction {
    dim: usize,
    label: String,
    declared_l: Option<f64>,
    eval: Arc<ForceFn>,
}

impl fmt::Debug for PlantFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantFunction")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("declared_l", &self.declared_l)
            .finish()
    }
}

impl PlantFunction {
    /// Wrap a closure. `declared_l` is a claimed global Lipschitz constant
    /// (Euclidean norms); pass `None` for plants that are not globally Lipschitz.
    pub fn new<F>(dim: usize, label: impl Into<String>, declared_l: Option<f64>, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "plant dimension must be positive");
        Self {
            dim,
            label: label.into(),
            declared_l,
            eval: Arc::new(eval),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn declared_l(&self) -> Option<f64> {
        self.declared_l
    }

    pub fn not_globally_lipschitz(&self) -> bool {
        self.declared_l.is_none()
    }

    pub fn evaluate_into(&self, position: &[f64], velocity: &[f64], out: &mut [f64]) {
        debug_assert_eq!(position.len(), self.dim);
        debug_assert_eq!(velocity.len(), self.dim);
        (self.eval)(position, velocity, out);
    }

    pub fn evaluate(&self, position: &[f64], velocity: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(position, velocity, &mut out);
        out
    }

    /// Evaluate on a stacked point `[x; v] ∈ ℝ^{2n}`.
    pub fn evaluate_stacked(&self, point: &[f64]) -> Vec<f64> {
        let (x, v) = point.split_at(self.dim);
        self.evaluate(x, v)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, "zero", Some(0.0), |_, _, out| out.fill(0.0))
    }

    /// `f = A·[x; v]` for an `n × 2n` matrix `A`, with `L = ‖A‖₂`.
    pub fn linear(matrix: DMatrix<f64>) -> Self {
        let dim = matrix.nrows();
        assert_eq!(matrix.ncols(), 2 * dim, "linear plant needs an n x 2n matrix");
        let l = operator_norm(&matrix);
        Self::new(dim, "linear", Some(l), move |x, v, out| {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..dim {
                    acc += matrix[(i, j)] * x[j] + matrix[(i, dim + j)] * v[j];
                }
                *o = acc;
            }
        })
    }

    /// Scalar `f = α sin x + β cos v`, `L = √(α² + β²)`.
    pub fn sine_mix(alpha: f64, beta: f64) -> Self {
        Self::new(1, "sine_mix", Some(alpha.hypot(beta)), move |x, v, out| {
            out[0] = alpha * x[0].sin() + beta * v[0].cos();
        })
    }

    /// Scalar `f = −(g/ℓ) sin x − c v`.
    pub fn pendulum(gravity: f64, length: f64, damping: f64) -> Self {
        let w = gravity / length;
        Self::new(1, "pendulum", Some(w.hypot(damping)), move |x, v, out| {
            out[0] = -w * x[0].sin() - damping * v[0];
        })
    }

    /// Scalar `f = −k x − c v`.
    pub fn damped_spring(stiffness: f64, damping: f64) -> Self {
        Self::new(
            1,
            "damped_spring",
            Some(stiffness.hypot(damping)),
            move |x, v, out| {
                out[0] = -stiffness * x[0] - damping * v[0];
            },
        )
    }

    /// Scalar `f = (x² + v²)^{(1+ε)/2}`; superlinear, so no global Lipschitz constant.
    pub fn power_law(epsilon: f64) -> Self {
        Self::new(1, "power_law", None, move |x, v, out| {
            out[0] = (x[0] * x[0] + v[0] * v[0]).powf(0.5 * (1.0 + epsilon));
        })
    }
}

/// A scalar nonlinearity on ℝ³ for the third-order loop.
#[derive(Clone)]
pub struct ThirdOrderPlantFunction {
    declared_l: Option<f64>,
    eval: Arc<dyn Fn(&[f64; 3]) -> f64 + Send + Sync>,
}

impl fmt::Debug for ThirdOrderPlantFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThirdOrderPlantFunction")
            .field("declared_l", &self.declared_l)
            .finish()
    }
}

impl ThirdOrderPlantFunction {
    pub fn new<F>(declared_l: Option<f64>, eval: F) -> Self
    where
        F: Fn(&[f64; 3]) -> f64 + Send + Sync + 'static,
    {
        Self {
            declared_l,
            eval: Arc::new(eval),
        }
    }

    /// `f(x₁, x₂, x₃) = c·x₃`, Lipschitz with constant `|c|`.
    pub fn feedthrough(c: f64) -> Self {
        Self::new(Some(c.abs()), move |x| c * x[2])
    }

    pub fn declared_l(&self) -> Option<f64> {
        self.declared_l
    }

    pub fn evaluate(&self, x: &[f64; 3]) -> f64 {
        (self.eval)(x)
    }
}

pub fn operator_norm(matrix: &DMatrix<f64>) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    matrix
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |m, &s| m.max(s))
}

fn bad(plant: &str, reason: impl Into<String>) -> PlantError {
    PlantError::BadParams {
        plant: plant.to_string(),
        reason: reason.into(),
    }
}

struct Params<'a> {
    plant: &'a str,
    map: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn get(&self, key: &str, default: f64) -> Result<f64, PlantError> {
        match self.map.get(key) {
            Some(v) if v.is_finite() => Ok(*v),
            Some(v) => Err(bad(self.plant, format!("`{key}` must be finite, got {v}"))),
            None => Ok(default),
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<(), PlantError> {
        for key in self.map.keys() {
            let known = allowed.iter().any(|a| a == key) || (self.plant == "linear" && key.starts_with('a'));
            if !known {
                return Err(bad(self.plant, format!("unknown parameter `{key}`")));
            }
        }
        Ok(())
    }

    fn dim(&self) -> Result<usize, PlantError> {
        let n = self.get("n", 1.0)?;
        if n < 1.0 || n.fract() != 0.0 || n > 1024.0 {
            return Err(bad(self.plant, format!("`n` must be a positive integer, got {n}")));
        }
        Ok(n as usize)
    }
}

/// Build a named plant. Parameters:
///
/// * `zero`: `n` (default 1)
/// * `linear`: `n` (default 1) and entries `a{i}_{j}` (1-based, `j ≤ 2n`) of the
///   `n × 2n` matrix; for `n = 1` the shorthand `a11`, `a12` is accepted
/// * `sine_mix`: `alpha`, `beta`
/// * `pendulum`: `g` (9.81), `l` (1), `c` (0)
/// * `damped_spring`: `k`, `c`
/// * `power_law`: `epsilon` (> 0)
pub fn catalog_lookup(name: &str, params: &BTreeMap<String, f64>) -> Result<PlantFunction, PlantError> {
    let p = Params { plant: name, map: params };
    match name {
        "zero" => {
            p.only(&["n"])?;
            Ok(PlantFunction::zero(p.dim()?))
        }
        "linear" => {
            p.only(&["n"])?;
            let n = p.dim()?;
            let mut m = DMatrix::zeros(n, 2 * n);
            for key in params.keys().filter(|k| k.starts_with('a')) {
                let (i, j) = parse_entry(key, n).ok_or_else(|| bad(name, format!("bad matrix entry `{key}`")))?;
                m[(i, j)] = p.get(key, 0.0)?;
            }
            Ok(PlantFunction::linear(m))
        }
        "sine_mix" => {
            p.only(&["alpha", "beta"])?;
            Ok(PlantFunction::sine_mix(p.get("alpha", 1.0)?, p.get("beta", 0.0)?))
        }
        "pendulum" => {
            p.only(&["g", "l", "c"])?;
            let length = p.get("l", 1.0)?;
            if length <= 0.0 {
                return Err(bad(name, "pendulum length must be positive"));
            }
            Ok(PlantFunction::pendulum(p.get("g", 9.81)?, length, p.get("c", 0.0)?))
        }
        "damped_spring" => {
            p.only(&["k", "c"])?;
            Ok(PlantFunction::damped_spring(p.get("k", 1.0)?, p.get("c", 0.0)?))
        }
        "power_law" => {
            p.only(&["epsilon"])?;
            let eps = p.get("epsilon", 1.0)?;
            if eps <= 0.0 {
                return Err(bad(name, format!("epsilon must be positive, got {eps}")));
            }
            Ok(PlantFunction::power_law(eps))
        }
        other => Err(PlantError::UnknownPlant(other.to_string())),
    }
}

fn parse_entry(key: &str, n: usize) -> Option<(usize, usize)> {
    let rest = key.strip_prefix('a')?;
    let (i, j) = match rest.split_once('_') {
        Some((i, j)) => (i.parse::<usize>().ok()?, j.parse::<usize>().ok()?),
        None if n == 1 && rest.len() == 2 => {
            let mut chars = rest.chars();
            (
                chars.next()?.to_digit(10)? as usize,
                chars.next()?.to_digit(10)? as usize,
            )
        }
        None => return None,
    };
    (i >= 1 && i <= n && j >= 1 && j <= 2 * n).then(|| (i - 1, j - 1))
}

/// Largest sampled difference quotient of a plant. This is a lower bound on
/// the true Lipschitz constant, never a certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledLipschitz {
    /// `max ‖f(x)−f(y)‖ / ‖x−y‖` over the sampled pairs; the true constant is at least this.
    pub sampled_max: f64,
    pub pairs: usize,
}

/// Probe `f` with `samples` seeded pairs in `[−r, r]^{2n}`. Even-indexed pairs
/// are independent points; odd-indexed pairs sit `1e−5·max(1, r)` apart along a random
/// direction to catch local slope.
pub fn estimate_lipschitz(f: &PlantFunction, box_radius: f64, samples: usize, seed: u64) -> SampledLipschitz {
    estimate_lipschitz_around(f, &vec![0.0; 2 * f.dim()], box_radius, samples, seed)
}

/// Same probe over the box `center + [−r, r]^{2n}`, with `center` stacked as
/// `(position, velocity)`.
pub fn estimate_lipschitz_around(
    f: &PlantFunction,
    center: &[f64],
    box_radius: f64,
    samples: usize,
    seed: u64,
) -> SampledLipschitz {
    assert!(samples >= 2, "need at least two samples");
    let dim = 2 * f.dim();
    assert_eq!(center.len(), dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut best = 0.0_f64;
    for k in 0..samples {
        for (xi, c) in x.iter_mut().zip(center) {
            *xi = c + rng.random_range(-box_radius..=box_radius);
        }
        if k % 2 == 0 {
            for (yi, c) in y.iter_mut().zip(center) {
                *yi = c + rng.random_range(-box_radius..=box_radius);
            }
        } else {
            let mut dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            dir.iter_mut().for_each(|d| *d *= 1e-5 * box_radius.max(1.0) / norm);
            for ((yi, xi), di) in y.iter_mut().zip(&x).zip(&dir) {
                *yi = xi + di;
            }
        }
        let dx = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dx == 0.0 {
            continue;
        }
        let fx = f.evaluate_stacked(&x);
        let fy = f.evaluate_stacked(&y);
        let df = fx.iter().zip(&fy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        best = best.max(df / dx);
    }
    SampledLipschitz {
        sampled_max: best,
        pairs: samples,
    }
}

/// `g(y₁, y₂) = f(y₁ + y*, y₂) − f(y*, 0)`: same Lipschitz constant, `g(0, 0) = 0`.
pub fn shift_nonlinearity(f: &PlantFunction, setpoint: &[f64]) -> PlantFunction {
    assert_eq!(setpoint.len(), f.dim());
    let base = f.clone();
    let ystar = setpoint.to_vec();
    let offset = f.evaluate(setpoint, &vec![0.0; f.dim()]);
    let label = format!("{}@shifted", f.label());
    PlantFunction::new(f.dim(), label, f.declared_l(), move |y1, y2, out| {
        let x: Vec<f64> = y1.iter().zip(&ystar).map(|(a, b)| a + b).collect();
        base.evaluate_into(&x, y2, out);
        for (o, c) in out.iter_mut().zip(&offset) {
            *o -= c;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn zero_plant_is_zero_everywhere() {
        let f = catalog_lookup("zero", &params(&[])).unwrap();
        assert_eq!(f.evaluate(&[3.0], &[-7.0]), vec![0.0]);
        assert_eq!(f.declared_l(), Some(0.0));
    }

    #[test]
    fn sine_mix_declares_gradient_bound() {
        let f = catalog_lookup("sine_mix", &params(&[("alpha", 0.6), ("beta", 0.8)])).unwrap();
        assert!((f.declared_l().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn power_law_matches_norm_power() {
        let f = catalog_lookup("power_law", &params(&[("epsilon", 1.0)])).unwrap();
        assert_eq!(f.evaluate(&[3.0], &[4.0]), vec![25.0]);
        assert!(f.not_globally_lipschitz());
    }

    #[test]
    fn catalog_rejects_unknown_names_and_bad_params() {
        assert!(matches!(
            catalog_lookup("spring", &params(&[])),
            Err(PlantError::UnknownPlant(_))
        ));
        assert!(matches!(
            catalog_lookup("power_law", &params(&[("epsilon", -0.5)])),
            Err(PlantError::BadParams { .. })
        ));
        assert!(matches!(
            catalog_lookup("sine_mix", &params(&[("gamma", 1.0)])),
            Err(PlantError::BadParams { .. })
        ));
        assert!(matches!(
            catalog_lookup("linear", &params(&[("a13", 1.0)])),
            Err(PlantError::BadParams { .. })
        ));
    }

    #[test]
    fn linear_plant_uses_operator_norm() {
        let f = catalog_lookup("linear", &params(&[("a11", 3.0), ("a12", 4.0)])).unwrap();
        assert!((f.declared_l().unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(f.evaluate(&[1.0], &[1.0]), vec![7.0]);

        let g = catalog_lookup("linear", &params(&[("n", 2.0), ("a1_4", 2.0), ("a2_1", -1.0)])).unwrap();
        assert_eq!(g.dim(), 2);
        assert_eq!(g.evaluate(&[1.0, 0.0], &[0.0, 3.0]), vec![6.0, -1.0]);
        assert!((g.declared_l().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pendulum_and_spring_evaluate() {
        let p = catalog_lookup("pendulum", &params(&[("g", 2.0), ("l", 2.0), ("c", 0.5)])).unwrap();
        let v = p.evaluate(&[std::f64::consts::FRAC_PI_2], &[2.0])[0];
        assert!((v - (-1.0 - 1.0)).abs() < 1e-15);
        let s = catalog_lookup("damped_spring", &params(&[("k", 3.0), ("c", 4.0)])).unwrap();
        assert_eq!(s.evaluate(&[1.0], &[1.0]), vec![-7.0]);
        assert!((s.declared_l().unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn estimator_examples() {
        let zero = PlantFunction::zero(1);
        assert_eq!(estimate_lipschitz(&zero, 10.0, 1000, 0).sampled_max, 0.0);

        let lin = catalog_lookup("linear", &params(&[("a11", 0.0), ("a12", 0.5)])).unwrap();
        let est = estimate_lipschitz(&lin, 10.0, 5000, 0).sampled_max;
        assert!((0.49..=0.5 * (1.0 + 1e-12)).contains(&est), "{est}");

        let pow = PlantFunction::power_law(1.0);
        assert!(estimate_lipschitz(&pow, 10.0, 5000, 0).sampled_max > 10.0);
    }

    #[test]
    fn estimator_is_deterministic_per_seed() {
        let f = PlantFunction::sine_mix(0.3, -0.9);
        let a = estimate_lipschitz(&f, 5.0, 500, 42);
        let b = estimate_lipschitz(&f, 5.0, 500, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn shifted_sine_matches_direct_substitution() {
        let f = PlantFunction::sine_mix(1.0, 0.0);
        let ystar = std::f64::consts::FRAC_PI_2;
        let g = shift_nonlinearity(&f, &[ystar]);
        assert_eq!(g.evaluate(&[0.0], &[0.0]), vec![0.0]);
        let y1 = 0.37;
        assert!((g.evaluate(&[y1], &[1.3])[0] - ((y1 + ystar).sin() - 1.0)).abs() < 1e-15);
        assert_eq!(g.declared_l(), f.declared_l());
    }

    #[test]
    fn shifted_zero_plant_is_zero() {
        let g = shift_nonlinearity(&PlantFunction::zero(2), &[1.0, -4.0]);
        assert_eq!(g.evaluate(&[0.3, 0.1], &[5.0, 6.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn third_order_feedthrough() {
        let f = ThirdOrderPlantFunction::feedthrough(-0.5);
        assert_eq!(f.evaluate(&[1.0, 2.0, 4.0]), -2.0);
        assert_eq!(f.declared_l(), Some(0.5));
    }
}
