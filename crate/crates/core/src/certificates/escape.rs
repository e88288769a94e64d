//! Invariant cone and escape-time bounds for the superlinear loop.
//!
//! `C_L = {y : y₂ − 1 ≥ y₁ ≥ y₀ + L ≥ L}` has vertex `(0, L, L + 1)`. Once the
//! acceleration dominates `y₂ + y₂^{1+ε}/2` on the cone, trajectories from the
//! vertex stay inside it and `y₂` outruns the comparison solution of
//! `ẏ = y^{1+ε}/2`, which escapes at `2/(ε(L+1)^ε)`.

use serde::{Deserialize, Serialize};

use super::CertificateError;
use crate::closed_loop::SuperlinearLoop;
use crate::gain_design::PidGains;

const FACET_RTOL: f64 = 1e-12;
const CONE_SAMPLES: usize = 10_000;
/// Cone samples reach `L·10^6` past the vertex along each edge direction.
const CONE_SAMPLE_DECADES: f64 = 6.0;
const MAX_CONE_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Facet {
    S1,
    S2,
    S3,
}

impl Facet {
    /// Inward normal.
    pub fn normal(self) -> [f64; 3] {
        match self {
            Facet::S1 => [1.0, 0.0, 0.0],
            Facet::S2 => [-1.0, 1.0, 0.0],
            Facet::S3 => [0.0, -1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCL {
    l_cone: f64,
}

impl ConeCL {
    pub fn new(l_cone: f64) -> Result<Self, CertificateError> {
        if !(l_cone > 0.0) || !l_cone.is_finite() {
            return Err(CertificateError::InvalidConeParameter(l_cone));
        }
        Ok(Self { l_cone })
    }

    pub fn l_cone(&self) -> f64 {
        self.l_cone
    }

    pub fn vertex(&self) -> [f64; 3] {
        [0.0, self.l_cone, self.l_cone + 1.0]
    }

    /// Slacks of the three defining inequalities (`y₀`, `y₁ − y₀ − L`, `y₂ − 1 − y₁`).
    pub fn slacks(&self, y: &[f64; 3]) -> [f64; 3] {
        [y[0], y[1] - y[0] - self.l_cone, y[2] - 1.0 - y[1]]
    }
}

/// Exact membership test.
pub fn cone_contains(cone: &ConeCL, y: &[f64; 3]) -> bool {
    let l = cone.l_cone;
    y[2] - 1.0 >= y[1] && y[1] >= y[0] + l && y[0] + l >= l
}

/// Inward flux `v·F(y)` of the superlinear field through `facet` at `y`.
pub fn cone_facet_flux(
    lp: &SuperlinearLoop,
    cone: &ConeCL,
    y: &[f64; 3],
    facet: Facet,
) -> Result<f64, CertificateError> {
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tol = FACET_RTOL * scale;
    let s = cone.slacks(y);
    let idx = match facet {
        Facet::S1 => 0,
        Facet::S2 => 1,
        Facet::S3 => 2,
    };
    let on_facet = s[idx].abs() <= tol && s.iter().all(|v| *v >= -tol);
    if !on_facet {
        return Err(CertificateError::NotOnFacet { facet, point: *y });
    }
    let d = lp.derivative(y);
    let v = facet.normal();
    Ok(v[0] * d[0] + v[1] * d[1] + v[2] * d[2])
}

/// Margins of the two growth inequalities at `y`:
/// `F(y) − y₂ − y₂^{1+ε}/2` (lower) and `(3y₂²)^{(1+ε)/2} − F(y)` (upper),
/// where `F` is the acceleration of the superlinear loop.
pub fn growth_margins(lp: &SuperlinearLoop, y: &[f64; 3]) -> (f64, f64) {
    let eps = lp.epsilon();
    let f = lp.acceleration(y);
    let lower = f - y[2] - 0.5 * y[2].powf(1.0 + eps);
    let upper = (3.0 * y[2] * y[2]).powf(0.5 * (1.0 + eps)) - f;
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeChoice {
    pub l_cone: f64,
    pub seed: f64,
    pub doublings: usize,
    pub samples_per_candidate: usize,
    /// Smallest sampled margins of the lower and upper growth inequalities at `l_cone`.
    pub min_lower_margin: f64,
    pub min_upper_margin: f64,
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Deterministic points of `C_L`: the vertex, points along each edge, and a
/// Halton cloud. Offsets past the vertex are spread log-uniformly up to
/// `L·10^6`.
pub fn cone_sample_points(cone: &ConeCL, count: usize) -> Vec<[f64; 3]> {
    let l = cone.l_cone;
    let offset = |u: f64| l * (10f64.powf(CONE_SAMPLE_DECADES * u) - 1.0);
    let point = |s0: f64, s1: f64, s2: f64| {
        let y0 = s0;
        let y1 = y0 + l + s1;
        let mut y2 = y1 + 1.0 + s2;
        while y2 - 1.0 < y1 {
            y2 = y2.next_up();
        }
        [y0, y1, y2]
    };
    let mut pts = vec![cone.vertex()];
    let edge = 64;
    for k in 1..=edge {
        let s = offset(k as f64 / edge as f64);
        pts.push(point(s, 0.0, 0.0));
        pts.push(point(0.0, s, 0.0));
        pts.push(point(0.0, 0.0, s));
    }
    for i in 1..=count {
        pts.push(point(
            offset(radical_inverse(i, 2)),
            offset(radical_inverse(i, 3)),
            offset(radical_inverse(i, 5)),
        ));
    }
    pts
}

fn sampled_margins(gains: PidGains, epsilon: f64, setpoint: f64, l_cone: f64) -> Result<(f64, f64), CertificateError> {
    let cone = ConeCL::new(l_cone)?;
    let lp = SuperlinearLoop::new(epsilon, gains, setpoint).map_err(|_| CertificateError::NonPositiveEpsilon(epsilon))?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::INFINITY;
    for y in cone_sample_points(&cone, CONE_SAMPLES) {
        let (a, b) = growth_margins(&lp, &y);
        lo = lo.min(a);
        hi = hi.min(b);
    }
    Ok((lo, hi))
}

/// Smallest doubling of the analytic seed on which both growth inequalities
/// hold at every cone sample. The seed is rounded up to an integer so the
/// vertex `(0, L, L + 1)` is exactly representable.
pub fn pick_cone_parameter(gains: PidGains, epsilon: f64, setpoint: f64) -> Result<ConeChoice, CertificateError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(CertificateError::NonPositiveEpsilon(epsilon));
    }
    let sum = gains.abs_sum();
    let seed = ((2.0 * (sum + 1.0)).powf(1.0 / epsilon) - 1.0)
        .max(2.0 * setpoint.abs())
        .max(1.0);
    let mut l_cone = seed.ceil();
    for doublings in 0..MAX_CONE_DOUBLINGS {
        let (lo, hi) = sampled_margins(gains, epsilon, setpoint, l_cone)?;
        if lo >= 0.0 && hi >= 0.0 {
            return Ok(ConeChoice {
                l_cone,
                seed,
                doublings,
                samples_per_candidate: CONE_SAMPLES,
                min_lower_margin: lo,
                min_upper_margin: hi,
            });
        }
        l_cone *= 2.0;
    }
    Err(CertificateError::ConeSearchExhausted(MAX_CONE_DOUBLINGS))
}

/// Upper bound `2/(ε(L+1)^ε)` on the escape time from the vertex.
pub fn escape_time_bound(epsilon: f64, l_cone: f64) -> f64 {
    2.0 / (epsilon * (l_cone + 1.0).powf(epsilon))
}

/// Comparison envelope `((L+1)^{−ε} − tε/2)^{−1/ε}` below `y₂(t)`.
pub fn comparison_lower_bound(epsilon: f64, l_cone: f64, t: f64) -> Result<f64, CertificateError> {
    if !(epsilon > 0.0) {
        return Err(CertificateError::NonPositiveEpsilon(epsilon));
    }
    let bound = escape_time_bound(epsilon, l_cone);
    if t >= bound {
        return Err(CertificateError::BeyondBound { t, bound });
    }
    Ok(((l_cone + 1.0).powf(-epsilon) - 0.5 * t * epsilon).powf(-1.0 / epsilon))
}

/// `e(t) ≥ L + (L+1)t`, from `ė = y₂ ≥ L + 1` inside the cone.
pub fn linear_error_bound(l_cone: f64, t: f64) -> f64 {
    l_cone + (l_cone + 1.0) * t
}

/// The constant in `dy₁/dy₂ ≥ c_ε / y₂^ε` implied by the upper growth inequality.
pub fn divergence_constant(epsilon: f64) -> f64 {
    3f64.powf(-0.5 * (1.0 + epsilon))
}
