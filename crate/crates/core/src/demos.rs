//! End-to-end runs that tie the pieces together: randomized regulation
//! trials with Lyapunov monitoring, the finite-escape run from the cone
//! vertex, and the divergent third-order run. The command-line tool and the
//! acceptance suite both drive these.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::certificates::{
    comparison_lower_bound, cone_contains, divergence_constant, escape_time_bound, exponential_rate_fit,
    linear_error_bound, lyapunov_derivative_along, lyapunov_value, modal_state, pick_cone_parameter,
    select_c_lemma_a, select_c_reduced, spectral_report, spectral_report_reduced, vdot_margin, CertificateError,
    CoefficientChoice, ConeCL, ConeChoice, DivergentStart, ModalTransform, SpectralReport,
};
use crate::closed_loop::{error_coordinates, initial_state_from_physical, LoopError, SecondOrderLoop, SuperlinearLoop, ThirdOrderLoop};
use crate::gain_design::{
    corollary_gains, corollary_triple, in_omega_k, DesignError, EigenTriple, LipschitzBound, PidGains,
};
use crate::integrator::{
    integrate_toward, integrate_until, norm, IntegratorConfig, IntegratorError, Outcome, Trajectory, VectorField,
};
use crate::plants::{operator_norm, PlantFunction};

/// Slack on the Lyapunov checks, relative to `V(Z(0))` and `‖Z‖²`.
pub const LYAPUNOV_RTOL: f64 = 1e-6;
/// Relative slack on the sampled escape-envelope comparisons.
pub const ENVELOPE_RTOL: f64 = 1e-12;
/// `|e|` above which the third-order run counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
/// State norm up to which numeric and closed-form solutions are compared.
pub const CLOSED_FORM_WINDOW: f64 = 1e8;
pub const CLOSED_FORM_RTOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Loop(#[from] LoopError),
    #[error("{0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Second-order simulation

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovTrace {
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Largest `V(tₖ₊₁) − V(tₖ)` over consecutive samples, divided by `V(Z(0))`.
    pub max_relative_increase: f64,
    /// Largest `(V̇ − margin·‖Z‖²)/‖Z‖²` over samples with `Z ≠ 0`.
    pub max_bound_excess: f64,
    pub margin: f64,
}

impl LyapunovTrace {
    pub fn monotone(&self) -> bool {
        self.max_relative_increase <= LYAPUNOV_RTOL
    }

    pub fn bound_holds(&self) -> bool {
        self.max_bound_excess <= LYAPUNOV_RTOL
    }
}

/// `V(Z(t))` and `V̇` on every recorded sample.
pub fn lyapunov_trace(
    lp: &SecondOrderLoop,
    lam: &EigenTriple,
    l: LipschitzBound,
    traj: &Trajectory,
) -> Result<LyapunovTrace, CertificateError> {
    let transform = ModalTransform::new(*lam, lp.dim())?;
    let margin = vdot_margin(lam, l)?;
    let mut values = Vec::with_capacity(traj.len());
    let mut derivatives = Vec::with_capacity(traj.len());
    let mut max_bound_excess = f64::NEG_INFINITY;
    for s in &traj.states {
        let z = modal_state(lp, &transform, s)?;
        let z2: f64 = z.iter().map(|v| v * v).sum();
        let vdot = lyapunov_derivative_along(lp, &transform, s)?;
        if z2 > 0.0 {
            max_bound_excess = max_bound_excess.max((vdot - margin * z2) / z2);
        }
        values.push(lyapunov_value(&z, lam));
        derivatives.push(vdot);
    }
    let v0 = values[0];
    let max_increase = values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    let max_relative_increase = if v0 > 0.0 {
        max_increase / v0
    } else if max_increase > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(LyapunovTrace {
        values,
        derivatives,
        max_relative_increase,
        max_bound_excess,
        margin,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationRun {
    pub trajectory: Trajectory,
    pub equilibrium: Option<Vec<f64>>,
    /// `‖x₁ − y*‖` at the last sample.
    pub final_error_norm: f64,
    pub initial_error_norm: f64,
    pub rate: Option<f64>,
}

/// Integrate the loop from `(0, x₁(0), x₂(0))`; convergence is measured
/// against the equilibrium when the integral gain is nonzero.
pub fn simulate_second_order(
    lp: &SecondOrderLoop,
    x1: &[f64],
    x2: &[f64],
    cfg: &IntegratorConfig,
) -> Result<SimulationRun, DemoError> {
    let n = lp.dim();
    if x1.len() != n || x2.len() != n {
        return Err(DemoError::Invalid(format!("initial position and velocity must have dimension {n}")));
    }
    let y0 = initial_state_from_physical(x1, x2, lp.setpoint());
    let equilibrium = lp.equilibrium();
    let reference = equilibrium.clone().unwrap_or_else(|| vec![0.0; 3 * n]);
    let trajectory = integrate_toward(lp, &y0, &reference, cfg)?;
    let error_norm = |s: &[f64]| {
        let e = error_coordinates(s, lp.setpoint());
        norm(&e[n..2 * n])
    };
    let rate = equilibrium
        .as_ref()
        .and_then(|eq| exponential_rate_fit(&trajectory, eq).ok());
    Ok(SimulationRun {
        final_error_norm: error_norm(trajectory.final_state()),
        initial_error_norm: error_norm(&y0),
        equilibrium,
        rate,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Randomized regulation trials

#[derive(Debug, Clone, Serialize)]
pub struct TrialSpec {
    pub index: usize,
    pub dim: usize,
    /// Row-major `n × 2n` linear part.
    pub linear: Vec<f64>,
    /// Per-component `α sin x₁ + β cos x₂ + b`.
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub offset: Vec<f64>,
    pub declared_l: f64,
    pub setpoint: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl TrialSpec {
    pub fn plant(&self) -> PlantFunction {
        let n = self.dim;
        let a = DMatrix::from_row_slice(n, 2 * n, &self.linear);
        let (alpha, beta, offset) = (self.alpha.clone(), self.beta.clone(), self.offset.clone());
        PlantFunction::new(n, "random_lipschitz", Some(self.declared_l), move |x, v, out| {
            for i in 0..n {
                let mut acc = offset[i] + alpha[i] * x[i].sin() + beta[i] * v[i].cos();
                for j in 0..n {
                    acc += a[(i, j)] * x[j] + a[(i, n + j)] * v[j];
                }
                out[i] = acc;
            }
        })
    }
}

/// Random plants with declared Lipschitz constant at most `l`: a linear part
/// of random sign structure plus per-component sine/cosine terms and a
/// constant offset. Setpoints are drawn from `[−setpoint_range, setpoint_range]ⁿ`
/// and initial positions and velocities from `[−initial_range, initial_range]ⁿ`.
pub fn draw_trials(l: f64, n: usize, trials: usize, seed: u64, setpoint_range: f64, initial_range: f64) -> Vec<TrialSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sym = |rng: &mut ChaCha8Rng, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    (0..trials)
        .map(|index| {
            let budget = l * rng.random_range(0.5..=1.0);
            let split: f64 = rng.random_range(0.0..=1.0);
            let raw: Vec<f64> = (0..2 * n * n).map(|_| sym(&mut rng, 1.0)).collect();
            let raw_norm = operator_norm(&DMatrix::from_row_slice(n, 2 * n, &raw));
            let lin_scale = if raw_norm > 0.0 { split * budget / raw_norm } else { 0.0 };
            let linear: Vec<f64> = raw.iter().map(|v| v * lin_scale).collect();
            let sine_budget = (1.0 - split) * budget;
            let mut alpha = Vec::with_capacity(n);
            let mut beta = Vec::with_capacity(n);
            for _ in 0..n {
                let r = sine_budget * rng.random_range(0.0..=1.0);
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                alpha.push(r * theta.cos());
                beta.push(r * theta.sin());
            }
            let offset: Vec<f64> = (0..n).map(|_| sym(&mut rng, 5.0)).collect();
            let sine_l = alpha.iter().zip(&beta).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
            let declared_l = (operator_norm(&DMatrix::from_row_slice(n, 2 * n, &linear)) + sine_l).min(l);
            let setpoint = (0..n).map(|_| sym(&mut rng, setpoint_range)).collect();
            let x1 = (0..n).map(|_| sym(&mut rng, initial_range)).collect();
            let x2 = (0..n).map(|_| sym(&mut rng, initial_range)).collect();
            TrialSpec {
                index,
                dim: n,
                linear,
                alpha,
                beta,
                offset,
                declared_l,
                setpoint,
                x1,
                x2,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub index: usize,
    pub declared_l: f64,
    pub outcome: Outcome,
    pub final_error_norm: f64,
    pub final_time: f64,
    pub rate: Option<f64>,
    pub lyapunov_max_relative_increase: Option<f64>,
    pub lyapunov_max_bound_excess: Option<f64>,
    pub samples: usize,
}

impl TrialResult {
    pub fn regulated(&self, error_tol: f64) -> bool {
        self.outcome.is_converged() && self.final_error_norm < error_tol
    }

    pub fn rate_negative(&self) -> bool {
        self.rate.is_some_and(|r| r < 0.0)
    }

    pub fn lyapunov_ok(&self) -> bool {
        self.lyapunov_max_relative_increase.is_some_and(|v| v <= LYAPUNOV_RTOL)
            && self.lyapunov_max_bound_excess.is_some_and(|v| v <= LYAPUNOV_RTOL)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialConfig {
    pub l: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub a: f64,
    pub setpoint_range: f64,
    pub initial_range: f64,
    /// Gains to test instead of the two-parameter design family.
    pub gains: Option<PidGains>,
    pub integrator: IntegratorConfig,
    /// Final `|e|` a converged run must reach.
    pub error_tol: f64,
}

impl TrialConfig {
    pub fn new(l: f64, n: usize, trials: usize, seed: u64) -> Self {
        Self {
            l,
            n,
            trials,
            seed,
            epsilon: 0.1,
            a: default_design_a(l),
            setpoint_range: 10.0,
            initial_range: 50.0,
            gains: None,
            integrator: IntegratorConfig {
                t_max: 400.0,
                ..Default::default()
            },
            error_tol: 1e-6,
        }
    }
}

/// `a = max(5L, 5)·1.02`, just inside the admissible range of the design family.
pub fn default_design_a(l: f64) -> f64 {
    (5.0 * l).max(5.0) * 1.02
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialSummary {
    pub gains: PidGains,
    /// Eigenvalue labelling used for the certificate, when the gains lie in `Ω_K`.
    pub lam: Option<EigenTriple>,
    pub in_region: bool,
    pub margin: Option<f64>,
    pub trials: Vec<TrialResult>,
    pub all_regulated: bool,
    pub all_rates_negative: bool,
    pub all_lyapunov_ok: bool,
}

impl TrialSummary {
    pub fn pass(&self) -> bool {
        self.in_region && self.all_regulated && self.all_rates_negative && self.all_lyapunov_ok
    }
}

pub fn run_trial(
    spec: &TrialSpec,
    gains: PidGains,
    lam: Option<&EigenTriple>,
    l: LipschitzBound,
    cfg: &IntegratorConfig,
) -> Result<TrialResult, DemoError> {
    let lp = SecondOrderLoop::new(spec.plant(), gains, spec.setpoint.clone())?;
    let run = simulate_second_order(&lp, &spec.x1, &spec.x2, cfg)?;
    let trace = match lam {
        Some(lam) if gains.ki != 0.0 => Some(lyapunov_trace(&lp, lam, l, &run.trajectory)?),
        _ => None,
    };
    Ok(TrialResult {
        index: spec.index,
        declared_l: spec.declared_l,
        outcome: run.trajectory.outcome,
        final_error_norm: run.final_error_norm,
        final_time: run.trajectory.final_time(),
        rate: run.rate,
        lyapunov_max_relative_increase: trace.as_ref().map(|t| t.max_relative_increase),
        lyapunov_max_bound_excess: trace.as_ref().map(|t| t.max_bound_excess),
        samples: run.trajectory.len(),
    })
}

/// Design gains for `L` (or take the supplied ones), then regulate every
/// random plant and monitor the Lyapunov function along each trajectory.
pub fn run_regulation_trials(cfg: &TrialConfig) -> Result<TrialSummary, DemoError> {
    if cfg.n == 0 || cfg.trials == 0 {
        return Err(DemoError::Invalid("dimension and trial count must be positive".into()));
    }
    let l = LipschitzBound::new(cfg.l)?;
    let (gains, lam, in_region) = match cfg.gains {
        None => {
            let gains = corollary_gains(cfg.epsilon, cfg.a, l)?;
            let lam = corollary_triple(cfg.epsilon, cfg.a);
            let member = in_omega_k(&gains, l).member;
            (gains, member.then_some(lam), member)
        }
        Some(gains) => {
            let report = in_omega_k(&gains, l);
            (gains, report.lambda.filter(|_| report.member), report.member)
        }
    };
    let margin = match &lam {
        Some(lam) => Some(vdot_margin(lam, l)?),
        None => None,
    };
    let specs = draw_trials(cfg.l, cfg.n, cfg.trials, cfg.seed, cfg.setpoint_range, cfg.initial_range);
    let results: Vec<Result<TrialResult, DemoError>> = specs
        .par_iter()
        .map(|spec| run_trial(spec, gains, lam.as_ref(), l, &cfg.integrator))
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TrialSummary {
        all_regulated: trials.iter().all(|t| t.regulated(cfg.error_tol)),
        all_rates_negative: trials.iter().all(TrialResult::rate_negative),
        all_lyapunov_ok: trials.iter().all(TrialResult::lyapunov_ok),
        gains,
        lam,
        in_region,
        margin,
        trials,
    })
}

// ---------------------------------------------------------------------------
// Finite escape of the superlinear loop

#[derive(Debug, Clone, Serialize)]
pub struct EscapeDemo {
    pub epsilon: f64,
    pub gains: PidGains,
    pub setpoint: f64,
    pub cone: ConeChoice,
    pub escape_time_bound: f64,
    pub outcome: Outcome,
    pub samples: usize,
    pub escaped: bool,
    pub samples_in_cone: bool,
    pub escape_within_bound: bool,
    pub linear_bound_holds: bool,
    pub envelope_holds: bool,
    /// Smallest `(dy₁/dy₂)·y₂^ε` over the samples, against the constant `c_ε`.
    pub min_slope_ratio: f64,
    pub divergence_constant: f64,
    pub trajectory: Trajectory,
}

impl EscapeDemo {
    pub fn pass(&self) -> bool {
        self.escaped && self.samples_in_cone && self.escape_within_bound && self.linear_bound_holds && self.envelope_holds
    }
}

/// Start the superlinear loop at the cone vertex and follow it to escape.
pub fn escape_demo(epsilon: f64, gains: PidGains, setpoint: f64) -> Result<EscapeDemo, DemoError> {
    let lp = SuperlinearLoop::new(epsilon, gains, setpoint)?;
    let cone_choice = pick_cone_parameter(gains, epsilon, setpoint)?;
    let l = cone_choice.l_cone;
    let cone = ConeCL::new(l)?;
    let bound = escape_time_bound(epsilon, l);

    // The vertex (0, L, L+1) is the physical start x₁ = L + y*, x₂ = L + 1.
    let y0 = cone.vertex().to_vec();
    let cfg = IntegratorConfig {
        t_max: 2.0 * bound,
        step: 1e-3 * bound,
        ..Default::default()
    };
    let traj = integrate_until(&lp, &y0, &cfg, |_, _| false)?;

    let upper = match traj.outcome {
        Outcome::FiniteEscape { upper, .. } => Some(upper),
        _ => None,
    };
    let mut in_cone = true;
    let mut linear_ok = true;
    let mut envelope_ok = true;
    let mut min_slope_ratio = f64::INFINITY;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let y = [s[0], s[1], s[2]];
        in_cone &= cone_contains(&cone, &y);
        linear_ok &= y[1] >= linear_error_bound(l, *t) * (1.0 - ENVELOPE_RTOL);
        match comparison_lower_bound(epsilon, l, *t) {
            Ok(env) => envelope_ok &= y[2] >= env * (1.0 - ENVELOPE_RTOL),
            Err(_) => envelope_ok = false,
        }
        min_slope_ratio = min_slope_ratio.min(y[2] / lp.acceleration(&y) * y[2].powf(epsilon));
    }
    Ok(EscapeDemo {
        epsilon,
        gains,
        setpoint,
        cone: cone_choice,
        escape_time_bound: bound,
        outcome: traj.outcome,
        samples: traj.len(),
        escaped: upper.is_some(),
        samples_in_cone: in_cone,
        escape_within_bound: upper.is_some_and(|u| u <= bound),
        linear_bound_holds: linear_ok,
        envelope_holds: envelope_ok,
        min_slope_ratio,
        divergence_constant: divergence_constant(epsilon),
        trajectory: traj,
    })
}

// ---------------------------------------------------------------------------
// Divergence of the third-order loop

#[derive(Debug, Clone, Serialize)]
pub struct ThirdOrderDemo {
    pub gains: PidGains,
    pub l: f64,
    pub reduced: bool,
    pub choice: CoefficientChoice,
    pub spectral: SpectralReport,
    pub start: DivergentStart,
    /// Whether the two rightmost modes combine into a real starting point.
    pub real_start: bool,
    /// Real starting point actually reported on (`Re y(0) + Im y(0)` when complex).
    pub reported_start: Vec<f64>,
    pub outcome: Outcome,
    pub t_threshold: Option<f64>,
    pub compared_samples: usize,
    pub max_closed_form_error: f64,
    pub trace_error: f64,
    pub trajectory_samples: usize,
}

impl ThirdOrderDemo {
    pub fn diverged(&self) -> bool {
        self.t_threshold.is_some()
    }

    pub fn closed_form_agrees(&self) -> bool {
        self.compared_samples > 0 && self.max_closed_form_error <= CLOSED_FORM_RTOL
    }

    pub fn spectrum_ok(&self) -> bool {
        self.spectral.distinct && self.spectral.max_real_part > 0.0 && self.trace_error <= 1e-9
    }

    /// Full loop only: every point of `R` stays off the spectrum.
    pub fn clear_of_multiple_root_set(&self) -> bool {
        self.reduced || self.choice.min_residual_over_r > crate::certificates::MULTIPLE_ROOT_RTOL
    }

    pub fn pass(&self) -> bool {
        self.diverged() && self.closed_form_agrees() && self.spectrum_ok() && self.clear_of_multiple_root_set()
    }
}

struct Stacked<'a> {
    inner: &'a ThirdOrderLoop,
    d: usize,
}

impl VectorField for Stacked<'_> {
    fn eval(&self, state: &[f64], deriv: &mut [f64]) {
        let (re, im) = state.split_at(self.d);
        let (dre, dim) = deriv.split_at_mut(self.d);
        self.inner.eval(re, dre);
        self.inner.eval(im, dim);
    }
}

/// Pick `c ∈ (0, L]` with distinct loop roots, start on the two rightmost
/// modes, and integrate the real and imaginary parts side by side until the
/// reported error exceeds the divergence threshold.
pub fn third_order_demo(gains: PidGains, l: f64) -> Result<ThirdOrderDemo, DemoError> {
    let reduced = gains.ki == 0.0;
    let choice = if reduced {
        select_c_reduced(gains, l)?
    } else {
        select_c_lemma_a(gains, l)?
    };
    let c = choice.c;
    let (lp, spectral) = if reduced {
        (ThirdOrderLoop::reduced(gains, c), spectral_report_reduced(gains, c))
    } else {
        (ThirdOrderLoop::new(gains, c), spectral_report(gains, c))
    };
    let start = DivergentStart::new(gains, c, reduced);
    let d = lp.state_dim();
    let idx = start.error_index();

    let mut y0: Vec<f64> = start.y0.iter().map(|v| v.re).collect();
    y0.extend(start.y0.iter().map(|v| v.im));
    let field = Stacked { inner: &lp, d };
    let growth = spectral.max_real_part.max(1e-3);
    let cfg = IntegratorConfig {
        t_max: 10.0 + 100.0 / growth,
        rel_tol: 1e-12,
        abs_tol: 1e-15,
        step: 1e-4,
        blowup_norm: 1e300,
        converge_norm: 1e-300,
        ..Default::default()
    };
    let traj = integrate_until(&field, &y0, &cfg, |_, s| (s[idx] + s[d + idx]).abs() > DIVERGENCE_THRESHOLD)?;

    let mut compared = 0;
    let mut max_err: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if norm(s) > CLOSED_FORM_WINDOW {
            continue;
        }
        let numeric = num_complex::Complex64::new(s[idx], s[d + idx]);
        let exact = start.closed_form_error(*t);
        max_err = max_err.max((numeric - exact).norm() / start.closed_form_scale(*t));
        compared += 1;
    }
    let t_threshold = match traj.outcome {
        Outcome::Diverged { t_threshold } => Some(t_threshold),
        _ => None,
    };
    Ok(ThirdOrderDemo {
        gains,
        l,
        reduced,
        real_start: start.is_real(),
        reported_start: start.real_combination(),
        trace_error: (spectral.real_part_sum - c).abs(),
        choice,
        spectral,
        start,
        outcome: traj.outcome,
        t_threshold,
        compared_samples: compared,
        max_closed_form_error: max_err,
        trajectory_samples: traj.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_respect_lipschitz_budget() {
        for spec in draw_trials(1.0, 2, 20, 3, 10.0, 50.0) {
            assert!(spec.declared_l <= 1.0);
            let f = spec.plant();
            let est = crate::plants::estimate_lipschitz(&f, 20.0, 400, 1);
            assert!(est.sampled_max <= spec.declared_l * (1.0 + 1e-9) + 1e-12, "{} > {}", est.sampled_max, spec.declared_l);
            assert!(spec.setpoint.iter().all(|v| v.abs() <= 10.0));
            assert!(spec.x1.iter().chain(&spec.x2).all(|v| v.abs() <= 50.0));
        }
    }

    #[test]
    fn trial_draws_are_deterministic() {
        let a = draw_trials(1.0, 1, 5, 42, 10.0, 50.0);
        let b = draw_trials(1.0, 1, 5, 42, 10.0, 50.0);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn small_trial_batch_passes() {
        let mut cfg = TrialConfig::new(1.0, 1, 4, 0);
        cfg.a = 10.0;
        let s = run_regulation_trials(&cfg).unwrap();
        assert!(s.pass(), "{:#?}", s.trials);
    }

    #[test]
    fn escape_demo_unit_gain() {
        let d = escape_demo(1.0, PidGains { kp: -1.0, ki: -1.0, kd: -1.0 }, 0.0).unwrap();
        assert!(d.pass(), "{d:#?}");
        assert!(d.min_slope_ratio >= d.divergence_constant);
    }

    #[test]
    fn third_order_demo_examples() {
        let d = third_order_demo(PidGains { kp: -11.0, ki: -6.0, kd: -6.0 }, 1.0).unwrap();
        assert!(d.pass(), "{d:#?}");
        let d = third_order_demo(PidGains { kp: -2.0, ki: 0.0, kd: -3.0 }, 1.0).unwrap();
        assert!(d.reduced);
        assert!(d.pass(), "{d:#?}");
    }
}
