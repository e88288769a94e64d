//! Explicit Runge–Kutta integration with convergence and blow-up detection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Autonomous vector field `ẏ = F(y)`.
pub trait VectorField {
    fn eval(&self, state: &[f64], deriv: &mut [f64]);
}

impl<F> VectorField for F
where
    F: Fn(&[f64], &mut [f64]),
{
    fn eval(&self, state: &[f64], deriv: &mut [f64]) {
        self(state, deriv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for RK4, initial step for the adaptive method.
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub blowup_norm: f64,
    pub converge_norm: f64,
    pub converge_window: f64,
    /// Record every `record_stride`-th accepted step (the first and last are always kept).
    pub record_stride: usize,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive,
            step: 1e-3,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            t_max: 100.0,
            blowup_norm: 1e12,
            converge_norm: 1e-9,
            converge_window: 1.0,
            record_stride: 1,
            max_steps: 20_000_000,
        }
    }
}

/// Relative width below which an escape bracket counts as refined.
pub const ESCAPE_BRACKET_RTOL: f64 = 1e-6;
/// Smallest step relative to `t_max` before the stiffness diagnostic trips.
pub const STEP_FLOOR_RATIO: f64 = 1e-14;

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let positive = [
            ("step", self.step),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("t_max", self.t_max),
            ("blowup_norm", self.blowup_norm),
            ("converge_norm", self.converge_norm),
            ("converge_window", self.converge_window),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(IntegratorError::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.blowup_norm <= self.converge_norm {
            return Err(IntegratorError::InvalidConfig(
                "blowup_norm must exceed converge_norm".into(),
            ));
        }
        if self.record_stride == 0 {
            return Err(IntegratorError::InvalidConfig("record_stride must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(IntegratorError::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    fn step_floor(&self) -> f64 {
        STEP_FLOOR_RATIO * self.t_max
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("initial state is not finite")]
    NonFiniteInitial,
    #[error("vector field returned a non-finite derivative at t = {t} for state {state:?}")]
    NonFiniteDerivative { t: f64, state: Vec<f64> },
    #[error("reference has dimension {got}, state has dimension {expected}")]
    ReferenceDimension { expected: usize, got: usize },
    #[error("step budget of {0} steps exhausted before t_max")]
    StepBudgetExhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Converged { final_error: f64 },
    /// The state norm crossed the blow-up threshold between `lower` and `upper`.
    FiniteEscape { t_escape: f64, lower: f64, upper: f64 },
    MaxTimeReached { final_error: f64 },
    /// A caller-supplied stop condition fired first.
    Diverged { t_threshold: f64 },
}

impl Outcome {
    pub fn is_converged(&self) -> bool {
        matches!(self, Outcome::Converged { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Converged { .. } => "Converged",
            Outcome::FiniteEscape { .. } => "FiniteEscape",
            Outcome::MaxTimeReached { .. } => "MaxTimeReached",
            Outcome::Diverged { .. } => "Diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub outcome: Outcome,
    pub stiffness_suspected: bool,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always holds the initial time")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: Option<&[f64]>) -> f64 {
    match b {
        Some(b) => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        None => norm(a),
    }
}

/// Integrate from `t = 0`; convergence is measured on the raw state norm.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    run(field, y0, None, cfg, None)
}

/// Integrate with convergence measured as the distance to `reference`.
pub fn integrate_toward<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    reference: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegratorError> {
    run(field, y0, Some(reference), cfg, None)
}

/// Integrate until `stop(t, y)` holds on an accepted step (reported as
/// `Diverged`), the state blows up, or `t_max` is reached. Convergence is not
/// tested.
pub fn integrate_until<F, S>(
    field: &F,
    y0: &[f64],
    cfg: &IntegratorConfig,
    stop: S,
) -> Result<Trajectory, IntegratorError>
where
    F: VectorField + ?Sized,
    S: Fn(f64, &[f64]) -> bool,
{
    run(field, y0, None, cfg, Some(&stop))
}

pub struct BatchItem<F> {
    pub field: F,
    pub initial: Vec<f64>,
    pub reference: Option<Vec<f64>>,
}

/// Element-wise integration; results come back in input order.
pub fn integrate_batch<F>(items: &[BatchItem<F>], cfg: &IntegratorConfig) -> Vec<Result<Trajectory, IntegratorError>>
where
    F: VectorField + Sync,
{
    items
        .par_iter()
        .map(|item| run(&item.field, &item.initial, item.reference.as_deref(), cfg, None))
        .collect()
}

enum StepResult {
    Ok { y: Vec<f64>, err: f64 },
    /// A stage landed on a non-finite state or a non-finite derivative far from the origin.
    Overshoot,
    NonFinite { state: Vec<f64> },
}

struct Stepper<'a, F: ?Sized> {
    field: &'a F,
    method: Method,
    rel_tol: f64,
    abs_tol: f64,
    blowup_norm: f64,
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

// Dormand–Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    fn new(field: &'a F, dim: usize, cfg: &IntegratorConfig) -> Self {
        let stages = match cfg.method {
            Method::Rk4Fixed => 4,
            Method::Rk45Adaptive => 7,
        };
        Self {
            field,
            method: cfg.method,
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
            blowup_norm: cfg.blowup_norm,
            k: vec![vec![0.0; dim]; stages],
            tmp: vec![0.0; dim],
        }
    }

    /// Evaluate stage `i` at `self.tmp`; an `Err` abandons the step.
    fn stage(&mut self, i: usize) -> Result<(), StepResult> {
        if self.tmp.iter().any(|v| !v.is_finite()) {
            return Err(StepResult::Overshoot);
        }
        self.field.eval(&self.tmp, &mut self.k[i]);
        if self.k[i].iter().all(|v| v.is_finite()) {
            return Ok(());
        }
        if norm(&self.tmp) < self.blowup_norm {
            Err(StepResult::NonFinite { state: self.tmp.clone() })
        } else {
            Err(StepResult::Overshoot)
        }
    }

    fn step(&mut self, y: &[f64], h: f64) -> StepResult {
        match self.method {
            Method::Rk4Fixed => self.rk4(y, h),
            Method::Rk45Adaptive => self.dp45(y, h),
        }
    }

    fn rk4(&mut self, y: &[f64], h: f64) -> StepResult {
        let n = y.len();
        self.tmp.copy_from_slice(y);
        if let Err(e) = self.stage(0) {
            return e;
        }
        for (i, c) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            for j in 0..n {
                self.tmp[j] = y[j] + c * h * self.k[i - 1][j];
            }
            if let Err(e) = self.stage(i) {
                return e;
            }
        }
        let out: Vec<f64> = (0..n)
            .map(|j| y[j] + h / 6.0 * (self.k[0][j] + 2.0 * self.k[1][j] + 2.0 * self.k[2][j] + self.k[3][j]))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return StepResult::Overshoot;
        }
        StepResult::Ok { y: out, err: 0.0 }
    }

    fn dp45(&mut self, y: &[f64], h: f64) -> StepResult {
        let n = y.len();
        for s in 0..7 {
            for j in 0..n {
                let mut acc = 0.0;
                for (r, a) in DP_A[s].iter().enumerate().take(s) {
                    acc += a * self.k[r][j];
                }
                self.tmp[j] = y[j] + h * acc;
            }
            if let Err(e) = self.stage(s) {
                return e;
            }
        }
        let mut out = vec![0.0; n];
        let mut err: f64 = 0.0;
        for j in 0..n {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += DP_B5[s] * self.k[s][j];
                lo += DP_B4[s] * self.k[s][j];
            }
            out[j] = y[j] + h * hi;
            let scale = self.abs_tol + self.rel_tol * y[j].abs().max(out[j].abs());
            let e = (h * (hi - lo)).abs() / scale;
            err = if e.is_nan() { f64::NAN } else { err.max(e) };
        }
        if out.iter().any(|v| !v.is_finite()) {
            return StepResult::Overshoot;
        }
        StepResult::Ok { y: out, err }
    }
}

fn run<F: VectorField + ?Sized>(
    field: &F,
    y0: &[f64],
    reference: Option<&[f64]>,
    cfg: &IntegratorConfig,
    stop: Option<&dyn Fn(f64, &[f64]) -> bool>,
) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(IntegratorError::NonFiniteInitial);
    }
    if let Some(r) = reference {
        if r.len() != y0.len() {
            return Err(IntegratorError::ReferenceDimension {
                expected: y0.len(),
                got: r.len(),
            });
        }
    }

    let mut stepper = Stepper::new(field, y0.len(), cfg);
    let floor = cfg.step_floor();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y.clone()],
        outcome: Outcome::MaxTimeReached { final_error: 0.0 },
        stiffness_suspected: false,
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let mut h = cfg.step.min(cfg.t_max);
    let mut below_since: Option<f64> = None;
    if stop.is_none() && distance(&y, reference) < cfg.converge_norm {
        below_since = Some(0.0);
    }
    let mut recorded_last = true;

    let finish = |traj: &mut Trajectory, t: f64, y: &[f64], recorded_last: bool| {
        if !recorded_last {
            traj.times.push(t);
            traj.states.push(y.to_vec());
        }
    };

    while t < cfg.t_max {
        if traj.steps_accepted + traj.steps_rejected >= cfg.max_steps {
            return Err(IntegratorError::StepBudgetExhausted(cfg.max_steps));
        }
        let remaining = cfg.t_max - t;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };

        let crossed_step = match stepper.step(&y, h_try) {
            StepResult::NonFinite { state } => {
                return Err(IntegratorError::NonFiniteDerivative { t, state });
            }
            StepResult::Overshoot => match cfg.method {
                Method::Rk4Fixed => Some(h_try),
                Method::Rk45Adaptive => {
                    if h_try <= floor {
                        Some(h_try)
                    } else {
                        traj.steps_rejected += 1;
                        h = (h_try * 0.2).max(floor);
                        continue;
                    }
                }
            },
            StepResult::Ok { y: y_new, err } => {
                let accept = match cfg.method {
                    Method::Rk4Fixed => true,
                    Method::Rk45Adaptive => {
                        if err <= 1.0 {
                            true
                        } else if h_try <= floor {
                            traj.stiffness_suspected = true;
                            true
                        } else {
                            false
                        }
                    }
                };
                if cfg.method == Method::Rk45Adaptive {
                    let factor = if err.is_nan() {
                        0.2
                    } else if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    let proposal = h_try * factor;
                    h = if accept && last { h.max(proposal) } else { proposal };
                    h = h.max(floor);
                }
                if !accept {
                    traj.steps_rejected += 1;
                    continue;
                }
                if norm(&y_new) >= cfg.blowup_norm {
                    Some(h_try)
                } else {
                    traj.steps_accepted += 1;
                    t = if last { cfg.t_max } else { t + h_try };
                    y = y_new;
                    recorded_last = traj.steps_accepted % cfg.record_stride == 0;
                    if recorded_last {
                        traj.times.push(t);
                        traj.states.push(y.clone());
                    }
                    if let Some(stop) = stop {
                        if stop(t, &y) {
                            finish(&mut traj, t, &y, recorded_last);
                            traj.outcome = Outcome::Diverged { t_threshold: t };
                            return Ok(traj);
                        }
                    } else {
                        let e = distance(&y, reference);
                        if e < cfg.converge_norm {
                            let since = *below_since.get_or_insert(t);
                            if t - since >= cfg.converge_window {
                                finish(&mut traj, t, &y, recorded_last);
                                traj.outcome = Outcome::Converged { final_error: e };
                                return Ok(traj);
                            }
                        } else {
                            below_since = None;
                        }
                    }
                    None
                }
            }
        };

        if let Some(h_cross) = crossed_step {
            let (lower, y_lower, upper) = refine_escape(&mut stepper, t, &y, h_cross, cfg.blowup_norm);
            if lower > t {
                traj.times.push(lower);
                traj.states.push(y_lower);
            } else {
                finish(&mut traj, t, &y, recorded_last);
            }
            traj.outcome = Outcome::FiniteEscape {
                t_escape: 0.5 * (lower + upper),
                lower,
                upper,
            };
            return Ok(traj);
        }
    }

    finish(&mut traj, t, &y, recorded_last);
    let final_error = if stop.is_some() { norm(&y) } else { distance(&y, reference) };
    traj.outcome = Outcome::MaxTimeReached { final_error };
    Ok(traj)
}

/// Bisect on the step size from the last state below the threshold. Returns
/// the last certified time below the threshold, the state there, and an upper
/// end no further than `ESCAPE_BRACKET_RTOL` relative away.
fn refine_escape<F: VectorField + ?Sized>(
    stepper: &mut Stepper<'_, F>,
    t: f64,
    y: &[f64],
    h_cross: f64,
    threshold: f64,
) -> (f64, Vec<f64>, f64) {
    let mut base_t = t;
    let mut base_y = y.to_vec();
    let mut span = h_cross;
    for _ in 0..200 {
        let scale = base_t.max(f64::MIN_POSITIVE);
        if span <= 0.25 * ESCAPE_BRACKET_RTOL * scale {
            break;
        }
        let mid = 0.5 * span;
        match stepper.step(&base_y, mid) {
            StepResult::Ok { y, .. } if norm(&y) < threshold => {
                base_t += mid;
                base_y = y;
                span -= mid;
            }
            _ => span = mid,
        }
    }
    let upper = (base_t + span).max(base_t * (1.0 + 0.9 * ESCAPE_BRACKET_RTOL));
    (base_t, base_y, upper)
}
