use std::collections::BTreeMap;
use std::path::PathBuf;

use pidreg_core::certificates::{vdot_margin, LyapunovCertificate};
use pidreg_core::closed_loop::{error_coordinates, SecondOrderLoop};
use pidreg_core::demos::{
    default_design_a, escape_demo, lyapunov_trace, simulate_second_order, third_order_demo, run_regulation_trials,
    TrialConfig,
};
use pidreg_core::gain_design::{
    corollary_gains, corollary_triple, gains_to_lambda, in_omega_k, in_omega_lambda, lambda_to_gains,
    sample_omega_lambda, LipschitzBound, PidGains,
};
use pidreg_core::integrator::{norm, IntegratorConfig, Method};
use pidreg_core::plants::catalog_lookup;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::report::{to_json, write_text, Failure, RunReport, Table, Verdict};
use crate::{Cli, Command, Format, GainArgs, IntegratorArgs, MethodArg, Mode};

/// Default horizon for `simulate`, in seconds.
const SIMULATE_T_MAX: f64 = 400.0;

struct Output {
    report: RunReport,
    table: Option<Table>,
}

pub fn run(cli: &Cli, cfg: &FileConfig) -> Result<i32, Failure> {
    let seed = cfg.pick(cli.common.seed, &["seed"])?.unwrap_or(0);
    let format = cfg.pick(cli.common.format, &["format"])?.unwrap_or(Format::Json);
    let out: Option<PathBuf> = cfg.pick(cli.common.out.clone(), &["out"])?;
    let output = match &cli.command {
        Command::Synthesize { l, mode, epsilon, a } => synthesize(cfg, seed, *l, *mode, *epsilon, *a)?,
        Command::Check { gains, l } => check(cfg, seed, gains, *l)?,
        Command::Simulate {
            plant,
            params,
            gains,
            setpoint,
            x1,
            x2,
            integrator,
        } => simulate(cfg, seed, plant.clone(), params, gains, setpoint.clone(), x1.clone(), x2.clone(), integrator, format)?,
        Command::VerifyTheorem1 {
            l,
            trials,
            n,
            epsilon,
            a,
            gains,
            integrator,
        } => regulation_trials(cfg, seed, *l, *trials, *n, *epsilon, *a, gains, integrator)?,
        Command::DemoEscape { epsilon, gains, setpoint } => demo_escape(cfg, seed, *epsilon, gains, *setpoint)?,
        Command::DemoThirdOrder { gains, l } => demo_third_order(cfg, seed, gains, *l)?,
    };
    emit(output, format, out)
}

fn emit(mut output: Output, format: Format, out: Option<PathBuf>) -> Result<i32, Failure> {
    let verdict = output.report.verdict;
    match format {
        Format::Json => write_text(out.as_deref(), &to_json(&output.report))?,
        Format::Csv => {
            let table = output.table.take().ok_or_else(|| {
                Failure::usage(format!(
                    "`{}` has no tabular output; csv is available for simulate, verify-theorem1 and demo-escape",
                    output.report.command
                ))
            })?;
            match out {
                Some(path) => {
                    write_text(Some(&path), &table.render())?;
                    output.report.trajectories.push(path.display().to_string());
                    write_text(None, &to_json(&output.report))?;
                }
                None => {
                    write_text(None, &table.render())?;
                    eprintln!("{}: {:?}", output.report.command, verdict);
                }
            }
        }
    }
    Ok(verdict.exit_code())
}

fn report(command: &str, seed: u64, inputs: Value, results: Value, verdict: Verdict) -> RunReport {
    RunReport {
        command: command.to_string(),
        inputs,
        results,
        trajectories: Vec::new(),
        verdict,
        seed,
    }
}

fn lipschitz(cfg: &FileConfig, flag: Option<f64>) -> Result<LipschitzBound, Failure> {
    let l = cfg
        .pick(flag, &["L", "lipschitz"])?
        .ok_or_else(|| Failure::usage("the Lipschitz bound --L is required"))?;
    Ok(LipschitzBound::new(l)?)
}

fn gains(cfg: &FileConfig, args: &GainArgs) -> Result<Option<PidGains>, Failure> {
    let kp = cfg.pick(args.kp, &["kp"])?;
    let ki = cfg.pick(args.ki, &["ki"])?;
    let kd = cfg.pick(args.kd, &["kd"])?;
    match (kp, ki, kd) {
        (None, None, None) => Ok(None),
        (Some(kp), Some(ki), Some(kd)) => Ok(Some(PidGains::new(kp, ki, kd)?)),
        _ => Err(Failure::usage("give all three of --kp, --ki, --kd or none")),
    }
}

fn integrator_config(cfg: &FileConfig, args: &IntegratorArgs, mut base: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
    if let Some(m) = cfg.pick(args.method, &["method"])? {
        base.method = match m {
            MethodArg::Rk4 => Method::Rk4Fixed,
            MethodArg::Rk45 => Method::Rk45Adaptive,
        };
    }
    let fields: [(&mut f64, Option<f64>, &str); 7] = [
        (&mut base.step, args.step, "step"),
        (&mut base.rel_tol, args.rel_tol, "rel-tol"),
        (&mut base.abs_tol, args.abs_tol, "abs-tol"),
        (&mut base.t_max, args.t_max, "t-max"),
        (&mut base.blowup_norm, args.blowup_norm, "blowup-norm"),
        (&mut base.converge_norm, args.converge_norm, "converge-norm"),
        (&mut base.converge_window, args.converge_window, "converge-window"),
    ];
    for (slot, flag, key) in fields {
        if let Some(v) = cfg.pick(flag, &[key])? {
            *slot = v;
        }
    }
    if let Some(s) = cfg.pick(args.record_stride, &["record-stride"])? {
        base.record_stride = s;
    }
    base.validate()?;
    Ok(base)
}

fn gains_json(g: &PidGains) -> Value {
    json!({ "kp": g.kp, "ki": g.ki, "kd": g.kd })
}

fn synthesize(
    cfg: &FileConfig,
    seed: u64,
    l: Option<f64>,
    mode: Option<Mode>,
    epsilon: Option<f64>,
    a: Option<f64>,
) -> Result<Output, Failure> {
    let l = lipschitz(cfg, l)?;
    let mode = cfg.pick(mode, &["mode"])?.unwrap_or(Mode::Corollary);
    let (lam, gains, inputs) = match mode {
        Mode::Corollary => {
            let eps = cfg.pick(epsilon, &["epsilon"])?.unwrap_or(0.1);
            let a = cfg.pick(a, &["a"])?.unwrap_or_else(|| default_design_a(l.value()));
            let gains = corollary_gains(eps, a, l)?;
            (corollary_triple(eps, a), gains, json!({ "L": l.value(), "mode": "corollary", "epsilon": eps, "a": a }))
        }
        Mode::Search => {
            let lam = sample_omega_lambda(l, seed)?;
            (lam, lambda_to_gains(&lam), json!({ "L": l.value(), "mode": "search" }))
        }
    };
    let region = in_omega_lambda(&lam, l);
    let membership = in_omega_k(&gains, l);
    let margin = vdot_margin(&lam, l)?;
    let results = json!({
        "gains": gains_json(&gains),
        "lambda": lam,
        "phi": region.phi_value,
        "h": region.h_value,
        "product_l_phi_h": region.product_l_phi_h,
        "lyapunov_margin": margin,
        "member": membership.member,
        "region": membership,
    });
    Ok(Output {
        report: report("synthesize", seed, inputs, results, Verdict::from_bool(membership.member)),
        table: None,
    })
}

fn check(cfg: &FileConfig, seed: u64, g: &GainArgs, l: Option<f64>) -> Result<Output, Failure> {
    let gains = self::gains(cfg, g)?.ok_or_else(|| Failure::usage("check needs --kp, --ki and --kd"))?;
    let l = lipschitz(cfg, l)?;
    let region = in_omega_k(&gains, l);
    let roots = gains_to_lambda(&gains);
    let margin = match (&region.lambda, region.member) {
        (Some(lam), true) => Some(LyapunovCertificate::new(*lam, l)?.margin),
        _ => None,
    };
    let results = json!({
        "roots": roots,
        "member": region.member,
        "lyapunov_margin": margin,
        "region": region,
    });
    let inputs = json!({ "gains": gains_json(&gains), "L": l.value() });
    Ok(Output {
        report: report("check", seed, inputs, results, Verdict::from_bool(region.member)),
        table: None,
    })
}

fn parse_params(cfg: &FileConfig, raw: &[String]) -> Result<BTreeMap<String, f64>, Failure> {
    let mut map: BTreeMap<String, f64> = cfg.get("param")?.unwrap_or_default();
    for item in raw {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("plant parameter `{item}` is not key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("plant parameter `{k}` has non-numeric value `{v}`")))?;
        map.insert(k.trim().to_string(), v);
    }
    Ok(map)
}

fn vector(cfg: &FileConfig, flag: Option<Vec<f64>>, key: &str, n: usize) -> Result<Vec<f64>, Failure> {
    let v = cfg.pick(flag, &[key])?.unwrap_or_else(|| vec![0.0; n]);
    if v.len() != n {
        return Err(Failure::usage(format!("--{key} has {} entries, the plant has dimension {n}", v.len())));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    cfg: &FileConfig,
    seed: u64,
    plant: Option<String>,
    params: &[String],
    g: &GainArgs,
    setpoint: Option<Vec<f64>>,
    x1: Option<Vec<f64>>,
    x2: Option<Vec<f64>>,
    integrator: &IntegratorArgs,
    format: Format,
) -> Result<Output, Failure> {
    let name: String = cfg
        .pick(plant, &["plant"])?
        .ok_or_else(|| Failure::usage("simulate needs --plant"))?;
    if name == "power_law" {
        return Err(Failure::usage(
            "power_law is not globally Lipschitz, so no gain region applies; run `pidreg demo-escape` to study its finite escape",
        ));
    }
    let params = parse_params(cfg, params)?;
    let f = catalog_lookup(&name, &params)?;
    let n = f.dim();
    let setpoint = vector(cfg, setpoint, "setpoint", n)?;
    let x1 = vector(cfg, x1, "x1", n)?;
    let x2 = vector(cfg, x2, "x2", n)?;
    let declared = f.declared_l().map(LipschitzBound::new).transpose()?;
    let gains = match self::gains(cfg, g)? {
        Some(g) => g,
        None => {
            let l = declared.ok_or_else(|| Failure::usage("plant has no declared Lipschitz bound; pass gains explicitly"))?;
            corollary_gains(0.1, default_design_a(l.value()), l)?
        }
    };
    let base = IntegratorConfig {
        t_max: SIMULATE_T_MAX,
        ..Default::default()
    };
    let icfg = integrator_config(cfg, integrator, base)?;
    let lp = SecondOrderLoop::new(f, gains, setpoint.clone()).map_err(Failure::usage)?;
    let run = simulate_second_order(&lp, &x1, &x2, &icfg)?;

    let certificate = declared.and_then(|l| {
        let r = in_omega_k(&gains, l);
        r.lambda.filter(|_| r.member).map(|lam| (lam, l))
    });
    let trace = match certificate {
        Some((lam, l)) => Some(lyapunov_trace(&lp, &lam, l, &run.trajectory)?),
        None => None,
    };
    let verdict = Verdict::from_bool(
        run.trajectory.outcome.is_converged() && trace.as_ref().is_none_or(|t| t.monotone() && t.bound_holds()),
    );

    let mut header = vec!["t".to_string()];
    for prefix in ["y0", "x1", "x2"] {
        header.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    header.push("err_norm".into());
    if trace.is_some() {
        header.push("V".into());
    }
    let rows = run
        .trajectory
        .times
        .iter()
        .zip(&run.trajectory.states)
        .enumerate()
        .map(|(k, (t, s))| {
            let mut row = Vec::with_capacity(3 * n + 3);
            row.push(*t);
            row.extend_from_slice(s);
            row.push(norm(&error_coordinates(s, &setpoint)[n..2 * n]));
            if let Some(tr) = &trace {
                row.push(tr.values[k]);
            }
            row
        })
        .collect();

    let mut results = json!({
        "outcome": run.trajectory.outcome,
        "final_time": run.trajectory.final_time(),
        "initial_error_norm": run.initial_error_norm,
        "final_error_norm": run.final_error_norm,
        "fitted_rate": run.rate,
        "equilibrium": run.equilibrium,
        "gains": gains_json(&gains),
        "steps_accepted": run.trajectory.steps_accepted,
        "steps_rejected": run.trajectory.steps_rejected,
        "stiffness_suspected": run.trajectory.stiffness_suspected,
        "lyapunov": trace.as_ref().map(|t| json!({
            "margin": t.margin,
            "max_relative_increase": t.max_relative_increase,
            "max_bound_excess": t.max_bound_excess,
            "monotone": t.monotone(),
            "bound_holds": t.bound_holds(),
        })),
    });
    if format == Format::Json {
        results["trajectory"] = json!({ "times": run.trajectory.times, "states": run.trajectory.states });
    }
    let inputs = json!({
        "plant": name,
        "params": params,
        "declared_L": declared.map(|l| l.value()),
        "gains": gains_json(&gains),
        "setpoint": setpoint,
        "x1": x1,
        "x2": x2,
        "integrator": icfg,
    });
    Ok(Output {
        report: report("simulate", seed, inputs, results, verdict),
        table: Some(Table { header, rows }),
    })
}

#[allow(clippy::too_many_arguments)]
fn regulation_trials(
    cfg: &FileConfig,
    seed: u64,
    l: Option<f64>,
    trials: Option<usize>,
    n: Option<usize>,
    epsilon: Option<f64>,
    a: Option<f64>,
    g: &GainArgs,
    integrator: &IntegratorArgs,
) -> Result<Output, Failure> {
    let l = lipschitz(cfg, l)?;
    let trials = cfg.pick(trials, &["trials"])?.unwrap_or(50);
    let n = cfg.pick(n, &["n"])?.unwrap_or(1);
    let mut t1 = TrialConfig::new(l.value(), n, trials, seed);
    t1.epsilon = cfg.pick(epsilon, &["epsilon"])?.unwrap_or(t1.epsilon);
    t1.a = cfg.pick(a, &["a"])?.unwrap_or(t1.a);
    t1.gains = self::gains(cfg, g)?;
    t1.integrator = integrator_config(cfg, integrator, t1.integrator.clone())?;
    let summary = run_regulation_trials(&t1)?;
    let verdict = if summary.in_region {
        Verdict::from_bool(summary.pass())
    } else {
        Verdict::Inconclusive
    };
    let header = [
        "trial",
        "declared_L",
        "final_time",
        "final_error_norm",
        "fitted_rate",
        "converged",
        "lyapunov_max_relative_increase",
        "lyapunov_max_bound_excess",
    ]
    .map(String::from)
    .to_vec();
    let rows = summary
        .trials
        .iter()
        .map(|t| {
            vec![
                t.index as f64,
                t.declared_l,
                t.final_time,
                t.final_error_norm,
                t.rate.unwrap_or(f64::NAN),
                f64::from(u8::from(t.outcome.is_converged())),
                t.lyapunov_max_relative_increase.unwrap_or(f64::NAN),
                t.lyapunov_max_bound_excess.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    let note = (!summary.in_region).then_some("gains lie outside the stabilizing region for this L; the runs carry no certificate");
    let results = json!({
        "gains": gains_json(&summary.gains),
        "lambda": summary.lam,
        "in_region": summary.in_region,
        "lyapunov_margin": summary.margin,
        "all_regulated": summary.all_regulated,
        "all_rates_negative": summary.all_rates_negative,
        "all_lyapunov_ok": summary.all_lyapunov_ok,
        "note": note,
        "trials": summary.trials,
    });
    let inputs = json!({
        "L": l.value(),
        "trials": trials,
        "n": n,
        "epsilon": t1.epsilon,
        "a": t1.a,
        "gains_override": t1.gains.as_ref().map(gains_json),
        "setpoint_range": t1.setpoint_range,
        "initial_range": t1.initial_range,
        "error_tol": t1.error_tol,
        "integrator": t1.integrator,
    });
    Ok(Output {
        report: report("verify-theorem1", seed, inputs, results, verdict),
        table: Some(Table { header, rows }),
    })
}

fn demo_escape(cfg: &FileConfig, seed: u64, epsilon: Option<f64>, g: &GainArgs, setpoint: Option<f64>) -> Result<Output, Failure> {
    let eps = cfg.pick(epsilon, &["epsilon"])?.unwrap_or(1.0);
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Failure::usage(format!("epsilon must be > 0, got {eps}")));
    }
    let gains = self::gains(cfg, g)?.unwrap_or(PidGains { kp: 0.0, ki: 0.0, kd: 0.0 });
    let setpoint = cfg.pick(setpoint, &["setpoint"])?.unwrap_or(0.0);
    let d = escape_demo(eps, gains, setpoint)?;
    let header = ["t", "y0", "y1", "y2"].map(String::from).to_vec();
    let rows = d
        .trajectory
        .times
        .iter()
        .zip(&d.trajectory.states)
        .map(|(t, s)| vec![*t, s[0], s[1], s[2]])
        .collect();
    let results = json!({
        "cone": d.cone,
        "escape_time_bound": d.escape_time_bound,
        "outcome": d.outcome,
        "samples": d.samples,
        "checks": {
            "escaped": d.escaped,
            "samples_in_cone": d.samples_in_cone,
            "escape_within_bound": d.escape_within_bound,
            "linear_error_bound": d.linear_bound_holds,
            "comparison_envelope": d.envelope_holds,
        },
        "slope_check": {
            "min_slope_ratio": d.min_slope_ratio,
            "reconstructed_constant": d.divergence_constant,
            "holds": d.min_slope_ratio >= d.divergence_constant,
            "informational": true,
        },
    });
    let inputs = json!({ "epsilon": eps, "gains": gains_json(&gains), "setpoint": setpoint });
    Ok(Output {
        report: report("demo-escape", seed, inputs, results, Verdict::from_bool(d.pass())),
        table: Some(Table { header, rows }),
    })
}

fn demo_third_order(cfg: &FileConfig, seed: u64, g: &GainArgs, l: Option<f64>) -> Result<Output, Failure> {
    let gains = self::gains(cfg, g)?.ok_or_else(|| Failure::usage("demo-third-order needs --kp, --ki and --kd"))?;
    let l = cfg.pick(l, &["L", "lipschitz"])?.unwrap_or(1.0);
    let d = third_order_demo(gains, l)?;
    let results = json!({
        "c": d.choice.c,
        "candidates_tried": d.choice.candidates_tried,
        "excluded_c_values": d.choice.excluded,
        "min_residual_over_multiple_root_set": d.choice.min_residual_over_r,
        "spectrum": d.spectral,
        "reduced_loop": d.reduced,
        "initial_state": d.start.y0,
        "real_initial_state": d.real_start,
        "reported_initial_state": d.reported_start,
        "imaginary_residual": d.start.imaginary_residual,
        "outcome": d.outcome,
        "t_threshold": d.t_threshold,
        "closed_form": {
            "compared_samples": d.compared_samples,
            "max_relative_error": d.max_closed_form_error,
            "agrees": d.closed_form_agrees(),
        },
        "trace_error": d.trace_error,
        "checks": {
            "diverged": d.diverged(),
            "spectrum_ok": d.spectrum_ok(),
            "clear_of_multiple_root_set": d.clear_of_multiple_root_set(),
        },
    });
    let inputs = json!({ "gains": gains_json(&gains), "L": l });
    Ok(Output {
        report: report("demo-third-order", seed, inputs, results, Verdict::from_bool(d.pass())),
        table: None,
    })
}
