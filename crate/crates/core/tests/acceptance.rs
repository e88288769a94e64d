//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each, and exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use pidreg_core::certificates::ModalTransform;
use pidreg_core::closed_loop::SecondOrderLoop;
use pidreg_core::demos::{escape_demo, simulate_second_order, third_order_demo, run_regulation_trials, TrialConfig};
use pidreg_core::gain_design::{
    corollary_gains, gains_to_lambda, h, in_omega_k, lambda_to_gains, sample_omega_lambda, EigenTriple,
    LipschitzBound, PidGains,
};
use pidreg_core::integrator::{integrate_until, IntegratorConfig, Method, Outcome};
use pidreg_core::plants::PlantFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    ok: bool,
    detail: String,
}

fn run(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let ok = v.ok && in_time;
    let limit_note = match limit {
        Some(l) if !in_time => format!(" (exceeded {:.0?} limit)", l),
        _ => String::new(),
    };
    println!(
        "criterion {id} {:<34} {}  [{:.2?}] {}{}",
        name,
        if ok { "PASS" } else { "FAIL" },
        elapsed,
        v.detail,
        limit_note
    );
    ok
}

fn sorted_re(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn vieta_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut drawn = 0;
    while drawn < 10_000 {
        let lam = [0; 3].map(|_| rng.random_range(-100.0..=-0.01));
        let Ok(triple) = EigenTriple::new(lam[0], lam[1], lam[2]) else { continue };
        if !triple.is_distinct() {
            continue;
        }
        drawn += 1;
        let back = gains_to_lambda(&lambda_to_gains(&triple));
        let imag = back.iter().map(|z: &Complex64| z.im.abs()).fold(0.0, f64::max);
        let got = sorted_re(back.iter().map(|z| z.re).collect());
        let want = sorted_re(lam.to_vec());
        let err = got
            .iter()
            .zip(&want)
            .map(|(g, w)| (g - w).abs() / w.abs())
            .fold(imag / triple.max_abs(), f64::max);
        worst = worst.max(err);
        if err > 1e-9 {
            failures += 1;
        }
    }
    Verdict {
        ok: failures == 0,
        detail: format!("10000 triples, worst relative error {worst:.2e}, {failures} failures"),
    }
}

fn design_family_containment() -> Verdict {
    let mut checked = 0;
    let mut failures = Vec::new();
    for l in [0.1, 1.0, 10.0] {
        let lb = LipschitzBound::new(l).unwrap();
        let a_lo = 5.05 * f64::max(l, 1.0);
        for i in 0..20 {
            let eps = 0.01 + (0.24 - 0.01) * (i as f64 + 0.5) / 20.0;
            for j in 0..20 {
                let a = a_lo + (100.0 - a_lo) * (j as f64 + 0.5) / 20.0;
                checked += 1;
                match corollary_gains(eps, a, lb) {
                    Ok(g) if in_omega_k(&g, lb).member => {}
                    other => failures.push(format!("L={l} eps={eps} a={a}: {other:?}")),
                }
            }
        }
    }
    Verdict {
        ok: failures.is_empty(),
        detail: format!("{checked} grid points, {} failures {}", failures.len(), failures.first().cloned().unwrap_or_default()),
    }
}

fn regulation_and_lyapunov() -> (Verdict, Verdict) {
    let cfg = TrialConfig::new(1.0, 1, 50, 2024);
    let cfg = TrialConfig { a: 10.0, epsilon: 0.1, ..cfg };
    match run_regulation_trials(&cfg) {
        Ok(s) => {
            let converged = s.trials.iter().filter(|t| t.regulated(cfg.error_tol)).count();
            let worst_err = s.trials.iter().map(|t| t.final_error_norm).fold(0.0, f64::max);
            let slowest = s.trials.iter().filter_map(|t| t.rate).fold(f64::NEG_INFINITY, f64::max);
            let max_l = s.trials.iter().map(|t| t.declared_l).fold(0.0, f64::max);
            let regulation = Verdict {
                ok: s.in_region && s.all_regulated && s.all_rates_negative && max_l <= 1.0,
                detail: format!(
                    "{converged}/50 converged, worst final |e| {worst_err:.2e}, slowest fitted rate {slowest:.4}, max declared L {max_l:.3}"
                ),
            };
            let incr = s
                .trials
                .iter()
                .map(|t| t.lyapunov_max_relative_increase.unwrap_or(f64::INFINITY))
                .fold(f64::NEG_INFINITY, f64::max);
            let excess = s
                .trials
                .iter()
                .map(|t| t.lyapunov_max_bound_excess.unwrap_or(f64::INFINITY))
                .fold(f64::NEG_INFINITY, f64::max);
            let lyapunov = Verdict {
                ok: s.all_lyapunov_ok,
                detail: format!(
                    "margin {:.4}, max V increase / V(0) {incr:.2e}, max (Vdot - margin|Z|^2)/|Z|^2 {excess:.2e}",
                    s.margin.unwrap_or(f64::NAN)
                ),
            };
            (regulation, lyapunov)
        }
        Err(e) => (
            Verdict { ok: false, detail: format!("error: {e}") },
            Verdict { ok: false, detail: format!("error: {e}") },
        ),
    }
}

fn modal_algebra() -> Verdict {
    let l = LipschitzBound::new(1.0).unwrap();
    let mut worst_recon: f64 = 0.0;
    let mut worst_norm_ratio: f64 = 0.0;
    let mut ok = true;
    for seed in 0..100 {
        let lam = match sample_omega_lambda(l, seed) {
            Ok(lam) => lam,
            Err(e) => return Verdict { ok: false, detail: format!("sampler failed: {e}") },
        };
        let hv = h(&lam).unwrap();
        for n in 1..=3 {
            let t = ModalTransform::new(lam, n).unwrap();
            let a: DMatrix<f64> = t.companion();
            let recon = (t.p() * t.j() * t.p_inverse() - &a).norm() / a.norm();
            let ratio = t.p_prime_norm() / hv;
            worst_recon = worst_recon.max(recon);
            worst_norm_ratio = worst_norm_ratio.max(ratio);
            ok &= recon <= 1e-9 && ratio <= 1.0 + 1e-12;
        }
    }
    Verdict {
        ok,
        detail: format!("300 transforms, worst |PJP^-1 - A|/|A| {worst_recon:.2e}, worst |P'|/h {worst_norm_ratio:.15}"),
    }
}

fn superlinear_escape() -> Verdict {
    let mut ok = true;
    let mut lines = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        for (kp, ki, kd) in [(0.0, 0.0, 0.0), (-1.0, -1.0, -1.0), (-12.11, -1.1, -11.2)] {
            let gains = PidGains { kp, ki, kd };
            match escape_demo(eps, gains, 0.0) {
                Ok(d) => {
                    let pass = d.pass();
                    ok &= pass;
                    if !pass {
                        lines.push(format!(
                            "eps={eps} gains=({kp},{ki},{kd}) outcome={:?} in_cone={} within={} linear={} envelope={}",
                            d.outcome, d.samples_in_cone, d.escape_within_bound, d.linear_bound_holds, d.envelope_holds
                        ));
                    }
                }
                Err(e) => {
                    ok = false;
                    lines.push(format!("eps={eps} gains=({kp},{ki},{kd}): {e}"));
                }
            }
        }
    }
    Verdict {
        ok,
        detail: if lines.is_empty() { "9/9 escapes bracketed inside the bound, cone and envelopes".into() } else { lines.join("; ") },
    }
}

fn third_order_divergence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut passed = 0;
    let mut complex_starts = 0;
    let mut worst_cf: f64 = 0.0;
    let mut notes = Vec::new();
    for i in 0..20 {
        let mut draw = || {
            let v: f64 = rng.random_range(-20.0..=20.0);
            (v * 100.0).round() / 100.0
        };
        let (kp, kd) = (draw(), draw());
        let ki = loop {
            let v = draw();
            if v != 0.0 {
                break v;
            }
        };
        let gains = PidGains { kp, ki, kd };
        match third_order_demo(gains, 1.0) {
            Ok(d) => {
                worst_cf = worst_cf.max(d.max_closed_form_error);
                complex_starts += usize::from(!d.real_start);
                if d.pass() {
                    passed += 1;
                } else {
                    notes.push(format!(
                        "run {i} gains=({kp},{ki},{kd}) diverged={} closed_form={:.2e} spectrum_ok={} clear_of_R={}",
                        d.diverged(),
                        d.max_closed_form_error,
                        d.spectrum_ok(),
                        d.clear_of_multiple_root_set()
                    ));
                }
            }
            Err(e) => notes.push(format!("run {i} gains=({kp},{ki},{kd}): {e}")),
        }
    }
    Verdict {
        ok: passed == 20,
        detail: format!(
            "{passed}/20 diverged and matched the closed form (worst {worst_cf:.2e}, {complex_starts} complex top pairs) {}",
            notes.join("; ")
        ),
    }
}

fn integrator_order() -> Verdict {
    let decay = |y: &[f64], d: &mut [f64]| d[0] = -y[0];
    let err_at = |step: f64| {
        let cfg = IntegratorConfig {
            method: Method::Rk4Fixed,
            step,
            t_max: 1.0,
            ..Default::default()
        };
        let traj = integrate_until(&decay, &[1.0], &cfg, |_, _| false).unwrap();
        (traj.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let ratios: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| err_at(h) / err_at(h / 2.0)).collect();
    let ratios_ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));

    let square = |y: &[f64], d: &mut [f64]| d[0] = y[0] * y[0];
    let cfg = IntegratorConfig { t_max: 2.0, ..Default::default() };
    let bracket = match integrate_until(&square, &[1.0], &cfg, |_, _| false) {
        Ok(traj) => match traj.outcome {
            Outcome::FiniteEscape { lower, upper, .. } => Some((lower, upper)),
            _ => None,
        },
        Err(_) => None,
    };
    let bracket_ok = bracket.is_some_and(|(lo, hi)| lo <= 1.0 && 1.0 <= hi && hi - lo < 1e-6);
    Verdict {
        ok: ratios_ok && bracket_ok,
        detail: format!("RK4 halving ratios {ratios:.3?}, escape bracket {bracket:?}"),
    }
}

fn negative_control() -> Verdict {
    let gains = PidGains { kp: 1.0, ki: 1.0, kd: 1.0 };
    let unstable = gains_to_lambda(&gains).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let l = LipschitzBound::new(1.0).unwrap();
    let rejected = !in_omega_k(&gains, l).member;
    let lp = SecondOrderLoop::new(PlantFunction::zero(1), gains, vec![0.0]).unwrap();
    let cfg = IntegratorConfig { t_max: 50.0, ..Default::default() };
    match simulate_second_order(&lp, &[1.0], &[0.0], &cfg) {
        Ok(run) => Verdict {
            ok: unstable > 0.0 && rejected && !run.trajectory.outcome.is_converged() && run.final_error_norm > run.initial_error_norm,
            detail: format!(
                "largest root real part {unstable:.4}, rejected by region test {rejected}, outcome {}, |e| {:.2e} -> {:.2e}",
                run.trajectory.outcome.label(),
                run.initial_error_norm,
                run.final_error_norm
            ),
        },
        Err(e) => Verdict { ok: false, detail: format!("error: {e}") },
    }
}

fn main() {
    let mut all = true;
    all &= run(1, "Vieta round trip", Some(Duration::from_secs(5)), vieta_round_trip);
    all &= run(2, "design family inside region", None, design_family_containment);
    let mut lyapunov = None;
    all &= run(3, "regulation of random plants", Some(Duration::from_secs(120)), || {
        let (regulation, lyap) = regulation_and_lyapunov();
        lyapunov = Some(lyap);
        regulation
    });
    all &= run(4, "Lyapunov certificate along runs", None, || lyapunov.expect("criterion 3 ran"));
    all &= run(5, "modal transform algebra", None, modal_algebra);
    all &= run(6, "finite escape from the cone", Some(Duration::from_secs(30)), superlinear_escape);
    all &= run(7, "third-order divergence", None, third_order_divergence);
    all &= run(8, "integrator order and escape", None, integrator_order);
    all &= run(9, "negative control", None, negative_control);
    if all {
        println!("acceptance: all 9 criteria PASS");
    } else {
        println!("acceptance: FAIL");
        std::process::exit(1);
    }
}
