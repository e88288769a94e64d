use pidreg_core::closed_loop::{SecondOrderLoop, ThirdOrderLoop};
use pidreg_core::gain_design::PidGains;
use pidreg_core::plants::{shift_nonlinearity, PlantFunction};
use proptest::prelude::*;

fn gains() -> impl Strategy<Value = PidGains> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(kp, ki, kd)| PidGains { kp, ki, kd })
}

fn plant() -> impl Strategy<Value = PlantFunction> {
    prop_oneof![
        (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b)| PlantFunction::sine_mix(a, b)),
        (0.1..20.0f64, 0.2..2.0f64, -1.0..1.0f64).prop_map(|(g, l, c)| PlantFunction::pendulum(g, l, c)),
        (-4.0..4.0f64, -4.0..4.0f64).prop_map(|(k, c)| PlantFunction::damped_spring(k, c)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equilibrium_is_a_fixed_point(f in plant(), g in gains(), ystar in -20.0..20.0f64) {
        prop_assume!(g.ki.abs() > 1e-3);
        let lp = SecondOrderLoop::new(f, g, vec![ystar]).unwrap();
        let eq = lp.equilibrium().unwrap();
        let d = lp.derivative(&eq);
        let scale = lp.rest_force()[0].abs().max(1.0);
        prop_assert!(d.iter().all(|v| v.abs() <= 1e-12 * scale), "{d:?}");
    }

    #[test]
    fn shifted_plant_gives_same_field(
        f in plant(),
        g in gains(),
        ystar in -20.0..20.0f64,
        state in prop::array::uniform3(-50.0..50.0f64),
    ) {
        prop_assume!(g.ki.abs() > 1e-3);
        let direct = SecondOrderLoop::new(f.clone(), g, vec![ystar]).unwrap();
        let shifted_plant = shift_nonlinearity(&f, &[ystar]);
        let shifted = SecondOrderLoop::new(shifted_plant, g, vec![0.0]).unwrap();
        // Shifted coordinates: y0 absorbs f(y*, 0)/ki, position measured from y*.
        let offset = direct.rest_force()[0] / g.ki;
        let lhs = direct.derivative(&state);
        let rhs = shifted.derivative(&[state[0] + offset, state[1] - ystar, state[2]]);
        // Relative to the size of the summed terms, since the field can cancel to near zero.
        let f_at = f.evaluate(&[state[1]], &[state[2]])[0].abs();
        let terms = f_at + direct.rest_force()[0].abs() + (g.kp * (state[1] - ystar)).abs()
            + (g.ki * state[0]).abs() + (g.kd * state[2]).abs() + state[1].abs() + state[2].abs();
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-12 * terms.max(1.0), "{lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn third_order_field_is_linear(
        g in gains(),
        c in -5.0..5.0f64,
        x in prop::array::uniform4(-10.0..10.0f64),
        y in prop::array::uniform4(-10.0..10.0f64),
        a in -3.0..3.0f64,
        reduced in any::<bool>(),
    ) {
        let lp = if reduced { ThirdOrderLoop::reduced(g, c) } else { ThirdOrderLoop::new(g, c) };
        let d = lp.state_dim();
        let (x, y) = (&x[..d], &y[..d]);
        let combo: Vec<f64> = x.iter().zip(y).map(|(p, q)| a * p + q).collect();
        let fx = lp.derivative(x);
        let fy = lp.derivative(y);
        let fc = lp.derivative(&combo);
        let scale = 1.0 + g.kp.abs() + g.ki.abs() + g.kd.abs() + c.abs();
        for i in 0..d {
            prop_assert!((fc[i] - (a * fx[i] + fy[i])).abs() <= 1e-12 * scale * 40.0);
        }
        let trace: f64 = (0..d).map(|i| lp.matrix()[(i, i)]).sum();
        prop_assert_eq!(trace, c);
    }
}
