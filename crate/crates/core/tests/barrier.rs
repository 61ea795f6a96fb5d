use fracplap::barrier::{self, a_field, phi, rescale_supersolution, BarrierSpec};
use fracplap::{FracParams, QuadratureSpec};

#[test]
fn phi_grows_at_the_expected_rate() {
    let nu = 0.3;
    for d in [1e-2, 1e-3, 1e-4] {
        let x = [0.0, 1.0 + d];
        let h = 1e-3 * d;
        let slope = (phi(&[0.0, 1.0 + d + h], nu) - phi(&[0.0, 1.0 + d - h], nu)) / (2.0 * h);
        let model = nu * 2f64.powf(nu) * d.powf(nu - 1.0);
        assert!((slope / model - 1.0).abs() < 0.2, "d={d}: {slope} vs {model}");
        assert!(phi(&x, nu) > 0.0);
    }
    assert_eq!(phi(&[0.5, 0.5], nu), 0.0);
}

#[test]
fn barrier_is_holder_continuous_across_the_sphere() {
    let spec = BarrierSpec::with_nu(0.3).unwrap();
    let a = a_field(&spec, 2);
    let mut worst: f64 = 0.0;
    for k in 2..20 {
        let d = 2f64.powi(-k);
        let q = (a.value(&[1.0 + d, 0.0]) - a.value(&[1.0 - d, 0.0])).abs() / (2.0 * d).powf(spec.nu);
        worst = worst.max(q);
    }
    assert!(worst.is_finite() && worst < 10.0, "Hölder quotient {worst}");
}

#[test]
fn lower_bound_holds_on_shrinking_shell_samples() {
    let params = FracParams::new(1, 0.5, 3.0).unwrap();
    let spec = BarrierSpec::with_nu(0.25).unwrap();
    let samples: Vec<Vec<f64>> = (3..=10).map(|k| vec![1.0 + spec.epsilon_shell * 2f64.powi(-k)]).collect();
    let rep = barrier::barrier_lower_bound_check(&spec, &params, &samples, &QuadratureSpec::default()).unwrap();
    assert!(rep.bounded_away_from_zero, "min ratio {}", rep.min_ratio);
    assert!(rep.samples.iter().all(|s| s.failure.is_none() && s.value > 0.0));
}

#[test]
fn rescaling_identity_for_the_supersolution() {
    for n in [1usize, 2] {
        let params = FracParams::new(n, 0.5, 3.0).unwrap();
        let mut probe = vec![0.0; n];
        probe[n - 1] = 0.4;
        let rep = rescale_supersolution(1.0, 2.0, &params, 1.0, 0.4, &[probe], &QuadratureSpec::default()).unwrap();
        assert!(rep.max_rel_deviation < 1e-6, "n={n}: {}", rep.max_rel_deviation);
        let want = (1.0 * 2f64.powf(1.5) / 0.4).powf(0.5);
        assert!((rep.required_c - want).abs() < 1e-12 * want);
    }
}

#[test]
fn supersolution_integral_agrees_with_direct_evaluation() {
    let params = FracParams::new(1, 0.5, 3.0).unwrap();
    let samples: Vec<Vec<f64>> = [-0.7, -0.1, 0.5, 0.9].iter().map(|x| vec![*x]).collect();
    let rep = barrier::g_supersolution_check(&params, &samples, &QuadratureSpec::default(), true).unwrap();
    assert!(rep.all_positive);
    assert!(rep.max_crosscheck_rel < 1e-6, "{}", rep.max_crosscheck_rel);
}

#[test]
fn barrier_rejects_nu_at_or_above_s() {
    let params = FracParams::new(1, 0.5, 3.0).unwrap();
    let spec = BarrierSpec::with_nu(0.5).unwrap();
    assert!(barrier::barrier_lower_bound_check(&spec, &params, &[vec![1.1]], &QuadratureSpec::default()).is_err());
}
