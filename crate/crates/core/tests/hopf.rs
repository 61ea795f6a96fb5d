use fracplap::hopf::{self, fields, hypothesis_gate, split_i_ii, HalfSpaceSetup, RegionSet};
use fracplap::{FracParams, QuadratureSpec, ScalarField, TailModel};

fn params() -> FracParams {
    FracParams::new(2, 0.5, 3.0).unwrap()
}

fn setup(u: ScalarField) -> HalfSpaceSetup {
    HalfSpaceSetup::new(0.0, params(), u, ScalarField::zero(2)).unwrap()
}

#[test]
fn even_field_gives_a_degenerate_scan() {
    let deltas = [2f64.powi(-4), 2f64.powi(-6)];
    let rep = hopf::delta_scaling_scan(&setup(fields::even(2)), &deltas, 0.1, 50.0, &QuadratureSpec::default(), false).unwrap();
    assert!(rep.degenerate);
}

#[test]
fn split_is_consistent_and_d1_is_negative() {
    let s = setup(fields::flattened(2));
    for k in [4, 6] {
        let delta = 2f64.powi(-k);
        let regions = RegionSet::new(delta, RegionSet::DEFAULT_ETA, RegionSet::DEFAULT_R).unwrap();
        let rep = split_i_ii(&s, &[delta, 0.0], &regions, &QuadratureSpec::default(), true).unwrap();
        assert!(rep.converged);
        let rem = rep.remainder.unwrap().abs();
        assert!(
            rem <= 1e-9 * (rep.i_total.abs() + rep.ii_total.abs()) + rep.error_estimate + rep.direct_error.unwrap(),
            "δ={delta}: {rem:e}"
        );
        assert!(rep.i_regions.d1 < 0.0);
        assert!(rep.i_total < 0.0);
    }
}

#[test]
fn split_rejects_off_axis_points() {
    let s = setup(fields::flattened(2));
    let regions = RegionSet::new(0.05, 0.1, 50.0).unwrap();
    assert!(split_i_ii(&s, &[0.05, 0.3], &regions, &QuadratureSpec::default(), false).is_err());
}

#[test]
fn setup_requires_p_at_least_three() {
    let p2 = FracParams::new(2, 0.5, 2.5).unwrap();
    assert!(HalfSpaceSetup::new(0.0, p2, fields::flattened(2), ScalarField::zero(2)).is_err());
}

#[test]
fn normal_derivatives_of_the_pinned_fields() {
    let mono = hopf::w_lambda(&fields::monotone(2), 0.0);
    let flat = hopf::w_lambda(&fields::flattened(2), 0.0);
    for k in 0..10 {
        let b = [0.0, -0.9 + 0.2 * k as f64];
        assert!(hopf::normal_derivative(&mono, &b, 1e-4).unwrap() < 0.0);
        assert!(hopf::normal_derivative(&flat, &b, 1e-4).unwrap().abs() < 1e-6);
    }
}

#[test]
fn gate_detects_a_singular_coefficient() {
    let zero = hypothesis_gate(&setup(fields::flattened(2)));
    assert!(zero.conforming);
    let c = ScalarField::new(2, TailModel::bounded(1.0), |x: &[f64]| 1.0 / (x[0] * x[0]));
    let bad = HalfSpaceSetup::new(0.0, params(), fields::flattened(2), c).unwrap();
    assert!(!hypothesis_gate(&bad).conforming);
    let mild = ScalarField::new(2, TailModel::bounded(1.0), |x: &[f64]| 1.0 / x[0].abs());
    let ok = HalfSpaceSetup::new(0.0, params(), fields::flattened(2), mild).unwrap();
    assert!(hypothesis_gate(&ok).conforming);
}
