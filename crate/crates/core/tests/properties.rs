mod common;

use common::{agrees, Bumps};
use fracplap::hopf::{self, fields, kernel_difference, reflect, RegionSet};
use fracplap::kernel::{eval_pv, eval_symmetrized, signed_power};
use fracplap::{FracParams, QuadratureSpec, ScalarField, TailModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn signed_power_is_odd_and_monotone(t in -50.0f64..50.0, d in 0.0f64..5.0, p in 1.2f64..6.0) {
        let a = signed_power(t, p).unwrap();
        prop_assert_eq!(signed_power(-t, p).unwrap(), -a);
        prop_assert!(signed_power(t + d, p).unwrap() >= a);
    }

    #[test]
    fn reflection_is_an_involution(x0 in -10.0f64..10.0, x1 in -10.0f64..10.0, lam in -3.0f64..3.0) {
        let x = [x0, x1];
        let back = reflect(&reflect(&x, lam), lam);
        prop_assert!((back[0] - x0).abs() <= 1e-12 * (1.0 + x0.abs() + lam.abs()));
        prop_assert_eq!(back[1], x1);
    }

    #[test]
    fn kernel_difference_is_positive_in_the_half_space(
        xb in 0.01f64..3.0, xt in -3.0f64..3.0, y0 in 0.01f64..3.0, yt in -3.0f64..3.0,
        lam in -1.0f64..1.0, s in 0.1f64..0.9, p in 2.0f64..4.0,
    ) {
        let params = FracParams::new(2, s, p).unwrap();
        let x_bar = [lam + xb, xt];
        let y = [lam + y0, yt];
        prop_assume!((xb - y0).abs() + (xt - yt).abs() > 1e-6);
        prop_assert!(kernel_difference(&x_bar, &y, lam, &params) > 0.0);
    }

    #[test]
    fn regions_partition_the_half_ball(
        y0 in 1e-6f64..60.0, y1 in -60.0f64..60.0, k in 4i32..10,
    ) {
        let regions = RegionSet::new(2f64.powi(-k), RegionSet::DEFAULT_ETA, RegionSet::DEFAULT_R).unwrap();
        let y = [y0, y1];
        if regions.in_d1(&y) {
            prop_assert!(regions.in_d2(&y));
        }
        prop_assert!(!(regions.in_d3(&y) && regions.in_d4(&y)));
        let members = [
            regions.in_d3(&y),
            regions.in_d2(&y) && !regions.in_d3(&y),
            regions.in_d4(&y),
            regions.in_d5(&y),
            regions.in_outer(&y),
        ];
        prop_assert_eq!(members.iter().filter(|&&m| m).count(), 1, "y = {:?}", y);
        prop_assert!(regions.classify(&y).is_some());
    }
}

#[test]
fn w_lambda_is_antisymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for u in [fields::flattened(2), fields::monotone(2), fields::even(2)] {
        let lam = rng.gen_range(-0.5..0.5);
        let w = hopf::w_lambda(&u, lam);
        for _ in 0..1_000_000 / 3 {
            let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let a = w.value(&x);
            let b = w.value(&reflect(&x, lam));
            assert!((a + b).abs() <= 1e-14 * (1.0 + a.abs()), "x = {x:?}: {a} vs {b}");
        }
    }
}

#[test]
fn pinned_fields_are_odd_with_positive_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for u in [fields::flattened(2), fields::monotone(2)] {
        let w = hopf::w_lambda(&u, 0.0);
        for _ in 0..10_000 {
            let x = [rng.gen_range(0.01..4.0), rng.gen_range(-4.0..4.0)];
            assert!(w.value(&x) > 0.0 || u.value(&x).abs() < 1e-300);
        }
    }
}

#[test]
fn operator_is_positive_at_a_strict_global_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let quad = QuadratureSpec::default();
    for _ in 0..20 {
        let s = rng.gen_range(0.2..0.8);
        let p = rng.gen_range(2.0..4.0);
        let c = rng.gen_range(-1.0..1.0);
        let w = rng.gen_range(0.3..2.0);
        let params = FracParams::new(1, s, p).unwrap();
        let u = ScalarField::from_fn_1d(TailModel::bounded(1.0), move |x| (-((x - c) / w).powi(2)).exp());
        let v = eval_pv(&u, &[c], &params, &quad).unwrap();
        assert!(v.value > v.error_estimate, "s={s} p={p}: {}", v.value);
    }
}

#[test]
fn invariances_hold_across_seeds() {
    let tol = 1e-9;
    let quad = QuadratureSpec::default().with_rel_tol(tol);
    for seed in [21u64, 22] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..25 {
            let b = Bumps::random(&mut rng);
            let s = rng.gen_range(0.2..0.8);
            let p = rng.gen_range(2.0..4.0);
            let x = rng.gen_range(-1.0..1.0);
            let params = FracParams::new(1, s, p).unwrap();
            let smooth = b.field_with_derivatives();
            let plain = b.field();
            let base = eval_pv(&smooth, &[x], &params, &quad).unwrap();
            let raw = eval_pv(&plain, &[x], &params, &quad).unwrap();
            assert!(
                agrees(&raw, &base, tol),
                "seed {seed}: taylor core {} vs plain {}",
                base.value,
                raw.value
            );
            let sym = eval_symmetrized(&plain, &[x], &params, &quad).unwrap();
            assert!(
                agrees(&sym, &base, tol),
                "seed {seed}: symmetrized {} vs pv {}",
                sym.value,
                base.value
            );
        }
    }
}
