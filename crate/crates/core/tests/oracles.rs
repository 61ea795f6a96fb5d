//! Closed forms and evaluators against quadratures written from scratch here.

mod common;

use common::{gauss5, graded_to_zero};
use fracplap::barrier::{g_integral, g_profile_value};
use fracplap::closed_forms::{c_nu, c_nu_formula1, c_nu_formula2, c_nu_n, nu_threshold, power_profile};
use fracplap::kernel::{eval_pv, eval_symmetrized, reduced_kernel_integral, signed_power};
use fracplap::{FracParams, QuadratureSpec, ScalarField, TailModel};
use statrs::function::gamma::gamma;

fn spow(t: f64, p: f64) -> f64 {
    t.abs().powf(p - 2.0) * t
}

/// `∫_a^b f` with dyadic grading toward b.
fn graded_to_right<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    graded_to_zero(|t| f(b - t), b - a, 80, 4)
}

/// Raw principal value of the operator of `x₊^ν` at x = 1, paired around 1.
fn raw_c_nu(s: f64, p: f64, nu: f64) -> f64 {
    let k = 1.0 + p * s;
    // 1 - (1 + h)^ν without cancellation
    let drop = |h: f64| if h > -1.0 { -(nu * h.ln_1p()).exp_m1() } else { 1.0 };
    let inner = |r: f64| (spow(drop(r), p) + spow(drop(-r), p)) * r.powf(-k);
    let near = graded_to_zero(inner, 0.5, 80, 4) + graded_to_right(inner, 0.5, 1.0);
    // r = 1/t on (1, ∞)
    let outer = |t: f64| (spow(drop(1.0 / t), p) + 1.0) * t.powf(k - 2.0);
    near + graded_to_zero(outer, 1.0, 400, 4)
}

#[test]
fn c_nu_matches_raw_principal_value() {
    for s in [0.3, 0.5, 0.7] {
        for p in [3.0, 4.0] {
            for nu in [0.3 * s, 0.5 * s, 0.6 * s, 0.9 * s] {
                let raw = raw_c_nu(s, p, nu);
                let c = c_nu(s, p, nu).unwrap();
                assert!((c - raw).abs() <= 1e-6 * raw.abs(), "s={s} p={p} nu={nu}: {c} vs raw {raw}");
                for f in [c_nu_formula1(s, p, nu), c_nu_formula2(s, p, nu)].into_iter().flatten() {
                    assert!(
                        (f.value - raw).abs() <= 1e-6 * raw.abs() + f.error,
                        "s={s} p={p} nu={nu}: {} vs {raw}",
                        f.value
                    );
                }
            }
        }
    }
}

#[test]
fn c_nu_is_continuous_across_the_threshold() {
    for (s, p) in [(0.5, 3.0), (0.7, 3.0), (0.5, 4.0), (0.7, 4.0), (0.3, 4.0)] {
        let th = nu_threshold(s, p);
        assert!(th > 0.0 && th < s);
        let h = 1e-7;
        let (lo, mid, hi) = (c_nu(s, p, th - h).unwrap(), c_nu(s, p, th).unwrap(), c_nu(s, p, th + h).unwrap());
        assert!((lo - mid).abs() < 1e-6 && (hi - mid).abs() < 1e-6, "s={s} p={p}: {lo} {mid} {hi}");
    }
}

#[test]
fn angular_factors_match_gamma_closed_forms() {
    for ps in [0.6, 0.9, 1.5, 2.1, 2.8] {
        let three = reduced_kernel_integral(3, ps).value;
        assert!((three - 1.0 / (1.0 + ps)).abs() < 1e-12);
        let two = reduced_kernel_integral(2, ps).value;
        let want = 0.5 * std::f64::consts::PI.sqrt() * gamma(0.5 * (1.0 + ps)) / gamma(0.5 * (2.0 + ps));
        assert!((two - want).abs() < 1e-10 * want, "ps={ps}: {two} vs {want}");
    }
}

#[test]
fn planar_eigen_profile_by_direct_evaluation() {
    let (s, p, nu) = (0.5, 3.0, 0.25);
    let params = FracParams::new(2, s, p).unwrap();
    let k = c_nu_n(s, p, nu, 2).unwrap().c_nu_n;
    let tail = TailModel::new(1.0, nu, 0.0).unwrap();
    let field = ScalarField::new(2, tail, move |x: &[f64]| if x[1] > 0.0 { x[1].powf(nu) } else { 0.0 });
    let quad = QuadratureSpec::default().with_rel_tol(1e-6);
    for x2 in [0.5, 1.0] {
        let got = eval_symmetrized(&field, &[0.3, x2], &params, &quad).unwrap();
        let want = k * x2.powf((p - 1.0) * nu - p * s);
        assert!((got.value - want).abs() <= 1e-3 * want, "x2={x2}: {} vs {want}", got.value);
    }
}

#[test]
fn power_profile_homogeneity_of_the_operator() {
    let (s, p, nu) = (0.5, 3.0, 0.25);
    let params = FracParams::new(1, s, p).unwrap();
    let c = c_nu(s, p, nu).unwrap();
    let got = eval_pv(&power_profile(nu), &[2.0], &params, &QuadratureSpec::default()).unwrap();
    let want = c * 2f64.powf((p - 1.0) * nu - p * s);
    assert!(
        (got.value - want).abs() <= 1e-8 * want + got.error_estimate,
        "{} vs {want}",
        got.value
    );
}

/// Principal value of the operator of the 1D profile g at x, paired around x,
/// with the constant far field integrated in closed form.
fn raw_g_operator(x: f64, s: f64, p: f64) -> f64 {
    let k = 1.0 + p * s;
    let g = |y: f64| g_profile_value(y, s);
    let gx = g(x);
    let a = 2.0 - x;
    // g(x) - g(y), exact in the power branch
    let diff = |y: f64| {
        if y > -3.0 && y < 2.0 {
            -a.powf(s) * (s * ((x - y) / a).ln_1p()).exp_m1()
        } else {
            gx - g(y)
        }
    };
    let f = |r: f64| (spow(diff(x + r), p) + spow(diff(x - r), p)) * r.powf(-k);
    // r = 2 - x: power singularity of g(x + r); r = x + 3: kink of g(x - r)
    let (k1, k2, far) = (2.0 - x, x + 3.0, 10.0);
    let mut pts = [0.5 * k1.min(k2), k1, k2, far];
    pts.sort_by(f64::total_cmp);
    let mut body = graded_to_zero(f, pts[0], 80, 4);
    for w in pts.windows(2) {
        body += if w[1] == k1 {
            graded_to_right(f, w[0], w[1])
        } else {
            gauss5(f, w[0], w[1], 400)
        };
    }
    let tail = (spow(gx, p) + spow(gx - g(-100.0), p)) * far.powf(-p * s) / (p * s);
    body + tail
}

#[test]
fn supersolution_integral_matches_raw_quadrature() {
    let (s, p) = (0.5, 3.0);
    let params = FracParams::new(1, s, p).unwrap();
    for x in [-0.9, -0.4, 0.0, 0.35, 0.8] {
        let got = g_integral(x, &params).unwrap();
        let raw = raw_g_operator(x, s, p);
        assert!((got - raw).abs() <= 1e-9 * raw.abs(), "x={x}: {got} vs {raw}");
        assert!(raw > 0.0);
    }
}

#[test]
fn signed_power_matches_definition() {
    for p in [2.0, 2.5, 3.0, 4.0] {
        for t in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            let (got, want) = (signed_power(t, p).unwrap(), spow(t, p));
            assert!((got - want).abs() <= 1e-15 * want.abs(), "p={p} t={t}");
            assert_eq!(signed_power(-t, p).unwrap(), -got);
        }
    }
}
