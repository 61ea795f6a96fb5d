//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use std::io::Write;

use common::{agrees, agrees_values, interp, p0_reference, Bumps};
use fracplap::barrier::{self, BarrierSpec};
use fracplap::closed_forms::{self, c_nu, c_nu_n, nu_threshold, power_profile};
use fracplap::hopf::{self, fields, HalfSpaceSetup, RegionSet};
use fracplap::kernel::{eval_profile_nd, eval_pv, eval_symmetrized, reduced_kernel_integral};
use fracplap::solver::{self, Domain1D, GradedGrid, SolveOptions};
use fracplap::{FracParams, QuadratureSpec, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S_GRID: [f64; 3] = [0.3, 0.5, 0.7];
const P_GRID: [f64; 2] = [3.0, 4.0];

fn report(id: u32, name: &str, passed: bool, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{verdict}] criterion {id:>2} {name}: {detail}");
    let _ = out.flush();
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn sp_grid() -> impl Iterator<Item = (f64, f64)> {
    S_GRID.into_iter().flat_map(|s| P_GRID.into_iter().map(move |p| (s, p)))
}

fn nu_grid(s: f64) -> [f64; 3] {
    [0.3 * s, 0.6 * s, 0.9 * s]
}

#[test]
fn criterion_01_eigen_identity() {
    let started = std::time::Instant::now();
    let quad = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    let mut all_ok = true;
    for (s, p) in sp_grid() {
        let params = FracParams::new(1, s, p).unwrap();
        for nu in nu_grid(s) {
            let rep = closed_forms::verify_halfspace_eigen(&params, nu, &[0.5, 1.0, 2.0], &quad).unwrap();
            all_ok &= rep.all_evaluated;
            worst = worst.max(rep.max_rel_deviation);
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        1,
        "eigen identity",
        all_ok && worst < 1e-3 && secs < 60.0,
        &format!("max rel deviation {worst:.3e} over 18 cases in {secs:.1}s"),
    );
}

#[test]
fn criterion_02_degenerate_eigenvalue() {
    let worst = sp_grid().map(|(s, p)| c_nu(s, p, s).unwrap().abs()).fold(0.0, f64::max);
    report(2, "degenerate eigenvalue", worst < 1e-6, &format!("max |C_s| {worst:.3e}"));
}

#[test]
fn criterion_03_left_tail() {
    let mut worst: f64 = 0.0;
    for (s, p) in sp_grid() {
        let exact = 1.0 / (p * s);
        let closed = closed_forms::left_tail(s, p);
        let numeric = closed_forms::left_tail_numeric(s, p).value;
        worst = worst.max((closed - exact).abs() / exact).max((numeric - exact).abs() / exact);
    }
    report(
        3,
        "left tail",
        worst <= 4.0 * f64::EPSILON,
        &format!("max rel deviation {worst:.3e}"),
    );
}

#[test]
fn criterion_04_positivity() {
    let mut cases = 0;
    let mut below = 0;
    let mut above = 0;
    let mut min = f64::INFINITY;
    for (s, p) in sp_grid() {
        let th = nu_threshold(s, p);
        let mut nus = nu_grid(s).to_vec();
        if th > 0.0 && th < s {
            nus.extend([0.5 * th, th, 0.5 * (th + s)]);
        }
        for nu in nus {
            let c = c_nu(s, p, nu).unwrap();
            min = min.min(c);
            cases += 1;
            if th > 0.0 && th < s {
                if nu < th {
                    below += 1;
                } else if nu > th {
                    above += 1;
                }
            }
        }
    }
    report(
        4,
        "positivity",
        min > 0.0 && below > 0 && above > 0,
        &format!("min C_nu {min:.4e} over {cases} cases ({below} below, {above} above threshold)"),
    );
}

#[test]
fn criterion_05_three_dimensional_profile() {
    let mut angular_worst: f64 = 0.0;
    for (s, p) in sp_grid() {
        let ps = p * s;
        let a = reduced_kernel_integral(3, ps).value;
        angular_worst = angular_worst.max((a * (1.0 + ps) - 1.0).abs());
    }
    let (s, p, nu) = (0.5, 3.0, 0.25);
    let params = FracParams::new(3, s, p).unwrap();
    let k = c_nu_n(s, p, nu, 3).unwrap();
    let quad = QuadratureSpec::default();
    let profile = power_profile(nu);
    let mut eval_worst: f64 = 0.0;
    for x in [0.5, 1.0, 2.0] {
        let got = eval_profile_nd(&profile, x, &params, &quad).unwrap().value;
        let want = k.c_nu_n * x.powf((p - 1.0) * nu - p * s);
        eval_worst = eval_worst.max((got - want).abs() / want.abs());
    }
    report(
        5,
        "n = 3 profile",
        angular_worst < 1e-12 && eval_worst < 1e-3,
        &format!("angular factor rel {angular_worst:.2e}, operator rel {eval_worst:.3e}"),
    );
}

#[test]
fn criterion_06_barrier_scaled_limit() {
    let params = FracParams::new(2, 0.5, 3.0).unwrap();
    let spec = BarrierSpec::with_nu(0.25).unwrap();
    let ds: Vec<f64> = (2..=8).map(|k| 2f64.powi(-k)).collect();
    let rep = barrier::scaled_limit_scan(&spec, &params, &ds, &QuadratureSpec::default()).unwrap();
    let target = 2f64.powf(2.0 * 0.25) * c_nu_n(0.5, 3.0, 0.25, 2).unwrap().c_nu_n;
    let rel = (rep.extrapolated - target).abs() / target;
    report(
        6,
        "barrier scaled limit",
        rel < 0.05 && (rep.target - target).abs() <= 1e-12 * target,
        &format!("extrapolated {:.6} vs {target:.6} (rel {rel:.2e})", rep.extrapolated),
    );
}

#[test]
fn criterion_07_supersolution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [1usize, 2] {
        let params = FracParams::new(n, 0.5, 3.0).unwrap();
        let samples: Vec<Vec<f64>> = (0..20)
            .map(|_| loop {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if x.iter().map(|v| v * v).sum::<f64>() < 0.98 {
                    break x;
                }
            })
            .collect();
        let rep = barrier::g_supersolution_check(&params, &samples, &QuadratureSpec::default(), false).unwrap();
        ok &= rep.all_positive && rep.min > 0.0;
        detail.push(format!("n={n} min {:.4}", rep.min));
    }
    report(7, "supersolution positivity", ok, &detail.join(", "));
}

#[test]
fn criterion_08_invariance_suite() {
    let tol = 1e-9;
    let quad = QuadratureSpec::default().with_rel_tol(tol);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut fails = [0usize; 4];
    for _ in 0..50 {
        let b = Bumps::random(&mut rng);
        let s = rng.gen_range(0.2..0.8);
        let p = rng.gen_range(2.0..4.0);
        let x = rng.gen_range(-1.0..1.0);
        let lam: f64 = rng.gen_range(0.2..5.0);
        let r: f64 = rng.gen_range(0.3..3.0);
        let a = rng.gen_range(-2.0..2.0);
        let params = FracParams::new(1, s, p).unwrap();
        let u = b.field_with_derivatives();
        let base = eval_pv(&u, &[x], &params, &quad).unwrap();

        let hom = eval_pv(&u.scaled(lam), &[x], &params, &quad).unwrap();
        if !agrees(&hom, &base.scaled(lam.powf(p - 1.0)), tol) {
            fails[0] += 1;
        }
        let dil = eval_pv(&u.dilated(r), &[r * x], &params, &quad).unwrap();
        let f = r.powf(-params.ps());
        if !agrees_values(dil.value, dil.error_estimate, f * base.value, f * base.error_estimate, tol) {
            fails[1] += 1;
        }
        let tr = eval_pv(&u.translated(&[a]), &[x + a], &params, &quad).unwrap();
        if !agrees(&tr, &base, tol) {
            fails[2] += 1;
        }
        let sym = eval_symmetrized(&u, &[x], &params, &quad).unwrap();
        if !agrees(&sym, &base, tol) {
            fails[3] += 1;
        }
    }
    report(
        8,
        "operator invariance",
        fails.iter().all(|&k| k == 0),
        &format!(
            "failures of 50: homogeneity {}, rescaling {}, translation {}, pv vs symmetrized {}",
            fails[0], fails[1], fails[2], fails[3]
        ),
    );
}

#[test]
fn criterion_09_comparison_principle() {
    let params = FracParams::new(1, 0.5, 3.0).unwrap();
    let grid = GradedGrid::default_for(Domain1D::new(-1.0, 1.0).unwrap(), 16).unwrap();
    let op = solver::DiscreteOperator::new(&grid, &params, &QuadratureSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut held = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let base = Bumps::random(&mut rng);
        let lift = Bumps {
            amp: [rng.gen_range(0.1..2.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)],
            ..Bumps::random(&mut rng)
        };
        let offset = rng.gen_range(-1.0..1.0);
        let f1: Vec<f64> = grid.interior().iter().map(|&t| offset + base.eval(t).0).collect();
        let f2: Vec<f64> = grid.interior().iter().zip(&f1).map(|(&t, v)| v + lift.eval(t).0).collect();
        let u = solver::solve_with(&op, &f1, &SolveOptions::default()).unwrap();
        let v = solver::solve_with(&op, &f2, &SolveOptions::default()).unwrap();
        let tol = u.tolerance.max(v.tolerance);
        let rep = solver::comparison_check(&u, &v, &op, tol).unwrap();
        worst = worst.max(rep.max_violation);
        if u.converged && v.converged && rep.holds {
            held += 1;
        }
    }
    report(
        9,
        "comparison principle",
        held == 20,
        &format!("{held}/20 ordered pairs, max(u - v) {worst:.3e}"),
    );
}

#[test]
fn criterion_10_boundary_exponent() {
    let quad = QuadratureSpec::default();
    let opts = SolveOptions::default();
    let grid = GradedGrid::default_for(Domain1D::new(-1.0, 1.0).unwrap(), 32).unwrap();
    let window = fracplap::cli::innermost_window(&grid);
    let one = ScalarField::constant(1, 1.0);

    let s = 0.5;
    let lin = solver::solve(&grid, &one, &FracParams::new(1, s, 2.0).unwrap(), &quad, &opts).unwrap();
    let lin_fit = solver::fit_boundary_exponent(&lin, window).unwrap();
    let (centres, reference) = p0_reference(4 * grid.nodes().len(), s, 1.0);
    let ref_sup = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ref_dev = grid
        .nodes()
        .iter()
        .zip(&lin.values)
        .filter(|(x, _)| 1.0 - x.abs() >= 0.05)
        .map(|(x, v)| (v - interp(&centres, &reference, *x)).abs())
        .fold(0.0, f64::max)
        / ref_sup;
    let lin_ok = lin.converged && (lin_fit.nu_hat - s).abs() <= 0.05 && ref_dev < 0.02;

    let nl = solver::solve(&grid, &one, &FracParams::new(1, s, 3.0).unwrap(), &quad, &opts).unwrap();
    let nl_fit = solver::fit_boundary_exponent(&nl, window).unwrap();
    let nl_ok = nl.converged && nl_fit.nu_hat > 0.0 && nl_fit.nu_hat <= 0.55 && nl_fit.r_squared > 0.99;

    report(
        10,
        "boundary exponent",
        lin_ok && nl_ok,
        &format!(
            "p=2 nu_hat {:.4} (reference deviation {ref_dev:.2e}); p=3 nu_hat {:.4}, r² {:.5}",
            lin_fit.nu_hat, nl_fit.nu_hat, nl_fit.r_squared
        ),
    );
}

fn hopf_setup(u: ScalarField) -> HalfSpaceSetup {
    HalfSpaceSetup::new(0.0, FracParams::new(2, 0.5, 3.0).unwrap(), u, ScalarField::zero(2)).unwrap()
}

#[test]
fn criterion_11_hopf_delta_scaling() {
    let setup = hopf_setup(fields::flattened(2));
    let deltas: Vec<f64> = (4..=9).map(|k| 2f64.powi(-k)).collect();
    let rep = hopf::delta_scaling_scan(
        &setup,
        &deltas,
        RegionSet::DEFAULT_ETA,
        RegionSet::DEFAULT_R,
        &QuadratureSpec::default(),
        true,
    )
    .unwrap();
    let (s, p): (f64, f64) = (0.5, 3.0);
    let target = (1.0 + p - p * s).min(2.0) - 0.2;
    let slope = rep.ii_slope.unwrap_or(f64::NAN);
    let slope_ok = slope >= target;
    let i_ok = rep.c_fit > 0.0
        && rep
            .records
            .iter()
            .all(|r| r.i_total < 0.0 && r.i_total.abs() >= rep.c_fit * r.delta);
    let combined_ok = rep.records.iter().all(|r| r.combined <= -(rep.c_fit / 4.0) * r.delta);
    let consistent = rep.records.iter().all(|r| r.remainder.is_some_and(|x| x.abs() <= 1e-8));
    report(
        11,
        "hopf delta scaling",
        slope_ok && i_ok && combined_ok && consistent && rep.converged && !rep.degenerate,
        &format!(
            "II slope {slope:.3} (≥ {target:.2}), c = {:.4}, combined ≤ -(c/4)δ: {combined_ok}, split consistent: {consistent}",
            rep.c_fit
        ),
    );
}

#[test]
fn criterion_12_hopf_normal_derivative() {
    let setup = hopf_setup(fields::monotone(2));
    let w = hopf::w_lambda(setup.u(), setup.lambda());
    let values: Vec<f64> = (0..10)
        .map(|k| hopf::normal_derivative(&w, &[setup.lambda(), -0.9 + 0.2 * k as f64], 1e-4).unwrap())
        .collect();
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    report(
        12,
        "hopf normal derivative",
        values.iter().all(|&v| v < 0.0),
        &format!("max ∂w/∂ν {max:.4e} over 10 points"),
    );
}
