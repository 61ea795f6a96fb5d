//! Half-space eigenfunction constants `C_ν` and `C_{ν,n}`.
//!
//! `C_ν = PV ∫ (1 - z₊^ν)^{p-1} / |1 - z|^{1+ps} dz`. The part over `z < 0`
//! is exactly `1/(ps)`; the rest is folded onto `(0, 1)` by `z ↦ 1/z`.

use serde::Serialize;

use crate::kernel::{self, eval_profile_nd, eval_pv, FracParams, QuadratureSpec, ScalarField, TailModel};
use crate::quad::{self, Integral, Tolerance};
use crate::{Error, Result};

const FOLD_TOL: f64 = 1e-14;
const FOLD_LEVELS: usize = 14;

/// Exact value of `∫_{-∞}^0 (1 - z)^{-1-ps} dz`.
pub fn left_tail(s: f64, p: f64) -> f64 {
    1.0 / (p * s)
}

/// `∫_{-∞}^0 (1 - z)^{-1-ps} dz` by quadrature after `w = 1/(1 - z)`.
pub fn left_tail_numeric(s: f64, p: f64) -> Integral {
    let ps = p * s;
    quad::tanh_sinh(|w, _, _| w.powf(ps - 1.0), 0.0, 1.0, Tolerance::relative(FOLD_TOL), FOLD_LEVELS)
}

/// Exponent `ps - 1 - ν(p - 1)` produced by the fold.
fn fold_exponent(s: f64, p: f64, nu: f64) -> f64 {
    p * s - 1.0 - nu * (p - 1.0)
}

/// `ln z` from whichever of `z`, `1 - z` is known more accurately.
#[inline]
fn log_z(z: f64, one_minus_z: f64) -> f64 {
    if z < 0.5 {
        z.ln()
    } else {
        (-one_minus_z).ln_1p()
    }
}

/// `1 - z^a` given `ln z`.
#[inline]
fn one_minus_pow(lnz: f64, a: f64) -> f64 {
    -(a * lnz).exp_m1()
}

fn check_args(s: f64, p: f64, nu: f64) -> Result<()> {
    FracParams::new(1, s, p)?;
    if !(nu > 0.0 && nu <= s * (1.0 + 1e-15)) {
        return Err(Error::param(format!("ν = {nu} must lie in (0, s] with s = {s}")));
    }
    Ok(())
}

/// Folded form valid for every `ν ∈ (0, s]`:
/// `1/(ps) + ∫_0^1 (1 - z^ν)^{p-1} (1 - z)^{-1-ps} (1 - z^{ps-ν(p-1)-1}) dz`.
pub fn c_nu_formula1(s: f64, p: f64, nu: f64) -> Result<Integral> {
    check_args(s, p, nu)?;
    let ps = p * s;
    let e = fold_exponent(s, p, nu);
    let body = quad::tanh_sinh(
        |z, _, omz| {
            let lnz = log_z(z, omz);
            one_minus_pow(lnz, nu).powf(p - 1.0) * omz.powf(-1.0 - ps) * one_minus_pow(lnz, e)
        },
        0.0,
        1.0,
        Tolerance::relative(FOLD_TOL),
        FOLD_LEVELS,
    );
    finish(body, left_tail(s, p))
}

/// Folded form obtained by subtracting the degenerate profile `x₊^s`:
/// `∫_0^1 [(1-z^ν)^{p-1} - (1-z^s)^{p-1}] (1-z)^{-1-ps} (1 - z^{e}) dz
///  + ∫_0^1 (1-z^s)^{p-1} (1-z)^{-1-ps} (z^{s-1} - z^{e}) dz`, `e = ps-1-ν(p-1)`.
///
/// It equals `C_ν - C_s`, so it reproduces `C_ν` because `C_s = 0`.
pub fn c_nu_formula2(s: f64, p: f64, nu: f64) -> Result<Integral> {
    check_args(s, p, nu)?;
    let ps = p * s;
    let e = fold_exponent(s, p, nu);
    let tol = Tolerance::relative(FOLD_TOL);
    let first = quad::tanh_sinh(
        |z, _, omz| {
            let lnz = log_z(z, omz);
            let a = one_minus_pow(lnz, nu).powf(p - 1.0);
            let b = one_minus_pow(lnz, s).powf(p - 1.0);
            (a - b) * omz.powf(-1.0 - ps) * one_minus_pow(lnz, e)
        },
        0.0,
        1.0,
        tol,
        FOLD_LEVELS,
    );
    let second = quad::tanh_sinh(
        |z, _, omz| {
            // z^{s-1} - z^e = z^e (z^{s-1-e} - 1)
            let lnz = log_z(z, omz);
            let diff = (e * lnz).exp() * ((s - 1.0 - e) * lnz).exp_m1();
            one_minus_pow(lnz, s).powf(p - 1.0) * omz.powf(-1.0 - ps) * diff
        },
        0.0,
        1.0,
        tol,
        FOLD_LEVELS,
    );
    finish(first.combine(second), 0.0)
}

fn finish(body: Integral, offset: f64) -> Result<Integral> {
    if !body.is_finite() {
        return Err(Error::NonFinite("C_ν quadrature produced a non-finite value".into()));
    }
    let value = body.value + offset;
    Ok(Integral {
        value,
        l1: body.l1 + offset.abs(),
        ..body
    })
}

/// `C_ν`. Evaluated by the first folded form, which is valid on all of `(0, s]`.
pub fn c_nu(s: f64, p: f64, nu: f64) -> Result<f64> {
    let r = c_nu_formula1(s, p, nu)?;
    if !r.converged {
        return Err(Error::NonFinite(format!(
            "C_ν quadrature did not converge (s={s}, p={p}, ν={nu}, error {:.3e})",
            r.error
        )));
    }
    Ok(r.value)
}

/// The exponent `(ps - 1)/(p - 1)` splitting the two sign arguments for `C_ν`.
pub fn nu_threshold(s: f64, p: f64) -> f64 {
    (p * s - 1.0) / (p - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenConstants {
    pub nu: f64,
    pub c_nu: f64,
    pub c_nu_n: f64,
    /// `∫_0^∞ t^{n-2} (1 + t²)^{-(n+ps)/2} dt`
    pub angular_factor: f64,
    /// Area `ω_{n-2}` of the unit (n-2)-sphere.
    pub sphere_area_factor: f64,
}

/// `C_{ν,n} = C_ν · angular_factor · ω_{n-2}`.
pub fn c_nu_n(s: f64, p: f64, nu: f64, n: usize) -> Result<EigenConstants> {
    if n < 2 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "C_{ν,n} is defined for n ≥ 2",
        });
    }
    let c = c_nu(s, p, nu)?;
    let angular_factor = kernel::reduced_kernel_integral(n, p * s).value;
    let sphere_area_factor = kernel::sphere_area(n - 2);
    Ok(EigenConstants {
        nu,
        c_nu: c,
        c_nu_n: c * angular_factor * sphere_area_factor,
        angular_factor,
        sphere_area_factor,
    })
}

/// The field `x ↦ (x)₊^ν` in 1D.
pub fn power_profile(nu: f64) -> ScalarField {
    let tail = TailModel {
        amplitude: 1.0,
        exponent: nu,
        radius: 0.0,
    };
    ScalarField::from_fn_1d(tail, move |x| if x > 0.0 { x.powf(nu) } else { 0.0 }).with_breakpoints(vec![0.0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub x: f64,
    pub computed: f64,
    pub expected: f64,
    pub rel_deviation: f64,
    pub abs_deviation: f64,
    pub error_estimate: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenReport {
    pub n: usize,
    pub s: f64,
    pub p: f64,
    pub nu: f64,
    /// `C_ν` for n = 1, `C_{ν,n}` otherwise.
    pub constant: f64,
    pub probes: Vec<ProbeRecord>,
    pub max_rel_deviation: f64,
    pub max_abs_deviation: f64,
    /// `ν = s`: both sides vanish and only absolute deviations are meaningful.
    pub degenerate: bool,
    pub all_evaluated: bool,
}

/// Compares the operator of `x₊^ν` (resp. `(x_n)₊^ν`) with the closed form at each probe.
pub fn verify_halfspace_eigen(params: &FracParams, nu: f64, probes: &[f64], quad: &QuadratureSpec) -> Result<EigenReport> {
    let (s, p) = (params.s(), params.p());
    check_args(s, p, nu)?;
    if probes.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::param("probe points must be positive and finite"));
    }
    let degenerate = (nu - s).abs() <= 1e-12 * s;
    let constant = if params.n() == 1 {
        c_nu(s, p, nu)?
    } else {
        c_nu_n(s, p, nu, params.n())?.c_nu_n
    } * params.normalization();
    let field = power_profile(nu);
    let power = (p - 1.0) * nu - params.ps();
    let records: Vec<ProbeRecord> = probes
        .iter()
        .map(|&x| {
            let expected = constant * x.powf(power);
            let eval = if params.n() == 1 {
                eval_pv(&field, &[x], params, quad)
            } else {
                eval_profile_nd(&field, x, params, quad)
            };
            match eval {
                Ok(r) => {
                    let abs = (r.value - expected).abs();
                    ProbeRecord {
                        x,
                        computed: r.value,
                        expected,
                        rel_deviation: if expected != 0.0 { abs / expected.abs() } else { f64::INFINITY },
                        abs_deviation: abs,
                        error_estimate: r.error_estimate,
                        failure: (!r.converged).then(|| "quadrature did not converge".to_string()),
                    }
                }
                Err(e) => ProbeRecord {
                    x,
                    computed: f64::NAN,
                    expected,
                    rel_deviation: f64::INFINITY,
                    abs_deviation: f64::INFINITY,
                    error_estimate: f64::INFINITY,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let max_rel_deviation = records.iter().map(|r| r.rel_deviation).fold(0.0, f64::max);
    let max_abs_deviation = records.iter().map(|r| r.abs_deviation).fold(0.0, f64::max);
    Ok(EigenReport {
        n: params.n(),
        s,
        p,
        nu,
        constant,
        all_evaluated: records.iter().all(|r| r.failure.is_none()),
        probes: records,
        max_rel_deviation,
        max_abs_deviation,
        degenerate,
    })
}
