//! Barrier and supersolution constructions near a boundary.

use serde::Serialize;

use crate::closed_forms::c_nu_n;
use crate::kernel::{
    eval_profile_nd, eval_pv, eval_symmetrized, profile_factor, spow, EvalResult, FracParams, Interface, QuadratureSpec, ScalarField,
    TailModel,
};
use crate::quad::{self, Tolerance};
use crate::{Error, Result};

/// Parameters of the barrier `A = C φ + ξ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BarrierSpec {
    pub nu: f64,
    /// Amplitude on φ.
    pub c: f64,
    /// Thickness ε of the shell `B_{1+ε} \ B_1`.
    pub epsilon_shell: f64,
    /// Claimed lower-bound constant C₀.
    pub c0: f64,
}

impl BarrierSpec {
    pub const DEFAULT_EPSILON: f64 = 0.5;

    pub fn new(nu: f64, c: f64, epsilon_shell: f64, c0: f64) -> Result<Self> {
        if !(nu > 0.0) || !(c > 0.0) || !(epsilon_shell > 0.0) || !(c0 >= 0.0) {
            return Err(Error::param("barrier needs ν > 0, C > 0, ε > 0, C₀ ≥ 0"));
        }
        Ok(BarrierSpec { nu, c, epsilon_shell, c0 })
    }

    pub fn with_nu(nu: f64) -> Result<Self> {
        BarrierSpec::new(nu, 1.0, Self::DEFAULT_EPSILON, 0.0)
    }

    pub fn cutoff_inner(&self) -> f64 {
        1.0
    }

    pub fn cutoff_outer(&self) -> f64 {
        1.0 + self.epsilon_shell
    }

    fn check_against(&self, params: &FracParams) -> Result<()> {
        if !(self.nu < params.s()) {
            return Err(Error::pre(format!("ν = {} must be < s = {}", self.nu, params.s())));
        }
        Ok(())
    }
}

/// `(|x|² - 1)₊^ν`.
pub fn phi(x: &[f64], nu: f64) -> f64 {
    let q = x.iter().map(|v| v * v).sum::<f64>() - 1.0;
    if q > 0.0 {
        q.powf(nu)
    } else {
        0.0
    }
}

/// φ as a field. It grows like `|x|^{2ν}`, so it belongs to the tail class
/// only when `2ν(p - 1) < ps`; evaluators reject it otherwise.
pub fn phi_field(n: usize, nu: f64) -> ScalarField {
    let tail = TailModel {
        amplitude: 1.0,
        exponent: 2.0 * nu,
        radius: 0.0,
    };
    let mut f = ScalarField::new(n, tail, move |x: &[f64]| phi(x, nu)).with_interfaces(vec![Interface::Sphere {
        center: vec![0.0; n],
        radius: 1.0,
    }]);
    if n == 1 {
        f = f.with_breakpoints(vec![-1.0, 1.0]);
    }
    f
}

fn bump(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `e^{-1/t}` mollified.
pub fn smooth_step(t: f64) -> f64 {
    let a = bump(t);
    let b = bump(1.0 - t);
    if a + b == 0.0 {
        if t >= 1.0 {
            1.0
        } else {
            0.0
        }
    } else {
        a / (a + b)
    }
}

/// Sup of `|smooth_step'|`, attained at `t = 1/2`.
pub const SMOOTH_STEP_SLOPE: f64 = 2.0;

/// The cutoff ξ: 0 on `B_1`, 1 outside `B_{1+ε}`.
pub fn cutoff(x: &[f64], epsilon: f64) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    smooth_step((r - 1.0) / epsilon)
}

/// `sup |∇ξ| = 2/ε`.
pub fn cutoff_gradient_bound(epsilon: f64) -> f64 {
    SMOOTH_STEP_SLOPE / epsilon
}

/// `A = C φ + ξ`.
pub fn a_field(spec: &BarrierSpec, n: usize) -> ScalarField {
    let BarrierSpec { nu, c, epsilon_shell, .. } = *spec;
    let tail = TailModel {
        amplitude: c + 1.0,
        exponent: 2.0 * nu,
        radius: 0.0,
    };
    ScalarField::new(n, tail, move |x: &[f64]| c * phi(x, nu) + cutoff(x, epsilon_shell)).with_interfaces(vec![Interface::Sphere {
        center: vec![0.0; n],
        radius: 1.0,
    }])
}

/// Operator of a radial-in-nature field evaluated by the appropriate route.
fn eval_any(u: &ScalarField, x: &[f64], params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    if params.n() == 1 {
        eval_pv(u, x, params, quad)
    } else {
        eval_symmetrized(u, x, params, quad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellSample {
    pub x: Vec<f64>,
    pub dist: f64,
    pub value: f64,
    pub error_estimate: f64,
    /// `value / dist^{ν(p-1) - ps}`.
    pub ratio: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub samples: Vec<ShellSample>,
    /// Empirical C₀.
    pub min_ratio: f64,
    /// Minimum ratio over the half of the samples closest to the sphere.
    pub min_ratio_near_boundary: f64,
    pub bounded_away_from_zero: bool,
    pub meets_claimed_c0: bool,
}

/// Evaluates `(-Δ)_p^s φ` at shell samples and compares with the
/// `(|x| - 1)^{ν(p-1) - ps}` rate.
pub fn barrier_lower_bound_check(
    spec: &BarrierSpec,
    params: &FracParams,
    shell_samples: &[Vec<f64>],
    quad: &QuadratureSpec,
) -> Result<LowerBoundReport> {
    spec.check_against(params)?;
    if params.p() <= 2.0 {
        return Err(Error::pre("the barrier lower bound is stated for p > 2"));
    }
    let field = phi_field(params.n(), spec.nu);
    let power = spec.nu * (params.p() - 1.0) - params.ps();
    let mut samples = Vec::with_capacity(shell_samples.len());
    for x in shell_samples {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = r - 1.0;
        if !(dist > 0.0 && dist < spec.epsilon_shell) {
            return Err(Error::pre(format!("sample {x:?} is not inside the open shell")));
        }
        let q = quad.with_inner_radius(quad.inner_radius.min(0.5 * dist));
        let sample = match eval_any(&field, x, params, &q) {
            Ok(e) => ShellSample {
                x: x.clone(),
                dist,
                value: e.value,
                error_estimate: e.error_estimate,
                ratio: e.value / dist.powf(power),
                failure: (!e.converged).then(|| "quadrature did not converge".into()),
            },
            Err(e) => ShellSample {
                x: x.clone(),
                dist,
                value: f64::NAN,
                error_estimate: f64::INFINITY,
                ratio: f64::NAN,
                failure: Some(e.to_string()),
            },
        };
        samples.push(sample);
    }
    let min_of = |it: &mut dyn Iterator<Item = &ShellSample>| {
        it.map(|s| s.ratio)
            .fold(f64::INFINITY, |a, b| if b.is_nan() { f64::NAN } else { a.min(b) })
    };
    let min_ratio = min_of(&mut samples.iter());
    let mut by_dist: Vec<&ShellSample> = samples.iter().collect();
    by_dist.sort_by(|a, b| a.dist.partial_cmp(&b.dist).unwrap());
    let near = &by_dist[..by_dist.len().div_ceil(2)];
    let min_ratio_near_boundary = min_of(&mut near.iter().copied());
    Ok(LowerBoundReport {
        bounded_away_from_zero: min_ratio > 0.0 && min_ratio_near_boundary > 0.0,
        meets_claimed_c0: min_ratio >= spec.c0,
        samples,
        min_ratio,
        min_ratio_near_boundary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub d: Vec<f64>,
    /// `v_k = d_k^{ps-ν(p-1)} (-Δ)_p^s φ((0, …, 0, 1 + d_k))`.
    pub v: Vec<f64>,
    pub v_error: Vec<f64>,
    pub last: f64,
    /// Richardson extrapolation of the last two values with the leading exponent.
    pub richardson: f64,
    /// Δ² extrapolation of the last three values (fits the exponent).
    pub aitken: Option<f64>,
    pub extrapolated: f64,
    pub extrapolation_error: f64,
    pub target: f64,
    pub rel_deviation: f64,
}

/// Scaled values of the barrier approaching the sphere and their limit.
pub fn scaled_limit_scan(spec: &BarrierSpec, params: &FracParams, d_sequence: &[f64], quad: &QuadratureSpec) -> Result<ScanReport> {
    spec.check_against(params)?;
    let target = if params.n() == 1 {
        crate::closed_forms::c_nu(params.s(), params.p(), spec.nu)?
    } else {
        c_nu_n(params.s(), params.p(), spec.nu, params.n())?.c_nu_n
    } * params.normalization()
        * 2f64.powf((params.p() - 1.0) * spec.nu);
    scaled_limit_scan_field(&phi_field(params.n(), spec.nu), spec, params, d_sequence, quad, target)
}

/// As [`scaled_limit_scan`] with an arbitrary field in place of φ.
pub fn scaled_limit_scan_field(
    field: &ScalarField,
    spec: &BarrierSpec,
    params: &FracParams,
    d_sequence: &[f64],
    quad: &QuadratureSpec,
    target: f64,
) -> Result<ScanReport> {
    if d_sequence.len() < 2 {
        return Err(Error::InsufficientData("scan needs at least two distances".into()));
    }
    if d_sequence.windows(2).any(|w| !(w[1] < w[0])) || d_sequence.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::pre("d_sequence must be positive and strictly decreasing"));
    }
    if d_sequence[0] >= spec.epsilon_shell {
        return Err(Error::pre("all distances must be below the shell thickness"));
    }
    let n = params.n();
    let scale_exp = params.ps() - spec.nu * (params.p() - 1.0);
    let mut v = Vec::with_capacity(d_sequence.len());
    let mut v_error = Vec::with_capacity(d_sequence.len());
    for &d in d_sequence {
        let mut x = vec![0.0; n];
        x[n - 1] = 1.0 + d;
        let q = quad.with_inner_radius(quad.inner_radius.min(0.5 * d));
        let e = eval_any(field, &x, params, &q)?;
        if !e.converged {
            return Err(Error::NonFinite(format!("quadrature did not converge at d = {d}")));
        }
        let w = d.powf(scale_exp);
        v.push(w * e.value);
        v_error.push(w * e.error_estimate);
    }
    let k = v.len();
    let (d1, d2) = (d_sequence[k - 2], d_sequence[k - 1]);
    let e1 = scale_exp.min(1.0);
    let ratio = (d2 / d1).powf(e1);
    let richardson = (v[k - 1] - ratio * v[k - 2]) / (1.0 - ratio);
    let aitken = (k >= 3).then(|| aitken(v[k - 3], v[k - 2], v[k - 1])).flatten();
    let extrapolated = aitken.unwrap_or(richardson);
    let extrapolation_error = match aitken {
        Some(a) => (a - richardson).abs(),
        None => (richardson - v[k - 1]).abs(),
    };
    let rel_deviation = if target != 0.0 {
        (extrapolated - target).abs() / target.abs()
    } else {
        extrapolated.abs()
    };
    Ok(ScanReport {
        d: d_sequence.to_vec(),
        last: v[k - 1],
        v,
        v_error,
        richardson,
        aitken,
        extrapolated,
        extrapolation_error,
        target,
        rel_deviation,
    })
}

/// Δ² limit of `L + c ρ^k`; `None` unless the differences contract geometrically.
fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let d1 = b - a;
    let d2 = c - b;
    if d1 == 0.0 || d2 == 0.0 {
        return Some(c);
    }
    let rho = d2 / d1;
    (rho > 0.0 && rho < 1.0).then(|| c + d2 * rho / (1.0 - rho))
}

/// `min{(2 - t)₊^s, 5^s}`.
pub fn g_profile_value(t: f64, s: f64) -> f64 {
    let cap = 5f64.powf(s);
    if t >= 2.0 {
        0.0
    } else {
        (2.0 - t).powf(s).min(cap)
    }
}

/// The 1D profile of `g(x) = min{(2 - x_n)₊^s, 5^s}`.
pub fn g_profile(s: f64) -> ScalarField {
    ScalarField::from_fn_1d(TailModel::bounded(5f64.powf(s)), move |t| g_profile_value(t, s)).with_breakpoints(vec![-3.0, 2.0])
}

/// `g` on R^n.
pub fn g_field(n: usize, s: f64) -> ScalarField {
    if n == 1 {
        g_profile(s)
    } else {
        ScalarField::profile(n, &g_profile(s))
    }
}

/// `I(x)` for `g`: the integral over `{y_n ≤ -3}` of
/// `([h - 5^s]^{p-1} - [h - (2 - y_n)^s]^{p-1}) / |x - y|^{n+ps}` with
/// `h = (2 - x_n)^s`, reduced to one dimension.
pub fn g_integral(x_n: f64, params: &FracParams) -> Result<f64> {
    if !(x_n > -3.0 && x_n < 2.0) {
        return Err(Error::pre(format!("x_n = {x_n} must lie in (-3, 2)")));
    }
    let (s, p, ps) = (params.s(), params.p(), params.ps());
    let h = (2.0 - x_n).powf(s);
    let cap = 5f64.powf(s);
    let first = spow(h - cap, p);
    let tau0 = x_n + 3.0;
    // τ = x_n - y_n = τ0 / w, w ∈ (0, 1].
    let body = quad::tanh_sinh(
        |w, _, _| {
            let y = x_n - tau0 / w;
            (first - spow(h - (2.0 - y).powf(s), p)) * w.powf(ps - 1.0)
        },
        0.0,
        1.0,
        Tolerance::relative(1e-13),
        12,
    );
    let factor = if params.n() == 1 { 1.0 } else { profile_factor(params.n(), ps)? };
    Ok(params.normalization() * factor * tau0.powf(-ps) * body.value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GSample {
    pub x: Vec<f64>,
    pub i_value: f64,
    /// Independent evaluation of the operator of g at x.
    pub direct: Option<f64>,
    pub direct_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GReport {
    pub samples: Vec<GSample>,
    pub min: f64,
    pub all_positive: bool,
    pub max_crosscheck_rel: f64,
}

/// `(-Δ)_p^s g` at samples in the unit ball via `I(x)`, cross-checked against
/// a direct evaluation of the operator when `crosscheck` is set.
pub fn g_supersolution_check(params: &FracParams, samples: &[Vec<f64>], quad: &QuadratureSpec, crosscheck: bool) -> Result<GReport> {
    let n = params.n();
    let field = g_field(n, params.s());
    let mut out = Vec::with_capacity(samples.len());
    for x in samples {
        if x.len() != n {
            return Err(Error::param("sample dimension mismatch"));
        }
        if !(x.iter().map(|v| v * v).sum::<f64>() < 1.0) {
            return Err(Error::pre(format!("sample {x:?} is not in the open unit ball")));
        }
        let i_value = g_integral(x[n - 1], params)?;
        let (direct, direct_error) = if crosscheck {
            let e = eval_any(&field, x, params, quad)?;
            (Some(e.value), Some(e.error_estimate))
        } else {
            (None, None)
        };
        out.push(GSample {
            x: x.clone(),
            i_value,
            direct,
            direct_error,
        });
    }
    let min = out.iter().map(|g| g.i_value).fold(f64::INFINITY, f64::min);
    let max_crosscheck_rel = out
        .iter()
        .filter_map(|g| g.direct.map(|d| (d - g.i_value).abs() / g.i_value.abs()))
        .fold(0.0, f64::max);
    Ok(GReport {
        all_positive: out.iter().all(|g| g.i_value > 0.0),
        samples: out,
        min,
        max_crosscheck_rel,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaleProbe {
    pub x: Vec<f64>,
    /// `(-Δ)_p^s g̃ (x)` with `g̃ = C g(·/R)`.
    pub lhs: f64,
    /// `C^{p-1} R^{-ps} (-Δ)_p^s g (x/R)`.
    pub rhs: f64,
    pub rel_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RescaleReport {
    pub c: f64,
    pub r: f64,
    pub probes: Vec<RescaleProbe>,
    pub max_rel_deviation: f64,
    /// Smallest C with `C^{p-1} c_min / R^{ps} ≥ f_sup_norm`.
    pub required_c: f64,
    /// `sup g̃` with the required amplitude: the resulting L∞ bound.
    pub linf_bound: f64,
}

/// Checks the scaling identity of the rescaled supersolution at `probes` and
/// returns the amplitude needed to dominate `f_sup_norm`.
pub fn rescale_supersolution(
    c: f64,
    r: f64,
    params: &FracParams,
    f_sup_norm: f64,
    c_min: f64,
    probes: &[Vec<f64>],
    quad: &QuadratureSpec,
) -> Result<RescaleReport> {
    if !(c > 0.0) || !(r > 0.0) {
        return Err(Error::param("C and R must be positive"));
    }
    if !(f_sup_norm >= 0.0) {
        return Err(Error::param("f_sup_norm must be nonnegative"));
    }
    if !(c_min > 0.0) {
        return Err(Error::pre(format!("supersolution constant c = {c_min} must be positive")));
    }
    let (p, ps, s) = (params.p(), params.ps(), params.s());
    let profile = g_profile(s);
    let tilde = profile.dilated(r).scaled(c);
    let eval_profile = |u: &ScalarField, t: f64| -> Result<EvalResult> {
        if params.n() == 1 {
            eval_pv(u, &[t], params, quad)
        } else {
            eval_profile_nd(u, t, params, quad)
        }
    };
    let mut out = Vec::with_capacity(probes.len());
    for x in probes {
        if x.len() != params.n() {
            return Err(Error::param("probe dimension mismatch"));
        }
        let t = x[params.n() - 1];
        let lhs = eval_profile(&tilde, t)?.value;
        let rhs = c.powf(p - 1.0) * r.powf(-ps) * eval_profile(&profile, t / r)?.value;
        out.push(RescaleProbe {
            x: x.clone(),
            lhs,
            rhs,
            rel_deviation: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
        });
    }
    let required_c = if f_sup_norm == 0.0 {
        0.0
    } else {
        (f_sup_norm * r.powf(ps) / c_min).powf(1.0 / (p - 1.0))
    };
    Ok(RescaleReport {
        c,
        r,
        max_rel_deviation: out.iter().map(|q| q.rel_deviation).fold(0.0, f64::max),
        probes: out,
        required_c,
        linf_bound: required_c * 5f64.powf(s),
    })
}
