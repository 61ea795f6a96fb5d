//! Moving-plane quantities near the plane `T_λ = {x₁ = λ}` and the δ-scaling
//! of the two integrals in the split of `(-Δ)_p^s u_λ - (-Δ)_p^s u`.
//!
//! With `y⁰` the reflection of `y` and `K(z) = |z|^{-n-ps}`:
//!
//! * `I(y)  = ([u_λ(x̄)-u_λ(y)]^{p-1} - [u(x̄)-u(y)]^{p-1}) (K(x̄-y) - K(x̄-y⁰))`
//! * `II(y) = ([u_λ(x̄)-u_λ(y)]^{p-1} - [u(x̄)-u(y)]^{p-1}
//!            + [u_λ(x̄)-u(y)]^{p-1} - [u(x̄)-u_λ(y)]^{p-1}) K(x̄-y⁰)`
//!
//! both integrated over `Σ_λ = {x₁ > λ}`. The region split is implemented
//! for n = 2.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::kernel::{eval_symmetrized, spow, FracParams, QuadratureSpec, ScalarField, TailModel};
use crate::quad::{self, Integral, Tolerance};
use crate::solver::fit_power_law;
use crate::{Error, Result};

/// `(2λ - x₁, x₂, …)`.
pub fn reflect(x: &[f64], lambda: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[0] = 2.0 * lambda - y[0];
    y
}

/// `x ↦ u(x^λ)`.
pub fn reflected(u: &ScalarField, lambda: f64) -> ScalarField {
    let inner = u.clone();
    ScalarField::new(u.dim(), reflected_tail(u, lambda), move |x: &[f64]| {
        inner.value(&reflect(x, lambda))
    })
    .with_smoothness_radius(u.smoothness_radius())
}

fn reflected_tail(u: &ScalarField, lambda: f64) -> TailModel {
    let t = *u.tail();
    let shift = 2.0 * lambda.abs();
    TailModel {
        amplitude: t.amplitude * (1.0 + shift).powf(t.exponent.max(0.0)),
        exponent: t.exponent,
        radius: t.radius + shift,
    }
}

/// `w_λ(x) = u(x^λ) - u(x)`.
pub fn w_lambda(u: &ScalarField, lambda: f64) -> ScalarField {
    let inner = u.clone();
    let t = reflected_tail(u, lambda);
    let tail = TailModel {
        amplitude: t.amplitude + u.tail().amplitude,
        ..t
    };
    ScalarField::new(u.dim(), tail, move |x: &[f64]| inner.value(&reflect(x, lambda)) - inner.value(x))
}

/// `K(x̄ - y) - K(x̄ - y⁰)`; nonnegative when both points lie in `Σ_λ`.
pub fn kernel_difference(x_bar: &[f64], y: &[f64], lambda: f64, params: &FracParams) -> f64 {
    let e = -0.5 * params.kernel_exponent();
    let y0 = reflect(y, lambda);
    let d1: f64 = x_bar.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let d2: f64 = x_bar.iter().zip(&y0).map(|(a, b)| (a - b) * (a - b)).sum();
    d1.powf(e) - d2.powf(e)
}

/// The pinned test fields. Both are odd in `x₁`, so `w = -2u` and `w > 0` on `{x₁ > 0}`.
pub mod fields {
    use super::*;

    /// `u = -x₁³ e^{-|x|²}`: `w = 2x₁³e^{-|x|²}` has vanishing first and second
    /// normal derivatives on the plane.
    pub fn flattened(n: usize) -> ScalarField {
        ScalarField::new(n, TailModel::bounded(1.0), |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            -x[0].powi(3) * (-r2).exp()
        })
    }

    /// `u = -x₁ e^{-|x|²}`: `w = 2x₁e^{-|x|²}`, `∂w/∂ν = -2e^{-|x'|²}` on the plane.
    pub fn monotone(n: usize) -> ScalarField {
        ScalarField::new(n, TailModel::bounded(1.0), |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            -x[0] * (-r2).exp()
        })
    }

    /// An even field in `x₁`: `w ≡ 0`.
    pub fn even(n: usize) -> ScalarField {
        ScalarField::new(n, TailModel::bounded(1.0), |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (1.0 + x[0] * x[0]) * (-r2).exp()
        })
    }
}

/// Operator inputs for the moving-plane analysis.
#[derive(Clone, Debug)]
pub struct HalfSpaceSetup {
    lambda: f64,
    params: FracParams,
    u: ScalarField,
    c_coefficient: ScalarField,
}

impl HalfSpaceSetup {
    pub fn new(lambda: f64, params: FracParams, u: ScalarField, c_coefficient: ScalarField) -> Result<Self> {
        if params.p() < 3.0 {
            return Err(Error::pre(format!("the Hopf analysis requires p ≥ 3, got {}", params.p())));
        }
        if u.dim() != params.n() || c_coefficient.dim() != params.n() {
            return Err(Error::param("field dimensions must match n"));
        }
        if !lambda.is_finite() {
            return Err(Error::param("λ must be finite"));
        }
        u.tail().validate(&params)?;
        Ok(HalfSpaceSetup {
            lambda,
            params,
            u,
            c_coefficient,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn c_coefficient(&self) -> &ScalarField {
        &self.c_coefficient
    }
}

/// Regions of the half ball `B_R⁺`, in coordinates with the plane at `x₁ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionSet {
    pub delta: f64,
    pub eta: f64,
    pub r: f64,
}

impl RegionSet {
    pub const DEFAULT_ETA: f64 = 0.1;
    pub const DEFAULT_R: f64 = 50.0;

    pub fn new(delta: f64, eta: f64, r: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < eta && eta < 1.0 && 1.0 < r) {
            return Err(Error::param(format!("regions need 0 < δ ({delta}) < η ({eta}) < 1 < R ({r})")));
        }
        Ok(RegionSet { delta, eta, r })
    }

    fn tangential(y: &[f64]) -> f64 {
        y[1..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn norm(y: &[f64]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn in_d1(&self, y: &[f64]) -> bool {
        (1.0..=2.0).contains(&y[0]) && Self::tangential(y) <= 1.0
    }

    pub fn in_d2(&self, y: &[f64]) -> bool {
        Self::norm(y) < self.r && y[0] >= self.eta
    }

    pub fn in_d3(&self, y: &[f64]) -> bool {
        (0.0..=2.0 * self.delta).contains(&y[0]) && Self::tangential(y) < self.delta
    }

    pub fn in_d4(&self, y: &[f64]) -> bool {
        (0.0..=self.eta).contains(&y[0]) && Self::tangential(y) < self.eta && !self.in_d3(y)
    }

    pub fn in_d5(&self, y: &[f64]) -> bool {
        Self::norm(y) < self.r && (0.0..=self.eta).contains(&y[0]) && Self::tangential(y) > self.eta
    }

    /// `Σ \ B_R`.
    pub fn in_outer(&self, y: &[f64]) -> bool {
        y[0] > 0.0 && Self::norm(y) >= self.r
    }

    /// Which member of the disjoint integration family `{D₂\D₃, D₃, D₄, D₅, Σ\B_R}` holds `y`.
    pub fn classify(&self, y: &[f64]) -> Option<Region> {
        if !(y[0] > 0.0) {
            return None;
        }
        if self.in_outer(y) {
            Some(Region::Outer)
        } else if self.in_d3(y) {
            Some(Region::D3)
        } else if self.in_d2(y) {
            Some(Region::D2)
        } else if self.in_d4(y) {
            Some(Region::D4)
        } else if self.in_d5(y) {
            Some(Region::D5)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Region {
    D2,
    D3,
    D4,
    D5,
    Outer,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RegionValues {
    /// D₂ without any overlap with D₃.
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub outer: f64,
    /// Diagnostic sub-window of D₂; not part of the total.
    pub d1: f64,
}

impl RegionValues {
    pub fn total(&self) -> f64 {
        self.d2 + self.d3 + self.d4 + self.d5 + self.outer
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitResult {
    pub delta: f64,
    pub i_total: f64,
    pub ii_total: f64,
    pub i_regions: RegionValues,
    pub ii_regions: RegionValues,
    pub error_estimate: f64,
    /// `(-Δ)_p^s u_λ(x̄) - (-Δ)_p^s u(x̄)` evaluated directly, if requested.
    pub direct: Option<f64>,
    pub direct_error: Option<f64>,
    /// `normalization·(I + II) - direct`.
    pub remainder: Option<f64>,
    pub converged: bool,
}

struct Integrands<'a> {
    setup: &'a HalfSpaceSetup,
    x_bar: [f64; 2],
    ul_x: f64,
    u_x: f64,
}

impl Integrands<'_> {
    /// (I, II) at a point given relative to the plane.
    fn at(&self, z1: f64, z2: f64) -> (f64, f64) {
        let p = self.setup.params.p();
        let lam = self.setup.lambda;
        let e = -0.5 * self.setup.params.kernel_exponent();
        let y = [lam + z1, z2];
        let y0 = [lam - z1, z2];
        let u_y = self.setup.u.value(&y);
        let ul_y = self.setup.u.value(&y0);
        let a = spow(self.ul_x - ul_y, p);
        let b = spow(self.u_x - u_y, p);
        let k1 = ((self.x_bar[0] - y[0]).powi(2) + (self.x_bar[1] - y[1]).powi(2)).powf(e);
        let k2 = ((self.x_bar[0] - y0[0]).powi(2) + (self.x_bar[1] - y0[1]).powi(2)).powf(e);
        let c = spow(self.ul_x - u_y, p);
        let d = spow(self.u_x - ul_y, p);
        ((a - b) * (k1 - k2), (a - b + c - d) * k2)
    }
}

/// Break points accumulating geometrically toward `center` at scale `scale`.
fn graded(lo: f64, hi: f64, center: f64, scale: f64) -> Vec<f64> {
    let mut pts = vec![center];
    let mut d = scale;
    while d < 2.0 * (hi - lo) {
        pts.push(center - d);
        pts.push(center + d);
        d *= 2.0;
    }
    quad::merge_breaks(lo, hi, pts)
}

struct Integrator {
    order: usize,
    outer_tol: Tolerance,
    inner_tol: Tolerance,
}

impl Integrator {
    /// `∫_{x∈[x0,x1]} ∫_{y∈[ylo(x), yhi(x)]} f(x, y)` with graded breaks.
    fn rect<F, L, H>(&self, f: &F, xb: &[f64], ylo: L, yhi: H, ycenter: f64, yscale: f64) -> Integral
    where
        F: Fn(f64, f64) -> f64,
        L: Fn(f64) -> f64,
        H: Fn(f64) -> f64,
    {
        let mut inner_evals = 0usize;
        let mut ok = true;
        let mut outer = quad::adaptive(
            |x| {
                let (lo, hi) = (ylo(x), yhi(x));
                if !(hi > lo) {
                    return 0.0;
                }
                let r = quad::adaptive(|y| f(x, y), &graded(lo, hi, ycenter, yscale), self.order, self.inner_tol);
                inner_evals += r.evaluations;
                ok &= r.converged;
                r.value
            },
            xb,
            self.order,
            self.outer_tol,
        );
        outer.evaluations += inner_evals;
        outer.converged &= ok;
        outer
    }
}

fn pick<'a>(f: &'a (dyn Fn(f64, f64) -> (f64, f64) + 'a), which: usize) -> impl Fn(f64, f64) -> f64 + 'a {
    move |x, y| {
        let v = f(x, y);
        if which == 0 {
            v.0
        } else {
            v.1
        }
    }
}

/// Integrates I and II over the region family for the probe point
/// `x̄ = (λ + δ, 0)` (n = 2).
pub fn split_i_ii(
    setup: &HalfSpaceSetup,
    x_bar: &[f64],
    regions: &RegionSet,
    quad_spec: &QuadratureSpec,
    verify_direct: bool,
) -> Result<SplitResult> {
    let params = &setup.params;
    if params.n() != 2 {
        return Err(Error::UnsupportedDimension {
            n: params.n(),
            reason: "the region split is implemented for n = 2",
        });
    }
    let delta = regions.delta;
    if x_bar.len() != 2 || x_bar[1] != 0.0 || ((x_bar[0] - setup.lambda) - delta).abs() > 1e-12 * (1.0 + delta) {
        return Err(Error::pre(format!(
            "x̄ must be (λ + δ, 0) = ({}, 0), got {x_bar:?}",
            setup.lambda + delta
        )));
    }
    let lam = setup.lambda;
    let ig = Integrands {
        setup,
        x_bar: [x_bar[0], 0.0],
        ul_x: setup.u.value(&reflect(x_bar, lam)),
        u_x: setup.u.value(x_bar),
    };
    let eval = |z1: f64, z2: f64| ig.at(z1, z2);
    let integ = Integrator {
        order: quad_spec.nodes_per_shell.max(6),
        outer_tol: Tolerance::new(1e-8, 1e-14, 2000),
        inner_tol: Tolerance::new(1e-10, 1e-16, 2000),
    };
    let (eta, big_r) = (regions.eta, regions.r);
    let chord = move |z1: f64| (big_r * big_r - z1 * z1).max(0.0).sqrt();
    let mut out = [RegionValues::default(), RegionValues::default()];
    let mut error = 0.0;
    let mut converged = true;
    let mut evaluations = 0usize;
    for (which, vals) in out.iter_mut().enumerate() {
        let f = pick(&eval, which);
        let mut acc = |r: Integral| -> f64 {
            error += r.error;
            converged &= r.converged;
            evaluations += r.evaluations;
            r.value
        };
        let two_d = 2.0 * delta;
        let cut = two_d.min(eta);

        // D₃: the square |z₁ - δ| ≤ δ, |z₂| < δ, in polar coordinates about x̄
        // with the directions θ and θ + π paired.
        let d3 = quad::adaptive(
            |th: f64| {
                let (st, ct) = th.sin_cos();
                let rmax = delta / ct.abs().max(st.abs());
                quad::adaptive(
                    |r: f64| r * (f(delta + r * ct, r * st) + f(delta - r * ct, -r * st)),
                    &graded(0.0, rmax, 0.0, rmax * 2f64.powi(-20)),
                    integ.order,
                    integ.inner_tol,
                )
                .value
            },
            &[0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4, PI],
            integ.order,
            integ.outer_tol,
        );
        vals.d3 = acc(d3);

        // D₄ \ D₃: [cut, η] × (-η, η) and [0, cut] × ±[δ, η).
        let xa = graded(cut, eta, delta, delta);
        let d4a = if eta > cut {
            integ.rect(&f, &xa, |_| -eta, |_| eta, 0.0, delta)
        } else {
            Integral::ZERO
        };
        let xb = graded(0.0, cut, delta, delta);
        let d4b = integ.rect(&f, &xb, |_| delta, |_| eta, 0.0, delta);
        let d4c = integ.rect(&f, &xb, |_| -eta, |_| -delta, 0.0, delta);
        vals.d4 = acc(d4a) + acc(d4b) + acc(d4c);

        // D₅: 0 ≤ z₁ ≤ η, η < |z₂| < chord.
        let x5 = graded(0.0, eta, delta, delta);
        let d5a = integ.rect(&f, &x5, |_| eta, chord, 0.0, delta);
        let d5b = integ.rect(&f, &x5, |z| -chord(z), |_| -eta, 0.0, delta);
        vals.d5 = acc(d5a) + acc(d5b);

        // D₂ \ D₃.
        let mut d2 = Integral::ZERO;
        if two_d > eta {
            let x_ov = graded(eta, two_d, delta, delta);
            d2 = d2.combine(integ.rect(&f, &x_ov, |_| delta, chord, 0.0, delta)).combine(integ.rect(
                &f,
                &x_ov,
                |z| -chord(z),
                |_| -delta,
                0.0,
                delta,
            ));
        }
        let start = two_d.max(eta);
        let x2 = graded(start, big_r, delta, delta);
        d2 = d2.combine(integ.rect(&f, &x2, |z| -chord(z), chord, 0.0, delta));
        vals.d2 = acc(d2);

        // Σ \ B_R: polar about the origin of the plane, r = R / t.
        let outer = quad::adaptive(
            |th: f64| {
                let (st, ct) = th.sin_cos();
                quad::adaptive(
                    |t: f64| {
                        if t <= 0.0 {
                            return 0.0;
                        }
                        let r = big_r / t;
                        f(r * ct, r * st) * big_r * big_r / (t * t * t)
                    },
                    &[0.0, 0.25, 0.5, 1.0],
                    integ.order,
                    integ.inner_tol,
                )
                .value
            },
            &[-FRAC_PI_2, -FRAC_PI_4, 0.0, FRAC_PI_4, FRAC_PI_2],
            integ.order,
            integ.outer_tol,
        );
        vals.outer = acc(outer);

        // D₁ diagnostic.
        let d1 = integ.rect(&f, &graded(1.0, 2.0, 1.0, 0.25), |_| -1.0, |_| 1.0, 0.0, 0.25);
        vals.d1 = d1.value;
    }
    let c = params.normalization();
    let i_total = out[0].total();
    let ii_total = out[1].total();
    let (direct, direct_error, remainder) = if verify_direct {
        let ul = reflected(&setup.u, lam);
        let a = eval_symmetrized(&ul, x_bar, params, quad_spec)?;
        let b = eval_symmetrized(&setup.u, x_bar, params, quad_spec)?;
        let d = a.value - b.value;
        (
            Some(d),
            Some(a.error_estimate + b.error_estimate),
            Some(c * (i_total + ii_total) - d),
        )
    } else {
        (None, None, None)
    };
    let _ = evaluations;
    Ok(SplitResult {
        delta,
        i_total,
        ii_total,
        i_regions: out[0],
        ii_regions: out[1],
        error_estimate: error,
        direct,
        direct_error,
        remainder,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisGate {
    pub distances: Vec<f64>,
    /// `|c(x_j)| d_j²` along the approach `x_j = (λ + d_j, 0, …)`.
    pub scaled: Vec<f64>,
    pub conforming: bool,
}

/// Empirical check that `c(x) dist(x)² → 0` at the plane.
pub fn hypothesis_gate(setup: &HalfSpaceSetup) -> HypothesisGate {
    let n = setup.params.n();
    let distances: Vec<f64> = (1..=30).map(|j| 2f64.powi(-j)).collect();
    let scaled: Vec<f64> = distances
        .iter()
        .map(|&d| {
            let mut x = vec![0.0; n];
            x[0] = setup.lambda + d;
            setup.c_coefficient.value(&x).abs() * d * d
        })
        .collect();
    let max = scaled.iter().cloned().fold(0.0, f64::max);
    let last = *scaled.last().unwrap();
    let conforming = scaled.iter().all(|q| q.is_finite()) && (max <= 1e-12 || last <= 0.01 * max);
    HypothesisGate {
        distances,
        scaled,
        conforming,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRecord {
    pub delta: f64,
    pub i_total: f64,
    pub ii_total: f64,
    pub combined: f64,
    pub i_regions: RegionValues,
    pub remainder: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanReport {
    pub eta: f64,
    pub r: f64,
    pub records: Vec<ScanRecord>,
    /// Least-squares slope of `log |II|` against `log δ`.
    pub ii_slope: Option<f64>,
    pub ii_slope_target: f64,
    pub ii_slope_ok: bool,
    /// `min_δ (-I/δ)`.
    pub c_fit: f64,
    pub i_negative: bool,
    pub combined_ok: bool,
    pub degenerate: bool,
    pub gate_conforming: bool,
    pub gate: HypothesisGate,
    pub converged: bool,
}

/// Runs the split for each δ and checks the three scaling statements.
pub fn delta_scaling_scan(
    setup: &HalfSpaceSetup,
    deltas: &[f64],
    eta: f64,
    r: f64,
    quad_spec: &QuadratureSpec,
    verify_direct: bool,
) -> Result<ScanReport> {
    if deltas.is_empty() {
        return Err(Error::InsufficientData("no δ values".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d < eta)) {
        return Err(Error::pre(format!("δ = {d} is not below η = {eta}")));
    }
    let mut records = Vec::with_capacity(deltas.len());
    let mut converged = true;
    for &delta in deltas {
        let regions = RegionSet::new(delta, eta, r)?;
        let x_bar = [setup.lambda + delta, 0.0];
        let s = split_i_ii(setup, &x_bar, &regions, quad_spec, verify_direct)?;
        converged &= s.converged;
        records.push(ScanRecord {
            delta,
            i_total: s.i_total,
            ii_total: s.ii_total,
            combined: s.i_total + s.ii_total,
            i_regions: s.i_regions,
            remainder: s.remainder,
        });
    }
    let p = setup.params.p();
    let ps = setup.params.ps();
    let ii_slope_target = (1.0 + p - ps).min(2.0) - 0.2;
    let scale = records.iter().map(|r| r.i_total.abs().max(r.ii_total.abs())).fold(0.0, f64::max);
    let degenerate = scale <= 1e-14;
    let ii_slope = if degenerate {
        None
    } else {
        let d: Vec<f64> = records.iter().map(|r| r.delta).collect();
        let v: Vec<f64> = records.iter().map(|r| r.ii_total).collect();
        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(0.0, f64::max);
        fit_power_law(&d, &v, (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12)))
            .ok()
            .map(|f| f.nu_hat)
    };
    let c_fit = records.iter().map(|r| -r.i_total / r.delta).fold(f64::INFINITY, f64::min);
    let i_negative = !degenerate && records.iter().all(|r| r.i_total < 0.0) && c_fit > 0.0;
    let combined_ok = i_negative && records.iter().all(|r| r.combined <= -0.25 * c_fit * r.delta);
    let gate = hypothesis_gate(setup);
    let ii_slope_ok = ii_slope.is_some_and(|s| s >= ii_slope_target);
    Ok(ScanReport {
        eta,
        r,
        records,
        ii_slope,
        ii_slope_target,
        ii_slope_ok,
        c_fit,
        i_negative,
        combined_ok,
        degenerate,
        gate_conforming: gate.conforming,
        gate,
        converged,
    })
}

/// Outward (−x₁) one-sided difference quotient at a plane point, with one
/// Richardson step: `2 D(h/2) - D(h)`.
pub fn normal_derivative(w: &ScalarField, boundary_point: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::param("step h must be positive"));
    }
    let wb = w.value(boundary_point);
    let quotient = |step: f64| {
        let mut y = boundary_point.to_vec();
        y[0] -= step;
        (w.value(&y) - wb) / step
    };
    let v = 2.0 * quotient(0.5 * h) - quotient(h);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("normal derivative".into()))
    }
}
