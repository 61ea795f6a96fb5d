//! Pointwise evaluation of the fractional p-Laplacian.
//!
//! Two independent routes are provided:
//!
//! * [`eval_pv`] works in y-space (1D): the singular shell `|x - y| < ε` is
//!   integrated with the symmetric pair `(y, 2x - y)` so the odd leading
//!   singularity cancels, the mid range `ε ≤ |x - y| ≤ R` is integrated
//!   adaptively on geometric shells split at the field's break points, and
//!   the tail beyond `R` is integrated after the inversion `r = R / t`.
//! * [`eval_symmetrized`] works in polar coordinates around `x` with the
//!   second-difference form of the operator, in dimensions 1 to 3.
//!
//! [`eval_profile_nd`] reduces the n-dimensional operator of a function of
//! `x_n` alone to the 1D operator times the transverse kernel factor.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::quad::{self, Integral, Tolerance};
use crate::{Error, Result};

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Dimension, order, exponent and normalization of the operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FracParams {
    n: usize,
    s: f64,
    p: f64,
    normalization: f64,
}

impl FracParams {
    /// Parameters with the unit normalization `C_{n,s,p} = 1`.
    pub fn new(n: usize, s: f64, p: f64) -> Result<Self> {
        FracParams::with_normalization(n, s, p, 1.0)
    }

    pub fn with_normalization(n: usize, s: f64, p: f64, normalization: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("dimension n must be at least 1"));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::param(format!("order s = {s} must lie in (0, 1)")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::param(format!("exponent p = {p} must be > 1")));
        }
        if !(normalization > 0.0) || !normalization.is_finite() {
            return Err(Error::param(format!("normalization {normalization} must be positive")));
        }
        Ok(FracParams { n, s, p, normalization })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn ps(&self) -> f64 {
        self.p * self.s
    }

    /// Exponent `n + ps` of the kernel.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 + self.ps()
    }

    /// Same s, p and normalization in another dimension.
    pub fn in_dimension(&self, n: usize) -> Result<Self> {
        FracParams::with_normalization(n, self.s, self.p, self.normalization)
    }
}

/// Growth model `|u(y)| ≤ A (1 + |y|)^β` for `|y| ≥ radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailModel {
    pub amplitude: f64,
    pub exponent: f64,
    pub radius: f64,
}

impl TailModel {
    pub fn new(amplitude: f64, exponent: f64, radius: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::param(format!("tail amplitude {amplitude} must be finite and nonnegative")));
        }
        if !exponent.is_finite() || !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::param("tail exponent and radius must be finite, radius nonnegative"));
        }
        Ok(TailModel {
            amplitude,
            exponent,
            radius,
        })
    }

    /// Bounded fields: `|u| ≤ bound` everywhere.
    pub fn bounded(bound: f64) -> Self {
        TailModel {
            amplitude: bound.abs(),
            exponent: 0.0,
            radius: 0.0,
        }
    }

    /// Fields vanishing outside `B_radius(0)`.
    pub fn compact(radius: f64) -> Self {
        TailModel {
            amplitude: 0.0,
            exponent: 0.0,
            radius,
        }
    }

    /// Checks `(p - 1) β < p s`, i.e. the tail integral of the operator converges.
    pub fn validate(&self, params: &FracParams) -> Result<()> {
        if self.amplitude == 0.0 {
            return Ok(());
        }
        let lhs = (params.p() - 1.0) * self.exponent;
        let rhs = params.ps();
        if lhs < rhs {
            Ok(())
        } else {
            Err(Error::TailViolation { lhs, rhs })
        }
    }

    /// Closed-form bound on `|∫_{|y-x|>R} [u(x)-u(y)]^{p-1} / |x-y|^{n+ps} dy|`.
    ///
    /// Valid once `R ≥ radius + |x| + 1`; returns `None` otherwise.
    pub fn tail_bound(&self, params: &FracParams, x_norm: f64, ux: f64, big_r: f64) -> Option<f64> {
        if big_r < self.radius + x_norm + 1.0 {
            return None;
        }
        let p = params.p();
        let ps = params.ps();
        let gamma = self.exponent * (p - 1.0);
        let cp = if p >= 2.0 { 2f64.powf(p - 2.0) } else { 1.0 };
        let area = sphere_area(params.n() - 1);
        let own = ux.abs().powf(p - 1.0) * big_r.powf(-ps) / ps;
        let far = if self.amplitude == 0.0 {
            0.0
        } else {
            let lead = if gamma > 0.0 { 2f64.powf(gamma) } else { 1.0 };
            self.amplitude.powf(p - 1.0) * lead * big_r.powf(gamma - ps) / (ps - gamma)
        };
        Some(cp * area * (own + far))
    }
}

/// Hypersurface across which a field loses smoothness; lets the
/// multi-dimensional quadrature place break points.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Interface {
    Sphere {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{y : normal · y = offset}`; `normal` need not be normalized.
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
}

impl Interface {
    /// Unit symmetry axis of the interface seen from `x`.
    fn axis(&self, x: &[f64]) -> Option<Vec<f64>> {
        let v: Vec<f64> = match self {
            Interface::Sphere { center, .. } => x.iter().zip(center).map(|(a, c)| a - c).collect(),
            Interface::Hyperplane { normal, .. } => normal.clone(),
        };
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        (norm > 0.0).then(|| v.into_iter().map(|t| t / norm).collect())
    }

    /// Axis and the cosine `θ · axis` of directions θ for which `x + r θ`
    /// lies on the interface, when such directions exist.
    fn crossing(&self, x: &[f64], r: f64) -> Option<(Vec<f64>, f64)> {
        let axis = self.axis(x)?;
        let c = match self {
            Interface::Sphere { center, radius } => {
                let d = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                (radius * radius - d * d - r * r) / (2.0 * r * d)
            }
            Interface::Hyperplane { normal, offset } => {
                let norm = normal.iter().map(|t| t * t).sum::<f64>().sqrt();
                let level = normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                (offset - level) / (norm * r)
            }
        };
        (c.abs() < 1.0).then_some((axis, c))
    }

    /// Radii about `x` at which spheres centred at `x` touch the interface.
    fn radial_breaks(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Interface::Sphere { center, radius } => {
                let d = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
                vec![(radius - d).abs(), radius + d]
            }
            Interface::Hyperplane { normal, offset } => {
                let norm = normal.iter().map(|t| t * t).sum::<f64>().sqrt();
                let level = normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                vec![((offset - level) / norm).abs()]
            }
        }
    }
}

/// Deterministic real field on R^n with the regularity metadata the
/// evaluators rely on.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: PointFn,
    smoothness_radius: f64,
    tail: TailModel,
    gradient: Option<VectorFn>,
    hessian: Option<VectorFn>,
    breakpoints: Vec<f64>,
    interfaces: Vec<Interface>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("smoothness_radius", &self.smoothness_radius)
            .field("tail", &self.tail)
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .field("breakpoints", &self.breakpoints.len())
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(dim: usize, tail: TailModel, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            eval: Arc::new(f),
            smoothness_radius: f64::INFINITY,
            tail,
            gradient: None,
            hessian: None,
            breakpoints: Vec::new(),
            interfaces: Vec::new(),
        }
    }

    /// One-dimensional field from a scalar closure.
    pub fn from_fn_1d<F>(tail: TailModel, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarField::new(1, tail, move |x: &[f64]| f(x[0]))
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::new(dim, TailModel::bounded(c), move |_| c)
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField::constant(dim, 0.0)
    }

    /// The n-dimensional field `x ↦ profile(x_n)` built from a 1D field.
    pub fn profile(n: usize, profile: &ScalarField) -> Self {
        let inner = profile.eval.clone();
        let interfaces = profile
            .breakpoints
            .iter()
            .map(|&b| {
                let mut normal = vec![0.0; n];
                normal[n - 1] = 1.0;
                Interface::Hyperplane { normal, offset: b }
            })
            .collect();
        ScalarField::new(n, profile.tail, move |x: &[f64]| inner(&x[n - 1..n])).with_interfaces(interfaces)
    }

    pub fn with_smoothness_radius(mut self, r: f64) -> Self {
        self.smoothness_radius = r;
        self
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(g));
        self
    }

    /// Hessian evaluator returning the row-major `n × n` matrix.
    pub fn with_hessian<H>(mut self, h: H) -> Self
    where
        H: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(h));
        self
    }

    /// Known points of reduced regularity (kinks, power singularities); 1D only.
    pub fn with_breakpoints(mut self, mut pts: Vec<f64>) -> Self {
        pts.retain(|v| v.is_finite());
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        self.breakpoints = pts;
        self
    }

    /// Non-smooth hypersurfaces, used by the multi-dimensional evaluator.
    pub fn with_interfaces(mut self, interfaces: Vec<Interface>) -> Self {
        self.interfaces = interfaces;
        self
    }

    pub fn interfaces(&self) -> &[Interface] {
        &self.interfaces
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tail(&self) -> &TailModel {
        &self.tail
    }

    pub fn smoothness_radius(&self) -> f64 {
        self.smoothness_radius
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_taylor_data(&self) -> bool {
        self.gradient.is_some() && self.hessian.is_some()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    #[inline]
    pub fn value_1d(&self, x: f64) -> f64 {
        (self.eval)(&[x])
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    /// `λ u`.
    pub fn scaled(&self, lambda: f64) -> ScalarField {
        let inner = self.eval.clone();
        let mut out = self.map_eval(move |x| lambda * inner(x));
        out.tail.amplitude *= lambda.abs();
        out.gradient = self
            .gradient
            .clone()
            .map(|g| -> VectorFn { Arc::new(move |x: &[f64]| g(x).into_iter().map(|v| lambda * v).collect()) });
        out.hessian = self
            .hessian
            .clone()
            .map(|h| -> VectorFn { Arc::new(move |x: &[f64]| h(x).into_iter().map(|v| lambda * v).collect()) });
        out
    }

    /// `x ↦ u(x - shift)`.
    pub fn translated(&self, shift: &[f64]) -> ScalarField {
        let shift = shift.to_vec();
        let inner = self.eval.clone();
        let sh = shift.clone();
        let mut out = self.map_eval(move |x| {
            let y: Vec<f64> = x.iter().zip(&sh).map(|(a, b)| a - b).collect();
            inner(&y)
        });
        let norm = shift.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.tail.radius += norm;
        out.tail.amplitude *= (1.0 + norm).powf(self.tail.exponent.max(0.0));
        if self.dim == 1 {
            out.breakpoints = self.breakpoints.iter().map(|b| b + shift[0]).collect();
        }
        out.interfaces = self
            .interfaces
            .iter()
            .map(|i| match i {
                Interface::Sphere { center, radius } => Interface::Sphere {
                    center: center.iter().zip(&shift).map(|(c, d)| c + d).collect(),
                    radius: *radius,
                },
                Interface::Hyperplane { normal, offset } => Interface::Hyperplane {
                    normal: normal.clone(),
                    offset: offset + normal.iter().zip(&shift).map(|(a, b)| a * b).sum::<f64>(),
                },
            })
            .collect();
        out.gradient = None;
        out.hessian = None;
        out
    }

    /// `x ↦ u(x / r)`.
    pub fn dilated(&self, r: f64) -> ScalarField {
        let inner = self.eval.clone();
        let mut out = self.map_eval(move |x| {
            let y: Vec<f64> = x.iter().map(|v| v / r).collect();
            inner(&y)
        });
        out.tail.radius *= r;
        out.tail.amplitude *= r.powf(-self.tail.exponent).max(1.0);
        out.smoothness_radius *= r;
        out.breakpoints = self.breakpoints.iter().map(|b| b * r).collect();
        out.interfaces = self
            .interfaces
            .iter()
            .map(|i| match i {
                Interface::Sphere { center, radius } => Interface::Sphere {
                    center: center.iter().map(|c| c * r).collect(),
                    radius: radius * r,
                },
                Interface::Hyperplane { normal, offset } => Interface::Hyperplane {
                    normal: normal.clone(),
                    offset: offset * r,
                },
            })
            .collect();
        out.gradient = None;
        out.hessian = None;
        out
    }

    fn map_eval<F>(&self, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            dim: self.dim,
            eval: Arc::new(f),
            smoothness_radius: self.smoothness_radius,
            tail: self.tail,
            gradient: None,
            hessian: None,
            breakpoints: self.breakpoints.clone(),
            interfaces: self.interfaces.clone(),
        }
    }

    /// Compares the declared gradient/Hessian with centered finite differences.
    pub fn check_derivatives(&self, probes: &[Vec<f64>], step: f64, tol: f64) -> Result<()> {
        for x in probes {
            if let Some(g) = self.gradient(x) {
                for (i, gi) in g.iter().enumerate() {
                    let fd = (self.value(&bump(x, i, step)) - self.value(&bump(x, i, -step))) / (2.0 * step);
                    if (fd - gi).abs() > tol * (1.0 + fd.abs()) {
                        return Err(Error::pre(format!(
                            "gradient component {i} at {x:?}: declared {gi} vs finite difference {fd}"
                        )));
                    }
                }
            }
            if let Some(h) = self.hessian(x) {
                let d = self.dim;
                for i in 0..d {
                    for j in 0..d {
                        let fd = if i == j {
                            (self.value(&bump(x, i, step)) - 2.0 * self.value(x) + self.value(&bump(x, i, -step))) / (step * step)
                        } else {
                            let pp = self.value(&bump(&bump(x, i, step), j, step));
                            let pm = self.value(&bump(&bump(x, i, step), j, -step));
                            let mp = self.value(&bump(&bump(x, i, -step), j, step));
                            let mm = self.value(&bump(&bump(x, i, -step), j, -step));
                            (pp - pm - mp + mm) / (4.0 * step * step)
                        };
                        if (fd - h[i * d + j]).abs() > tol * (1.0 + fd.abs()) {
                            return Err(Error::pre(format!(
                                "hessian entry ({i},{j}) at {x:?}: declared {} vs finite difference {fd}",
                                h[i * d + j]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn bump(x: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] += h;
    y
}

/// Quadrature controls shared by the evaluators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// PV pairing radius ε.
    pub inner_radius: f64,
    /// Radius beyond which the tail treatment takes over.
    pub outer_radius: f64,
    pub shells_per_decade: usize,
    /// Gauss-Legendre order used on every shell piece.
    pub nodes_per_shell: usize,
    pub target_rel_tol: f64,
    /// Number of dyadic sub-shells resolved inside the singular shell before
    /// the remaining core is extrapolated (or, with Taylor data, replaced by
    /// the Taylor model). Deeper levels reach radii where the paired
    /// differences are dominated by roundoff. With Taylor data, 0 applies the
    /// model on the whole shell.
    pub extrapolation_levels: usize,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            inner_radius: 0.05,
            outer_radius: 100.0,
            shells_per_decade: 4,
            nodes_per_shell: 8,
            target_rel_tol: 1e-9,
            extrapolation_levels: 12,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_radius > 0.0) || !(self.outer_radius > self.inner_radius) {
            return Err(Error::param(format!(
                "need 0 < inner_radius ({}) < outer_radius ({})",
                self.inner_radius, self.outer_radius
            )));
        }
        if !(self.target_rel_tol > 0.0) {
            return Err(Error::param("target_rel_tol must be positive"));
        }
        if self.shells_per_decade == 0 || self.nodes_per_shell == 0 {
            return Err(Error::param("shells_per_decade and nodes_per_shell must be positive"));
        }
        Ok(())
    }

    pub fn with_inner_radius(mut self, eps: f64) -> Self {
        self.inner_radius = eps;
        self
    }

    pub fn with_outer_radius(mut self, r: f64) -> Self {
        self.outer_radius = r;
        self
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.target_rel_tol = tol;
        self
    }

    pub(crate) fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.target_rel_tol, 1e-300, self.max_subdivisions)
    }

    fn shell_factor(&self) -> f64 {
        10f64.powf(1.0 / self.shells_per_decade as f64)
    }
}

/// Split of an evaluation into its three radial zones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Breakdown {
    pub singular: f64,
    pub mid_range: f64,
    pub tail: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalResult {
    pub value: f64,
    pub error_estimate: f64,
    pub breakdown: Breakdown,
    /// Closed-form bound on the tail contribution from the field's tail
    /// model, when the outer radius is large enough for it to apply.
    pub tail_bound: Option<f64>,
    pub converged: bool,
    pub evaluations: usize,
}

impl EvalResult {
    fn assemble(params: &FracParams, singular: Integral, mid: Integral, tail: Integral, tail_bound: Option<f64>) -> Self {
        let c = params.normalization();
        let breakdown = Breakdown {
            singular: c * singular.value,
            mid_range: c * mid.value,
            tail: c * tail.value,
        };
        let value = breakdown.singular + breakdown.mid_range + breakdown.tail;
        let error_estimate = c * (singular.error + mid.error + tail.error);
        let finite = value.is_finite() && error_estimate.is_finite();
        EvalResult {
            value,
            error_estimate: if finite { error_estimate } else { f64::INFINITY },
            breakdown,
            tail_bound: tail_bound.map(|b| c * b),
            converged: finite && singular.converged && mid.converged && tail.converged,
            evaluations: singular.evaluations + mid.evaluations + tail.evaluations,
        }
    }

    /// Scales value, breakdown and error by a positive factor.
    pub fn scaled(&self, factor: f64) -> EvalResult {
        EvalResult {
            value: self.value * factor,
            error_estimate: self.error_estimate * factor.abs(),
            breakdown: Breakdown {
                singular: self.breakdown.singular * factor,
                mid_range: self.breakdown.mid_range * factor,
                tail: self.breakdown.tail * factor,
            },
            tail_bound: self.tail_bound.map(|b| b * factor.abs()),
            ..*self
        }
    }
}

/// `[t]^{p-1} = |t|^{p-2} t`.
pub fn signed_power(t: f64, p: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(Error::NonFinite(format!("signed_power argument {t}")));
    }
    if !(p > 1.0) {
        return Err(Error::param(format!("signed_power exponent p = {p} must be > 1")));
    }
    Ok(spow(t, p))
}

#[inline]
pub(crate) fn spow(t: f64, p: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if p == 3.0 {
        t.abs() * t
    } else if p == 2.0 {
        t
    } else {
        t.signum() * t.abs().powf(p - 1.0)
    }
}

/// Surface area of the unit m-sphere in R^{m+1}.
pub fn sphere_area(m: usize) -> f64 {
    let k = (m + 1) as f64;
    2.0 * PI.powf(0.5 * k) / statrs::function::gamma::gamma(0.5 * k)
}

/// `∫_0^∞ t^{n-2} / (1 + t²)^{(n+ps)/2} dt` by quadrature.
pub fn reduced_kernel_integral(n: usize, ps: f64) -> Integral {
    let e = 0.5 * (n as f64 + ps);
    let m = n as f64 - 2.0;
    let tol = Tolerance::relative(1e-14);
    let inner = quad::tanh_sinh(|t, _, _| t.powf(m) * (1.0 + t * t).powf(-e), 0.0, 1.0, tol, 12);
    // t = 1/τ on (1, ∞).
    let outer = quad::tanh_sinh(|tau, _, _| tau.powf(ps) * (1.0 + tau * tau).powf(-e), 0.0, 1.0, tol, 12);
    inner.combine(outer)
}

/// Factor relating the n-D operator of a profile `u(x_n)` to the 1D one:
/// `ω_{n-2} ∫_0^∞ t^{n-2} / (1+t²)^{(n+ps)/2} dt`.
pub fn profile_factor(n: usize, ps: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "profile reduction needs n ≥ 2",
        });
    }
    Ok(sphere_area(n - 2) * reduced_kernel_integral(n, ps).value)
}

/// `∫_0^ε ([-a r - b r²]^{p-1} + [a r - b r²]^{p-1}) r^{-1-ps} dr`.
///
/// This is the singular-shell contribution of the second-order Taylor model
/// `u(x) - u(x ± r) ≈ ∓a r - b r²` (`a = u'(x)`, `b = u''(x)/2`).
pub fn taylor_shell_integral(a: f64, b: f64, eps: f64, p: f64, ps: f64) -> f64 {
    if !(eps > 0.0) {
        return 0.0;
    }
    if p == 2.0 {
        return -2.0 * b * eps.powf(2.0 - ps) / (2.0 - ps);
    }
    // r = ε t; the integrand in t has algebraic endpoint behavior and kinks
    // at the zero crossings of the two brackets.
    let beta = b * eps;
    let h = |t: f64| (spow(-a - beta * t, p) + spow(a - beta * t, p)) * t.powf(p - 2.0 - ps);
    let mut cuts = vec![0.0, 1.0];
    if beta != 0.0 {
        for root in [a / beta, -a / beta] {
            if root > 0.0 && root < 1.0 {
                cuts.push(root);
            }
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = Tolerance::relative(1e-14);
    let sum: f64 = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| quad::tanh_sinh(|t, _, _| h(t), w[0], w[1], tol, 12).value)
        .sum();
    eps.powf(p - 1.0 - ps) * sum
}

fn prepare(u: &ScalarField, x: &[f64], params: &FracParams, quad: &QuadratureSpec) -> Result<()> {
    quad.validate()?;
    if u.dim() != params.n() || x.len() != params.n() {
        return Err(Error::param(format!(
            "dimension mismatch: field {}, point {}, params {}",
            u.dim(),
            x.len(),
            params.n()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("evaluation point {x:?}")));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > u.smoothness_radius() {
        return Err(Error::pre(format!(
            "point {x:?} lies outside the declared smoothness radius {}",
            u.smoothness_radius()
        )));
    }
    u.tail().validate(params)
}

struct BreakGeometry {
    nearest: f64,
    farthest: f64,
    radii: Vec<f64>,
}

fn break_geometry(u: &ScalarField, x0: f64) -> BreakGeometry {
    let tiny = 1e-12 * (1.0 + x0.abs());
    let mut radii: Vec<f64> = u.breakpoints().iter().map(|b| (b - x0).abs()).filter(|d| *d > tiny).collect();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    BreakGeometry {
        nearest: radii.first().copied().unwrap_or(f64::INFINITY),
        farthest: radii.last().copied().unwrap_or(0.0),
        radii,
    }
}

/// Taylor-model singular shell, with the model error estimated by comparing
/// against the true paired integrand on the outer half of the shell.
fn taylor_singular_shell(u: &ScalarField, x0: f64, ux: f64, eps: f64, params: &FracParams, order: usize) -> Integral {
    let p = params.p();
    let ps = params.ps();
    let k = 1.0 + ps;
    let a = u.gradient(&[x0]).map(|g| g[0]).unwrap_or(0.0);
    let b = 0.5 * u.hessian(&[x0]).map(|h| h[0]).unwrap_or(0.0);
    let value = taylor_shell_integral(a, b, eps, p, ps);
    let model_outer = value - taylor_shell_integral(a, b, 0.5 * eps, p, ps);
    let rule = quad::gauss_legendre(order);
    let true_outer = rule.integrate(
        |r| (spow(ux - u.value_1d(x0 + r), p) + spow(ux - u.value_1d(x0 - r), p)) * r.powf(-k),
        0.5 * eps,
        eps,
    );
    // The deviation on the outer half shell, doubled for the inner dyadic shells.
    Integral {
        value,
        error: 2.0 * (true_outer - model_outer).abs(),
        l1: value.abs(),
        evaluations: order,
        converged: value.is_finite(),
    }
}

/// Principal-value evaluation in one dimension.
pub fn eval_pv(u: &ScalarField, x: &[f64], params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    prepare(u, x, params, quad)?;
    if params.n() != 1 {
        return Err(Error::UnsupportedDimension {
            n: params.n(),
            reason: "eval_pv works in 1D; use eval_profile_nd or eval_symmetrized",
        });
    }
    let x0 = x[0];
    let p = params.p();
    let k = 1.0 + params.ps();
    let ux = u.value_1d(x0);
    if !ux.is_finite() {
        return Err(Error::NonFinite(format!("u({x0}) = {ux}")));
    }
    let diff = |y: f64| spow(ux - u.value_1d(y), p);
    let tol = quad.tolerance();
    let order = quad.nodes_per_shell;
    let geo = break_geometry(u, x0);

    let taylor = u.has_taylor_data();
    let eps = if taylor {
        quad.inner_radius.min(geo.nearest)
    } else {
        quad.inner_radius.min(0.5 * geo.nearest)
    };

    let singular = if taylor {
        // Taylor model on a core of radius ε 2^{-L}, paired quadrature outside it.
        let levels = quad.extrapolation_levels as i32;
        let core_r = eps * 0.5f64.powi(levels);
        let core = taylor_singular_shell(u, x0, ux, core_r, params, order);
        if levels == 0 {
            core
        } else {
            let breaks: Vec<f64> = (0..=levels).rev().map(|j| eps * 0.5f64.powi(j)).collect();
            quad::adaptive(|r| (diff(x0 + r) + diff(x0 - r)) * r.powf(-k), &breaks, order, tol).combine(core)
        }
    } else {
        quad::geometric_to_zero(
            |r| (diff(x0 + r) + diff(x0 - r)) * r.powf(-k),
            eps,
            0.5,
            quad.extrapolation_levels,
            order,
            tol,
        )
    };

    let big_r = quad.outer_radius.max(2.0 * geo.farthest).max(2.0 * eps);
    let radii = quad::geometric_breaks(eps, big_r, quad.shell_factor());
    let bps = u.breakpoints();
    let right = quad::merge_breaks(x0 + eps, x0 + big_r, radii.iter().map(|r| x0 + r).chain(bps.iter().copied()));
    let left = quad::merge_breaks(x0 - big_r, x0 - eps, radii.iter().map(|r| x0 - r).chain(bps.iter().copied()));
    let g = |y: f64| diff(y) * (y - x0).abs().powf(-k);
    let mid = quad::adaptive(g, &right, order, tol).combine(quad::adaptive(g, &left, order, tol));

    // r = R / t on (0, 1].
    let tail = quad::geometric_to_zero(
        |t| {
            let r = big_r / t;
            (diff(x0 + r) + diff(x0 - r)) * t.powf(k - 2.0)
        },
        1.0,
        0.1,
        16,
        order,
        tol,
    )
    .scale(big_r.powf(1.0 - k));

    let bound = u.tail().tail_bound(params, x0.abs(), ux, big_r);
    Ok(EvalResult::assemble(params, singular, mid, tail, bound))
}

/// Second-difference form `(C/2) ∫ ([u(x)-u(x+y)]^{p-1} + [u(x)-u(x-y)]^{p-1}) / |y|^{n+ps} dy`.
pub fn eval_symmetrized(u: &ScalarField, x: &[f64], params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    prepare(u, x, params, quad)?;
    match params.n() {
        1 => symmetrized_1d(u, x[0], params, quad),
        2 | 3 => symmetrized_nd(u, x, params, quad),
        n => Err(Error::UnsupportedDimension {
            n,
            reason: "eval_symmetrized supports n ≤ 3",
        }),
    }
}

fn symmetrized_1d(u: &ScalarField, x0: f64, params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    let p = params.p();
    let ps = params.ps();
    let k = 1.0 + ps;
    let ux = u.value_1d(x0);
    if !ux.is_finite() {
        return Err(Error::NonFinite(format!("u({x0}) = {ux}")));
    }
    let pair = |r: f64| spow(ux - u.value_1d(x0 + r), p) + spow(ux - u.value_1d(x0 - r), p);
    let g = |r: f64| pair(r) * r.powf(-k);
    let tol = quad.tolerance();
    let geo = break_geometry(u, x0);
    let big_r = quad.outer_radius.max(2.0 * geo.farthest);
    let mut cuts: Vec<f64> = geo.radii.iter().copied().filter(|r| *r < big_r).collect();
    cuts.push(big_r);
    let first = cuts[0].min(quad.inner_radius);
    if first < cuts[0] {
        cuts.insert(0, first);
    }

    // Core (0, first 2^{-L}) by the Taylor model when available, else by
    // geometric extrapolation of the dyadic sub-shells.
    let levels = quad.extrapolation_levels;
    let singular = if u.has_taylor_data() {
        let r_c = first * 0.5f64.powi(levels as i32);
        let core = taylor_singular_shell(u, x0, ux, r_c, params, quad.nodes_per_shell);
        if levels == 0 {
            core
        } else {
            core.combine(quad::tanh_sinh(|r, _, _| g(r), r_c, first, tol, 10))
        }
    } else {
        quad::geometric_to_zero(g, first, 0.5, levels, quad.nodes_per_shell, tol)
    };
    let shells = quad::geometric_breaks(first, big_r, quad.shell_factor());
    let cuts = quad::merge_breaks(first, big_r, cuts.into_iter().chain(shells));
    let mut mid = Integral::ZERO;
    for w in cuts.windows(2) {
        mid = mid.combine(quad::tanh_sinh(|r, _, _| g(r), w[0], w[1], tol, 10));
    }
    // Inverted tail, integrable algebraic behavior at t = 0.
    let tail = quad::tanh_sinh(|t, _, _| pair(big_r / t) * t.powf(k - 2.0), 0.0, 1.0, tol, 10).scale(big_r.powf(1.0 - k));
    let bound = u.tail().tail_bound(params, x0.abs(), ux, big_r);
    Ok(EvalResult::assemble(params, singular, mid, tail, bound))
}

fn symmetrized_nd(u: &ScalarField, x: &[f64], params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    let n = params.n();
    let p = params.p();
    let ps = params.ps();
    let ux = u.value(x);
    if !ux.is_finite() {
        return Err(Error::NonFinite(format!("u({x:?}) = {ux}")));
    }
    let tol = quad.tolerance();
    let ang_tol = Tolerance::relative(0.1 * quad.target_rel_tol);
    let order = quad.nodes_per_shell;
    let frame = polar_frame(u.interfaces(), x, n);
    let pair_at = |dir: &[f64], r: f64| -> f64 {
        let mut plus = [0.0; 3];
        let mut minus = [0.0; 3];
        for i in 0..n {
            plus[i] = x[i] + r * dir[i];
            minus[i] = x[i] - r * dir[i];
        }
        spow(ux - u.value(&plus[..n]), p) + spow(ux - u.value(&minus[..n]), p)
    };
    let pieces = |cuts: Vec<f64>, f: &dyn Fn(f64) -> f64| -> f64 {
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| quad::tanh_sinh(|t, _, _| f(t), w[0], w[1], ang_tol, 7).value)
            .sum()
    };
    // Integral of the pair sum over half of the direction sphere.
    let angular = |r: f64| -> f64 {
        if n == 2 {
            let mut cuts = vec![0.0, 0.5 * PI, PI];
            for itf in u.interfaces() {
                if let Some((axis, c)) = itf.crossing(x, r) {
                    let psi = axis[1].atan2(axis[0]);
                    let a = c.acos();
                    cuts.extend([psi + a, psi - a].map(|t| t.rem_euclid(PI)));
                }
            }
            pieces(sorted(cuts), &|th: f64| pair_at(&[th.cos(), th.sin()], r))
        } else {
            let [e1, e2, e3] = frame;
            let mut cuts = vec![0.0, 0.25 * PI, 0.5 * PI];
            if let Some(itf) = u.interfaces().first() {
                if let Some((_, c)) = itf.crossing(x, r) {
                    let a = c.acos();
                    cuts.extend([a, PI - a].into_iter().filter(|t| *t < 0.5 * PI));
                }
            }
            pieces(sorted(cuts), &|th: f64| {
                let (st, ct) = th.sin_cos();
                st * pieces(vec![0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI], &|ph: f64| {
                    let (sp, cp) = ph.sin_cos();
                    let d: Vec<f64> = (0..3).map(|i| st * cp * e1[i] + st * sp * e2[i] + ct * e3[i]).collect();
                    pair_at(&d, r)
                })
            })
        }
    };
    let eps = quad.inner_radius;
    let g = |r: f64| angular(r) * r.powf(-1.0 - ps);
    let singular = quad::geometric_to_zero(g, eps, 0.5, quad.extrapolation_levels.min(24), order, tol);
    let big_r = quad.outer_radius;
    let radii = quad::merge_breaks(
        eps,
        big_r,
        quad::geometric_breaks(eps, big_r, quad.shell_factor())
            .into_iter()
            .chain(u.interfaces().iter().flat_map(|i| i.radial_breaks(x))),
    );
    let mid = quad::adaptive(g, &radii, order, tol);
    let tail = quad::geometric_to_zero(|t| angular(big_r / t) * t.powf(ps - 1.0), 1.0, 0.1, 14, order, tol).scale(big_r.powf(-ps));
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bound = u.tail().tail_bound(params, norm, ux, big_r);
    Ok(EvalResult::assemble(params, singular, mid, tail, bound))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Orthonormal frame whose third axis is the symmetry axis of the first
/// interface as seen from `x` (3D only).
fn polar_frame(interfaces: &[Interface], x: &[f64], n: usize) -> [[f64; 3]; 3] {
    let standard = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    if n != 3 {
        return standard;
    }
    let Some(axis) = interfaces.first().and_then(|i| i.axis(x)) else {
        return standard;
    };
    let a3 = [axis[0], axis[1], axis[2]];
    let helper = if a3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot: f64 = (0..3).map(|i| helper[i] * a3[i]).sum();
    let mut a1 = [0.0; 3];
    for i in 0..3 {
        a1[i] = helper[i] - dot * a3[i];
    }
    let norm = a1.iter().map(|v| v * v).sum::<f64>().sqrt();
    a1.iter_mut().for_each(|v| *v /= norm);
    let a2 = [
        a3[1] * a1[2] - a3[2] * a1[1],
        a3[2] * a1[0] - a3[0] * a1[2],
        a3[0] * a1[1] - a3[1] * a1[0],
    ];
    [a1, a2, a3]
}

/// n-dimensional operator of the profile field `x ↦ uprofile(x_n)` at any
/// point with last coordinate `x_n`.
pub fn eval_profile_nd(uprofile: &ScalarField, x_n: f64, params: &FracParams, quad: &QuadratureSpec) -> Result<EvalResult> {
    if params.n() < 2 {
        return Err(Error::UnsupportedDimension {
            n: params.n(),
            reason: "eval_profile_nd needs n ≥ 2; use eval_pv in 1D",
        });
    }
    if uprofile.dim() != 1 {
        return Err(Error::param("profile field must be one-dimensional"));
    }
    let one_d = params.in_dimension(1)?;
    // The nD tail condition (p-1)β < ps is the same inequality as in 1D.
    let base = eval_pv(uprofile, &[x_n], &one_d, quad)?;
    Ok(base.scaled(profile_factor(params.n(), params.ps())?))
}
