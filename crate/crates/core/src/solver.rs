//! Dirichlet problems `(-Δ)_p^s u = f` on an interval with `u ≡ 0` outside.
//!
//! Unknowns are nodal values of a piecewise-linear interpolant on a graded
//! grid. At node `x_i` the operator is split into
//!
//! * a near shell `|y - x_i| < ε_i = min(h_left, h_right)` integrated with the
//!   second-order Taylor model built from three-point finite differences
//!   (collocating the bare interpolant there diverges when `p(1 - s) ≤ 1`);
//! * the rest of `[a, b]`, integrated with Gauss-Legendre on cell pieces
//!   graded geometrically away from `x_i`;
//! * the exterior, where `u = 0` and the integral is exact.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::kernel::{spow, taylor_shell_integral, FracParams, QuadratureSpec, ScalarField, TailModel};
use crate::quad::gauss_legendre;
use crate::{Error, Result};

const MIN_SPACING: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Domain1D {
    a: f64,
    b: f64,
}

impl Domain1D {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::param(format!("invalid interval ({a}, {b})")));
        }
        Ok(Domain1D { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn dist_to_boundary(&self, x: f64) -> f64 {
        (x - self.a).min(self.b - x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradedGrid {
    domain: Domain1D,
    nodes: Vec<f64>,
    grading_ratio: f64,
    boundary_layers: usize,
}

impl GradedGrid {
    pub const DEFAULT_RATIO: f64 = 0.5;
    pub const DEFAULT_LAYERS: usize = 12;

    /// `base_cells` uniform cells, with the two end cells refined
    /// geometrically toward the boundary: `a + h r^k`, `k = 1..=layers`.
    pub fn new(domain: Domain1D, base_cells: usize, grading_ratio: f64, boundary_layers: usize) -> Result<Self> {
        if base_cells < 2 {
            return Err(Error::param("need at least two base cells"));
        }
        if !(grading_ratio > 0.0 && grading_ratio <= 1.0) {
            return Err(Error::param(format!("grading ratio {grading_ratio} must lie in (0, 1]")));
        }
        let (a, b) = (domain.a, domain.b);
        let h = (b - a) / base_cells as f64;
        let mut nodes: Vec<f64> = (0..=base_cells).map(|k| a + h * k as f64).collect();
        if grading_ratio < 1.0 {
            for k in 1..=boundary_layers {
                let off = h * grading_ratio.powi(k as i32);
                nodes.push(a + off);
                nodes.push(b - off);
            }
        }
        nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
        nodes.dedup();
        *nodes.first_mut().unwrap() = a;
        *nodes.last_mut().unwrap() = b;
        GradedGrid::from_nodes(domain, nodes, grading_ratio, boundary_layers)
    }

    pub fn default_for(domain: Domain1D, base_cells: usize) -> Result<Self> {
        GradedGrid::new(domain, base_cells, Self::DEFAULT_RATIO, Self::DEFAULT_LAYERS)
    }

    pub fn from_nodes(domain: Domain1D, nodes: Vec<f64>, grading_ratio: f64, boundary_layers: usize) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::param("grid needs at least one interior node"));
        }
        if nodes[0] != domain.a || *nodes.last().unwrap() != domain.b {
            return Err(Error::param("grid must start at a and end at b"));
        }
        let scale = domain.b - domain.a;
        if nodes.windows(2).any(|w| !(w[1] - w[0] >= MIN_SPACING * scale.max(1.0))) {
            return Err(Error::param("grid nodes must be strictly increasing with spacing ≥ 1e-12"));
        }
        Ok(GradedGrid {
            domain,
            nodes,
            grading_ratio,
            boundary_layers,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn interior(&self) -> &[f64] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    pub fn grading_ratio(&self) -> f64 {
        self.grading_ratio
    }

    pub fn boundary_layers(&self) -> usize {
        self.boundary_layers
    }
}

/// One far-field quadrature point: weight × kernel, left node of the cell,
/// and the left hat-function value.
#[derive(Clone, Copy, Debug)]
struct FarPoint {
    weight: f64,
    cell: u32,
    phi0: f64,
}

#[derive(Clone, Debug)]
struct NodeStencil {
    far: Vec<FarPoint>,
    /// `((x - a)^{-ps} + (b - x)^{-ps}) / ps`
    exterior: f64,
    eps: f64,
    /// FD weights for u' and u'' on (u_{i-1}, u_i, u_{i+1}).
    d1: [f64; 3],
    d2: [f64; 3],
}

/// The discrete operator `U ↦ ((-Δ)_p^s I[U](x_i))_i` on interior nodes.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: GradedGrid,
    params: FracParams,
    stencils: Vec<NodeStencil>,
}

impl DiscreteOperator {
    pub fn new(grid: &GradedGrid, params: &FracParams, quad: &QuadratureSpec) -> Result<Self> {
        if params.n() != 1 {
            return Err(Error::UnsupportedDimension {
                n: params.n(),
                reason: "the solver works on intervals",
            });
        }
        quad.validate()?;
        let x = grid.nodes();
        let ps = params.ps();
        let (a, b) = (grid.domain.a, grid.domain.b);
        let rule = gauss_legendre(quad.nodes_per_shell.clamp(2, 64));
        let stencils = (1..x.len() - 1)
            .map(|i| {
                let xi = x[i];
                let (hl, hr) = (xi - x[i - 1], x[i + 1] - xi);
                let eps = hl.min(hr);
                let mut far = Vec::new();
                for j in 0..x.len() - 1 {
                    let (c0, c1) = (x[j], x[j + 1]);
                    let (lo, hi) = if c1 <= xi { (c0, c1.min(xi - eps)) } else { (c0.max(xi + eps), c1) };
                    if !(hi > lo) {
                        continue;
                    }
                    let (dlo, dhi) = ((lo - xi).abs().min((hi - xi).abs()), (lo - xi).abs().max((hi - xi).abs()));
                    // Distance-doubling sub-pieces.
                    let mut cuts = vec![dlo];
                    let mut d = 2.0 * dlo;
                    while d < dhi {
                        cuts.push(d);
                        d *= 2.0;
                    }
                    cuts.push(dhi);
                    let sign = if c1 <= xi { -1.0 } else { 1.0 };
                    for w in cuts.windows(2) {
                        let (p0, p1) = (xi + sign * w[0], xi + sign * w[1]);
                        let (l, r) = (p0.min(p1), p0.max(p1));
                        let half = 0.5 * (r - l);
                        let mid = 0.5 * (r + l);
                        for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                            let y = mid + half * t;
                            let k = (y - xi).abs().powf(-1.0 - ps);
                            far.push(FarPoint {
                                weight: half * wt * k,
                                cell: j as u32,
                                phi0: (c1 - y) / (c1 - c0),
                            });
                        }
                    }
                }
                let d1 = [-hr / (hl * (hl + hr)), (hr - hl) / (hl * hr), hl / (hr * (hl + hr))];
                let d2 = [2.0 / (hl * (hl + hr)), -2.0 / (hl * hr), 2.0 / (hr * (hl + hr))];
                NodeStencil {
                    far,
                    exterior: ((xi - a).powf(-ps) + (b - xi).powf(-ps)) / ps,
                    eps,
                    d1,
                    d2,
                }
            })
            .collect();
        Ok(DiscreteOperator {
            grid: grid.clone(),
            params: *params,
            stencils,
        })
    }

    pub fn grid(&self) -> &GradedGrid {
        &self.grid
    }

    pub fn params(&self) -> &FracParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }

    fn full(&self, interior: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(interior.len() + 2);
        u.push(0.0);
        u.extend_from_slice(interior);
        u.push(0.0);
        u
    }

    fn near(&self, st: &NodeStencil, um: f64, u0: f64, up: f64) -> f64 {
        let a = st.d1[0] * um + st.d1[1] * u0 + st.d1[2] * up;
        let b = 0.5 * (st.d2[0] * um + st.d2[1] * u0 + st.d2[2] * up);
        taylor_shell_integral(a, b, st.eps, self.params.p(), self.params.ps())
    }

    fn node_value(&self, i: usize, u: &[f64]) -> f64 {
        let p = self.params.p();
        let st = &self.stencils[i];
        let ui = u[i + 1];
        let far: f64 = st
            .far
            .iter()
            .map(|q| {
                let j = q.cell as usize;
                let phi0 = q.phi0;
                let uy = phi0 * u[j] + (1.0 - phi0) * u[j + 1];
                q.weight * spow(ui - uy, p)
            })
            .sum();
        let near = self.near(st, u[i], ui, u[i + 2]);
        self.params.normalization() * (near + far + st.exterior * spow(ui, p))
    }

    /// Operator values at the interior nodes for interior nodal values `interior`.
    pub fn apply(&self, interior: &[f64]) -> Result<Vec<f64>> {
        if interior.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} interior values, got {}",
                self.len(),
                interior.len()
            )));
        }
        let u = self.full(interior);
        Ok((0..self.len()).into_par_iter().map(|i| self.node_value(i, &u)).collect())
    }

    /// `apply(U) - f`.
    pub fn residual(&self, interior: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.apply(interior)?;
        r.iter_mut().zip(f).for_each(|(a, b)| *a -= b);
        Ok(r)
    }

    /// Jacobian of `apply`: far field and exterior differentiated exactly,
    /// the near-shell Taylor term by central differences in its two
    /// derivative arguments.
    pub fn jacobian(&self, interior: &[f64]) -> DMatrix<f64> {
        let n = self.len();
        let u = self.full(interior);
        let p = self.params.p();
        let ps = self.params.ps();
        let c = self.params.normalization();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let st = &self.stencils[i];
                let ui = u[i + 1];
                // Derivatives with respect to the full vector (including the zero ends).
                let mut row = vec![0.0; n + 2];
                for q in &st.far {
                    let j = q.cell as usize;
                    let phi0 = q.phi0;
                    let uy = phi0 * u[j] + (1.0 - phi0) * u[j + 1];
                    let d = q.weight * (p - 1.0) * (ui - uy).abs().powf(p - 2.0);
                    row[i + 1] += d;
                    row[j] -= d * phi0;
                    row[j + 1] -= d * (1.0 - phi0);
                }
                row[i + 1] += st.exterior * (p - 1.0) * ui.abs().powf(p - 2.0);
                let (um, up) = (u[i], u[i + 2]);
                let a = st.d1[0] * um + st.d1[1] * ui + st.d1[2] * up;
                let b = 0.5 * (st.d2[0] * um + st.d2[1] * ui + st.d2[2] * up);
                let ha = 1e-6 * (a.abs() + b.abs() * st.eps + 1e-8 / st.eps);
                let hb = ha / st.eps;
                let ta = (taylor_shell_integral(a + ha, b, st.eps, p, ps) - taylor_shell_integral(a - ha, b, st.eps, p, ps)) / (2.0 * ha);
                let tb = (taylor_shell_integral(a, b + hb, st.eps, p, ps) - taylor_shell_integral(a, b - hb, st.eps, p, ps)) / (2.0 * hb);
                for k in 0..3 {
                    row[i + k] += ta * st.d1[k] + 0.5 * tb * st.d2[k];
                }
                row[1..=n]
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, c * v))
                    .collect()
            })
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row {
                jac[(i, j)] = v;
            }
        }
        jac
    }
}

/// The piecewise-linear interpolant of full nodal values (endpoints included),
/// extended by zero, with finite-difference derivative data at nodes.
pub fn interpolant_field(grid: &GradedGrid, interior: &[f64]) -> Result<ScalarField> {
    if interior.len() != grid.interior_count() {
        return Err(Error::GridMismatch("interior value count does not match grid".into()));
    }
    let x: Vec<f64> = grid.nodes().to_vec();
    let mut u = vec![0.0];
    u.extend_from_slice(interior);
    u.push(0.0);
    let (a, b) = (grid.domain.a, grid.domain.b);
    let locate = {
        let x = x.clone();
        move |t: f64| -> usize { x.partition_point(|v| *v <= t).clamp(1, x.len() - 1) - 1 }
    };
    let (xv, uv, loc) = (x.clone(), u.clone(), locate.clone());
    let value = move |t: f64| -> f64 {
        if !(t > a && t < b) {
            return 0.0;
        }
        let j = loc(t);
        let th = (t - xv[j]) / (xv[j + 1] - xv[j]);
        (1.0 - th) * uv[j] + th * uv[j + 1]
    };
    // Three-point differences at nodes, cell slope elsewhere.
    let derivs = {
        let (x, u) = (x.clone(), u.clone());
        move |t: f64| -> (f64, f64) {
            let j = x.partition_point(|v| *v < t);
            if j > 0 && j < x.len() - 1 && (x[j] - t).abs() <= 1e-14 * (1.0 + t.abs()) {
                let (hl, hr) = (x[j] - x[j - 1], x[j + 1] - x[j]);
                let d1 = -hr / (hl * (hl + hr)) * u[j - 1] + (hr - hl) / (hl * hr) * u[j] + hl / (hr * (hl + hr)) * u[j + 1];
                let d2 = 2.0 * (u[j - 1] / (hl * (hl + hr)) - u[j] / (hl * hr) + u[j + 1] / (hr * (hl + hr)));
                (d1, d2)
            } else if t > a && t < b {
                let k = locate(t);
                ((u[k + 1] - u[k]) / (x[k + 1] - x[k]), 0.0)
            } else {
                (0.0, 0.0)
            }
        }
    };
    let d2 = derivs.clone();
    Ok(ScalarField::from_fn_1d(
        TailModel {
            amplitude: 0.0,
            exponent: 0.0,
            radius: a.abs().max(b.abs()),
        },
        value,
    )
    .with_breakpoints(x)
    .with_gradient(move |t| vec![derivs(t[0]).0])
    .with_hessian(move |t| vec![d2(t[0]).1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Residual sup-norm target; `None` uses `1e-4 (1 + sup|f|)`.
    pub tol: Option<f64>,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: None,
            max_iterations: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepKind {
    Initial,
    Newton,
    FixedPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub kind: StepKind,
    pub damping: f64,
    pub residual_sup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub grid: GradedGrid,
    /// Values at every grid node; both endpoints are 0.
    pub values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub residual_sup: f64,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
}

impl SolveResult {
    pub fn interior_values(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sample_source(grid: &GradedGrid, f: &ScalarField) -> Result<Vec<f64>> {
    if f.dim() != 1 {
        return Err(Error::param("source must be one-dimensional"));
    }
    let x = grid.nodes();
    // Nodes and cell midpoints.
    let probes = x.iter().copied().chain(x.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    for t in probes {
        if !f.value_1d(t).is_finite() {
            return Err(Error::pre(format!("source is not bounded on the domain (f({t}) is not finite)")));
        }
    }
    Ok(grid.interior().iter().map(|&t| f.value_1d(t)).collect())
}

/// Solves `(-Δ)_p^s u = f` in the domain with zero exterior data.
pub fn solve(grid: &GradedGrid, f: &ScalarField, params: &FracParams, quad: &QuadratureSpec, opts: &SolveOptions) -> Result<SolveResult> {
    if params.p() < 2.0 {
        return Err(Error::pre(format!("p = {} < 2 is not supported", params.p())));
    }
    let op = DiscreteOperator::new(grid, params, quad)?;
    let fv = sample_source(grid, f)?;
    solve_with(&op, &fv, opts)
}

/// [`solve`] with a prebuilt operator and nodal source values.
pub fn solve_with(op: &DiscreteOperator, f: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    let n = op.len();
    if f.len() != n {
        return Err(Error::GridMismatch("source length does not match the operator".into()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::pre("source values must be finite"));
    }
    let tol = opts.tol.unwrap_or(1e-4 * (1.0 + sup(f)));
    let mut log = Vec::new();
    let mut u = initial_guess(op, f)?;
    let mut r = op.residual(&u, f)?;
    let mut rs = sup(&r);
    log.push(IterationRecord {
        iteration: 0,
        kind: StepKind::Initial,
        damping: 1.0,
        residual_sup: rs,
    });
    let mut iterations = 0;
    while rs > tol && iterations < opts.max_iterations {
        iterations += 1;
        let step = newton_step(op, &u, &r);
        let mut accepted = None;
        if let Some(delta) = step {
            let mut lambda = 1.0;
            while lambda >= 1.0 / 1024.0 {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
                let rt = op.residual(&trial, f)?;
                let st = sup(&rt);
                if st.is_finite() && st < (1.0 - 1e-4 * lambda) * rs {
                    accepted = Some((trial, rt, st, lambda, StepKind::Newton));
                    break;
                }
                lambda *= 0.5;
            }
        }
        if accepted.is_none() {
            accepted = fixed_point_step(op, &u, &r, rs, f)?;
        }
        let Some((nu, nr, ns, lambda, kind)) = accepted else {
            break;
        };
        u = nu;
        r = nr;
        rs = ns;
        log.push(IterationRecord {
            iteration: iterations,
            kind,
            damping: lambda,
            residual_sup: rs,
        });
    }
    let mut values = vec![0.0];
    values.extend_from_slice(&u);
    values.push(0.0);
    Ok(SolveResult {
        grid: op.grid.clone(),
        values,
        f_values: f.to_vec(),
        residual_sup: rs,
        tolerance: tol,
        iterations,
        converged: rs <= tol,
        log,
    })
}

fn newton_step(op: &DiscreteOperator, u: &[f64], r: &[f64]) -> Option<Vec<f64>> {
    let jac = op.jacobian(u);
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    let lu = jac.lu();
    let delta = lu.solve(&rhs)?;
    delta.iter().all(|v| v.is_finite()).then(|| delta.iter().copied().collect())
}

type Accepted = Option<(Vec<f64>, Vec<f64>, f64, f64, StepKind)>;

/// `u ← u - μ D⁻¹ r` with the diagonal of the operator's Jacobian as a
/// preconditioner and μ chosen by backtracking.
fn fixed_point_step(op: &DiscreteOperator, u: &[f64], r: &[f64], rs: f64, f: &[f64]) -> Result<Accepted> {
    let jac = op.jacobian(u);
    let diag: Vec<f64> = (0..u.len()).map(|i| jac[(i, i)].abs().max(1e-12)).collect();
    let mut mu = 1.0;
    while mu >= 1e-4 {
        let trial: Vec<f64> = u.iter().zip(r).zip(&diag).map(|((a, b), d)| a - mu * b / d).collect();
        let rt = op.residual(&trial, f)?;
        let st = sup(&rt);
        if st.is_finite() && st < rs {
            return Ok(Some((trial, rt, st, mu, StepKind::FixedPoint)));
        }
        mu *= 0.5;
    }
    Ok(None)
}

/// Scaled solution of the linear (p = 2) problem; the operator is
/// degenerate at `u = 0` for `p > 2`, so Newton cannot start there.
fn initial_guess(op: &DiscreteOperator, f: &[f64]) -> Result<Vec<f64>> {
    let n = op.len();
    if f.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; n]);
    }
    let linear = {
        let params = FracParams::with_normalization(1, op.params.s(), 2.0, op.params.normalization())?;
        DiscreteOperator { params, ..op.clone() }
    };
    let zero = vec![0.0; n];
    let jac = linear.jacobian(&zero);
    let rhs = DVector::from_column_slice(f);
    let psi: Vec<f64> = jac
        .lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| zero.clone());
    if op.params.p() == 2.0 {
        return Ok(psi);
    }
    // A(λψ) = λ^{p-1} A(ψ): least-squares choice of λ^{p-1}.
    let a = op.apply(&psi)?;
    let num: f64 = a.iter().zip(f).map(|(x, y)| x * y).sum();
    let den: f64 = a.iter().map(|x| x * x).sum();
    if !(num > 0.0 && den > 0.0) {
        return Ok(psi);
    }
    let lambda = (num / den).powf(1.0 / (op.params.p() - 1.0));
    Ok(psi.iter().map(|v| lambda * v).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `A(u) ≤ A(v) + tol` at every interior node.
    pub premise_holds: bool,
    pub premise_max_violation: f64,
    /// `max (u - v)` over the nodes.
    pub max_violation: f64,
    pub holds: bool,
    pub tolerance: f64,
}

/// Discrete comparison: checks the operator ordering and `u ≤ v + tol`.
pub fn comparison_check(u: &SolveResult, v: &SolveResult, op: &DiscreteOperator, tol: f64) -> Result<ComparisonReport> {
    if u.grid != v.grid || u.grid != *op.grid() {
        return Err(Error::GridMismatch("comparison needs results on the operator's grid".into()));
    }
    comparison_with_values(u, v.interior_values(), op, tol)
}

/// Comparison of a solution against arbitrary upper values on the interior
/// nodes (e.g. a supersolution restricted to the grid; exterior data of the
/// upper function must be nonnegative, which the caller asserts).
pub fn comparison_with_values(u: &SolveResult, upper: &[f64], op: &DiscreteOperator, tol: f64) -> Result<ComparisonReport> {
    if upper.len() != op.len() || u.grid != *op.grid() {
        return Err(Error::GridMismatch("value count does not match the grid".into()));
    }
    let au = op.apply(u.interior_values())?;
    let av = op.apply(upper)?;
    let premise_max_violation = au.iter().zip(&av).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let max_violation = u
        .interior_values()
        .iter()
        .zip(upper)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparisonReport {
        premise_holds: premise_max_violation <= tol,
        premise_max_violation,
        max_violation,
        holds: max_violation <= tol,
        tolerance: tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub nu_hat: f64,
    pub c_hat: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub points: usize,
    /// Points in the window dropped because the value was zero.
    pub excluded_zeros: usize,
}

/// Least-squares fit of `log |u| = log c + ν log d` over `d ∈ [d_min, d_max]`.
pub fn fit_power_law(dist: &[f64], values: &[f64], window: (f64, f64)) -> Result<ExponentFit> {
    let (d_min, d_max) = window;
    if !(d_min > 0.0 && d_min < d_max) {
        return Err(Error::param("window must satisfy 0 < d_min < d_max"));
    }
    let mut excluded_zeros = 0;
    let pts: Vec<(f64, f64)> = dist
        .iter()
        .zip(values)
        .filter(|(d, _)| **d >= d_min && **d <= d_max)
        .filter_map(|(d, v)| {
            if *v == 0.0 {
                excluded_zeros += 1;
                None
            } else {
                Some((d.ln(), v.abs().ln()))
            }
        })
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "only {} usable points in window [{d_min:e}, {d_max:e}]",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all distances coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(ExponentFit {
        nu_hat: slope,
        c_hat: intercept.exp(),
        window,
        r_squared,
        points: pts.len(),
        excluded_zeros,
    })
}

/// Fits `|u| ≈ c dist^ν` over interior nodes with boundary distance in the window.
pub fn fit_boundary_exponent(result: &SolveResult, window: (f64, f64)) -> Result<ExponentFit> {
    let dom = result.grid.domain();
    let x = result.grid.interior();
    let d: Vec<f64> = x.iter().map(|t| dom.dist_to_boundary(*t)).collect();
    fit_power_law(&d, result.interior_values(), window)
}
