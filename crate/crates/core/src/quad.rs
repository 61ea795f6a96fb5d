//! One-dimensional quadrature building blocks.
//!
//! Everything in this module is deterministic: node placement depends only on
//! the integration limits, the tolerance and the integrand values, never on
//! scheduling, so results are bitwise reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

/// Outcome of a numerical integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Heuristic absolute error estimate.
    pub error: f64,
    /// Estimate of the integral of |f|, used as the scale for relative tolerances.
    pub l1: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl Integral {
    pub const ZERO: Integral = Integral {
        value: 0.0,
        error: 0.0,
        l1: 0.0,
        evaluations: 0,
        converged: true,
    };

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.error.is_finite()
    }

    /// Sum of two independent pieces.
    pub fn combine(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            l1: self.l1 + other.l1,
            evaluations: self.evaluations + other.evaluations,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, factor: f64) -> Integral {
        Integral {
            value: self.value * factor,
            error: self.error * factor.abs(),
            l1: self.l1 * factor.abs(),
            ..self
        }
    }
}

impl std::iter::Sum for Integral {
    fn sum<I: Iterator<Item = Integral>>(iter: I) -> Integral {
        iter.fold(Integral::ZERO, Integral::combine)
    }
}

/// Stopping rule shared by the adaptive integrators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64, max_intervals: usize) -> Self {
        Tolerance { rel, abs, max_intervals }
    }

    pub fn relative(rel: f64) -> Self {
        Tolerance::new(rel, 1e-300, 4000)
    }

    fn target(&self, l1: f64) -> f64 {
        self.abs.max(self.rel * l1)
    }
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    fn integrate_with_abs<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> (f64, f64) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        let mut abs = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x);
            sum += w * v;
            abs += w * v.abs();
        }
        (sum * half, abs * half.abs())
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const MAX_CACHED_RULE: usize = 64;

/// Cached Gauss-Legendre rule with `n` nodes (1 ≤ n ≤ 64).
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static RULES: [OnceLock<GaussLegendre>; MAX_CACHED_RULE] = [const { OnceLock::new() }; MAX_CACHED_RULE];
    let n = n.clamp(1, MAX_CACHED_RULE);
    RULES[n - 1].get_or_init(|| {
        if n == 1 {
            GaussLegendre {
                nodes: vec![0.0],
                weights: vec![2.0],
            }
        } else {
            GaussLegendre::compute(n)
        }
    })
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    /// Best value (sum over the two halves).
    value: f64,
    abs: f64,
    left: (f64, f64),
    right: (f64, f64),
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.a.partial_cmp(&self.a).unwrap_or(Ordering::Equal))
    }
}

/// Globally adaptive Gauss-Legendre quadrature over the union of the
/// intervals delimited by `breaks` (sorted, at least two entries).
///
/// Each interval carries a coarse estimate on the whole interval and a fine
/// estimate on its two halves; the difference is the local error estimate.
/// The interval with the largest estimate is bisected until the total falls
/// below `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], order: usize, tol: Tolerance) -> Integral {
    let rule = gauss_legendre(order);
    let mut evals = 0usize;
    let mut heap = BinaryHeap::new();

    let make = |a: f64, b: f64, coarse: (f64, f64), f: &mut F, evals: &mut usize| {
        let m = 0.5 * (a + b);
        let left = rule.integrate_with_abs(f, a, m);
        let right = rule.integrate_with_abs(f, m, b);
        *evals += 2 * rule.nodes.len();
        let value = left.0 + right.0;
        Segment {
            a,
            b,
            value,
            abs: left.1 + right.1,
            left,
            right,
            error: (value - coarse.0).abs(),
        }
    };

    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let coarse = rule.integrate_with_abs(&mut f, a, b);
        evals += rule.nodes.len();
        heap.push(make(a, b, coarse, &mut f, &mut evals));
    }

    loop {
        let (value, error, l1) = heap
            .iter()
            .fold((0.0, 0.0, 0.0), |acc, s| (acc.0 + s.value, acc.1 + s.error, acc.2 + s.abs));
        if !value.is_finite() || !error.is_finite() {
            return Integral {
                value,
                error: f64::INFINITY,
                l1,
                evaluations: evals,
                converged: false,
            };
        }
        let target = tol.target(l1);
        if error <= target || heap.len() >= tol.max_intervals {
            let value = kahan_sum(heap.iter().map(|s| s.value));
            return Integral {
                value,
                error,
                l1,
                evaluations: evals,
                converged: error <= target,
            };
        }
        let worst = heap.pop().expect("non-empty heap");
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval can no longer be split in floating point; accept it.
            let mut frozen = worst;
            frozen.error = 0.0;
            heap.push(frozen);
            continue;
        }
        heap.push(make(worst.a, m, worst.left, &mut f, &mut evals));
        heap.push(make(m, worst.b, worst.right, &mut f, &mut evals));
    }
}

fn kahan_sum<I: Iterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in iter {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Double-exponential (tanh-sinh) quadrature on a finite interval.
///
/// The integrand receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so integrands with algebraic endpoint singularities
/// can be evaluated accurately right up to the endpoints. Non-finite samples
/// at nodes that have collapsed onto an endpoint are skipped.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance, max_level: usize) -> Integral {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let t_max = 6.5;
    let mut evals = 0usize;

    let node = |t: f64, f: &mut F, evals: &mut usize| -> (f64, f64) {
        let u = FRAC_PI_2 * t.sinh();
        let cu = u.cosh();
        let weight = half * FRAC_PI_2 * t.cosh() / (cu * cu);
        if !(weight > 0.0) || !weight.is_finite() {
            return (0.0, 0.0);
        }
        // Distances to a and to b.
        let da = (b - a) / (1.0 + (-2.0 * u).exp());
        let db = (b - a) / (1.0 + (2.0 * u).exp());
        if da <= 0.0 || db <= 0.0 {
            return (0.0, 0.0);
        }
        let x = if u < 0.0 { a + da } else { b - db };
        let x = if u == 0.0 { mid } else { x };
        *evals += 1;
        let v = f(x, da, db);
        if !v.is_finite() {
            return (0.0, 0.0);
        }
        (weight * v, weight * v.abs())
    };

    let mut h = 1.0;
    let (mut sum, mut abs) = node(0.0, &mut f, &mut evals);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        let (p, pa) = node(t, &mut f, &mut evals);
        let (m, ma) = node(-t, &mut f, &mut evals);
        sum += p + m;
        abs += pa + ma;
        k += 1;
    }
    let mut estimate = sum * h;
    let mut error = f64::INFINITY;
    let mut converged = false;
    for _level in 1..=max_level {
        h *= 0.5;
        // Only odd multiples of the new step are new nodes.
        let mut k = 1;
        let mut new_sum = 0.0;
        let mut new_abs = 0.0;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            let (p, pa) = node(t, &mut f, &mut evals);
            let (m, ma) = node(-t, &mut f, &mut evals);
            new_sum += p + m;
            new_abs += pa + ma;
            k += 2;
        }
        sum += new_sum;
        abs += new_abs;
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if error <= tol.target(abs * h) {
            converged = true;
            break;
        }
    }
    Integral {
        value: estimate,
        error,
        l1: abs * h,
        evaluations: evals,
        converged,
    }
}

/// Integrates over `(0, upper]` a function with an integrable algebraic
/// singularity (or slow decay, after inversion) at zero.
///
/// The interval is cut into `levels` geometric pieces
/// `[upper * ratio^(j+1), upper * ratio^j]` which are integrated adaptively;
/// the remaining core `(0, upper * ratio^levels)` is estimated by the
/// geometric series implied by the last two piece contributions, which is
/// exact for pure power laws. The core estimate is also charged to the error.
pub fn geometric_to_zero<F: FnMut(f64) -> f64>(mut f: F, upper: f64, ratio: f64, levels: usize, order: usize, tol: Tolerance) -> Integral {
    let levels = levels.max(2);
    let mut breaks: Vec<f64> = (0..=levels).map(|j| upper * ratio.powi(j as i32)).collect();
    breaks.reverse();
    let body = adaptive(&mut f, &breaks, order, tol);
    // Contributions of the two innermost pieces.
    // The innermost pieces only feed the core estimate; resolve them to the
    // accuracy of the whole rather than to their own (possibly roundoff
    // dominated) magnitude.
    let local = Tolerance {
        abs: tol.abs.max(tol.rel * body.l1),
        ..tol
    };
    let inner = adaptive(&mut f, &breaks[0..2], order, local);
    let next = adaptive(&mut f, &breaks[1..3], order, local);
    let mut core = 0.0;
    let mut core_err = inner.value.abs();
    if inner.value != 0.0 && next.value != 0.0 {
        let rho = inner.value / next.value;
        if rho > 0.0 && rho < 1.0 {
            core = inner.value * rho / (1.0 - rho);
            core_err = core.abs();
        }
    } else if inner.value == 0.0 && next.value == 0.0 {
        core_err = 0.0;
    }
    Integral {
        value: body.value + core,
        error: body.error + core_err + inner.error + next.error,
        l1: body.l1 + core.abs(),
        evaluations: body.evaluations + inner.evaluations + next.evaluations,
        converged: body.converged,
    }
}

/// Geometric break points `start * factor^k` strictly inside `(start, end)`,
/// including both ends. Requires `0 < start < end` and `factor > 1`.
pub fn geometric_breaks(start: f64, end: f64, factor: f64) -> Vec<f64> {
    let mut out = vec![start];
    let mut r = start * factor;
    while r < end * (1.0 - 1e-12) {
        out.push(r);
        r *= factor;
    }
    out.push(end);
    out
}

/// Sorts, deduplicates and clips break points to `[lo, hi]`, always keeping
/// both ends.
pub fn merge_breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let scale = (hi - lo).abs().max(f64::MIN_POSITIVE);
    let mut pts: Vec<f64> = extra.into_iter().filter(|v| v.is_finite() && *v > lo && *v < hi).collect();
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for v in pts {
        if let Some(last) = out.last() {
            if (v - last).abs() <= 1e-14 * scale.max(v.abs()) {
                continue;
            }
        }
        out.push(v);
    }
    if *out.last().unwrap() < hi {
        out.pop();
        out.push(hi);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [2usize, 5, 8, 16] {
            let rule = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(|x| x.powi(deg as i32), 0.0, 1.0);
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-13, "n={n} deg={deg} got={got}");
            }
        }
    }

    #[test]
    fn adaptive_handles_interior_kink() {
        let r = adaptive(|x: f64| (x - 0.3).abs(), &[0.0, 1.0], 8, Tolerance::relative(1e-12));
        assert!(r.converged);
        let want = 0.5 * 0.09 + 0.5 * 0.49;
        assert!((r.value - want).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn tanh_sinh_endpoint_singularities() {
        // Beta(0.3, 0.2) = Γ(0.3)Γ(0.2)/Γ(0.5)
        let r = tanh_sinh(|_, da, db| da.powf(-0.7) * db.powf(-0.8), 0.0, 1.0, Tolerance::relative(1e-13), 10);
        let want = statrs::function::beta::beta(0.3, 0.2);
        assert!((r.value - want).abs() < 1e-9 * want, "{} vs {want}", r.value);
    }

    #[test]
    fn geometric_to_zero_is_exact_for_power_laws() {
        let r = geometric_to_zero(|x: f64| x.powf(-0.6), 1.0, 0.5, 6, 8, Tolerance::relative(1e-13));
        assert!((r.value - 2.5).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn merge_breaks_sorts_and_clips() {
        let b = merge_breaks(0.0, 1.0, [0.5, 2.0, 0.25, 0.5, -1.0]);
        assert_eq!(b, vec![0.0, 0.25, 0.5, 1.0]);
    }
}
