#![allow(dead_code)]

use fracplap::{EvalResult, ScalarField, TailModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Sum of three Gaussian bumps with analytic derivatives.
#[derive(Clone, Debug)]
pub struct Bumps {
    pub amp: [f64; 3],
    pub center: [f64; 3],
    pub width: [f64; 3],
}

impl Bumps {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut b = Bumps {
            amp: [0.0; 3],
            center: [0.0; 3],
            width: [0.0; 3],
        };
        for i in 0..3 {
            b.amp[i] = rng.gen_range(-2.0..2.0);
            b.center[i] = rng.gen_range(-1.5..1.5);
            b.width[i] = rng.gen_range(0.3..1.5);
        }
        b
    }

    /// (u, u', u'')
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for i in 0..3 {
            let z = (x - self.center[i]) / self.width[i];
            let e = self.amp[i] * (-z * z).exp();
            let w = self.width[i];
            out.0 += e;
            out.1 += -2.0 * z / w * e;
            out.2 += (4.0 * z * z - 2.0) / (w * w) * e;
        }
        out
    }

    pub fn bound(&self) -> f64 {
        self.amp.iter().map(|a| a.abs()).sum::<f64>().max(1e-3)
    }

    pub fn field(&self) -> ScalarField {
        let b = self.clone();
        ScalarField::from_fn_1d(TailModel::bounded(self.bound()), move |x| b.eval(x).0)
    }

    pub fn field_with_derivatives(&self) -> ScalarField {
        let (b1, b2) = (self.clone(), self.clone());
        self.field()
            .with_gradient(move |x: &[f64]| vec![b1.eval(x[0]).1])
            .with_hessian(move |x: &[f64]| vec![b2.eval(x[0]).2])
    }
}

/// `|a - b| ≤ 10 tol max(|a|, |b|) + err_a + err_b`.
pub fn agrees(a: &EvalResult, b: &EvalResult, tol: f64) -> bool {
    (a.value - b.value).abs() <= 10.0 * tol * a.value.abs().max(b.value.abs()) + a.error_estimate + b.error_estimate
}

pub fn agrees_values(a: f64, ea: f64, b: f64, eb: f64, tol: f64) -> bool {
    (a - b).abs() <= 10.0 * tol * a.abs().max(b.abs()) + ea + eb
}

/// Composite Gauss-Legendre (5 points) over `[a, b]` split into `pieces`.
pub fn gauss5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    const X: [f64; 5] = [0.0, -0.5384693101056831, 0.5384693101056831, -0.906179845938664, 0.906179845938664];
    const W: [f64; 5] = [
        0.5688888888888889,
        0.47862867049936647,
        0.47862867049936647,
        0.23692688505618908,
        0.23692688505618908,
    ];
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let m = a + (k as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(m + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

/// `∫_0^b f` on pieces graded geometrically toward 0 (ratio 1/2, `levels` pieces).
pub fn graded_to_zero<F: Fn(f64) -> f64>(f: F, b: f64, levels: usize, per_piece: usize) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..levels {
        let lo = 0.5 * hi;
        total += gauss5(&f, lo, hi, per_piece);
        hi = lo;
    }
    total
}

/// Independent linear (p = 2) reference: piecewise-constant collocation at the
/// centres of `cells` uniform cells on (-1, 1), source f ≡ `f`, normalization 1.
/// Returns (centres, values).
pub fn p0_reference(cells: usize, s: f64, f: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 / cells as f64;
    let c: Vec<f64> = (0..cells).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let two_s = 2.0 * s;
    let a = nalgebra::DMatrix::from_fn(cells, cells, |i, j| {
        if i == j {
            2.0 * (0.5 * h).powf(-two_s) / two_s
        } else {
            let d = (c[i] - c[j]).abs();
            -((d - 0.5 * h).powf(-two_s) - (d + 0.5 * h).powf(-two_s)) / two_s
        }
    });
    let rhs = nalgebra::DVector::from_element(cells, f);
    let u = a.lu().solve(&rhs).expect("reference system is nonsingular");
    (c, u.iter().copied().collect())
}

/// Linear interpolation of (xs, ys) at t, clamped to the end values.
pub fn interp(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    match xs.iter().position(|&x| x >= t) {
        Some(0) => ys[0],
        None => *ys.last().unwrap(),
        Some(k) => {
            let w = (t - xs[k - 1]) / (xs[k] - xs[k - 1]);
            ys[k - 1] * (1.0 - w) + ys[k] * w
        }
    }
}
