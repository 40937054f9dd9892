//! BFGS with central finite-difference gradients and a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when the gradient max-norm drops below this.
    pub grad_tol: f64,
    /// Stop when one iteration lowers the objective by less than this.
    pub f_tol: f64,
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            grad_tol: 1e-6,
            f_tol: 1e-9,
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_max: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Central differences `(f(x+he_i) − f(x−he_i)) / 2h`, components evaluated in parallel.
pub fn central_gradient<F>(f: &F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

struct Counted<'a, F> {
    f: &'a F,
    h: f64,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Counted<'_, F> {
    fn value(&mut self, x: &DVector<f64>) -> f64 {
        self.evals += 1;
        (self.f)(x.as_slice())
    }

    fn grad(&mut self, x: &DVector<f64>) -> DVector<f64> {
        self.evals += 2 * x.len();
        DVector::from_vec(central_gradient(self.f, x.as_slice(), self.h))
    }
}

struct LinePoint {
    alpha: f64,
    f: f64,
    g: DVector<f64>,
    dg: f64,
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

/// Strong-Wolfe search along `d` from `x` (Nocedal & Wright, Alg. 3.5/3.6).
fn wolfe_search<F: Fn(&[f64]) -> f64 + Sync>(
    obj: &mut Counted<'_, F>,
    x: &DVector<f64>,
    d: &DVector<f64>,
    f0: f64,
    dg0: f64,
) -> Option<LinePoint> {
    let eval = |obj: &mut Counted<'_, F>, alpha: f64| {
        let xa = x + d * alpha;
        let f = obj.value(&xa);
        (xa, f)
    };
    let probe = |obj: &mut Counted<'_, F>, alpha: f64, xa: &DVector<f64>, f: f64| {
        let g = obj.grad(xa);
        let dg = g.dot(d);
        LinePoint { alpha, f, g, dg }
    };

    let zoom = |obj: &mut Counted<'_, F>, mut lo: (f64, f64, f64), mut hi: (f64, f64)| -> Option<LinePoint> {
        // lo = (alpha, f, dg), hi = (alpha, f)
        for _ in 0..30 {
            let (alo, flo, dglo) = lo;
            let (ahi, fhi) = hi;
            // Quadratic interpolation, safeguarded toward the bracket interior.
            let denom = 2.0 * (fhi - flo - dglo * (ahi - alo));
            let mut a = if denom.abs() > 1e-300 {
                alo - dglo * (ahi - alo).powi(2) / denom
            } else {
                0.5 * (alo + ahi)
            };
            let (lo_b, hi_b) = (alo.min(ahi), alo.max(ahi));
            let margin = 0.1 * (hi_b - lo_b);
            if !(a > lo_b + margin && a < hi_b - margin) {
                a = 0.5 * (alo + ahi);
            }
            let (xa, fa) = eval(obj, a);
            if fa > f0 + C1 * a * dg0 || fa >= flo {
                hi = (a, fa);
            } else {
                let p = probe(obj, a, &xa, fa);
                if p.dg.abs() <= -C2 * dg0 {
                    return Some(p);
                }
                if p.dg * (ahi - alo) >= 0.0 {
                    hi = (alo, flo);
                }
                lo = (a, fa, p.dg);
                if (ahi - alo).abs() < 1e-14 {
                    return Some(p);
                }
            }
            if (hi.0 - lo.0).abs() < 1e-14 {
                break;
            }
        }
        let (a, _, _) = lo;
        if a > 0.0 {
            let (xa, fa) = eval(obj, a);
            return Some(probe(obj, a, &xa, fa));
        }
        None
    };

    let mut prev = (0.0, f0, dg0);
    let mut alpha = 1.0;
    for i in 0..20 {
        let (xa, fa) = eval(obj, alpha);
        if !fa.is_finite() {
            alpha *= 0.5;
            continue;
        }
        if fa > f0 + C1 * alpha * dg0 || (i > 0 && fa >= prev.1) {
            return zoom(obj, prev, (alpha, fa));
        }
        let p = probe(obj, alpha, &xa, fa);
        if p.dg.abs() <= -C2 * dg0 {
            return Some(p);
        }
        if p.dg >= 0.0 {
            return zoom(obj, (alpha, fa, p.dg), (prev.0, prev.1));
        }
        prev = (alpha, fa, p.dg);
        alpha *= 2.0;
    }
    None
}

/// Minimizes `f` from `x0`.
pub fn bfgs<F>(f: &F, x0: &[f64], opts: &BfgsOptions) -> BfgsResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut obj = Counted {
        f,
        h: opts.fd_step,
        evals: 0,
    };
    let mut x = DVector::from_column_slice(x0);
    let mut fx = obj.value(&x);
    if n == 0 {
        return BfgsResult {
            x: vec![],
            f: fx,
            grad_max: 0.0,
            iterations: 0,
            evaluations: obj.evals,
            converged: true,
        };
    }
    let mut g = obj.grad(&x);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut converged = g.amax() < opts.grad_tol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut d = -(&hinv * &g);
        let mut dg0 = d.dot(&g);
        if dg0 >= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = -g.clone();
            dg0 = d.dot(&g);
        }
        let Some(p) = wolfe_search(&mut obj, &x, &d, fx, dg0) else {
            if hinv != DMatrix::identity(n, n) {
                hinv = DMatrix::identity(n, n);
                continue;
            }
            break;
        };
        let s = &d * p.alpha;
        let y = &p.g - &g;
        let sy = s.dot(&y);
        let df = fx - p.f;
        x += &s;
        fx = p.f;
        g = p.g;
        if sy > 1e-16 {
            if iterations == 1 {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        if g.amax() < opts.grad_tol || df.abs() < opts.f_tol {
            converged = true;
        }
    }

    BfgsResult {
        x: x.as_slice().to_vec(),
        f: fx,
        grad_max: g.amax(),
        iterations,
        evaluations: obj.evals,
        converged,
    }
}
