//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::linalg::{dot, norm};
use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsConfig<T> {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `‖∇f‖ ≤ grad_tol`.
    pub grad_tol: T,
    /// Stop when the relative decrease stalls below this for a few iterations.
    pub f_tol: T,
}

impl<T: Real> Default for LbfgsConfig<T> {
    fn default() -> Self {
        Self { memory: 12, max_iter: 500, grad_tol: T::lit(1e-8), f_tol: T::epsilon() * T::lit(10.0) }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub evaluations: usize,
    /// Gradient tolerance reached.
    pub converged: bool,
}

/// Minimises `f`, which returns the value and writes the gradient.
pub fn minimize<T: Real, F>(mut f: F, x0: Vec<T>, cfg: &LbfgsConfig<T>) -> LbfgsResult<T>
where
    F: FnMut(&[T], &mut [T]) -> T,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![T::zero(); n];
    let mut fx = f(&x, &mut g);
    let mut evals = 1usize;
    let mut hist: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(cfg.memory);
    let mut stall = 0usize;
    let mut dir = vec![T::zero(); n];
    let mut x_new = vec![T::zero(); n];
    let mut g_new = vec![T::zero(); n];

    for iter in 0..cfg.max_iter {
        let gn = norm(&g);
        if gn <= cfg.grad_tol || !fx.is_finite() {
            return LbfgsResult { x, value: fx, grad_norm: gn, iterations: iter, evaluations: evals, converged: gn <= cfg.grad_tol };
        }
        two_loop(&g, &hist, &mut dir);
        let mut slope = dot(&dir, &g);
        if !(slope < T::zero()) {
            // Curvature information is unusable; restart from steepest descent.
            hist.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -*gi);
            slope = -gn * gn;
        }
        let step0 = if hist.is_empty() { T::one().min(T::one() / gn) } else { T::one() };
        let ls = line_search(&mut f, &x, fx, &g, &dir, slope, step0, &mut x_new, &mut g_new, &mut evals);
        let Some(f_new) = ls else {
            if hist.is_empty() {
                return LbfgsResult { x, value: fx, grad_norm: gn, iterations: iter, evaluations: evals, converged: false };
            }
            hist.clear();
            continue;
        };
        let s: Vec<T> = x_new.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(a, b)| *a - *b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * norm(&s) {
            if hist.len() == cfg.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, T::one() / sy));
        }
        let decrease = fx - f_new;
        if decrease <= cfg.f_tol * fx.abs() {
            stall += 1;
        } else {
            stall = 0;
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        if stall >= 4 {
            let gn = norm(&g);
            return LbfgsResult { x, value: fx, grad_norm: gn, iterations: iter + 1, evaluations: evals, converged: gn <= cfg.grad_tol };
        }
    }
    let gn = norm(&g);
    LbfgsResult { x, value: fx, grad_norm: gn, iterations: cfg.max_iter, evaluations: evals, converged: gn <= cfg.grad_tol }
}

fn two_loop<T: Real>(g: &[T], hist: &VecDeque<(Vec<T>, Vec<T>, T)>, out: &mut [T]) {
    out.copy_from_slice(g);
    let mut alphas = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = *rho * dot(s, out);
        out.iter_mut().zip(y).for_each(|(q, yi)| *q -= a * *yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        out.iter_mut().for_each(|q| *q *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
        let b = *rho * dot(y, out);
        out.iter_mut().zip(s).for_each(|(r, si)| *r += (*a - b) * *si);
    }
    out.iter_mut().for_each(|r| *r = -*r);
}

#[allow(clippy::too_many_arguments)]
fn line_search<T: Real, F>(
    f: &mut F,
    x: &[T],
    f0: T,
    _g0: &[T],
    dir: &[T],
    slope0: T,
    step0: T,
    x_out: &mut [T],
    g_out: &mut [T],
    evals: &mut usize,
) -> Option<T>
where
    F: FnMut(&[T], &mut [T]) -> T,
{
    let c1 = T::lit(1e-4);
    let c2 = T::lit(0.9);
    let mut eval = |a: T, xo: &mut [T], go: &mut [T], evals: &mut usize| -> (T, T) {
        for i in 0..x.len() {
            xo[i] = x[i] + a * dir[i];
        }
        *evals += 1;
        let v = f(xo, go);
        (v, dot(go, dir))
    };

    let mut a_prev = T::zero();
    let mut f_prev = f0;
    let mut d_prev = slope0;
    let mut a = step0;
    for i in 0..30 {
        let (fa, da) = eval(a, x_out, g_out, evals);
        if !fa.is_finite() {
            a = (a_prev + a) * T::lit(0.5);
            continue;
        }
        if fa > f0 + c1 * a * slope0 || (i > 0 && fa >= f_prev) {
            return zoom(&mut eval, f0, slope0, (a_prev, f_prev, d_prev), (a, fa, da), x_out, g_out, evals);
        }
        if da.abs() <= -c2 * slope0 {
            return Some(fa);
        }
        if da >= T::zero() {
            return zoom(&mut eval, f0, slope0, (a, fa, da), (a_prev, f_prev, d_prev), x_out, g_out, evals);
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        a *= T::lit(2.5);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<T: Real, E>(
    eval: &mut E,
    f0: T,
    slope0: T,
    mut lo: (T, T, T),
    mut hi: (T, T, T),
    x_out: &mut [T],
    g_out: &mut [T],
    evals: &mut usize,
) -> Option<T>
where
    E: FnMut(T, &mut [T], &mut [T], &mut usize) -> (T, T),
{
    let c1 = T::lit(1e-4);
    let c2 = T::lit(0.9);
    for _ in 0..40 {
        let a = cubic_min(lo, hi);
        let (fa, da) = eval(a, x_out, g_out, evals);
        if !fa.is_finite() || fa > f0 + c1 * a * slope0 || fa >= lo.1 {
            hi = (a, fa, da);
        } else {
            if da.abs() <= -c2 * slope0 {
                return Some(fa);
            }
            if da * (hi.0 - lo.0) >= T::zero() {
                hi = lo;
            }
            lo = (a, fa, da);
        }
        if (hi.0 - lo.0).abs() <= T::epsilon() * lo.0.abs().max(T::one()) {
            break;
        }
    }
    // Accept the best sufficient-decrease point even without curvature.
    if lo.0 > T::zero() && lo.1 < f0 {
        let (fa, _) = eval(lo.0, x_out, g_out, evals);
        return Some(fa);
    }
    None
}

/// Minimiser of the cubic interpolant on the bracket, safeguarded to its interior.
fn cubic_min<T: Real>(lo: (T, T, T), hi: (T, T, T)) -> T {
    let (a, fa, da) = lo;
    let (b, fb, db) = hi;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let width = right - left;
    let d1 = da + db - T::lit(3.0) * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mut t = (a + b) * T::lit(0.5);
    if disc >= T::zero() && fb.is_finite() {
        let d2 = (b - a).signum() * disc.sqrt();
        let cand = b - (b - a) * (db + d2 - d1) / (db - da + T::lit(2.0) * d2);
        if cand.is_finite() {
            t = cand;
        }
    }
    let margin = T::lit(0.1) * width;
    t.max(left + margin).min(right - margin)
}
