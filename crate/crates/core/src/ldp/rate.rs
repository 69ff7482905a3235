use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::skeleton::{Scratch, SkeletonProblem};
use crate::error::{Error, Result};
use crate::fractional::CMControl;
use crate::grid::{Density, Path, TimeGrid};
use crate::optim::{minimize, LbfgsConfig};
use crate::Real;

/// Augmented-Lagrangian settings shared by the rate solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateConfig {
    /// L-BFGS iterations per outer round.
    pub max_iter: usize,
    pub max_outer: usize,
    /// Gradient tolerance of the inner problem.
    pub grad_tol: f64,
    /// Constraint tolerance: sup-norm path residual, or radius shortfall.
    pub path_tol: f64,
    pub penalty0: f64,
    pub penalty_growth: f64,
    /// Candidate exit times tried by `rate_of_event`.
    pub exit_candidates: usize,
    /// Temperatures of the log-sum-exp polish, relative to `r`.
    pub lse_temperatures: Vec<f64>,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            max_iter: 400,
            max_outer: 40,
            grad_tol: 1e-9,
            path_tol: 1e-7,
            penalty0: 10.0,
            penalty_growth: 10.0,
            exit_candidates: 16,
            lse_temperatures: vec![1e-1, 3e-2, 1e-2, 3e-3],
        }
    }
}

/// Estimated value of the rate function with its minimiser.
#[derive(Debug, Clone)]
pub struct RateResult<T> {
    /// `½‖ĥ‖²` at the minimiser when converged, `+∞` otherwise.
    pub value: T,
    pub control: CMControl<T>,
    pub residual: T,
    pub converged: bool,
    pub iterations: usize,
}

/// JSON view of a [`RateResult`].
#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Real> RateResult<T> {
    pub fn summary(&self) -> RateSummary {
        RateSummary {
            value: self.value.as_f64(),
            residual: self.residual.as_f64(),
            converged: self.converged,
            iterations: self.iterations,
        }
    }
}

/// Equality constraints `g(X) = 0` on the skeleton path.
trait Constraint<T: Real>: Sync {
    fn values(&self, path: &Path<T>) -> Vec<T>;
    /// Adds `Σ_m weights_m ∇g_m` to `out` (node-major, all nodes).
    fn node_grad(&self, path: &Path<T>, weights: &[T], out: &mut [T]);
    /// Violation in natural units, compared with `path_tol`.
    fn violation(&self, path: &Path<T>) -> T;
}

/// `sqrt(c_k)(X_k - f_k)` with trapezoid weights `c_k`.
struct PathTarget<'a, T> {
    target: &'a Path<T>,
    weights: Vec<T>,
}

impl<T: Real> Constraint<T> for PathTarget<'_, T> {
    fn values(&self, path: &Path<T>) -> Vec<T> {
        let n = path.dim();
        let mut out = Vec::with_capacity(path.values().len() - n);
        for k in 1..path.len() {
            for i in 0..n {
                out.push(self.weights[k] * (path.at(k)[i] - self.target.at(k)[i]));
            }
        }
        out
    }

    fn node_grad(&self, path: &Path<T>, weights: &[T], out: &mut [T]) {
        let n = path.dim();
        for k in 1..path.len() {
            for i in 0..n {
                out[k * n + i] += weights[(k - 1) * n + i] * self.weights[k];
            }
        }
    }

    fn violation(&self, path: &Path<T>) -> T {
        path.sup_distance(self.target)
    }
}

/// `(|X_j - X̄⁰_j|² - r²) / 2r` at one node.
struct ExitAt<'a, T> {
    limit: &'a Path<T>,
    node: usize,
    r: T,
}

impl<T: Real> Constraint<T> for ExitAt<'_, T> {
    fn values(&self, path: &Path<T>) -> Vec<T> {
        let d2: T = dev(path, self.limit, self.node).iter().map(|v| *v * *v).sum();
        vec![(d2 - self.r * self.r) / (self.r + self.r)]
    }

    fn node_grad(&self, path: &Path<T>, weights: &[T], out: &mut [T]) {
        let n = path.dim();
        for (i, d) in dev(path, self.limit, self.node).into_iter().enumerate() {
            out[self.node * n + i] += weights[0] * d / self.r;
        }
    }

    fn violation(&self, path: &Path<T>) -> T {
        let d = dev(path, self.limit, self.node).iter().map(|v| *v * *v).sum::<T>().sqrt();
        (d - self.r).abs()
    }
}

/// Smooth sup: `τ log Σ_k exp(|d_k|/τ) - τ log N - r`, which bounds the true
/// sup from below so a zero of it is feasible.
struct ExitLse<'a, T> {
    limit: &'a Path<T>,
    r: T,
    tau: T,
}

impl<T: Real> ExitLse<'_, T> {
    fn norms(&self, path: &Path<T>) -> Vec<T> {
        let eta = self.r * T::lit(1e-8);
        (1..path.len())
            .map(|k| (dev(path, self.limit, k).iter().map(|v| *v * *v).sum::<T>() + eta * eta).sqrt())
            .collect()
    }

    fn soft(&self, norms: &[T]) -> (T, Vec<T>) {
        let m = norms.iter().copied().fold(T::neg_infinity(), T::max);
        let e: Vec<T> = norms.iter().map(|v| ((*v - m) / self.tau).exp()).collect();
        let s: T = e.iter().copied().sum();
        let value = m + self.tau * s.ln() - self.tau * T::from_usize_exact(norms.len()).ln() - self.r;
        (value, e.into_iter().map(|v| v / s).collect())
    }
}

impl<T: Real> Constraint<T> for ExitLse<'_, T> {
    fn values(&self, path: &Path<T>) -> Vec<T> {
        vec![self.soft(&self.norms(path)).0]
    }

    fn node_grad(&self, path: &Path<T>, weights: &[T], out: &mut [T]) {
        let n = path.dim();
        let norms = self.norms(path);
        let (_, p) = self.soft(&norms);
        for k in 1..path.len() {
            let c = weights[0] * p[k - 1] / norms[k - 1];
            for (i, d) in dev(path, self.limit, k).into_iter().enumerate() {
                out[k * n + i] += c * d;
            }
        }
    }

    fn violation(&self, path: &Path<T>) -> T {
        let sup = sup_dev(path, self.limit);
        (self.r - sup).max(T::zero())
    }
}

fn dev<T: Real>(path: &Path<T>, limit: &Path<T>, k: usize) -> Vec<T> {
    path.at(k).iter().zip(limit.at(k)).map(|(a, b)| *a - *b).collect()
}

fn sup_dev<T: Real>(path: &Path<T>, limit: &Path<T>) -> T {
    path.sup_distance(limit)
}

fn to_control<T: Real>(grid: TimeGrid<T>, n: usize, w: &[T]) -> CMControl<T> {
    let s = grid.dt().sqrt().recip();
    let uhat = Density::from_values(grid, n, w.iter().map(|v| *v * s).collect()).expect("consistent layout");
    CMControl::slow(uhat, 0)
}

struct AlOutcome<T> {
    w: Vec<T>,
    violation: T,
    converged: bool,
    iterations: usize,
}

/// `min ½|w|²` subject to `g(X̄ʰ(w)) = 0` by an augmented Lagrangian.
fn solve_al<T: Real>(p: &SkeletonProblem<'_, T>, cons: &dyn Constraint<T>, w0: Vec<T>, cfg: &RateConfig) -> AlOutcome<T> {
    let grid = *p.grid();
    let n = p.dim();
    let inv_sqrt_dt = grid.dt().sqrt().recip();
    let lcfg = LbfgsConfig { memory: 12, max_iter: cfg.max_iter, grad_tol: T::lit(cfg.grad_tol), f_tol: T::epsilon() };
    let tol = T::lit(cfg.path_tol);
    let mut w = w0;
    let mut rho = T::lit(cfg.penalty0);
    let mut lambda: Option<Vec<T>> = None;
    let mut prev_violation = T::infinity();
    let mut iterations = 0;
    let mut tape = p.new_tape();

    let path_of = |w: &[T], tape: Option<&mut super::skeleton::Tape<T>>| -> Option<Path<T>> {
        let c = to_control(grid, n, w);
        let udot = p.operator().apply_kdot(&c.uhat).ok()?;
        p.forward(&udot, tape).ok()
    };

    for _ in 0..cfg.max_outer {
        let lam = lambda.clone();
        let res = minimize(
            |w: &[T], g: &mut [T]| {
                let Some(path) = path_of(w, Some(&mut tape)) else {
                    g.iter_mut().for_each(|v| *v = T::zero());
                    return T::infinity();
                };
                let vals = cons.values(&path);
                let mut weights = vec![T::zero(); vals.len()];
                let mut f = T::lit(0.5) * w.iter().map(|v| *v * *v).sum::<T>();
                for (m, gv) in vals.iter().enumerate() {
                    let l = lam.as_ref().map_or(T::zero(), |l| l[m]);
                    f += l * *gv + T::lit(0.5) * rho * *gv * *gv;
                    weights[m] = l + rho * *gv;
                }
                let mut node = vec![T::zero(); path.values().len()];
                cons.node_grad(&path, &weights, &mut node);
                let gu = p.backward(&tape, &node);
                let gh = p.operator().apply_kdot_transpose(&gu).expect("grid checked");
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi = w[i] + gh.values()[i] * inv_sqrt_dt;
                }
                f
            },
            w,
            &lcfg,
        );
        iterations += res.iterations;
        w = res.x;
        let Some(path) = path_of(&w, None) else { break };
        let violation = cons.violation(&path);
        if violation <= tol && res.converged {
            return AlOutcome { w, violation, converged: true, iterations };
        }
        let vals = cons.values(&path);
        let l = lambda.get_or_insert_with(|| vec![T::zero(); vals.len()]);
        for (lm, gv) in l.iter_mut().zip(&vals) {
            *lm += rho * *gv;
        }
        if violation > T::lit(0.25) * prev_violation {
            rho *= T::lit(cfg.penalty_growth);
        }
        prev_violation = violation;
        if !rho.is_finite() || rho > T::lit(1e14) {
            break;
        }
    }
    let violation = path_of(&w, None).map_or(T::infinity(), |p| cons.violation(&p));
    AlOutcome { w, violation, converged: false, iterations }
}

fn finish<T: Real>(p: &SkeletonProblem<'_, T>, out: AlOutcome<T>, m: usize) -> RateResult<T> {
    let grid = *p.grid();
    let c = to_control(grid, p.dim(), &out.w);
    let control = CMControl::slow(c.uhat, m);
    let value = if out.converged { control.energy() } else { T::infinity() };
    RateResult { value, control, residual: out.violation, converged: out.converged, iterations: out.iterations }
}

/// `I(f) = inf{½‖h‖² : G⁰(h) = f}`.
///
/// With an invertible `σ` the discretised constraint `G⁰(h) = f` has exactly
/// one solution, recovered cell by cell (Newton on each RK4 step, then forward
/// substitution through the lower-triangular `K̇_H`). Otherwise the penalised
/// problem is minimised with adjoint gradients. Unreachable targets come back
/// non-converged with value `+∞`.
pub fn rate_of_path<T: Real>(p: &SkeletonProblem<'_, T>, target: &Path<T>, fast_dim: usize, cfg: &RateConfig) -> Result<RateResult<T>> {
    TimeGrid::check_same(target.grid(), p.grid())?;
    if target.dim() != p.dim() {
        return Err(Error::Dimension(format!("target has dim {}, problem has {}", target.dim(), p.dim())));
    }
    let start_gap = target.at(0).iter().zip(p.x0()).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max);
    if start_gap > T::lit(cfg.path_tol) {
        return Err(Error::Domain(format!("target starts {} away from the initial point", start_gap.as_f64())));
    }
    let grid = *p.grid();
    if let Some(uhat) = invert_path(p, target, cfg) {
        let control = CMControl::slow(uhat, fast_dim);
        let residual = p.solve(&control)?.sup_distance(target);
        if residual <= T::lit(cfg.path_tol) {
            return Ok(RateResult { value: control.energy(), control, residual, converged: true, iterations: grid.steps() });
        }
    }
    let dt = grid.dt();
    let weights: Vec<T> = (0..=grid.steps())
        .map(|k| if k == grid.steps() { (dt * T::lit(0.5)).sqrt() } else { dt.sqrt() })
        .collect();
    let cons = PathTarget { target, weights };
    let w0 = vec![T::zero(); grid.steps() * p.dim()];
    Ok(finish(p, solve_al(p, &cons, w0, cfg), fast_dim))
}

/// Cellwise inversion of the skeleton map; `None` when a step is singular.
fn invert_path<T: Real>(p: &SkeletonProblem<'_, T>, target: &Path<T>, cfg: &RateConfig) -> Option<Density<T>> {
    let grid = *p.grid();
    let n = p.dim();
    let steps = grid.steps();
    let mut sc = Scratch::new(n);
    let mut x = p.x0().to_vec();
    let mut u = vec![T::zero(); n];
    let mut udot = Density::zeros(grid, n);
    let mut trial = vec![T::zero(); n];
    let mut jac = vec![T::zero(); n * n];
    let mut plus = vec![T::zero(); n];
    let mut minus = vec![T::zero(); n];
    for s in 0..steps {
        let goal = target.at(s + 1);
        let scale = goal.iter().fold(T::one(), |m, v| m.max(v.abs()));
        let tol = (T::lit(cfg.path_tol) * T::lit(1e-3)).max(T::epsilon() * T::lit(64.0) * scale);
        let mut ok = false;
        for _ in 0..40 {
            trial.copy_from_slice(&x);
            p.step(s, &mut trial, &u, &mut sc, None);
            let r: Vec<T> = trial.iter().zip(goal).map(|(a, b)| *a - *b).collect();
            if r.iter().all(|v| v.abs() <= tol) {
                ok = true;
                break;
            }
            let eta = T::lit(1e-6) * u.iter().fold(T::one(), |m, v| m.max(v.abs()));
            for j in 0..n {
                let mut up = u.clone();
                up[j] += eta;
                plus.copy_from_slice(&x);
                p.step(s, &mut plus, &up, &mut sc, None);
                up[j] = u[j] - eta;
                minus.copy_from_slice(&x);
                p.step(s, &mut minus, &up, &mut sc, None);
                for i in 0..n {
                    jac[i * n + j] = (plus[i] - minus[i]) / (eta + eta);
                }
            }
            let delta = solve_dense(n, &mut jac.clone(), r)?;
            for j in 0..n {
                u[j] -= delta[j];
            }
        }
        if !ok {
            return None;
        }
        x.copy_from_slice(&trial);
        udot.at_mut(s).copy_from_slice(&u);
    }
    // Forward substitution through the lower-triangular K̇_H matrix.
    let op = p.operator();
    let mut uhat = Density::zeros(grid, n);
    for k in 0..steps {
        let d = op.entry(k, k);
        if !(d.abs() > T::zero()) {
            return None;
        }
        for i in 0..n {
            let mut acc = udot.at(k)[i];
            for j in 0..k {
                acc -= op.entry(k, j) * uhat.at(j)[i];
            }
            uhat.at_mut(k)[i] = acc / d;
        }
    }
    Some(uhat)
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense<T: Real>(n: usize, a: &mut [T], mut b: Vec<T>) -> Option<Vec<T>> {
    let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().partial_cmp(&a[j * n + c].abs()).expect("finite"))?;
        if !(a[piv * n + c].abs() > scale * T::epsilon() * T::lit(1e3)) {
            return None;
        }
        if piv != c {
            for j in 0..n {
                a.swap(piv * n + j, c * n + j);
            }
            b.swap(piv, c);
        }
        for i in c + 1..n {
            let f = a[i * n + c] / a[c * n + c];
            for j in c..n {
                let v = a[c * n + j];
                a[i * n + j] -= f * v;
            }
            let v = b[c];
            b[i] -= f * v;
        }
    }
    for c in (0..n).rev() {
        let mut acc = b[c];
        for j in c + 1..n {
            acc -= a[c * n + j] * b[j];
        }
        b[c] = acc / a[c * n + c];
    }
    Some(b)
}

/// Minimum-norm start reaching `|X_j - X̄⁰_j| = r` along `e` to first order.
fn linear_start<T: Real>(p: &SkeletonProblem<'_, T>, node: usize, e: &[T], r: T) -> Option<Vec<T>> {
    let grid = *p.grid();
    let n = p.dim();
    let zero = CMControl::zero(grid, n, 0);
    let (_, gu) = p
        .gradient(&zero, |path| {
            let mut g = vec![T::zero(); path.values().len()];
            g[node * n..(node + 1) * n].copy_from_slice(e);
            g
        })
        .ok()?;
    let v: Vec<T> = gu.values().iter().map(|x| *x * grid.dt().sqrt().recip()).collect();
    let vv: T = v.iter().map(|x| *x * *x).sum();
    if !(vv > T::zero()) {
        return None;
    }
    Some(v.into_iter().map(|x| x * r / vv).collect())
}

/// `inf{I(f) : sup_k |f_k - X̄⁰_k| ≥ r}`.
///
/// The event is the union of single-time exits, so each candidate exit node
/// is solved separately; the best node is refined locally and then polished
/// with a log-sum-exp relaxation of the sup. Returns the smallest converged
/// value.
pub fn rate_of_event<T: Real>(p: &SkeletonProblem<'_, T>, r: T, fast_dim: usize, cfg: &RateConfig) -> Result<RateResult<T>> {
    if !(r >= T::zero()) {
        return Err(Error::Domain(format!("radius must be non-negative, got {}", r.as_f64())));
    }
    let grid = *p.grid();
    let n = p.dim();
    if r == T::zero() {
        return Ok(RateResult {
            value: T::zero(),
            control: CMControl::zero(grid, n, fast_dim),
            residual: T::zero(),
            converged: true,
            iterations: 0,
        });
    }
    let steps = grid.steps();
    let count = cfg.exit_candidates.clamp(1, steps);
    let mut nodes: Vec<usize> = (1..=count).map(|i| (i * steps).div_ceil(count)).collect();
    nodes.dedup();

    // Best converged solve at `node`, and the iterations spent on all solves.
    let single = |node: usize| -> (Option<RateResult<T>>, usize) {
        let mut best: Option<RateResult<T>> = None;
        let mut spent = 0;
        for i in 0..n {
            for sign in [T::one(), -T::one()] {
                let mut e = vec![T::zero(); n];
                e[i] = sign;
                let Some(w0) = linear_start(p, node, &e, r) else { continue };
                let cons = ExitAt { limit: p.limit(), node, r };
                let res = finish(p, solve_al(p, &cons, w0, cfg), fast_dim);
                spent += res.iterations;
                if res.converged && best.as_ref().is_none_or(|b| res.value < b.value) {
                    best = Some(res);
                }
            }
        }
        (best, spent)
    };
    let better = |a: Option<RateResult<T>>, b: Option<RateResult<T>>| match (a, b) {
        (Some(a), Some(b)) => Some(if b.value < a.value { b } else { a }),
        (a, b) => a.or(b),
    };

    let solved: Vec<(usize, Option<RateResult<T>>, usize)> = nodes
        .par_iter()
        .map(|&j| {
            let (r, spent) = single(j);
            (j, r, spent)
        })
        .collect();
    let mut iterations: usize = solved.iter().map(|s| s.2).sum();
    let found = solved.into_iter().filter_map(|(j, r, _)| r.map(|r| (j, r)));
    let Some((mut at, mut best)) = found.reduce(|a, b| if b.1.value < a.1.value { b } else { a }) else {
        return Ok(RateResult {
            value: T::infinity(),
            control: CMControl::zero(grid, n, fast_dim),
            residual: T::infinity(),
            converged: false,
            iterations,
        });
    };

    // Walk to the locally best exit node.
    for dir in [1isize, -1] {
        loop {
            let j = at as isize + dir;
            if j < 1 || j as usize > steps {
                break;
            }
            let (c, spent) = single(j as usize);
            iterations += spent;
            match c {
                Some(c) if c.value < best.value => {
                    at = j as usize;
                    best = c;
                }
                _ => break,
            }
        }
    }

    let mut w: Vec<T> = best.control.uhat.values().iter().map(|v| *v * grid.dt().sqrt()).collect();
    let mut polished: Option<RateResult<T>> = None;
    for &tau in &cfg.lse_temperatures {
        let cons = ExitLse { limit: p.limit(), r, tau: r * T::lit(tau) };
        let out = solve_al(p, &cons, w.clone(), cfg);
        iterations += out.iterations;
        w = out.w.clone();
        if out.converged {
            polished = better(polished, Some(finish(p, out, fast_dim)));
        }
    }
    let mut result = better(Some(best), polished).expect("best exists");
    result.iterations = iterations;
    Ok(result)
}
