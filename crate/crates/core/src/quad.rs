//! Quadrature rules: fixed Gauss–Legendre, adaptive Gauss–Kronrod (7/15) and
//! tanh–sinh for integrands with algebraic endpoint singularities.

use crate::Real;

/// Fixed `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let nf = n as f64;
        for i in 0..n {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(T::lit(x));
            weights.push(T::lit(2.0 / ((1.0 - x * x) * dp * dp)));
        }
        Self { nodes, weights }
    }

    /// Nodes and weights on `[-1, 1]`.
    pub fn rule(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> T {
        let half = (b - a) * T::lit(0.5);
        let mid = (b + a) * T::lit(0.5);
        let mut s = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += *w * f(mid + half * *x);
        }
        s * half
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let s = f(mid - dx) + f(mid + dx);
        kron += T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Result of an adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature on `[a, b]`.
pub fn integrate_adaptive<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), converged: true };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    const MAX_INTERVALS: usize = 2000;
    while err > abs_tol.max(rel_tol * total.abs()) {
        if intervals.len() >= MAX_INTERVALS {
            return QuadResult { value: total, error: err, converged: false };
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, iv)| if iv.3 > acc.1 { (i, iv.3) } else { acc });
        let (lo, hi, v_old, e_old) = intervals.swap_remove(idx);
        let m = (lo + hi) * T::lit(0.5);
        if m <= lo || m >= hi {
            // Interval cannot be split further at this precision.
            intervals.push((lo, hi, v_old, T::zero()));
            err -= e_old;
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, m);
        let (v2, e2) = gk15(&mut f, m, hi);
        total += v1 + v2 - v_old;
        err += e1 + e2 - e_old;
        intervals.push((lo, m, v1, e1));
        intervals.push((m, hi, v2, e2));
    }
    // Re-sum to shed accumulated rounding from the incremental updates.
    let value = intervals.iter().map(|iv| iv.2).sum();
    QuadResult { value, error: err, converged: true }
}

/// Tanh–sinh (double exponential) quadrature on `[a, b]`.
///
/// The integrand receives `(x, x - a, b - x)` with both distances computed
/// without cancellation, so factors like `(b - x)^(α-1)` stay accurate near
/// the endpoints.
pub fn tanh_sinh<T: Real, F: FnMut(T, T, T) -> T>(mut f: F, a: T, b: T, tol: T) -> QuadResult<T> {
    if a == b {
        return QuadResult { value: T::zero(), error: T::zero(), converged: true };
    }
    let half = (b - a) * T::lit(0.5);
    let pi_2 = T::FRAC_PI_2();
    let u_max = -T::min_positive_value().ln() * T::lit(0.45);
    let t_max = (u_max / pi_2).asinh();

    let mut eval = |t: T| -> T {
        let u = pi_2 * t.sinh();
        let cu = u.cosh();
        let w = half * pi_2 * t.cosh() / (cu * cu);
        if w == T::zero() {
            return T::zero();
        }
        let two = T::lit(2.0);
        let dl = two * half / (T::one() + (-two * u).exp());
        let dr = two * half / (T::one() + (two * u).exp());
        if dl <= T::zero() || dr <= T::zero() {
            return T::zero();
        }
        let x = if t < T::zero() { a + dl } else { b - dr };
        let v = f(x, dl, dr);
        if v.is_finite() {
            w * v
        } else {
            T::zero()
        }
    };

    let mut h = T::one();
    let mut sum = eval(T::zero());
    let mut k = 1usize;
    loop {
        let t = h * T::from_usize_exact(k);
        if t > t_max {
            break;
        }
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 1..=12 {
        h *= T::lit(0.5);
        let mut k = 1usize;
        loop {
            let t = h * T::from_usize_exact(k);
            if t > t_max {
                break;
            }
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= tol * estimate.abs().max(T::min_positive_value()) || diff == T::zero() {
            return QuadResult { value: estimate, error: diff, converged: true };
        }
    }
    QuadResult { value: estimate, error: T::nan(), converged: false }
}
