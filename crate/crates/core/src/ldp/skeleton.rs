use crate::coefficients::{AveragedDrift, Coefficients, EmpiricalMeasure};
use crate::error::{Error, Result};
use crate::fractional::{CMControl, Hurst, KOperator};
use crate::grid::{Density, Path, TimeGrid};
use crate::Real;

/// Measure argument and diffusion matrix at one RK4 stage of the limit path.
struct Stage<T> {
    t: T,
    mu: EmpiricalMeasure<T>,
    sigma: Vec<T>,
}

/// Skeleton dynamics `dX̄ʰ = b̄(t, X̄ʰ, δ_{X̄⁰_t})dt + σ(t, δ_{X̄⁰_t})u̇_t dt`
/// with `u̇ = K̇_H û`.
///
/// The limit path `X̄⁰` is integrated once with the same RK4 scheme, and the
/// skeleton reuses its stage states as measure arguments, so a zero control
/// reproduces `X̄⁰` exactly.
pub struct SkeletonProblem<'a, T: Real> {
    bbar: &'a dyn AveragedDrift<T>,
    grid: TimeGrid<T>,
    x0: Vec<T>,
    op: KOperator<T>,
    limit: Path<T>,
    stages: Vec<[Stage<T>; 4]>,
}

/// Stage inputs of one forward pass, `4·n` values per step.
pub(crate) struct Tape<T> {
    z: Vec<T>,
}

pub(crate) struct Scratch<T> {
    z: Vec<T>,
    k: [Vec<T>; 4],
}

impl<T: Real> Scratch<T> {
    pub(crate) fn new(n: usize) -> Self {
        Self { z: vec![T::zero(); n], k: [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]] }
    }
}

impl<'a, T: Real> SkeletonProblem<'a, T> {
    pub fn new(
        coeffs: &'a dyn Coefficients<T>,
        bbar: &'a dyn AveragedDrift<T>,
        grid: TimeGrid<T>,
        hurst: Hurst<T>,
        x0: &[T],
    ) -> Result<Self> {
        let n = coeffs.slow_dim();
        if x0.len() != n {
            return Err(Error::Dimension(format!("initial point has {} entries, expected {n}", x0.len())));
        }
        let op = KOperator::new(grid, hurst)?;
        let dt = grid.dt();
        let half = dt * T::lit(0.5);
        let sixth = dt / T::lit(6.0);
        let mut limit = Path::zeros(grid, n);
        limit.at_mut(0).copy_from_slice(x0);
        let mut x = x0.to_vec();
        let mut k = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        let mut stages = Vec::with_capacity(grid.steps());
        for s in 0..grid.steps() {
            let t = grid.node(s);
            let times = [t, t + half, t + half, grid.node(s + 1)];
            let mut z = x.clone();
            let mut row: Vec<Stage<T>> = Vec::with_capacity(4);
            for i in 0..4 {
                if i > 0 {
                    let c = if i == 3 { dt } else { half };
                    for j in 0..n {
                        z[j] = x[j] + c * k[i - 1][j];
                    }
                }
                let mu = EmpiricalMeasure::dirac(&z);
                bbar.eval(times[i], &z, &mu, &mut k[i]);
                let mut sigma = vec![T::zero(); n * n];
                coeffs.slow_diffusion(times[i], &mu, &mut sigma);
                row.push(Stage { t: times[i], mu, sigma });
            }
            for j in 0..n {
                x[j] += sixth * (k[0][j] + T::lit(2.0) * (k[1][j] + k[2][j]) + k[3][j]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: s + 1, time: grid.node(s + 1).as_f64() });
            }
            limit.at_mut(s + 1).copy_from_slice(&x);
            let row: [Stage<T>; 4] = row.try_into().map_err(|_| ()).expect("four stages");
            stages.push(row);
        }
        Ok(Self { bbar, grid, x0: x0.to_vec(), op, limit, stages })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid<T> {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &[T] {
        &self.x0
    }

    /// The limit path `X̄⁰`.
    pub fn limit(&self) -> &Path<T> {
        &self.limit
    }

    pub fn operator(&self) -> &KOperator<T> {
        &self.op
    }

    /// RK4 for the skeleton given the cellwise drift `u̇`.
    pub(crate) fn forward(&self, udot: &Density<T>, mut tape: Option<&mut Tape<T>>) -> Result<Path<T>> {
        let n = self.dim();
        let mut out = Path::zeros(self.grid, n);
        out.at_mut(0).copy_from_slice(&self.x0);
        let mut x = self.x0.clone();
        let mut scratch = Scratch::new(n);
        if let Some(tp) = tape.as_deref_mut() {
            tp.z.clear();
            tp.z.reserve(self.grid.steps() * 4 * n);
        }
        for s in 0..self.grid.steps() {
            self.step(s, &mut x, udot.at(s), &mut scratch, tape.as_deref_mut().map(|t| &mut t.z));
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp { step: s + 1, time: self.grid.node(s + 1).as_f64() });
            }
            out.at_mut(s + 1).copy_from_slice(&x);
        }
        Ok(out)
    }

    /// One RK4 step over cell `s` with constant drift `u`.
    pub(crate) fn step(&self, s: usize, x: &mut [T], u: &[T], sc: &mut Scratch<T>, mut tape: Option<&mut Vec<T>>) {
        let n = self.dim();
        let dt = self.grid.dt();
        let half = dt * T::lit(0.5);
        let sixth = dt / T::lit(6.0);
        let Scratch { z, k } = sc;
        for i in 0..4 {
            if i > 0 {
                let c = if i == 3 { dt } else { half };
                for j in 0..n {
                    z[j] = x[j] + c * k[i - 1][j];
                }
            } else {
                z.copy_from_slice(x);
            }
            if let Some(tp) = tape.as_deref_mut() {
                tp.extend_from_slice(z);
            }
            let st = &self.stages[s][i];
            self.bbar.eval(st.t, z, &st.mu, &mut k[i]);
            for a in 0..n {
                let mut acc = T::zero();
                for b in 0..n {
                    acc += st.sigma[a * n + b] * u[b];
                }
                k[i][a] += acc;
            }
        }
        for j in 0..n {
            x[j] += sixth * (k[0][j] + T::lit(2.0) * (k[1][j] + k[2][j]) + k[3][j]);
        }
    }

    /// Reverse pass of `forward`: given `∂Φ/∂X_k` at every node, returns
    /// `∂Φ/∂u̇` per cell.
    pub(crate) fn backward(&self, tape: &Tape<T>, node_grad: &[T]) -> Density<T> {
        let n = self.dim();
        let dt = self.grid.dt();
        let half = dt * T::lit(0.5);
        let sixth = dt / T::lit(6.0);
        let third = dt / T::lit(3.0);
        let mut out = Density::zeros(self.grid, n);
        let mut lam: Vec<T> = node_grad[self.grid.steps() * n..].to_vec();
        let mut jac = vec![T::zero(); n * n];
        let mut kbar = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
        let mut zbar = vec![T::zero(); n];
        for s in (0..self.grid.steps()).rev() {
            let row = &self.stages[s];
            let weights = [sixth, third, third, sixth];
            for i in 0..4 {
                for j in 0..n {
                    kbar[i][j] = weights[i] * lam[j];
                }
            }
            let mut xbar = lam.clone();
            let mut ubar = vec![T::zero(); n];
            for i in (0..4).rev() {
                let st = &row[i];
                let z = &tape.z[(s * 4 + i) * n..(s * 4 + i + 1) * n];
                self.bbar.jacobian_x(st.t, z, &st.mu, &mut jac);
                for b in 0..n {
                    let mut acc = T::zero();
                    let mut au = T::zero();
                    for a in 0..n {
                        acc += jac[a * n + b] * kbar[i][a];
                        au += st.sigma[a * n + b] * kbar[i][a];
                    }
                    zbar[b] = acc;
                    ubar[b] += au;
                }
                for j in 0..n {
                    xbar[j] += zbar[j];
                }
                if i > 0 {
                    let c = if i == 3 { dt } else { half };
                    for j in 0..n {
                        kbar[i - 1][j] += c * zbar[j];
                    }
                }
            }
            out.at_mut(s).copy_from_slice(&ubar);
            for j in 0..n {
                lam[j] = xbar[j] + node_grad[s * n + j];
            }
        }
        out
    }

    pub(crate) fn new_tape(&self) -> Tape<T> {
        Tape { z: Vec::new() }
    }

    fn check_control(&self, h: &CMControl<T>) -> Result<()> {
        TimeGrid::check_same(h.grid(), &self.grid)?;
        if h.uhat.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "control has slow dim {}, problem has {}",
                h.uhat.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `Φ(∫ K̇_H û)`: the skeleton path for control `h`. `v̂` does not enter.
    pub fn solve(&self, h: &CMControl<T>) -> Result<Path<T>> {
        self.check_control(h)?;
        let udot = self.op.apply_kdot(&h.uhat)?;
        self.forward(&udot, None)
    }

    /// Gradient of `Φ(X̄ʰ)` with respect to `û` for node gradients `∂Φ/∂X_k`.
    pub fn gradient(&self, h: &CMControl<T>, node_grad: impl FnOnce(&Path<T>) -> Vec<T>) -> Result<(Path<T>, Density<T>)> {
        self.check_control(h)?;
        let udot = self.op.apply_kdot(&h.uhat)?;
        let mut tape = self.new_tape();
        let path = self.forward(&udot, Some(&mut tape))?;
        let g = node_grad(&path);
        if g.len() != path.len() * self.dim() {
            return Err(Error::Dimension(format!("node gradient has {} entries, expected {}", g.len(), path.len() * self.dim())));
        }
        let gu = self.backward(&tape, &g);
        Ok((path, self.op.apply_kdot_transpose(&gu)?))
    }
}

/// Skeleton path for control `h`.
pub fn skeleton_solve<T: Real>(p: &SkeletonProblem<'_, T>, h: &CMControl<T>) -> Result<Path<T>> {
    p.solve(h)
}

/// `½‖h‖²_H = ½∫(|û|² + |v̂|²)dt`.
pub fn energy<T: Real>(h: &CMControl<T>) -> T {
    h.energy()
}
