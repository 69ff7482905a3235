use crate::error::{Error, Result};
use crate::linalg::hungarian;
use crate::Real;

/// Equal-weight particle measure `(1/P) Σ δ_{x_i}` with cached moments.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<T> {
    dim: usize,
    atoms: Vec<T>,
    mean: Vec<T>,
    second_moment: T,
}

impl<T: Real> EmpiricalMeasure<T> {
    /// Atoms stored row-major, `dim` values each.
    pub fn new(dim: usize, atoms: Vec<T>) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || !atoms.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "empirical measure needs a positive multiple of {dim} values, got {}",
                atoms.len()
            )));
        }
        let p = atoms.len() / dim;
        let pf = T::from_usize_exact(p);
        let mut mean = vec![T::zero(); dim];
        let mut sq = T::zero();
        for row in atoms.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += *v;
                sq += *v * *v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= pf);
        Ok(Self { dim, atoms, mean, second_moment: sq / pf })
    }

    pub fn dirac(x: &[T]) -> Self {
        let sq = x.iter().map(|v| *v * *v).sum();
        Self { dim: x.len(), atoms: x.to_vec(), mean: x.to_vec(), second_moment: sq }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    #[inline]
    pub fn atom(&self, i: usize) -> &[T] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn atoms(&self) -> &[T] {
        &self.atoms
    }

    #[inline]
    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// `μ(|·|²)`.
    #[inline]
    pub fn second_moment(&self) -> T {
        self.second_moment
    }
}

/// `W_θ` between equal-weight empirical measures.
///
/// Exact in one dimension for any atom counts (quantile coupling); in higher
/// dimension exact by optimal assignment when the atom counts agree.
pub fn wasserstein<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, theta: T) -> Result<T> {
    if mu.dim != nu.dim {
        return Err(Error::Dimension(format!("measure dimensions differ: {} vs {}", mu.dim, nu.dim)));
    }
    if !(theta >= T::one()) {
        return Err(Error::Domain(format!("Wasserstein order must be >= 1, got {theta}")));
    }
    let cost = if mu.dim == 1 { quantile_cost(&mu.atoms, &nu.atoms, theta) } else { assignment_cost(mu, nu, theta)? };
    Ok(cost.powf(T::one() / theta))
}

pub fn wasserstein2<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>) -> Result<T> {
    wasserstein(mu, nu, T::lit(2.0))
}

fn quantile_cost<T: Real>(a: &[T], b: &[T], theta: T) -> T {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite atoms"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite atoms"));
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        let s: T = a.iter().zip(&b).map(|(x, y)| (*x - *y).abs().powf(theta)).sum();
        return s / T::from_usize_exact(na);
    }
    // Walk the merged cumulative weights; both CDFs step at multiples of 1/na, 1/nb.
    // Work in integer units of 1/(na nb) to keep the breakpoints exact.
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (nb, na);
    let mut s = T::zero();
    while i < na && j < nb {
        let w = ra.min(rb);
        s += T::from_usize_exact(w) * (a[i] - b[j]).abs().powf(theta);
        ra -= w;
        rb -= w;
        if ra == 0 {
            i += 1;
            ra = nb;
        }
        if rb == 0 {
            j += 1;
            rb = na;
        }
    }
    s / T::from_usize_exact(na * nb)
}

fn assignment_cost<T: Real>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>, theta: T) -> Result<T> {
    let n = mu.len();
    if n != nu.len() {
        return Err(Error::Unsupported(format!(
            "multivariate Wasserstein distance needs equal atom counts, got {} and {}",
            n,
            nu.len()
        )));
    }
    let mut cost = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: T = mu.atom(i).iter().zip(nu.atom(j)).map(|(x, y)| (*x - *y) * (*x - *y)).sum();
            cost[i * n + j] = d2.sqrt().powf(theta);
        }
    }
    let perm = hungarian(n, &cost);
    Ok((0..n).map(|i| cost[i * n + perm[i]]).sum::<T>() / T::from_usize_exact(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m1(v: &[f64]) -> EmpiricalMeasure<f64> {
        EmpiricalMeasure::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn moments_cached() {
        let m = EmpiricalMeasure::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean(), &[2.0, 3.0]);
        assert_eq!(m.second_moment(), 15.0);
        assert_eq!(m.len(), 2);
        assert!(EmpiricalMeasure::new(2, vec![1.0f64; 3]).is_err());
        assert_eq!(EmpiricalMeasure::dirac(&[0.0f64]).mean(), &[0.0]);
    }

    #[test]
    fn one_dimensional_examples() {
        let a = m1(&[0.3, -1.0, 2.0]);
        assert_eq!(wasserstein2(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein2(&m1(&[0.0]), &m1(&[1.0])).unwrap(), 1.0);
        assert!((wasserstein2(&m1(&[0.0, 1.0]), &m1(&[0.5, 1.5])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unequal_counts_in_one_dimension() {
        // {0, 1} vs {0, 0.5, 1}: quantile coupling moves mass 1/6 by 0.5 twice.
        let w = wasserstein2(&m1(&[0.0, 1.0]), &m1(&[0.0, 0.5, 1.0])).unwrap();
        assert!((w - (2.0 * (1.0 / 6.0) * 0.25f64).sqrt()).abs() < 1e-15);
        // Dirac versus a cloud: W2² = mean squared distance.
        let w = wasserstein2(&m1(&[1.0]), &m1(&[0.0, 2.0, 4.0])).unwrap();
        assert!((w * w - (1.0 + 1.0 + 9.0) / 3.0).abs() < 1e-14);
    }

    #[test]
    fn multivariate_requires_equal_counts() {
        let a = EmpiricalMeasure::new(2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let b = EmpiricalMeasure::new(2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(wasserstein2(&a, &b).unwrap(), 0.0);
        let c = EmpiricalMeasure::dirac(&[0.0, 0.0]);
        assert!(matches!(wasserstein2(&a, &c), Err(Error::Unsupported(_))));
        assert!(matches!(wasserstein2(&a, &m1(&[0.0, 1.0])), Err(Error::Dimension(_))));
    }
}
