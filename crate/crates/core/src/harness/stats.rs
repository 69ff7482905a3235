use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `hits` out of `n`.
pub fn wilson(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // At the boundaries the interval touches 0 or 1 exactly; avoid rounding residue.
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Binomial proportion with its Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicas: u64,
    pub hits: u64,
    /// No hits were observed; only the upper bound is informative.
    pub rare_event_floor: bool,
}

impl ProbabilityEstimate {
    pub fn new(hits: u64, replicas: u64) -> Self {
        let (lo, hi) = wilson(hits, replicas);
        let p = if replicas == 0 { 0.0 } else { hits as f64 / replicas as f64 };
        Self { p, lo, hi, replicas, hits, rare_event_floor: hits == 0 }
    }
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
}

impl Estimate {
    /// Summarises `xs` in index order, so the result does not depend on how
    /// the samples were produced.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n.max(1) as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        let std_err = (var / n.max(1) as f64).sqrt();
        Self { mean, std_err, lo: mean - Z95 * std_err, hi: mean + Z95 * std_err, samples: n }
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn relative_change(&self, other: &Self) -> f64 {
        ((other.mean - self.mean) / self.mean).abs()
    }
}

/// Pairwise summation; deterministic for a fixed input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Least-squares line through `(x, y)` with the slope's standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LineFit { slope, intercept, slope_se }
}

/// `true` when every step goes down or stays within overlapping intervals.
pub fn monotone_within_ci(seq: &[&Estimate]) -> bool {
    seq.windows(2).all(|w| w[1].mean <= w[0].mean || w[1].overlaps(w[0]))
}

/// `true` when the point estimates strictly decrease.
pub fn strictly_decreasing(seq: &[&Estimate]) -> bool {
    seq.windows(2).all(|w| w[1].mean < w[0].mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wilson_known_values() {
        // 50 of 100: centre 0.5, half-width from the closed form.
        let (lo, hi) = wilson(50, 100);
        assert!((lo - 0.403_831_7).abs() < 1e-6 && (hi - 0.596_168_3).abs() < 1e-6, "{lo} {hi}");
        let (lo, hi) = wilson(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
        let e = ProbabilityEstimate::new(0, 1000);
        assert!(e.rare_event_floor && e.p == 0.0);
    }

    #[test]
    fn wilson_coverage_on_bernoulli_streams() {
        let mut rng = crate::rng::stream(1, crate::rng::tag::EXPERIMENT, 0, 0);
        for &p in &[0.05, 0.3] {
            let mut covered = 0;
            for _ in 0..1000 {
                let hits = (0..400).filter(|_| rng.random::<f64>() < p).count() as u64;
                let (lo, hi) = wilson(hits, 400);
                if lo <= p && p <= hi {
                    covered += 1;
                }
            }
            let rate = covered as f64 / 1000.0;
            assert!((rate - 0.95).abs() <= 0.02, "coverage {rate} at p = {p}");
        }
    }

    #[test]
    fn estimate_and_fit() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let x = [0.0, 1.0, 2.0, 3.0];
        let f = fit_line(&x, &[1.0, 3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && f.slope_se < 1e-12);
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
    }
}
