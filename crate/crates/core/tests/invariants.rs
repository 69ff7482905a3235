use mvfbm::coefficients::{wasserstein2, EmpiricalMeasure};
use mvfbm::fractional::{covariance_r, CMControl, Hurst, KOperator};
use mvfbm::grid::{Density, TimeGrid};
use mvfbm::harness::stats::{pairwise_sum, wilson};
use mvfbm::io::fmt_g17;
use proptest::prelude::*;

fn measure(xs: Vec<f64>) -> EmpiricalMeasure<f64> {
    EmpiricalMeasure::new(1, xs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn g17_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn covariance_is_symmetric_with_variance_on_the_diagonal(t in 0.0f64..5.0, s in 0.0f64..5.0, h in 0.5f64..0.99) {
        let hu = Hurst::new(h).unwrap();
        let a = covariance_r(t, s, hu).unwrap();
        prop_assert_eq!(a, covariance_r(s, t, hu).unwrap());
        prop_assert!((covariance_r(t, t, hu).unwrap() - t.powf(2.0 * h)).abs() <= 1e-12 * (1.0 + t.powf(2.0 * h)));
        // Cauchy–Schwarz for a covariance.
        prop_assert!(a * a <= t.powf(2.0 * h) * s.powf(2.0 * h) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn w2_is_a_metric_dominating_the_mean_gap(
        a in prop::collection::vec(-10.0f64..10.0, 6),
        b in prop::collection::vec(-10.0f64..10.0, 6),
        c in prop::collection::vec(-10.0f64..10.0, 6),
    ) {
        let (ma, mb, mc) = (measure(a.clone()), measure(b), measure(c));
        let ab = wasserstein2(&ma, &mb).unwrap();
        prop_assert_eq!(ab, wasserstein2(&mb, &ma).unwrap());
        prop_assert!(ab <= wasserstein2(&ma, &mc).unwrap() + wasserstein2(&mc, &mb).unwrap() + 1e-12);
        prop_assert!((ma.mean()[0] - mb.mean()[0]).abs() <= ab + 1e-12);
        let mut shuffled = a;
        shuffled.reverse();
        prop_assert_eq!(wasserstein2(&ma, &measure(shuffled)).unwrap(), 0.0);
    }

    #[test]
    fn k_operator_is_linear(
        u in prop::collection::vec(-3.0f64..3.0, 16),
        v in prop::collection::vec(-3.0f64..3.0, 16),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        h in 0.5f64..0.95,
    ) {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let op = KOperator::new(g, Hurst::new(h).unwrap()).unwrap();
        let (du, dv) = (Density::from_values(g, 1, u).unwrap(), Density::from_values(g, 1, v).unwrap());
        let lhs = op.apply_k(&du.combine(a, &dv, b)).unwrap();
        let (ku, kv) = (op.apply_k(&du).unwrap(), op.apply_k(&dv).unwrap());
        for k in 0..lhs.len() {
            let rhs = a * ku.at(k)[0] + b * kv.at(k)[0];
            prop_assert!((lhs.at(k)[0] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn energy_is_quadratic(u in prop::collection::vec(-3.0f64..3.0, 8), v in prop::collection::vec(-3.0f64..3.0, 8), c in -4.0f64..4.0) {
        let g = TimeGrid::new(2.0, 8).unwrap();
        let h = CMControl::new(Density::from_values(g, 1, u).unwrap(), Density::from_values(g, 1, v).unwrap()).unwrap();
        let e = h.energy();
        prop_assert!(e >= 0.0);
        prop_assert!((h.scaled(c).energy() - c * c * e).abs() <= 1e-12 * (1.0 + c * c * e));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let hits = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson(hits, n);
        let p = hits as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn pairwise_sum_is_order_stable(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let naive: f64 = xs.iter().sum();
        let tol = 1e-12 * xs.iter().map(|x| x.abs()).sum::<f64>() + 1e-300;
        prop_assert!((pairwise_sum(&xs) - naive).abs() <= tol.max(1e-9));
        prop_assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum(&xs).to_bits());
    }
}
