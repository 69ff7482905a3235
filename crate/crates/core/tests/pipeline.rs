use mvfbm::coefficients::{AveragedDrift, Coefficients, FamilyKind, LinearFamily};
use mvfbm::fractional::{CMControl, Hurst};
use mvfbm::grid::{Density, TimeGrid};
use mvfbm::ldp::{rate_of_path, skeleton_solve, RateConfig, SkeletonProblem};
use mvfbm::multiscale::{resolve_bbar, simulate_controlled, BbarConfig, ScaleParams, SimConfig};

fn control<T: mvfbm::Real>(g: TimeGrid<T>, u: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> CMControl<T> {
    let lift = |f: &dyn Fn(f64) -> f64| Density::from_cell_averages(g, |t: T| T::lit(f(t.as_f64())));
    CMControl::new(lift(&u), lift(&v)).unwrap()
}

#[test]
fn rate_of_a_skeleton_path_is_at_most_its_energy() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let g = TimeGrid::new(1.0, 32).unwrap();
    let p = SkeletonProblem::new(&fam, bbar.as_ref(), g, Hurst::new(0.7).unwrap(), &[0.5]).unwrap();
    for (a, b) in [(1.0, 0.0), (0.5, 2.0), (-1.5, 1.0)] {
        let h = control(g, move |t| a * (1.0 + t), move |t| b * (3.0 * t).cos());
        let target = skeleton_solve(&p, &h).unwrap();
        let r = rate_of_path(&p, &target, fam.fast_dim(), &RateConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.value <= h.energy() * (1.0 + 1e-9) + 1e-12, "{} > {}", r.value, h.energy());
        // The minimiser reproduces the target.
        let back = skeleton_solve(&p, &r.control).unwrap();
        assert!(back.sup_distance(&target) < 1e-6);
    }
}

#[test]
fn slow_control_alone_is_optimal_without_fast_coupling() {
    // With b̄ independent of y and σ = 1, v̂ is wasted energy and K is injective.
    let fam = LinearFamily::<f64>::preset(FamilyKind::GaussianDecoupled);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let g = TimeGrid::new(1.0, 64).unwrap();
    let p = SkeletonProblem::new(&fam, bbar.as_ref(), g, Hurst::new(0.75).unwrap(), &[0.0]).unwrap();
    let h = control(g, |t| 1.0 - 2.0 * t, |t| t);
    let target = skeleton_solve(&p, &h).unwrap();
    let r = rate_of_path(&p, &target, fam.fast_dim(), &RateConfig::default()).unwrap();
    let slow_energy = 0.5 * h.uhat.l2_norm_sq();
    assert!((r.value - slow_energy).abs() <= 1e-6 * slow_energy, "{} vs {slow_energy}", r.value);
}

#[test]
fn f32_and_f64_skeletons_agree() {
    fn run<T: mvfbm::Real>() -> Vec<f64> {
        let fam = LinearFamily::<T>::preset(FamilyKind::LinearMeanfield);
        let bbar: Box<dyn AveragedDrift<T>> = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
        let g = TimeGrid::new(T::one(), 32).unwrap();
        let p = SkeletonProblem::new(&fam, bbar.as_ref(), g, Hurst::new(T::lit(0.7)).unwrap(), &[T::one()]).unwrap();
        let h = control(g, |t| t.sin(), |_| 0.5);
        skeleton_solve(&p, &h).unwrap().values().iter().map(|x| x.as_f64()).collect()
    }
    let (a, b) = (run::<f32>(), run::<f64>());
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-5, "{gap}");
}

#[test]
fn controlled_particles_approach_the_skeleton() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let g = TimeGrid::new(1.0, 32).unwrap();
    let hurst = Hurst::new(0.7).unwrap();
    let p = SkeletonProblem::new(&fam, bbar.as_ref(), g, hurst, &[0.0]).unwrap();
    let h = control(g, |_| 1.0, |_| 1.0);
    let skeleton = skeleton_solve(&p, &h).unwrap();
    let cfg = SimConfig::new(g, hurst, 200, 17, vec![0.0], vec![0.0]);
    let gap = |delta: f64| {
        let out = simulate_controlled(&fam, ScaleParams::new(delta, delta.powf(1.5)).unwrap(), &cfg, &h, None).unwrap();
        (0..200).map(|i| out.slow.sup_distance_to(i, &skeleton).powi(2)).sum::<f64>() / 200.0
    };
    let gaps: Vec<f64> = [0.5, 0.125, 0.03125].into_iter().map(gap).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}
