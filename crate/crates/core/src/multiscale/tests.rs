use super::*;
use crate::coefficients::{Coefficients, EmpiricalMeasure, FamilyKind, FnCoefficients, LinearFamily};
use crate::fractional::{sample_fbm, CMControl, Hurst, KOperator};
use crate::grid::{Density, TimeGrid};
use crate::Error;

fn cfg(steps: usize, particles: usize, h: f64, seed: u64) -> SimConfig<f64> {
    let g = TimeGrid::new(1.0, steps).unwrap();
    SimConfig::new(g, Hurst::new(h).unwrap(), particles, seed, vec![0.5], vec![-0.25])
}

fn sp(delta: f64, eps: f64) -> ScaleParams<f64> {
    ScaleParams::new(delta, eps).unwrap()
}

#[test]
fn zero_dynamics_are_constant() {
    let c = FnCoefficients::<f64>::zero(1, 1);
    let out = simulate_coupled(&c, sp(0.5, 0.1), &cfg(16, 8, 0.7, 1)).unwrap();
    assert!(out.slow.values().iter().all(|&v| v == 0.5));
    assert!(out.fast.values().iter().all(|&v| v == -0.25));
    let aux = khasminskii_auxiliary(&c, sp(0.5, 0.1), &cfg(16, 8, 0.7, 1), 0.25, &CMControl::zero(cfg(16, 8, 0.7, 1).grid, 1, 1))
        .unwrap();
    assert!(aux.aux.unwrap().values().iter().all(|&v| v == -0.25));
}

#[test]
fn substep_policy() {
    let mut c = cfg(10, 1, 0.7, 0);
    assert_eq!(c.substeps_for(0.01).unwrap(), 100);
    c.fast_substeps = 50;
    assert!(matches!(c.substeps_for(0.01), Err(Error::Config(_))));
    c.fast_substeps = 100;
    assert_eq!(c.substeps_for(0.01).unwrap(), 100);
}

#[test]
fn ladder_validation() {
    assert!(validate_ladder(&[sp(0.5, 0.2), sp(0.25, 0.05)]).is_ok());
    assert!(validate_ladder(&[sp(0.5, 0.2), sp(0.25, 0.2)]).is_err());
    assert!(validate_ladder(&[sp(0.25, 0.2), sp(0.5, 0.01)]).is_err());
}

#[test]
fn fbm_marginal_variance() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::GaussianDecoupled);
    let p = 10_000;
    let h = 0.7;
    let mut c = cfg(16, p, h, 42);
    c.x0 = vec![0.0];
    let out = simulate_coupled(&fam, sp(1.0, 0.5), &c).unwrap();
    let xs: Vec<f64> = (0..p).map(|i| out.slow.at(i, 16)[0]).collect();
    let mean = xs.iter().sum::<f64>() / p as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p - 1) as f64;
    let se = (2.0 / p as f64).sqrt();
    assert!((var - 1.0).abs() < 3.0 * se, "var {var}");
}

#[test]
fn seed_determinism_and_sensitivity() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let a = simulate_coupled(&fam, sp(0.5, 0.05), &cfg(16, 32, 0.7, 9)).unwrap();
    let b = simulate_coupled(&fam, sp(0.5, 0.05), &cfg(16, 32, 0.7, 9)).unwrap();
    let c = simulate_coupled(&fam, sp(0.5, 0.05), &cfg(16, 32, 0.7, 10)).unwrap();
    assert_eq!(a.slow, b.slow);
    assert_eq!(a.fast, b.fast);
    assert_ne!(a.slow, c.slow);
}

#[test]
fn law_summary_tracks_ensemble() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let out = simulate_coupled(&fam, sp(0.5, 0.05), &cfg(8, 20, 0.7, 3)).unwrap();
    for k in 0..=8 {
        let m = (0..20).map(|p| out.slow.at(p, k)[0]).sum::<f64>() / 20.0;
        assert!((out.law[k].mean[0] - m).abs() < 1e-14);
    }
}

#[test]
fn zero_control_reproduces_uncontrolled_run() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let c = cfg(16, 24, 0.7, 5);
    let free = simulate_coupled(&fam, sp(0.3, 0.02), &c).unwrap();
    let ctrl = simulate_controlled(&fam, sp(0.3, 0.02), &c, &CMControl::zero(c.grid, 1, 1), None).unwrap();
    assert_eq!(free.slow, ctrl.slow);
    assert_eq!(free.fast, ctrl.fast);
}

#[test]
fn controlled_path_tends_to_k_of_control() {
    // b = 0, σ = 1: the controlled slow path is x + K û + δ^H B^H.
    let fam = LinearFamily::<f64>::preset(FamilyKind::GaussianDecoupled);
    let mut c = cfg(32, 4, 0.7, 8);
    c.x0 = vec![0.0];
    let uhat = Density::constant(c.grid, &[1.5]);
    let target = KOperator::new(c.grid, c.hurst).unwrap().apply_k(&uhat).unwrap();
    let h = CMControl::slow(uhat, 1);
    let mut prev = f64::INFINITY;
    for delta in [1e-2, 1e-4, 1e-6] {
        let out = simulate_controlled(&fam, sp(delta, delta), &c, &h, None).unwrap();
        let gap = (0..4).map(|p| out.slow.sup_distance_to(p, &target)).fold(0.0, f64::max);
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-3, "gap {prev}");
}

#[test]
fn energy_gate_rejects_large_controls() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let c = cfg(16, 4, 0.7, 1);
    let h = CMControl::slow(Density::constant(c.grid, &[2.0]), 1);
    let e = h.energy();
    assert!(simulate_controlled(&fam, sp(0.5, 0.05), &c, &h, Some(e * 1.01)).is_ok());
    match simulate_controlled(&fam, sp(0.5, 0.05), &c, &h, Some(e * 0.99)) {
        Err(Error::EnergyGate { .. }) => {}
        other => panic!("expected energy gate, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn blow_up_reports_first_bad_step() {
    let c = FnCoefficients::<f64>::new(
        1,
        1,
        |_, x, _, _, out| out[0] = x[0] * x[0] * 1e3,
        |_, _, out| out[0] = 0.0,
        |_, _, _, _, out| out[0] = 0.0,
        |_, _, _, _, out| out[0] = 0.0,
    );
    let mut cf = cfg(64, 2, 0.7, 1);
    cf.x0 = vec![10.0];
    match simulate_coupled(&c, sp(0.5, 0.5), &cf) {
        Err(Error::BlowUp { step, .. }) => assert!(step > 0 && step < 64),
        other => panic!("expected blow-up, got {:?}", other.map(|_| ())),
    }
}

#[test]
fn auxiliary_with_unit_block_is_the_euler_fast_path() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let c = cfg(16, 12, 0.7, 4);
    let out = khasminskii_auxiliary(&fam, sp(0.3, 0.02), &c, c.grid.dt(), &CMControl::zero(c.grid, 1, 1)).unwrap();
    assert_eq!(out.aux.unwrap(), out.fast);
    assert!(khasminskii_auxiliary(&fam, sp(0.3, 0.02), &c, 1.5 * c.grid.dt(), &CMControl::zero(c.grid, 1, 1)).is_err());
}

#[test]
fn auxiliary_error_shrinks_with_block_length() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let c = cfg(64, 200, 0.7, 11);
    let h = CMControl::zero(c.grid, 1, 1);
    let err = |block: f64| {
        let out = khasminskii_auxiliary(&fam, sp(0.5, 0.01), &c, block, &h).unwrap();
        let aux = out.aux.unwrap();
        let dt = c.grid.dt();
        (0..200)
            .map(|p| (1..=64).map(|k| (out.fast.at(p, k)[0] - aux.at(p, k)[0]).powi(2) * dt).sum::<f64>())
            .sum::<f64>()
            / 200.0
    };
    let (e1, e2, e3) = (err(0.5), err(0.125), err(1.0 / 32.0));
    assert!(e1 > e2 && e2 > e3, "{e1} {e2} {e3}");
}

fn ou() -> LinearFamily<f64> {
    LinearFamily::preset(FamilyKind::OuFrozenGaussian)
}

#[test]
fn frozen_zero_dynamics() {
    let c = FnCoefficients::<f64>::zero(1, 1);
    let fc = FrozenConfig { y0: Some(vec![0.3]), horizon: 1.0, ..Default::default() };
    let p = frozen_simulate(&c, 0.0, &[1.0], &EmpiricalMeasure::dirac(&[0.0]), &fc).unwrap();
    assert!(p.values().iter().all(|&v| v == 0.3));
}

#[test]
fn frozen_ou_moments() {
    let fam = ou();
    let (x, m) = (0.8, -0.4);
    let mu = EmpiricalMeasure::dirac(&[m]);
    let fc = FrozenConfig { step: 1e-3, horizon: 2000.0, chains: 8, batches: 20, seed: 3, y0: None };
    let p = fam.params();
    let target_mean = p.c1 * x + p.c2 * m;
    let mean = estimate_average(&fam, 0.0, &[x], &mu, &fc, 0.01, 1, |y, out| out[0] = y[0]).unwrap();
    assert!((mean.value[0] - target_mean).abs() < 3.0 * mean.std_err[0], "{mean:?}");
    let var = estimate_average(&fam, 0.0, &[x], &mu, &fc, 0.01, 1, |y, out| out[0] = (y[0] - target_mean).powi(2)).unwrap();
    assert!((var.value[0] - fam.frozen_variance()).abs() < 3.0 * var.std_err[0], "{var:?}");
}

#[test]
fn bbar_matches_closed_form_and_constants_are_exact() {
    let fam = ou();
    let mu = EmpiricalMeasure::new(1, vec![0.2, 0.6]).unwrap();
    let fc = FrozenConfig { step: 5e-3, horizon: 1000.0, chains: 8, batches: 20, seed: 5, y0: None };
    let est = estimate_bbar(&fam, 0.0, &[0.7], &mu, &fc, 0.01).unwrap();
    let mut exact = [0.0];
    fam.closed_form_bbar().unwrap().eval(0.0, &[0.7], &mu, &mut exact);
    assert!((est.value[0] - exact[0]).abs() < 3.0 * est.std_err[0], "{est:?} vs {exact:?}");
    assert!(est.effective_samples[0] > 100.0);

    let c = FnCoefficients::<f64>::new(
        1,
        1,
        |_, x, _, _, out| out[0] = 0.1 * x[0] + 0.7,
        |_, _, out| out[0] = 1.0,
        |_, _, _, y, out| out[0] = -y[0],
        |_, _, _, _, out| out[0] = 1.0,
    );
    let est = estimate_bbar(&c, 0.0, &[0.3], &mu, &fc, 0.2).unwrap();
    assert_eq!(est.value[0], 0.1 * 0.3 + 0.7);
    assert_eq!(est.std_err[0], 0.0);
}

#[test]
fn averaged_without_drift_is_scaled_fbm() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::GaussianDecoupled);
    let c = cfg(32, 3, 0.65, 17);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let out = solve_averaged(&fam, &c, bbar.as_ref(), 1.0).unwrap();
    let b = sample_fbm(c.grid, c.hurst, 1, 17).unwrap();
    for k in 0..=32 {
        assert!((out.at(0, k)[0] - (0.5 + b.at(k)[0])).abs() < 1e-12);
    }
}

#[test]
fn averaged_ou_terminal_mean() {
    let fam = ou();
    let p = 4000;
    let mut c = cfg(64, p, 0.7, 23);
    c.x0 = vec![1.0];
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let out = solve_averaged(&fam, &c, bbar.as_ref(), 1.0).unwrap();
    let xs: Vec<f64> = (0..p).map(|i| out.at(i, 64)[0]).collect();
    let mean = xs.iter().sum::<f64>() / p as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p - 1) as f64).sqrt();
    // Euler for x' = -x is exact in mean: (1 - dt)^N.
    let oracle = (1.0 - 1.0 / 64.0f64).powi(64);
    assert!((mean - oracle).abs() < 3.0 * sd / (p as f64).sqrt(), "{mean} vs {oracle}");
}

#[test]
fn limit_ode_exponential_decay_and_order() {
    let fam = ou();
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let err = |n: usize| {
        let g = TimeGrid::new(1.0, n).unwrap();
        let p = solve_limit_ode(bbar.as_ref(), g, &[2.0]).unwrap();
        (0..=n).map(|k| (p.at(k)[0] - 2.0 * (-g.node(k)).exp()).abs()).fold(0.0, f64::max)
    };
    assert!(err(200) < 1e-8);
    let ratio = err(20) / err(40);
    assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");

    let flat = LinearFamily::<f64>::preset(FamilyKind::GaussianDecoupled);
    let zero = resolve_bbar(&flat, &BbarConfig::Analytic).unwrap();
    let p = solve_limit_ode(zero.as_ref(), TimeGrid::new(1.0, 10).unwrap(), &[0.4]).unwrap();
    assert!(p.values().iter().all(|&v| v == 0.4));
}

#[test]
fn monte_carlo_lattice_tracks_closed_form() {
    let fam = ou();
    let cfg_mc = BbarConfig::MonteCarlo {
        frozen: FrozenConfig { step: 1e-2, horizon: 400.0, chains: 4, batches: 10, seed: 1, y0: None },
        burn_in: 0.02,
        spacing: [1.0, 0.25, 0.25],
    };
    let mc = resolve_bbar(&fam, &cfg_mc).unwrap();
    let exact = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let mu = EmpiricalMeasure::dirac(&[0.1]);
    for x in [-0.6, 0.05, 0.37] {
        let (mut a, mut b) = ([0.0], [0.0]);
        mc.eval(0.3, &[x], &mu, &mut a);
        exact.eval(0.3, &[x], &mu, &mut b);
        assert!((a[0] - b[0]).abs() < 0.05, "{x}: {} vs {}", a[0], b[0]);
    }
    let (mut a, mut b) = ([0.0], [0.0]);
    mc.eval(0.3, &[0.37], &mu, &mut a);
    mc.eval(0.3, &[0.37], &mu, &mut b);
    assert_eq!(a, b);
}

#[test]
fn f32_run_matches_f64_closely() {
    let fam64 = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let fam32 = LinearFamily::<f32>::preset(FamilyKind::LinearMeanfield);
    let c64 = cfg(8, 4, 0.7, 2);
    let c32 = SimConfig::new(c64.grid.cast(), Hurst::new(0.7f32).unwrap(), 4, 2, vec![0.5f32], vec![-0.25f32]);
    let a = simulate_coupled(&fam64, sp(0.5, 0.1), &c64).unwrap();
    let b = simulate_coupled(&fam32, ScaleParams::new(0.5f32, 0.1).unwrap(), &c32).unwrap();
    for (x, y) in a.slow.values().iter().zip(b.slow.values()) {
        assert!((x - *y as f64).abs() < 1e-3);
    }
}
