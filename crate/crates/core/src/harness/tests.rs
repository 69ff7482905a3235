use super::*;
use crate::coefficients::{FamilyKind, LinearFamily};
use crate::fractional::{CMControl, Hurst};
use crate::grid::{Density, TimeGrid};
use crate::multiscale::{resolve_bbar, BbarConfig, ScaleParams, SimConfig};

fn base(steps: usize, particles: usize, seed: u64) -> SimConfig<f64> {
    SimConfig::new(TimeGrid::new(1.0, steps).unwrap(), Hurst::new(0.7).unwrap(), particles, seed, vec![0.0], vec![0.0])
}

fn decoupled() -> LinearFamily<f64> {
    LinearFamily::preset(FamilyKind::GaussianDecoupled)
}

#[test]
fn ladder_scales_follow_the_rule() {
    let l = LadderSpec::default();
    let s = l.scales().unwrap();
    assert_eq!(s.len(), 3);
    assert!((s[2].eps - 0.125f64.powf(1.5)).abs() < 1e-15);
    let bad = LadderSpec { eps_rule: EpsRule::Power { exponent: 0.5, scale: 1.0 }, ..Default::default() };
    assert!(bad.scales().is_err());
    let fixed = LadderSpec { eps_rule: EpsRule::Fixed { values: vec![0.1, 0.02] }, ..Default::default() };
    assert!(fixed.scales().is_err());
}

#[test]
fn exit_probability_trivial_radii() {
    let fam = decoupled();
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let ladder = LadderSpec { deltas: vec![0.5, 0.25], replicas: 200, particles: 100, ..Default::default() };
    let t = mc_exit_probability(&fam, bbar.as_ref(), &ladder, 0.0, &base(16, 100, 1)).unwrap();
    assert!(t.rows.iter().all(|r| r.estimate.p == 1.0));
    let t = mc_exit_probability(&fam, bbar.as_ref(), &ladder, 10.0, &base(16, 100, 1)).unwrap();
    assert!(t.rows.iter().all(|r| r.estimate.p == 0.0 && r.estimate.rare_event_floor));
    assert!(t.low_hits);
}

#[test]
fn exit_probability_matches_oversampled_run() {
    let fam = decoupled();
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let one = |replicas: usize, seed: u64| {
        let ladder = LadderSpec { deltas: vec![0.5], replicas, particles: 2000, ..Default::default() };
        mc_exit_probability(&fam, bbar.as_ref(), &ladder, 0.8, &base(32, 2000, seed)).unwrap().rows[0].estimate.clone()
    };
    let small = one(2000, 3);
    let big = one(20_000, 99);
    assert!(small.lo <= big.hi && big.lo <= small.hi, "{small:?} vs {big:?}");
    assert!(small.hits > 20);
}

#[test]
fn planted_slope_reports() {
    let rate = 1.7f64;
    let deltas = [0.5f64, 0.35, 0.25, 0.1];
    let exact: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, (-rate / d).exp())).collect();
    let rep = ldp_slope_report(&exact, rate, 0.7);
    assert!(rep.rows.iter().all(|r| r.relative_gap <= 1e-10));
    assert!(!rep.inconclusive);
    let corrected: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, (-rate / d + 1.0 / d.sqrt()).exp())).collect();
    let rep = ldp_slope_report(&corrected, rate, 0.7);
    for (row, d) in rep.rows.iter().zip(deltas) {
        assert!((row.relative_gap - d.sqrt() / rate).abs() < 1e-12);
    }
    assert!(rep.decreasing);
    assert!(ldp_slope_report(&exact[..2], rate, 0.7).inconclusive);
}

#[test]
fn increment_slopes_for_pure_noise_and_pure_drift() {
    let fam = decoupled();
    let blocks: Vec<f64> = (3..=7).map(|k| 0.5f64.powi(k)).collect();
    let rep = increment_scaling_experiment(&fam, ScaleParams::new(1.0, 0.5).unwrap(), &base(512, 500, 4), &blocks, 500).unwrap();
    assert!((rep.fit.slope - 1.4).abs() < 0.2, "{:?}", rep.fit);

    let mut p = FamilyKind::LinearMeanfield.default_params::<f64>();
    p.s0 = 0.0;
    p.s1 = 0.0;
    p.a3 = 0.0;
    p.a4 = 1.0;
    let drift = LinearFamily::new(FamilyKind::LinearMeanfield, p).unwrap();
    let rep = increment_scaling_experiment(&drift, ScaleParams::new(1.0, 0.5).unwrap(), &base(512, 50, 4), &blocks, 50).unwrap();
    assert!((rep.fit.slope - 2.0).abs() < 0.2, "{:?}", rep.fit);
    assert!(increment_scaling_experiment(&drift, ScaleParams::new(1.0, 0.5).unwrap(), &base(512, 50, 4), &[0.3], 50).is_err());
}

#[test]
fn averaging_is_exact_when_drift_ignores_the_fast_variable() {
    let mut p = FamilyKind::LinearMeanfield.default_params::<f64>();
    p.a3 = 0.0;
    let fam = LinearFamily::new(FamilyKind::LinearMeanfield, p).unwrap();
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let rep = averaging_convergence_experiment(&fam, bbar.as_ref(), 1.0, &[0.1, 0.05], 100, &base(32, 100, 2)).unwrap();
    assert!(rep.rows.iter().all(|r| r.gap.mean == 0.0));
}

#[test]
fn averaging_trend_and_determinism() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let cfg = base(32, 200, 8);
    let rep = averaging_convergence_experiment(&fam, bbar.as_ref(), 1.0, &[0.1, 0.05, 0.025], 400, &cfg).unwrap();
    assert!(rep.strictly_decreasing && rep.monotone_within_ci, "{rep:?}");
    let again = averaging_convergence_experiment(&fam, bbar.as_ref(), 1.0, &[0.1, 0.1], 400, &cfg);
    assert!(again.is_err());
    let a = averaging_convergence_experiment(&fam, bbar.as_ref(), 1.0, &[0.1], 400, &cfg).unwrap();
    assert_eq!(a.rows[0].gap, rep.rows[0].gap);
}

#[test]
fn controlled_trend_and_energy_gate() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let bbar = resolve_bbar(&fam, &BbarConfig::Analytic).unwrap();
    let cfg = base(32, 200, 9);
    let g = cfg.grid;
    let h = CMControl::new(Density::constant(g, &[1.0]), Density::constant(g, &[0.5])).unwrap();
    let ladder = LadderSpec { replicas: 400, particles: 200, ..Default::default() };
    let rep = controlled_convergence_experiment(&fam, bbar.as_ref(), &ladder, &cfg, &h, 1.0).unwrap();
    assert!(rep.strictly_decreasing, "{rep:?}");
    assert!(controlled_convergence_experiment(&fam, bbar.as_ref(), &ladder, &cfg, &h, 0.5).is_err());
}

#[test]
fn auxiliary_surface_axes() {
    let fam = LinearFamily::<f64>::preset(FamilyKind::LinearMeanfield);
    let cfg = base(32, 100, 6);
    let g = cfg.grid;
    let zero = CMControl::zero(g, 1, 1);
    let rep = auxiliary_error_experiment(&fam, 0.25, &[0.2, 0.1], &[g.dt()], 100, &cfg, &zero).unwrap();
    assert!(rep.cells.iter().all(|c| c.error.mean == 0.0));
    let h = CMControl::new(Density::constant(g, &[0.0]), Density::constant(g, &[1.0])).unwrap();
    let rep = auxiliary_error_experiment(&fam, 0.25, &[0.2, 0.1, 0.05], &[0.25, 0.0625, g.dt()], 200, &cfg, &h).unwrap();
    assert!(rep.monotone_in_ratio && rep.monotone_in_block, "{rep:?}");
}
