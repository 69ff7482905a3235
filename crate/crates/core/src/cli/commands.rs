use serde::Serialize;
use serde_json::json;

use super::config::{ControlKind, OutputFormat, RunConfig, TargetKind};
use super::{Command, ConvergenceKind};
use crate::coefficients::{probe_growth_g, probe_h1, probe_h2, Coefficients, ProbeReport, ProbeSampler};
use crate::error::{Error, Result};
use crate::fractional::{sample_fbm, CMControl};
use crate::grid::{Density, Path, TimeGrid};
use crate::harness::{
    auxiliary_error_experiment, averaging_convergence_experiment, controlled_convergence_experiment,
    increment_scaling_experiment, ldp_report_from, mc_exit_probability, Estimate, IncrementReport, SurfaceReport,
    TrendReport,
};
use crate::io::{self, BlockArray, BlockHeader, Table};
use crate::ldp::{rate_of_event, rate_of_path, skeleton_solve, RateResult, SkeletonProblem};
use crate::multiscale::{resolve_bbar, simulate_controlled, simulate_coupled, solve_averaged, solve_limit_ode, Ensemble, SimOutput};

/// Files produced by a subcommand, in write order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    /// False when an optimizer stopped short of its tolerances.
    pub converged: bool,
}

impl Outcome {
    fn new() -> Self {
        Self { files: Vec::new(), converged: true }
    }

    fn add(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn json<V: Serialize + ?Sized>(&mut self, name: &str, v: &V) -> Result<()> {
        self.add(name, |b| io::write_json(b, v))
    }

    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        self.add(name, |b| t.write(b))
    }
}

pub(super) fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match command {
        Command::SampleFbm => sample(cfg),
        Command::Simulate => simulate(cfg),
        Command::Average => average(cfg),
        Command::LimitOde => limit(cfg),
        Command::Skeleton => skeleton(cfg),
        Command::Rate { .. } => rate(cfg),
        Command::LdpVerify => ldp_verify(cfg),
        Command::Convergence { kind } => convergence(cfg, *kind),
        Command::ProbeAssumptions => probes(cfg),
    }
}

fn control(cfg: &RunConfig, grid: TimeGrid<f64>, n: usize, m: usize) -> Result<CMControl<f64>> {
    match cfg.control {
        ControlKind::None => Ok(CMControl::zero(grid, n, m)),
        ControlKind::Constant => {
            CMControl::new(Density::constant(grid, &vec![cfg.control_u; n]), Density::constant(grid, &vec![cfg.control_v; m]))
        }
        ControlKind::File => {
            let file = cfg.control_file.as_deref().expect("validated");
            let f = std::fs::File::open(file).map_err(|e| Error::Config(format!("cannot read control file {file}: {e}")))?;
            let (header, rows) = io::read_numeric_csv(f)?;
            if header.len() != 1 + n + m || rows.len() != grid.steps() {
                return Err(Error::Dimension(format!(
                    "control file {file} must have columns t, u_1..u_{n}, v_1..v_{m} and {} rows",
                    grid.steps()
                )));
            }
            let u = rows.iter().flat_map(|r| r[1..1 + n].iter().copied()).collect();
            let v = rows.iter().flat_map(|r| r[1 + n..].iter().copied()).collect();
            CMControl::new(Density::from_values(grid, n, u)?, Density::from_values(grid, m, v)?)
        }
    }
}

fn control_table(h: &CMControl<f64>) -> Table {
    let (n, m) = (h.uhat.dim(), h.vhat.dim());
    let header = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("u_{i}")))
        .chain((1..=m).map(|i| format!("v_{i}")));
    let mut t = Table::new(header);
    let grid = h.uhat.grid();
    for k in 0..grid.steps() {
        t.push(std::iter::once(grid.node(k)).chain(h.uhat.at(k).iter().copied()).chain(h.vhat.at(k).iter().copied()));
    }
    t
}

fn path_file(out: &mut Outcome, name: &str, p: &Path<f64>, prefix: &str) -> Result<()> {
    out.add(name, |b| io::write_path_csv(b, p, prefix))
}

fn meta(cfg: &RunConfig, extra: serde_json::Value) -> serde_json::Value {
    let mut m = json!({
        "horizon": cfg.horizon,
        "steps": cfg.steps,
        "hurst": cfg.hurst,
        "seed": cfg.seed,
        "family": cfg.family,
    });
    if let (Some(a), serde_json::Value::Object(b)) = (m.as_object_mut(), extra) {
        a.extend(b);
    }
    m
}

fn sample(cfg: &RunConfig) -> Result<Outcome> {
    let p = sample_fbm(cfg.grid()?, cfg.hurst()?, cfg.fbm_dim, cfg.seed)?;
    let mut out = Outcome::new();
    path_file(&mut out, "fbm.csv", &p, "b")?;
    Ok(out)
}

fn ensembles(out: &mut Outcome, cfg: &RunConfig, name: &str, parts: &[(&str, &Ensemble<f64>)], extra: serde_json::Value) -> Result<()> {
    match cfg.format {
        OutputFormat::Csv => {
            for (label, e) in parts {
                out.add(&format!("{label}.csv"), |b| io::write_ensemble_csv(b, e, if *label == "fast" { "y" } else { "x" }))?;
            }
        }
        OutputFormat::Binary => {
            let header = BlockHeader {
                arrays: parts.iter().map(|(l, e)| BlockArray { name: l.to_string(), shape: io::ensemble_shape(e) }).collect(),
                meta: meta(cfg, extra),
            };
            let arrays: Vec<&[f64]> = parts.iter().map(|(_, e)| e.values()).collect();
            out.add(&format!("{name}.mvfb"), |b| io::write_block(b, &header, &arrays))?;
        }
    }
    Ok(())
}

fn simulate(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let (n, m) = (fam.slow_dim(), fam.fast_dim());
    let sim = cfg.sim(n, m)?;
    let sp = cfg.scales()?;
    let res: SimOutput<f64> = match cfg.control {
        ControlKind::None => simulate_coupled(&fam, sp, &sim)?,
        _ => {
            let h = control(cfg, sim.grid, n, m)?;
            simulate_controlled(&fam, sp, &sim, &h, cfg.energy_bound)?
        }
    };
    let mut out = Outcome::new();
    let extra = json!({"delta": sp.delta, "eps": sp.eps, "fast_substeps": res.fast_substeps});
    ensembles(&mut out, cfg, "ensemble", &[("slow", &res.slow), ("fast", &res.fast)], extra)?;
    out.add("law.csv", |b| io::write_law_csv(b, &sim.grid, &res.law))?;
    Ok(out)
}

fn average(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let sim = cfg.sim(fam.slow_dim(), fam.fast_dim())?;
    let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
    let e = solve_averaged(&fam, &sim, bbar.as_ref(), cfg.delta)?;
    let mut out = Outcome::new();
    ensembles(&mut out, cfg, "averaged", &[("averaged", &e)], json!({"delta": cfg.delta}))?;
    Ok(out)
}

fn limit(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
    let p = solve_limit_ode(bbar.as_ref(), cfg.grid()?, &vec![cfg.x0; fam.slow_dim()])?;
    let mut out = Outcome::new();
    path_file(&mut out, "limit.csv", &p, "x")?;
    Ok(out)
}

fn skeleton(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
    let grid = cfg.grid()?;
    let prob = SkeletonProblem::new(&fam, bbar.as_ref(), grid, cfg.hurst()?, &vec![cfg.x0; fam.slow_dim()])?;
    let h = control(cfg, grid, fam.slow_dim(), fam.fast_dim())?;
    let p = skeleton_solve(&prob, &h)?;
    let mut out = Outcome::new();
    path_file(&mut out, "skeleton.csv", &p, "x")?;
    out.json("skeleton.json", &json!({"energy": h.energy()}))?;
    Ok(out)
}

fn rate_outputs(out: &mut Outcome, res: &RateResult<f64>) -> Result<()> {
    out.json("rate.json", &res.summary())?;
    out.table("control.csv", &control_table(&res.control))?;
    out.converged &= res.converged;
    Ok(())
}

fn rate(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
    let grid = cfg.grid()?;
    let n = fam.slow_dim();
    let x0 = vec![cfg.x0; n];
    let prob = SkeletonProblem::new(&fam, bbar.as_ref(), grid, cfg.hurst()?, &x0)?;
    let rc = cfg.rate_config();
    let open = |f: &str| std::fs::File::open(f).map_err(|e| Error::Config(format!("cannot read target file {f}: {e}")));
    let res = match cfg.target {
        TargetKind::Event => rate_of_event(&prob, cfg.r, fam.fast_dim(), &rc)?,
        TargetKind::Path => {
            let target = io::read_path_csv(open(cfg.target_file.as_deref().expect("validated"))?, grid)?;
            rate_of_path(&prob, &target, fam.fast_dim(), &rc)?
        }
        TargetKind::FromKhat => {
            let g = io::read_density_csv(open(cfg.target_file.as_deref().expect("validated"))?, grid)?;
            if g.dim() != n {
                return Err(Error::Dimension(format!("ĝ has {} components, the slow state has {n}", g.dim())));
            }
            let mut target = prob.operator().apply_k(&g)?;
            for k in 0..target.len() {
                for (v, a) in target.at_mut(k).iter_mut().zip(&x0) {
                    *v += a;
                }
            }
            rate_of_path(&prob, &target, fam.fast_dim(), &rc)?
        }
    };
    let mut out = Outcome::new();
    rate_outputs(&mut out, &res)?;
    Ok(out)
}

fn ldp_verify(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
    let grid = cfg.grid()?;
    let sim = cfg.sim(fam.slow_dim(), fam.fast_dim())?;
    let ladder = cfg.ladder_spec();
    let table = mc_exit_probability(&fam, bbar.as_ref(), &ladder, cfg.r, &sim)?;
    let prob = SkeletonProblem::new(&fam, bbar.as_ref(), grid, cfg.hurst()?, &sim.x0)?;
    let rate = rate_of_event(&prob, cfg.r, fam.fast_dim(), &cfg.rate_config())?;
    let report = ldp_report_from(&table, &rate, cfg.hurst);

    let mut t = Table::new([
        "delta",
        "eps",
        "p",
        "p_lo",
        "p_hi",
        "hits",
        "replicas",
        "delta_log_p",
        "delta_2h_log_p",
        "reference",
        "relative_gap",
    ]);
    // Rungs without hits have no slope row; their log columns are `nan`.
    for row in &table.rows {
        let e = &row.estimate;
        let slope = report.rows.iter().find(|s| s.delta == row.delta);
        let pick = |f: fn(&crate::harness::SlopeRow) -> f64| slope.map_or(f64::NAN, f);
        t.push([
            row.delta,
            row.eps,
            e.p,
            e.lo,
            e.hi,
            e.hits as f64,
            e.replicas as f64,
            pick(|s| s.delta_log_p),
            pick(|s| s.delta_2h_log_p),
            -report.rate,
            pick(|s| s.relative_gap),
        ]);
    }
    let mut out = Outcome::new();
    out.table("ldp.csv", &t)?;
    out.json("ldp.json", &json!({"exit": table, "rate": rate.summary(), "report": report}))?;
    out.table("control.csv", &control_table(&rate.control))?;
    out.converged &= rate.converged;
    Ok(out)
}

fn estimate_cells(e: &Estimate) -> [f64; 4] {
    [e.mean, e.std_err, e.lo, e.hi]
}

fn trend_table(r: &TrendReport) -> Table {
    let mut t = Table::new([
        "delta", "eps", "gap", "gap_se", "gap_lo", "gap_hi", "secondary", "secondary_se", "secondary_lo", "secondary_hi",
    ]);
    for row in &r.rows {
        let s = row.secondary.as_ref().map_or([f64::NAN; 4], estimate_cells);
        t.push([row.delta, row.eps].into_iter().chain(estimate_cells(&row.gap)).chain(s));
    }
    t
}

fn increment_table(r: &IncrementReport) -> Table {
    let mut t = Table::new(["block", "mean_sq_increment", "se", "lo", "hi", "fitted", "reference_slope"]);
    for (b, e) in r.blocks.iter().zip(&r.mean_sq_increment) {
        let fitted = (r.fit.intercept + r.fit.slope * b.ln()).exp();
        t.push([*b].into_iter().chain(estimate_cells(e)).chain([fitted, r.reference_slope]));
    }
    t
}

fn surface_table(r: &SurfaceReport) -> Table {
    let mut t = Table::new(["delta", "ratio", "block", "error", "se", "lo", "hi"]);
    for c in &r.cells {
        t.push([r.delta, c.ratio, c.block].into_iter().chain(estimate_cells(&c.error)));
    }
    t
}

fn convergence(cfg: &RunConfig, kind: ConvergenceKind) -> Result<Outcome> {
    let fam = cfg.family()?;
    let (n, m) = (fam.slow_dim(), fam.fast_dim());
    let sim = cfg.sim(n, m)?;
    let mut out = Outcome::new();
    match kind {
        ConvergenceKind::Increment => {
            let r = increment_scaling_experiment(&fam, cfg.scales()?, &sim, &cfg.increment_blocks, cfg.replicas)?;
            out.table("increment.csv", &increment_table(&r))?;
            out.json("increment.json", &r)?;
        }
        ConvergenceKind::Averaging => {
            let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
            let r = averaging_convergence_experiment(&fam, bbar.as_ref(), cfg.averaging_delta, &cfg.averaging_eps, cfg.replicas, &sim)?;
            out.table("averaging.csv", &trend_table(&r))?;
            out.json("averaging.json", &r)?;
        }
        ConvergenceKind::Controlled => {
            let bbar = resolve_bbar(&fam, &cfg.bbar_config())?;
            let h = control(cfg, sim.grid, n, m)?;
            let bound = cfg.energy_bound.unwrap_or_else(|| h.energy());
            let r = controlled_convergence_experiment(&fam, bbar.as_ref(), &cfg.ladder_spec(), &sim, &h, bound)?;
            out.table("controlled.csv", &trend_table(&r))?;
            out.json("controlled.json", &r)?;
        }
        ConvergenceKind::Auxiliary => {
            let h = control(cfg, sim.grid, n, m)?;
            let r = auxiliary_error_experiment(&fam, cfg.delta, &cfg.auxiliary_ratios, &cfg.auxiliary_blocks, cfg.replicas, &sim, &h)?;
            out.table("auxiliary.csv", &surface_table(&r))?;
            out.json("auxiliary.json", &r)?;
        }
    }
    Ok(out)
}

fn probes(cfg: &RunConfig) -> Result<Outcome> {
    let fam = cfg.family()?;
    let params = fam.assumption_params(cfg.probe_eta)?;
    let sampler = ProbeSampler::new(cfg.seed);
    let reports: Vec<ProbeReport> = vec![
        probe_h1(&fam, &params, &sampler, cfg.probe_trials),
        probe_h2(&fam, &params, &sampler, cfg.probe_trials),
        probe_growth_g(&fam, &params, &sampler, cfg.probe_trials),
    ];
    let mut t = Table::new(["assumption", "trials", "worst_ratio", "worst_margin", "pass"]);
    for r in &reports {
        t.push_raw(vec![
            r.assumption.clone(),
            r.trials.to_string(),
            io::fmt_g17(r.worst_ratio),
            io::fmt_g17(r.worst_margin),
            r.pass.to_string(),
        ]);
    }
    let mut out = Outcome::new();
    out.table("probes.csv", &t)?;
    out.json("probes.json", &reports)?;
    Ok(out)
}
