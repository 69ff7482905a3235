use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::coefficients::{FamilyKind, LinearFamily, LinearParams};
use crate::error::{Error, Result};
use crate::fractional::Hurst;
use crate::grid::TimeGrid;
use crate::harness::{EpsRule, LadderSpec};
use crate::ldp::RateConfig;
use crate::multiscale::{BbarConfig, FrozenConfig, ScaleParams, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    /// `h = 0`.
    None,
    /// `û ≡ control.u`, `v̂ ≡ control.v` in every component.
    Constant,
    /// Cell values from `control.file` (`t, u_1, …, u_n, v_1, …, v_m`).
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// `x0 + K ĝ` with `ĝ` read from `target.file`.
    FromKhat,
    /// Target path read from `target.file`.
    Path,
    /// Exit from the ball of radius `r` around the limit path.
    Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbarMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Binary,
}

/// Flat configuration of a run. Every key has a default, unknown keys are
/// rejected and flags override file values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "family.name")]
    pub family: String,
    /// Overrides of the preset constants; `null` keeps the preset.
    #[serde(rename = "family.dim")]
    pub family_dim: Option<usize>,
    #[serde(rename = "family.a1")]
    pub a1: Option<f64>,
    #[serde(rename = "family.a2")]
    pub a2: Option<f64>,
    #[serde(rename = "family.a3")]
    pub a3: Option<f64>,
    #[serde(rename = "family.a4")]
    pub a4: Option<f64>,
    #[serde(rename = "family.s0")]
    pub s0: Option<f64>,
    #[serde(rename = "family.s1")]
    pub s1: Option<f64>,
    #[serde(rename = "family.beta")]
    pub beta: Option<f64>,
    #[serde(rename = "family.c1")]
    pub c1: Option<f64>,
    #[serde(rename = "family.c2")]
    pub c2: Option<f64>,
    #[serde(rename = "family.gamma0")]
    pub gamma0: Option<f64>,

    pub hurst: f64,
    #[serde(rename = "grid.T")]
    pub horizon: f64,
    #[serde(rename = "grid.N")]
    pub steps: usize,
    pub seed: u64,
    pub particles: usize,
    pub replicas: usize,
    /// Initial slow and fast states, broadcast to every component.
    pub x0: f64,
    pub y0: f64,
    /// Fast substeps per slow step, `0` for automatic.
    pub substeps: usize,
    /// Dimension of `sample-fbm` output.
    #[serde(rename = "fbm.dim")]
    pub fbm_dim: usize,

    #[serde(rename = "scales.delta")]
    pub delta: f64,
    #[serde(rename = "scales.eps")]
    pub eps: f64,

    #[serde(rename = "ladder.deltas")]
    pub ladder: Vec<f64>,
    #[serde(rename = "ladder.eps_exponent")]
    pub eps_exponent: f64,
    #[serde(rename = "ladder.eps_scale")]
    pub eps_scale: f64,
    /// Explicit `ε` per rung; replaces the power rule when set.
    #[serde(rename = "ladder.eps_values")]
    pub eps_values: Option<Vec<f64>>,

    #[serde(rename = "control.kind")]
    pub control: ControlKind,
    #[serde(rename = "control.u")]
    pub control_u: f64,
    #[serde(rename = "control.v")]
    pub control_v: f64,
    #[serde(rename = "control.file")]
    pub control_file: Option<String>,
    /// Energy bound `M`; `null` admits the configured control.
    #[serde(rename = "control.energy_bound")]
    pub energy_bound: Option<f64>,

    #[serde(rename = "bbar.method")]
    pub bbar: BbarMethod,
    #[serde(rename = "bbar.step")]
    pub bbar_step: f64,
    #[serde(rename = "bbar.horizon")]
    pub bbar_horizon: f64,
    #[serde(rename = "bbar.chains")]
    pub bbar_chains: usize,
    #[serde(rename = "bbar.batches")]
    pub bbar_batches: usize,
    /// Fraction of each chain discarded before averaging.
    #[serde(rename = "bbar.burn_in")]
    pub bbar_burn_in: f64,
    #[serde(rename = "bbar.spacing")]
    pub bbar_spacing: [f64; 3],

    #[serde(rename = "rate.max_iter")]
    pub rate_max_iter: usize,
    #[serde(rename = "rate.max_outer")]
    pub rate_max_outer: usize,
    #[serde(rename = "rate.grad_tol")]
    pub rate_grad_tol: f64,
    #[serde(rename = "rate.path_tol")]
    pub rate_path_tol: f64,
    #[serde(rename = "rate.penalty0")]
    pub rate_penalty0: f64,
    #[serde(rename = "rate.penalty_growth")]
    pub rate_penalty_growth: f64,
    #[serde(rename = "rate.exit_candidates")]
    pub rate_exit_candidates: usize,
    #[serde(rename = "rate.lse_temperatures")]
    pub rate_lse_temperatures: Vec<f64>,

    #[serde(rename = "target.kind")]
    pub target: TargetKind,
    #[serde(rename = "target.file")]
    pub target_file: Option<String>,
    /// Exit radius for `rate` events and `ldp-verify`.
    pub r: f64,

    #[serde(rename = "increment.blocks")]
    pub increment_blocks: Vec<f64>,
    #[serde(rename = "averaging.delta")]
    pub averaging_delta: f64,
    #[serde(rename = "averaging.eps")]
    pub averaging_eps: Vec<f64>,
    #[serde(rename = "auxiliary.ratios")]
    pub auxiliary_ratios: Vec<f64>,
    #[serde(rename = "auxiliary.blocks")]
    pub auxiliary_blocks: Vec<f64>,

    #[serde(rename = "probe.trials")]
    pub probe_trials: usize,
    #[serde(rename = "probe.eta")]
    pub probe_eta: f64,

    /// Not part of the configuration hash.
    #[serde(rename = "output.dir")]
    pub output_dir: String,
    #[serde(rename = "output.format")]
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let rate = RateConfig::default();
        let frozen = FrozenConfig::default();
        Self {
            family: FamilyKind::LinearMeanfield.name().into(),
            family_dim: None,
            a1: None,
            a2: None,
            a3: None,
            a4: None,
            s0: None,
            s1: None,
            beta: None,
            c1: None,
            c2: None,
            gamma0: None,
            hurst: 0.7,
            horizon: 1.0,
            steps: 64,
            seed: 42,
            particles: 1000,
            replicas: 2000,
            x0: 0.0,
            y0: 0.0,
            substeps: 0,
            fbm_dim: 1,
            delta: 0.5,
            eps: 0.05,
            ladder: vec![0.5, 0.25, 0.125],
            eps_exponent: 1.5,
            eps_scale: 1.0,
            eps_values: None,
            control: ControlKind::None,
            control_u: 0.0,
            control_v: 0.0,
            control_file: None,
            energy_bound: None,
            bbar: BbarMethod::Analytic,
            bbar_step: frozen.step,
            bbar_horizon: frozen.horizon,
            bbar_chains: frozen.chains,
            bbar_batches: frozen.batches,
            bbar_burn_in: 0.05,
            bbar_spacing: [0.05, 0.05, 0.05],
            rate_max_iter: rate.max_iter,
            rate_max_outer: rate.max_outer,
            rate_grad_tol: rate.grad_tol,
            rate_path_tol: rate.path_tol,
            rate_penalty0: rate.penalty0,
            rate_penalty_growth: rate.penalty_growth,
            rate_exit_candidates: rate.exit_candidates,
            rate_lse_temperatures: rate.lse_temperatures,
            target: TargetKind::Event,
            target_file: None,
            r: 1.0,
            increment_blocks: (1..=5).map(|k| 0.5f64.powi(k)).collect(),
            averaging_delta: 1.0,
            averaging_eps: vec![0.1, 0.05, 0.025],
            auxiliary_ratios: vec![0.2, 0.1, 0.05],
            auxiliary_blocks: vec![0.25, 0.0625, 0.015625],
            probe_trials: 2000,
            probe_eta: 1.0,
            output_dir: "out".into(),
            format: OutputFormat::Csv,
        }
    }
}

fn schema_error(origin: &str, e: serde_path_to_error::Error<serde_json::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    if path.is_empty() || path == "." {
        Error::Config(format!("{origin}: {inner}"))
    } else {
        Error::Config(format!("{origin}: field `{path}`: {inner}"))
    }
}

impl RunConfig {
    /// Parses a JSON document; errors carry the field path and position.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| schema_error(origin, e))?;
        de.end().map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    /// Replaces the values of existing keys.
    pub fn with_overrides(self, overrides: &[(String, Value)]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut map: Map<String, Value> = match serde_json::to_value(&self)? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (k, v) in overrides {
            if !map.contains_key(k) {
                return Err(Error::Config(format!("unknown configuration key `{k}`")));
            }
            map.insert(k.clone(), v.clone());
        }
        serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| schema_error("flags", e))
    }

    /// Normalised JSON: every key present, in declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// SHA-256 of the normalised configuration without the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir.clear();
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    /// Checks every value that a subcommand may need.
    pub fn validate(&self) -> Result<()> {
        self.family()?;
        self.hurst()?;
        self.grid()?;
        ScaleParams::new(self.delta, self.eps)?;
        self.ladder_spec().scales()?;
        if self.control == ControlKind::File && self.control_file.is_none() {
            return Err(Error::Config("control.kind = file needs control.file".into()));
        }
        if matches!(self.target, TargetKind::FromKhat | TargetKind::Path) && self.target_file.is_none() {
            return Err(Error::Config("target.kind from-khat/path needs target.file".into()));
        }
        if self.particles == 0 || self.replicas == 0 || self.fbm_dim == 0 {
            return Err(Error::Config("particles, replicas and fbm.dim must be positive".into()));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<LinearFamily<f64>> {
        let kind = FamilyKind::parse(&self.family)?;
        let d = kind.default_params::<f64>();
        let p = LinearParams {
            dim: self.family_dim.unwrap_or(d.dim),
            a1: self.a1.unwrap_or(d.a1),
            a2: self.a2.unwrap_or(d.a2),
            a3: self.a3.unwrap_or(d.a3),
            a4: self.a4.unwrap_or(d.a4),
            s0: self.s0.unwrap_or(d.s0),
            s1: self.s1.unwrap_or(d.s1),
            beta: self.beta.unwrap_or(d.beta),
            c1: self.c1.unwrap_or(d.c1),
            c2: self.c2.unwrap_or(d.c2),
            gamma0: self.gamma0.unwrap_or(d.gamma0),
        };
        LinearFamily::new(kind, p)
    }

    pub fn hurst(&self) -> Result<Hurst<f64>> {
        Hurst::new(self.hurst)
    }

    pub fn grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub fn scales(&self) -> Result<ScaleParams<f64>> {
        ScaleParams::new(self.delta, self.eps)
    }

    /// Particle settings for a coefficient set with dimensions `(n, m)`.
    pub fn sim(&self, n: usize, m: usize) -> Result<SimConfig<f64>> {
        let mut s = SimConfig::new(self.grid()?, self.hurst()?, self.particles, self.seed, vec![self.x0; n], vec![self.y0; m]);
        s.fast_substeps = self.substeps;
        Ok(s)
    }

    pub fn ladder_spec(&self) -> LadderSpec {
        let eps_rule = match &self.eps_values {
            Some(values) => EpsRule::Fixed { values: values.clone() },
            None => EpsRule::Power { exponent: self.eps_exponent, scale: self.eps_scale },
        };
        LadderSpec { deltas: self.ladder.clone(), eps_rule, replicas: self.replicas, blocks: vec![], particles: self.particles }
    }

    pub fn bbar_config(&self) -> BbarConfig {
        match self.bbar {
            BbarMethod::Analytic => BbarConfig::Analytic,
            BbarMethod::MonteCarlo => BbarConfig::MonteCarlo {
                frozen: FrozenConfig {
                    step: self.bbar_step,
                    horizon: self.bbar_horizon,
                    chains: self.bbar_chains,
                    batches: self.bbar_batches,
                    seed: self.seed,
                    y0: None,
                },
                burn_in: self.bbar_burn_in,
                spacing: self.bbar_spacing,
            },
        }
    }

    pub fn rate_config(&self) -> RateConfig {
        RateConfig {
            max_iter: self.rate_max_iter,
            max_outer: self.rate_max_outer,
            grad_tol: self.rate_grad_tol,
            path_tol: self.rate_path_tol,
            penalty0: self.rate_penalty0,
            penalty_growth: self.rate_penalty_growth,
            exit_candidates: self.rate_exit_candidates,
            lse_temperatures: self.rate_lse_temperatures.clone(),
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads and validates a configuration file.
pub fn load_config(path: &FsPath) -> Result<RunConfig> {
    load_config_with(Some(path), &[])
}

/// Defaults, then the file if any, then `overrides`; the result is validated.
pub fn load_config_with(path: Option<&FsPath>, overrides: &[(String, Value)]) -> Result<RunConfig> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            RunConfig::from_json_str(&text, &p.display().to_string())?
        }
        None => RunConfig::default(),
    };
    let cfg = base.with_overrides(overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json_str("{}", "t").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_is_the_normal_form() {
        let c = RunConfig::from_json_str(r#"{"grid.N": 128, "family.a1": -3, "ladder.deltas": [0.5, 0.35, 0.25]}"#, "t").unwrap();
        let text = c.to_json();
        let again = RunConfig::from_json_str(&text, "t").unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_json(), text);
        let keys = serde_json::from_str::<Map<String, Value>>(&text).unwrap();
        assert!(keys.contains_key("grid.N") && keys.contains_key("family.gamma0") && keys.contains_key("output.format"));
    }

    #[test]
    fn unknown_keys_and_type_errors_name_the_field() {
        let e = RunConfig::from_json_str("{\n  \"grid.M\": 3\n}", "cfg.json").unwrap_err().to_string();
        assert!(e.contains("grid.M") && e.contains("line 2"), "{e}");
        let e = RunConfig::from_json_str("{\"grid.N\": \"many\"}", "cfg.json").unwrap_err().to_string();
        assert!(e.contains("grid.N") && e.contains("column"), "{e}");
        let e = RunConfig::from_json_str("{\"seed\": 1,}", "cfg.json").unwrap_err().to_string();
        assert!(e.contains("line 1"), "{e}");
        let e = RunConfig::default().with_overrides(&[("nope".into(), json!(1))]).unwrap_err().to_string();
        assert!(e.contains("nope"));
        let e = RunConfig::default().with_overrides(&[("grid.N".into(), json!(-1))]).unwrap_err().to_string();
        assert!(e.contains("grid.N"), "{e}");
    }

    #[test]
    fn flags_override_file_values() {
        let c = RunConfig::from_json_str(r#"{"seed": 42}"#, "t").unwrap();
        let c = c.with_overrides(&[("seed".into(), json!(7))]).unwrap();
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn ladder_validation_mentions_scale_parameters() {
        let c = RunConfig::from_json_str(r#"{"ladder.eps_values": [0.1, 0.09, 0.085]}"#, "t").unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("scale parameters"), "{e}");
        let c = RunConfig::from_json_str(r#"{"ladder.eps_exponent": 0.5}"#, "t").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("scale parameters"));
    }

    #[test]
    fn hash_ignores_the_output_location() {
        let a = RunConfig::default();
        let b = RunConfig { output_dir: "elsewhere".into(), ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig { seed: 1, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn family_overrides_apply() {
        let c = RunConfig { family: "gaussian_decoupled".into(), a1: Some(-3.0), ..RunConfig::default() };
        let f = c.family().unwrap();
        assert_eq!(f.params().a1, -3.0);
        assert_eq!(f.params().s0, 1.0);
        assert!(RunConfig { family: "bogus".into(), ..RunConfig::default() }.family().is_err());
    }
}
