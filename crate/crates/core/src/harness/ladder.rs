use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiscale::{validate_ladder, ScaleParams, SimConfig};
use crate::rng;

/// How `ε` follows `δ` along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsRule {
    /// `ε = scale · δ^exponent`.
    Power { exponent: f64, scale: f64 },
    /// Explicit values, one per rung.
    Fixed { values: Vec<f64> },
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::Power { exponent: 1.5, scale: 1.0 }
    }
}

/// Scale ladder and Monte Carlo sizes of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSpec {
    pub deltas: Vec<f64>,
    pub eps_rule: EpsRule,
    pub replicas: usize,
    pub blocks: Vec<f64>,
    pub particles: usize,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            deltas: vec![0.5, 0.25, 0.125],
            eps_rule: EpsRule::default(),
            replicas: 2000,
            blocks: vec![],
            particles: 1000,
        }
    }
}

impl LadderSpec {
    /// The `(δ, ε)` rungs, validated so that `δ` and `ε/δ` both decrease.
    pub fn scales(&self) -> Result<Vec<ScaleParams<f64>>> {
        let eps: Vec<f64> = match &self.eps_rule {
            EpsRule::Power { exponent, scale } => self.deltas.iter().map(|d| scale * d.powf(*exponent)).collect(),
            EpsRule::Fixed { values } => {
                if values.len() != self.deltas.len() {
                    return Err(Error::Config(format!(
                        "eps ladder has {} values for {} deltas",
                        values.len(),
                        self.deltas.len()
                    )));
                }
                values.clone()
            }
        };
        let ladder = self
            .deltas
            .iter()
            .zip(eps)
            .map(|(d, e)| ScaleParams::new(*d, e))
            .collect::<Result<Vec<_>>>()?;
        validate_ladder(&ladder)?;
        Ok(ladder)
    }
}

/// Runs `replicas` samples as `⌈replicas / particles⌉` ensembles of
/// `particles` each; ensemble `b` of rung `rung` gets its own derived seed.
/// Samples are returned in a fixed order.
pub(crate) fn batched<F>(base: &SimConfig<f64>, replicas: usize, particles: usize, rung: u64, mut run: F) -> Result<Vec<f64>>
where
    F: FnMut(&SimConfig<f64>) -> Result<Vec<f64>>,
{
    if particles == 0 || replicas == 0 {
        return Err(Error::Config("replicas and particles must be positive".into()));
    }
    let batches = replicas.div_ceil(particles);
    let mut out = Vec::with_capacity(batches * particles);
    for b in 0..batches {
        let mut cfg = base.clone();
        cfg.particles = particles;
        cfg.seed = rng::derive(base.seed, rng::tag::EXPERIMENT, rung, b as u64);
        out.extend(run(&cfg)?);
    }
    Ok(out)
}
