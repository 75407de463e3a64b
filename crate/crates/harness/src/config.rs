//! Experiment configuration, defaults for the two simulation studies, and
//! dotted-key overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use ssgl::datagen::SimSpec;
use ssgl::prior::BetaShape;
use ssgl::samplers::retained_count;
use ssgl::{BetaInit, PriorConfig, PruneSchedule, RhoInit, Schedule, SghmcParams, Variant};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimKind {
    Linear,
    Logistic,
}

/// Prior hyperparameters other than `v0`, which is a grid axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorHyper {
    pub v1: f64,
    pub a: f64,
    /// `null` means the width of the sparse layer.
    pub b: Option<f64>,
    pub nu: f64,
    pub lambda: f64,
    pub sigma0: f64,
}

impl Default for PriorHyper {
    fn default() -> Self {
        Self { v1: 10.0, a: 1.0, b: None, nu: 1.0, lambda: 1.0, sigma0: 1.0 }
    }
}

impl PriorHyper {
    pub fn with_v0(&self, v0: f64) -> PriorConfig {
        let mut cfg = PriorConfig::simulation(v0);
        cfg.v1 = self.v1;
        cfg.a = self.a;
        if let Some(b) = self.b {
            cfg.b = BetaShape::Fixed(b);
        }
        cfg.nu = self.nu;
        cfg.lambda = self.lambda;
        cfg.sigma0 = self.sigma0;
        cfg
    }
}

/// Starting values shared by every grid cell; `sigma` comes from the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartValues {
    pub beta: BetaInit,
    pub rho: RhoInit,
    pub delta: f64,
}

/// A grid of chains over variants, `v0`, initial `sigma` and seeds, all on
/// simulated data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: SimKind,
    pub sim: SimSpec,
    pub variants: Vec<Variant>,
    pub v0: Vec<f64>,
    pub sigma_init: Vec<f64>,
    pub seeds: Vec<u64>,
    pub iters: u64,
    pub batch_size: usize,
    pub lr: Schedule,
    pub sa_step: Schedule,
    pub inv_temp: Schedule,
    pub thinning: u64,
    /// Fraction of iterations discarded before samples are retained.
    pub burn_in_fraction: f64,
    pub prior: PriorHyper,
    pub init: StartValues,
    #[serde(default)]
    pub sghmc: Option<SghmcParams>,
    #[serde(default)]
    pub prune: Option<PruneSchedule>,
    /// Coordinates written to trace.csv and plotted.
    pub traced: Vec<usize>,
    /// Posterior-mean magnitude above which a coordinate counts as selected.
    pub selection_threshold: f64,
}

impl ExperimentConfig {
    /// Linear large-p-small-n study: 500k iterations, batch 50,
    /// `v0` in {0.01, 0.1}, initial `sigma` in {1, 2}.
    pub fn linear() -> Self {
        Self {
            kind: SimKind::Linear,
            sim: SimSpec::linear(),
            variants: vec![Variant::Sgld, Variant::SgldEm, Variant::SgldSa],
            v0: vec![0.01, 0.1],
            sigma_init: vec![1.0, 2.0],
            seeds: vec![1],
            iters: 500_000,
            batch_size: 50,
            lr: Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 },
            sa_step: Schedule::ShiftedPowerLaw { scale: 10.0, shift: 1000.0, exponent: 0.7 },
            inv_temp: Schedule::constant(1.0),
            thinning: 100,
            burn_in_fraction: 0.5,
            prior: PriorHyper::default(),
            init: StartValues { beta: BetaInit::Zeros, rho: RhoInit::Constant { value: 1.0 }, delta: 0.5 },
            sghmc: None,
            prune: None,
            traced: vec![0, 1, 2],
            selection_threshold: 0.1,
        }
    }

    /// Logistic study: as [`linear`](Self::linear) with `n = 500`, correlation
    /// 0.3 and `v0` in {0.01, 0.001}.
    pub fn logistic() -> Self {
        Self { kind: SimKind::Logistic, sim: SimSpec::logistic(), v0: vec![0.01, 0.001], ..Self::linear() }
    }

    pub fn burn_in(&self) -> u64 {
        (self.iters as f64 * self.burn_in_fraction).floor() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.sim.validate()?;
        if self.variants.is_empty() {
            return bad("variant list is empty".into());
        }
        if self.v0.is_empty() || self.sigma_init.is_empty() || self.seeds.is_empty() {
            return bad("v0, sigma_init and seeds need at least one value each".into());
        }
        if let Some(&s) = self.sigma_init.iter().find(|&&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("initial sigma must be positive, got {s}"));
        }
        for &v0 in &self.v0 {
            self.prior.with_v0(v0).validate()?;
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad(format!("burn_in_fraction must lie in [0, 1), got {}", self.burn_in_fraction));
        }
        if self.thinning == 0 {
            return bad("thinning must be positive".into());
        }
        if self.iters > 0 && retained_count(self.iters, self.burn_in(), self.thinning) == 0 {
            return bad(format!(
                "{} iterations with burn-in {} and thinning {} retain no samples",
                self.iters,
                self.burn_in(),
                self.thinning
            ));
        }
        if let Some(&i) = self.traced.iter().find(|&&i| i >= self.sim.p) {
            return bad(format!("traced coordinate {i} is outside 0..{}", self.sim.p));
        }
        if !(self.selection_threshold > 0.0) {
            return bad("selection threshold must be positive".into());
        }
        for v in &self.variants {
            if v.kernel() == ssgl::samplers::Kernel::Hamiltonian && self.sghmc.is_none() {
                return bad(format!("{v} needs `sghmc` friction settings"));
            }
        }
        Ok(())
    }
}

/// Parses a value for an override: JSON if it parses, a bare string otherwise.
fn parse_override_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `a.b.c=value` to a JSON document. Intermediate keys must exist,
/// so misspelled paths are reported instead of silently added.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(HarnessError::Config(format!("override key `{path}` has an empty segment")));
    }
    let mut node = doc;
    for (depth, key) in keys.iter().enumerate() {
        let last = depth + 1 == keys.len();
        node = match node {
            Value::Object(map) => {
                if !map.contains_key(*key) {
                    return Err(HarnessError::Config(format!("unknown config key `{}`", keys[..=depth].join("."))));
                }
                map.get_mut(*key).expect("checked")
            }
            Value::Array(items) => {
                let i: usize = key
                    .parse()
                    .map_err(|_| HarnessError::Config(format!("`{key}` in `{path}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(i)
                    .ok_or_else(|| HarnessError::Config(format!("index {i} in `{path}` is out of range 0..{len}")))?
            }
            _ => return Err(HarnessError::Config(format!("`{}` is not a table", keys[..depth].join(".")))),
        };
        if last {
            *node = parse_override_value(raw.trim());
        }
    }
    Ok(())
}

/// Deserializes a config of type `C` from `base` with `overrides` applied in order.
pub fn with_overrides<C>(base: &C, overrides: &[String]) -> Result<C>
where
    C: Serialize + for<'de> Deserialize<'de>,
{
    let mut doc = serde_json::to_value(base)?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_json::from_value(doc).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Canonical JSON: keys sorted, two-space indentation, trailing newline.
pub fn canonical_json<C: Serialize>(value: &C) -> Result<String> {
    // serde_json's default map is ordered by key, so a round trip through
    // `Value` sorts every object.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::linear().validate().unwrap();
        ExperimentConfig::logistic().validate().unwrap();
    }

    #[test]
    fn logistic_changes_only_its_fields() {
        let (lin, log) = (ExperimentConfig::linear(), ExperimentConfig::logistic());
        assert_eq!(log.sim.n, 500);
        assert_eq!(log.v0, vec![0.01, 0.001]);
        assert_eq!(lin.lr, log.lr);
        assert_eq!(lin.sa_step, log.sa_step);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::linear();
        let back: ExperimentConfig = serde_json::from_str(&canonical_json(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn overrides_set_nested_values() {
        let cfg = with_overrides(
            &ExperimentConfig::linear(),
            &["iters=2000".into(), "sim.p=50".into(), "v0=[0.5]".into(), "prior.b=3".into(), "v0.0=0.25".into()],
        )
        .unwrap();
        assert_eq!(cfg.iters, 2000);
        assert_eq!(cfg.sim.p, 50);
        assert_eq!(cfg.v0, vec![0.25]);
        assert_eq!(cfg.prior.b, Some(3.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let base = ExperimentConfig::linear();
        assert!(with_overrides(&base, &["sim.nope=1".into()]).is_err());
        assert!(with_overrides(&base, &["iters".into()]).is_err());
        assert!(with_overrides(&base, &["iters=\"many\"".into()]).is_err());
        let mut doc = serde_json::to_value(&base).unwrap();
        doc["extra"] = Value::Bool(true);
        assert!(serde_json::from_value::<ExperimentConfig>(doc).is_err());
    }

    #[test]
    fn too_short_runs_are_rejected() {
        let mut cfg = ExperimentConfig::linear();
        cfg.iters = 150;
        assert!(cfg.validate().is_err());
        cfg.iters = 0;
        cfg.validate().unwrap();
        cfg.iters = 1000;
        cfg.validate().unwrap();
    }
}
