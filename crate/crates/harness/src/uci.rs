//! Regression with a one-hidden-layer network on a CSV dataset: SGHMC with
//! and without adaptive latent updates, optionally with annealed inverse
//! temperature, over seeded random train/test splits.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ssgl::datagen::{load_csv_regression, CsvOptions};
use ssgl::rng::{chain_stream, stream_rng};
use ssgl::samplers::{run_chain, SghmcParams};
use ssgl::{Activation, BetaInit, ChainConfig, Dataset, InitConfig, Model, RhoInit, Schedule, Schedules, Variant};

use crate::config::PriorHyper;
use crate::error::{HarnessError, Result};
use crate::experiment::thread_pool;
use crate::metrics::{mean_sd, posterior_predict, response, rmse};

/// A sampler variant, optionally with inverse temperature `tau * factor^epoch`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arm {
    pub variant: Variant,
    pub annealed: bool,
}

impl Arm {
    pub fn name(&self) -> String {
        if self.annealed {
            format!("A-{}", self.variant)
        } else {
            self.variant.to_string()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UciConfig {
    /// Dataset path; the last column is the response.
    pub csv: PathBuf,
    pub has_header: bool,
    pub normalize: bool,
    pub train_fraction: f64,
    pub hidden: usize,
    pub activation: Activation,
    pub variants: Vec<Variant>,
    /// Also run every variant with annealed inverse temperature.
    pub anneal: bool,
    /// Per-epoch growth of the inverse temperature in annealed arms.
    pub anneal_factor: f64,
    pub inv_temp: f64,
    pub epochs: u64,
    pub batch_size: usize,
    /// SGD-with-momentum settings; the sampler step is `sqrt(lr)` and the
    /// friction `(1 - momentum) / sqrt(lr)`.
    pub lr: f64,
    pub momentum: f64,
    pub sa_step: Schedule,
    pub v0: f64,
    pub prior: PriorHyper,
    pub sigma_init: f64,
    pub delta_init: f64,
    pub init_sd: f64,
    pub burn_in_fraction: f64,
    pub thinning: u64,
    pub repeats: u64,
    /// Repeat `r` uses seed `seed + r` for its split and its chains.
    pub seed: u64,
}

impl UciConfig {
    pub fn new(csv: impl Into<PathBuf>) -> Self {
        Self {
            csv: csv.into(),
            has_header: false,
            normalize: true,
            train_fraction: 0.9,
            hidden: 50,
            activation: Activation::Relu,
            variants: vec![Variant::Sghmc, Variant::SghmcEm, Variant::SghmcSa],
            anneal: true,
            anneal_factor: 1.003,
            inv_temp: 1.0,
            epochs: 1000,
            batch_size: 50,
            lr: 1e-4,
            momentum: 0.9,
            sa_step: Schedule::ShiftedPowerLaw { scale: 10.0, shift: 1000.0, exponent: 0.7 },
            v0: 0.1,
            prior: PriorHyper { v1: 10.0, a: 1.0, b: Some(10.0), nu: 1.0, lambda: 1.0, sigma0: 10.0 },
            sigma_init: 10.0,
            delta_init: 0.5,
            init_sd: 0.1,
            burn_in_fraction: 0.5,
            thinning: 1,
            repeats: 20,
            seed: 1,
        }
    }

    pub fn arms(&self) -> Vec<Arm> {
        let mut arms: Vec<Arm> = self.variants.iter().map(|&variant| Arm { variant, annealed: false }).collect();
        if self.anneal {
            arms.extend(self.variants.iter().map(|&variant| Arm { variant, annealed: true }));
        }
        arms
    }

    pub fn step(&self) -> f64 {
        self.lr.sqrt()
    }

    pub fn friction(&self) -> f64 {
        ssgl::SghmcState::friction_for_momentum(self.step(), self.momentum)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.variants.is_empty() {
            return bad("variant list is empty".into());
        }
        if let Some(v) = self.variants.iter().find(|v| v.kernel() != ssgl::samplers::Kernel::Hamiltonian) {
            return bad(format!("the network runner uses SGHMC variants only, got {v}"));
        }
        if !(self.lr > 0.0 && self.momentum >= 0.0 && self.momentum < 1.0) {
            return bad(format!("need lr > 0 and momentum in [0, 1), got {} and {}", self.lr, self.momentum));
        }
        if !(self.inv_temp > 0.0 && self.anneal_factor >= 1.0) {
            return bad("inverse temperature must be positive and the anneal factor at least 1".into());
        }
        if self.epochs == 0 || self.batch_size == 0 || self.repeats == 0 || self.hidden == 0 || self.thinning == 0 {
            return bad("epochs, batch size, repeats, hidden width and thinning must be positive".into());
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return bad(format!("burn_in_fraction must lie in [0, 1), got {}", self.burn_in_fraction));
        }
        if !(self.sigma_init > 0.0 && self.delta_init > 0.0 && self.delta_init < 1.0 && self.init_sd >= 0.0) {
            return bad("initial sigma must be positive, delta in (0, 1) and init_sd nonnegative".into());
        }
        self.prior.with_v0(self.v0).validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UciRun {
    pub arm: String,
    pub repeat: u64,
    pub seed: u64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Failure message; the RMSE fields are NaN when set.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UciSummary {
    pub arm: String,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
    pub completed: usize,
}

#[derive(Clone, Debug)]
pub struct UciResult {
    pub config: UciConfig,
    pub runs: Vec<UciRun>,
    pub summary: Vec<UciSummary>,
    pub train_rows: usize,
    pub test_rows: usize,
}

fn chain_for(cfg: &UciConfig, arm: Arm, train_rows: usize) -> ChainConfig {
    let per_epoch = train_rows.div_ceil(cfg.batch_size).max(1) as u64;
    let iters = cfg.epochs * per_epoch;
    let inv_temp = if arm.annealed {
        Schedule::Geometric { initial: cfg.inv_temp, factor: cfg.anneal_factor, every: per_epoch }
    } else {
        Schedule::constant(cfg.inv_temp)
    };
    ChainConfig {
        variant: arm.variant,
        iters,
        batch_size: cfg.batch_size.min(train_rows),
        schedules: Schedules {
            lr: Schedule::constant(cfg.step()),
            sa_step: cfg.sa_step,
            inv_temp,
            thinning: cfg.thinning,
            burn_in: (iters as f64 * cfg.burn_in_fraction).floor() as u64,
        },
        init: InitConfig {
            beta: BetaInit::Normal { sd: cfg.init_sd },
            rho: RhoInit::Constant { value: 1.0 },
            sigma: cfg.sigma_init,
            delta: cfg.delta_init,
        },
        sghmc: Some(SghmcParams { friction: cfg.friction(), noise_estimate: 0.0 }),
        prune: None,
        traced: Vec::new(),
        keep_samples: true,
    }
}

fn one_run(cfg: &UciConfig, model: &Model, arm: Arm, repeat: u64, train: &Dataset, test: &Dataset) -> UciRun {
    let seed = cfg.seed + repeat;
    let attempt = || -> Result<(f64, f64)> {
        let prior = cfg.prior.with_v0(cfg.v0);
        let chain = chain_for(cfg, arm, train.len());
        let trace = run_chain(model, train, &prior, &chain, &mut stream_rng(seed, chain_stream(0)))?;
        let tr = posterior_predict(model, &trace, train)?;
        let te = posterior_predict(model, &trace, test)?;
        Ok((rmse(&response(train), &tr.point), rmse(&response(test), &te.point)))
    };
    let (train_rmse, test_rmse, error) = match attempt() {
        Ok((a, b)) => (a, b, None),
        Err(e) => (f64::NAN, f64::NAN, Some(e.to_string())),
    };
    UciRun { arm: arm.name(), repeat, seed, train_rmse, test_rmse, error }
}

/// Runs every arm on every repeat. Data loading and configuration problems
/// return `Err`; chain failures are recorded in the runs.
pub fn run_uci(cfg: &UciConfig, threads: Option<usize>) -> Result<UciResult> {
    cfg.validate()?;
    let splits = (0..cfg.repeats)
        .map(|r| {
            let opts = CsvOptions {
                has_header: cfg.has_header,
                normalize: cfg.normalize,
                train_fraction: cfg.train_fraction,
                seed: cfg.seed + r,
            };
            load_csv_regression::<f64>(&cfg.csv, &opts)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let dim = splits[0].0.dim();
    let model = Model::Mlp { dim, hidden: cfg.hidden, activation: cfg.activation };
    let arms = cfg.arms();
    let jobs: Vec<(Arm, u64)> = arms.iter().flat_map(|&a| (0..cfg.repeats).map(move |r| (a, r))).collect();
    let pool = thread_pool(threads)?;
    let runs: Vec<UciRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(arm, r)| {
                let (train, test) = &splits[r as usize];
                one_run(cfg, &model, arm, r, train, test)
            })
            .collect()
    });
    let summary = arms
        .iter()
        .map(|arm| {
            let name = arm.name();
            let ok: Vec<f64> =
                runs.iter().filter(|r| r.arm == name && r.error.is_none()).map(|r| r.test_rmse).collect();
            let (m, s) = if ok.is_empty() { (f64::NAN, f64::NAN) } else { mean_sd(&ok) };
            UciSummary { arm: name, rmse_mean: m, rmse_sd: s, completed: ok.len() }
        })
        .collect();
    Ok(UciResult {
        config: cfg.clone(),
        runs,
        summary,
        train_rows: splits[0].0.len(),
        test_rows: splits[0].1.len(),
    })
}

impl UciResult {
    pub fn check(&self) -> Result<()> {
        let failed: Vec<&UciRun> = self.runs.iter().filter(|r| r.error.is_some()).collect();
        match failed.first() {
            None => Ok(()),
            Some(r) => Err(HarnessError::ChainFailures {
                failed: failed.len(),
                total: self.runs.len(),
                first: format!("{} repeat {}: {}", r.arm, r.repeat, r.error.as_deref().unwrap_or_default()),
            }),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::output::write_config_echo(dir, "uci", &self.config)?;
        let mut w = csv::Writer::from_path(dir.join("runs.csv"))?;
        w.write_record(["arm", "repeat", "seed", "train_rmse", "test_rmse", "error"])?;
        for r in &self.runs {
            w.write_record([
                r.arm.clone(),
                r.repeat.to_string(),
                r.seed.to_string(),
                r.train_rmse.to_string(),
                r.test_rmse.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join(crate::output::METRICS_FILE))?;
        w.write_record(["arm", "rmse_mean", "rmse_sd", "completed"])?;
        for s in &self.summary {
            w.write_record([s.arm.clone(), s.rmse_mean.to_string(), s.rmse_sd.to_string(), s.completed.to_string()])?;
        }
        w.flush()?;
        let panel = crate::svg::Panel {
            title: "test RMSE per repeat".into(),
            kind: crate::svg::PanelKind::Lines,
            series: self
                .summary
                .iter()
                .map(|s| crate::svg::Series {
                    label: s.arm.clone(),
                    points: self.runs.iter().filter(|r| r.arm == s.arm).map(|r| (r.repeat as f64, r.test_rmse)).collect(),
                })
                .collect(),
            reference: None,
            diagonal: false,
        };
        std::fs::write(dir.join("rmse.svg"), crate::svg::render("network regression", &[panel]))?;
        Ok(())
    }
}
