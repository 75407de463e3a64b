//! Runs the simulation grid: one dataset per seed, one chain per
//! (variant, v0, initial sigma, seed) cell, fanned out over worker threads.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ssgl::datagen::{gen_linear_sim, gen_logistic_sim};
use ssgl::rng::{chain_stream, stream_rng, DATA_STREAM};
use ssgl::samplers::run_chain;
use ssgl::{ChainConfig, InitConfig, Model, Schedules, Simulated, TraceRecord, Variant};

use crate::config::{ExperimentConfig, SimKind};
use crate::error::{HarnessError, Result};
use crate::metrics::{posterior_mean, posterior_predict, selection_report, split_metrics, SelectionReport, SplitMetrics};

/// Grid coordinates of one chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub variant: Variant,
    pub v0: f64,
    pub sigma_init: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellOutput {
    pub key: CellKey,
    pub train: SplitMetrics,
    pub test: SplitMetrics,
    pub train_pred: Vec<f64>,
    pub test_pred: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub selection: SelectionReport,
    pub records: Vec<TraceRecord>,
    pub final_sigma: f64,
    pub final_deltas: Vec<f64>,
    /// Final `rho` of every sparse coordinate, layers concatenated.
    pub final_rho: Vec<f64>,
    pub retained: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellFailure {
    pub key: CellKey,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// One dataset per seed, in the order of `config.seeds`.
    pub data: Vec<(u64, Simulated)>,
    /// Cells ordered by v0, initial sigma, seed, then variant.
    pub cells: Vec<std::result::Result<CellOutput, CellFailure>>,
}

impl ExperimentResult {
    pub fn outputs(&self) -> impl Iterator<Item = &CellOutput> {
        self.cells.iter().filter_map(|c| c.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellFailure> {
        self.cells.iter().filter_map(|c| c.as_ref().err())
    }

    pub fn dataset(&self, seed: u64) -> Option<&Simulated> {
        self.data.iter().find(|(s, _)| *s == seed).map(|(_, d)| d)
    }

    /// `Err` summarizing the failures if any chain failed.
    pub fn check(&self) -> Result<()> {
        let failed: Vec<&CellFailure> = self.failures().collect();
        match failed.first() {
            None => Ok(()),
            Some(f) => Err(HarnessError::ChainFailures {
                failed: failed.len(),
                total: self.cells.len(),
                first: format!("{} (v0 {}, sigma {}, seed {}): {}", f.key.variant, f.key.v0, f.key.sigma_init, f.key.seed, f.message),
            }),
        }
    }
}

pub fn model_for(cfg: &ExperimentConfig) -> Model {
    match cfg.kind {
        SimKind::Linear => Model::Linear { dim: cfg.sim.p },
        SimKind::Logistic => Model::Logistic { dim: cfg.sim.p },
    }
}

/// The dataset for `seed`; every cell with this seed shares it.
pub fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<Simulated> {
    let mut rng = stream_rng(seed, DATA_STREAM);
    Ok(match cfg.kind {
        SimKind::Linear => gen_linear_sim(&cfg.sim, &mut rng)?,
        SimKind::Logistic => gen_logistic_sim(&cfg.sim, &mut rng)?,
    })
}

pub fn chain_config(cfg: &ExperimentConfig, key: &CellKey) -> ChainConfig {
    ChainConfig {
        variant: key.variant,
        iters: cfg.iters,
        batch_size: cfg.batch_size,
        schedules: Schedules {
            lr: cfg.lr,
            sa_step: cfg.sa_step,
            inv_temp: cfg.inv_temp,
            thinning: cfg.thinning,
            burn_in: cfg.burn_in(),
        },
        init: InitConfig { beta: cfg.init.beta, rho: cfg.init.rho, sigma: key.sigma_init, delta: cfg.init.delta },
        sghmc: cfg.sghmc,
        prune: cfg.prune.clone(),
        traced: cfg.traced.clone(),
        keep_samples: cfg.kind != SimKind::Linear,
    }
}

/// Runs one cell on its seed's dataset. The chain stream depends only on the
/// seed, so variants within a seed see paired noise.
pub fn run_cell(cfg: &ExperimentConfig, data: &Simulated, key: CellKey) -> Result<CellOutput> {
    let start = Instant::now();
    let model = model_for(cfg);
    let prior = cfg.prior.with_v0(key.v0);
    let chain = chain_config(cfg, &key);
    let mut rng = stream_rng(key.seed, chain_stream(0));
    let trace = run_chain(&model, &data.train, &prior, &chain, &mut rng)?;
    let mean = posterior_mean(&trace)?;
    let train_pred = posterior_predict(&model, &trace, &data.train)?;
    let test_pred = posterior_predict(&model, &trace, &data.test)?;
    Ok(CellOutput {
        key,
        train: split_metrics(&data.train, &train_pred)?,
        test: split_metrics(&data.test, &test_pred)?,
        train_pred: train_pred.point,
        test_pred: test_pred.point,
        selection: selection_report(&mean, &trace.final_latent, cfg.selection_threshold)?,
        posterior_mean: mean,
        final_sigma: trace.final_latent.sigma,
        final_deltas: trace.final_latent.layers.iter().map(|l| l.delta).collect(),
        final_rho: trace.final_latent.layers.iter().flat_map(|l| l.rho.iter().copied()).collect(),
        records: trace.records,
        retained: trace.retained,
        elapsed: start.elapsed(),
    })
}

/// Grid cells in output order.
pub fn cell_keys(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &v0 in &cfg.v0 {
        for &sigma_init in &cfg.sigma_init {
            for &seed in &cfg.seeds {
                for &variant in &cfg.variants {
                    keys.push(CellKey { variant, v0, sigma_init, seed });
                }
            }
        }
    }
    keys
}

/// Worker pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(HarnessError::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| HarnessError::Config(format!("cannot start worker threads: {e}")))
}

/// Runs every cell of the grid. Chain failures are recorded per cell and do
/// not stop the other cells; only configuration problems return `Err`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = cfg.seeds.iter().map(|&s| Ok((s, simulate(cfg, s)?))).collect::<Result<Vec<_>>>()?;
    let keys = cell_keys(cfg);
    let pool = thread_pool(threads)?;
    let cells = pool.install(|| {
        keys.par_iter()
            .map(|&key| {
                let sim = &data.iter().find(|(s, _)| *s == key.seed).expect("dataset per seed").1;
                run_cell(cfg, sim, key).map_err(|e| CellFailure { key, message: e.to_string() })
            })
            .collect()
    });
    Ok(ExperimentResult { config: cfg.clone(), data, cells })
}
