use std::fs;
use std::path::Path;

use ssgl::rng::{chain_stream, stream_rng};
use ssgl::samplers::run_chain;
use ssgl::{BetaInit, ChainConfig, InitConfig, Model, RhoInit, Schedule, Schedules, Variant};
use ssgl_harness::experiment::simulate;
use ssgl_harness::output::{write_experiment, METRICS_FILE, PREDICTIONS_FILE, TIMING_FILE};
use ssgl_harness::{posterior_mean, run_experiment, selection_report, ExperimentConfig, PriorHyper};

fn small_linear() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::linear();
    cfg.sim.n = 40;
    cfg.sim.p = 60;
    cfg.sim.test_n = 20;
    cfg.iters = 2000;
    cfg.seeds = vec![3, 4];
    cfg
}

#[test]
fn streaming_mean_matches_batch_mean() {
    let cfg = small_linear();
    let data = simulate(&cfg, 1).unwrap();
    let model = Model::Linear { dim: cfg.sim.p };
    let prior = PriorHyper::default().with_v0(0.1);
    let chain = ChainConfig {
        variant: Variant::SgldSa,
        iters: 20_000,
        batch_size: 20,
        schedules: Schedules {
            lr: Schedule::PowerLaw { scale: 1e-3, exponent: 1.0 / 3.0 },
            sa_step: Schedule::ShiftedPowerLaw { scale: 10.0, shift: 1000.0, exponent: 0.7 },
            inv_temp: Schedule::constant(1.0),
            thinning: 1,
            burn_in: 10_000,
        },
        init: InitConfig { beta: BetaInit::Zeros, rho: RhoInit::Constant { value: 1.0 }, sigma: 1.0, delta: 0.5 },
        sghmc: None,
        prune: None,
        traced: vec![],
        keep_samples: true,
    };
    let trace = run_chain(&model, &data.train, &prior, &chain, &mut stream_rng(1, chain_stream(0))).unwrap();
    assert_eq!(trace.samples.len(), 10_000);
    let streaming = posterior_mean(&trace).unwrap();
    for (j, s) in streaming.iter().enumerate() {
        let batch: f64 = trace.samples.iter().map(|v| v[j]).sum::<f64>() / trace.samples.len() as f64;
        assert!((s - batch).abs() <= 1e-12 * batch.abs().max(1.0), "coordinate {j}: {s} vs {batch}");
    }
}

fn read_csv(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn metrics_are_recomputable_from_predictions() {
    let cfg = small_linear();
    let res = run_experiment(&cfg, Some(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_experiment(dir.path(), "simulate-linear", &cfg, &res).unwrap();
    let preds = read_csv(&dir.path().join(PREDICTIONS_FILE));
    let metrics = read_csv(&dir.path().join(METRICS_FILE));
    assert_eq!(metrics.len(), 2 * cfg.variants.len() * cfg.v0.len() * cfg.sigma_init.len() * cfg.seeds.len());
    for m in &metrics {
        let key: Vec<&str> = (0..5).map(|i| &m[i]).collect();
        let rows: Vec<(f64, f64)> = preds
            .iter()
            .filter(|p| (0..5).all(|i| &p[i] == key[i]))
            .map(|p| (p[6].parse().unwrap(), p[7].parse().unwrap()))
            .collect();
        assert!(!rows.is_empty());
        let n = rows.len() as f64;
        let mae = rows.iter().map(|(y, f)| (y - f).abs()).sum::<f64>() / n;
        let mse = rows.iter().map(|(y, f)| (y - f) * (y - f)).sum::<f64>() / n;
        let want_mae: f64 = m[5].parse().unwrap();
        let want_mse: f64 = m[6].parse().unwrap();
        assert!((mae - want_mae).abs() <= 1e-10 * want_mae.max(1.0), "{key:?}: {mae} vs {want_mae}");
        assert!((mse - want_mse).abs() <= 1e-10 * want_mse.max(1.0), "{key:?}: {mse} vs {want_mse}");
    }
}

#[test]
fn same_config_and_seed_give_identical_files() {
    let mut cfg = small_linear();
    cfg.iters = 1000;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_experiment(a.path(), "simulate-linear", &cfg, &run_experiment(&cfg, Some(1)).unwrap()).unwrap();
    write_experiment(b.path(), "simulate-linear", &cfg, &run_experiment(&cfg, Some(2)).unwrap()).unwrap();
    let mut names: Vec<String> =
        fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert!(names.len() >= 7);
    for name in names.iter().filter(|n| n.as_str() != TIMING_FILE) {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn em_equals_sa_with_unit_step_through_the_grid() {
    let mut cfg = small_linear();
    cfg.variants = vec![Variant::SgldEm];
    let em = run_experiment(&cfg, None).unwrap();
    cfg.variants = vec![Variant::SgldSa];
    cfg.sa_step = Schedule::constant(1.0);
    let sa = run_experiment(&cfg, None).unwrap();
    for (a, b) in em.outputs().zip(sa.outputs()) {
        assert_eq!(a.records, b.records);
        assert_eq!(a.posterior_mean, b.posterior_mean);
        assert_eq!(a.test, b.test);
        assert_eq!(a.final_sigma, b.final_sigma);
    }
}

#[test]
fn selection_threshold_above_every_coefficient_selects_nothing() {
    let mut cfg = small_linear();
    cfg.variants = vec![Variant::SgldSa];
    cfg.seeds = vec![5];
    let res = run_experiment(&cfg, None).unwrap();
    let out = res.outputs().next().unwrap();
    let top = out.posterior_mean.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let latent = {
        let data = res.dataset(5).unwrap();
        let model = Model::Linear { dim: cfg.sim.p };
        let prior = cfg.prior.with_v0(out.key.v0);
        let chain = ssgl_harness::experiment::chain_config(&cfg, &out.key);
        run_chain(&model, &data.train, &prior, &chain, &mut stream_rng(5, chain_stream(0))).unwrap().final_latent
    };
    let none = selection_report(&out.posterior_mean, &latent, top * 1.01).unwrap();
    assert!(none.selected.is_empty());
    assert_eq!(none.rho_median_unselected.unwrap(), {
        let mut rho = latent.layers[0].rho.clone();
        rho.sort_by(f64::total_cmp);
        let n = rho.len();
        if n % 2 == 1 { rho[n / 2] } else { 0.5 * (rho[n / 2 - 1] + rho[n / 2]) }
    });
    assert!(selection_report(&out.posterior_mean, &latent, 0.0).is_err());
}

#[test]
fn classification_metrics_include_accuracy() {
    let mut cfg = ExperimentConfig::logistic();
    cfg.sim.n = 60;
    cfg.sim.p = 40;
    cfg.sim.test_n = 30;
    cfg.iters = 1000;
    cfg.v0 = vec![0.01];
    cfg.sigma_init = vec![1.0];
    let res = run_experiment(&cfg, None).unwrap();
    for o in res.outputs() {
        let acc = o.test.accuracy.expect("classification accuracy");
        assert!((0.0..=1.0).contains(&acc));
        assert!(o.test_pred.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
