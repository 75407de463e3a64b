//! Result files. Everything except `timing.csv` is a pure function of the
//! configuration and seed, so reruns produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::canonical_json;
use crate::error::Result;
use crate::experiment::{CellKey, CellOutput, ExperimentResult};
use crate::metrics::response;
use crate::svg::{render, Panel, PanelKind, Series};

/// Names of the files written by [`write_experiment`].
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const SELECTION_FILE: &str = "selection.json";
pub const FAILURES_FILE: &str = "failures.csv";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Serialize)]
struct Echo<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
}

/// Writes the effective configuration with the command and crate version.
pub fn write_config_echo<C: Serialize>(dir: &Path, command: &str, config: &C) -> Result<PathBuf> {
    let path = dir.join(CONFIG_FILE);
    let echo = Echo { command, version: env!("CARGO_PKG_VERSION"), config };
    fs::write(&path, canonical_json(&echo)?)?;
    Ok(path)
}

fn key_fields(k: &CellKey) -> [String; 4] {
    [k.variant.to_string(), k.v0.to_string(), k.sigma_init.to_string(), k.seed.to_string()]
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "v0", "sigma_init", "seed", "split", "mae", "mse", "accuracy"])?;
    for out in result.outputs() {
        for (split, m) in [("train", &out.train), ("test", &out.test)] {
            let mut row = key_fields(&out.key).to_vec();
            row.extend([split.to_string(), m.mae.to_string(), m.mse.to_string(), opt(m.accuracy)]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let layers = result.outputs().next().map_or(1, |o| o.final_deltas.len());
    let mut header: Vec<String> =
        ["variant", "v0", "sigma_init", "seed", "iteration"].iter().map(|s| s.to_string()).collect();
    header.extend(result.config.traced.iter().map(|i| format!("beta_{}", i + 1)));
    header.push("sigma".into());
    if layers == 1 {
        header.push("delta".into());
    } else {
        header.extend((0..layers).map(|l| format!("delta_{l}")));
    }
    w.write_record(&header)?;
    for out in result.outputs() {
        let key = key_fields(&out.key);
        for r in &out.records {
            let mut row = key.to_vec();
            row.push(r.iteration.to_string());
            row.extend(r.coords.iter().map(f64::to_string));
            row.push(r.sigma.to_string());
            row.extend(r.deltas.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "v0", "sigma_init", "seed", "split", "row", "y", "prediction"])?;
    for out in result.outputs() {
        let data = result.dataset(out.key.seed).expect("dataset for every seed");
        let key = key_fields(&out.key);
        for (split, set, pred) in [("train", &data.train, &out.train_pred), ("test", &data.test, &out.test_pred)] {
            for (i, (y, p)) in response(set).iter().zip(pred).enumerate() {
                let mut row = key.to_vec();
                row.extend([split.to_string(), i.to_string(), y.to_string(), p.to_string()]);
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SelectionEntry<'a> {
    #[serde(flatten)]
    key: &'a CellKey,
    #[serde(flatten)]
    report: &'a crate::metrics::SelectionReport,
    final_sigma: f64,
    final_deltas: &'a [f64],
}

pub fn write_selection(path: &Path, result: &ExperimentResult) -> Result<()> {
    let entries: Vec<SelectionEntry> = result
        .outputs()
        .map(|o| SelectionEntry { key: &o.key, report: &o.selection, final_sigma: o.final_sigma, final_deltas: &o.final_deltas })
        .collect();
    fs::write(path, canonical_json(&entries)?)?;
    Ok(())
}

pub fn write_failures(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "v0", "sigma_init", "seed", "message"])?;
    for f in result.failures() {
        let mut row = key_fields(&f.key).to_vec();
        row.push(f.message.clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock seconds per chain; kept apart from the deterministic files.
pub fn write_timing(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "v0", "sigma_init", "seed", "seconds"])?;
    for out in result.outputs() {
        let mut row = key_fields(&out.key).to_vec();
        row.push(format!("{:.3}", out.elapsed.as_secs_f64()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One SVG per (v0, initial sigma, seed): traces of each traced coordinate
/// for every variant, and posterior mean against the truth.
pub fn write_plots(dir: &Path, result: &ExperimentResult) -> Result<Vec<PathBuf>> {
    let cfg = &result.config;
    let mut written = Vec::new();
    for &v0 in &cfg.v0 {
        for &sigma in &cfg.sigma_init {
            for &seed in &cfg.seeds {
                let cells: Vec<&CellOutput> = result
                    .outputs()
                    .filter(|o| o.key.v0 == v0 && o.key.sigma_init == sigma && o.key.seed == seed)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let truth = &result.dataset(seed).expect("dataset for every seed").true_beta;
                let mut panels: Vec<Panel> = cfg
                    .traced
                    .iter()
                    .enumerate()
                    .map(|(t, &coord)| Panel {
                        title: format!("beta_{}", coord + 1),
                        kind: PanelKind::Lines,
                        series: cells
                            .iter()
                            .map(|o| Series {
                                label: o.key.variant.to_string(),
                                points: o.records.iter().map(|r| (r.iteration as f64, r.coords[t])).collect(),
                            })
                            .collect(),
                        reference: Some(truth[coord]),
                        diagonal: false,
                    })
                    .collect();
                panels.push(Panel {
                    title: "posterior mean vs truth".into(),
                    kind: PanelKind::Scatter,
                    series: cells
                        .iter()
                        .map(|o| Series {
                            label: o.key.variant.to_string(),
                            points: truth.iter().copied().zip(o.posterior_mean.iter().copied()).collect(),
                        })
                        .collect(),
                    reference: None,
                    diagonal: true,
                });
                let title = format!("v0 = {v0}, initial sigma = {sigma}, seed = {seed}");
                let path = dir.join(format!("traces_v0-{v0}_sigma-{sigma}_seed-{seed}.svg"));
                fs::write(&path, render(&title, &panels))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_experiment<C: Serialize>(dir: &Path, command: &str, echo: &C, result: &ExperimentResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_config_echo(dir, command, echo)?;
    write_metrics(&dir.join(METRICS_FILE), result)?;
    write_trace(&dir.join(TRACE_FILE), result)?;
    write_predictions(&dir.join(PREDICTIONS_FILE), result)?;
    write_selection(&dir.join(SELECTION_FILE), result)?;
    write_failures(&dir.join(FAILURES_FILE), result)?;
    write_timing(&dir.join(TIMING_FILE), result)?;
    write_plots(dir, result)?;
    Ok(())
}
