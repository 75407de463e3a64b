use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use ssgl::Variant;
use ssgl_harness::output::write_experiment;
use ssgl_harness::{run_experiment, run_uci, with_overrides, ExperimentConfig, HarnessError, OracleSuite, Result, UciConfig};

#[derive(Parser)]
#[command(name = "ssgl", version, about = "Adaptive empirical-Bayes sparse learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linear large-p-small-n simulation grid.
    SimulateLinear(Common),
    /// Logistic large-p-small-n simulation grid.
    SimulateLogistic(Common),
    /// One-hidden-layer network regression on a CSV file.
    Uci {
        /// Regression CSV, response in the last column (default: bundled synthetic set).
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Number of seeded train/test repeats.
        #[arg(long)]
        repeats: Option<u64>,
    },
    /// Run the numerical self-checks and print a pass/fail table.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        /// Run only these oracles (comma separated or repeated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON config; its values replace the defaults, flags replace both.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Chain length (epochs for `uci`).
    #[arg(long)]
    iters: Option<u64>,
    /// Comma-separated variant names, e.g. SGLD,SGLD-SA.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, env = "SSGL_THREADS")]
    threads: Option<usize>,
    /// Dotted-key override such as `sim.p=200`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Replaces values of `base` by those of `patch`, recursing into objects.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn load<C: Serialize + DeserializeOwned>(defaults: &C, common: &Common) -> Result<C> {
    let mut doc = serde_json::to_value(defaults)?;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut doc, file);
    }
    let merged: C = serde_json::from_value(doc).map_err(|e| HarnessError::Config(e.to_string()))?;
    with_overrides(&merged, &common.set)
}

fn parse_variants(names: &[String]) -> Result<Option<Vec<Variant>>> {
    if names.is_empty() {
        return Ok(None);
    }
    names
        .iter()
        .map(|n| Variant::parse(n).ok_or_else(|| HarnessError::Config(format!("unknown variant `{n}`"))))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn simulate(defaults: ExperimentConfig, command: &str, common: &Common) -> Result<()> {
    let mut cfg = load(&defaults, common)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(iters) = common.iters {
        cfg.iters = iters;
    }
    if let Some(v) = parse_variants(&common.variants)? {
        cfg.variants = v;
    }
    cfg.validate()?;
    let result = run_experiment(&cfg, common.threads)?;
    write_experiment(&common.out, command, &cfg, &result)?;
    println!("{:<10} {:>6} {:>6} {:>6} {:>12} {:>12}", "variant", "v0", "sigma", "seed", "test MAE", "test MSE");
    for cell in &result.cells {
        match cell {
            Ok(o) => println!(
                "{:<10} {:>6} {:>6} {:>6} {:>12.4} {:>12.4}",
                o.key.variant.to_string(),
                o.key.v0,
                o.key.sigma_init,
                o.key.seed,
                o.test.mae,
                o.test.mse
            ),
            Err(f) => println!(
                "{:<10} {:>6} {:>6} {:>6} failed: {}",
                f.key.variant.to_string(),
                f.key.v0,
                f.key.sigma_init,
                f.key.seed,
                f.message
            ),
        }
    }
    println!("results written to {}", common.out.display());
    result.check()
}

fn uci(csv: Option<PathBuf>, common: &Common, repeats: Option<u64>) -> Result<()> {
    let defaults = UciConfig::new(csv.clone().unwrap_or_else(ssgl_harness::bundled_csv));
    let mut cfg = load(&defaults, common)?;
    if let Some(path) = csv {
        cfg.csv = path;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(epochs) = common.iters {
        cfg.epochs = epochs;
    }
    if let Some(r) = repeats {
        cfg.repeats = r;
    }
    if let Some(v) = parse_variants(&common.variants)? {
        cfg.variants = v;
    }
    let result = run_uci(&cfg, common.threads)?;
    result.write(&common.out)?;
    println!(
        "{} train / {} test rows, {} repeats",
        result.train_rows, result.test_rows, cfg.repeats
    );
    println!("{:<14} {:>10} {:>10}", "arm", "RMSE", "sd");
    for s in &result.summary {
        println!("{:<14} {:>10.4} {:>10.4}", s.arm, s.rmse_mean, s.rmse_sd);
    }
    println!("results written to {}", common.out.display());
    result.check()
}

fn validate(seed: Option<u64>, only: &[String]) -> Result<bool> {
    let suite = OracleSuite { seed: seed.unwrap_or(0), ..OracleSuite::default() };
    let outcomes = suite.run(only)?;
    for o in &outcomes {
        println!("{:<9} {:<4} {:>7.2}s  {}", o.name, if o.passed { "pass" } else { "FAIL" }, o.seconds, o.detail);
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn ensure_parent(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(HarnessError::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::SimulateLinear(c) => ensure_parent(&c.out).and_then(|_| simulate(ExperimentConfig::linear(), "simulate-linear", c)),
        Command::SimulateLogistic(c) => {
            ensure_parent(&c.out).and_then(|_| simulate(ExperimentConfig::logistic(), "simulate-logistic", c))
        }
        Command::Uci { csv, common, repeats } => ensure_parent(&common.out).and_then(|_| uci(csv.clone(), common, *repeats)),
        Command::Validate { seed, only } => match validate(*seed, only) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
