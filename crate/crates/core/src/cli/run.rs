use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::CliError;
use crate::measurement::SnrReference;
use crate::sim::{run_experiment, sweeps_to_measurements, ExperimentConfig, ExperimentResults};

/// What the run did, written next to the CSVs as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub started: String,
    pub finished: String,
    /// Fully resolved config, defaults included. Feeding it back to `run`
    /// reproduces the CSVs.
    pub config: ExperimentConfig,
    pub normalization: String,
    pub noise_model: String,
    pub seed_splitting: String,
    pub outputs: OutputPaths,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub curve: String,
    pub cdf: String,
    pub manifest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithms: Vec<AlgorithmSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    /// Mean normalized power after one full pass over the elements.
    pub first_sweep_mean_normalized_power: Option<f64>,
    pub final_measurements: u64,
    pub final_mean_normalized_power: f64,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(format!("invalid config: {}", e.inner()))
        } else {
            CliError::Config(format!("invalid config field `{path}`: {}", e.inner()))
        }
    })?;
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// Reads and validates a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        None => Ok(ExperimentConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", p.display())))?;
            parse_config(&text)
        }
    }
}

/// 17 significant digits: parses back to the same double.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `curve.csv` and `cdf.csv` into `out_dir`.
pub fn write_outputs(results: &ExperimentResults, out_dir: &Path) -> Result<(), CliError> {
    let curve_path = out_dir.join("curve.csv");
    let mut w = csv::Writer::from_path(&curve_path).map_err(csv_err(&curve_path))?;
    w.write_record([
        "measurements",
        "mean_normalized_power",
        "std_error",
        "algorithm",
    ])
    .map_err(csv_err(&curve_path))?;
    for series in &results.curves {
        for p in &series.curve.points {
            w.write_record([
                p.measurements.to_string(),
                fmt_f64(p.mean_normalized_power),
                fmt_f64(p.std_error),
                series.algorithm.label().to_string(),
            ])
            .map_err(csv_err(&curve_path))?;
        }
    }
    w.flush().map_err(io_err(&curve_path))?;

    let cdf_path = out_dir.join("cdf.csv");
    let mut w = csv::Writer::from_path(&cdf_path).map_err(csv_err(&cdf_path))?;
    w.write_record([
        "normalized_power",
        "cumulative_probability",
        "algorithm",
        "sweeps",
    ])
    .map_err(csv_err(&cdf_path))?;
    for series in &results.cdfs {
        for p in &series.table.points {
            w.write_record([
                fmt_f64(p.normalized_power),
                fmt_f64(p.cumulative_probability),
                series.algorithm.label().to_string(),
                series.sweeps.to_string(),
            ])
            .map_err(csv_err(&cdf_path))?;
        }
    }
    w.flush().map_err(io_err(&cdf_path))?;
    Ok(())
}

fn summarize(results: &ExperimentResults) -> RunSummary {
    let n = results.config.n_elements as u64;
    let algorithms = results
        .curves
        .iter()
        .map(|series| {
            let last = series.curve.points.last().expect("curves are nonempty");
            let first_sweep = sweeps_to_measurements(series.algorithm, n, 1);
            let first_sweep_mean = (last.measurements >= first_sweep)
                .then(|| series.curve.mean_at(first_sweep))
                .flatten();
            AlgorithmSummary {
                algorithm: series.algorithm.label().to_string(),
                first_sweep_mean_normalized_power: first_sweep_mean,
                final_measurements: last.measurements,
                final_mean_normalized_power: last.mean_normalized_power,
            }
        })
        .collect();
    RunSummary { algorithms }
}

fn noise_description(config: &ExperimentConfig) -> String {
    match config.snr_db {
        None => "noiseless".to_string(),
        Some(snr) => {
            let reference = match config.snr_reference {
                SnrReference::TotalEnergy => "sum_n |z_n|^2",
                SnrReference::PerElement => "sum_n |z_n|^2 / N",
            };
            format!(
                "AWGN on the combined signal before square-law detection, fresh per reading; \
                 sigma^2 = ({reference}) / 10^(snr_db/10), snr_db = {snr}"
            )
        }
    }
}

/// Loads the config, runs the experiment and writes all outputs.
pub fn cmd_run(
    config_path: Option<&Path>,
    out_dir: &Path,
    snr_override: Option<f64>,
) -> Result<RunManifest, CliError> {
    let started = chrono::Utc::now().to_rfc3339();
    let mut config = load_config(config_path)?;
    if let Some(snr) = snr_override {
        config.snr_db = Some(snr);
        config
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let results = run_experiment(&config)?;
    write_outputs(&results, out_dir)?;

    let manifest_path = out_dir.join("manifest.json");
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        normalization: "achieved power divided by the full-CSI optimum (sum_n |z_n|)^2".to_string(),
        noise_model: noise_description(&config),
        seed_splitting: "per-stream seed = splitmix64(trial_seed(master_seed, trial_index) ^ tag); ChaCha8 streams for channel, init, noise, proposals".to_string(),
        outputs: OutputPaths {
            curve: out_dir.join("curve.csv").display().to_string(),
            cdf: out_dir.join("cdf.csv").display().to_string(),
            manifest: manifest_path.display().to_string(),
        },
        summary: summarize(&results),
        config,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_offending_field() {
        let e = parse_config(r#"{"n_elements": 0}"#).unwrap_err();
        assert!(e.to_string().contains("n_elements"), "{e}");
        let e = parse_config(r#"{"trials": -3}"#).unwrap_err();
        assert!(e.to_string().contains("trials"), "{e}");
        let e = parse_config(r#"{"n_elemnts": 4}"#).unwrap_err();
        assert!(e.to_string().contains("n_elemnts"), "{e}");
        let e = parse_config(r#"{"algorithm": "annealing"}"#).unwrap_err();
        assert!(e.to_string().contains("algorithm"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn parse_fills_defaults() {
        let c =
            parse_config(r#"{"trials": 7, "snr_db": 10, "algorithm": "random_baseline"}"#).unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.snr_db, Some(10.0));
        assert_eq!(c.n_elements, 100);
        assert_eq!(parse_config("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 0.9999999999999999, 1e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }
}
