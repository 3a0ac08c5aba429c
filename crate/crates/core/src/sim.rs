//! Seeded Monte-Carlo experiments: fresh `CN(0, 1)` gains per trial, the
//! sequential algorithm and/or the random baseline run against the same
//! gains, powers normalized by the full-CSI optimum `(Σ|z_n|)²`.
//!
//! Every trial draws its randomness from [`crate::seed`] streams keyed by
//! `(master_seed, trial_index)`, so results do not depend on how trials are
//! scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::channel::{generate_channels, optimal_power_bound, PhaseVector};
use crate::error::{invalid, Result};
use crate::measurement::{make_noisy_oracle_with, MeasurementOracle, SnrReference};
use crate::optimizer::{
    run_random_baseline_from, run_sequential_with, AngleTriple, ClosedForm, ElementSolver,
    OptimizationTrace, OrderPolicy,
};
use crate::seed::{rng_phases, stream_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmChoice {
    Sequential,
    RandomBaseline,
    Both,
}

impl AlgorithmChoice {
    fn runs_sequential(self) -> bool {
        matches!(self, Self::Sequential | Self::Both)
    }

    fn runs_baseline(self) -> bool {
        matches!(self, Self::RandomBaseline | Self::Both)
    }
}

/// Which algorithm produced a curve or CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Sequential,
    RandomBaseline,
}

impl Algorithm {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sequential => "sequential",
            Self::RandomBaseline => "random_baseline",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    Zeros,
    UniformRandom,
}

/// Experiment definition. Every field has a default; see [`Default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_elements: usize,
    pub sweeps: u32,
    pub trials: usize,
    pub algorithm: AlgorithmChoice,
    /// Absent means noiseless measurements.
    pub snr_db: Option<f64>,
    /// Signal power the SNR refers to.
    pub snr_reference: SnrReference,
    pub master_seed: u64,
    pub baseline_steps: u32,
    pub init_policy: InitPolicy,
    pub angle_triple: [f64; 3],
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_elements: 100,
            sweeps: 5,
            trials: 1000,
            algorithm: AlgorithmChoice::Both,
            snr_db: None,
            snr_reference: SnrReference::PerElement,
            master_seed: 2023,
            baseline_steps: 3000,
            init_policy: InitPolicy::Zeros,
            angle_triple: [0.0, FRAC_PI_2, PI],
        }
    }
}

/// A config field that failed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let positive = |field: &'static str, value: u64| {
            if value == 0 {
                Err(ConfigError {
                    field,
                    message: "must be at least 1".into(),
                })
            } else {
                Ok(())
            }
        };
        positive("n_elements", self.n_elements as u64)?;
        positive("sweeps", self.sweeps as u64)?;
        positive("trials", self.trials as u64)?;
        positive("baseline_steps", self.baseline_steps as u64)?;
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(ConfigError {
                    field: "snr_db",
                    message: format!("must be finite, got {snr}"),
                });
            }
        }
        self.solver().map(|_| ()).map_err(|e| ConfigError {
            field: "angle_triple",
            message: e.to_string(),
        })
    }

    /// The per-element solver: the closed form for `(0, π/2, π)`, the
    /// general 3×3 inversion otherwise.
    pub fn solver(&self) -> Result<Box<dyn ElementSolver>> {
        let [a, b, c] = self.angle_triple;
        if self.angle_triple == [0.0, FRAC_PI_2, PI] {
            return Ok(Box::new(ClosedForm));
        }
        Ok(Box::new(AngleTriple::new(a, b, c)?))
    }
}

/// Traces of one trial, powers divided by the trial's optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial_index: usize,
    /// `(Σ|z_n|)²` of this trial's gains.
    pub optimum: f64,
    pub sequential: Option<OptimizationTrace>,
    pub baseline: Option<OptimizationTrace>,
}

fn normalize(mut trace: OptimizationTrace, optimum: f64) -> OptimizationTrace {
    if optimum > 0.0 {
        for s in &mut trace.samples {
            s.power /= optimum;
        }
    }
    trace
}

fn oracle_for(
    config: &ExperimentConfig,
    gains: crate::channel::EffectiveGains,
    trial: u64,
    stream: Stream,
) -> Result<MeasurementOracle> {
    match config.snr_db {
        None => Ok(MeasurementOracle::noiseless(gains)),
        Some(snr) => make_noisy_oracle_with(
            gains,
            snr,
            config.snr_reference,
            stream_seed(config.master_seed, trial, stream),
        ),
    }
}

pub fn run_trial(config: &ExperimentConfig, trial_index: usize) -> Result<TrialOutcome> {
    if let Err(e) = config.validate() {
        return invalid(e.to_string());
    }
    if trial_index >= config.trials {
        return invalid(format!(
            "trial index {trial_index} out of range for {} trials",
            config.trials
        ));
    }
    let n = config.n_elements;
    let trial = trial_index as u64;
    let seed = |stream| stream_seed(config.master_seed, trial, stream);

    let gains = generate_channels(n, seed(Stream::Channel))?;
    let optimum = optimal_power_bound(&gains);
    let init = match config.init_policy {
        InitPolicy::Zeros => PhaseVector::zeros(n),
        InitPolicy::UniformRandom => PhaseVector::new(rng_phases(n, seed(Stream::Init)))?,
    };

    let sequential = if config.algorithm.runs_sequential() {
        let solver = config.solver()?;
        let mut oracle = oracle_for(config, gains.clone(), trial, Stream::SequentialNoise)?;
        let trace = run_sequential_with(
            &mut oracle,
            n,
            config.sweeps,
            &init,
            OrderPolicy::Ascending,
            solver.as_ref(),
        )?;
        Some(normalize(trace, optimum))
    } else {
        None
    };

    let baseline = if config.algorithm.runs_baseline() {
        let mut oracle = oracle_for(config, gains, trial, Stream::BaselineNoise)?;
        let trace = run_random_baseline_from(
            &mut oracle,
            &init,
            config.baseline_steps,
            seed(Stream::BaselineProposals),
        )?;
        Some(normalize(trace, optimum))
    } else {
        None
    };

    Ok(TrialOutcome {
        trial_index,
        optimum,
        sequential,
        baseline,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub measurements: u64,
    pub mean_normalized_power: f64,
    pub std_error: f64,
}

/// Mean normalized power versus measurement count, across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateCurve {
    pub points: Vec<CurvePoint>,
}

impl AggregateCurve {
    /// Mean at the last point with `measurements ≤ at`.
    pub fn mean_at(&self, at: u64) -> Option<f64> {
        self.points
            .iter()
            .take_while(|p| p.measurements <= at)
            .last()
            .map(|p| p.mean_normalized_power)
    }

    /// First measurement count whose mean reaches `level`.
    pub fn first_reaching(&self, level: f64) -> Option<u64> {
        self.points
            .iter()
            .find(|p| p.mean_normalized_power >= level)
            .map(|p| p.measurements)
    }
}

/// Pointwise mean and standard error of the traces.
///
/// Traces sampled on different measurement grids are aligned on the union
/// grid by carrying each trace's last value forward (and its first value
/// backward, before its first sample).
pub fn aggregate_mean_curve(traces: &[OptimizationTrace]) -> Result<AggregateCurve> {
    if traces.is_empty() {
        return invalid("cannot aggregate zero traces");
    }
    if let Some(i) = traces.iter().position(|t| t.samples.is_empty()) {
        return invalid(format!("trace {i} has no samples"));
    }
    let first: Vec<u64> = traces[0].samples.iter().map(|s| s.measurements).collect();
    let shared = traces.iter().all(|t| {
        t.samples.len() == first.len()
            && t.samples
                .iter()
                .zip(&first)
                .all(|(s, &m)| s.measurements == m)
    });
    let grid = if shared {
        first
    } else {
        let mut g: Vec<u64> = traces
            .iter()
            .flat_map(|t| t.samples.iter().map(|s| s.measurements))
            .collect();
        g.sort_unstable();
        g.dedup();
        g
    };

    let mut cursors = vec![0usize; traces.len()];
    let count = traces.len() as f64;
    let points = grid
        .iter()
        .map(|&m| {
            let values: Vec<f64> = traces
                .iter()
                .zip(cursors.iter_mut())
                .map(|(t, c)| {
                    while *c + 1 < t.samples.len() && t.samples[*c + 1].measurements <= m {
                        *c += 1;
                    }
                    t.samples[*c].power
                })
                .collect();
            let mean = values.iter().sum::<f64>() / count;
            let std_error = if traces.len() > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
                (var / count).sqrt()
            } else {
                0.0
            };
            CurvePoint {
                measurements: m,
                mean_normalized_power: mean,
                std_error,
            }
        })
        .collect();
    Ok(AggregateCurve { points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub normalized_power: f64,
    pub cumulative_probability: f64,
}

/// Right-continuous empirical CDF, one point per distinct value.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub points: Vec<CdfPoint>,
}

impl CdfTable {
    /// `F(x)`: fraction of samples `≤ x`.
    pub fn probability_at(&self, x: f64) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.normalized_power <= x)
            .last()
            .map_or(0.0, |p| p.cumulative_probability)
    }

    /// Smallest sample value `x` with `F(x) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.points
            .iter()
            .find(|q| q.cumulative_probability >= p)
            .unwrap_or_else(|| self.points.last().expect("nonempty"))
            .normalized_power
    }
}

pub fn empirical_cdf(final_values: &[f64]) -> Result<CdfTable> {
    if final_values.is_empty() {
        return invalid("empirical CDF needs at least one value");
    }
    if final_values.iter().any(|v| v.is_nan()) {
        return invalid("empirical CDF values must not be NaN");
    }
    let mut sorted = final_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points: Vec<CdfPoint> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i + 1 < n && sorted[i + 1] == v {
            continue;
        }
        points.push(CdfPoint {
            normalized_power: v,
            cumulative_probability: (i + 1) as f64 / n as f64,
        });
    }
    Ok(CdfTable { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub algorithm: Algorithm,
    pub curve: AggregateCurve,
}

/// CDF of normalized power after `sweeps` full passes (`N` element updates
/// for the sequential method, `N` proposals for the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    pub algorithm: Algorithm,
    pub sweeps: u32,
    pub table: CdfTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutcome>,
    pub curves: Vec<CurveSeries>,
    pub cdfs: Vec<CdfSeries>,
}

impl ExperimentResults {
    pub fn curve(&self, algorithm: Algorithm) -> Option<&AggregateCurve> {
        self.curves
            .iter()
            .find(|c| c.algorithm == algorithm)
            .map(|c| &c.curve)
    }

    pub fn cdf(&self, algorithm: Algorithm, sweeps: u32) -> Option<&CdfTable> {
        self.cdfs
            .iter()
            .find(|c| c.algorithm == algorithm && c.sweeps == sweeps)
            .map(|c| &c.table)
    }

    /// Per-trial normalized power after `sweeps` passes.
    pub fn values_after_sweeps(&self, algorithm: Algorithm, sweeps: u32) -> Vec<f64> {
        let n = self.config.n_elements as u64;
        let at = sweeps_to_measurements(algorithm, n, sweeps);
        self.trials
            .iter()
            .filter_map(|t| match algorithm {
                Algorithm::Sequential => t.sequential.as_ref(),
                Algorithm::RandomBaseline => t.baseline.as_ref(),
            })
            .filter_map(|t| t.power_at(at))
            .collect()
    }
}

/// Measurements consumed after `sweeps` full passes.
pub fn sweeps_to_measurements(algorithm: Algorithm, n: u64, sweeps: u32) -> u64 {
    match algorithm {
        Algorithm::Sequential => 3 * n * sweeps as u64,
        // One initial reading, then one per proposal.
        Algorithm::RandomBaseline => 1 + n * sweeps as u64,
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    if let Err(e) = config.validate() {
        return invalid(e.to_string());
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;

    let mut results = ExperimentResults {
        config: config.clone(),
        trials,
        curves: Vec::new(),
        cdfs: Vec::new(),
    };
    let n = config.n_elements as u32;
    let mut series = Vec::new();
    if config.algorithm.runs_sequential() {
        series.push((Algorithm::Sequential, config.sweeps));
    }
    if config.algorithm.runs_baseline() {
        series.push((Algorithm::RandomBaseline, config.baseline_steps / n));
    }
    for (algorithm, passes) in series {
        let traces: Vec<OptimizationTrace> = results
            .trials
            .iter()
            .filter_map(|t| match algorithm {
                Algorithm::Sequential => t.sequential.clone(),
                Algorithm::RandomBaseline => t.baseline.clone(),
            })
            .collect();
        let curve = aggregate_mean_curve(&traces)?;
        results.curves.push(CurveSeries { algorithm, curve });
        for sweeps in 1..=passes {
            let table = empirical_cdf(&results.values_after_sweeps(algorithm, sweeps))?;
            results.cdfs.push(CdfSeries {
                algorithm,
                sweeps,
                table,
            });
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::TraceSample;

    fn trace(points: &[(u64, f64)]) -> OptimizationTrace {
        OptimizationTrace {
            samples: points
                .iter()
                .map(|&(measurements, power)| TraceSample {
                    measurements,
                    power,
                })
                .collect(),
            final_phases: PhaseVector::zeros(1),
            sweeps_completed: 1,
        }
    }

    fn small(n: usize, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            n_elements: n,
            trials,
            sweeps: 2,
            baseline_steps: 40,
            ..Default::default()
        }
    }

    #[test]
    fn aggregate_single_trace() {
        let t = trace(&[(0, 0.1), (3, 0.5), (6, 0.9)]);
        let c = aggregate_mean_curve(std::slice::from_ref(&t)).unwrap();
        assert_eq!(c.points.len(), 3);
        for (p, s) in c.points.iter().zip(&t.samples) {
            assert_eq!(p.measurements, s.measurements);
            assert_eq!(p.mean_normalized_power, s.power);
            assert_eq!(p.std_error, 0.0);
        }
    }

    #[test]
    fn aggregate_two_constants() {
        let c = aggregate_mean_curve(&[trace(&[(0, 0.4), (1, 0.4)]), trace(&[(0, 0.6), (1, 0.6)])])
            .unwrap();
        for p in &c.points {
            assert!((p.mean_normalized_power - 0.5).abs() < 1e-15);
            // sd = 0.1414.., se = sd / √2 = 0.1
            assert!((p.std_error - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_resamples_mismatched_grids() {
        let a = trace(&[(0, 0.0), (4, 1.0)]);
        let b = trace(&[(2, 0.5), (3, 0.7)]);
        let c = aggregate_mean_curve(&[a, b]).unwrap();
        let grid: Vec<u64> = c.points.iter().map(|p| p.measurements).collect();
        assert_eq!(grid, vec![0, 2, 3, 4]);
        let means: Vec<f64> = c.points.iter().map(|p| p.mean_normalized_power).collect();
        assert_eq!(means, vec![0.25, 0.25, 0.35, 0.85]);
        assert!(aggregate_mean_curve(&[]).is_err());
    }

    #[test]
    fn cdf_examples() {
        let t = empirical_cdf(&[0.5]).unwrap();
        assert_eq!(
            t.points,
            vec![CdfPoint {
                normalized_power: 0.5,
                cumulative_probability: 1.0
            }]
        );
        let t = empirical_cdf(&[0.4, 0.2]).unwrap();
        assert_eq!(
            t.points,
            vec![
                CdfPoint {
                    normalized_power: 0.2,
                    cumulative_probability: 0.5
                },
                CdfPoint {
                    normalized_power: 0.4,
                    cumulative_probability: 1.0
                },
            ]
        );
        let t = empirical_cdf(&[0.3, 0.1, 0.3, 0.2]).unwrap();
        assert_eq!(t.points.len(), 3);
        assert_eq!(t.probability_at(0.25), 0.5);
        assert_eq!(t.probability_at(0.05), 0.0);
        assert_eq!(t.quantile(0.5), 0.2);
        assert_eq!(t.quantile(0.51), 0.3);
        assert!(empirical_cdf(&[]).is_err());
        assert!(empirical_cdf(&[f64::NAN]).is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = ExperimentConfig::default();
        assert_eq!((c.n_elements, c.trials), (100, 1000));
        assert!(c.validate().is_ok());
        let bad = ExperimentConfig {
            n_elements: 0,
            ..c.clone()
        };
        assert_eq!(bad.validate().unwrap_err().field, "n_elements");
        let bad = ExperimentConfig {
            angle_triple: [0.0, 0.0, 1.0],
            ..c.clone()
        };
        assert_eq!(bad.validate().unwrap_err().field, "angle_triple");
        let bad = ExperimentConfig {
            snr_db: Some(f64::NAN),
            ..c
        };
        assert_eq!(bad.validate().unwrap_err().field, "snr_db");
    }

    #[test]
    fn single_element_trials_are_optimal() {
        let config = small(1, 3);
        for i in 0..3 {
            let t = run_trial(&config, i).unwrap();
            let seq = t.sequential.unwrap().final_power();
            let base = t.baseline.unwrap().final_power();
            assert!((seq - 1.0).abs() < 1e-12 && (base - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trials_are_deterministic() {
        let config = ExperimentConfig {
            snr_db: Some(10.0),
            init_policy: InitPolicy::UniformRandom,
            ..small(6, 4)
        };
        assert_eq!(
            run_trial(&config, 2).unwrap(),
            run_trial(&config, 2).unwrap()
        );
        assert_ne!(
            run_trial(&config, 1).unwrap(),
            run_trial(&config, 2).unwrap()
        );
        assert!(run_trial(&config, 4).is_err());
    }

    #[test]
    fn noiseless_normalized_powers_bounded() {
        let r = run_experiment(&small(8, 20)).unwrap();
        for t in &r.trials {
            for tr in [t.sequential.as_ref().unwrap(), t.baseline.as_ref().unwrap()] {
                assert!(tr
                    .samples
                    .iter()
                    .all(|s| (0.0..=1.0 + 1e-9).contains(&s.power)));
            }
        }
        let seq = r.curve(Algorithm::Sequential).unwrap();
        assert!(seq
            .points
            .windows(2)
            .all(|w| w[1].mean_normalized_power >= w[0].mean_normalized_power - 1e-12));
        assert_eq!(
            r.cdfs
                .iter()
                .filter(|c| c.algorithm == Algorithm::Sequential)
                .count(),
            2
        );
        assert_eq!(
            r.cdfs
                .iter()
                .filter(|c| c.algorithm == Algorithm::RandomBaseline)
                .count(),
            5
        );
        assert!(r
            .cdfs
            .iter()
            .all(|c| c.table.points.last().unwrap().cumulative_probability == 1.0));
    }

    #[test]
    fn general_triple_matches_closed_form_outcome() {
        let config = ExperimentConfig {
            algorithm: AlgorithmChoice::Sequential,
            angle_triple: [0.0, 2.0, 4.0],
            sweeps: 10,
            ..small(5, 3)
        };
        let r = run_experiment(&config).unwrap();
        for t in &r.trials {
            assert!((t.sequential.as_ref().unwrap().final_power() - 1.0).abs() < 1e-9);
        }
        assert!(r.curve(Algorithm::RandomBaseline).is_none());
    }

    #[test]
    fn sweep_measurement_counts() {
        assert_eq!(sweeps_to_measurements(Algorithm::Sequential, 100, 1), 300);
        assert_eq!(
            sweeps_to_measurements(Algorithm::RandomBaseline, 100, 10),
            1001
        );
    }
}
