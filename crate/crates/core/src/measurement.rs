//! The power-meter oracle.
//!
//! The optimizer only ever sees scalar readings from a [`MeasurementOracle`].
//! The hidden gains stay inside it. Noisy readings model a square-law
//! detector after additive circularly-symmetric Gaussian noise on the
//! combined signal: `y = |Σ z_n e^{jϑ_n} + w|²`, `w ~ CN(0, σ²)`.
//!
//! The SNR is phase-configuration independent. Its signal reference is
//! selected by [`SnrReference`]: the total path energy `Σ|z_n|²`, or the
//! mean per-element energy `Σ|z_n|² / N` (for unit-variance channels this is
//! the usual transmit SNR `P/σ²`).

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{EffectiveGains, PhaseVector};
use crate::error::{invalid, Result};
use crate::seed::rng_from_seed;

/// Signal power that the SNR is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// `σ² = Σ_n |z_n|² / 10^{snr_db/10}`.
    TotalEnergy,
    /// `σ² = (Σ_n |z_n|² / N) / 10^{snr_db/10}`.
    #[default]
    PerElement,
}

impl SnrReference {
    pub fn signal_power(self, z: &EffectiveGains) -> f64 {
        match self {
            Self::TotalEnergy => z.total_energy(),
            Self::PerElement => z.total_energy() / z.len() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Noiseless,
    AwgnOnSignal {
        snr_db: f64,
        reference: SnrReference,
        seed: u64,
    },
}

/// One reading, as returned by [`MeasurementOracle::measure_record`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// Oracle count right after this reading (1-based).
    pub index: u64,
    pub phases: PhaseVector,
    pub reading: f64,
}

#[derive(Debug, Clone)]
pub struct MeasurementOracle {
    gains: EffectiveGains,
    noise_model: NoiseModel,
    noise_variance: f64,
    rng: Option<ChaCha8Rng>,
    count: u64,
    /// Phases of the last reading and the matching `z_n e^{jϑ_n}`.
    /// Only entries whose phase changed are recomputed.
    cached_phases: Vec<f64>,
    cached_phasors: Vec<Complex64>,
}

impl MeasurementOracle {
    pub fn noiseless(gains: EffectiveGains) -> Self {
        Self::build(gains, NoiseModel::Noiseless, 0.0, None)
    }

    fn build(
        gains: EffectiveGains,
        noise_model: NoiseModel,
        noise_variance: f64,
        rng: Option<ChaCha8Rng>,
    ) -> Self {
        let n = gains.len();
        Self {
            gains,
            noise_model,
            noise_variance,
            rng,
            count: 0,
            cached_phases: vec![f64::NAN; n],
            cached_phasors: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn with_noise(gains: EffectiveGains, noise_model: NoiseModel) -> Result<Self> {
        match noise_model {
            NoiseModel::Noiseless => Ok(Self::noiseless(gains)),
            NoiseModel::AwgnOnSignal {
                snr_db,
                reference,
                seed,
            } => make_noisy_oracle_with(gains, snr_db, reference, seed),
        }
    }

    /// Number of elements the oracle expects in a phase vector.
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Readings taken so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.noise_model
    }

    /// `σ²` of the additive signal noise (0 when noiseless).
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Takes one power reading at `theta`.
    pub fn measure(&mut self, theta: &PhaseVector) -> Result<f64> {
        self.check_len(theta)?;
        let mut signal = self.refresh_cache(theta);
        if let Some(rng) = self.rng.as_mut() {
            if self.noise_variance > 0.0 {
                let scale = (self.noise_variance / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                signal += Complex64::new(re * scale, im * scale);
            }
        }
        self.count += 1;
        Ok(signal.norm_sqr())
    }

    pub fn measure_record(&mut self, theta: &PhaseVector) -> Result<MeasurementRecord> {
        let reading = self.measure(theta)?;
        Ok(MeasurementRecord {
            index: self.count,
            phases: theta.clone(),
            reading,
        })
    }

    /// Noise-free objective at `theta`, without touching the counter.
    ///
    /// Only simulators can do this; optimizers must go through
    /// [`measure`](Self::measure). Traces use it to report achieved power.
    pub fn true_power(&self, theta: &PhaseVector) -> Result<f64> {
        self.check_len(theta)?;
        let signal: Complex64 = self
            .gains
            .iter()
            .zip(theta.as_slice())
            .zip(self.cached_phases.iter().zip(&self.cached_phasors))
            .map(|((z, &t), (&ct, &cz))| if t == ct { cz } else { z * Complex64::cis(t) })
            .sum();
        Ok(signal.norm_sqr())
    }

    /// Noise-free combined signal at `theta`, bit-identical to
    /// [`received_power`](crate::channel::received_power), reusing phasors whose phase is unchanged.
    fn refresh_cache(&mut self, theta: &PhaseVector) -> Complex64 {
        for (((z, &t), ct), cz) in self
            .gains
            .iter()
            .zip(theta.as_slice())
            .zip(self.cached_phases.iter_mut())
            .zip(self.cached_phasors.iter_mut())
        {
            if t != *ct {
                *ct = t;
                *cz = z * Complex64::cis(t);
            }
        }
        self.cached_phasors.iter().sum()
    }

    fn check_len(&self, theta: &PhaseVector) -> Result<()> {
        if theta.len() != self.gains.len() {
            return invalid(format!(
                "phase vector has {} entries, oracle expects {}",
                theta.len(),
                self.gains.len()
            ));
        }
        Ok(())
    }
}

/// Oracle with AWGN on the combined signal, `σ² = Σ|z_n|² / 10^{snr_db/10}`.
/// `snr_db = +∞` gives `σ² = 0`, identical to a noiseless oracle.
pub fn make_noisy_oracle(z: EffectiveGains, snr_db: f64, seed: u64) -> Result<MeasurementOracle> {
    make_noisy_oracle_with(z, snr_db, SnrReference::TotalEnergy, seed)
}

pub fn make_noisy_oracle_with(
    z: EffectiveGains,
    snr_db: f64,
    reference: SnrReference,
    seed: u64,
) -> Result<MeasurementOracle> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return invalid(format!("snr_db must be a number above -inf, got {snr_db}"));
    }
    let noise_variance = reference.signal_power(&z) / 10f64.powf(snr_db / 10.0);
    Ok(MeasurementOracle::build(
        z,
        NoiseModel::AwgnOnSignal {
            snr_db,
            reference,
            seed,
        },
        noise_variance,
        Some(rng_from_seed(seed)),
    ))
}
