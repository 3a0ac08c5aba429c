//! Effective channel gains and the received-power objective.
//!
//! With `N` surface elements, element `n` contributes the phasor
//! `z_n e^{jϑ_n}` where `z_n` folds together transmit power and every
//! channel coefficient on that path. The harvested power is
//! `|Σ_n z_n e^{jϑ_n}|²`, maximized when all phasors share one argument.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use std::ops::Index;

use crate::error::{invalid, Result};
use crate::seed::rng_from_seed;
use crate::wrap_phase;

/// A complex, dimensionless amplitude.
pub type ComplexGain = Complex64;

/// Per-element effective gains `z_1 … z_N`. Never empty, every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGains(Vec<ComplexGain>);

impl EffectiveGains {
    pub fn new(gains: Vec<ComplexGain>) -> Result<Self> {
        if gains.is_empty() {
            return invalid("effective gains must have at least one element");
        }
        if let Some(i) = gains
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return invalid(format!("gain {i} is not finite: {}", gains[i]));
        }
        Ok(Self(gains))
    }

    /// Builds gains from real values (imaginary parts zero).
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[ComplexGain] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ComplexGain> {
        self.0.iter()
    }

    /// `Σ_n |z_n|²`, the phase-independent total path energy.
    pub fn total_energy(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl Index<usize> for EffectiveGains {
    type Output = ComplexGain;

    fn index(&self, i: usize) -> &ComplexGain {
        &self.0[i]
    }
}

/// Adjustable phase shifts, each stored in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    /// Wraps every entry into `[0, 2π)`. Rejects non-finite angles.
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return invalid(format!("phase {i} is not finite"));
        }
        Ok(Self(phases.into_iter().map(wrap_phase).collect()))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Adds `delta` to element `index`, re-wrapping it.
    pub fn shift(&mut self, index: usize, delta: f64) {
        self.0[index] = wrap_phase(self.0[index] + delta);
    }

    /// Copy with element `index` shifted by `delta`.
    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.shift(index, delta);
        out
    }

    pub fn set(&mut self, index: usize, phase: f64) {
        self.0[index] = wrap_phase(phase);
    }
}

impl Index<usize> for PhaseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Energy-harvesting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarvestingMode {
    /// The surface harvests at its own elements: `z_n = P_t h_n`.
    Direct,
    /// A co-located device harvests the reflected energy: `z_n = P_t h_n g_n`.
    Indirect,
}

/// Draws `n` i.i.d. circularly-symmetric complex Gaussian gains `CN(0, 1)`.
pub fn generate_channels(n: usize, seed: u64) -> Result<EffectiveGains> {
    if n == 0 {
        return invalid("number of elements must be at least 1");
    }
    let mut rng = rng_from_seed(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let gains = (0..n)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    EffectiveGains::new(gains)
}

pub fn compose_effective_gains(
    mode: HarvestingMode,
    p_t: f64,
    h: &EffectiveGains,
    g: Option<&EffectiveGains>,
) -> Result<EffectiveGains> {
    if !(p_t.is_finite() && p_t > 0.0) {
        return invalid(format!(
            "transmit power must be positive and finite, got {p_t}"
        ));
    }
    match mode {
        HarvestingMode::Direct => EffectiveGains::new(h.iter().map(|h| h * p_t).collect()),
        HarvestingMode::Indirect => {
            let Some(g) = g else {
                return invalid("indirect harvesting requires the g channel vector");
            };
            if g.len() != h.len() {
                return invalid(format!("g has {} entries but h has {}", g.len(), h.len()));
            }
            EffectiveGains::new(h.iter().zip(g.iter()).map(|(h, g)| h * g * p_t).collect())
        }
    }
}

/// `Σ_n z_n e^{jϑ_n}`. Callers check lengths.
fn combined_signal(z: &[ComplexGain], theta: &[f64]) -> Complex64 {
    z.iter()
        .zip(theta)
        .map(|(z, &t)| z * Complex64::cis(t))
        .sum()
}

/// `|Σ_n z_n e^{jϑ_n}|²`.
pub fn received_power(z: &EffectiveGains, theta: &PhaseVector) -> Result<f64> {
    if z.len() != theta.len() {
        return invalid(format!(
            "phase vector has {} entries, gains have {}",
            theta.len(),
            z.len()
        ));
    }
    Ok(combined_signal(z.as_slice(), theta.as_slice()).norm_sqr())
}

/// Full-CSI optimum `(Σ_n |z_n|)²`.
pub fn optimal_power_bound(z: &EffectiveGains) -> f64 {
    let amplitude: f64 = z.iter().map(|z| z.norm()).sum();
    amplitude * amplitude
}

/// Phases `ϑ_n = ϑ₀ − Arg(z_n)` that align every phasor at angle `ϑ₀`.
/// Zero-gain elements get phase 0.
pub fn optimal_phases(z: &EffectiveGains, theta0: f64) -> PhaseVector {
    PhaseVector(
        z.iter()
            .map(|z| {
                if *z == Complex64::new(0.0, 0.0) {
                    0.0
                } else {
                    wrap_phase(theta0 - z.arg())
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gains(v: Vec<Complex64>) -> EffectiveGains {
        EffectiveGains::new(v).unwrap()
    }

    fn phases(v: Vec<f64>) -> PhaseVector {
        PhaseVector::new(v).unwrap()
    }

    #[test]
    fn generate_channels_moments() {
        // 10^5 draws in total; E|z|² = 1 for CN(0,1).
        let z = generate_channels(100_000, 11).unwrap();
        let mean = z.total_energy() / z.len() as f64;
        assert!((0.99..=1.01).contains(&mean), "mean |z|² = {mean}");
        let re_var = z.iter().map(|z| z.re * z.re).sum::<f64>() / z.len() as f64;
        assert!((re_var - 0.5).abs() < 0.01, "Var re = {re_var}");
        assert_eq!(generate_channels(100, 3).unwrap().len(), 100);
    }

    #[test]
    fn generate_channels_deterministic_and_validated() {
        assert_eq!(
            generate_channels(1, 42).unwrap(),
            generate_channels(1, 42).unwrap()
        );
        assert_ne!(
            generate_channels(4, 42).unwrap(),
            generate_channels(4, 43).unwrap()
        );
        assert!(generate_channels(0, 42).is_err());
    }

    #[test]
    fn compose_gains() {
        let h = gains(vec![c(1.0, 0.0)]);
        let z = compose_effective_gains(HarvestingMode::Direct, 2.0, &h, None).unwrap();
        assert_eq!(z.as_slice(), &[c(2.0, 0.0)]);

        let j = gains(vec![c(0.0, 1.0)]);
        let z = compose_effective_gains(HarvestingMode::Indirect, 1.0, &j, Some(&j)).unwrap();
        assert_eq!(z.as_slice(), &[c(-1.0, 0.0)]);

        let h2 = EffectiveGains::from_real(&[1.0, 1.0]).unwrap();
        let g1 = EffectiveGains::from_real(&[1.0]).unwrap();
        assert!(compose_effective_gains(HarvestingMode::Indirect, 1.0, &h2, Some(&g1)).is_err());
        assert!(compose_effective_gains(HarvestingMode::Indirect, 1.0, &h2, None).is_err());
        assert!(compose_effective_gains(HarvestingMode::Direct, 0.0, &h2, None).is_err());
    }

    #[test]
    fn received_power_examples() {
        let p = received_power(&gains(vec![c(1.0, 0.0)]), &phases(vec![0.0])).unwrap();
        assert_eq!(p, 1.0);
        let p = received_power(
            &EffectiveGains::from_real(&[1.0, 1.0]).unwrap(),
            &phases(vec![0.0, PI]),
        )
        .unwrap();
        assert!(p < 1e-30);
        let p = received_power(
            &gains(vec![c(1.0, 0.0), c(0.0, 1.0)]),
            &phases(vec![0.0, 1.5 * PI]),
        )
        .unwrap();
        assert!((p - 4.0).abs() < 1e-12);
        assert!(received_power(&gains(vec![c(1.0, 0.0)]), &phases(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(
            optimal_power_bound(&EffectiveGains::from_real(&[1.0, 1.0, 1.0]).unwrap()),
            9.0
        );
        assert_eq!(optimal_power_bound(&gains(vec![c(3.0, 4.0)])), 25.0);
        let z = gains(vec![c(1.0, 0.0), Complex64::from_polar(2.0, FRAC_PI_3)]);
        assert!((optimal_power_bound(&z) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn optimal_phase_examples() {
        let th = optimal_phases(&gains(vec![Complex64::from_polar(1.0, FRAC_PI_4)]), 0.0);
        assert!((th[0] - 7.0 * FRAC_PI_4).abs() < 1e-12);

        let z = gains(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let th = optimal_phases(&z, 0.0);
        assert_eq!(th[0], 0.0);
        assert!((th[1] - 1.5 * PI).abs() < 1e-12);
        assert!((received_power(&z, &th).unwrap() - 4.0).abs() < 1e-12);

        let z = EffectiveGains::from_real(&[1.0, 1.0]).unwrap();
        let th = optimal_phases(&z, PI);
        assert_eq!(th.as_slice(), &[PI, PI]);
        assert!((received_power(&z, &th).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gain_gets_phase_zero() {
        let z = gains(vec![c(0.0, 0.0), c(0.0, 1.0)]);
        let th = optimal_phases(&z, 1.0);
        assert_eq!(th[0], 0.0);
        assert!((received_power(&z, &th).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(EffectiveGains::new(vec![c(f64::NAN, 0.0)]).is_err());
        assert!(EffectiveGains::new(vec![]).is_err());
        assert!(PhaseVector::new(vec![f64::INFINITY]).is_err());
    }

    fn gain_vec() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..12)
    }

    fn to_gains(v: &[(f64, f64)]) -> EffectiveGains {
        gains(v.iter().map(|&(re, im)| c(re, im)).collect())
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    proptest! {
        #[test]
        fn power_bounded_and_nonnegative(v in gain_vec(), seed in any::<u64>()) {
            let z = to_gains(&v);
            let th = phases(crate::seed::rng_phases(z.len(), seed));
            let p = received_power(&z, &th).unwrap();
            prop_assert!(p >= 0.0);
            prop_assert!(p <= optimal_power_bound(&z) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn global_phase_invariance(v in gain_vec(), seed in any::<u64>(), shift in -10.0f64..10.0) {
            let z = to_gains(&v);
            let raw = crate::seed::rng_phases(z.len(), seed);
            let p0 = received_power(&z, &phases(raw.clone())).unwrap();
            let p1 = received_power(&z, &phases(raw.iter().map(|t| t + shift).collect())).unwrap();
            // Absolute slack near total cancellation, where relative error is meaningless.
            prop_assert!(rel_close(p0, p1, 1e-12) || (p0 - p1).abs() < 1e-12 * optimal_power_bound(&z));
        }

        #[test]
        fn optimum_attained(v in gain_vec(), theta0 in -10.0f64..10.0) {
            let z = to_gains(&v);
            let p = received_power(&z, &optimal_phases(&z, theta0)).unwrap();
            prop_assert!(rel_close(p, optimal_power_bound(&z), 1e-12));
        }

        #[test]
        fn power_scales_quadratically(v in gain_vec(), seed in any::<u64>(), alpha in 0.01f64..100.0) {
            let z = to_gains(&v);
            let scaled = gains(z.iter().map(|z| z * alpha).collect());
            let th = phases(crate::seed::rng_phases(z.len(), seed));
            let p = received_power(&z, &th).unwrap();
            let ps = received_power(&scaled, &th).unwrap();
            prop_assert!(rel_close(ps, alpha * alpha * p, 1e-12) || (ps - alpha * alpha * p).abs() < 1e-12 * optimal_power_bound(&scaled));
        }
    }
}
