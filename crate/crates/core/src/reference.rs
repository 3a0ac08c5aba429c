//! Independent verifiers: exhaustive grid search and the phasor-alignment
//! check. Nothing here calls into the optimizer.

use num_complex::Complex64;
use std::f64::consts::TAU;

use crate::channel::{EffectiveGains, PhaseVector};
use crate::error::{invalid, Error, Result};
use crate::wrap_signed;

pub const DEFAULT_GRID_CAP: u128 = 10_000_000;

/// Uniform grid `{2πk/K : k = 0..K}` per element (0 included, 2π excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    points_per_dim: usize,
    cap: u128,
}

impl GridSpec {
    pub fn new(points_per_dim: usize) -> Result<Self> {
        Self::with_cap(points_per_dim, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(points_per_dim: usize, cap: u128) -> Result<Self> {
        if points_per_dim < 2 {
            return invalid(format!(
                "grid needs at least 2 points per dimension, got {points_per_dim}"
            ));
        }
        Ok(Self {
            points_per_dim,
            cap,
        })
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn cap(&self) -> u128 {
        self.cap
    }

    fn size(&self, n: usize) -> u128 {
        (self.points_per_dim as u128).saturating_pow(n as u32)
    }
}

/// Exhaustive maximum of `|Σ z_n e^{jϑ_n}|²` over the grid. Ties go to the
/// lexicographically smallest grid index.
pub fn brute_force_max(z: &EffectiveGains, grid: &GridSpec) -> Result<(f64, PhaseVector)> {
    let n = z.len();
    let requested = grid.size(n);
    if requested > grid.cap {
        return Err(Error::ResourceLimit {
            requested,
            cap: grid.cap,
        });
    }
    let k = grid.points_per_dim;
    let step = TAU / k as f64;
    // rotated[n][i] = z_n e^{j 2π i / K}
    let rotated: Vec<Vec<Complex64>> = z
        .iter()
        .map(|z| {
            (0..k)
                .map(|i| z * Complex64::cis(step * i as f64))
                .collect()
        })
        .collect();

    let mut index = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    let mut best_index = index.clone();
    loop {
        let s: Complex64 = index.iter().zip(&rotated).map(|(&i, row)| row[i]).sum();
        let p = s.norm_sqr();
        if p > best {
            best = p;
            best_index.copy_from_slice(&index);
        }
        // Odometer, last element fastest: visits indices in lexicographic order.
        let mut d = n;
        loop {
            if d == 0 {
                let phases = best_index.iter().map(|&i| step * i as f64).collect();
                return Ok((best, PhaseVector::new(phases)?));
            }
            d -= 1;
            index[d] += 1;
            if index[d] < k {
                break;
            }
            index[d] = 0;
        }
    }
}

/// True iff every phasor `z_n e^{jϑ_n}` has the same argument as the first
/// one, to within `tol` radians.
pub fn check_fixed_point_alignment(
    z: &EffectiveGains,
    theta: &PhaseVector,
    tol: f64,
) -> Result<bool> {
    if z.len() != theta.len() {
        return invalid(format!(
            "phase vector has {} entries, gains have {}",
            theta.len(),
            z.len()
        ));
    }
    if let Some(i) = z.iter().position(|z| z.norm_sqr() == 0.0) {
        return invalid(format!("gain {i} is zero; its phasor has no argument"));
    }
    let args: Vec<f64> = z
        .iter()
        .zip(theta.as_slice())
        .map(|(z, &t)| z.arg() + t)
        .collect();
    Ok(args.iter().all(|a| wrap_signed(a - args[0]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, optimal_phases, optimal_power_bound, received_power};
    use std::f64::consts::PI;

    #[test]
    fn grid_examples() {
        let z = EffectiveGains::from_real(&[1.0, 1.0]).unwrap();
        let (p, th) = brute_force_max(&z, &GridSpec::new(4).unwrap()).unwrap();
        assert_eq!(p, 4.0);
        assert_eq!(th.as_slice(), &[0.0, 0.0]);

        let (p, _) = brute_force_max(
            &EffectiveGains::from_real(&[1.0]).unwrap(),
            &GridSpec::new(8).unwrap(),
        )
        .unwrap();
        assert!((p - 1.0).abs() < 1e-15);

        // Residual misalignment on a K-point grid is at most π/K.
        let k = 256;
        let z =
            EffectiveGains::new(vec![Complex64::new(1.0, 0.0), Complex64::cis(PI / 7.0)]).unwrap();
        let (p, th) = brute_force_max(&z, &GridSpec::new(k).unwrap()).unwrap();
        let floor = (1.0 - (PI / k as f64).powi(2)) * 4.0;
        assert!(p >= floor && p <= 4.0, "{p}");
        assert_eq!(p, received_power(&z, &th).unwrap());
    }

    #[test]
    fn grid_validation_and_cap() {
        assert!(GridSpec::new(1).is_err());
        let z = generate_channels(8, 1).unwrap();
        assert!(matches!(
            brute_force_max(&z, &GridSpec::new(64).unwrap()),
            Err(Error::ResourceLimit { .. })
        ));
        let small = GridSpec::with_cap(4, 15).unwrap();
        assert!(brute_force_max(&generate_channels(2, 1).unwrap(), &small).is_err());
    }

    #[test]
    fn lexicographic_tie_break() {
        // Global phase invariance: every rotation of the optimum ties.
        let z = EffectiveGains::from_real(&[1.0, 1.0]).unwrap();
        let (_, th) = brute_force_max(&z, &GridSpec::new(16).unwrap()).unwrap();
        assert_eq!(th[0], 0.0);
    }

    #[test]
    fn sandwich_gap_shrinks() {
        for s in 0..10 {
            let z = generate_channels(2, 300 + s).unwrap();
            let bound = optimal_power_bound(&z);
            let mut last = f64::NEG_INFINITY;
            for k in [8, 32, 128] {
                let (p, _) = brute_force_max(&z, &GridSpec::new(k).unwrap()).unwrap();
                assert!(p <= bound * (1.0 + 1e-12));
                assert!(p >= last);
                last = p;
            }
        }
    }

    #[test]
    fn alignment_examples() {
        let z =
            EffectiveGains::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let th = PhaseVector::new(vec![0.0, 1.5 * PI]).unwrap();
        assert!(check_fixed_point_alignment(&z, &th, 1e-9).unwrap());

        let z = EffectiveGains::from_real(&[1.0, 1.0]).unwrap();
        let th = PhaseVector::new(vec![0.0, PI / 2.0]).unwrap();
        assert!(!check_fixed_point_alignment(&z, &th, 1e-3).unwrap());

        for s in 0..100 {
            let z = generate_channels(1 + (s as usize % 9), s).unwrap();
            let th = optimal_phases(&z, s as f64 * 0.37);
            assert!(check_fixed_point_alignment(&z, &th, 1e-9).unwrap());
        }
    }

    #[test]
    fn alignment_across_seam() {
        // Arguments just either side of ±π are aligned.
        let z = EffectiveGains::new(vec![
            Complex64::cis(PI - 1e-12),
            Complex64::cis(-PI + 1e-12),
        ])
        .unwrap();
        assert!(check_fixed_point_alignment(&z, &PhaseVector::zeros(2), 1e-9).unwrap());
    }

    #[test]
    fn alignment_rejects_zero_gain() {
        let z = EffectiveGains::from_real(&[1.0, 0.0]).unwrap();
        assert!(check_fixed_point_alignment(&z, &PhaseVector::zeros(2), 1e-6).is_err());
        assert!(check_fixed_point_alignment(&z, &PhaseVector::zeros(1), 1e-6).is_err());
    }
}
