//! Power-measurement-only phase alignment.
//!
//! Fixing every phase except element `n`, the objective is a sinusoid in
//! `ϑ_n`:
//!
//! ```text
//! f(ϑ_n + φ) = x1 + x2 cos φ + x3 sin φ
//! x1 = |w|² + |z|²,  x2 = 2 Re(w z*),  x3 = 2 Im(w z*)
//! ```
//!
//! where `z = z_n e^{jϑ_n}` and `w` is the sum of the other phasors. Three
//! readings at offsets `φ_1, φ_2, φ_3` determine `x` through a 3×3 linear
//! system, and the best offset is `Arg(x2 + j x3)`. Sweeping this update
//! over the elements never decreases the objective.

use rand::seq::SliceRandom;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::channel::PhaseVector;
use crate::error::{invalid, Error, Result};
use crate::measurement::{MeasurementOracle, MeasurementRecord};
use crate::seed::rng_from_seed;
use crate::wrap_phase;

/// Smallest `|det(A)|` accepted for a probe-angle triple.
pub const MIN_DETERMINANT: f64 = 1e-9;

/// Threshold below which the sinusoid amplitude `|(x2, x3)|` counts as zero.
fn degeneracy_threshold(y: [f64; 3]) -> f64 {
    1e-12 * y[0].max(y[1]).max(y[2]).max(1.0)
}

/// `Arg(re + j im)` in `[0, 2π)`, or 0 if the vector is numerically zero.
fn arg_or_zero(re: f64, im: f64, eps: f64) -> f64 {
    if re.hypot(im) <= eps {
        0.0
    } else {
        wrap_phase(im.atan2(re))
    }
}

/// Sinusoid coefficients `x = A⁻¹ y` recovered from three readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverCoefficients {
    /// `|w|² + |z|²`
    pub x1: f64,
    /// `2 Re(w z*)`
    pub x2: f64,
    /// `2 Im(w z*)`
    pub x3: f64,
}

impl SolverCoefficients {
    /// Checks `x1 ≥ 0` and `x1² ≥ x2² + x3²` up to `1e-6 · x1²`.
    /// Holds for any noiseless readings.
    pub fn is_consistent(&self) -> bool {
        let slack = 1e-6 * self.x1 * self.x1;
        self.x1 >= -1e-12 && self.x1 * self.x1 + slack >= self.x2 * self.x2 + self.x3 * self.x3
    }

    pub fn optimal_offset(&self, readings: [f64; 3]) -> f64 {
        arg_or_zero(self.x2, self.x3, degeneracy_threshold(readings))
    }
}

/// Three probe offsets `(φ_1, φ_2, φ_3)` with a nonsingular measurement
/// matrix `A`, rows `[1, cos φ_l, sin φ_l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleTriple {
    phi: [f64; 3],
    /// Rows of `A⁻¹`.
    inverse: [[f64; 3]; 3],
}

impl AngleTriple {
    pub fn new(phi1: f64, phi2: f64, phi3: f64) -> Result<Self> {
        if !(phi1.is_finite() && phi2.is_finite() && phi3.is_finite()) {
            return invalid("probe angles must be finite");
        }
        let phi = [wrap_phase(phi1), wrap_phase(phi2), wrap_phase(phi3)];
        let a = phi.map(|p| [1.0, p.cos(), p.sin()]);
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]
        };
        // Cofactor expansion along the first column.
        let c00 = cof(1, 2, 1, 2);
        let c10 = -cof(0, 2, 1, 2);
        let c20 = cof(0, 1, 1, 2);
        let det = a[0][0] * c00 + a[1][0] * c10 + a[2][0] * c20;
        if det.abs() <= MIN_DETERMINANT {
            return Err(Error::DegenerateAngles {
                det,
                threshold: MIN_DETERMINANT,
            });
        }
        // adj(A) = cofactor matrix transposed.
        let cofactors = [
            [c00, -cof(1, 2, 0, 2), cof(1, 2, 0, 1)],
            [c10, cof(0, 2, 0, 2), -cof(0, 2, 0, 1)],
            [c20, -cof(0, 1, 0, 2), cof(0, 1, 0, 1)],
        ];
        let mut inverse = [[0.0; 3]; 3];
        for (i, row) in inverse.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = cofactors[j][i] / det;
            }
        }
        Ok(Self { phi, inverse })
    }

    /// `(0, π/2, π)`, the triple behind [`closed_form_update`].
    pub fn standard() -> Self {
        Self::new(0.0, FRAC_PI_2, PI).expect("standard triple is nonsingular")
    }

    pub fn angles(&self) -> [f64; 3] {
        self.phi
    }

    pub fn determinant(&self) -> f64 {
        let a = self.phi.map(|p| [1.0, p.cos(), p.sin()]);
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    pub fn coefficients(&self, y: [f64; 3]) -> SolverCoefficients {
        let [x1, x2, x3] = self
            .inverse
            .map(|row| row[0] * y[0] + row[1] * y[1] + row[2] * y[2]);
        SolverCoefficients { x1, x2, x3 }
    }
}

/// Optimal phase offset from readings `y_l = f(φ_l)` at arbitrary probe
/// angles, via `x = A⁻¹ y`. Returns a value in `[0, 2π)`.
pub fn solve_three_point(angles: &AngleTriple, y1: f64, y2: f64, y3: f64) -> f64 {
    let y = [y1, y2, y3];
    angles.coefficients(y).optimal_offset(y)
}

/// Optimal phase offset from readings at offsets `0, π/2, π`:
/// `Arg((y1 − y3) + j(2y2 − y1 − y3))`.
pub fn closed_form_update(y1: f64, y2: f64, y3: f64) -> f64 {
    arg_or_zero(
        y1 - y3,
        2.0 * y2 - y1 - y3,
        degeneracy_threshold([y1, y2, y3]),
    )
}

/// Per-element update rule: where to probe and how to turn the three
/// readings into a phase offset.
pub trait ElementSolver: Sync {
    fn probe_offsets(&self) -> [f64; 3];
    fn solve(&self, readings: [f64; 3]) -> f64;
}

/// Probes at `0, π/2, π` and applies [`closed_form_update`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClosedForm;

impl ElementSolver for ClosedForm {
    fn probe_offsets(&self) -> [f64; 3] {
        [0.0, FRAC_PI_2, PI]
    }

    fn solve(&self, y: [f64; 3]) -> f64 {
        closed_form_update(y[0], y[1], y[2])
    }
}

impl ElementSolver for AngleTriple {
    fn probe_offsets(&self) -> [f64; 3] {
        self.phi
    }

    fn solve(&self, y: [f64; 3]) -> f64 {
        solve_three_point(self, y[0], y[1], y[2])
    }
}

/// Element visiting order within each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderPolicy {
    #[default]
    Ascending,
    /// A fresh permutation every sweep, drawn from a seeded stream.
    SeededShuffle(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    /// Measurements consumed by the run so far.
    pub measurements: u64,
    /// True (noise-free) objective at the incumbent phases.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationTrace {
    pub samples: Vec<TraceSample>,
    pub final_phases: PhaseVector,
    pub sweeps_completed: u32,
}

impl OptimizationTrace {
    pub fn final_power(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.power)
    }

    /// Power of the last sample taken at or before `measurements`.
    pub fn power_at(&self, measurements: u64) -> Option<f64> {
        self.samples
            .iter()
            .take_while(|s| s.measurements <= measurements)
            .last()
            .map(|s| s.power)
    }
}

/// Applies one three-reading update to element `n` of `theta`.
fn update_element(
    oracle: &mut MeasurementOracle,
    theta: &mut PhaseVector,
    n: usize,
    solver: &dyn ElementSolver,
    mut records: Option<&mut Vec<MeasurementRecord>>,
) -> Result<()> {
    let base = theta[n];
    let mut y = [0.0; 3];
    for (reading, offset) in y.iter_mut().zip(solver.probe_offsets()) {
        theta.set(n, base + offset);
        let measured = match records.as_deref_mut() {
            Some(log) => {
                let record = oracle.measure_record(theta)?;
                let value = record.reading;
                log.push(record);
                Ok(value)
            }
            None => oracle.measure(theta),
        };
        if measured.is_err() {
            theta.set(n, base);
        }
        *reading = measured?;
    }
    theta.set(n, base + solver.solve(y));
    Ok(())
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return invalid(format!("order has {} entries, expected {n}", order.len()));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return invalid(format!("order is not a permutation of 0..{n}"));
        }
    }
    Ok(())
}

/// One pass of the sequential algorithm over `order` (0-based element
/// indices, a permutation of `0..N`), using the closed-form update.
/// Returns the updated phases and all `3N` readings.
pub fn sequential_sweep(
    oracle: &mut MeasurementOracle,
    theta: &PhaseVector,
    order: &[usize],
) -> Result<(PhaseVector, Vec<MeasurementRecord>)> {
    sequential_sweep_with(oracle, theta, order, &ClosedForm)
}

pub fn sequential_sweep_with(
    oracle: &mut MeasurementOracle,
    theta: &PhaseVector,
    order: &[usize],
    solver: &dyn ElementSolver,
) -> Result<(PhaseVector, Vec<MeasurementRecord>)> {
    if theta.len() != oracle.len() {
        return invalid(format!(
            "phase vector has {} entries, oracle expects {}",
            theta.len(),
            oracle.len()
        ));
    }
    check_order(order, theta.len())?;
    let mut theta = theta.clone();
    let mut records = Vec::with_capacity(3 * order.len());
    for &n in order {
        update_element(oracle, &mut theta, n, solver, Some(&mut records))?;
    }
    Ok((theta, records))
}

fn check_sizes(oracle: &MeasurementOracle, n: usize, init: &PhaseVector) -> Result<()> {
    if n == 0 {
        return invalid("number of elements must be at least 1");
    }
    if init.len() != n || oracle.len() != n {
        return invalid(format!(
            "size mismatch: n = {n}, initial phases = {}, oracle = {}",
            init.len(),
            oracle.len()
        ));
    }
    Ok(())
}

/// Runs `m` sweeps of the sequential algorithm with the closed-form update.
///
/// The trace holds the starting point at 0 measurements and one sample per
/// element update, at `3k` measurements after `k` updates. Powers are the
/// noise-free objective. Consumes exactly `3·n·m` measurements.
pub fn run_sequential(
    oracle: &mut MeasurementOracle,
    n: usize,
    m: u32,
    init: &PhaseVector,
    order_policy: OrderPolicy,
) -> Result<OptimizationTrace> {
    run_sequential_with(oracle, n, m, init, order_policy, &ClosedForm)
}

pub fn run_sequential_with(
    oracle: &mut MeasurementOracle,
    n: usize,
    m: u32,
    init: &PhaseVector,
    order_policy: OrderPolicy,
    solver: &dyn ElementSolver,
) -> Result<OptimizationTrace> {
    check_sizes(oracle, n, init)?;
    if m == 0 {
        return invalid("number of sweeps must be at least 1");
    }
    let start = oracle.count();
    let mut theta = init.clone();
    let mut samples = Vec::with_capacity(1 + n * m as usize);
    samples.push(TraceSample {
        measurements: 0,
        power: oracle.true_power(&theta)?,
    });
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = match order_policy {
        OrderPolicy::Ascending => None,
        OrderPolicy::SeededShuffle(seed) => Some(rng_from_seed(seed)),
    };
    for _ in 0..m {
        if let Some(rng) = shuffler.as_mut() {
            order.shuffle(rng);
        }
        for &i in &order {
            update_element(oracle, &mut theta, i, solver, None)?;
            samples.push(TraceSample {
                measurements: oracle.count() - start,
                power: oracle.true_power(&theta)?,
            });
        }
    }
    Ok(OptimizationTrace {
        samples,
        final_phases: theta,
        sweeps_completed: m,
    })
}

/// Random-update baseline starting from all-zero phases.
pub fn run_random_baseline(
    oracle: &mut MeasurementOracle,
    n: usize,
    steps: u32,
    seed: u64,
) -> Result<OptimizationTrace> {
    run_random_baseline_from(oracle, &PhaseVector::zeros(n), steps, seed)
}

/// Random-update baseline.
///
/// One reading at the start phases sets the incumbent. Each step then visits
/// the next element round-robin, proposes a uniform phase in `[0, 2π)` and
/// takes one reading; the proposal is kept only if the reading beats the
/// incumbent reading. Consumes `steps + 1` measurements. Samples are taken
/// after the initial reading and after every step.
pub fn run_random_baseline_from(
    oracle: &mut MeasurementOracle,
    init: &PhaseVector,
    steps: u32,
    seed: u64,
) -> Result<OptimizationTrace> {
    let n = init.len();
    check_sizes(oracle, n, init)?;
    if steps == 0 {
        return invalid("baseline steps must be at least 1");
    }
    let start = oracle.count();
    let mut rng = rng_from_seed(seed);
    let mut theta = init.clone();
    let mut incumbent = oracle.measure(&theta)?;
    let mut power = oracle.true_power(&theta)?;
    let mut samples = Vec::with_capacity(steps as usize + 1);
    samples.push(TraceSample {
        measurements: oracle.count() - start,
        power,
    });
    for step in 0..steps as usize {
        let i = step % n;
        let previous = theta[i];
        theta.set(i, rng.random_range(0.0..TAU));
        let reading = oracle.measure(&theta)?;
        if reading > incumbent {
            incumbent = reading;
            power = oracle.true_power(&theta)?;
        } else {
            theta.set(i, previous);
        }
        samples.push(TraceSample {
            measurements: oracle.count() - start,
            power,
        });
    }
    Ok(OptimizationTrace {
        samples,
        final_phases: theta,
        sweeps_completed: steps / n as u32,
    })
}
