//! Blind phase alignment for reconfigurable intelligent surfaces (RIS)
//! harvesting ambient RF energy.
//!
//! The surface never observes its channel. It only reads a scalar power
//! meter, and aligns all element phasors by sequential coordinate ascent:
//! three power readings per element are enough to recover the element's
//! optimal phase in closed form.
//!
//! Module map:
//!
//! * [`channel`]: complex effective gains, the received-power objective and
//!   its full-CSI optimum.
//! * [`measurement`]: the power-meter oracle (noiseless or AWGN-corrupted)
//!   with a measurement counter.
//! * [`optimizer`]: the three-point solver, the sequential sweep algorithm
//!   and the random-update baseline.
//! * [`reference`](mod@reference): brute-force and analytic verifiers, independent of the
//!   optimizer.
//! * [`sim`]: seeded Monte-Carlo experiment runner, mean curves and CDFs.
//! * [`cli`]: the `run` and `verify` commands behind the binary.

pub mod channel;
pub mod cli;
pub mod error;
pub mod measurement;
pub mod optimizer;
pub mod reference;
pub mod seed;
pub mod sim;

pub use channel::{
    compose_effective_gains, generate_channels, optimal_phases, optimal_power_bound,
    received_power, ComplexGain, EffectiveGains, HarvestingMode, PhaseVector,
};
pub use error::{Error, Result};
pub use measurement::{
    make_noisy_oracle, make_noisy_oracle_with, MeasurementOracle, MeasurementRecord, NoiseModel,
    SnrReference,
};
pub use optimizer::{
    closed_form_update, run_random_baseline, run_sequential, sequential_sweep, solve_three_point,
    AngleTriple, ClosedForm, ElementSolver, OptimizationTrace, OrderPolicy, SolverCoefficients,
    TraceSample,
};

/// Wraps an angle into the canonical interval `[0, 2π)`.
pub fn wrap_phase(angle: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let r = angle.rem_euclid(tau);
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if r >= tau {
        0.0
    } else {
        r
    }
}

/// Wraps an angle difference into `(-π, π]`.
pub fn wrap_signed(angle: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = wrap_phase(angle);
    if r > pi {
        r - std::f64::consts::TAU
    } else {
        r
    }
}
