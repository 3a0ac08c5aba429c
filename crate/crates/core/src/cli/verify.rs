use num_complex::Complex64;
use std::io::Write;

use super::CliError;
use crate::channel::{generate_channels, optimal_power_bound, PhaseVector};
use crate::measurement::MeasurementOracle;
use crate::optimizer::{
    run_sequential_with, solve_three_point, AngleTriple, ClosedForm, ElementSolver, OrderPolicy,
};
use crate::reference::{brute_force_max, check_fixed_point_alignment, GridSpec};
use crate::seed::{mix64, rng_phases};
use crate::wrap_signed;

/// Largest `N` for which brute-force references are run.
pub const MAX_BRUTE_FORCE_N: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// First failure, or the worst observed margin.
    pub detail: String,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    failures: usize,
    first_failure: Option<String>,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            first_failure: None,
            worst: 0.0,
        }
    }

    fn record(&mut self, ok: bool, margin: f64, describe: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(margin);
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(describe());
            }
        }
    }

    fn finish(self) -> CheckResult {
        let detail = self
            .first_failure
            .unwrap_or_else(|| format!("worst deviation {:.3e}", self.worst));
        CheckResult {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            detail,
        }
    }
}

fn pair(seed: u64) -> (Complex64, Complex64) {
    let z = generate_channels(2, seed).expect("n = 2");
    (z[0], z[1])
}

fn readings(z0: Complex64, z: Complex64, angles: [f64; 3]) -> [f64; 3] {
    angles.map(|p| (z0 + z * Complex64::cis(p)).norm_sqr())
}

fn solver_equivalence(solver: &dyn ElementSolver, seed: u64) -> CheckResult {
    let mut t = Tally::new("solver-equivalence");
    let standard = AngleTriple::standard();
    for i in 0..10_000u64 {
        let (z0, z) = pair(mix64(seed ^ i));
        let y = readings(z0, z, solver.probe_offsets());
        let got = solver.solve(y);
        let general = solve_three_point(&standard, y[0], y[1], y[2]);
        let truth = (z0 * z.conj()).arg();
        let dev = wrap_signed(got - general)
            .abs()
            .max(wrap_signed(got - truth).abs());
        t.record(dev <= 1e-9, dev, || {
            format!("pair {i}: update {got:.6}, expected {truth:.6}")
        });
    }
    t.finish()
}

fn general_triples(seed: u64) -> CheckResult {
    let mut t = Tally::new("general-triple-recovery");
    let mut triples = 0;
    let mut k = 0u64;
    while triples < 100 {
        k += 1;
        let p = rng_phases(3, mix64(seed.wrapping_add(k)));
        let Ok(triple) = AngleTriple::new(p[0], p[1], p[2]) else {
            continue;
        };
        triples += 1;
        for i in 0..100u64 {
            let (z0, z) = pair(mix64(seed ^ (k << 20) ^ i));
            let y = readings(z0, z, triple.angles());
            let got = solve_three_point(&triple, y[0], y[1], y[2]);
            let dev = wrap_signed(got - (z0 * z.conj()).arg()).abs();
            t.record(dev <= 1e-9, dev, || {
                format!("triple {:?}: deviation {dev:.3e}", triple.angles())
            });
        }
    }
    t.finish()
}

fn oracle_sandwich(max_n: usize, seed: u64) -> crate::Result<CheckResult> {
    let mut t = Tally::new("oracle-sandwich");
    for n in 1..=max_n {
        for i in 0..5u64 {
            let z = generate_channels(n, mix64(seed ^ 0x5a5a ^ (n as u64) << 8 ^ i))?;
            let bound = optimal_power_bound(&z);
            let mut last = f64::NEG_INFINITY;
            for k in [8, 32, 128] {
                let (p, _) = brute_force_max(&z, &GridSpec::new(k)?)?;
                let ok = p <= bound * (1.0 + 1e-12) && p >= last;
                t.record(ok, (p - bound).max(0.0) / bound, || {
                    format!("n={n}, K={k}: grid max {p} vs bound {bound}, previous {last}")
                });
                last = p;
            }
        }
    }
    Ok(t.finish())
}

fn cross_validation(
    solver: &dyn ElementSolver,
    max_n: usize,
    seed: u64,
) -> crate::Result<CheckResult> {
    let mut t = Tally::new("grid-cross-validation");
    let grid = GridSpec::new(64)?;
    for i in 0..100u64 {
        let n = 1 + (i as usize % max_n);
        let z = generate_channels(n, mix64(seed ^ 0xc0ffee ^ i))?;
        let bound = optimal_power_bound(&z);
        let (grid_max, _) = brute_force_max(&z, &grid)?;
        let mut oracle = MeasurementOracle::noiseless(z);
        let trace = run_sequential_with(
            &mut oracle,
            n,
            5,
            &PhaseVector::zeros(n),
            OrderPolicy::Ascending,
            solver,
        )?;
        let p = trace.final_power();
        let ok = p >= grid_max * (1.0 - 1e-6)
            && p <= bound * (1.0 + 1e-12)
            && grid_max <= bound * (1.0 + 1e-12);
        t.record(ok, ((grid_max - p) / bound).max(0.0), || {
            format!("instance {i} (n={n}): sequential {p:.9}, grid {grid_max:.9}, bound {bound:.9}")
        });
    }
    Ok(t.finish())
}

fn fixed_point(solver: &dyn ElementSolver, seed: u64) -> crate::Result<(CheckResult, CheckResult)> {
    let mut mono = Tally::new("monotone-updates");
    let mut align = Tally::new("fixed-point-alignment");
    for i in 0..100u64 {
        let n = 2 + (i as usize % 7);
        let z = generate_channels(n, mix64(seed ^ 0xf1f1 ^ i))?;
        let bound = optimal_power_bound(&z);
        let init = PhaseVector::new(rng_phases(n, mix64(seed ^ 0x1717 ^ i)))?;
        let mut oracle = MeasurementOracle::noiseless(z.clone());
        let trace = run_sequential_with(&mut oracle, n, 20, &init, OrderPolicy::Ascending, solver)?;
        let worst_drop = trace
            .samples
            .windows(2)
            .map(|w| (w[0].power - w[1].power) / w[0].power.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        mono.record(worst_drop <= 1e-9, worst_drop, || {
            format!("instance {i} (n={n}): objective dropped by {worst_drop:.3e} relative")
        });
        let aligned = check_fixed_point_alignment(&z, &trace.final_phases, 1e-6)?;
        let gap = (bound - trace.final_power()).abs() / bound;
        align.record(aligned && gap <= 1e-9, gap, || {
            format!("instance {i} (n={n}): aligned={aligned}, relative gap {gap:.3e}")
        });
    }
    Ok((mono.finish(), align.finish()))
}

/// Runs every check with the given per-element solver and prints a table.
pub fn cmd_verify_with(
    max_n: usize,
    seed: u64,
    solver: &dyn ElementSolver,
    out: &mut dyn Write,
) -> Result<VerifyReport, CliError> {
    if max_n == 0 || max_n > MAX_BRUTE_FORCE_N {
        return Err(CliError::Usage(format!(
            "--max-n must be between 1 and {MAX_BRUTE_FORCE_N} (brute-force grid cap), got {max_n}"
        )));
    }
    let (mono, align) = fixed_point(solver, seed)?;
    let checks = vec![
        solver_equivalence(solver, seed),
        general_triples(seed),
        oracle_sandwich(max_n, seed)?,
        cross_validation(solver, max_n, seed)?,
        mono,
        align,
    ];
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    writeln!(
        out,
        "{:<26} {:>7} {:>8}  {:<6} detail",
        "check", "cases", "failures", "status"
    )
    .map_err(io)?;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{:<26} {:>7} {:>8}  {:<6} {}",
            c.name, c.cases, c.failures, status, c.detail
        )
        .map_err(io)?;
    }
    let report = VerifyReport { checks };
    if report.passed() {
        Ok(report)
    } else {
        Err(CliError::VerificationFailed(
            report
                .checks
                .iter()
                .filter(|c| !c.passed())
                .map(|c| c.name.to_string())
                .collect(),
        ))
    }
}

pub fn cmd_verify(max_n: usize, seed: u64, out: &mut dyn Write) -> Result<VerifyReport, CliError> {
    cmd_verify_with(max_n, seed, &ClosedForm, out)
}
