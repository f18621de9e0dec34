//! Certification diagnostics for closed-loop runs: a path-integral ledger
//! whose running minimum witnesses counterclockwise behaviour (or its
//! failure), a frequency-domain negative-imaginary test for washout
//! mechanisms, convergence verdicts against a computed equilibrium set, and
//! integral diagnostics for the stationarity argument.

use crate::engine::{simulate, EngineError, IntegratorConfig, TrajectoryRecord};
use crate::payoffs::PayoffMechanism;
use crate::payoffs::WashoutFilter;
use crate::rules::RuleSpec;
use crate::simplex::{distance_to_set, NashSet, PayoffVector, PopulationState, SimplexError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// A converged run's correlation must sit below this in the trailing window.
pub const CORRELATION_TAIL_TOL: f64 = 1e-6;
/// Frequency-response forms are Hermitian by construction; any defect above
/// this is treated as a numerical fault.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("frequency-response form lost Hermitian symmetry at omega = {omega} (defect {defect:.3e})")]
    NonHermitianForm { omega: f64, defect: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Running Stieltjes sum `sum x_mid' (p_next - p_prev)` along a trajectory,
/// together with its running minimum. For a mechanism that only absorbs
/// cyclic payoff work the minimum stays above a fixed envelope
/// (`bound_estimate`, when one is available); a minimum that keeps drifting
/// down falsifies that property.
#[derive(Debug, Clone)]
pub struct CcwLedger {
    running_integral: f64,
    running_min: f64,
    bound_estimate: Option<f64>,
    steps: usize,
}

impl CcwLedger {
    pub fn new(bound_estimate: Option<f64>) -> Self {
        Self {
            running_integral: 0.0,
            running_min: 0.0,
            bound_estimate,
            steps: 0,
        }
    }

    /// Advance by one integration step. `dt` only sanity-checks the call; the
    /// sum is parameterization-free.
    pub fn step(
        &mut self,
        x_mid: &PopulationState,
        p_prev: &PayoffVector,
        p_next: &PayoffVector,
        dt: f64,
    ) {
        debug_assert!(dt > 0.0, "nonpositive step {dt}");
        debug_assert_eq!(x_mid.len(), p_prev.len());
        let increment: f64 = x_mid
            .entries()
            .iter()
            .zip(p_prev.entries())
            .zip(p_next.entries())
            .map(|((x, prev), next)| x * (next - prev))
            .sum();
        self.running_integral += increment;
        if self.running_integral < self.running_min {
            self.running_min = self.running_integral;
        }
        self.steps += 1;
    }

    pub fn integral(&self) -> f64 {
        self.running_integral
    }

    pub fn minimum(&self) -> f64 {
        self.running_min
    }

    pub fn bound_estimate(&self) -> Option<f64> {
        self.bound_estimate
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// Least-squares slope of `values` against `times`, restricted to the last
/// 80% of the time span (the leading 20% is treated as transient). Returns
/// 0.0 when fewer than two samples fall in the window.
pub fn drift_slope(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len(), "series length mismatch");
    if times.len() < 2 {
        return 0.0;
    }
    let t0 = times[0];
    let t_end = times[times.len() - 1];
    let cutoff = t0 + 0.2 * (t_end - t0);
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= cutoff)
        .map(|(t, v)| (*t, *v))
        .collect();
    if window.len() < 2 {
        return 0.0;
    }
    let m = window.len() as f64;
    let t_mean = window.iter().map(|(t, _)| t).sum::<f64>() / m;
    let v_mean = window.iter().map(|(_, v)| v).sum::<f64>() / m;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in &window {
        num += (t - t_mean) * (v - v_mean);
        den += (t - t_mean) * (t - t_mean);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NiVerdict {
    Pass,
    /// Some grid frequency produced an eigenvalue below `-tol`; the reported
    /// pair is the worst one found.
    Fail { omega: f64, min_eigenvalue: f64 },
}

#[derive(Debug, Clone)]
pub struct NiReport {
    pub omegas: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    pub verdict: NiVerdict,
}

/// Log-spaced frequency grid spanning `[lambda/100, 100*lambda]`.
pub fn log_omega_grid(lambda: f64, points: usize) -> Vec<f64> {
    assert!(lambda > 0.0 && points >= 2, "need lambda > 0, points >= 2");
    let lo = (lambda / 100.0).ln();
    let hi = (lambda * 100.0).ln();
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Frequency-domain check of the washout transfer path. For each `omega` the
/// form `M(omega) = j (G(j omega) - G(j omega)^H)` is assembled from the
/// sampled transfer matrix `G(s) = k lambda s/(s + lambda) A`, verified
/// Hermitian, and its smallest eigenvalue recorded; the filter passes when no
/// eigenvalue falls below `-tol`.
pub fn ni_frequency_test(
    filter: &WashoutFilter,
    omegas: &[f64],
    tol: f64,
) -> Result<NiReport, AnalysisError> {
    if omegas.is_empty() {
        return Err(AnalysisError::InvalidInput(
            "empty frequency grid".into(),
        ));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "tolerance must be nonnegative, got {tol}"
        )));
    }
    let n = filter.n();
    let a = filter.matrix();
    let lambda = filter.lambda();
    let k = filter.k();
    let mut min_eigenvalues = Vec::with_capacity(omegas.len());
    let mut worst: Option<(f64, f64)> = None;
    for &omega in omegas {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(AnalysisError::InvalidInput(format!(
                "frequencies must be positive, got {omega}"
            )));
        }
        let s = Complex64::new(0.0, omega);
        let c = Complex64::new(k * lambda, 0.0) * s / (s + lambda);
        // G = c * A with A real symmetric, so M = j(G - G^H) = -2 Im(c) A.
        // Assemble M entrywise anyway and verify Hermitian symmetry, so a
        // defect in the sampling shows up instead of being assumed away.
        let g = |i: usize, j: usize| c * a[i][j];
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::i() * (g(i, j) - g(j, i).conj()));
        let mut defect = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                defect = defect.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if defect > HERMITIAN_TOL {
            return Err(AnalysisError::NonHermitianForm { omega, defect });
        }
        let real = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
        let min_eig = real
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        min_eigenvalues.push(min_eig);
        if min_eig < -tol && worst.is_none_or(|(_, w)| min_eig < w) {
            worst = Some((omega, min_eig));
        }
    }
    let verdict = match worst {
        None => NiVerdict::Pass,
        Some((omega, min_eigenvalue)) => NiVerdict::Fail {
            omega,
            min_eigenvalue,
        },
    };
    Ok(NiReport {
        omegas: omegas.to_vec(),
        min_eigenvalues,
        verdict,
    })
}

/// Where a finished run ended up relative to an equilibrium set.
#[derive(Debug, Clone)]
pub struct ConvergenceVerdict {
    pub final_time: f64,
    pub final_speed: f64,
    pub final_distance: f64,
    pub correlation_tail_max: f64,
    pub early_stopped: bool,
    pub converged: bool,
}

/// Judge a trajectory against an equilibrium set: final speed below
/// `speed_tol`, final distance below `dist_tol`, and the correlation maximum
/// over the trailing 10% of the time span below [`CORRELATION_TAIL_TOL`].
pub fn convergence_verdict(
    traj: &TrajectoryRecord,
    equilibria: &NashSet,
    speed_tol: f64,
    dist_tol: f64,
) -> Result<ConvergenceVerdict, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    let final_time = traj.final_time();
    let final_speed = traj.final_speed();
    let final_distance = distance_to_set(traj.final_state(), equilibria)?;
    let correlation_tail_max = tail_correlation_max(traj);
    let converged = final_speed <= speed_tol
        && final_distance <= dist_tol
        && correlation_tail_max <= CORRELATION_TAIL_TOL;
    Ok(ConvergenceVerdict {
        final_time,
        final_speed,
        final_distance,
        correlation_tail_max,
        early_stopped: traj.early_stopped,
        converged,
    })
}

fn tail_correlation_max(traj: &TrajectoryRecord) -> f64 {
    let t0 = traj.times[0];
    let t_end = traj.final_time();
    let cutoff = t_end - 0.1 * (t_end - t0);
    traj.times
        .iter()
        .zip(&traj.correlations)
        .filter(|(t, _)| **t >= cutoff)
        .map(|(_, c)| *c)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Integral diagnostics backing the stationarity argument: the time integral
/// of the correlation (trapezoid rule on the recorded samples) stays bounded
/// for a dissipative loop, and its integrand must die out in the tail.
#[derive(Debug, Clone)]
pub struct BarbalatDiagnostic {
    pub correlation_integral: f64,
    pub correlation_tail_max: f64,
    pub integral_bound: Option<f64>,
    pub within_bound: Option<bool>,
}

pub fn barbalat_diagnostic(
    traj: &TrajectoryRecord,
    integral_bound: Option<f64>,
) -> Result<BarbalatDiagnostic, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    let mut integral = 0.0;
    for k in 0..traj.len().saturating_sub(1) {
        let dt = traj.times[k + 1] - traj.times[k];
        integral += 0.5 * (traj.correlations[k] + traj.correlations[k + 1]) * dt;
    }
    let within_bound = integral_bound.map(|b| integral <= b);
    Ok(BarbalatDiagnostic {
        correlation_integral: integral,
        correlation_tail_max: tail_correlation_max(traj),
        integral_bound,
        within_bound,
    })
}

/// Outcome of a falsification sweep over the ledger minimum.
#[derive(Debug, Clone)]
pub enum CcwSearch {
    /// No start produced a persistent downward drift; `min_slope` is the most
    /// negative fitted slope seen.
    NoWitness { min_slope: f64 },
    /// `trajectory` (from `starts[start_index]`) shows the ledger minimum
    /// drifting down at `drift_rate` per time unit — the mechanism is not
    /// counterclockwise along this path.
    Witness {
        start_index: usize,
        drift_rate: f64,
        trajectory: Box<TrajectoryRecord>,
    },
}

/// Sweep `starts`, integrating for `t_horizon`, fitting the drift of the
/// ledger running minimum, and reporting the worst witness whose downward
/// slope exceeds `drift_threshold` in magnitude.
pub fn ccw_falsify(
    spec: &RuleSpec,
    mech: &PayoffMechanism,
    starts: &[PopulationState],
    t_horizon: f64,
    drift_threshold: f64,
) -> Result<CcwSearch, AnalysisError> {
    if starts.is_empty() {
        return Err(AnalysisError::InvalidInput("no start states".into()));
    }
    if !(drift_threshold.is_finite() && drift_threshold > 0.0) {
        return Err(AnalysisError::InvalidInput(format!(
            "drift threshold must be positive, got {drift_threshold}"
        )));
    }
    let cfg = IntegratorConfig {
        t_max: t_horizon,
        ..IntegratorConfig::default()
    };
    let mut min_slope = f64::INFINITY;
    let mut witness: Option<(usize, f64, TrajectoryRecord)> = None;
    for (idx, x0) in starts.iter().enumerate() {
        let traj = simulate(spec, mech, x0, &cfg)?;
        let slope = drift_slope(&traj.times, &traj.ccw_min);
        if slope < min_slope {
            min_slope = slope;
        }
        if slope < -drift_threshold && witness.as_ref().is_none_or(|(_, s, _)| slope < *s) {
            witness = Some((idx, slope, traj));
        }
    }
    Ok(match witness {
        Some((start_index, drift_rate, trajectory)) => CcwSearch::Witness {
            start_index,
            drift_rate,
            trajectory: Box::new(trajectory),
        },
        None => CcwSearch::NoWitness { min_slope },
    })
}
