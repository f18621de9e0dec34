//! Probability-simplex states, excess payoffs, best responses, and Nash
//! equilibria of affine games.
//!
//! A population state lives on the unit simplex `X = {x in [0,1]^n : sum x = 1}`.
//! Everything downstream (learning rules, payoff mechanisms, the integrator)
//! assumes states stay on `X`, so construction and projection are strict here
//! and the rest of the crate can stay permissive.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Absolute tolerance on `|sum(x) - 1|` for a state to count as on-simplex.
pub const SUM_TOL: f64 = 1e-12;

/// Default bound on how far a vector may drift off the simplex before
/// projection refuses to repair it (a drift this large means the integrator
/// is broken, not merely rounding).
pub const DEFAULT_DRIFT_BOUND: f64 = 1e-6;

/// Equilibrium points closer than this (Euclidean) are treated as duplicates.
pub const DEDUP_RADIUS: f64 = 1e-8;

/// Support enumeration is exponential in the strategy count; hard cap.
pub const MAX_ENUM_STRATEGIES: usize = 10;

#[derive(Debug, Error)]
pub enum SimplexError {
    #[error("vector drifted {distance:.3e} from the simplex (bound {bound:.3e})")]
    DriftExceeded { distance: f64, bound: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("support enumeration supports at most {MAX_ENUM_STRATEGIES} strategies, got {0}")]
    TooManyStrategies(usize),
    #[error("equilibrium set is empty")]
    EmptySet,
    #[error("invalid simplex point: {0}")]
    InvalidState(String),
}

/// A point on the probability simplex. Invariant: every entry is in `[0,1]`
/// and the entries sum to one within [`SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    entries: Vec<f64>,
}

impl PopulationState {
    pub fn new(entries: Vec<f64>) -> Result<Self, SimplexError> {
        if entries.len() < 2 {
            return Err(SimplexError::InvalidState(format!(
                "need at least 2 strategies, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(SimplexError::InvalidState("non-finite entry".into()));
        }
        if let Some(bad) = entries.iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
            return Err(SimplexError::InvalidState(format!(
                "entry {bad} outside [0,1]"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(SimplexError::InvalidState(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { entries })
    }

    /// Barycenter of the full simplex.
    pub fn uniform(n: usize) -> Self {
        Self {
            entries: vec![1.0 / n as f64; n],
        }
    }

    /// The pure state `e_i` (all mass on strategy `i`).
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut entries = vec![0.0; n];
        entries[i] = 1.0;
        Self { entries }
    }

    /// Barycenter of the face spanned by `support` (0-based indices).
    pub fn face_barycenter(n: usize, support: &[usize]) -> Self {
        let mut entries = vec![0.0; n];
        let w = 1.0 / support.len() as f64;
        for &i in support {
            entries[i] = w;
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Population-average payoff `p'x`.
    pub fn average_payoff(&self, p: &PayoffVector) -> f64 {
        self.entries
            .iter()
            .zip(p.entries())
            .map(|(x, p)| x * p)
            .sum()
    }

    /// Euclidean distance to another state.
    pub fn distance(&self, other: &PopulationState) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn from_trusted(entries: Vec<f64>) -> Self {
        Self { entries }
    }
}

/// A payoff vector `p in R^n`; one entry per strategy, finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffVector {
    entries: Vec<f64>,
}

impl PayoffVector {
    pub fn new(entries: Vec<f64>) -> Result<Self, SimplexError> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(SimplexError::InvalidState(
                "non-finite payoff entry".into(),
            ));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf_norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn from_trusted(entries: Vec<f64>) -> Self {
        Self { entries }
    }
}

/// Payoffs relative to the population average: `p_hat = p - (p'x) 1`.
/// Invariant: `x' p_hat = 0` (up to rounding).
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessPayoffVector {
    entries: Vec<f64>,
}

impl ExcessPayoffVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Repair a vector that has drifted slightly off the simplex: clip negative
/// entries to zero and renormalize the sum to one. Vectors already valid
/// within [`SUM_TOL`] are returned unchanged; vectors farther than
/// `drift_bound` (infinity norm, input vs. repaired) are rejected.
pub fn project_to_simplex(v: &[f64], drift_bound: f64) -> Result<PopulationState, SimplexError> {
    if v.len() < 2 {
        return Err(SimplexError::InvalidState(format!(
            "need at least 2 strategies, got {}",
            v.len()
        )));
    }
    if v.iter().any(|e| !e.is_finite()) {
        return Err(SimplexError::DriftExceeded {
            distance: f64::INFINITY,
            bound: drift_bound,
        });
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() <= SUM_TOL && v.iter().all(|&e| (0.0..=1.0).contains(&e)) {
        return Ok(PopulationState::from_trusted(v.to_vec()));
    }
    let clipped: Vec<f64> = v.iter().map(|&e| e.max(0.0)).collect();
    let mass: f64 = clipped.iter().sum();
    if mass <= 0.0 {
        return Err(SimplexError::DriftExceeded {
            distance: f64::INFINITY,
            bound: drift_bound,
        });
    }
    let mut repaired: Vec<f64> = clipped.iter().map(|e| e / mass).collect();
    // One more exact renormalization pass: division can leave the sum a few
    // ulps off, and downstream constructors check SUM_TOL strictly.
    let s: f64 = repaired.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        for e in &mut repaired {
            *e /= s;
        }
    }
    let distance = v
        .iter()
        .zip(&repaired)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if distance > drift_bound {
        return Err(SimplexError::DriftExceeded {
            distance,
            bound: drift_bound,
        });
    }
    Ok(PopulationState::from_trusted(repaired))
}

/// Excess payoff `p_hat_i = p_i - p'x`.
pub fn excess_payoff(
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<ExcessPayoffVector, SimplexError> {
    if x.len() != p.len() {
        return Err(SimplexError::DimensionMismatch {
            left: x.len(),
            right: p.len(),
        });
    }
    let avg = x.average_payoff(p);
    Ok(ExcessPayoffVector {
        entries: p.entries().iter().map(|pi| pi - avg).collect(),
    })
}

/// Indices of maximal payoff entries, with ties resolved within `tol`.
pub fn best_response_set(p: &PayoffVector, tol: f64) -> Vec<usize> {
    let max = p.max_entry();
    p.entries()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= max - tol)
        .map(|(i, _)| i)
        .collect()
}

/// Whether `x` puts all its mass on `tol`-maximal strategies, i.e.
/// `p'x >= max_i p_i - tol`.
pub fn is_best_response(
    x: &PopulationState,
    p: &PayoffVector,
    tol: f64,
) -> Result<bool, SimplexError> {
    if x.len() != p.len() {
        return Err(SimplexError::DimensionMismatch {
            left: x.len(),
            right: p.len(),
        });
    }
    Ok(x.average_payoff(p) >= p.max_entry() - tol)
}

/// The set of Nash equilibria of a stationary game, as returned by
/// [`nash_equilibria_affine`]. `residuals[i]` is the measured best-response
/// violation `max_j F_j(x) - x'F(x)` of `points[i]`; `continuum` flags that
/// at least one support carried a solution subspace, for which only the face
/// barycenter is reported.
#[derive(Debug, Clone)]
pub struct NashSet {
    pub points: Vec<PopulationState>,
    pub residuals: Vec<f64>,
    pub continuum: bool,
}

impl NashSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Minimum Euclidean distance from `x` to the set.
pub fn distance_to_set(x: &PopulationState, set: &NashSet) -> Result<f64, SimplexError> {
    if set.points.is_empty() {
        return Err(SimplexError::EmptySet);
    }
    Ok(set
        .points
        .iter()
        .map(|y| x.distance(y))
        .fold(f64::INFINITY, f64::min))
}

fn affine_payoff(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(row, bi)| row.iter().zip(x).map(|(aij, xj)| aij * xj).sum::<f64>() + bi)
        .collect()
}

/// Solve the equal-payoff system for one support of an affine game
/// `F(x) = Ax + b`: payoffs equal to a common value `v` on the support, zero
/// mass off it, total mass one. Returns `None` when the system is singular.
pub(crate) fn solve_support_system(
    a: &[Vec<f64>],
    b: &[f64],
    support: &[usize],
) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let k = support.len();
    // Unknowns: x on the support (k of them) followed by the common payoff v.
    let mut m = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for (row, &i) in support.iter().enumerate() {
        for (col, &j) in support.iter().enumerate() {
            m[(row, col)] = a[i][j];
        }
        m[(row, k)] = -1.0;
        rhs[row] = -b[i];
    }
    for col in 0..k {
        m[(k, col)] = 1.0;
    }
    rhs[k] = 1.0;
    let solution = m.clone().lu().solve(&rhs)?;
    // An LU solve of a numerically singular system can "succeed" with a
    // garbage solution; verify the residual before trusting it.
    let residual = (&m * &solution - &rhs).amax();
    let scale = m.amax().max(1.0);
    if !solution.iter().all(|e| e.is_finite()) || residual > 1e-9 * scale {
        return None;
    }
    let mut x = vec![0.0; n];
    for (col, &j) in support.iter().enumerate() {
        x[j] = solution[col];
    }
    Some((x, solution[k]))
}

/// Enumerate Nash equilibria of the affine game `F(x) = Ax + b` over all
/// nonempty supports. For each support the equal-payoff system is solved;
/// feasible solutions (nonnegative on the support, no profitable deviation
/// off it within `tol`) are kept. Singular supports that carry a solution
/// continuum are represented by their face barycenter when that barycenter
/// is itself an equilibrium, and the result is flagged `continuum`.
pub fn nash_equilibria_affine(
    a: &[Vec<f64>],
    b: &[f64],
    tol: f64,
) -> Result<NashSet, SimplexError> {
    let n = b.len();
    if n < 2 {
        return Err(SimplexError::InvalidState(format!(
            "need at least 2 strategies, got {n}"
        )));
    }
    if n > MAX_ENUM_STRATEGIES {
        return Err(SimplexError::TooManyStrategies(n));
    }
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(SimplexError::DimensionMismatch {
            left: a.len(),
            right: n,
        });
    }

    let mut points: Vec<PopulationState> = Vec::new();
    let mut residuals: Vec<f64> = Vec::new();
    let mut continuum = false;

    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let candidate = match solve_support_system(a, b, &support) {
            Some((x, v)) => {
                if support.iter().any(|&i| x[i] < -tol) {
                    continue;
                }
                let off_support_ok = (0..n)
                    .filter(|i| !support.contains(i))
                    .all(|i| affine_payoff(a, b, &x)[i] <= v + tol);
                if !off_support_ok {
                    continue;
                }
                x
            }
            None => {
                // Singular equal-payoff system: the support may carry a
                // solution subspace. Report its barycenter when that point is
                // an equilibrium; otherwise skip the support.
                let bary = PopulationState::face_barycenter(n, &support);
                let p = PayoffVector::from_trusted(affine_payoff(a, b, bary.entries()));
                if !is_best_response(&bary, &p, tol)? {
                    log::debug!(
                        "singular support system {support:?} without equilibrium barycenter; skipped"
                    );
                    continue;
                }
                continuum = true;
                bary.entries().to_vec()
            }
        };

        let state = project_to_simplex(&candidate, tol.max(DEFAULT_DRIFT_BOUND))?;
        if points.iter().any(|kept| kept.distance(&state) <= DEDUP_RADIUS) {
            continue;
        }
        let p = PayoffVector::from_trusted(affine_payoff(a, b, state.entries()));
        let violation = p.max_entry() - state.average_payoff(&p);
        points.push(state);
        residuals.push(violation.max(0.0));
    }

    Ok(NashSet {
        points,
        residuals,
        continuum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn projection_repairs_small_sum_drift() {
        let x = project_to_simplex(&[0.333_333_4, 0.333_333_4, 0.333_333_4], 1e-6).unwrap();
        for e in x.entries() {
            assert_close(*e, 1.0 / 3.0, 1e-7);
        }
        let sum: f64 = x.entries().iter().sum();
        assert_close(sum, 1.0, SUM_TOL);
    }

    #[test]
    fn projection_leaves_valid_points_unchanged() {
        let x = project_to_simplex(&[0.5, 0.5, 0.0], 1e-6).unwrap();
        assert_eq!(x.entries(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn projection_clips_negative_rounding() {
        let x = project_to_simplex(&[1.0 + 1e-9, -1e-9, 0.0], 1e-6).unwrap();
        assert!(x.entries().iter().all(|&e| e >= 0.0));
        let sum: f64 = x.entries().iter().sum();
        assert_close(sum, 1.0, SUM_TOL);
    }

    #[test]
    fn projection_rejects_gross_drift() {
        let err = project_to_simplex(&[0.7, 0.7, 0.0], 1e-6).unwrap_err();
        assert!(matches!(err, SimplexError::DriftExceeded { .. }));
        let err = project_to_simplex(&[f64::NAN, 0.5, 0.5], 1e-6).unwrap_err();
        assert!(matches!(err, SimplexError::DriftExceeded { .. }));
    }

    #[test]
    fn projection_is_idempotent() {
        let raw = [0.2, 0.30000000004, 0.5];
        let once = project_to_simplex(&raw, 1e-6).unwrap();
        let twice = project_to_simplex(once.entries(), 1e-6).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn excess_payoff_at_vertex_keeps_gaps() {
        let x = PopulationState::vertex(3, 0);
        let p = PayoffVector::new(vec![1.0, 4.0, 2.0]).unwrap();
        let hat = excess_payoff(&x, &p).unwrap();
        assert_eq!(hat.entries(), &[0.0, 3.0, 1.0]);
    }

    #[test]
    fn excess_payoff_at_uniform_subtracts_mean() {
        let x = PopulationState::uniform(3);
        let p = PayoffVector::new(vec![3.0, -1.0, 0.0]).unwrap();
        let hat = excess_payoff(&x, &p).unwrap();
        let expected = [3.0 - 2.0 / 3.0, -1.0 - 2.0 / 3.0, -2.0 / 3.0];
        for (got, want) in hat.entries().iter().zip(expected) {
            assert_close(*got, want, 1e-12);
        }
        // x' p_hat = 0 up to rounding.
        let dot: f64 = hat
            .entries()
            .iter()
            .zip(x.entries())
            .map(|(h, xi)| h * xi)
            .sum();
        assert_close(dot, 0.0, 1e-12);
    }

    #[test]
    fn best_response_set_handles_ties() {
        let p = PayoffVector::new(vec![0.0, 1.0, 1.0 - 1e-12]).unwrap();
        assert_eq!(best_response_set(&p, 1e-9), vec![1, 2]);
        let p = PayoffVector::new(vec![5.0, 1.0, 1.0]).unwrap();
        assert_eq!(best_response_set(&p, 1e-9), vec![0]);
    }

    #[test]
    fn best_response_predicate() {
        let p = PayoffVector::new(vec![0.0, 1.0, 0.5]).unwrap();
        assert!(is_best_response(&PopulationState::vertex(3, 1), &p, 1e-9).unwrap());
        assert!(!is_best_response(&PopulationState::uniform(3), &p, 1e-9).unwrap());
        // Mass split over tied maximizers is still a best response.
        let tied = PayoffVector::new(vec![1.0, 1.0, 0.0]).unwrap();
        let x = PopulationState::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(is_best_response(&x, &tied, 1e-9).unwrap());
    }

    #[test]
    fn unique_interior_equilibrium_of_crowding_game() {
        // F_i(x) = 1 - x_i: strictly stable, unique equilibrium at uniform.
        let a = vec![
            vec![-1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, -1.0],
        ];
        let b = vec![1.0, 1.0, 1.0];
        let ne = nash_equilibria_affine(&a, &b, 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(!ne.continuum);
        assert!(ne.points[0].distance(&PopulationState::uniform(3)) < 1e-12);
        assert!(ne.residuals[0] <= 1e-12);
    }

    #[test]
    fn dominant_strategy_equilibrium() {
        // F = b constant with a strict maximum at strategy 1: unique vertex.
        let a = vec![vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        let b = vec![1.0, 0.0, 0.0];
        let ne = nash_equilibria_affine(&a, &b, 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert_eq!(ne.points[0].entries(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_game_reports_continuum_barycenters() {
        // Every point is an equilibrium; enumeration reports the 7 support
        // barycenters and flags the continuum.
        let a = vec![vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]];
        let b = vec![0.0; 3];
        let ne = nash_equilibria_affine(&a, &b, 1e-9).unwrap();
        assert_eq!(ne.len(), 7);
        assert!(ne.continuum);
    }

    #[test]
    fn rock_paper_scissors_unique_mixed_equilibrium() {
        let a = vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ];
        let b = vec![0.0; 3];
        let ne = nash_equilibria_affine(&a, &b, 1e-9).unwrap();
        assert_eq!(ne.len(), 1);
        assert!(ne.points[0].distance(&PopulationState::uniform(3)) < 1e-12);
    }

    #[test]
    fn too_many_strategies_is_rejected() {
        let n = MAX_ENUM_STRATEGIES + 1;
        let a = vec![vec![0.0; n]; n];
        let b = vec![0.0; n];
        assert!(matches!(
            nash_equilibria_affine(&a, &b, 1e-9),
            Err(SimplexError::TooManyStrategies(_))
        ));
    }

    #[test]
    fn distances_to_sets() {
        let uniform = PopulationState::uniform(3);
        let set = NashSet {
            points: vec![uniform.clone()],
            residuals: vec![0.0],
            continuum: false,
        };
        assert_close(distance_to_set(&uniform, &set).unwrap(), 0.0, 1e-15);
        let vertex = PopulationState::vertex(3, 0);
        assert_close(
            distance_to_set(&vertex, &set).unwrap(),
            (2.0f64 / 3.0).sqrt(),
            1e-12,
        );
        let x = PopulationState::new(vec![0.4, 0.3, 0.3]).unwrap();
        assert_close(distance_to_set(&x, &set).unwrap(), 0.081_649_658, 1e-9);
        let empty = NashSet {
            points: vec![],
            residuals: vec![],
            continuum: false,
        };
        assert!(matches!(
            distance_to_set(&x, &empty),
            Err(SimplexError::EmptySet)
        ));
    }

    #[test]
    fn state_constructor_rejects_bad_input() {
        assert!(PopulationState::new(vec![1.0]).is_err());
        assert!(PopulationState::new(vec![0.5, 0.6]).is_err());
        assert!(PopulationState::new(vec![-0.1, 1.1, 0.0]).is_err());
        assert!(PopulationState::new(vec![0.5, 0.5, f64::NAN]).is_err());
        assert!(PopulationState::new(vec![0.7, 0.3, 0.0]).is_ok());
    }
}
