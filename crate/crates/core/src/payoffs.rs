//! Payoff mechanisms: memoryless population games and dynamic payoffs built
//! from a washout (high-pass) filter around a base game.
//!
//! The dynamic mechanism integrates
//!
//! ```text
//! q_dot = lambda (A x + b - q),        q(0) = 0
//! p     = F(x) + k lambda (A x + b - q)
//! ```
//!
//! so the payoff perturbation is `k` times the filter velocity: it washes
//! out exponentially whenever `x` settles, leaving the stationary game `F`.
//! Stability of the closed loop requires the filter gain to act dissipatively,
//! which for this family is exactly `k A` negative semidefinite.

use crate::simplex::{solve_support_system, PayoffVector, PopulationState, SimplexError};
use nalgebra::DMatrix;
use std::sync::Arc;
use thiserror::Error;

/// Matrices must be symmetric within this tolerance to carry a potential.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalue tolerance for the `k A` negative-semidefiniteness check.
pub const EIGENVALUE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PayoffError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no potential available for this game")]
    NoPotentialAvailable,
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Payoff map of a free-form game.
pub type PayoffFn = Arc<dyn Fn(&PopulationState) -> PayoffVector + Send + Sync>;
/// Scalar potential attached to a free-form game.
pub type PotentialFn = Arc<dyn Fn(&PopulationState) -> f64 + Send + Sync>;

#[derive(Clone)]
enum GameForm {
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    Custom {
        name: String,
        payoff: PayoffFn,
    },
}

impl std::fmt::Debug for GameForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GameForm::Affine { matrix, offset } => f
                .debug_struct("Affine")
                .field("matrix", matrix)
                .field("offset", offset)
                .finish(),
            GameForm::Custom { name, .. } => {
                f.debug_struct("Custom").field("name", name).finish()
            }
        }
    }
}

#[derive(Clone)]
enum Potential {
    /// `f(x) = x'Ax/2 + b'x + shift`, shifted so `min_X f = 0`; `range` is
    /// `max_X f`.
    AffineQuadratic { shift: f64, range: f64 },
    Custom(PotentialFn),
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::AffineQuadratic { shift, range } => f
                .debug_struct("AffineQuadratic")
                .field("shift", shift)
                .field("range", range)
                .finish(),
            Potential::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A population game with payoffs depending on the current state only.
#[derive(Debug, Clone)]
pub struct MemorylessGame {
    n: usize,
    form: GameForm,
    potential: Option<Potential>,
    payoff_bound: f64,
}

fn validate_affine(matrix: &[Vec<f64>], offset: &[f64]) -> Result<usize, PayoffError> {
    let n = offset.len();
    if n < 2 {
        return Err(PayoffError::InvalidMechanism(format!(
            "need at least 2 strategies, got {n}"
        )));
    }
    if matrix.len() != n || matrix.iter().any(|row| row.len() != n) {
        return Err(PayoffError::DimensionMismatch {
            left: matrix.len(),
            right: n,
        });
    }
    let finite = matrix.iter().flatten().all(|v| v.is_finite())
        && offset.iter().all(|v| v.is_finite());
    if !finite {
        return Err(PayoffError::InvalidMechanism(
            "non-finite game coefficient".into(),
        ));
    }
    Ok(n)
}

fn is_symmetric(matrix: &[Vec<f64>]) -> bool {
    let n = matrix.len();
    (0..n).all(|i| (0..n).all(|j| (matrix[i][j] - matrix[j][i]).abs() <= SYMMETRY_TOL))
}

fn affine_eval(matrix: &[Vec<f64>], offset: &[f64], x: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .zip(offset)
        .map(|(row, b)| row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + b)
        .collect()
}

/// Unshifted quadratic potential `x'Ax/2 + b'x`.
fn quadratic_value(matrix: &[Vec<f64>], offset: &[f64], x: &[f64]) -> f64 {
    let mut quad = 0.0;
    for (i, row) in matrix.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            quad += x[i] * a * x[j];
        }
    }
    0.5 * quad + offset.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>()
}

/// Exact extrema of the quadratic over the simplex: candidates are the
/// stationary points of every face (the same equal-gradient systems used for
/// equilibrium enumeration) plus all vertices, which are the singleton faces.
fn quadratic_extrema(matrix: &[Vec<f64>], offset: &[f64]) -> (f64, f64) {
    let n = offset.len();
    let rows: Vec<Vec<f64>> = matrix.to_vec();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if let Some((x, _)) = solve_support_system(&rows, offset, &support) {
            if support.iter().all(|&i| x[i] >= -1e-12) {
                let clamped: Vec<f64> = x.iter().map(|&e| e.max(0.0)).collect();
                let value = quadratic_value(matrix, offset, &clamped);
                lo = lo.min(value);
                hi = hi.max(value);
            }
        }
    }
    (lo, hi)
}

/// Componentwise supremum of `|F|` over the simplex for an affine map:
/// attained at vertices.
fn affine_sup_bound(matrix: &[Vec<f64>], offset: &[f64]) -> f64 {
    let mut bound: f64 = 0.0;
    for (row, b) in matrix.iter().zip(offset) {
        for a in row {
            bound = bound.max((a + b).abs());
        }
    }
    bound
}

impl MemorylessGame {
    /// Affine game `F(x) = Ax + b` (`matrix` row-major). A quadratic
    /// potential is attached automatically when the matrix is symmetric.
    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self, PayoffError> {
        let n = validate_affine(&matrix, &offset)?;
        let payoff_bound = affine_sup_bound(&matrix, &offset);
        let potential = if is_symmetric(&matrix) {
            let (lo, hi) = quadratic_extrema(&matrix, &offset);
            Some(Potential::AffineQuadratic {
                shift: -lo,
                range: hi - lo,
            })
        } else {
            None
        };
        Ok(Self {
            n,
            form: GameForm::Affine { matrix, offset },
            potential,
            payoff_bound,
        })
    }

    /// Free-form game. `payoff_bound` must dominate `sup_X |F_i(x)|`; the
    /// optional potential closure is trusted to be a potential for `payoff`.
    pub fn custom(
        n: usize,
        name: impl Into<String>,
        payoff: PayoffFn,
        potential: Option<PotentialFn>,
        payoff_bound: f64,
    ) -> Result<Self, PayoffError> {
        if n < 2 {
            return Err(PayoffError::InvalidMechanism(format!(
                "need at least 2 strategies, got {n}"
            )));
        }
        if !(payoff_bound.is_finite() && payoff_bound >= 0.0) {
            return Err(PayoffError::InvalidMechanism(
                "custom games need a finite nonnegative payoff bound".into(),
            ));
        }
        Ok(Self {
            n,
            form: GameForm::Custom {
                name: name.into(),
                payoff,
            },
            potential: potential.map(Potential::Custom),
            payoff_bound,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        match &self.form {
            GameForm::Affine { .. } => "affine",
            GameForm::Custom { name, .. } => name,
        }
    }

    /// Affine coefficients `(A, b)` when this game is affine.
    pub fn affine_parts(&self) -> Option<(&[Vec<f64>], &[f64])> {
        match &self.form {
            GameForm::Affine { matrix, offset } => Some((matrix, offset)),
            GameForm::Custom { .. } => None,
        }
    }

    pub fn evaluate(&self, x: &PopulationState) -> Result<PayoffVector, PayoffError> {
        if x.len() != self.n {
            return Err(PayoffError::DimensionMismatch {
                left: x.len(),
                right: self.n,
            });
        }
        match &self.form {
            GameForm::Affine { matrix, offset } => Ok(PayoffVector::new(affine_eval(
                matrix,
                offset,
                x.entries(),
            ))?),
            GameForm::Custom { payoff, .. } => Ok(payoff(x)),
        }
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    /// Potential value at `x`. Affine potentials are shifted so their
    /// minimum over the simplex is zero; only differences of the potential
    /// carry meaning.
    pub fn potential_value(&self, x: &PopulationState) -> Result<f64, PayoffError> {
        if x.len() != self.n {
            return Err(PayoffError::DimensionMismatch {
                left: x.len(),
                right: self.n,
            });
        }
        match (&self.potential, &self.form) {
            (Some(Potential::AffineQuadratic { shift, .. }), GameForm::Affine { matrix, offset }) => {
                Ok(quadratic_value(matrix, offset, x.entries()) + shift)
            }
            (Some(Potential::Custom(f)), _) => Ok(f(x)),
            _ => Err(PayoffError::NoPotentialAvailable),
        }
    }

    /// `max_X f` for the shifted potential (`min_X f = 0`), when known.
    pub fn potential_range(&self) -> Option<f64> {
        match &self.potential {
            Some(Potential::AffineQuadratic { range, .. }) => Some(*range),
            _ => None,
        }
    }

    /// Upper bound on `sup_X |F_i(x)|`.
    pub fn payoff_bound(&self) -> f64 {
        self.payoff_bound
    }
}

/// Check `f(end) - f(start) = integral of F . dx` along a sampled path by
/// trapezoid quadrature. Paths should be densely sampled (piecewise-linear
/// interpolation is what gets integrated).
pub fn verify_potential_identity(
    game: &MemorylessGame,
    path: &[PopulationState],
    quad_tol: f64,
) -> Result<bool, PayoffError> {
    if !game.has_potential() {
        return Err(PayoffError::NoPotentialAvailable);
    }
    if path.len() < 2 {
        return Err(PayoffError::InvalidMechanism(
            "path needs at least 2 samples".into(),
        ));
    }
    let mut line_integral = 0.0;
    let mut prev = game.evaluate(&path[0])?;
    for window in path.windows(2) {
        let next = game.evaluate(&window[1])?;
        for ((p0, p1), (x0, x1)) in prev
            .entries()
            .iter()
            .zip(next.entries())
            .zip(window[0].entries().iter().zip(window[1].entries()))
        {
            line_integral += 0.5 * (p0 + p1) * (x1 - x0);
        }
        prev = next;
    }
    let delta = game.potential_value(path.last().unwrap())? - game.potential_value(&path[0])?;
    Ok((delta - line_integral).abs() <= quad_tol)
}

/// First-order washout filter block: state `q` tracking `A x + b` at rate
/// `lambda`, injecting `k * q_dot` into payoffs.
#[derive(Debug, Clone)]
pub struct WashoutFilter {
    lambda: f64,
    k: f64,
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
    state: Vec<f64>,
}

impl WashoutFilter {
    /// Requires `lambda > 0` and a symmetric matrix. Dissipativity of the
    /// loop (`k A` negative semidefinite) is deliberately *not* checked here
    /// so that non-dissipative filters can be analyzed; building a
    /// [`PayoffMechanism`] enforces it.
    pub fn new(
        lambda: f64,
        k: f64,
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    ) -> Result<Self, PayoffError> {
        let n = validate_affine(&matrix, &offset)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(PayoffError::InvalidMechanism(format!(
                "filter rate lambda must be positive, got {lambda}"
            )));
        }
        if !k.is_finite() {
            return Err(PayoffError::InvalidMechanism("non-finite gain k".into()));
        }
        if !is_symmetric(&matrix) {
            return Err(PayoffError::InvalidMechanism(
                "filter matrix must be symmetric".into(),
            ));
        }
        Ok(Self {
            lambda,
            k,
            matrix,
            offset,
            state: vec![0.0; n],
        })
    }

    pub fn n(&self) -> usize {
        self.offset.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, q: Vec<f64>) -> Result<(), PayoffError> {
        if q.len() != self.n() {
            return Err(PayoffError::DimensionMismatch {
                left: q.len(),
                right: self.n(),
            });
        }
        self.state = q;
        Ok(())
    }

    /// Filter input `A x + b`.
    pub fn drive(&self, x: &PopulationState) -> Vec<f64> {
        affine_eval(&self.matrix, &self.offset, x.entries())
    }

    /// Matrix infinity norm of `A` (max absolute row sum).
    fn matrix_inf_norm(&self) -> f64 {
        self.matrix
            .iter()
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn offset_inf_norm(&self) -> f64 {
        self.offset.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Largest eigenvalue of the symmetric part of `k * A`.
fn max_eigenvalue_of_gain(k: f64, matrix: &[Vec<f64>]) -> f64 {
    let n = matrix.len();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * k * (matrix[i][j] + matrix[j][i]));
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone)]
enum MechanismKind {
    Memoryless(MemorylessGame),
    Washout {
        base: MemorylessGame,
        filter: WashoutFilter,
    },
}

/// A payoff mechanism: either a memoryless game or a base game perturbed by
/// a washout filter. Owns the filter state; the integrator advances it.
#[derive(Debug, Clone)]
pub struct PayoffMechanism {
    kind: MechanismKind,
    payoff_bound: f64,
}

impl PayoffMechanism {
    pub fn memoryless(game: MemorylessGame) -> Self {
        let payoff_bound = game.payoff_bound();
        Self {
            kind: MechanismKind::Memoryless(game),
            payoff_bound,
        }
    }

    /// Dynamic mechanism around `base`. Enforces the dissipativity condition
    /// `k A` negative semidefinite (within [`EIGENVALUE_TOL`]).
    pub fn washout(base: MemorylessGame, filter: WashoutFilter) -> Result<Self, PayoffError> {
        if base.n() != filter.n() {
            return Err(PayoffError::DimensionMismatch {
                left: base.n(),
                right: filter.n(),
            });
        }
        let max_eig = max_eigenvalue_of_gain(filter.k(), filter.matrix());
        if max_eig > EIGENVALUE_TOL {
            return Err(PayoffError::InvalidMechanism(format!(
                "k*A must be negative semidefinite; largest eigenvalue {max_eig:.3e}"
            )));
        }
        // |perturbation| = |k lambda (Ax + b - q)| with q a convex mix of the
        // drive history and 0; bound both terms by the drive bound.
        let drive_bound = filter.matrix_inf_norm() + filter.offset_inf_norm();
        let payoff_bound =
            base.payoff_bound() + (filter.k() * filter.lambda()).abs() * 2.0 * drive_bound;
        Ok(Self {
            kind: MechanismKind::Washout { base, filter },
            payoff_bound,
        })
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            MechanismKind::Memoryless(game) => game.n(),
            MechanismKind::Washout { base, .. } => base.n(),
        }
    }

    /// Dimension of the internal mechanism state (0 when memoryless).
    pub fn state_dim(&self) -> usize {
        match &self.kind {
            MechanismKind::Memoryless(_) => 0,
            MechanismKind::Washout { filter, .. } => filter.n(),
        }
    }

    pub fn filter(&self) -> Option<&WashoutFilter> {
        match &self.kind {
            MechanismKind::Memoryless(_) => None,
            MechanismKind::Washout { filter, .. } => Some(filter),
        }
    }

    /// Current internal state.
    pub fn state(&self) -> &[f64] {
        match &self.kind {
            MechanismKind::Memoryless(_) => &[],
            MechanismKind::Washout { filter, .. } => filter.state(),
        }
    }

    /// Overwrite the internal state (e.g. to start a filter pre-settled).
    pub fn set_state(&mut self, q: Vec<f64>) -> Result<(), PayoffError> {
        match &mut self.kind {
            MechanismKind::Memoryless(_) => {
                if q.is_empty() {
                    Ok(())
                } else {
                    Err(PayoffError::DimensionMismatch {
                        left: q.len(),
                        right: 0,
                    })
                }
            }
            MechanismKind::Washout { filter, .. } => filter.set_state(q),
        }
    }

    /// Payoffs at `x` with the stored internal state.
    pub fn evaluate(&self, x: &PopulationState) -> Result<PayoffVector, PayoffError> {
        self.evaluate_at(x, self.state())
    }

    /// Payoffs at `x` with an explicit internal state `q` (used by the
    /// integrator's intermediate stages).
    pub fn evaluate_at(&self, x: &PopulationState, q: &[f64]) -> Result<PayoffVector, PayoffError> {
        match &self.kind {
            MechanismKind::Memoryless(game) => game.evaluate(x),
            MechanismKind::Washout { base, filter } => {
                if q.len() != filter.n() {
                    return Err(PayoffError::DimensionMismatch {
                        left: q.len(),
                        right: filter.n(),
                    });
                }
                let f = base.evaluate(x)?;
                let drive = filter.drive(x);
                let kl = filter.k() * filter.lambda();
                let entries = f
                    .entries()
                    .iter()
                    .zip(drive.iter().zip(q))
                    .map(|(fi, (di, qi))| fi + kl * (di - qi))
                    .collect();
                Ok(PayoffVector::new(entries)?)
            }
        }
    }

    /// Time derivative of the internal state at `(x, q)`; empty when
    /// memoryless.
    pub fn state_derivative_at(&self, x: &PopulationState, q: &[f64]) -> Vec<f64> {
        match &self.kind {
            MechanismKind::Memoryless(_) => Vec::new(),
            MechanismKind::Washout { filter, .. } => {
                let drive = filter.drive(x);
                drive
                    .iter()
                    .zip(q)
                    .map(|(di, qi)| filter.lambda() * (di - qi))
                    .collect()
            }
        }
    }

    /// Time derivative of the internal state with the stored state.
    pub fn state_derivative(&self, x: &PopulationState) -> Vec<f64> {
        self.state_derivative_at(x, self.state())
    }

    /// The game payoffs settle to whenever the population settles.
    pub fn stationary_game(&self) -> &MemorylessGame {
        match &self.kind {
            MechanismKind::Memoryless(game) => game,
            MechanismKind::Washout { base, .. } => base,
        }
    }

    /// Upper bound on `sup |p_i(t)|` along any closed-loop run.
    pub fn payoff_bound(&self) -> f64 {
        self.payoff_bound
    }

    /// `2 (sup |F| + max f)` when the stationary game carries a computed
    /// potential: the constructive bound on how far the path integral of
    /// `q_dot' x` can dip for the memoryless part of the loop.
    pub fn ccw_bound_estimate(&self) -> Option<f64> {
        let game = self.stationary_game();
        game.potential_range()
            .map(|range| 2.0 * (game.payoff_bound() + range))
    }
}

/// The crowding game `F_i(x) = 1 - x_i`: strictly stable with potential
/// `1 - |x|^2 / 2` and unique equilibrium at uniform.
pub fn crowding_game(n: usize) -> MemorylessGame {
    let matrix = (0..n)
        .map(|i| (0..n).map(|j| if i == j { -1.0 } else { 0.0 }).collect())
        .collect();
    MemorylessGame::affine(matrix, vec![1.0; n]).expect("valid")
}
