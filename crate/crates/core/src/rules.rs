//! Learning rules and the population vector field they induce.
//!
//! A rule is an `n x n` matrix of nonnegative switch rates `T_ij(x, p)`:
//! the rate at which agents playing strategy `i` revise toward strategy `j`.
//! The induced mean dynamic is
//!
//! ```text
//! V_i = sum_j ( x_j T_ji - x_i T_ij )
//! ```
//!
//! Three canonical families are provided, plus free-form user rules:
//! * imitation:            `T_ij = x_j * psi_ij(p)`         (e.g. replicator)
//! * pairwise comparison:  `T_ij = phi_ij(p)`               (e.g. Smith)
//! * excess payoff:        `T_ij = phi_j(p_hat)`, column-constant (e.g. BNN)
//!
//! Hybrids are conic combinations of primitives. A valid hybrid must carry
//! positive comparison-or-excess mass: pure imitation can stall at
//! non-equilibrium rest points (an extinct strategy is never re-discovered),
//! so specs without it are rejected unless explicitly constructed unchecked.

use crate::simplex::{excess_payoff, PayoffVector, PopulationState, SimplexError};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Correlations below this count as zero when checking stationarity.
pub const CORRELATION_ZERO_TOL: f64 = 1e-9;

/// Positive-correlation samples must not dip below this floor.
pub const PC_NEGATIVE_TOL: f64 = -1e-12;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("invalid rule parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid rule spec: {0}")]
    InvalidRuleSpec(String),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
}

/// Dense nonnegative switch-rate matrix, row = current strategy,
/// column = candidate strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRateMatrix {
    n: usize,
    rates: Vec<f64>,
}

impl SwitchRateMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            rates: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.rates[i * self.n + j] = value;
    }

    /// `self += weight * other`.
    pub fn accumulate(&mut self, weight: f64, other: &SwitchRateMatrix) {
        assert_eq!(self.n, other.n, "rate matrix dimensions must match");
        for (dst, src) in self.rates.iter_mut().zip(&other.rates) {
            *dst += weight * src;
        }
    }

    pub fn min_entry(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Imitation primitives: `T_ij = x_j * psi_ij(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IRule {
    /// `psi_ij = max(p_j - p_i, 0)` — pairwise proportional imitation.
    Replicator,
    /// `psi_ij = max(p_j - p_i, 0)^2` — squared-gap imitation.
    SquaredComparison,
}

/// Pairwise-comparison primitives: `T_ij = phi_ij(p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoRule {
    /// `phi_ij = max(p_j - p_i, 0)`.
    Smith,
    /// `phi_ij = (j+1) * (exp(max(p_j - p_i, 0)) - 1)`, the candidate
    /// strategy's 1-based index scaling an exponential gap response.
    TargetIndexExp,
}

/// Excess-payoff primitives: `T_ij = phi_j(p_hat)`, identical down each column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpRule {
    /// `phi_j = max(p_hat_j, 0)` — Brown–von Neumann–Nash.
    Bnn,
    /// `phi_j = max(p_hat_j,0)^k / (sum_i max(p_hat_i,0)^k + eps^k)`,
    /// a smoothed approximate-best-response; `k >= 1`, `eps in (0,1)`.
    Abr { k: u32, eps: f64 },
    /// `phi_j = max(p_hat_j, 0)^2`.
    SquaredExcess,
}

/// Switch-rate callback of a [`UserRule`].
pub type RateFn = Arc<dyn Fn(&PopulationState, &PayoffVector) -> SwitchRateMatrix + Send + Sync>;

/// Free-form switch-rate function supplied by the caller. Trusted: the
/// library does not verify that it satisfies positive correlation.
#[derive(Clone)]
pub struct UserRule {
    pub name: String,
    pub rates: RateFn,
}

impl fmt::Debug for UserRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserRule").field("name", &self.name).finish()
    }
}

/// A hybrid learning rule: weighted primitives per class plus an optional
/// weighted user rule. Weights are conic (nonnegative, not all zero) and the
/// total comparison + excess weight must be positive unless the value was
/// built with [`RuleSpec::new_unchecked`].
#[derive(Debug, Clone)]
pub struct RuleSpec {
    imitation: Vec<(f64, IRule)>,
    comparison: Vec<(f64, CoRule)>,
    excess: Vec<(f64, EpRule)>,
    user: Option<(f64, UserRule)>,
    allow_pure_imitation: bool,
}

impl RuleSpec {
    pub fn new(
        imitation: Vec<(f64, IRule)>,
        comparison: Vec<(f64, CoRule)>,
        excess: Vec<(f64, EpRule)>,
        user: Option<(f64, UserRule)>,
    ) -> Result<Self, RuleError> {
        let spec = Self {
            imitation,
            comparison,
            excess,
            user,
            allow_pure_imitation: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Build a spec without the positive comparison/excess-mass requirement.
    /// Needed to study deficient rules (e.g. pure imitation) whose rest
    /// points need not be equilibria; simulation and certification accept
    /// such specs but certification will report the deficiency.
    pub fn new_unchecked(
        imitation: Vec<(f64, IRule)>,
        comparison: Vec<(f64, CoRule)>,
        excess: Vec<(f64, EpRule)>,
        user: Option<(f64, UserRule)>,
    ) -> Result<Self, RuleError> {
        let spec = Self {
            imitation,
            comparison,
            excess,
            user,
            allow_pure_imitation: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), RuleError> {
        let all_weights = self
            .imitation
            .iter()
            .map(|(w, _)| *w)
            .chain(self.comparison.iter().map(|(w, _)| *w))
            .chain(self.excess.iter().map(|(w, _)| *w))
            .chain(self.user.iter().map(|(w, _)| *w));
        let mut total = 0.0;
        for w in all_weights {
            if !w.is_finite() || w < 0.0 {
                return Err(RuleError::InvalidParameter(format!(
                    "rule weights must be finite and nonnegative, got {w}"
                )));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err(RuleError::InvalidRuleSpec(
                "all rule weights are zero".into(),
            ));
        }
        for (_, rule) in &self.excess {
            if let EpRule::Abr { k, eps } = rule {
                if *k < 1 {
                    return Err(RuleError::InvalidParameter(
                        "abr exponent k must be >= 1".into(),
                    ));
                }
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(RuleError::InvalidParameter(format!(
                        "abr eps must lie in (0,1), got {eps}"
                    )));
                }
            }
        }
        if !self.allow_pure_imitation && self.alpha_comparison() + self.alpha_excess() <= 0.0 {
            return Err(RuleError::InvalidRuleSpec(
                "hybrid cone constraint violated: alpha_co + alpha_ep must be positive \
                 (pure imitation can stall at non-equilibrium rest points)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn alpha_imitation(&self) -> f64 {
        self.imitation.iter().map(|(w, _)| w).sum()
    }

    pub fn alpha_comparison(&self) -> f64 {
        self.comparison.iter().map(|(w, _)| w).sum()
    }

    pub fn alpha_excess(&self) -> f64 {
        self.excess.iter().map(|(w, _)| w).sum()
    }

    pub fn alpha_user(&self) -> f64 {
        self.user.as_ref().map(|(w, _)| *w).unwrap_or(0.0)
    }

    pub fn imitation_components(&self) -> &[(f64, IRule)] {
        &self.imitation
    }

    pub fn comparison_components(&self) -> &[(f64, CoRule)] {
        &self.comparison
    }

    pub fn excess_components(&self) -> &[(f64, EpRule)] {
        &self.excess
    }

    pub fn user_component(&self) -> Option<&(f64, UserRule)> {
        self.user.as_ref()
    }

    pub fn is_unchecked(&self) -> bool {
        self.allow_pure_imitation
    }

    // ---- canned specs used across tests, benches and bundled scenarios ----

    pub fn smith() -> Self {
        Self::new(vec![], vec![(1.0, CoRule::Smith)], vec![], None).expect("valid")
    }

    pub fn bnn() -> Self {
        Self::new(vec![], vec![], vec![(1.0, EpRule::Bnn)], None).expect("valid")
    }

    pub fn abr(k: u32, eps: f64) -> Result<Self, RuleError> {
        Self::new(vec![], vec![], vec![(1.0, EpRule::Abr { k, eps })], None)
    }

    /// Polynomial/exponential mixed hybrid: squared-gap imitation (weight 2),
    /// index-scaled exponential comparison (weight 3), squared excess
    /// (weight 4).
    pub fn polynomial_mix() -> Self {
        Self::new(
            vec![(2.0, IRule::SquaredComparison)],
            vec![(3.0, CoRule::TargetIndexExp)],
            vec![(4.0, EpRule::SquaredExcess)],
            None,
        )
        .expect("valid")
    }

    /// Replicator with a small Smith component keeping extinct strategies
    /// reachable.
    pub fn replicator_smith() -> Self {
        Self::new(
            vec![(1.0, IRule::Replicator)],
            vec![(0.01, CoRule::Smith)],
            vec![],
            None,
        )
        .expect("valid")
    }

    /// Smoothed approximate best response with a small Smith component.
    pub fn smith_abr() -> Self {
        Self::new(
            vec![],
            vec![(0.01, CoRule::Smith)],
            vec![(1.0, EpRule::Abr { k: 5, eps: 0.1 })],
            None,
        )
        .expect("valid")
    }

    /// Conic blend `0.2 * polynomial_mix + 3 * replicator_smith +
    /// 40 * smith_abr`, expanded into per-class primitives.
    pub fn composite_mix() -> Self {
        Self::new(
            vec![(3.0, IRule::Replicator), (0.4, IRule::SquaredComparison)],
            vec![(0.43, CoRule::Smith), (0.6, CoRule::TargetIndexExp)],
            vec![
                (0.8, EpRule::SquaredExcess),
                (40.0, EpRule::Abr { k: 5, eps: 0.1 }),
            ],
            None,
        )
        .expect("valid")
    }

    /// Pure replicator, bypassing the hybrid cone constraint. Its rest
    /// points include non-equilibrium vertices; used to exhibit Nash
    /// stationarity failures.
    pub fn pure_replicator_unchecked() -> Self {
        Self::new_unchecked(vec![(1.0, IRule::Replicator)], vec![], vec![], None).expect("valid")
    }
}

#[inline]
fn pos(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn check_dims(x: &PopulationState, p: &PayoffVector) -> Result<usize, RuleError> {
    if x.len() != p.len() {
        return Err(RuleError::Simplex(SimplexError::DimensionMismatch {
            left: x.len(),
            right: p.len(),
        }));
    }
    Ok(x.len())
}

/// Smith rule: `T_ij = max(p_j - p_i, 0)`; population-state independent.
pub fn smith_rates(_x: &PopulationState, p: &PayoffVector) -> SwitchRateMatrix {
    let n = p.len();
    let pe = p.entries();
    let mut m = SwitchRateMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, pos(pe[j] - pe[i]));
        }
    }
    m
}

/// Index-scaled exponential comparison:
/// `T_ij = (j+1) * (exp(max(p_j - p_i, 0)) - 1)`.
pub fn target_index_exp_rates(_x: &PopulationState, p: &PayoffVector) -> SwitchRateMatrix {
    let n = p.len();
    let pe = p.entries();
    let mut m = SwitchRateMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, (j + 1) as f64 * (pos(pe[j] - pe[i]).exp() - 1.0));
        }
    }
    m
}

/// BNN rule: `T_ij = max(p_hat_j, 0)`, identical down each column.
pub fn bnn_rates(x: &PopulationState, p: &PayoffVector) -> Result<SwitchRateMatrix, RuleError> {
    let n = check_dims(x, p)?;
    let hat = excess_payoff(x, p)?;
    let mut m = SwitchRateMatrix::zeros(n);
    for j in 0..n {
        let phi = pos(hat.entries()[j]);
        for i in 0..n {
            m.set(i, j, phi);
        }
    }
    Ok(m)
}

/// Squared-excess rule: `T_ij = max(p_hat_j, 0)^2`, column-constant.
pub fn squared_excess_rates(
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<SwitchRateMatrix, RuleError> {
    let n = check_dims(x, p)?;
    let hat = excess_payoff(x, p)?;
    let mut m = SwitchRateMatrix::zeros(n);
    for j in 0..n {
        let phi = pos(hat.entries()[j]);
        for i in 0..n {
            m.set(i, j, phi * phi);
        }
    }
    Ok(m)
}

/// Smoothed approximate-best-response rule:
/// `T_ij = max(p_hat_j,0)^k / (sum_i max(p_hat_i,0)^k + eps^k)`.
/// Column-constant, entries in `[0, 1)`.
pub fn abr_rates(
    x: &PopulationState,
    p: &PayoffVector,
    k: u32,
    eps: f64,
) -> Result<SwitchRateMatrix, RuleError> {
    if k < 1 {
        return Err(RuleError::InvalidParameter(
            "abr exponent k must be >= 1".into(),
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(RuleError::InvalidParameter(format!(
            "abr eps must lie in (0,1), got {eps}"
        )));
    }
    let n = check_dims(x, p)?;
    let hat = excess_payoff(x, p)?;
    let powers: Vec<f64> = hat
        .entries()
        .iter()
        .map(|&h| pos(h).powi(k as i32))
        .collect();
    let denom: f64 = powers.iter().sum::<f64>() + eps.powi(k as i32);
    let mut m = SwitchRateMatrix::zeros(n);
    for (j, power) in powers.iter().enumerate() {
        let phi = power / denom;
        for i in 0..n {
            m.set(i, j, phi);
        }
    }
    Ok(m)
}

/// Replicator rule: `T_ij = x_j * max(p_j - p_i, 0)`.
pub fn replicator_rates(x: &PopulationState, p: &PayoffVector) -> SwitchRateMatrix {
    let n = p.len();
    let xe = x.entries();
    let pe = p.entries();
    let mut m = SwitchRateMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, xe[j] * pos(pe[j] - pe[i]));
        }
    }
    m
}

/// Squared-gap imitation: `T_ij = x_j * max(p_j - p_i, 0)^2`.
pub fn squared_imitation_rates(x: &PopulationState, p: &PayoffVector) -> SwitchRateMatrix {
    let n = p.len();
    let xe = x.entries();
    let pe = p.entries();
    let mut m = SwitchRateMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let gap = pos(pe[j] - pe[i]);
            m.set(i, j, xe[j] * gap * gap);
        }
    }
    m
}

fn class_rates(
    spec: &RuleSpec,
    x: &PopulationState,
    p: &PayoffVector,
    out: &mut SwitchRateMatrix,
) -> Result<(), RuleError> {
    for (w, rule) in &spec.imitation {
        let m = match rule {
            IRule::Replicator => replicator_rates(x, p),
            IRule::SquaredComparison => squared_imitation_rates(x, p),
        };
        out.accumulate(*w, &m);
    }
    for (w, rule) in &spec.comparison {
        let m = match rule {
            CoRule::Smith => smith_rates(x, p),
            CoRule::TargetIndexExp => target_index_exp_rates(x, p),
        };
        out.accumulate(*w, &m);
    }
    for (w, rule) in &spec.excess {
        let m = match rule {
            EpRule::Bnn => bnn_rates(x, p)?,
            EpRule::Abr { k, eps } => abr_rates(x, p, *k, *eps)?,
            EpRule::SquaredExcess => squared_excess_rates(x, p)?,
        };
        out.accumulate(*w, &m);
    }
    if let Some((w, user)) = &spec.user {
        let m = (user.rates)(x, p);
        if m.n() != x.len() {
            return Err(RuleError::InvalidRuleSpec(format!(
                "user rule '{}' returned a {}x{} matrix for n={}",
                user.name,
                m.n(),
                m.n(),
                x.len()
            )));
        }
        out.accumulate(*w, &m);
    }
    Ok(())
}

/// Total switch rates of a hybrid spec: the weighted sum of its primitives.
pub fn hybrid_rates(
    spec: &RuleSpec,
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<SwitchRateMatrix, RuleError> {
    let n = check_dims(x, p)?;
    let mut out = SwitchRateMatrix::zeros(n);
    class_rates(spec, x, p, &mut out)?;
    Ok(out)
}

/// Population vector field `V` induced by switch rates. Entries sum to zero:
/// mass only moves between strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    velocities: Vec<f64>,
}

impl VectorField {
    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn inf_norm(&self) -> f64 {
        self.velocities.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Mean dynamic from an explicit rate matrix:
/// `V_i = sum_j (x_j T_ji - x_i T_ij)`.
pub fn edm_field_from_rates(x: &PopulationState, rates: &SwitchRateMatrix) -> VectorField {
    let n = x.len();
    assert_eq!(rates.n(), n, "rate matrix dimension must match state");
    let xe = x.entries();
    let mut v = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // Mass flowing i -> j leaves i and arrives at j.
            let flow = xe[i] * rates.get(i, j);
            v[i] -= flow;
            v[j] += flow;
        }
    }
    VectorField { velocities: v }
}

/// Mean dynamic of a hybrid spec at `(x, p)`.
pub fn edm_field(
    spec: &RuleSpec,
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<VectorField, RuleError> {
    Ok(edm_field_from_rates(x, &hybrid_rates(spec, x, p)?))
}

/// Correlation `p'V` between payoffs and motion, from explicit rates.
pub fn correlation_from_rates(
    x: &PopulationState,
    p: &PayoffVector,
    rates: &SwitchRateMatrix,
) -> f64 {
    let v = edm_field_from_rates(x, rates);
    p.entries()
        .iter()
        .zip(v.velocities())
        .map(|(pi, vi)| pi * vi)
        .sum()
}

/// Correlation `p'V` of a hybrid spec at `(x, p)`.
pub fn correlation(
    spec: &RuleSpec,
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<f64, RuleError> {
    let v = edm_field(spec, x, p)?;
    Ok(p
        .entries()
        .iter()
        .zip(v.velocities())
        .map(|(pi, vi)| pi * vi)
        .sum())
}

/// Correlation computed through the pairwise (Tellegen-style) decomposition
///
/// ```text
/// p'V = 1/2 * sum_ij (p_j - p_i)(x_i T_ij - x_j T_ji)
/// ```
///
/// pairing each strategy-pair "voltage" `p_j - p_i` with its net flow.
/// Numerically independent route to [`correlation`]; the two must agree.
pub fn tellegen_decomposition(
    spec: &RuleSpec,
    x: &PopulationState,
    p: &PayoffVector,
) -> Result<f64, RuleError> {
    let rates = hybrid_rates(spec, x, p)?;
    let n = x.len();
    let xe = x.entries();
    let pe = p.entries();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let voltage = pe[j] - pe[i];
            let net_flow = xe[i] * rates.get(i, j) - xe[j] * rates.get(j, i);
            total += voltage * net_flow;
        }
    }
    Ok(0.5 * total)
}
