//! Pointwise certification of learning rules over state/payoff sample
//! batteries: positive correlation (payoff work of the induced field is
//! nonnegative and vanishes only at rest) and Nash stationarity (rest points
//! coincide with best responses).
//!
//! Every battery combines a deterministic grid — vertices and face
//! barycenters paired with zero and indicator payoffs, where exact answers
//! are known — with seeded random samples, so reported violations are
//! reproducible.

use crate::rules::{
    correlation, edm_field, RuleError, RuleSpec, CORRELATION_ZERO_TOL, PC_NEGATIVE_TOL,
};
use crate::sampling::{payoff_vector, seeded_rng, simplex_point};
use crate::simplex::{is_best_response, PayoffVector, PopulationState};

/// Fields slower than this (infinity norm) count as stationary.
pub const SPEED_ZERO_TOL: f64 = 1e-9;
/// Best-response tolerance used by the stationarity check.
pub const BR_TOL: f64 = 1e-9;
/// Payoff entries for random samples are drawn from `[-SCALE, SCALE]`.
const PAYOFF_SCALE: f64 = 1.0;
/// At most this many witnesses are retained per report.
const MAX_WITNESSES: usize = 16;

/// Deterministic state/payoff pairs: every vertex and every face barycenter,
/// each paired with the zero payoff and with every indicator payoff.
pub fn special_battery(n: usize) -> Vec<(PopulationState, PayoffVector)> {
    assert!((2..=16).contains(&n), "battery supports 2..=16 strategies");
    let mut states = Vec::new();
    for i in 0..n {
        states.push(PopulationState::vertex(n, i));
    }
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if support.len() >= 2 {
            states.push(PopulationState::face_barycenter(n, &support));
        }
    }
    let mut payoffs = vec![PayoffVector::new(vec![0.0; n]).expect("zero payoff")];
    for mask in 1u32..(1 << n) {
        let entries: Vec<f64> = (0..n)
            .map(|i| if mask & (1 << i) != 0 { 1.0 } else { 0.0 })
            .collect();
        payoffs.push(PayoffVector::new(entries).expect("indicator payoff"));
    }
    let mut pairs = Vec::with_capacity(states.len() * payoffs.len());
    for x in &states {
        for p in &payoffs {
            pairs.push((x.clone(), p.clone()));
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcViolationKind {
    /// Correlation fell below the negative floor.
    NegativeCorrelation,
    /// Correlation is numerically zero while the field is not.
    ZeroCorrelationNonzeroField,
    /// The field is numerically zero while the correlation is not.
    ZeroFieldNonzeroCorrelation,
}

#[derive(Debug, Clone)]
pub struct PcViolation {
    pub state: PopulationState,
    pub payoff: PayoffVector,
    pub correlation: f64,
    pub speed: f64,
    pub kind: PcViolationKind,
}

#[derive(Debug, Clone)]
pub struct PcReport {
    pub samples: usize,
    pub min_correlation: f64,
    pub violation_count: usize,
    /// First [`MAX_WITNESSES`] violations, in battery order.
    pub violations: Vec<PcViolation>,
    pub pass: bool,
}

/// Check positive correlation on the special battery plus `random_samples`
/// seeded random pairs: correlation at least `-1e-12` everywhere, and
/// correlation below `1e-9` exactly where the field speed is below `1e-9`.
pub fn pc_sample(
    spec: &RuleSpec,
    n: usize,
    random_samples: usize,
    seed: u64,
) -> Result<PcReport, RuleError> {
    let mut report = PcReport {
        samples: 0,
        min_correlation: f64::INFINITY,
        violation_count: 0,
        violations: Vec::new(),
        pass: true,
    };
    let mut check = |x: &PopulationState, p: &PayoffVector| -> Result<(), RuleError> {
        let rho = correlation(spec, x, p)?;
        let speed = edm_field(spec, x, p)?.inf_norm();
        report.samples += 1;
        if rho < report.min_correlation {
            report.min_correlation = rho;
        }
        let kind = if rho < PC_NEGATIVE_TOL {
            Some(PcViolationKind::NegativeCorrelation)
        } else if rho <= CORRELATION_ZERO_TOL && speed > SPEED_ZERO_TOL {
            Some(PcViolationKind::ZeroCorrelationNonzeroField)
        } else if speed <= SPEED_ZERO_TOL && rho > CORRELATION_ZERO_TOL {
            Some(PcViolationKind::ZeroFieldNonzeroCorrelation)
        } else {
            None
        };
        if let Some(kind) = kind {
            report.violation_count += 1;
            if report.violations.len() < MAX_WITNESSES {
                report.violations.push(PcViolation {
                    state: x.clone(),
                    payoff: p.clone(),
                    correlation: rho,
                    speed,
                    kind,
                });
            }
        }
        Ok(())
    };
    for (x, p) in special_battery(n) {
        check(&x, &p)?;
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..random_samples {
        let x = simplex_point(n, &mut rng);
        let p = payoff_vector(n, PAYOFF_SCALE, &mut rng);
        check(&x, &p)?;
    }
    report.pass = report.violation_count == 0;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsViolationKind {
    /// The field is stationary but the state is not a best response — the
    /// rule can stall away from equilibrium.
    RestPointNotEquilibrium,
    /// The state is a best response but the field still moves it.
    EquilibriumNotRestPoint,
}

#[derive(Debug, Clone)]
pub struct NsWitness {
    pub state: PopulationState,
    pub payoff: PayoffVector,
    pub speed: f64,
    pub correlation: f64,
    pub is_equilibrium: bool,
    pub kind: NsViolationKind,
}

#[derive(Debug, Clone)]
pub struct NsReport {
    pub samples: usize,
    pub violation_count: usize,
    /// First [`MAX_WITNESSES`] violations, in battery order.
    pub witnesses: Vec<NsWitness>,
    pub pass: bool,
}

/// Check Nash stationarity on the special battery plus `random_samples`
/// seeded random pairs: the rule is at rest (correlation at most `1e-9`;
/// for positively-correlated rules this is exactly where the field
/// vanishes) if and only if the state is a best response to the payoff
/// (within `1e-9`).
pub fn ns_sample(
    spec: &RuleSpec,
    n: usize,
    random_samples: usize,
    seed: u64,
) -> Result<NsReport, RuleError> {
    let mut report = NsReport {
        samples: 0,
        violation_count: 0,
        witnesses: Vec::new(),
        pass: true,
    };
    let mut check = |x: &PopulationState, p: &PayoffVector| -> Result<(), RuleError> {
        let speed = edm_field(spec, x, p)?.inf_norm();
        let rho = correlation(spec, x, p)?;
        let br = is_best_response(x, p, BR_TOL)?;
        report.samples += 1;
        let stationary = rho <= CORRELATION_ZERO_TOL;
        let kind = match (stationary, br) {
            (true, false) => Some(NsViolationKind::RestPointNotEquilibrium),
            (false, true) => Some(NsViolationKind::EquilibriumNotRestPoint),
            _ => None,
        };
        if let Some(kind) = kind {
            report.violation_count += 1;
            if report.witnesses.len() < MAX_WITNESSES {
                report.witnesses.push(NsWitness {
                    state: x.clone(),
                    payoff: p.clone(),
                    speed,
                    correlation: rho,
                    is_equilibrium: br,
                    kind,
                });
            }
        }
        Ok(())
    };
    for (x, p) in special_battery(n) {
        check(&x, &p)?;
    }
    let mut rng = seeded_rng(seed);
    for _ in 0..random_samples {
        let x = simplex_point(n, &mut rng);
        let p = payoff_vector(n, PAYOFF_SCALE, &mut rng);
        check(&x, &p)?;
    }
    report.pass = report.violation_count == 0;
    Ok(report)
}
