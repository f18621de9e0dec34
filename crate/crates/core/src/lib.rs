//! Evolutionary-dynamics toolkit for population games on the simplex:
//! hybrid learning rules built from imitation, pairwise-comparison, and
//! excess-payoff primitives; memoryless and washout payoff mechanisms; a
//! closed-loop integrator with a path-integral dissipation ledger; and
//! numerical certification of the structural properties that underpin
//! equilibrium convergence (positive correlation, Nash stationarity,
//! bounded cyclic payoff work, frequency-domain gain conditions).

pub mod analysis;
pub mod certify;
pub mod engine;
pub mod payoffs;
pub mod rules;
pub mod sampling;
pub mod simplex;

pub use analysis::{
    barbalat_diagnostic, ccw_falsify, convergence_verdict, drift_slope, log_omega_grid,
    ni_frequency_test, AnalysisError, BarbalatDiagnostic, CcwLedger, CcwSearch,
    ConvergenceVerdict, NiReport, NiVerdict, CORRELATION_TAIL_TOL,
};
pub use certify::{
    ns_sample, pc_sample, special_battery, NsReport, NsViolationKind, NsWitness, PcReport,
    PcViolation, PcViolationKind, BR_TOL, SPEED_ZERO_TOL,
};
pub use engine::{
    batch_simulate, closed_loop_rhs, simulate, EngineError, IntegratorConfig, Method,
    TrajectoryRecord,
};
pub use payoffs::{
    crowding_game, verify_potential_identity, MemorylessGame, PayoffError, PayoffFn,
    PayoffMechanism, PotentialFn, WashoutFilter,
};
pub use rules::{
    correlation, edm_field, hybrid_rates, tellegen_decomposition, CoRule, EpRule, IRule, RateFn,
    RuleError, RuleSpec, SwitchRateMatrix, UserRule, VectorField, CORRELATION_ZERO_TOL,
    PC_NEGATIVE_TOL,
};
pub use sampling::{payoff_vector, seeded_rng, simplex_point};
pub use simplex::{
    best_response_set, distance_to_set, excess_payoff, is_best_response, nash_equilibria_affine,
    project_to_simplex, ExcessPayoffVector, NashSet, PayoffVector, PopulationState, SimplexError,
    DEFAULT_DRIFT_BOUND,
};
