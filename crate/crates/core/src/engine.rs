//! Closed-loop integrator: evolutionary dynamics driving a payoff mechanism
//! and reading the resulting payoffs back.
//!
//! The joint state is `z = (x, q)`: population share vector plus the
//! mechanism's internal state. Steps are fixed-step RK4 by default, with an
//! embedded Dormand–Prince 5(4) pair available for adaptive stepping. After
//! every step the population block is projected back onto the simplex
//! (rounding-level corrections only; large drift aborts the run) and a
//! path-integral ledger of `q_dot' x`-type payoff work is advanced.

use crate::analysis::CcwLedger;
use crate::payoffs::{PayoffError, PayoffMechanism};
use crate::rules::{
    correlation_from_rates, edm_field, smith_rates, RuleError, RuleSpec, VectorField,
    CORRELATION_ZERO_TOL,
};
use crate::simplex::{
    project_to_simplex, PayoffVector, PopulationState, SimplexError, DEFAULT_DRIFT_BOUND,
};
use rayon::prelude::*;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Payoff(#[from] PayoffError),
    #[error("step size collapsed to {dt:.3e} at t = {t:.6}")]
    StepSizeCollapse { t: f64, dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

/// Integrator settings. `dt` is the fixed step for RK4 and the initial step
/// for RK45; `stop_speed` is the early-stop speed threshold (the stop also
/// requires stationarity of a positively-correlated probe rule, so deficient
/// rules do not stop at non-equilibrium rest points).
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    pub stop_speed: f64,
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            dt: 1e-3,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_max: 50.0,
            stop_speed: 1e-9,
            record_stride: 10,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_max.is_finite() && self.t_max >= 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "t_max must be nonnegative, got {}",
                self.t_max
            )));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(EngineError::InvalidConfig(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.stop_speed.is_finite() && self.stop_speed >= 0.0) {
            return Err(EngineError::InvalidConfig(
                "stop_speed must be nonnegative".into(),
            ));
        }
        if self.record_stride == 0 {
            return Err(EngineError::InvalidConfig(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled closed-loop trajectory. All per-sample vectors share indexing;
/// `ccw_integral`/`ccw_min` are ledger snapshots at the sample times.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
    pub payoffs: Vec<PayoffVector>,
    pub speeds: Vec<f64>,
    pub correlations: Vec<f64>,
    pub ccw_integral: Vec<f64>,
    pub ccw_min: Vec<f64>,
    pub mech_states: Vec<Vec<f64>>,
    pub ledger: CcwLedger,
    /// Largest end-of-step projection correction (infinity norm) seen.
    pub max_projection_step: f64,
    pub early_stopped: bool,
}

impl TrajectoryRecord {
    fn new(ledger: CcwLedger) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            payoffs: Vec::new(),
            speeds: Vec::new(),
            correlations: Vec::new(),
            ccw_integral: Vec::new(),
            ccw_min: Vec::new(),
            mech_states: Vec::new(),
            ledger,
            max_projection_step: 0.0,
            early_stopped: false,
        }
    }

    fn push(
        &mut self,
        t: f64,
        x: &PopulationState,
        p: &PayoffVector,
        v: &VectorField,
        q: &[f64],
    ) {
        let correlation: f64 = p
            .entries()
            .iter()
            .zip(v.velocities())
            .map(|(pi, vi)| pi * vi)
            .sum();
        self.times.push(t);
        self.states.push(x.clone());
        self.payoffs.push(p.clone());
        self.speeds.push(v.inf_norm());
        self.correlations.push(correlation);
        self.ccw_integral.push(self.ledger.integral());
        self.ccw_min.push(self.ledger.minimum());
        self.mech_states.push(q.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }

    pub fn final_state(&self) -> &PopulationState {
        self.states.last().expect("trajectory has samples")
    }

    pub fn final_payoff(&self) -> &PayoffVector {
        self.payoffs.last().expect("trajectory has samples")
    }

    pub fn final_speed(&self) -> f64 {
        *self.speeds.last().expect("trajectory has samples")
    }

    /// Write the trajectory as CSV: 17 significant digits, LF line endings,
    /// byte-deterministic for identical trajectories.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map(|x| x.len()).unwrap_or(0);
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            header.push_str(&format!(",p{i}"));
        }
        header.push_str(",speed,correlation,ccw_integral,ccw_min\n");
        w.write_all(header.as_bytes())?;
        for idx in 0..self.len() {
            let mut row = format!("{:.16e}", self.times[idx]);
            for v in self.states[idx].entries() {
                row.push_str(&format!(",{v:.16e}"));
            }
            for v in self.payoffs[idx].entries() {
                row.push_str(&format!(",{v:.16e}"));
            }
            row.push_str(&format!(
                ",{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.speeds[idx], self.correlations[idx], self.ccw_integral[idx], self.ccw_min[idx]
            ));
            w.write_all(row.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// One right-hand-side evaluation of the closed loop at `(x, q)`:
/// the population field under the mechanism's payoffs, and the mechanism
/// state derivative.
pub fn closed_loop_rhs(
    spec: &RuleSpec,
    mech: &PayoffMechanism,
    x: &PopulationState,
    q: &[f64],
) -> Result<(VectorField, Vec<f64>), EngineError> {
    let p = mech.evaluate_at(x, q)?;
    let v = edm_field(spec, x, &p)?;
    let qdot = mech.state_derivative_at(x, q);
    Ok((v, qdot))
}

struct Loop<'a> {
    spec: &'a RuleSpec,
    mech: &'a PayoffMechanism,
    n: usize,
}

impl Loop<'_> {
    /// RHS on the stacked vector `z = (x, q)`. The population block is
    /// projected before evaluation so rounding-level drift in intermediate
    /// stages cannot leave the simplex.
    fn eval(&self, z: &[f64]) -> Result<Vec<f64>, EngineError> {
        let x = project_to_simplex(&z[..self.n], DEFAULT_DRIFT_BOUND)?;
        let q = &z[self.n..];
        let p = self.mech.evaluate_at(&x, q)?;
        let v = edm_field(self.spec, &x, &p)?;
        let mut dz = Vec::with_capacity(z.len());
        dz.extend_from_slice(v.velocities());
        dz.extend_from_slice(&self.mech.state_derivative_at(&x, q));
        Ok(dz)
    }
}

fn axpy(z: &[f64], scale: f64, d: &[f64]) -> Vec<f64> {
    z.iter().zip(d).map(|(zi, di)| zi + scale * di).collect()
}

/// Classic RK4 step on the stacked state.
fn rk4_step(lp: &Loop<'_>, z: &[f64], dt: f64) -> Result<Vec<f64>, EngineError> {
    let k1 = lp.eval(z)?;
    let k2 = lp.eval(&axpy(z, 0.5 * dt, &k1))?;
    let k3 = lp.eval(&axpy(z, 0.5 * dt, &k2))?;
    let k4 = lp.eval(&axpy(z, dt, &k3))?;
    Ok(z.iter()
        .enumerate()
        .map(|(i, zi)| zi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand–Prince 5(4) coefficients.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded 5(4) stage evaluation: returns the 5th-order solution and
/// the scaled error norm of the embedded 4th-order difference.
fn dp54_attempt(
    lp: &Loop<'_>,
    z: &[f64],
    dt: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<(Vec<f64>, f64), EngineError> {
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(7);
    stages.push(lp.eval(z)?);
    for a_row in &DP_A {
        let mut arg = z.to_vec();
        for (a, stage) in a_row.iter().zip(&stages) {
            if *a != 0.0 {
                for (ai, ki) in arg.iter_mut().zip(stage) {
                    *ai += dt * a * ki;
                }
            }
        }
        stages.push(lp.eval(&arg)?);
    }
    let z5: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, zi)| {
            zi + dt
                * stages
                    .iter()
                    .zip(DP_B5)
                    .map(|(stage, b)| b * stage[i])
                    .sum::<f64>()
        })
        .collect();
    let mut err_sq = 0.0;
    for i in 0..z.len() {
        let z4_i = z[i]
            + dt * stages
                .iter()
                .zip(DP_B4)
                .map(|(stage, b)| b * stage[i])
                .sum::<f64>();
        let scale = abs_tol + rel_tol * z[i].abs().max(z5[i].abs());
        let e = (z5[i] - z4_i) / scale;
        err_sq += e * e;
    }
    Ok((z5, (err_sq / z.len() as f64).sqrt()))
}

/// Integrate the closed loop from `x0` with the mechanism's stored internal
/// state as `q(0)`. Early-stops once the population is stationary *and* a
/// positively-correlated probe rule agrees the point is an equilibrium.
pub fn simulate(
    spec: &RuleSpec,
    mech: &PayoffMechanism,
    x0: &PopulationState,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord, EngineError> {
    cfg.validate()?;
    let n = mech.n();
    if x0.len() != n {
        return Err(EngineError::Payoff(PayoffError::DimensionMismatch {
            left: x0.len(),
            right: n,
        }));
    }
    let lp = Loop { spec, mech, n };

    let mut z: Vec<f64> = Vec::with_capacity(n + mech.state_dim());
    z.extend_from_slice(x0.entries());
    z.extend_from_slice(mech.state());

    let mut rec = TrajectoryRecord::new(CcwLedger::new(mech.ccw_bound_estimate()));
    let mut x = x0.clone();
    let mut p = mech.evaluate_at(&x, &z[n..])?;
    let mut v = edm_field(spec, &x, &p)?;
    let mut t = 0.0;
    rec.push(t, &x, &p, &v, &z[n..]);

    let mut dt = cfg.dt;
    let min_dt = (cfg.t_max * 1e-12).max(1e-14);
    let mut since_record = 0usize;

    while t < cfg.t_max - 1e-15 {
        let step_dt = dt.min(cfg.t_max - t);
        // Advance z by one accepted step; taken_dt is the step actually taken.
        let (z_raw, taken_dt) = match cfg.method {
            Method::Rk4Fixed => (rk4_step(&lp, &z, step_dt)?, step_dt),
            Method::Rk45Adaptive => {
                let mut attempt_dt = step_dt;
                loop {
                    let (candidate, err) =
                        dp54_attempt(&lp, &z, attempt_dt, cfg.rel_tol, cfg.abs_tol)?;
                    if err <= 1.0 {
                        let grow = if err > 0.0 {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        } else {
                            5.0
                        };
                        dt = (attempt_dt * grow).min(cfg.t_max.max(cfg.dt));
                        break (candidate, attempt_dt);
                    }
                    attempt_dt *= (0.9 * err.powf(-0.2)).clamp(0.2, 0.9);
                    if attempt_dt < min_dt {
                        return Err(EngineError::StepSizeCollapse { t, dt: attempt_dt });
                    }
                }
            }
        };

        // Project the population block back onto the simplex and record the
        // size of the correction; anything beyond rounding noise means the
        // integrator misbehaved and project_to_simplex errors out.
        let x_next = project_to_simplex(&z_raw[..n], DEFAULT_DRIFT_BOUND)?;
        let correction = x_next
            .entries()
            .iter()
            .zip(&z_raw[..n])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if correction > rec.max_projection_step {
            rec.max_projection_step = correction;
        }
        let q_next = z_raw[n..].to_vec();
        let p_next = mech.evaluate_at(&x_next, &q_next)?;

        // Ledger step: payoff increment against the midpoint population.
        let x_mid = midpoint(&x, &x_next);
        rec.ledger.step(&x_mid, &p, &p_next, taken_dt);

        t += taken_dt;
        x = x_next;
        p = p_next;
        z.clear();
        z.extend_from_slice(x.entries());
        z.extend_from_slice(&q_next);
        v = edm_field(spec, &x, &p)?;
        since_record += 1;

        let speed = v.inf_norm();
        // The active rule's correlation vanishes at *any* rest point, so the
        // stop guard probes with pairwise-comparison rates, which are
        // stationary only where no strategy has a payoff advantage.
        let probe = correlation_from_rates(&x, &p, &smith_rates(&x, &p));
        let stopping = speed <= cfg.stop_speed && probe <= CORRELATION_ZERO_TOL;
        let finished = t >= cfg.t_max - 1e-15;

        if since_record >= cfg.record_stride || stopping || finished {
            rec.push(t, &x, &p, &v, &z[n..]);
            since_record = 0;
        }
        if stopping {
            rec.early_stopped = true;
            break;
        }
    }

    Ok(rec)
}

fn midpoint(a: &PopulationState, b: &PopulationState) -> PopulationState {
    let entries: Vec<f64> = a
        .entries()
        .iter()
        .zip(b.entries())
        .map(|(ai, bi)| 0.5 * (ai + bi))
        .collect();
    PopulationState::from_trusted(entries)
}

/// Run each rule against each start (rule-major ordering). Runs are
/// independent and execute in parallel; per-run failures do not abort the
/// batch.
pub fn batch_simulate(
    specs: &[RuleSpec],
    mech: &PayoffMechanism,
    starts: &[PopulationState],
    cfg: &IntegratorConfig,
) -> Vec<Result<TrajectoryRecord, EngineError>> {
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|r| (0..starts.len()).map(move |s| (r, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(r, s)| simulate(&specs[r], mech, &starts[s], cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoffs::{crowding_game, MemorylessGame, WashoutFilter};
    use crate::rules::{SwitchRateMatrix, UserRule};
    use std::sync::Arc;

    fn crowding_mech() -> PayoffMechanism {
        PayoffMechanism::memoryless(crowding_game(3))
    }

    fn short_cfg(t_max: f64) -> IntegratorConfig {
        IntegratorConfig {
            t_max,
            ..IntegratorConfig::default()
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let bad = [
            IntegratorConfig {
                dt: 0.0,
                ..IntegratorConfig::default()
            },
            IntegratorConfig {
                t_max: -1.0,
                ..IntegratorConfig::default()
            },
            IntegratorConfig {
                record_stride: 0,
                ..IntegratorConfig::default()
            },
            IntegratorConfig {
                rel_tol: -1e-8,
                ..IntegratorConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
        assert!(IntegratorConfig::default().validate().is_ok());
    }

    #[test]
    fn zero_horizon_yields_single_sample() {
        let rec = simulate(
            &RuleSpec::smith(),
            &crowding_mech(),
            &PopulationState::vertex(3, 0),
            &short_cfg(0.0),
        )
        .unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.times[0], 0.0);
        assert!(!rec.early_stopped);
        assert_eq!(rec.states[0], PopulationState::vertex(3, 0));
    }

    #[test]
    fn equilibrium_start_stops_immediately() {
        // Uniform is the crowding equilibrium: all payoffs equal, zero field.
        let rec = simulate(
            &RuleSpec::smith(),
            &crowding_mech(),
            &PopulationState::uniform(3),
            &short_cfg(10.0),
        )
        .unwrap();
        assert!(rec.early_stopped);
        assert_eq!(rec.len(), 2);
        assert!(rec.final_time() < 0.01);
        assert!(rec.final_speed() <= 1e-12);
    }

    #[test]
    fn smith_converges_to_uniform_on_crowding() {
        let x0 = PopulationState::new(vec![0.7, 0.3, 0.0]).unwrap();
        let rec = simulate(&RuleSpec::smith(), &crowding_mech(), &x0, &short_cfg(60.0)).unwrap();
        assert!(rec.early_stopped, "expected early stop, speed still {}", rec.final_speed());
        let dist = rec.final_state().distance(&PopulationState::uniform(3));
        assert!(dist <= 1e-6, "distance to uniform {dist}");
        assert!(rec.max_projection_step <= 1e-9);
        assert!(rec.final_speed() <= 1e-9);
    }

    #[test]
    fn deficient_rule_rests_at_non_equilibrium_vertex() {
        // Constant payoffs [0,1,0]: the first vertex is a rest point of pure
        // imitation but strategy 2 is strictly better, so the stop guard must
        // keep the run alive to the horizon.
        let game = MemorylessGame::affine(vec![vec![0.0; 3]; 3], vec![0.0, 1.0, 0.0]).unwrap();
        let mech = PayoffMechanism::memoryless(game);
        let x0 = PopulationState::vertex(3, 0);
        let rec = simulate(
            &RuleSpec::pure_replicator_unchecked(),
            &mech,
            &x0,
            &short_cfg(0.5),
        )
        .unwrap();
        assert!(!rec.early_stopped);
        assert!((rec.final_time() - 0.5).abs() <= 1e-9);
        assert!(rec.final_state().distance(&x0) <= 1e-12);
        assert!(rec.final_speed() <= 1e-15);
    }

    #[test]
    fn speeds_match_finite_differences() {
        let cfg = IntegratorConfig {
            t_max: 0.2,
            record_stride: 1,
            ..IntegratorConfig::default()
        };
        let x0 = PopulationState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let rec = simulate(&RuleSpec::smith(), &crowding_mech(), &x0, &cfg).unwrap();
        assert!(rec.len() > 100);
        for k in 0..rec.len() - 1 {
            let dt = rec.times[k + 1] - rec.times[k];
            let (v, _) = closed_loop_rhs(
                &RuleSpec::smith(),
                &crowding_mech(),
                &rec.states[k],
                &rec.mech_states[k],
            )
            .unwrap();
            let worst = rec.states[k + 1]
                .entries()
                .iter()
                .zip(rec.states[k].entries())
                .zip(v.velocities())
                .map(|((next, prev), vel)| ((next - prev) / dt - vel).abs())
                .fold(0.0f64, f64::max);
            assert!(
                worst <= 10.0 * dt,
                "finite-difference mismatch {worst} at step {k}"
            );
        }
    }

    #[test]
    fn rk45_matches_rk4() {
        let x0 = PopulationState::new(vec![0.8, 0.1, 0.1]).unwrap();
        let fixed = simulate(&RuleSpec::smith(), &crowding_mech(), &x0, &short_cfg(2.0)).unwrap();
        let adaptive = simulate(
            &RuleSpec::smith(),
            &crowding_mech(),
            &x0,
            &IntegratorConfig {
                method: Method::Rk45Adaptive,
                t_max: 2.0,
                ..IntegratorConfig::default()
            },
        )
        .unwrap();
        let dist = fixed.final_state().distance(adaptive.final_state());
        assert!(dist <= 1e-6, "method disagreement {dist}");
    }

    #[test]
    fn batch_runs_rule_major_and_isolates_faults() {
        let nan_rule = RuleSpec::new_unchecked(
            vec![],
            vec![],
            vec![],
            Some((
                1.0,
                UserRule {
                    name: "nan".into(),
                    rates: Arc::new(|x: &PopulationState, _p: &PayoffVector| {
                        let mut m = SwitchRateMatrix::zeros(x.len());
                        m.set(0, 1, f64::NAN);
                        m
                    }),
                },
            )),
        )
        .unwrap();
        let specs = vec![RuleSpec::smith(), nan_rule];
        let starts = vec![
            PopulationState::new(vec![0.5, 0.3, 0.2]).unwrap(),
            PopulationState::new(vec![0.2, 0.5, 0.3]).unwrap(),
        ];
        let results = batch_simulate(&specs, &crowding_mech(), &starts, &short_cfg(0.05));
        assert_eq!(results.len(), 4);
        assert!(results[0].is_ok());
        assert!(results[1].is_ok());
        assert!(results[2].is_err(), "NaN rule should fail");
        assert!(results[3].is_err());
        // Rule-major ordering: job 1 is (first rule, second start).
        let solo = simulate(&specs[0], &crowding_mech(), &starts[1], &short_cfg(0.05)).unwrap();
        assert_eq!(
            results[1].as_ref().unwrap().final_state(),
            solo.final_state()
        );
    }

    #[test]
    fn csv_deterministic_and_well_formed() {
        let x0 = PopulationState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let a = simulate(&RuleSpec::smith(), &crowding_mech(), &x0, &short_cfg(0.1))
            .unwrap()
            .to_csv_string();
        let b = simulate(&RuleSpec::smith(), &crowding_mech(), &x0, &short_cfg(0.1))
            .unwrap()
            .to_csv_string();
        assert_eq!(a, b);
        let mut lines = a.lines();
        assert_eq!(
            lines.next(),
            Some("t,x1,x2,x3,p1,p2,p3,speed,correlation,ccw_integral,ccw_min")
        );
        for line in lines {
            assert_eq!(line.split(',').count(), 11);
            for field in line.split(',') {
                field.parse::<f64>().expect("numeric field");
            }
        }
        assert!(!a.contains('\r'));
    }

    #[test]
    fn washout_loop_settles_to_stationary_payoffs() {
        let game = MemorylessGame::affine(
            vec![
                vec![-1.0, 0.0, 0.0],
                vec![0.0, -1.0, 0.0],
                vec![0.0, 0.0, -1.0],
            ],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let filter = WashoutFilter::new(
            5.0,
            -1.0,
            vec![
                vec![0.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![-0.4, 0.0, 0.0],
        )
        .unwrap();
        let mech = PayoffMechanism::washout(game, filter).unwrap();
        let x0 = PopulationState::new(vec![0.7, 0.3, 0.0]).unwrap();
        let rec = simulate(&RuleSpec::smith(), &mech, &x0, &short_cfg(60.0)).unwrap();
        assert!(rec.early_stopped);
        let x_end = rec.final_state();
        assert!(x_end.distance(&PopulationState::uniform(3)) <= 1e-6);
        // Once settled the washout contribution dies out: p == F(x).
        let stationary = mech.stationary_game().evaluate(x_end).unwrap();
        let gap = rec
            .final_payoff()
            .entries()
            .iter()
            .zip(stationary.entries())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap <= 1e-6, "stationary payoff gap {gap}");
        assert!(rec.max_projection_step <= 1e-9);
    }

    #[test]
    fn rhs_dimension_mismatch_is_reported() {
        let err = simulate(
            &RuleSpec::smith(),
            &crowding_mech(),
            &PopulationState::uniform(4),
            &short_cfg(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::Payoff(_)));
    }
}
