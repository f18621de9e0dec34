//! Subcommand implementations and exit-code policy.
//!
//! Exit codes: 0 success (including certification runs whose verdicts are
//! `fail` — the report is the product), 1 environment problems (missing or
//! empty scenario directory, unwritable outputs), 2 configuration errors,
//! 3 integrator failures.

use crate::config::{ConfigError, ScenarioConfig};
use crate::plot::{ternary_svg, PlotRun};
use crate::report::{
    fmt_state, render_certify_report, render_simulate_report, CompletedRun, PropertyLine,
    RunOutcome, RunReport, SimulateHeader, Verdict,
};
use evodyn_core::{
    barbalat_diagnostic, batch_simulate, ccw_falsify, convergence_verdict, drift_slope,
    log_omega_grid, nash_equilibria_affine, ni_frequency_test, pc_sample, ns_sample,
    verify_potential_identity, CcwSearch, NashSet, NiVerdict, PopulationState, RuleSpec,
    TrajectoryRecord,
};
use log::{debug, info, warn};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Environment(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Environment(_) => 1,
            CliError::Config(_) => 2,
            CliError::Integrator(_) => 3,
        }
    }
}

/// Write to stdout, ignoring a closed pipe (e.g. `evodyn certify x | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

/// Scenario directory: `EVODYN_SCENARIO_DIR`, then `./scenarios`, then
/// `scenarios/` next to the workspace the binary was built in.
pub fn scenario_dir() -> Option<PathBuf> {
    if let Ok(dir) = std::env::var("EVODYN_SCENARIO_DIR") {
        return Some(PathBuf::from(dir));
    }
    let local = Path::new("scenarios");
    if local.is_dir() {
        return Some(local.to_path_buf());
    }
    let exe = std::env::current_exe().ok()?;
    for ancestor in exe.ancestors().skip(1) {
        let candidate = ancestor.join("scenarios");
        if candidate.is_dir() {
            return Some(candidate);
        }
    }
    None
}

/// A config argument is a path to a file or the name of a bundled scenario.
fn resolve_config(arg: &str) -> Result<PathBuf, CliError> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return Ok(direct.to_path_buf());
    }
    if !arg.contains(std::path::MAIN_SEPARATOR) {
        if let Some(dir) = scenario_dir() {
            let mut name = arg.to_string();
            if !name.ends_with(".cfg") {
                name.push_str(".cfg");
            }
            let bundled = dir.join(name);
            if bundled.is_file() {
                return Ok(bundled);
            }
        }
    }
    Err(CliError::Config(ConfigError::Invalid(format!(
        "config '{arg}' not found (no such file, and no bundled scenario of that name)"
    ))))
}

fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::Environment(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, content)
        .map_err(|e| CliError::Environment(format!("cannot write {}: {e}", path.display())))
}

fn enumerate_equilibria(cfg: &ScenarioConfig) -> Option<NashSet> {
    match nash_equilibria_affine(&cfg.game.matrix, &cfg.game.offset, 1e-9) {
        Ok(set) if !set.points.is_empty() => Some(set),
        Ok(_) => None,
        Err(e) => {
            warn!("equilibrium enumeration failed: {e}");
            None
        }
    }
}

fn mechanism_label(cfg: &ScenarioConfig) -> String {
    match &cfg.filter {
        Some(f) => format!("washout(lambda={}, k={})", f.lambda, f.k),
        None => "memoryless".into(),
    }
}

pub fn cmd_simulate(config_arg: &str) -> Result<(), CliError> {
    let path = resolve_config(config_arg)?;
    let cfg = ScenarioConfig::load(&path)?;
    let mech = cfg.build_mechanism()?;
    let rules = cfg.build_rules(false)?;
    let starts = cfg.build_initials()?;
    let icfg = cfg.build_integrator()?;
    info!(
        "simulate '{}': {} rules x {} starts, t_max {}",
        cfg.name,
        rules.len(),
        starts.len(),
        icfg.t_max
    );

    let specs: Vec<RuleSpec> = rules.iter().map(|(_, s)| s.clone()).collect();
    let results = batch_simulate(&specs, &mech, &starts, &icfg);

    let out_base = PathBuf::from("out").join(&cfg.name);
    let csv_dir = cfg
        .outputs
        .csv_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| out_base.join("csv"));
    let svg_path = cfg
        .outputs
        .svg_path
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| out_base.join("trajectories.svg"));
    let report_path = cfg
        .outputs
        .report_path
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| out_base.join("report.txt"));

    let equilibria = enumerate_equilibria(&cfg);
    let game = mech.stationary_game();

    let mut run_reports = Vec::new();
    let mut kept: Vec<(usize, TrajectoryRecord)> = Vec::new();
    let mut any_failed = false;
    for (run_idx, result) in results.into_iter().enumerate() {
        let rule_idx = run_idx / starts.len();
        let start_idx = run_idx % starts.len();
        let label = &rules[rule_idx].0;
        match result {
            Err(e) => {
                any_failed = true;
                warn!("run {} ({label}, start {}) failed: {e}", run_idx + 1, start_idx + 1);
                run_reports.push(RunReport {
                    index: run_idx + 1,
                    rule_label: label.clone(),
                    start: cfg.initial[start_idx].clone(),
                    outcome: RunOutcome::Failed {
                        error: e.to_string(),
                    },
                });
            }
            Ok(traj) => {
                let csv_name = format!("run_{:02}_{}_x{}.csv", run_idx + 1, label, start_idx + 1);
                let csv_path = csv_dir.join(&csv_name);
                write_text(&csv_path, &traj.to_csv_string())?;

                let verdict = match &equilibria {
                    Some(set) => Some(
                        convergence_verdict(&traj, set, 1e-6, 1e-3)
                            .map_err(|e| CliError::Integrator(e.to_string()))?,
                    ),
                    None => None,
                };
                let diag = barbalat_diagnostic(&traj, None)
                    .map_err(|e| CliError::Integrator(e.to_string()))?;
                let final_state = traj.final_state().entries().to_vec();
                let stationary_gap = match game.evaluate(traj.final_state()) {
                    Ok(f) => f
                        .entries()
                        .iter()
                        .zip(traj.final_payoff().entries())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0_f64, f64::max),
                    Err(_) => f64::NAN,
                };
                run_reports.push(RunReport {
                    index: run_idx + 1,
                    rule_label: label.clone(),
                    start: cfg.initial[start_idx].clone(),
                    outcome: RunOutcome::Completed(Box::new(CompletedRun {
                        final_time: traj.final_time(),
                        final_state,
                        final_speed: traj.final_speed(),
                        final_distance: verdict.as_ref().map(|v| v.final_distance),
                        stationary_gap,
                        correlation_integral: diag.correlation_integral,
                        correlation_tail_max: diag.correlation_tail_max,
                        ccw_integral: traj.ledger.integral(),
                        ccw_min: traj.ledger.minimum(),
                        ccw_drift_slope: drift_slope(&traj.times, &traj.ccw_min),
                        early_stopped: traj.early_stopped,
                        converged: verdict.as_ref().map(|v| v.converged),
                        csv: Some(csv_path.display().to_string()),
                    })),
                });
                kept.push((rule_idx, traj));
            }
        }
    }

    let svg = if cfg.n == 3 && !kept.is_empty() {
        let plot_runs: Vec<PlotRun<'_>> = kept
            .iter()
            .map(|(rule_idx, traj)| PlotRun {
                rule_label: &rules[*rule_idx].0,
                rule_index: *rule_idx,
                trajectory: traj,
            })
            .collect();
        write_text(&svg_path, &ternary_svg(&cfg.name, &plot_runs))?;
        Some(svg_path.display().to_string())
    } else {
        if cfg.n != 3 {
            debug!("skipping ternary plot: n = {} != 3", cfg.n);
        }
        None
    };

    let header = SimulateHeader {
        scenario: &cfg.name,
        description: &cfg.description,
        n: cfg.n,
        mechanism: mechanism_label(&cfg),
        rule_labels: rules.iter().map(|(l, _)| l.clone()).collect(),
        start_count: starts.len(),
        t_max: icfg.t_max,
        equilibria: equilibria
            .as_ref()
            .map(|set| {
                set.points
                    .iter()
                    .map(|p| p.entries().to_vec())
                    .collect()
            })
            .unwrap_or_default(),
        svg,
    };
    let report = render_simulate_report(&header, &run_reports);
    write_text(&report_path, &report)?;

    let completed = run_reports
        .iter()
        .filter(|r| matches!(r.outcome, RunOutcome::Completed(_)))
        .count();
    let converged = run_reports
        .iter()
        .filter(|r| {
            matches!(&r.outcome, RunOutcome::Completed(c) if c.converged == Some(true))
        })
        .count();
    emit(&format!(
        "{}: {} runs, {} completed, {} converged; report: {}\n",
        cfg.name,
        run_reports.len(),
        completed,
        converged,
        report_path.display()
    ));

    if any_failed {
        return Err(CliError::Integrator(
            "one or more runs failed; see report for details".into(),
        ));
    }
    Ok(())
}

/// Deterministic closed loops in the simplex interior for the potential
/// line-integral check: circles around the barycenter in a fixed tangent
/// plane (two radii), or an out-and-back segment when n = 2.
fn potential_probe_loops(n: usize) -> Vec<Vec<PopulationState>> {
    let center = vec![1.0 / n as f64; n];
    let state = |entries: Vec<f64>| PopulationState::new(entries).expect("loop stays in simplex");
    if n == 2 {
        let mut path = Vec::new();
        for t in [0.0, 0.2, 0.4, 0.2, 0.0] {
            path.push(state(vec![center[0] + t, center[1] - t]));
        }
        return vec![path];
    }
    let mut u = vec![0.0; n];
    u[0] = 1.0 / 2.0_f64.sqrt();
    u[1] = -u[0];
    let mut v = vec![0.0; n];
    v[0] = 1.0 / 6.0_f64.sqrt();
    v[1] = v[0];
    v[2] = -2.0 * v[0];
    let r_max = (1.0 / n as f64) / 0.82;
    let samples = 128;
    [0.4 * r_max, 0.8 * r_max]
        .into_iter()
        .map(|r| {
            (0..=samples)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
                    let entries = (0..n)
                        .map(|i| center[i] + r * (th.cos() * u[i] + th.sin() * v[i]))
                        .map(|e| e.clamp(0.0, 1.0))
                        .collect();
                    state(entries)
                })
                .collect()
        })
        .collect()
}

pub fn cmd_certify(config_arg: &str, pure_replicator: bool) -> Result<(), CliError> {
    let path = resolve_config(config_arg)?;
    let cfg = ScenarioConfig::load(&path)?;
    let mech = cfg.build_mechanism()?;
    let mut rules = cfg.build_rules(false)?;
    if pure_replicator {
        rules.push((
            "pure_replicator".into(),
            RuleSpec::pure_replicator_unchecked(),
        ));
    }
    let starts = cfg.build_initials()?;
    let n = mech.n();
    let samples = cfg.certify.samples();
    let seed = cfg.certify.seed();
    info!(
        "certify '{}': {} rules, {} samples, seed {}",
        cfg.name,
        rules.len(),
        samples,
        seed
    );

    let mut lines: Vec<PropertyLine> = Vec::new();
    let game = mech.stationary_game();

    // Potential line-integral identity on deterministic closed loops.
    let has_potential = game.has_potential();
    if has_potential {
        let loops = potential_probe_loops(n);
        let mut failed_loop = None;
        for (i, path) in loops.iter().enumerate() {
            let ok = verify_potential_identity(game, path, 1e-8)
                .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
            if !ok {
                failed_loop = Some(i);
                break;
            }
        }
        match failed_loop {
            None => lines.push(PropertyLine::new(
                "potential_identity",
                Verdict::Pass,
                Some(format!(
                    "{} closed loops, circulation within 1e-8",
                    potential_probe_loops(n).len()
                )),
            )),
            Some(i) => lines.push(PropertyLine::new(
                "potential_identity",
                Verdict::Fail,
                Some(format!("declared potential broke on closed loop {i}")),
            )),
        }
    } else {
        lines.push(PropertyLine::new(
            "potential_identity",
            Verdict::Inconclusive,
            Some("stationary game declares no potential".into()),
        ));
    }

    // Frequency-domain negative-imaginary check of the filter block.
    let mut ni_passed = None;
    match mech.filter() {
        Some(filter) => {
            let grid = log_omega_grid(filter.lambda(), cfg.certify.ni_points());
            let report = ni_frequency_test(filter, &grid, 1e-9)
                .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
            match report.verdict {
                NiVerdict::Pass => {
                    ni_passed = Some(true);
                    let worst = report
                        .min_eigenvalues
                        .iter()
                        .cloned()
                        .fold(f64::INFINITY, f64::min);
                    lines.push(PropertyLine::new(
                        "ni_frequency",
                        Verdict::Pass,
                        Some(format!(
                            "{} frequencies in [{:.3e}, {:.3e}], min eigenvalue {:.3e}",
                            grid.len(),
                            grid[0],
                            grid[grid.len() - 1],
                            worst
                        )),
                    ));
                }
                NiVerdict::Fail {
                    omega,
                    min_eigenvalue,
                } => {
                    ni_passed = Some(false);
                    lines.push(PropertyLine::new(
                        "ni_frequency",
                        Verdict::Fail,
                        Some(format!(
                            "omega={omega:.6e}, min_eigenvalue={min_eigenvalue:.6e}"
                        )),
                    ));
                }
            }
        }
        None => lines.push(PropertyLine::new(
            "ni_frequency",
            Verdict::CertifiedByConstruction,
            Some("memoryless mechanism has no dynamic block".into()),
        )),
    }

    // Counterclockwise property of the payoff mechanism.
    let ccw_by_construction = has_potential && ni_passed.unwrap_or(true);
    if ccw_by_construction {
        let why = match ni_passed {
            None => "potential stationary game, static mechanism",
            Some(true) => "potential stationary game behind a negative-imaginary filter",
            Some(false) => unreachable!("guarded above"),
        };
        lines.push(PropertyLine::new(
            "ccw",
            Verdict::CertifiedByConstruction,
            Some(why.into()),
        ));
    } else {
        let mut probe_starts = starts.clone();
        for i in 0..n {
            probe_starts.push(PopulationState::vertex(n, i));
        }
        probe_starts.push(PopulationState::uniform(n));
        let horizon = cfg.certify.ccw_horizon();
        let mut worst: Option<(String, usize, f64)> = None;
        let mut min_slope = f64::INFINITY;
        for (label, spec) in &rules {
            let search = ccw_falsify(spec, &mech, &probe_starts, horizon, 1e-3)
                .map_err(|e| CliError::Integrator(e.to_string()))?;
            match search {
                CcwSearch::Witness {
                    start_index,
                    drift_rate,
                    ..
                } => {
                    if worst.as_ref().is_none_or(|(_, _, d)| drift_rate < *d) {
                        worst = Some((label.clone(), start_index, drift_rate));
                    }
                }
                CcwSearch::NoWitness { min_slope: s } => min_slope = min_slope.min(s),
            }
        }
        match worst {
            Some((label, start_index, drift_rate)) => lines.push(PropertyLine::new(
                "ccw",
                Verdict::Fail,
                Some(format!(
                    "rule={label}, start={start_index}, ledger minimum drifts {drift_rate:.3e}/time over horizon {horizon}"
                )),
            )),
            None => lines.push(PropertyLine::new(
                "ccw",
                Verdict::Inconclusive,
                Some(format!(
                    "no falsification witness across {} rules x {} starts; most negative fitted slope {min_slope:.3e}",
                    rules.len(),
                    probe_starts.len()
                )),
            )),
        }
    }

    // Positive correlation and Nash stationarity per rule.
    for (label, spec) in &rules {
        let pc = pc_sample(spec, n, samples, seed)
            .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
        if pc.pass {
            lines.push(PropertyLine::new(
                format!("pc[{label}]"),
                Verdict::Pass,
                Some(format!(
                    "{} samples, min correlation {:.3e}",
                    pc.samples, pc.min_correlation
                )),
            ));
        } else {
            let w = &pc.violations[0];
            lines.push(PropertyLine::new(
                format!("pc[{label}]"),
                Verdict::Fail,
                Some(format!(
                    "{:?} at x=({}), p=({}), correlation={:.3e}, speed={:.3e} ({} violations / {} samples)",
                    w.kind,
                    fmt_state(w.state.entries()),
                    fmt_state(w.payoff.entries()),
                    w.correlation,
                    w.speed,
                    pc.violation_count,
                    pc.samples
                )),
            ));
        }

        let ns = ns_sample(spec, n, samples, seed)
            .map_err(|e| CliError::Config(ConfigError::Invalid(e.to_string())))?;
        if ns.pass {
            lines.push(PropertyLine::new(
                format!("ns[{label}]"),
                Verdict::Pass,
                Some(format!("{} samples", ns.samples)),
            ));
        } else {
            let w = &ns.witnesses[0];
            lines.push(PropertyLine::new(
                format!("ns[{label}]"),
                Verdict::Fail,
                Some(format!(
                    "{:?} at x=({}), p=({}), correlation={:.3e}, speed={:.3e}, best_response={}",
                    w.kind,
                    fmt_state(w.state.entries()),
                    fmt_state(w.payoff.entries()),
                    w.correlation,
                    w.speed,
                    w.is_equilibrium
                )),
            ));
        }
    }

    let report = render_certify_report(&cfg.name, &lines);
    let report_path = cfg
        .outputs
        .certify_report_path
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name).join("certify_report.txt"));
    write_text(&report_path, &report)?;
    emit(&report);
    emit(&format!("# written to {}\n", report_path.display()));
    Ok(())
}

pub fn cmd_list_scenarios(verbose: bool) -> Result<(), CliError> {
    let dir = scenario_dir().ok_or_else(|| {
        CliError::Environment(
            "no scenario directory found (set EVODYN_SCENARIO_DIR or run next to ./scenarios)"
                .into(),
        )
    })?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Environment(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|r| r.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "cfg"))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(CliError::Environment(format!(
            "scenario directory {} contains no .cfg files",
            dir.display()
        )));
    }
    let mut listing = String::new();
    for path in entries {
        match ScenarioConfig::load(&path) {
            Ok(cfg) => {
                listing.push_str(&format!("{} — {}\n", cfg.name, cfg.description));
                if verbose {
                    let labels: Vec<String> = cfg
                        .rules
                        .iter()
                        .enumerate()
                        .map(|(i, r)| r.display_label(i))
                        .collect();
                    listing.push_str(&format!(
                        "    n={}, mechanism={}, rules=[{}], starts={}, t_max={}\n",
                        cfg.n,
                        mechanism_label(&cfg),
                        labels.join(", "),
                        cfg.initial.len(),
                        cfg.integrator.t_max.unwrap_or(50.0)
                    ));
                }
            }
            Err(e) => {
                let stem = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                listing.push_str(&format!("{stem} — (unreadable: {e})\n"));
            }
        }
    }
    emit(&listing);
    Ok(())
}
