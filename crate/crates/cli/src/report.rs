//! Plain-text report rendering.
//!
//! Simulation reports are `key = value` blocks, one per run, after a header
//! block. Certification reports are one `property: verdict [witness]` line
//! per checked property; verdicts are `pass`, `fail`,
//! `certified-by-construction`, or `inconclusive`.

use std::fmt;
use std::fmt::Write as _;

pub fn fmt_state(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug)]
pub struct RunReport {
    pub index: usize,
    pub rule_label: String,
    pub start: Vec<f64>,
    pub outcome: RunOutcome,
}

#[derive(Debug)]
pub enum RunOutcome {
    Completed(Box<CompletedRun>),
    Failed { error: String },
}

#[derive(Debug)]
pub struct CompletedRun {
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub final_speed: f64,
    /// Euclidean distance to the enumerated equilibrium set, when available.
    pub final_distance: Option<f64>,
    /// `max_i |p_i(T) - F_i(x(T))|` against the stationary payoffs.
    pub stationary_gap: f64,
    pub correlation_integral: f64,
    pub correlation_tail_max: f64,
    pub ccw_integral: f64,
    pub ccw_min: f64,
    pub ccw_drift_slope: f64,
    pub early_stopped: bool,
    pub converged: Option<bool>,
    pub csv: Option<String>,
}

pub struct SimulateHeader<'a> {
    pub scenario: &'a str,
    pub description: &'a str,
    pub n: usize,
    pub mechanism: String,
    pub rule_labels: Vec<String>,
    pub start_count: usize,
    pub t_max: f64,
    pub equilibria: Vec<Vec<f64>>,
    pub svg: Option<String>,
}

pub fn render_simulate_report(header: &SimulateHeader<'_>, runs: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario = {}", header.scenario);
    if !header.description.is_empty() {
        let _ = writeln!(out, "description = {}", header.description);
    }
    let _ = writeln!(out, "n = {}", header.n);
    let _ = writeln!(out, "mechanism = {}", header.mechanism);
    let _ = writeln!(out, "rules = {}", header.rule_labels.join(", "));
    let _ = writeln!(out, "starts = {}", header.start_count);
    let _ = writeln!(out, "t_max = {}", header.t_max);
    let _ = writeln!(out, "equilibria = {}", header.equilibria.len());
    for (i, eq) in header.equilibria.iter().enumerate() {
        let _ = writeln!(out, "equilibrium_{} = {}", i + 1, fmt_state(eq));
    }
    if let Some(svg) = &header.svg {
        let _ = writeln!(out, "svg = {svg}");
    }

    let mut completed = 0usize;
    let mut converged = 0usize;
    let mut failed = 0usize;
    let mut drift_detected = false;
    for run in runs {
        let _ = writeln!(out);
        let _ = writeln!(out, "run = {}", run.index);
        let _ = writeln!(out, "rule = {}", run.rule_label);
        let _ = writeln!(out, "start = {}", fmt_state(&run.start));
        match &run.outcome {
            RunOutcome::Failed { error } => {
                failed += 1;
                let _ = writeln!(out, "status = error");
                let _ = writeln!(out, "error = {error}");
            }
            RunOutcome::Completed(c) => {
                completed += 1;
                let _ = writeln!(out, "status = ok");
                let _ = writeln!(out, "final_time = {:.6}", c.final_time);
                let _ = writeln!(out, "final_state = {}", fmt_state(&c.final_state));
                let _ = writeln!(out, "final_speed = {:.6e}", c.final_speed);
                if let Some(d) = c.final_distance {
                    let _ = writeln!(out, "final_distance = {d:.6e}");
                }
                let _ = writeln!(out, "stationary_gap = {:.6e}", c.stationary_gap);
                let _ = writeln!(out, "correlation_integral = {:.6e}", c.correlation_integral);
                let _ = writeln!(out, "correlation_tail_max = {:.6e}", c.correlation_tail_max);
                let _ = writeln!(out, "ccw_integral = {:.6e}", c.ccw_integral);
                let _ = writeln!(out, "ccw_min = {:.6e}", c.ccw_min);
                let _ = writeln!(out, "ccw_drift_slope = {:.6e}", c.ccw_drift_slope);
                let _ = writeln!(out, "early_stopped = {}", c.early_stopped);
                if c.ccw_drift_slope < -1e-3 {
                    drift_detected = true;
                }
                if let Some(v) = c.converged {
                    let _ = writeln!(out, "converged = {v}");
                    if v {
                        converged += 1;
                    }
                }
                if let Some(csv) = &c.csv {
                    let _ = writeln!(out, "csv = {csv}");
                }
            }
        }
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "summary_runs = {}", runs.len());
    let _ = writeln!(out, "summary_completed = {completed}");
    let _ = writeln!(out, "summary_failed = {failed}");
    let _ = writeln!(out, "summary_converged = {converged}");
    let _ = writeln!(out, "summary_ccw_drift_detected = {drift_detected}");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    CertifiedByConstruction,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::CertifiedByConstruction => "certified-by-construction",
            Verdict::Inconclusive => "inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug)]
pub struct PropertyLine {
    pub property: String,
    pub verdict: Verdict,
    pub witness: Option<String>,
}

impl PropertyLine {
    pub fn new(property: impl Into<String>, verdict: Verdict, witness: Option<String>) -> Self {
        Self {
            property: property.into(),
            verdict,
            witness,
        }
    }
}

pub fn render_certify_report(scenario: &str, lines: &[PropertyLine]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# certification report: {scenario}");
    for line in lines {
        match &line.witness {
            Some(w) => {
                let _ = writeln!(out, "{}: {} [{}]", line.property, line.verdict, w);
            }
            None => {
                let _ = writeln!(out, "{}: {}", line.property, line.verdict);
            }
        }
    }
    out
}
