//! Scenario files: a flat, sectioned `key = value` format.
//!
//! ```text
//! name = my_scenario
//! description = one line
//! n = 3
//!
//! [game]                     # stationary payoffs F(x) = Ax + b
//! matrix = -1,0,0; 0,-1,0; 0,0,-1
//! offset = 1, 1, 1
//!
//! [filter]                   # optional washout block; absent = memoryless
//! lambda = 5
//! k = -1
//! matrix = 0,0,0; 0,1,0; 0,0,1
//! offset = -0.4, 0, 0
//!
//! [rule]                     # repeated, one per learning rule
//! preset = smith             # or explicit weights, see RULE_WEIGHT_KEYS
//!
//! [initial]
//! x = 0.7, 0.3, 0            # repeated, one per start state
//!
//! [integrator]
//! [outputs]
//! [certify]
//! ```
//!
//! Vectors are comma-separated; matrices are semicolon-separated rows.
//! Serializing a parsed config and re-parsing it reproduces the same values.

use evodyn_core::{
    CoRule, EpRule, IRule, IntegratorConfig, MemorylessGame, Method, PayoffMechanism,
    PopulationState, RuleSpec, WashoutFilter,
};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

fn perr(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub lambda: f64,
    pub k: f64,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

/// Weight keys accepted in a `[rule]` section, one per primitive.
pub const RULE_WEIGHT_KEYS: [&str; 7] = [
    "replicator",
    "imitation_sq",
    "smith",
    "index_exp",
    "bnn",
    "excess_sq",
    "abr",
];

pub const PRESET_NAMES: [&str; 8] = [
    "smith",
    "bnn",
    "abr",
    "polynomial_mix",
    "replicator_smith",
    "smith_abr",
    "composite_mix",
    "pure_replicator",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleConfig {
    pub preset: Option<String>,
    pub label: Option<String>,
    /// `(weight key, weight)` in file order.
    pub weights: Vec<(String, f64)>,
    pub abr_k: Option<u32>,
    pub abr_eps: Option<f64>,
}

impl RuleConfig {
    /// Display name: explicit label, else preset name, else a positional one.
    pub fn display_label(&self, idx: usize) -> String {
        self.label
            .clone()
            .or_else(|| self.preset.clone())
            .unwrap_or_else(|| format!("rule{}", idx + 1))
    }

    /// Build the rule. `allow_unchecked` admits the `pure_replicator` preset,
    /// which deliberately violates the hybrid cone constraint and exists only
    /// for counterexample runs.
    pub fn build(&self, allow_unchecked: bool) -> Result<RuleSpec, ConfigError> {
        if let Some(name) = &self.preset {
            if !self.weights.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "rule '{name}': preset and explicit weights are mutually exclusive"
                )));
            }
            return match name.as_str() {
                "smith" => Ok(RuleSpec::smith()),
                "bnn" => Ok(RuleSpec::bnn()),
                "abr" => {
                    let (k, eps) = self.abr_params()?;
                    RuleSpec::abr(k, eps).map_err(|e| ConfigError::Invalid(e.to_string()))
                }
                "polynomial_mix" => Ok(RuleSpec::polynomial_mix()),
                "replicator_smith" => Ok(RuleSpec::replicator_smith()),
                "smith_abr" => Ok(RuleSpec::smith_abr()),
                "composite_mix" => Ok(RuleSpec::composite_mix()),
                "pure_replicator" => {
                    if allow_unchecked {
                        Ok(RuleSpec::pure_replicator_unchecked())
                    } else {
                        Err(ConfigError::Invalid(
                            "preset 'pure_replicator' violates the hybrid cone constraint \
                             (alpha_co + alpha_ep must be positive) and is only available \
                             behind --pure-replicator"
                                .into(),
                        ))
                    }
                }
                other => Err(ConfigError::Invalid(format!(
                    "unknown rule preset '{other}' (known: {})",
                    PRESET_NAMES.join(", ")
                ))),
            };
        }
        if self.weights.is_empty() {
            return Err(ConfigError::Invalid(
                "rule section needs either 'preset' or at least one weight key".into(),
            ));
        }
        let mut imitation = Vec::new();
        let mut comparison = Vec::new();
        let mut excess = Vec::new();
        for (key, w) in &self.weights {
            match key.as_str() {
                "replicator" => imitation.push((*w, IRule::Replicator)),
                "imitation_sq" => imitation.push((*w, IRule::SquaredComparison)),
                "smith" => comparison.push((*w, CoRule::Smith)),
                "index_exp" => comparison.push((*w, CoRule::TargetIndexExp)),
                "bnn" => excess.push((*w, EpRule::Bnn)),
                "excess_sq" => excess.push((*w, EpRule::SquaredExcess)),
                "abr" => {
                    let (k, eps) = self.abr_params()?;
                    excess.push((*w, EpRule::Abr { k, eps }));
                }
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown rule weight key '{other}' (known: {})",
                        RULE_WEIGHT_KEYS.join(", ")
                    )))
                }
            }
        }
        RuleSpec::new(imitation, comparison, excess, None)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    fn abr_params(&self) -> Result<(u32, f64), ConfigError> {
        match (self.abr_k, self.abr_eps) {
            (Some(k), Some(eps)) => Ok((k, eps)),
            _ => Err(ConfigError::Invalid(
                "abr rules need both 'abr_k' and 'abr_eps'".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSettings {
    pub method: String,
    pub dt: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_max: Option<f64>,
    pub stop_speed: Option<f64>,
    pub record_stride: Option<usize>,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: "rk4_fixed".into(),
            dt: None,
            rel_tol: None,
            abs_tol: None,
            t_max: None,
            stop_speed: None,
            record_stride: None,
        }
    }
}

impl IntegratorSettings {
    pub fn to_core(&self) -> Result<IntegratorConfig, ConfigError> {
        let method = match self.method.as_str() {
            "rk4_fixed" => Method::Rk4Fixed,
            "rk45_adaptive" => Method::Rk45Adaptive,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown integrator method '{other}' (rk4_fixed | rk45_adaptive)"
                )))
            }
        };
        let mut cfg = IntegratorConfig {
            method,
            ..IntegratorConfig::default()
        };
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.t_max {
            cfg.t_max = v;
        }
        if let Some(v) = self.stop_speed {
            cfg.stop_speed = v;
        }
        if let Some(v) = self.record_stride {
            cfg.record_stride = v;
        }
        cfg.validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputsConfig {
    pub csv_dir: Option<String>,
    pub svg_path: Option<String>,
    pub report_path: Option<String>,
    pub certify_report_path: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CertifySettings {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub ni_points: Option<usize>,
    pub ccw_horizon: Option<f64>,
}

impl CertifySettings {
    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(10_000)
    }
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(7)
    }
    pub fn ni_points(&self) -> usize {
        self.ni_points.unwrap_or(200)
    }
    pub fn ccw_horizon(&self) -> f64 {
        self.ccw_horizon.unwrap_or(200.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub n: usize,
    pub game: GameConfig,
    pub filter: Option<FilterConfig>,
    pub rules: Vec<RuleConfig>,
    pub initial: Vec<Vec<f64>>,
    pub integrator: IntegratorSettings,
    pub outputs: OutputsConfig,
    pub certify: CertifySettings,
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| perr(line, format!("'{key}' expects a number, got '{value}'")))
}

fn parse_vec(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| perr(line, format!("'{key}' has a bad entry '{}'", tok.trim())))
        })
        .collect()
}

fn parse_matrix(line: usize, key: &str, value: &str) -> Result<Vec<Vec<f64>>, ConfigError> {
    value
        .split(';')
        .map(|row| parse_vec(line, key, row))
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_matrix(m: &[Vec<f64>]) -> String {
    m.iter().map(|r| fmt_vec(r)).collect::<Vec<_>>().join("; ")
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut name = String::new();
        let mut description = String::new();
        let mut n: Option<usize> = None;
        let mut game: Option<GameConfig> = None;
        let mut filter: Option<FilterConfig> = None;
        let mut rules: Vec<RuleConfig> = Vec::new();
        let mut initial: Vec<Vec<f64>> = Vec::new();
        let mut integrator = IntegratorSettings::default();
        let mut outputs = OutputsConfig::default();
        let mut certify = CertifySettings::default();

        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| perr(lineno, "unterminated section header"))?
                    .trim();
                section = header.to_string();
                match header {
                    "game" => {
                        if game.is_some() {
                            return Err(perr(lineno, "duplicate [game] section"));
                        }
                        game = Some(GameConfig {
                            matrix: Vec::new(),
                            offset: Vec::new(),
                        });
                    }
                    "filter" => {
                        if filter.is_some() {
                            return Err(perr(lineno, "duplicate [filter] section"));
                        }
                        filter = Some(FilterConfig {
                            lambda: f64::NAN,
                            k: f64::NAN,
                            matrix: Vec::new(),
                            offset: Vec::new(),
                        });
                    }
                    "rule" => rules.push(RuleConfig::default()),
                    "initial" | "integrator" | "outputs" | "certify" => {}
                    other => return Err(perr(lineno, format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(lineno, "expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            match section.as_str() {
                "" => match key {
                    "name" => name = value.to_string(),
                    "description" => description = value.to_string(),
                    "n" => {
                        n = Some(value.parse().map_err(|_| {
                            perr(lineno, format!("'n' expects an integer, got '{value}'"))
                        })?)
                    }
                    other => return Err(perr(lineno, format!("unknown top-level key '{other}'"))),
                },
                "game" => {
                    let g = game.as_mut().expect("section sets game");
                    match key {
                        "matrix" => g.matrix = parse_matrix(lineno, key, value)?,
                        "offset" => g.offset = parse_vec(lineno, key, value)?,
                        other => {
                            return Err(perr(lineno, format!("unknown [game] key '{other}'")))
                        }
                    }
                }
                "filter" => {
                    let f = filter.as_mut().expect("section sets filter");
                    match key {
                        "lambda" => f.lambda = parse_f64(lineno, key, value)?,
                        "k" => f.k = parse_f64(lineno, key, value)?,
                        "matrix" => f.matrix = parse_matrix(lineno, key, value)?,
                        "offset" => f.offset = parse_vec(lineno, key, value)?,
                        other => {
                            return Err(perr(lineno, format!("unknown [filter] key '{other}'")))
                        }
                    }
                }
                "rule" => {
                    let r = rules.last_mut().expect("section pushes rule");
                    match key {
                        "preset" => r.preset = Some(value.to_string()),
                        "label" => r.label = Some(value.to_string()),
                        "abr_k" => {
                            r.abr_k = Some(value.parse().map_err(|_| {
                                perr(lineno, format!("'abr_k' expects an integer, got '{value}'"))
                            })?)
                        }
                        "abr_eps" => r.abr_eps = Some(parse_f64(lineno, key, value)?),
                        k if RULE_WEIGHT_KEYS.contains(&k) => {
                            let w = parse_f64(lineno, key, value)?;
                            r.weights.push((k.to_string(), w));
                        }
                        other => {
                            return Err(perr(lineno, format!("unknown [rule] key '{other}'")))
                        }
                    }
                }
                "initial" => match key {
                    "x" => initial.push(parse_vec(lineno, key, value)?),
                    other => return Err(perr(lineno, format!("unknown [initial] key '{other}'"))),
                },
                "integrator" => match key {
                    "method" => integrator.method = value.to_string(),
                    "dt" => integrator.dt = Some(parse_f64(lineno, key, value)?),
                    "rel_tol" => integrator.rel_tol = Some(parse_f64(lineno, key, value)?),
                    "abs_tol" => integrator.abs_tol = Some(parse_f64(lineno, key, value)?),
                    "t_max" => integrator.t_max = Some(parse_f64(lineno, key, value)?),
                    "stop_speed" => integrator.stop_speed = Some(parse_f64(lineno, key, value)?),
                    "record_stride" => {
                        integrator.record_stride = Some(value.parse().map_err(|_| {
                            perr(
                                lineno,
                                format!("'record_stride' expects an integer, got '{value}'"),
                            )
                        })?)
                    }
                    other => {
                        return Err(perr(lineno, format!("unknown [integrator] key '{other}'")))
                    }
                },
                "outputs" => match key {
                    "csv_dir" => outputs.csv_dir = Some(value.to_string()),
                    "svg_path" => outputs.svg_path = Some(value.to_string()),
                    "report_path" => outputs.report_path = Some(value.to_string()),
                    "certify_report_path" => {
                        outputs.certify_report_path = Some(value.to_string())
                    }
                    other => return Err(perr(lineno, format!("unknown [outputs] key '{other}'"))),
                },
                "certify" => match key {
                    "samples" => {
                        certify.samples = Some(value.parse().map_err(|_| {
                            perr(lineno, format!("'samples' expects an integer, got '{value}'"))
                        })?)
                    }
                    "seed" => {
                        certify.seed = Some(value.parse().map_err(|_| {
                            perr(lineno, format!("'seed' expects an integer, got '{value}'"))
                        })?)
                    }
                    "ni_points" => {
                        certify.ni_points = Some(value.parse().map_err(|_| {
                            perr(
                                lineno,
                                format!("'ni_points' expects an integer, got '{value}'"),
                            )
                        })?)
                    }
                    "ccw_horizon" => certify.ccw_horizon = Some(parse_f64(lineno, key, value)?),
                    other => return Err(perr(lineno, format!("unknown [certify] key '{other}'"))),
                },
                other => return Err(perr(lineno, format!("key outside known section [{other}]"))),
            }
        }

        let game = game.ok_or_else(|| ConfigError::Invalid("missing [game] section".into()))?;
        let n = match n {
            Some(v) => v,
            None => game.offset.len(),
        };
        let cfg = Self {
            name,
            description,
            n,
            game,
            filter,
            rules,
            initial,
            integrator,
            outputs,
            certify,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n;
        if n < 2 {
            return Err(ConfigError::Invalid(format!(
                "need at least 2 strategies, got {n}"
            )));
        }
        if self.game.offset.len() != n
            || self.game.matrix.len() != n
            || self.game.matrix.iter().any(|r| r.len() != n)
        {
            return Err(ConfigError::Invalid(format!(
                "[game] dimensions do not match n = {n}"
            )));
        }
        if let Some(f) = &self.filter {
            if !f.lambda.is_finite() || !f.k.is_finite() {
                return Err(ConfigError::Invalid(
                    "[filter] needs both 'lambda' and 'k'".into(),
                ));
            }
            if f.offset.len() != n || f.matrix.len() != n || f.matrix.iter().any(|r| r.len() != n)
            {
                return Err(ConfigError::Invalid(format!(
                    "[filter] dimensions do not match n = {n}"
                )));
            }
        }
        if self.rules.is_empty() {
            return Err(ConfigError::Invalid(
                "need at least one [rule] section".into(),
            ));
        }
        if self.initial.is_empty() {
            return Err(ConfigError::Invalid(
                "need at least one start state in [initial]".into(),
            ));
        }
        for (i, x) in self.initial.iter().enumerate() {
            if x.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "initial state {} has length {}, expected {n}",
                    i + 1,
                    x.len()
                )));
            }
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields a config equal to `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        if !self.description.is_empty() {
            let _ = writeln!(out, "description = {}", self.description);
        }
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "\n[game]");
        let _ = writeln!(out, "matrix = {}", fmt_matrix(&self.game.matrix));
        let _ = writeln!(out, "offset = {}", fmt_vec(&self.game.offset));
        if let Some(f) = &self.filter {
            let _ = writeln!(out, "\n[filter]");
            let _ = writeln!(out, "lambda = {}", f.lambda);
            let _ = writeln!(out, "k = {}", f.k);
            let _ = writeln!(out, "matrix = {}", fmt_matrix(&f.matrix));
            let _ = writeln!(out, "offset = {}", fmt_vec(&f.offset));
        }
        for rule in &self.rules {
            let _ = writeln!(out, "\n[rule]");
            if let Some(p) = &rule.preset {
                let _ = writeln!(out, "preset = {p}");
            }
            if let Some(l) = &rule.label {
                let _ = writeln!(out, "label = {l}");
            }
            for (key, w) in &rule.weights {
                let _ = writeln!(out, "{key} = {w}");
            }
            if let Some(k) = rule.abr_k {
                let _ = writeln!(out, "abr_k = {k}");
            }
            if let Some(eps) = rule.abr_eps {
                let _ = writeln!(out, "abr_eps = {eps}");
            }
        }
        let _ = writeln!(out, "\n[initial]");
        for x in &self.initial {
            let _ = writeln!(out, "x = {}", fmt_vec(x));
        }
        let _ = writeln!(out, "\n[integrator]");
        let _ = writeln!(out, "method = {}", self.integrator.method);
        if let Some(v) = self.integrator.dt {
            let _ = writeln!(out, "dt = {v}");
        }
        if let Some(v) = self.integrator.rel_tol {
            let _ = writeln!(out, "rel_tol = {v}");
        }
        if let Some(v) = self.integrator.abs_tol {
            let _ = writeln!(out, "abs_tol = {v}");
        }
        if let Some(v) = self.integrator.t_max {
            let _ = writeln!(out, "t_max = {v}");
        }
        if let Some(v) = self.integrator.stop_speed {
            let _ = writeln!(out, "stop_speed = {v}");
        }
        if let Some(v) = self.integrator.record_stride {
            let _ = writeln!(out, "record_stride = {v}");
        }
        let o = &self.outputs;
        if o.csv_dir.is_some()
            || o.svg_path.is_some()
            || o.report_path.is_some()
            || o.certify_report_path.is_some()
        {
            let _ = writeln!(out, "\n[outputs]");
            if let Some(v) = &o.csv_dir {
                let _ = writeln!(out, "csv_dir = {v}");
            }
            if let Some(v) = &o.svg_path {
                let _ = writeln!(out, "svg_path = {v}");
            }
            if let Some(v) = &o.report_path {
                let _ = writeln!(out, "report_path = {v}");
            }
            if let Some(v) = &o.certify_report_path {
                let _ = writeln!(out, "certify_report_path = {v}");
            }
        }
        let c = &self.certify;
        if c.samples.is_some()
            || c.seed.is_some()
            || c.ni_points.is_some()
            || c.ccw_horizon.is_some()
        {
            let _ = writeln!(out, "\n[certify]");
            if let Some(v) = c.samples {
                let _ = writeln!(out, "samples = {v}");
            }
            if let Some(v) = c.seed {
                let _ = writeln!(out, "seed = {v}");
            }
            if let Some(v) = c.ni_points {
                let _ = writeln!(out, "ni_points = {v}");
            }
            if let Some(v) = c.ccw_horizon {
                let _ = writeln!(out, "ccw_horizon = {v}");
            }
        }
        out
    }

    pub fn build_mechanism(&self) -> Result<PayoffMechanism, ConfigError> {
        let game = MemorylessGame::affine(self.game.matrix.clone(), self.game.offset.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match &self.filter {
            None => Ok(PayoffMechanism::memoryless(game)),
            Some(f) => {
                let filter = WashoutFilter::new(f.lambda, f.k, f.matrix.clone(), f.offset.clone())
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                PayoffMechanism::washout(game, filter)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))
            }
        }
    }

    /// Build every rule, labeled. `allow_unchecked` is forwarded to
    /// [`RuleConfig::build`].
    pub fn build_rules(&self, allow_unchecked: bool) -> Result<Vec<(String, RuleSpec)>, ConfigError> {
        self.rules
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((r.display_label(i), r.build(allow_unchecked)?)))
            .collect()
    }

    pub fn build_initials(&self) -> Result<Vec<PopulationState>, ConfigError> {
        self.initial
            .iter()
            .enumerate()
            .map(|(i, x)| {
                PopulationState::new(x.clone()).map_err(|e| {
                    ConfigError::Invalid(format!("initial state {}: {e}", i + 1))
                })
            })
            .collect()
    }

    pub fn build_integrator(&self) -> Result<IntegratorConfig, ConfigError> {
        self.integrator.to_core()
    }
}
