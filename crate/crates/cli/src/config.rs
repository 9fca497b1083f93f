//! Flat `key=value` run configuration.
//!
//! Every key is optional and mirrors a field of the library's chain or
//! simulation config; `#` starts a comment. Unknown keys are rejected so
//! that typos surface instead of silently falling back to defaults. The
//! effective values are echoed into the report for auditability.

use std::collections::BTreeMap;
use std::path::Path;

use curerate::loan_tape::{ChainConfig, DisappearancePolicy, Weighting, ZeroRowPolicy};
use curerate::simulate::{SimConfig, StartSpec};
use curerate::loan_tape::StateIndex;
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethodChoice {
    Loglog,
    Nls,
    Both,
}

impl FitMethodChoice {
    pub fn parse(raw: &str) -> Result<Self, AppError> {
        match raw {
            "loglog" => Ok(FitMethodChoice::Loglog),
            "nls" => Ok(FitMethodChoice::Nls),
            "both" => Ok(FitMethodChoice::Both),
            other => Err(AppError::Usage(format!(
                "fit_method must be loglog, nls or both, got `{other}`"
            ))),
        }
    }
}

/// Effective run configuration after defaults, file and flag overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppConfig {
    /// Write-off threshold in months; derived from the matrix dimension
    /// when absent.
    pub n_writeoff: Option<usize>,
    pub npl_threshold: usize,
    /// True when the NPL threshold came from the file or a flag rather
    /// than the default, in which case it is never auto-capped.
    #[serde(skip)]
    pub npl_threshold_explicit: bool,
    pub delta: f64,
    pub month_length_days: u32,
    pub weighting: String,
    pub zero_row_policy: String,
    pub disappearance: String,
    pub date_tolerance_days: i64,
    pub edge_threshold: f64,
    pub fit_method: FitMethodChoice,
    pub clip_epsilon: f64,
    pub seed: u64,
    pub n_paths: u64,
    pub max_steps: usize,
    /// `all`, or a state index.
    pub start_state: String,
    /// Start composition over all states; overrides `start_state`.
    pub start_composition: Option<Vec<f64>>,
    pub horizon_years: usize,
    pub simulate: bool,
    pub threads: usize,
    /// Early-warning visit-time pairs, `from:to` state indices.
    pub early_warning_pairs: Vec<(usize, usize)>,
    #[serde(skip)]
    pub early_warning_explicit: bool,
    /// Published reference fit shown side by side with the computed one.
    pub reference_lambda: Option<f64>,
    pub reference_k: Option<f64>,
    pub reference_r_squared: Option<f64>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            n_writeoff: None,
            npl_threshold: 3,
            npl_threshold_explicit: false,
            delta: 0.5,
            month_length_days: 30,
            weighting: "count".into(),
            zero_row_policy: "lost".into(),
            disappearance: "lost".into(),
            date_tolerance_days: 15,
            edge_threshold: 0.0,
            fit_method: FitMethodChoice::Loglog,
            clip_epsilon: 0.0,
            seed: 0,
            n_paths: 100_000,
            max_steps: 1_000,
            start_state: "all".into(),
            start_composition: None,
            horizon_years: 10,
            simulate: false,
            threads: 0,
            early_warning_pairs: vec![(3, 5), (4, 5)],
            early_warning_explicit: false,
            reference_lambda: None,
            reference_k: None,
            reference_r_squared: None,
        }
    }
}

fn parse_pairs(raw: &str) -> Result<Vec<(usize, usize)>, String> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (from, to) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("expected `from:to`, got `{pair}`"))?;
            let from: usize = from.trim().parse().map_err(|e| format!("bad pair `{pair}`: {e}"))?;
            let to: usize = to.trim().parse().map_err(|e| format!("bad pair `{pair}`: {e}"))?;
            Ok((from, to))
        })
        .collect()
}

impl AppConfig {
    /// Loads a config file over the defaults. A missing path gives plain
    /// defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, AppError> {
        let mut cfg = AppConfig::default();
        let Some(path) = path else {
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            AppError::Parse(format!("cannot read config {}: {e}", path.display()))
        })?;
        for (line_no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                AppError::Parse(format!(
                    "{}:{}: expected key=value, got `{line}`",
                    path.display(),
                    line_no + 1
                ))
            })?;
            cfg.apply(key.trim(), value.trim()).map_err(|message| {
                AppError::Parse(format!("{}:{}: {message}", path.display(), line_no + 1))
            })?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| format!("bad {key}: {e}"))
        }
        match key {
            "n_writeoff" => self.n_writeoff = Some(num(key, value)?),
            "npl_threshold" => {
                self.npl_threshold = num(key, value)?;
                self.npl_threshold_explicit = true;
            }
            "delta" => self.delta = num(key, value)?,
            "month_length_days" => self.month_length_days = num(key, value)?,
            "weighting" => match value {
                "count" | "balance" => self.weighting = value.into(),
                other => return Err(format!("weighting must be count or balance, got `{other}`")),
            },
            "zero_row_policy" => match value {
                "lost" | "error" => self.zero_row_policy = value.into(),
                other => return Err(format!("zero_row_policy must be lost or error, got `{other}`")),
            },
            "disappearance" => match value {
                "lost" | "exclude" => self.disappearance = value.into(),
                other => return Err(format!("disappearance must be lost or exclude, got `{other}`")),
            },
            "date_tolerance_days" => self.date_tolerance_days = num(key, value)?,
            "edge_threshold" => self.edge_threshold = num(key, value)?,
            "fit_method" => {
                self.fit_method = FitMethodChoice::parse(value).map_err(|e| e.to_string())?
            }
            "clip_epsilon" => self.clip_epsilon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "n_paths" => self.n_paths = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "start_state" => self.start_state = value.into(),
            "start_composition" => {
                let weights: Result<Vec<f64>, _> =
                    value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                self.start_composition =
                    Some(weights.map_err(|e| format!("bad start_composition: {e}"))?);
            }
            "horizon_years" => self.horizon_years = num(key, value)?,
            "simulate" => match value {
                "true" | "1" => self.simulate = true,
                "false" | "0" => self.simulate = false,
                other => return Err(format!("simulate must be true or false, got `{other}`")),
            },
            "threads" => self.threads = num(key, value)?,
            "early_warning_pairs" => {
                self.early_warning_pairs = parse_pairs(value)?;
                self.early_warning_explicit = true;
            }
            "reference_lambda" => self.reference_lambda = Some(num(key, value)?),
            "reference_k" => self.reference_k = Some(num(key, value)?),
            "reference_r_squared" => self.reference_r_squared = Some(num(key, value)?),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Builds the library chain config for a known write-off threshold.
    pub fn chain_config(&self, n_writeoff: usize) -> Result<ChainConfig<f64>, AppError> {
        let mut cfg = ChainConfig::new(n_writeoff);
        cfg.npl_threshold = if self.npl_threshold_explicit {
            self.npl_threshold
        } else {
            // keep the default sensible for very short chains
            self.npl_threshold.min(n_writeoff.saturating_sub(1).max(1))
        };
        cfg.delta = self.delta;
        cfg.month_length_days = self.month_length_days;
        cfg.weighting = match self.weighting.as_str() {
            "balance" => Weighting::Balance,
            _ => Weighting::Count,
        };
        cfg.zero_row_policy = match self.zero_row_policy.as_str() {
            "error" => ZeroRowPolicy::Error,
            _ => ZeroRowPolicy::Lost,
        };
        cfg.disappearance = match self.disappearance.as_str() {
            "exclude" => DisappearancePolicy::Exclude,
            _ => DisappearancePolicy::Lost,
        };
        cfg.date_tolerance_days = self.date_tolerance_days;
        cfg.validate()
            .map_err(|e| AppError::Usage(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    /// Builds the simulation config for a chain with `n_states` states.
    pub fn sim_config(&self, n_states: usize) -> Result<SimConfig, AppError> {
        let start = if let Some(weights) = &self.start_composition {
            StartSpec::Composition(weights.clone())
        } else if self.start_state == "all" {
            StartSpec::AllTransient
        } else {
            let index: usize = self
                .start_state
                .parse()
                .map_err(|e| AppError::Usage(format!("bad start_state: {e}")))?;
            let state = StateIndex::from_index(index, n_states).ok_or_else(|| {
                AppError::Usage(format!(
                    "start_state {index} out of range for {n_states} states"
                ))
            })?;
            StartSpec::State(state)
        };
        Ok(SimConfig {
            seed: self.seed,
            n_paths: self.n_paths,
            max_steps: self.max_steps,
            start,
        })
    }

    /// Early-warning pairs that apply to a chain with `n_states` states.
    /// Default pairs outside the state space are dropped quietly; pairs
    /// the user asked for are validated strictly.
    pub fn early_warning_pairs_for(&self, n_states: usize) -> Result<Vec<(usize, usize)>, AppError> {
        let mut pairs = Vec::new();
        for &(from, to) in &self.early_warning_pairs {
            let in_range = (2..n_states).contains(&from) && (2..n_states).contains(&to);
            if in_range {
                pairs.push((from, to));
            } else if self.early_warning_explicit {
                return Err(AppError::Usage(format!(
                    "early-warning pair {from}:{to} references states outside 2..{n_states}"
                )));
            }
        }
        Ok(pairs)
    }

    /// Peeks at a matrix CSV to determine the chain size when the config
    /// does not pin one.
    pub fn n_writeoff_for_matrix(&self, matrix_path: &Path) -> Result<usize, AppError> {
        if let Some(n) = self.n_writeoff {
            return Ok(n);
        }
        let text = std::fs::read_to_string(matrix_path).map_err(|e| {
            AppError::Parse(format!("cannot read {}: {e}", matrix_path.display()))
        })?;
        let rows = text.lines().filter(|l| !l.trim().is_empty()).count();
        if rows < 4 {
            return Err(AppError::Invariant(format!(
                "matrix in {} has {rows} rows; need at least 4 states",
                matrix_path.display()
            )));
        }
        Ok(rows - 2)
    }
}

/// Serializable echo of every effective setting, embedded in reports.
pub fn config_echo(cfg: &AppConfig, n_writeoff: usize) -> BTreeMap<String, serde_json::Value> {
    use serde_json::json;
    let mut echo = BTreeMap::new();
    echo.insert("n_writeoff".into(), json!(n_writeoff));
    echo.insert("npl_threshold".into(), json!(cfg.npl_threshold));
    echo.insert("delta".into(), json!(cfg.delta));
    echo.insert("month_length_days".into(), json!(cfg.month_length_days));
    echo.insert("weighting".into(), json!(cfg.weighting));
    echo.insert("zero_row_policy".into(), json!(cfg.zero_row_policy));
    echo.insert("disappearance".into(), json!(cfg.disappearance));
    echo.insert("date_tolerance_days".into(), json!(cfg.date_tolerance_days));
    echo.insert("edge_threshold".into(), json!(cfg.edge_threshold));
    echo.insert(
        "fit_method".into(),
        json!(match cfg.fit_method {
            FitMethodChoice::Loglog => "loglog",
            FitMethodChoice::Nls => "nls",
            FitMethodChoice::Both => "both",
        }),
    );
    echo.insert("clip_epsilon".into(), json!(cfg.clip_epsilon));
    echo.insert("seed".into(), json!(cfg.seed));
    echo.insert("n_paths".into(), json!(cfg.n_paths));
    echo.insert("max_steps".into(), json!(cfg.max_steps));
    echo.insert("start_state".into(), json!(cfg.start_state));
    echo.insert("start_composition".into(), json!(cfg.start_composition));
    echo.insert("horizon_years".into(), json!(cfg.horizon_years));
    echo.insert("simulate".into(), json!(cfg.simulate));
    echo.insert("threads".into(), json!(cfg.threads));
    echo.insert(
        "early_warning_pairs".into(),
        json!(cfg
            .early_warning_pairs
            .iter()
            .map(|(f, t)| format!("{f}:{t}"))
            .collect::<Vec<_>>()),
    );
    echo.insert("reference_lambda".into(), json!(cfg.reference_lambda));
    echo.insert("reference_k".into(), json!(cfg.reference_k));
    echo.insert("reference_r_squared".into(), json!(cfg.reference_r_squared));
    echo
}
