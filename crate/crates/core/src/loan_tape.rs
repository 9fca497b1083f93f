//! Loan-tape ingestion: state assignment and annual snapshot pairing.
//!
//! A loan tape is a point-in-time listing of loans with their delinquency.
//! Two tapes one year apart yield one observed state transition per loan,
//! which is the raw material for estimating the migration matrix.
//!
//! State semantics, with `N` the write-off threshold in months:
//!
//! * `S0` — cured (performing, absorbing)
//! * `S1` — lost (written off, absorbing)
//! * `S2` — forborne (concessions granted, resolves within a year)
//! * `S(m+2)` — `m` whole months past due, `m = 1 .. N-1`
//!
//! So `S5` is the first non-performing state when the NPL threshold is the
//! usual three months.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{Months, NaiveDate};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("snapshots are not one year apart: {prev} -> {curr} (tolerance ±{tolerance_days} days)")]
    DateMismatch {
        prev: NaiveDate,
        curr: NaiveDate,
        tolerance_days: i64,
    },
    #[error("duplicate loan id `{loan_id}` for as-of date {as_of}")]
    DuplicateLoan { loan_id: String, as_of: NaiveDate },
    #[error("snapshot file mixes as-of dates {first} and {second}")]
    MixedDates { first: NaiveDate, second: NaiveDate },
    #[error("snapshot file contains no rows")]
    EmptySnapshot,
    #[error("{path}:{line}: {message}")]
    InvalidField {
        path: String,
        line: u64,
        message: String,
    },
    #[error("missing or wrong header: expected `{expected}`")]
    BadHeader { expected: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("write-off threshold must exceed the NPL threshold: N={n_writeoff}, npl={npl_threshold}")]
    ThresholdOrder { n_writeoff: usize, npl_threshold: usize },
    #[error("NPL threshold must be at least 1 month")]
    NplTooSmall,
    #[error("delta must lie strictly between 0 and 1, got {0}")]
    DeltaOutOfRange(f64),
    #[error("month length must be positive")]
    ZeroMonthLength,
}

/// How observations are weighted when estimating transition probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Every loan counts as one observation.
    #[default]
    Count,
    /// Observations carry the loan balance at the earlier date.
    Balance,
}

/// What to do with a transient state that has no observed exits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroRowPolicy {
    /// Impute the row as going to lost with probability one. Conservative:
    /// it can only bias the cure rate downward.
    #[default]
    Lost,
    /// Refuse to estimate; strict-audit mode.
    Error,
}

/// How to treat loans that are present in the earlier tape but missing
/// from the later one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DisappearancePolicy {
    /// Treat the loan as lost (conservative for provisioning).
    #[default]
    Lost,
    /// Drop the loan from the observation set.
    Exclude,
}

/// Chain layout and ingestion conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig<T> {
    /// Write-off threshold in months: a loan `N` or more months past due
    /// is considered lost.
    pub n_writeoff: usize,
    /// Months past due at which a loan becomes non-performing.
    pub npl_threshold: usize,
    /// Abscissa of the forborne survival point, strictly inside (0, 1).
    pub delta: T,
    /// Days per delinquency bucket when converting days past due to months.
    pub month_length_days: u32,
    pub weighting: Weighting,
    pub zero_row_policy: ZeroRowPolicy,
    pub disappearance: DisappearancePolicy,
    /// Acceptable slack, in days, around the one-year snapshot spacing.
    pub date_tolerance_days: i64,
}

impl<T: Scalar> ChainConfig<T> {
    /// Conventions used throughout: 3-month NPL threshold, 30-day months,
    /// count weighting, forborne point at 0.5.
    pub fn new(n_writeoff: usize) -> Self {
        ChainConfig {
            n_writeoff,
            npl_threshold: 3,
            delta: T::from_f64(0.5),
            month_length_days: 30,
            weighting: Weighting::default(),
            zero_row_policy: ZeroRowPolicy::default(),
            disappearance: DisappearancePolicy::default(),
            date_tolerance_days: 15,
        }
    }

    /// Total number of chain states: cured, lost, forborne and the past-due
    /// months `1 .. N-1`.
    pub fn n_states(&self) -> usize {
        self.n_writeoff + 2
    }

    /// Number of transient states (everything except cured and lost).
    pub fn n_transient(&self) -> usize {
        self.n_writeoff
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.npl_threshold < 1 {
            return Err(ConfigError::NplTooSmall);
        }
        if self.n_writeoff <= self.npl_threshold {
            return Err(ConfigError::ThresholdOrder {
                n_writeoff: self.n_writeoff,
                npl_threshold: self.npl_threshold,
            });
        }
        let delta = self.delta.to_f64_lossy();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(ConfigError::DeltaOutOfRange(delta));
        }
        if self.month_length_days == 0 {
            return Err(ConfigError::ZeroMonthLength);
        }
        Ok(())
    }
}

/// Position of a state in the canonical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateIndex(usize);

impl StateIndex {
    pub const CURED: StateIndex = StateIndex(0);
    pub const LOST: StateIndex = StateIndex(1);
    pub const FORBORNE: StateIndex = StateIndex(2);

    /// State for a loan `months` whole months past due (`months >= 1`).
    pub fn past_due(months: usize) -> StateIndex {
        assert!(months >= 1, "past-due state requires at least one month");
        StateIndex(months + 2)
    }

    pub fn from_index(index: usize, n_states: usize) -> Option<StateIndex> {
        (index < n_states).then_some(StateIndex(index))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_absorbing(self) -> bool {
        self.0 <= 1
    }

    pub fn is_transient(self) -> bool {
        self.0 >= 2
    }

    /// Months past due encoded by this state, if it is a past-due state.
    pub fn past_due_months(self) -> Option<usize> {
        (self.0 >= 3).then(|| self.0 - 2)
    }
}

impl fmt::Display for StateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// One loan as of one tape date.
#[derive(Debug, Clone, PartialEq)]
pub struct LoanSnapshot {
    pub loan_id: String,
    pub as_of: NaiveDate,
    pub days_past_due: u32,
    pub forborne: bool,
    pub balance: f64,
}

/// A loan observed in two consecutive annual tapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTransition<T> {
    pub loan_id: String,
    pub from_state: StateIndex,
    pub to_state: StateIndex,
    pub weight: T,
}

/// Maps a snapshot to its chain state.
///
/// Whole months past due are `floor(days_past_due / month_length_days)`;
/// with 30-day buckets, "more than 90 days" coincides with three months.
/// Forbearance takes precedence for loans that are not already past the
/// NPL threshold, and the write-off threshold takes precedence over
/// everything.
pub fn assign_state<T: Scalar>(snapshot: &LoanSnapshot, cfg: &ChainConfig<T>) -> StateIndex {
    let months = (snapshot.days_past_due / cfg.month_length_days) as usize;
    if months >= cfg.n_writeoff {
        return StateIndex::LOST;
    }
    if snapshot.forborne && months < cfg.npl_threshold {
        return StateIndex::FORBORNE;
    }
    if months == 0 {
        return StateIndex::CURED;
    }
    StateIndex::past_due(months)
}

fn index_by_loan(
    snapshots: &[LoanSnapshot],
) -> Result<(NaiveDate, BTreeMap<&str, &LoanSnapshot>), TapeError> {
    let first = snapshots.first().ok_or(TapeError::EmptySnapshot)?;
    let mut map: BTreeMap<&str, &LoanSnapshot> = BTreeMap::new();
    for snap in snapshots {
        if snap.as_of != first.as_of {
            return Err(TapeError::MixedDates {
                first: first.as_of,
                second: snap.as_of,
            });
        }
        if map.insert(snap.loan_id.as_str(), snap).is_some() {
            return Err(TapeError::DuplicateLoan {
                loan_id: snap.loan_id.clone(),
                as_of: snap.as_of,
            });
        }
    }
    Ok((first.as_of, map))
}

/// Pairs two annual snapshots into observed transitions.
///
/// Only loans in a transient state at the earlier date produce
/// observations. A forborne loan maps to cured when it is performing and
/// no longer forborne a year later, and to lost otherwise. Loans missing
/// from the later tape follow the disappearance policy. The result is
/// sorted by loan id, so the output does not depend on input order.
pub fn pair_snapshots<T: Scalar>(
    prev: &[LoanSnapshot],
    curr: &[LoanSnapshot],
    cfg: &ChainConfig<T>,
) -> Result<Vec<ObservedTransition<T>>, TapeError> {
    let (prev_date, prev_by_loan) = index_by_loan(prev)?;
    let (curr_date, curr_by_loan) = index_by_loan(curr)?;

    let expected = prev_date
        .checked_add_months(Months::new(12))
        .expect("date arithmetic stays in range");
    let slack = (curr_date - expected).num_days().abs();
    if slack > cfg.date_tolerance_days {
        return Err(TapeError::DateMismatch {
            prev: prev_date,
            curr: curr_date,
            tolerance_days: cfg.date_tolerance_days,
        });
    }

    let mut transitions = Vec::new();
    for (loan_id, prev_snap) in prev_by_loan {
        let from_state = assign_state(prev_snap, cfg);
        if from_state.is_absorbing() {
            continue;
        }
        let to_state = match curr_by_loan.get(loan_id) {
            Some(curr_snap) => {
                if from_state == StateIndex::FORBORNE {
                    // a forborne loan either regains regular status within
                    // the year or is considered lost
                    let months = (curr_snap.days_past_due / cfg.month_length_days) as usize;
                    if months == 0 && !curr_snap.forborne {
                        StateIndex::CURED
                    } else {
                        StateIndex::LOST
                    }
                } else {
                    assign_state(curr_snap, cfg)
                }
            }
            None => match cfg.disappearance {
                DisappearancePolicy::Lost => StateIndex::LOST,
                DisappearancePolicy::Exclude => continue,
            },
        };
        let weight = match cfg.weighting {
            Weighting::Count => T::one(),
            Weighting::Balance => T::from_f64(prev_snap.balance),
        };
        if weight <= T::zero() {
            // zero-balance loans carry no information under balance weighting
            continue;
        }
        transitions.push(ObservedTransition {
            loan_id: loan_id.to_string(),
            from_state,
            to_state,
            weight,
        });
    }
    Ok(transitions)
}

const SNAPSHOT_HEADER: [&str; 5] = ["loan_id", "as_of", "days_past_due", "forborne", "balance"];
const TRANSITIONS_HEADER: [&str; 4] = ["loan_id", "state_from", "state_to", "weight"];

fn parse_bool(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "0" | "false" => Some(false),
        "1" | "true" => Some(true),
        _ => None,
    }
}

/// Reads a snapshot CSV with header `loan_id,as_of,days_past_due,forborne,balance`.
pub fn read_snapshots_csv(path: &Path) -> Result<Vec<LoanSnapshot>, TapeError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| TapeError::Csv {
            path: display.clone(),
            source,
        })?;
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(SNAPSHOT_HEADER))
        .unwrap_or(false);
    if !header_ok {
        return Err(TapeError::BadHeader {
            expected: SNAPSHOT_HEADER.join(","),
        });
    }

    let field = |record: &csv::StringRecord, idx: usize, line: u64| -> Result<String, TapeError> {
        record
            .get(idx)
            .map(str::to_string)
            .ok_or_else(|| TapeError::InvalidField {
                path: display.clone(),
                line,
                message: format!("missing column `{}`", SNAPSHOT_HEADER[idx]),
            })
    };

    let mut snapshots = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| TapeError::Csv {
            path: display.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let invalid = |message: String| TapeError::InvalidField {
            path: display.clone(),
            line,
            message,
        };

        let loan_id = field(&record, 0, line)?;
        if loan_id.is_empty() {
            return Err(invalid("empty loan_id".into()));
        }
        let as_of = NaiveDate::parse_from_str(&field(&record, 1, line)?, "%Y-%m-%d")
            .map_err(|e| invalid(format!("bad as_of date: {e}")))?;
        let days_past_due: u32 = field(&record, 2, line)?
            .parse()
            .map_err(|e| invalid(format!("bad days_past_due: {e}")))?;
        let forborne = parse_bool(&field(&record, 3, line)?)
            .ok_or_else(|| invalid("forborne must be one of 0,1,true,false".into()))?;
        let balance: f64 = field(&record, 4, line)?
            .parse()
            .map_err(|e| invalid(format!("bad balance: {e}")))?;
        if !balance.is_finite() || balance < 0.0 {
            return Err(invalid(format!("balance must be non-negative, got {balance}")));
        }
        snapshots.push(LoanSnapshot {
            loan_id,
            as_of,
            days_past_due,
            forborne,
            balance,
        });
    }
    Ok(snapshots)
}

/// Reads observed transitions directly from CSV with header
/// `loan_id,state_from,state_to,weight`; states are canonical indices.
pub fn read_transitions_csv<T: Scalar>(
    path: &Path,
    cfg: &ChainConfig<T>,
) -> Result<Vec<ObservedTransition<T>>, TapeError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| TapeError::Csv {
            path: display.clone(),
            source,
        })?;
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(TRANSITIONS_HEADER))
        .unwrap_or(false);
    if !header_ok {
        return Err(TapeError::BadHeader {
            expected: TRANSITIONS_HEADER.join(","),
        });
    }

    let n_states = cfg.n_states();
    let mut transitions = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| TapeError::Csv {
            path: display.clone(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let invalid = |message: String| TapeError::InvalidField {
            path: display.clone(),
            line,
            message,
        };

        let loan_id = record.get(0).unwrap_or("").to_string();
        let parse_state = |raw: Option<&str>, which: &str| -> Result<StateIndex, TapeError> {
            let idx: usize = raw
                .unwrap_or("")
                .parse()
                .map_err(|e| invalid(format!("bad {which}: {e}")))?;
            StateIndex::from_index(idx, n_states)
                .ok_or_else(|| invalid(format!("{which} {idx} out of range (0..{n_states})")))
        };
        let from_state = parse_state(record.get(1), "state_from")?;
        let to_state = parse_state(record.get(2), "state_to")?;
        if from_state.is_absorbing() {
            return Err(invalid(format!(
                "state_from {from_state} is absorbing and cannot emit observations"
            )));
        }
        let weight_raw: f64 = record
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|e| invalid(format!("bad weight: {e}")))?;
        if !(weight_raw.is_finite() && weight_raw > 0.0) {
            return Err(invalid(format!("weight must be positive, got {weight_raw}")));
        }
        transitions.push(ObservedTransition {
            loan_id,
            from_state,
            to_state,
            weight: T::from_f64(weight_raw),
        });
    }
    transitions.sort_by(|a, b| a.loan_id.cmp(&b.loan_id));
    Ok(transitions)
}
