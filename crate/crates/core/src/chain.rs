//! Transition-matrix estimation, canonical block form and applicability
//! classification.
//!
//! The canonical ordering puts the two absorbing states first, so the
//! matrix has the block structure
//!
//! ```text
//!     | I  0 |
//! A = |------|
//!     | T  S |
//! ```
//!
//! with `T` the transient-to-absorbing block and `S` the transient-to-
//! transient block. The cure-rate construction is valid exactly when every
//! non-absorbing state is transient; a closed communication class among
//! them means loans cycle without resolving and the model must refuse.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use petgraph::graph::DiGraph;
use thiserror::Error;

use crate::diagnostics::{Warning, WarningCode};
use crate::loan_tape::{ChainConfig, ObservedTransition, StateIndex, ZeroRowPolicy};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Row-sum tolerance for matrices produced by estimation.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;
/// Row-sum slack accepted when reading matrices from file; printed
/// matrices are typically rounded to two or three decimals.
pub const FILE_ROW_SUM_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Error)]
pub enum MatrixSpecError {
    #[error("transition matrix must be {expected}x{expected} for N={n_writeoff}, got {rows}x{cols}")]
    BadShape {
        expected: usize,
        n_writeoff: usize,
        rows: usize,
        cols: usize,
    },
    #[error("entry ({row},{col}) = {value} lies outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, outside tolerance {tolerance}")]
    RowSum { row: usize, sum: f64, tolerance: f64 },
    #[error("row {row} must be the unit vector of an absorbing state")]
    AbsorbingRow { row: usize },
    #[error("forborne row has mass {value} on column {col}; only cured and lost are reachable")]
    ForborneSupport { col: usize, value: f64 },
    #[error("config error: {0}")]
    Config(#[from] crate::loan_tape::ConfigError),
}

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("no observations supplied")]
    EmptyInput,
    #[error("state {0} has no observed exits (zero-row policy is `error`)")]
    ZeroRow(StateIndex),
    #[error("loan `{loan_id}`: observation starts in absorbing state {state}")]
    AbsorbingSource { loan_id: String, state: StateIndex },
    #[error("loan `{loan_id}`: state {state} out of range for {n_states} states")]
    StateOutOfRange {
        loan_id: String,
        state: StateIndex,
        n_states: usize,
    },
    #[error("loan `{loan_id}`: forborne loans resolve to cured or lost, not {to}")]
    ForborneTarget { loan_id: String, to: StateIndex },
    #[error("loan `{loan_id}`: weight must be positive")]
    NonPositiveWeight { loan_id: String },
    #[error(transparent)]
    Matrix(#[from] MatrixSpecError),
}

#[derive(Debug, Error)]
pub enum MatrixReadError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] MatrixSpecError),
}

/// Row-stochastic transition matrix in canonical state order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T> {
    entries: Matrix<T>,
    cfg: ChainConfig<T>,
}

impl<T: Scalar> TransitionMatrix<T> {
    /// Validates the canonical-form invariants and wraps the entries.
    pub fn new(entries: Matrix<T>, cfg: ChainConfig<T>) -> Result<Self, MatrixSpecError> {
        cfg.validate()?;
        let n = cfg.n_states();
        if entries.n_rows() != n || entries.n_cols() != n {
            return Err(MatrixSpecError::BadShape {
                expected: n,
                n_writeoff: cfg.n_writeoff,
                rows: entries.n_rows(),
                cols: entries.n_cols(),
            });
        }
        let zero = T::zero();
        let one = T::one();
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if v < zero || v > one {
                    return Err(MatrixSpecError::EntryOutOfRange {
                        row: i,
                        col: j,
                        value: v.to_f64_lossy(),
                    });
                }
            }
        }
        for row in 0..2 {
            let unit = (0..n).all(|j| {
                let expected = if j == row { one } else { zero };
                entries[(row, j)] == expected
            });
            if !unit {
                return Err(MatrixSpecError::AbsorbingRow { row });
            }
        }
        for col in 2..n {
            let v = entries[(2, col)];
            if v != zero {
                return Err(MatrixSpecError::ForborneSupport {
                    col,
                    value: v.to_f64_lossy(),
                });
            }
        }
        // 1e-9 matches double precision; wider scalars get a floor scaled
        // to their own epsilon so renormalized rows always pass
        let tolerance = T::from_f64(ROW_SUM_TOLERANCE).max(T::epsilon() * T::from_f64((64 * n) as f64));
        for i in 0..n {
            let sum: T = entries.row(i).iter().copied().sum();
            if (sum - one).abs() > tolerance {
                return Err(MatrixSpecError::RowSum {
                    row: i,
                    sum: sum.to_f64_lossy(),
                    tolerance: ROW_SUM_TOLERANCE,
                });
            }
        }
        Ok(TransitionMatrix { entries, cfg })
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn cfg(&self) -> &ChainConfig<T> {
        &self.cfg
    }

    pub fn n_states(&self) -> usize {
        self.cfg.n_states()
    }

    pub fn probability(&self, from: StateIndex, to: StateIndex) -> T {
        self.entries[(from.index(), to.index())]
    }
}

/// The `T` and `S` blocks of the canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks<T> {
    /// Transient-to-absorbing probabilities, `n_transient x 2`.
    pub to_absorbing: Matrix<T>,
    /// Transient-to-transient probabilities, `n_transient x n_transient`.
    pub within_transient: Matrix<T>,
}

/// Extracts the blocks exactly as they sit in the matrix; no renormalization.
pub fn to_blocks<T: Scalar>(matrix: &TransitionMatrix<T>) -> Blocks<T> {
    let n = matrix.n_states();
    let m = n - 2;
    let entries = matrix.entries();
    let mut to_absorbing = Matrix::zeros(m, 2);
    let mut within_transient = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..2 {
            to_absorbing[(i, j)] = entries[(i + 2, j)];
        }
        for j in 0..m {
            within_transient[(i, j)] = entries[(i + 2, j + 2)];
        }
    }
    Blocks {
        to_absorbing,
        within_transient,
    }
}

/// One communication class of the chain digraph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunicationClass {
    /// Member state indices, ascending.
    pub members: Vec<usize>,
    /// True when no edge leaves the class.
    pub closed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Every non-absorbing state is transient; absorption analysis applies.
    Applicable,
    /// Some non-absorbing states form a closed class; loans can cycle
    /// forever and the cure-rate construction is meaningless.
    Cyclic,
}

/// Communication-class decomposition plus the applicability verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub classes: Vec<CommunicationClass>,
    pub verdict: Verdict,
    /// Closed classes other than the two absorbing singletons.
    pub offending_classes: Vec<Vec<usize>>,
}

impl Classification {
    pub fn is_applicable(&self) -> bool {
        self.verdict == Verdict::Applicable
    }
}

/// Decomposes the chain into strongly connected components and flags
/// closed classes among the non-absorbing states.
///
/// An edge `i -> j` exists when `p(i,j) > edge_threshold`; the threshold
/// defaults to zero and exists because estimation noise can spuriously
/// open an otherwise closed class.
pub fn classify<T: Scalar>(matrix: &TransitionMatrix<T>, edge_threshold: T) -> Classification {
    let n = matrix.n_states();
    let entries = matrix.entries();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n / 4);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if entries[(i, j)] > edge_threshold {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }

    let mut classes: Vec<CommunicationClass> = petgraph::algo::tarjan_scc(&graph)
        .into_iter()
        .map(|component| {
            let mut members: Vec<usize> = component.into_iter().map(|ix| ix.index()).collect();
            members.sort_unstable();
            let closed = members.iter().all(|&i| {
                (0..n).all(|j| members.contains(&j) || !(entries[(i, j)] > edge_threshold))
            });
            CommunicationClass { members, closed }
        })
        .collect();
    classes.sort_by(|a, b| a.members.cmp(&b.members));

    let offending_classes: Vec<Vec<usize>> = classes
        .iter()
        .filter(|c| c.closed && c.members != [0] && c.members != [1])
        .map(|c| c.members.clone())
        .collect();
    let verdict = if offending_classes.is_empty() {
        Verdict::Applicable
    } else {
        Verdict::Cyclic
    };
    Classification {
        classes,
        verdict,
        offending_classes,
    }
}

/// Estimation output: the matrix plus per-row bookkeeping for audit.
#[derive(Debug, Clone)]
pub struct EstimatedMatrix<T> {
    pub matrix: TransitionMatrix<T>,
    /// Number of observations leaving each state.
    pub observations: Vec<u64>,
    /// Total observation weight leaving each state.
    pub weight_out: Vec<T>,
    /// Transient states whose rows were imputed under the zero-row policy.
    pub imputed: Vec<StateIndex>,
    pub warnings: Vec<Warning>,
}

/// Estimates the transition matrix as the weight-share of observed moves
/// out of each transient state.
pub fn estimate<T: Scalar>(
    transitions: &[ObservedTransition<T>],
    cfg: &ChainConfig<T>,
) -> Result<EstimatedMatrix<T>, EstimateError> {
    cfg.validate().map_err(MatrixSpecError::Config)?;
    if transitions.is_empty() {
        return Err(EstimateError::EmptyInput);
    }
    let n = cfg.n_states();
    let mut weight = Matrix::<T>::zeros(n, n);
    let mut observations = vec![0u64; n];
    let mut weight_out = vec![T::zero(); n];

    for t in transitions {
        let (from, to) = (t.from_state, t.to_state);
        for state in [from, to] {
            if state.index() >= n {
                return Err(EstimateError::StateOutOfRange {
                    loan_id: t.loan_id.clone(),
                    state,
                    n_states: n,
                });
            }
        }
        if from.is_absorbing() {
            return Err(EstimateError::AbsorbingSource {
                loan_id: t.loan_id.clone(),
                state: from,
            });
        }
        if from == StateIndex::FORBORNE && to.is_transient() {
            return Err(EstimateError::ForborneTarget {
                loan_id: t.loan_id.clone(),
                to,
            });
        }
        if !(t.weight > T::zero()) {
            return Err(EstimateError::NonPositiveWeight {
                loan_id: t.loan_id.clone(),
            });
        }
        weight[(from.index(), to.index())] = weight[(from.index(), to.index())] + t.weight;
        observations[from.index()] += 1;
        weight_out[from.index()] = weight_out[from.index()] + t.weight;
    }

    let mut entries = Matrix::<T>::zeros(n, n);
    entries[(0, 0)] = T::one();
    entries[(1, 1)] = T::one();
    let mut imputed = Vec::new();
    let mut warnings = Vec::new();
    for i in 2..n {
        let out = weight_out[i];
        if out > T::zero() {
            for j in 0..n {
                entries[(i, j)] = weight[(i, j)] / out;
            }
        } else {
            let state = StateIndex::from_index(i, n).expect("index in range");
            match cfg.zero_row_policy {
                ZeroRowPolicy::Error => return Err(EstimateError::ZeroRow(state)),
                ZeroRowPolicy::Lost => {
                    entries[(i, 1)] = T::one();
                    imputed.push(state);
                    warnings.push(Warning::new(
                        WarningCode::ZeroRowImputed,
                        format!("state {state} has no observed exits; imputed as lost"),
                    ));
                }
            }
        }
    }

    let matrix = TransitionMatrix::new(entries, cfg.clone())?;
    Ok(EstimatedMatrix {
        matrix,
        observations,
        weight_out,
        imputed,
        warnings,
    })
}

/// Reads a transition matrix from a headerless CSV of `n_states` rows.
///
/// Rows may be rounded (for example copied from printed sources), so any
/// row summing to one within `FILE_ROW_SUM_TOLERANCE` is renormalized; a
/// warning records every adjustment above `ROW_SUM_TOLERANCE`. When `cfg`
/// is `None`, the write-off threshold is derived from the file dimension
/// and the NPL threshold capped below it.
pub fn read_matrix_csv<T: Scalar>(
    path: &Path,
    cfg: Option<ChainConfig<T>>,
) -> Result<(TransitionMatrix<T>, Vec<Warning>), MatrixReadError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| MatrixReadError::Io {
        path: display.clone(),
        source,
    })?;

    let mut rows: Vec<Vec<T>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: Result<Vec<T>, _> = trimmed
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map(T::from_f64)
                    .map_err(|e| MatrixReadError::Parse {
                        path: display.clone(),
                        line: line_no + 1,
                        message: format!("bad number `{}`: {e}", cell.trim()),
                    })
            })
            .collect();
        rows.push(row?);
    }

    let n = rows.len();
    let square = n >= 4 && rows.iter().all(|r| r.len() == n);
    if !square {
        let cols = rows.first().map_or(0, Vec::len);
        return Err(MatrixSpecError::BadShape {
            expected: n.max(4),
            n_writeoff: n.saturating_sub(2),
            rows: n,
            cols,
        }
        .into());
    }

    let cfg = match cfg {
        Some(cfg) => {
            if cfg.n_states() != n {
                return Err(MatrixSpecError::BadShape {
                    expected: cfg.n_states(),
                    n_writeoff: cfg.n_writeoff,
                    rows: n,
                    cols: n,
                }
                .into());
            }
            cfg
        }
        None => {
            let mut cfg = ChainConfig::<T>::new(n - 2);
            cfg.npl_threshold = cfg.npl_threshold.min(cfg.n_writeoff - 1);
            cfg
        }
    };

    let mut warnings = Vec::new();
    let mut entries = Matrix::zeros(n, n);
    let file_tol = T::from_f64(FILE_ROW_SUM_TOLERANCE);
    let warn_tol = T::from_f64(ROW_SUM_TOLERANCE);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v < T::zero() || v > T::one() {
                return Err(MatrixSpecError::EntryOutOfRange {
                    row: i,
                    col: j,
                    value: v.to_f64_lossy(),
                }
                .into());
            }
        }
        if i < 2 {
            // absorbing rows must be unit vectors up to print rounding
            let ok = row.iter().enumerate().all(|(j, &v)| {
                let target = if j == i { T::one() } else { T::zero() };
                (v - target).abs() <= file_tol
            });
            if !ok {
                return Err(MatrixSpecError::AbsorbingRow { row: i }.into());
            }
            let adjustment: T = row
                .iter()
                .enumerate()
                .map(|(j, &v)| (v - if j == i { T::one() } else { T::zero() }).abs())
                .sum();
            if adjustment > warn_tol {
                warnings.push(Warning::new(
                    WarningCode::RowRenormalized,
                    format!("absorbing row {i} snapped to the unit vector"),
                ));
            }
            entries[(i, i)] = T::one();
            continue;
        }
        let mut row = row.clone();
        if i == 2 {
            for (j, v) in row.iter_mut().enumerate().skip(2) {
                if *v > file_tol {
                    return Err(MatrixSpecError::ForborneSupport {
                        col: j,
                        value: v.to_f64_lossy(),
                    }
                    .into());
                }
                if *v > T::zero() {
                    warnings.push(Warning::new(
                        WarningCode::RowRenormalized,
                        format!("forborne mass {v} on column {j} zeroed"),
                    ));
                    *v = T::zero();
                }
            }
        }
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > file_tol {
            return Err(MatrixSpecError::RowSum {
                row: i,
                sum: sum.to_f64_lossy(),
                tolerance: FILE_ROW_SUM_TOLERANCE,
            }
            .into());
        }
        if (sum - T::one()).abs() > warn_tol {
            warnings.push(Warning::new(
                WarningCode::RowRenormalized,
                format!(
                    "row {i} summed to {}; renormalized",
                    sum.to_f64_lossy()
                ),
            ));
        }
        for (j, &v) in row.iter().enumerate() {
            entries[(i, j)] = v / sum;
        }
    }

    let matrix = TransitionMatrix::new(entries, cfg)?;
    Ok((matrix, warnings))
}

/// Formats a matrix as CSV with six fixed decimals.
pub fn matrix_to_csv<T: Scalar>(matrix: &Matrix<T>) -> String {
    let mut out = String::new();
    for row in matrix.rows_iter() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            write!(out, "{:.6}", v).expect("string write cannot fail");
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Per-row observation summary that accompanies an estimated matrix.
pub fn counts_by_state<T: Scalar>(
    estimated: &EstimatedMatrix<T>,
) -> BTreeMap<String, (u64, f64)> {
    let n = estimated.matrix.n_states();
    (2..n)
        .map(|i| {
            let state = StateIndex::from_index(i, n).expect("index in range");
            (
                state.to_string(),
                (
                    estimated.observations[i],
                    estimated.weight_out[i].to_f64_lossy(),
                ),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loan_tape::ChainConfig;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn obs(from: usize, to: usize, weight: f64) -> ObservedTransition<f64> {
        ObservedTransition {
            loan_id: format!("{from}->{to}"),
            from_state: StateIndex::from_index(from, 16).unwrap(),
            to_state: StateIndex::from_index(to, 16).unwrap(),
            weight,
        }
    }

    fn cfg(n: usize) -> ChainConfig<f64> {
        let mut cfg = ChainConfig::new(n);
        cfg.npl_threshold = cfg.npl_threshold.min(n - 1);
        cfg
    }

    #[test]
    fn estimate_equal_counts_gives_half_half() {
        let cfg = cfg(4);
        let transitions = vec![
            obs(3, 0, 1.0),
            obs(3, 0, 1.0),
            obs(3, 1, 1.0),
            obs(3, 1, 1.0),
        ];
        let estimated = estimate(&transitions, &cfg).unwrap();
        let a = estimated.matrix.entries();
        assert_eq!(a[(3, 0)], 0.5);
        assert_eq!(a[(3, 1)], 0.5);
        // rows 2, 4, 5 had no data -> imputed lost
        assert_eq!(a[(2, 1)], 1.0);
        assert_eq!(a[(4, 1)], 1.0);
        assert_eq!(a[(5, 1)], 1.0);
        assert_eq!(estimated.imputed.len(), 3);
        assert_eq!(estimated.warnings.len(), 3);
        assert_eq!(estimated.observations[3], 4);
    }

    #[test]
    fn estimate_single_observation_gives_unit_row() {
        let cfg = cfg(4);
        let estimated = estimate(&[obs(5, 0, 1.0)], &cfg).unwrap();
        let a = estimated.matrix.entries();
        assert_eq!(a[(5, 0)], 1.0);
        assert_eq!(a.row(5)[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn estimate_zero_row_error_policy() {
        let mut cfg = cfg(4);
        cfg.zero_row_policy = ZeroRowPolicy::Error;
        let err = estimate(&[obs(3, 0, 1.0)], &cfg).unwrap_err();
        assert!(matches!(err, EstimateError::ZeroRow(s) if s.index() == 2));
    }

    #[test]
    fn estimate_rejects_bad_observations() {
        let cfg = cfg(4);
        assert!(matches!(
            estimate::<f64>(&[], &cfg),
            Err(EstimateError::EmptyInput)
        ));
        assert!(matches!(
            estimate(&[obs(2, 4, 1.0)], &cfg),
            Err(EstimateError::ForborneTarget { .. })
        ));
        assert!(matches!(
            estimate(&[obs(3, 9, 1.0)], &cfg),
            Err(EstimateError::StateOutOfRange { .. })
        ));
        let mut negative = obs(3, 0, 1.0);
        negative.weight = -1.0;
        assert!(matches!(
            estimate(&[negative], &cfg),
            Err(EstimateError::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn blocks_extract_without_renormalization() {
        let cfg = cfg(4);
        let transitions = vec![obs(2, 0, 37.0), obs(2, 1, 63.0), obs(3, 2, 1.0), obs(3, 3, 3.0)];
        let matrix = estimate(&transitions, &cfg).unwrap().matrix;
        let blocks = to_blocks(&matrix);
        assert_eq!(blocks.to_absorbing.n_rows(), 4);
        assert_eq!(blocks.to_absorbing.n_cols(), 2);
        assert_eq!(blocks.within_transient.n_rows(), 4);
        assert_abs_diff_eq!(blocks.to_absorbing[(0, 0)], 0.37, epsilon = 1e-15);
        assert_abs_diff_eq!(blocks.to_absorbing[(0, 1)], 0.63, epsilon = 1e-15);
        assert_eq!(blocks.within_transient[(1, 0)], 0.25);
        assert_eq!(blocks.within_transient[(1, 1)], 0.75);
        // block rows still sum to one
        for i in 0..4 {
            let total: f64 = blocks.to_absorbing.row(i).iter().sum::<f64>()
                + blocks.within_transient.row(i).iter().sum::<f64>();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn classify_all_to_cured_is_applicable() {
        let cfg = cfg(4);
        let transitions: Vec<_> = (2..6).map(|i| obs(i, 0, 1.0)).collect();
        let matrix = estimate(&transitions, &cfg).unwrap().matrix;
        let classification = classify(&matrix, 0.0);
        assert_eq!(classification.verdict, Verdict::Applicable);
        assert!(classification.offending_classes.is_empty());
        // absorbing singertons are closed, every transient state is open
        let closed: Vec<_> = classification
            .classes
            .iter()
            .filter(|c| c.closed)
            .map(|c| c.members.clone())
            .collect();
        assert_eq!(closed, vec![vec![0], vec![1]]);
    }

    #[test]
    fn classify_detects_closed_cycle() {
        let cfg = cfg(4);
        // 4 and 5 feed each other only; 2 and 3 resolve
        let transitions = vec![
            obs(2, 0, 1.0),
            obs(3, 0, 1.0),
            obs(4, 5, 1.0),
            obs(5, 4, 1.0),
        ];
        let matrix = estimate(&transitions, &cfg).unwrap().matrix;
        let classification = classify(&matrix, 0.0);
        assert_eq!(classification.verdict, Verdict::Cyclic);
        assert_eq!(classification.offending_classes, vec![vec![4, 5]]);
    }

    #[test]
    fn classify_verdict_invariant_under_transient_relabeling() {
        let cfg = cfg(4);
        let transitions = vec![
            obs(2, 0, 1.0),
            obs(3, 4, 1.0),
            obs(4, 5, 1.0),
            obs(5, 3, 1.0),
        ];
        let matrix = estimate(&transitions, &cfg).unwrap().matrix;
        let base = classify(&matrix, 0.0);
        assert_eq!(base.verdict, Verdict::Cyclic);

        // permute transient labels 3 <-> 5 consistently on rows and columns
        let n = matrix.n_states();
        let perm = |i: usize| match i {
            3 => 5,
            5 => 3,
            other => other,
        };
        let mut permuted = Matrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                permuted[(perm(i), perm(j))] = matrix.entries()[(i, j)];
            }
        }
        let permuted = TransitionMatrix::new(permuted, cfg.clone()).unwrap();
        let relabeled = classify(&permuted, 0.0);
        assert_eq!(relabeled.verdict, base.verdict);
        assert_eq!(relabeled.offending_classes.len(), 1);
    }

    #[test]
    fn edge_threshold_can_open_a_class() {
        let cfg = cfg(4);
        let transitions = vec![
            obs(2, 0, 1.0),
            obs(3, 0, 1.0),
            // 4 <-> 5 cycle with a 1% leak from 4 to cured
            obs(4, 5, 99.0),
            obs(4, 0, 1.0),
            obs(5, 4, 1.0),
        ];
        let matrix = estimate(&transitions, &cfg).unwrap().matrix;
        assert_eq!(classify(&matrix, 0.0).verdict, Verdict::Applicable);
        // raising the threshold above the leak closes the class again
        assert_eq!(classify(&matrix, 0.02).verdict, Verdict::Cyclic);
    }

    #[test]
    fn matrix_rejects_invalid_forms() {
        let cfg = cfg(4);
        let n = cfg.n_states();
        let mut ok = Matrix::<f64>::zeros(n, n);
        ok[(0, 0)] = 1.0;
        ok[(1, 1)] = 1.0;
        for i in 2..n {
            ok[(i, 1)] = 1.0;
        }
        assert!(TransitionMatrix::new(ok.clone(), cfg.clone()).is_ok());

        let mut bad_absorbing = ok.clone();
        bad_absorbing[(0, 0)] = 0.9;
        bad_absorbing[(0, 1)] = 0.1;
        assert!(matches!(
            TransitionMatrix::new(bad_absorbing, cfg.clone()),
            Err(MatrixSpecError::AbsorbingRow { row: 0 })
        ));

        let mut bad_forborne = ok.clone();
        bad_forborne[(2, 1)] = 0.5;
        bad_forborne[(2, 3)] = 0.5;
        assert!(matches!(
            TransitionMatrix::new(bad_forborne, cfg.clone()),
            Err(MatrixSpecError::ForborneSupport { col: 3, .. })
        ));

        let mut bad_sum = ok.clone();
        bad_sum[(3, 1)] = 0.9;
        assert!(matches!(
            TransitionMatrix::new(bad_sum, cfg.clone()),
            Err(MatrixSpecError::RowSum { row: 3, .. })
        ));

        let mut negative = ok;
        negative[(3, 1)] = 1.2;
        assert!(matches!(
            TransitionMatrix::new(negative, cfg),
            Err(MatrixSpecError::EntryOutOfRange { .. })
        ));
    }

    #[test]
    fn csv_round_trip_renormalizes_rounded_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        // row 3 sums to 0.999 – the kind of rounding a printed matrix has
        std::fs::write(
            &path,
            "1,0,0,0\n0,1,0,0\n0.37,0.63,0,0\n0.499,0.5,0,0\n",
        )
        .unwrap();
        let (matrix, warnings) = read_matrix_csv::<f64>(&path, None).unwrap();
        assert_eq!(matrix.n_states(), 4);
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].code, WarningCode::RowRenormalized);
        let sum: f64 = matrix.entries().row(3).iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);

        // a row too far from stochastic is an error, not a warning
        std::fs::write(&path, "1,0,0,0\n0,1,0,0\n0.37,0.63,0,0\n0.9,0.3,0,0\n").unwrap();
        assert!(matches!(
            read_matrix_csv::<f64>(&path, None),
            Err(MatrixReadError::Invalid(MatrixSpecError::RowSum { .. }))
        ));
    }

    #[test]
    fn csv_write_uses_six_decimals() {
        let m = Matrix::from_rows(vec![vec![0.5, 0.5], vec![1.0 / 3.0, 2.0 / 3.0]]);
        let text = matrix_to_csv(&m);
        assert_eq!(text, "0.500000,0.500000\n0.333333,0.666667\n");
    }

    proptest! {
        /// Estimation always produces a valid canonical matrix whatever the
        /// (well-formed) observation multiset looks like.
        #[test]
        fn estimation_is_row_stochastic(
            raw in proptest::collection::vec(
                (2usize..6, 0usize..6, 1u32..1000), 1..60,
            )
        ) {
            let cfg = cfg(4);
            let transitions: Vec<_> = raw.iter().map(|&(from, to, w)| {
                let to = if from == 2 { to % 2 } else { to };
                obs(from, to, w as f64)
            }).collect();
            let estimated = estimate(&transitions, &cfg).unwrap();
            let entries = estimated.matrix.entries();
            for i in 0..6 {
                let sum: f64 = entries.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9, "row {i} sums to {sum}");
                for j in 0..6 {
                    prop_assert!((0.0..=1.0).contains(&entries[(i, j)]));
                }
            }
        }

        /// Scaling every weight by the same positive constant leaves the
        /// ratio estimator unchanged.
        #[test]
        fn estimation_is_scale_invariant(
            raw in proptest::collection::vec(
                (2usize..6, 0usize..6, 1u32..1000), 1..40,
            ),
            scale in 0.001f64..1000.0,
        ) {
            let cfg = cfg(4);
            let base: Vec<_> = raw.iter().map(|&(from, to, w)| {
                let to = if from == 2 { to % 2 } else { to };
                obs(from, to, w as f64)
            }).collect();
            let scaled: Vec<_> = base.iter().cloned().map(|mut t| {
                t.weight *= scale;
                t
            }).collect();
            let a = estimate(&base, &cfg).unwrap().matrix;
            let b = estimate(&scaled, &cfg).unwrap().matrix;
            for i in 0..6 {
                for j in 0..6 {
                    prop_assert!((a.entries()[(i, j)] - b.entries()[(i, j)]).abs() < 1e-12);
                }
            }
        }
    }
}
