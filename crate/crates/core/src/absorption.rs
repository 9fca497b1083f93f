//! Absorption analysis of an applicable chain.
//!
//! With the transient-to-transient block `S`, the fundamental matrix
//! `F = (I - S)^-1` collects expected visit counts: `F[i][j]` is the
//! expected number of annual periods a loan starting in the i-th transient
//! state spends in the j-th before it resolves. From it follow
//!
//! * absorption probabilities `F * T`, whose first column is the cure
//!   probability per state and whose rows sum to one,
//! * expected time to resolution as the row sums of `F`, and
//! * early-warning visit times between arbitrary transient states.

use thiserror::Error;

use crate::chain::Blocks;
use crate::diagnostics::{Warning, WarningCode};
use crate::loan_tape::StateIndex;
use crate::matrix::{Matrix, MatrixError};
use crate::scalar::Scalar;

/// Reciprocal-condition floor below which `I - S` is treated as singular.
pub const RCOND_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AbsorptionError {
    /// `I - S` could not be inverted reliably. On estimated chains this
    /// means a recurrent class slipped past classification.
    #[error("I - S is numerically singular ({0}); the chain has no absorption solution")]
    SingularBlock(MatrixError),
    #[error("state {0} is absorbing; visit times are defined between transient states")]
    NotTransient(StateIndex),
    #[error("state {state} out of range for {n_transient} transient states")]
    StateOutOfRange { state: StateIndex, n_transient: usize },
}

/// Fundamental matrix, absorption probabilities and expected times.
#[derive(Debug, Clone)]
pub struct AbsorptionResult<T> {
    fundamental: Matrix<T>,
    absorbing_probabilities: Matrix<T>,
    expected_time: Vec<T>,
}

impl<T: Scalar> AbsorptionResult<T> {
    /// `(I - S)^-1`, indexed by transient position (state index minus two).
    pub fn fundamental(&self) -> &Matrix<T> {
        &self.fundamental
    }

    /// `n_transient x 2` limit probabilities: column 0 cure, column 1 loss.
    pub fn absorbing_probabilities(&self) -> &Matrix<T> {
        &self.absorbing_probabilities
    }

    /// Expected periods to resolution per transient state (row sums of the
    /// fundamental matrix).
    pub fn expected_time(&self) -> &[T] {
        &self.expected_time
    }

    pub fn n_transient(&self) -> usize {
        self.fundamental.n_rows()
    }

    /// Probability that the loan in the given transient state eventually
    /// cures.
    pub fn cure_probability(&self, state: StateIndex) -> Result<T, AbsorptionError> {
        let i = self.transient_offset(state)?;
        Ok(self.absorbing_probabilities[(i, 0)])
    }

    /// Expected number of periods spent in `to` before resolution, starting
    /// from `from`. The diagonal counts the initial period, so it is >= 1.
    pub fn visit_time(&self, from: StateIndex, to: StateIndex) -> Result<T, AbsorptionError> {
        let i = self.transient_offset(from)?;
        let j = self.transient_offset(to)?;
        Ok(self.fundamental[(i, j)])
    }

    fn transient_offset(&self, state: StateIndex) -> Result<usize, AbsorptionError> {
        if state.is_absorbing() {
            return Err(AbsorptionError::NotTransient(state));
        }
        let offset = state.index() - 2;
        if offset >= self.n_transient() {
            return Err(AbsorptionError::StateOutOfRange {
                state,
                n_transient: self.n_transient(),
            });
        }
        Ok(offset)
    }

    /// Warns when raw cure probabilities increase with months past due;
    /// the survival smoothing exists precisely to repair this.
    pub fn monotonicity_warnings(&self) -> Vec<Warning> {
        let mut warnings = Vec::new();
        // transient offsets 1.. are past-due months 1..; skip the forborne row
        for offset in 1..self.n_transient().saturating_sub(1) {
            let p_lo = self.absorbing_probabilities[(offset, 0)];
            let p_hi = self.absorbing_probabilities[(offset + 1, 0)];
            if p_lo < p_hi {
                warnings.push(Warning::new(
                    WarningCode::NonMonotoneCureProbabilities,
                    format!(
                        "cure probability rises from {:.6} at {} months past due to {:.6} at {}",
                        p_lo,
                        offset,
                        p_hi,
                        offset + 1
                    ),
                ));
            }
        }
        warnings
    }
}

/// Inverts `I - S` by dense LU with partial pivoting.
pub fn fundamental_matrix<T: Scalar>(
    within_transient: &Matrix<T>,
) -> Result<Matrix<T>, AbsorptionError> {
    let n = within_transient.n_rows();
    Matrix::identity(n)
        .sub(within_transient)
        .inverse(RCOND_FLOOR)
        .map_err(AbsorptionError::SingularBlock)
}

/// Full absorption analysis of the canonical blocks.
pub fn absorb<T: Scalar>(blocks: &Blocks<T>) -> Result<AbsorptionResult<T>, AbsorptionError> {
    let fundamental = fundamental_matrix(&blocks.within_transient)?;
    let absorbing_probabilities = fundamental.mul(&blocks.to_absorbing);
    let expected_time = fundamental
        .rows_iter()
        .map(|row| row.iter().copied().sum())
        .collect();
    Ok(AbsorptionResult {
        fundamental,
        absorbing_probabilities,
        expected_time,
    })
}

/// Expected periods spent in `to_state` before resolution for a loan
/// currently in `from_state`; the early-warning quantity.
pub fn early_warning_time<T: Scalar>(
    result: &AbsorptionResult<T>,
    from_state: StateIndex,
    to_state: StateIndex,
) -> Result<T, AbsorptionError> {
    result.visit_time(from_state, to_state)
}
