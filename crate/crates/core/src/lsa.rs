//! The (A, c, ε) triple every reduction consumes and produces.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Linear system approximation instance: find x with
/// ‖Ax − Π_A c‖ ≤ ε‖Π_A c‖, where Π_A projects onto im(A).
#[derive(Debug, Clone, PartialEq)]
pub struct LsaInstance {
    pub matrix: SparseMatrix,
    pub rhs: DVector<f64>,
    pub epsilon: f64,
}

impl LsaInstance {
    pub fn new(matrix: SparseMatrix, rhs: DVector<f64>, epsilon: f64) -> Result<Self> {
        if rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} entries, matrix has {} rows",
                rhs.len(),
                matrix.nrows()
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("rhs has non-finite entries".into()));
        }
        Ok(LsaInstance { matrix, rhs, epsilon })
    }

    pub fn from_rows(rows: &[Vec<f64>], rhs: &[f64], epsilon: f64) -> Result<Self> {
        Self::new(SparseMatrix::from_rows(rows), DVector::from_column_slice(rhs), epsilon)
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Class G: integer entries, every row and column nonempty.
    pub fn check_class_g(&self) -> Result<()> {
        if let Some((row, col, value)) = self.matrix.first_non_integer() {
            return Err(Error::NotIntegerMatrix { row, col, value });
        }
        if let Some((what, index)) = self.matrix.first_empty_line() {
            return Err(Error::EmptyRowOrColumn { what, index });
        }
        Ok(())
    }
}
