//! Structured-text forms of matrices and amplitude vectors.
//!
//! A matrix is a row-major list of rows, each a list of `[re, im]` pairs.

use num_complex::Complex64;

use crate::error::{AqmError, Result};
use crate::linalg::CMatrix;

pub type MatrixRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_from_rows(rows: &MatrixRows) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(AqmError::InvalidArgument("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(AqmError::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let [re, im] = rows[i][j];
        Complex64::new(re, im)
    }))
}

pub fn amplitudes_from_pairs(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs
        .iter()
        .map(|&[re, im]| Complex64::new(re, im))
        .collect()
}
