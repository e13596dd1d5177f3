//! Dense LU helpers shared by the Markov and polling solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solution of a dense linear system together with its max-norm residual.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    pub x: DVector<f64>,
    pub residual: f64,
    pub condition: f64,
}

/// Solves `a x = b` by partial-pivot LU.
///
/// The condition number is estimated in the 1-norm from the explicit inverse,
/// which is fine for the few-hundred-unknown systems this crate assembles.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DenseSolution> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let lu = a.clone().lu();
    let condition = match lu.try_inverse() {
        Some(inv) => one_norm(a) * one_norm(&inv),
        None => f64::INFINITY,
    };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Singular { condition });
    }
    let x = lu.solve(b).ok_or(Error::Singular { condition })?;
    let residual = (a * &x - b).amax();
    Ok(DenseSolution { x, residual, condition })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
