//! Fit-quality measures: offset error, shape error and the `l_{p,q}` family.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Offset and shape error of one fit against the ground truth.
#[derive(Debug, Clone, Copy)]
pub struct ErrorPair {
    pub offset: f64,
    pub shape: f64,
}

/// Euclidean distance between estimated and true centers.
pub fn offset_error(c: &DVector<f64>, c_true: &DVector<f64>) -> Result<f64> {
    if c.len() != c_true.len() {
        return Err(Error::DimensionMismatch {
            context: "offset_error",
            expected: c_true.len(),
            got: c.len(),
        });
    }
    Ok((c - c_true).norm())
}

/// Condition number of `Lambda^{-1} Lambda_true` minus one. Zero exactly when
/// the two shapes agree up to scale and rotation.
pub fn shape_error(lambda: &DMatrix<f64>, lambda_true: &DMatrix<f64>) -> Result<f64> {
    let p = lambda.nrows();
    if lambda.ncols() != p || lambda_true.nrows() != p || lambda_true.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "shape_error",
            expected: p,
            got: lambda_true.nrows(),
        });
    }
    let lu = lambda.clone().lu();
    let ratio = lu.solve(lambda_true).ok_or(Error::SingularMatrix)?;
    let singular_values = ratio.singular_values();
    let max = singular_values.max();
    let min = singular_values.min();
    if min <= 0.0 || min.is_nan() {
        return Ok(f64::INFINITY);
    }
    Ok(max / min - 1.0)
}

/// `sum_i | ||Lambda^{-1}(x_i - c)||^p - 1 |^q`; the general loss family.
/// `l_{2,2}` coincides with the fitting loss.
pub fn lpq_error(
    lambda: &DMatrix<f64>,
    c: &DVector<f64>,
    data: &DMatrix<f64>,
    p_exp: u32,
    q_exp: u32,
) -> Result<f64> {
    let p = lambda.nrows();
    if c.len() != p || data.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "lpq_error",
            expected: p,
            got: data.ncols(),
        });
    }
    if p_exp < 1 || q_exp < 1 {
        return Err(Error::InvalidArgument(
            "lpq exponents must be at least 1".into(),
        ));
    }
    let lu = lambda.clone().lu();
    let mut total = 0.0;
    for i in 0..data.nrows() {
        let y = data.row(i).transpose() - c;
        let z = lu.solve(&y).ok_or(Error::SingularMatrix)?;
        total += (z.norm().powi(p_exp as i32) - 1.0).abs().powi(q_exp as i32);
    }
    Ok(total)
}
