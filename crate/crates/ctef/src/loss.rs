//! Surface residuals, the total fitting loss and its exact gradients.
//!
//! For data rows `y_i` the residual of a parametrized ellipsoid is
//! `r_i = ||A(a) R(s) (y_i - c)||^2 - 1` and the loss is `sum r_i^2`. The
//! gradient of the per-point half-square `l = 0.5 ||A R (x - c)||^2` has a
//! closed form in all three parameter blocks, which the solver consumes as an
//! analytic residual Jacobian instead of finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{skew_dim, EllipsoidParams};

/// Observation matrix; each of the `n` rows is one point in `R^p`.
pub type DataMatrix = DMatrix<f64>;

/// Gradient of `l(a, c, s) = 0.5 ||A R (x - c)||^2` in the three coordinate
/// blocks.
#[derive(Debug, Clone)]
pub struct PointGradient {
    pub wrt_a: DVector<f64>,
    pub wrt_c: DVector<f64>,
    pub wrt_s: DVector<f64>,
}

impl PointGradient {
    /// Concatenates the blocks in `(a, c, s)` order.
    pub fn to_flat(&self) -> DVector<f64> {
        let p = self.wrt_a.len();
        let mut flat = DVector::zeros(EllipsoidParams::flat_dim(p));
        flat.rows_mut(0, p).copy_from(&self.wrt_a);
        flat.rows_mut(p, p).copy_from(&self.wrt_c);
        flat.rows_mut(2 * p, self.wrt_s.len()).copy_from(&self.wrt_s);
        flat
    }
}

fn check_data(params: &EllipsoidParams, data: &DataMatrix) -> Result<()> {
    if data.ncols() != params.dim() {
        return Err(Error::DimensionMismatch {
            context: "loss data columns",
            expected: params.dim(),
            got: data.ncols(),
        });
    }
    Ok(())
}

/// Residual vector `r_i = ||A R (y_i - c)||^2 - 1`.
pub fn residuals(params: &EllipsoidParams, data: &DataMatrix) -> Result<DVector<f64>> {
    check_data(params, data)?;
    let p = params.dim();
    let n = data.nrows();
    let rot = params.rotation();
    let r = rot.matrix();
    let mut out = DVector::zeros(n);
    let mut y = DVector::zeros(p);
    for row in 0..n {
        for j in 0..p {
            y[j] = data[(row, j)] - params.c[j];
        }
        let z = r * &y;
        let mut sum = 0.0;
        for i in 0..p {
            let azi = params.a[i] * z[i];
            sum += azi * azi;
        }
        out[row] = sum - 1.0;
    }
    Ok(out)
}

/// Total loss `sum_i r_i^2`.
pub fn loss(params: &EllipsoidParams, data: &DataMatrix) -> Result<f64> {
    Ok(residuals(params, data)?.norm_squared())
}

/// Exact gradient of `l(a, c, s) = 0.5 ||A R (x - c)||^2` at one point.
///
/// With `y = x - c`, `z = R y` and `S = S(s)`:
/// - `d l / d a_i = a_i z_i^2`
/// - `grad_c l = -R^T A^2 z`
/// - `grad_s l = B^T - B` read out in [`crate::geometry::skew_embed`]
///   ordering, where `B = (I - S)^{-1} A^2 R y y^T (I + R^T)`.
///
/// `B` is rank one, `B = u w^T` with `u = (I - S)^{-1} A^2 R y` and
/// `w = y + R y`, so each coordinate is `w_i u_j - u_i w_j`.
pub fn point_gradient(params: &EllipsoidParams, x: &DVector<f64>) -> Result<PointGradient> {
    let p = params.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            context: "point_gradient",
            expected: p,
            got: x.len(),
        });
    }
    let ctx = GradientContext::new(params);
    Ok(ctx.at(params, x))
}

/// Per-parameter factors shared by all points of a Jacobian evaluation.
struct GradientContext {
    rotation: DMatrix<f64>,
    // (I - S)^{-1} A^2 R
    skew_solve_a2r: DMatrix<f64>,
}

impl GradientContext {
    fn new(params: &EllipsoidParams) -> Self {
        let p = params.dim();
        let rotation = params.rotation().into_matrix();
        let mut a2r = rotation.clone();
        for i in 0..p {
            let ai2 = params.a[i] * params.a[i];
            for j in 0..p {
                a2r[(i, j)] *= ai2;
            }
        }
        let skew = crate::geometry::skew_embed(&params.s, p).expect("validated params");
        let identity = DMatrix::<f64>::identity(p, p);
        let skew_solve_a2r = (&identity - &skew)
            .lu()
            .solve(&a2r)
            .expect("I - S is invertible for every skew-symmetric S");
        Self {
            rotation,
            skew_solve_a2r,
        }
    }

    fn at(&self, params: &EllipsoidParams, x: &DVector<f64>) -> PointGradient {
        let p = params.dim();
        let y = x - &params.c;
        let z = &self.rotation * &y;

        let wrt_a = DVector::from_fn(p, |i, _| params.a[i] * z[i] * z[i]);

        // -R^T A^2 z
        let mut a2z = z.clone();
        for i in 0..p {
            a2z[i] *= params.a[i] * params.a[i];
        }
        let wrt_c = -(self.rotation.transpose() * a2z);

        let u = &self.skew_solve_a2r * &y;
        let w = &y + &z;
        let mut wrt_s = DVector::zeros(skew_dim(p));
        let mut k = 0;
        for i in 0..p {
            for j in (i + 1)..p {
                wrt_s[k] = w[i] * u[j] - u[i] * w[j];
                k += 1;
            }
        }
        PointGradient { wrt_a, wrt_c, wrt_s }
    }
}

/// Residual Jacobian: row `i` is the gradient of `r_i` with respect to the
/// flat `(a, c, s)` coordinates. Since `r_i = 2 l - 1` at `y_i`, each row is
/// twice the point gradient.
pub fn jacobian(params: &EllipsoidParams, data: &DataMatrix) -> Result<DMatrix<f64>> {
    check_data(params, data)?;
    let p = params.dim();
    let n = data.nrows();
    let ctx = GradientContext::new(params);
    let mut jac = DMatrix::zeros(n, EllipsoidParams::flat_dim(p));
    for row in 0..n {
        let x = data.row(row).transpose();
        let grad = ctx.at(params, &x);
        let flat = grad.to_flat();
        for col in 0..flat.len() {
            jac[(row, col)] = 2.0 * flat[col];
        }
    }
    Ok(jac)
}
