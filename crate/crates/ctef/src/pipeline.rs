//! End-to-end ellipsoid fitting: PCA transform, feasible-set construction,
//! initialization, bounded least-squares solve and back-transform to the
//! original coordinates, plus dimension-reduced fitting over subsets of
//! principal components.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{skew_dim, Ellipsoid, EllipsoidParams, Rotation};
use crate::loss;
use crate::solver::{self, Bounds, SolveOptions, SolveReport};

/// Principal component model of a dataset: mean, orthogonal eigenvector
/// matrix with columns ordered by descending eigenvalue, and the eigenvalues.
///
/// Eigenvector signs follow a deterministic convention: the entry of largest
/// magnitude in each column is made positive, ties broken by lowest index.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: DVector<f64>,
    /// Columns are the principal components.
    pub components: DMatrix<f64>,
    /// Nonincreasing, nonnegative.
    pub eigenvalues: DVector<f64>,
}

impl PcaModel {
    /// Diagonalizes the sample covariance of the rows of `data`.
    pub fn fit(data: &DMatrix<f64>) -> Result<Self> {
        let n = data.nrows();
        let p = data.ncols();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("data contains non-finite values".into()));
        }
        let mean = data.row_mean().transpose();
        let mut centered = data.clone();
        for i in 0..n {
            for j in 0..p {
                centered[(i, j)] -= mean[j];
            }
        }
        let covariance = centered.transpose() * &centered / (n as f64 - 1.0);
        let eigen = covariance.symmetric_eigen();

        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| {
            eigen.eigenvalues[j]
                .partial_cmp(&eigen.eigenvalues[i])
                .unwrap()
        });
        let mut components = DMatrix::zeros(p, p);
        let mut eigenvalues = DVector::zeros(p);
        for (rank, &idx) in order.iter().enumerate() {
            eigenvalues[rank] = eigen.eigenvalues[idx].max(0.0);
            let column = eigen.eigenvectors.column(idx);
            // Sign convention: largest-magnitude entry positive.
            let mut pivot = 0;
            for i in 1..p {
                if column[i].abs() > column[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if column[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..p {
                components[(i, rank)] = sign * column[i];
            }
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Transforms rows to principal coordinates, `y = V^T (x - mean)`.
    pub fn transform(&self, data: &DMatrix<f64>) -> DMatrix<f64> {
        let all: Vec<usize> = (0..self.dim()).collect();
        self.transform_subset(data, &all)
    }

    /// Projection onto the selected principal components,
    /// `y = V_k^T (x - mean)`.
    pub fn transform_subset(&self, data: &DMatrix<f64>, columns: &[usize]) -> DMatrix<f64> {
        let n = data.nrows();
        let p = self.dim();
        let k = columns.len();
        let mut out = DMatrix::zeros(n, k);
        for i in 0..n {
            for (jk, &col) in columns.iter().enumerate() {
                let mut dot = 0.0;
                for j in 0..p {
                    dot += self.components[(j, col)] * (data[(i, j)] - self.mean[j]);
                }
                out[(i, jk)] = dot;
            }
        }
        out
    }

    /// The `p x k` matrix whose columns are the selected components.
    pub fn basis(&self, columns: &[usize]) -> DMatrix<f64> {
        let p = self.dim();
        let mut v = DMatrix::zeros(p, columns.len());
        for (jk, &col) in columns.iter().enumerate() {
            for i in 0..p {
                v[(i, jk)] = self.components[(i, col)];
            }
        }
        v
    }
}

/// Box constraints for the `(a, c, s)` parameters of a fit.
#[derive(Debug, Clone)]
pub struct FeasibleBox {
    pub a_lower: DVector<f64>,
    pub a_upper: DVector<f64>,
    pub c_lower: DVector<f64>,
    pub c_upper: DVector<f64>,
    pub s_lower: DVector<f64>,
    pub s_upper: DVector<f64>,
    pub weight: f64,
}

/// Largest value the inverse axis lengths may take; keeps axis lengths above
/// 1e-300 without ever binding in practice.
const A_UPPER_DEFAULT: f64 = 1e300;
/// Rotation coordinates live in [-5, 5], comfortably covering the |s| < 1
/// band that already reaches almost every rotation.
const S_BOUND_DEFAULT: f64 = 5.0;

impl FeasibleBox {
    /// Builds the default feasible set from transformed data: the center box
    /// is the data's bounding rectangle scaled about its midpoint by `w`, the
    /// lower inverse-axis bound is `1/(10 max_j m_j)` with `m_j` the data
    /// extent per coordinate, and the rotation coordinates are within
    /// `[-5, 5]`.
    pub fn from_data(data: &DMatrix<f64>, weight: f64) -> Result<Self> {
        let n = data.nrows();
        let p = data.ncols();
        if n < 1 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if weight <= 0.0 || !weight.is_finite() {
            return Err(Error::InvalidArgument("weight must be positive".into()));
        }
        let mut lo = DVector::from_element(p, f64::INFINITY);
        let mut hi = DVector::from_element(p, f64::NEG_INFINITY);
        for i in 0..n {
            for j in 0..p {
                lo[j] = lo[j].min(data[(i, j)]);
                hi[j] = hi[j].max(data[(i, j)]);
            }
        }
        let spans = &hi - &lo;
        let max_span = spans.max();
        if max_span <= 0.0 {
            return Err(Error::DegenerateData(
                "all points are identical; the ellipsoid is undetermined".into(),
            ));
        }
        let mut c_lower = DVector::zeros(p);
        let mut c_upper = DVector::zeros(p);
        for j in 0..p {
            let mid = 0.5 * (lo[j] + hi[j]);
            // Coordinates with zero extent get a sliver of the dominant span
            // so the box stays a valid product of intervals.
            let half = 0.5 * weight * spans[j].max(1e-9 * max_span);
            c_lower[j] = mid - half;
            c_upper[j] = mid + half;
        }
        Ok(Self {
            a_lower: DVector::from_element(p, 1.0 / (10.0 * max_span)),
            a_upper: DVector::from_element(p, A_UPPER_DEFAULT),
            c_lower,
            c_upper,
            s_lower: DVector::from_element(skew_dim(p), -S_BOUND_DEFAULT),
            s_upper: DVector::from_element(skew_dim(p), S_BOUND_DEFAULT),
            weight,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_lower.len()
    }

    /// Flattens into solver bounds in `(a, c, s)` order.
    pub fn to_bounds(&self) -> Result<Bounds> {
        let p = self.dim();
        let d = EllipsoidParams::flat_dim(p);
        let mut lower = DVector::zeros(d);
        let mut upper = DVector::zeros(d);
        lower.rows_mut(0, p).copy_from(&self.a_lower);
        upper.rows_mut(0, p).copy_from(&self.a_upper);
        lower.rows_mut(p, p).copy_from(&self.c_lower);
        upper.rows_mut(p, p).copy_from(&self.c_upper);
        lower.rows_mut(2 * p, skew_dim(p)).copy_from(&self.s_lower);
        upper.rows_mut(2 * p, skew_dim(p)).copy_from(&self.s_upper);
        Bounds::new(lower, upper)
    }
}

/// Default starting point: unit inverse axis lengths (clamped into the box),
/// the center-box midpoint and the identity rotation. The midpoint does not
/// depend on the weight `w`.
pub fn initial_point(feasible: &FeasibleBox) -> EllipsoidParams {
    let p = feasible.dim();
    let a = DVector::from_fn(p, |i, _| {
        1f64.clamp(feasible.a_lower[i], feasible.a_upper[i])
    });
    let c = DVector::from_fn(p, |i, _| {
        0.5 * (feasible.c_lower[i] + feasible.c_upper[i])
    });
    EllipsoidParams::new(a, c, DVector::zeros(skew_dim(p))).expect("valid by construction")
}

/// Result of one fit, in both the principal-component frame and the original
/// frame.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters in the frame the solver worked in (PCA coordinates, or the
    /// selected subspace for reduced fits).
    pub params_pca: EllipsoidParams,
    /// Fitted ellipsoid in the original coordinates when the fit is
    /// full-dimensional; for reduced fits, the ellipsoid in the subspace
    /// frame recorded by `subspace`.
    pub ellipsoid_original: Ellipsoid,
    /// Final value of the fitting loss (sum of squared residuals).
    pub loss: f64,
    pub report: SolveReport,
    /// Principal-component column indices used for a reduced fit.
    pub subspace: Option<Vec<usize>>,
    pub pca: PcaModel,
    /// The box the solver worked in, for bound diagnostics.
    pub feasible: FeasibleBox,
    pub warnings: Vec<String>,
}

/// Default weight of the feasible center box.
pub const DEFAULT_WEIGHT: f64 = 0.5;

/// Fits an ellipsoid to the rows of `data`.
pub fn fit(data: &DMatrix<f64>, weight: f64, opts: &SolveOptions) -> Result<FitResult> {
    let p = data.ncols();
    let columns: Vec<usize> = (0..p).collect();
    fit_reduced(data, p, &columns, weight, opts)
}

/// Fits a `k`-dimensional ellipsoid in the subspace spanned by the selected
/// principal components.
pub fn fit_reduced(
    data: &DMatrix<f64>,
    k: usize,
    columns: &[usize],
    weight: f64,
    opts: &SolveOptions,
) -> Result<FitResult> {
    let p = data.ncols();
    let n = data.nrows();
    if k == 0 || k > p {
        return Err(Error::InvalidArgument(format!(
            "target dimension {k} out of range for {p}-dimensional data"
        )));
    }
    if columns.len() != k {
        return Err(Error::DimensionMismatch {
            context: "fit_reduced columns",
            expected: k,
            got: columns.len(),
        });
    }
    for (i, &col) in columns.iter().enumerate() {
        if col >= p {
            return Err(Error::InvalidArgument(format!(
                "column index {col} out of range for dimension {p}"
            )));
        }
        if columns[..i].contains(&col) {
            return Err(Error::InvalidArgument(format!(
                "duplicate column index {col}"
            )));
        }
    }

    let mut warnings = Vec::new();
    if n < k + 1 {
        warnings.push(format!(
            "only {n} points for a {k}-dimensional fit; the problem is underdetermined"
        ));
    }

    let pca = PcaModel::fit(data)?;
    let transformed = pca.transform_subset(data, columns);
    let feasible = FeasibleBox::from_data(&transformed, weight)?;
    let bounds = feasible.to_bounds()?;
    let start = initial_point(&feasible);

    let residual_fn = |theta: &DVector<f64>| {
        let params = EllipsoidParams::from_flat(theta, k).expect("solver keeps a positive");
        loss::residuals(&params, &transformed).expect("consistent dimensions")
    };
    let jacobian_fn = |theta: &DVector<f64>| {
        let params = EllipsoidParams::from_flat(theta, k).expect("solver keeps a positive");
        loss::jacobian(&params, &transformed).expect("consistent dimensions")
    };
    let report = solver::minimize(residual_fn, jacobian_fn, &start.to_flat(), &bounds, opts)?;

    let params_pca = EllipsoidParams::from_flat(&report.solution, k)?;
    let loss_value = loss::loss(&params_pca, &transformed)?;

    let ellipsoid_original = if k == p {
        back_transform(&params_pca, &pca, columns)
    } else {
        params_pca.to_ellipsoid()
    };
    let subspace = if k == p && columns.iter().enumerate().all(|(i, &c)| c == i) {
        None
    } else {
        Some(columns.to_vec())
    };

    Ok(FitResult {
        params_pca,
        ellipsoid_original,
        loss: loss_value,
        report,
        subspace,
        pca,
        feasible,
        warnings,
    })
}

/// Maps PCA-frame parameters back to the original frame: the center becomes
/// `V c + mean` and the rotation `R(s) V^T`. When `V` has determinant -1 the
/// product is a reflection; negating one row restores a proper rotation
/// without changing the ellipsoid.
fn back_transform(params: &EllipsoidParams, pca: &PcaModel, columns: &[usize]) -> Ellipsoid {
    let p = params.dim();
    let v = pca.basis(columns);
    let center = &v * &params.c + &pca.mean;
    let mut rotation = params.rotation().into_matrix() * v.transpose();
    if rotation.determinant() < 0.0 {
        for j in 0..p {
            rotation[(p - 1, j)] = -rotation[(p - 1, j)];
        }
    }
    Ellipsoid {
        center,
        rotation: Rotation::from_matrix_unchecked(rotation),
        axis_lengths: params.a.map(|ai| 1.0 / ai),
    }
}

/// Per-candidate outcome of a subspace search.
#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub columns: Vec<usize>,
    pub loss: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of [`select_subspace`].
#[derive(Debug)]
pub struct SubspaceSelection {
    pub best_columns: Vec<usize>,
    pub best: FitResult,
    pub candidates: Vec<CandidateReport>,
}

/// All `k`-subsets of the first `min(p, k + 2)` principal components, in
/// lexicographic order.
pub fn default_candidates(p: usize, k: usize) -> Vec<Vec<usize>> {
    let limit = p.min(k + 2);
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(start: usize, limit: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..limit {
            current.push(i);
            recurse(i + 1, limit, k, current, out);
            current.pop();
        }
    }
    recurse(0, limit, k, &mut current, &mut out);
    out
}

/// Fits every candidate column set and returns the one with the smallest
/// loss, ties broken by lexicographically smallest column set. Candidates
/// that fail are recorded and skipped; it is an error only if all fail.
pub fn select_subspace(
    data: &DMatrix<f64>,
    k: usize,
    weight: f64,
    candidates: &[Vec<usize>],
    opts: &SolveOptions,
) -> Result<SubspaceSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no subspace candidates given".into()));
    }
    let outcomes: Vec<(Vec<usize>, std::result::Result<FitResult, String>)> = candidates
        .par_iter()
        .map(|columns| {
            let outcome = fit_reduced(data, k, columns, weight, opts).map_err(|e| e.to_string());
            (columns.clone(), outcome)
        })
        .collect();

    let mut reports = Vec::with_capacity(outcomes.len());
    let mut best: Option<(Vec<usize>, FitResult)> = None;
    for (columns, outcome) in outcomes {
        match outcome {
            Ok(result) => {
                reports.push(CandidateReport {
                    columns: columns.clone(),
                    loss: Some(result.loss),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((best_cols, best_fit)) => {
                        result.loss < best_fit.loss
                            || (result.loss == best_fit.loss && columns < *best_cols)
                    }
                };
                if better {
                    best = Some((columns, result));
                }
            }
            Err(message) => {
                reports.push(CandidateReport {
                    columns,
                    loss: None,
                    error: Some(message),
                });
            }
        }
    }
    match best {
        Some((best_columns, best)) => Ok(SubspaceSelection {
            best_columns,
            best,
            candidates: reports,
        }),
        None => Err(Error::AllCandidatesFailed(candidates.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pca_diagonal_covariance_keeps_axes() {
        // Centered data with sample covariance diag(4, 1).
        let data = DMatrix::from_row_slice(
            4,
            2,
            &[2.0, 0.0, -2.0, 0.0, 0.0, 1.0, 0.0, -1.0],
        );
        let pca = PcaModel::fit(&data).unwrap();
        assert_relative_eq!(pca.components, DMatrix::identity(2, 2), epsilon = 1e-12);
        assert!(pca.eigenvalues[0] > pca.eigenvalues[1]);
    }

    #[test]
    fn pca_requires_two_points() {
        let data = DMatrix::zeros(1, 3);
        assert!(matches!(
            PcaModel::fit(&data),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn pca_transform_has_diagonal_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        let n = 60;
        let data = DMatrix::from_fn(n, 3, |_, j| {
            (j as f64 + 1.0) * rng.random::<f64>() + 0.3 * rng.random::<f64>()
        });
        let pca = PcaModel::fit(&data).unwrap();
        let y = pca.transform(&data);
        let mean = y.row_mean();
        let mut cov = DMatrix::zeros(3, 3);
        for i in 0..n {
            for a in 0..3 {
                for b in 0..3 {
                    cov[(a, b)] += (y[(i, a)] - mean[a]) * (y[(i, b)] - mean[b]);
                }
            }
        }
        cov /= n as f64 - 1.0;
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(cov[(a, b)].abs() < 1e-8, "off-diagonal {}", cov[(a, b)]);
                }
            }
        }
        // Diagonal must match the eigenvalues in order.
        for a in 0..3 {
            assert_relative_eq!(cov[(a, a)], pca.eigenvalues[a], epsilon = 1e-8);
        }
    }

    #[test]
    fn pca_transform_invariant_under_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let n = 40;
        let data = DMatrix::from_fn(n, 3, |_, j| {
            (3.0 - j as f64) * (rng.random::<f64>() - 0.5)
        });
        let q = crate::geometry::random_rotation(3, &mut rng).into_matrix();
        let tau = DVector::from_fn(3, |_, _| 4.0 * rng.random::<f64>());
        let mut moved = DMatrix::zeros(n, 3);
        for i in 0..n {
            let x = data.row(i).transpose();
            moved.row_mut(i).copy_from(&((&q * x) + &tau).transpose());
        }
        let ya = PcaModel::fit(&data).unwrap().transform(&data);
        let yb = PcaModel::fit(&moved).unwrap().transform(&moved);
        // Equal up to a per-column sign flip.
        for j in 0..3 {
            let sign = if (ya[(0, j)] - yb[(0, j)]).abs() < (ya[(0, j)] + yb[(0, j)]).abs() {
                1.0
            } else {
                -1.0
            };
            for i in 0..n {
                assert_relative_eq!(ya[(i, j)], sign * yb[(i, j)], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn feasible_box_matches_hand_computation() {
        // Data spanning [0,2] x [0,4].
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 4.0]);
        let full = FeasibleBox::from_data(&data, 1.0).unwrap();
        assert_relative_eq!(full.c_lower, DVector::from_vec(vec![0.0, 0.0]));
        assert_relative_eq!(full.c_upper, DVector::from_vec(vec![2.0, 4.0]));
        assert_relative_eq!(full.a_lower[0], 1.0 / 40.0);
        assert_eq!(full.a_upper[0], 1e300);
        assert_eq!(full.s_lower[0], -5.0);
        assert_eq!(full.s_upper[0], 5.0);

        let half = FeasibleBox::from_data(&data, 0.5).unwrap();
        assert_relative_eq!(half.c_lower, DVector::from_vec(vec![0.5, 1.0]));
        assert_relative_eq!(half.c_upper, DVector::from_vec(vec![1.5, 3.0]));
    }

    #[test]
    fn feasible_box_rejects_identical_points() {
        let data = DMatrix::from_element(5, 2, 1.0);
        assert!(matches!(
            FeasibleBox::from_data(&data, 0.5),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn initial_point_midpoint_is_weight_independent() {
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 4.0]);
        for w in [0.5, 1.0, 2.0] {
            let feasible = FeasibleBox::from_data(&data, w).unwrap();
            let start = initial_point(&feasible);
            assert_relative_eq!(start.c, DVector::from_vec(vec![1.0, 2.0]));
            assert_eq!(start.a, DVector::from_element(2, 1.0));
            assert_eq!(start.s, DVector::zeros(1));
        }
    }

    #[test]
    fn initial_point_clamps_a_into_box() {
        // Tiny data extent pushes the lower a-bound above 1.
        let data = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.01, 0.01]);
        let feasible = FeasibleBox::from_data(&data, 0.5).unwrap();
        assert!(feasible.a_lower[0] > 1.0);
        let start = initial_point(&feasible);
        assert_eq!(start.a[0], feasible.a_lower[0]);
    }

    fn surface_samples(
        truth: &crate::simulate::GroundTruth,
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> DMatrix<f64> {
        let e = truth.ellipsoid();
        let p = e.dim();
        let mut data = DMatrix::zeros(n, p);
        for i in 0..n {
            let eta = crate::simulate::sample_sphere(p, rng);
            let x = crate::geometry::sample_surface(&e, &eta).unwrap();
            data.row_mut(i).copy_from(&x.transpose());
        }
        data
    }

    #[test]
    fn noiseless_recovery_in_three_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let spec = crate::simulate::SimSpec::new(3, 50, 0.0, 0.0, 2.0, 0);
        let truth = crate::simulate::random_ground_truth(&spec, &mut rng).unwrap();
        let data = surface_samples(&truth, 50, &mut rng);
        let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();

        let offset =
            crate::metrics::offset_error(&result.ellipsoid_original.center, &truth.center).unwrap();
        let shape = crate::metrics::shape_error(
            &result.ellipsoid_original.shape_matrix(),
            &truth.lambda,
        )
        .unwrap();
        let max_axis = truth.axis_lengths().max();
        assert!(offset < 1e-6 * max_axis.max(1.0), "offset error {offset}");
        assert!(shape < 1e-6, "shape error {shape}");
    }

    #[test]
    fn fitted_inverse_axis_lengths_stay_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        for trial in 0..5 {
            let spec = crate::simulate::SimSpec::new(3, 18, 1.0, 0.01, 2.0, trial);
            let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
            let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
            assert!(result.params_pca.a.iter().all(|&ai| ai > 0.0));
        }
    }

    #[test]
    fn frames_agree_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let spec = crate::simulate::SimSpec::new(3, 30, 0.5, 0.01, 2.0, 5);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();

        let transformed_frame = result.params_pca.to_ellipsoid();
        for _ in 0..100 {
            let x = DVector::from_fn(3, |_, _| 20.0 * rng.random::<f64>() - 10.0);
            let y = result.pca.transform(&DMatrix::from_fn(1, 3, |_, j| x[j]));
            let y = y.row(0).transpose();
            let original = result.ellipsoid_original.implicit_residual(&x);
            let pca_frame = transformed_frame.implicit_residual(&y);
            assert!(
                (original - pca_frame).abs() < 1e-10,
                "frame mismatch {original} vs {pca_frame}"
            );
        }
    }

    #[test]
    fn loss_field_matches_loss_module() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let spec = crate::simulate::SimSpec::new(3, 25, 0.0, 0.02, 2.0, 9);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
        let y = result.pca.transform(&data);
        let expected = loss::loss(&result.params_pca, &y).unwrap();
        assert_relative_eq!(result.loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn reduced_fit_with_all_columns_equals_full_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(151);
        let spec = crate::simulate::SimSpec::new(3, 30, 0.0, 0.01, 2.0, 3);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let full = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
        let reduced =
            fit_reduced(&data, 3, &[0, 1, 2], DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
        assert_eq!(full.params_pca.to_flat(), reduced.params_pca.to_flat());
        assert_eq!(full.loss, reduced.loss);
        assert!(reduced.subspace.is_none());
    }

    #[test]
    fn planar_circle_recovered_in_leading_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(157);
        let n = 60;
        let mut data = DMatrix::zeros(n, 3);
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            data[(i, 0)] = 2.0 * t.cos() + 0.001 * rng.random::<f64>();
            data[(i, 1)] = 2.0 * t.sin() + 0.001 * rng.random::<f64>();
            data[(i, 2)] = 0.001 * rng.random::<f64>();
        }
        let result =
            fit_reduced(&data, 2, &[0, 1], DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
        assert!(result.loss < 1e-4, "loss {}", result.loss);
        assert_eq!(result.subspace.as_deref(), Some(&[0usize, 1][..]));
        // Radii near 2 in the subspace frame.
        for l in result.ellipsoid_original.axis_lengths.iter() {
            assert_relative_eq!(*l, 2.0, max_relative = 1e-2);
        }
    }

    #[test]
    fn rejects_bad_columns() {
        let data = DMatrix::zeros(10, 3);
        let opts = SolveOptions::default();
        assert!(fit_reduced(&data, 2, &[0, 3], 0.5, &opts).is_err());
        assert!(fit_reduced(&data, 2, &[1, 1], 0.5, &opts).is_err());
        assert!(fit_reduced(&data, 2, &[0], 0.5, &opts).is_err());
        assert!(fit_reduced(&data, 4, &[0, 1, 2, 3], 0.5, &opts).is_err());
    }

    #[test]
    fn single_candidate_is_returned_unconditionally() {
        let mut rng = ChaCha8Rng::seed_from_u64(163);
        let spec = crate::simulate::SimSpec::new(3, 30, 0.0, 0.01, 2.0, 11);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let selection = select_subspace(
            &data,
            2,
            DEFAULT_WEIGHT,
            &[vec![0, 1]],
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(selection.best_columns, vec![0, 1]);
        assert_eq!(selection.candidates.len(), 1);
        assert_eq!(selection.candidates[0].loss, Some(selection.best.loss));
    }

    #[test]
    fn duplicate_candidates_break_ties_lexicographically() {
        let mut rng = ChaCha8Rng::seed_from_u64(167);
        let spec = crate::simulate::SimSpec::new(3, 30, 0.0, 0.01, 2.0, 13);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let selection = select_subspace(
            &data,
            2,
            DEFAULT_WEIGHT,
            &[vec![0, 2], vec![0, 2]],
            &SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(selection.best_columns, vec![0, 2]);
        assert_eq!(
            selection.candidates[0].loss,
            selection.candidates[1].loss
        );
    }

    #[test]
    fn default_candidates_enumerate_lexicographically() {
        assert_eq!(
            default_candidates(5, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(default_candidates(2, 2), vec![vec![0, 1]]);
    }

    #[test]
    fn all_failing_candidates_is_an_error() {
        let data = DMatrix::zeros(10, 3);
        let result = select_subspace(
            &data,
            2,
            DEFAULT_WEIGHT,
            &[vec![0, 1], vec![1, 2]],
            &SolveOptions::default(),
        );
        assert!(matches!(result, Err(Error::AllCandidatesFailed(2))));
    }

    #[test]
    fn underdetermined_fit_warns_but_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(173);
        let spec = crate::simulate::SimSpec::new(3, 3, 0.0, 0.0, 2.0, 17);
        let (data, _) = crate::simulate::simulate(&spec, &mut rng).unwrap();
        let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();
        assert!(!result.warnings.is_empty());
    }
}
