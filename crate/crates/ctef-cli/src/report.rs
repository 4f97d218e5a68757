//! JSON result schemas. Every document carries a `schema_version` field.

use ctef::{FitResult, GroundTruth, SimSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Serialized fit: geometry in both representations plus solver diagnostics.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub dim: usize,
    pub weight: f64,
    /// 1-based principal-component columns when the fit was reduced.
    pub subspace: Option<Vec<usize>>,
    pub center: Vec<f64>,
    pub axis_lengths: Vec<f64>,
    /// Rotation matrix, row-major.
    pub rotation: Vec<Vec<f64>>,
    /// Quadratic form `M` with `(x - c)^T M (x - c) = 1`, row-major.
    pub quadratic_form: Vec<Vec<f64>>,
    pub loss: f64,
    pub iterations: usize,
    pub status: String,
    pub active_bounds: Vec<usize>,
    pub pca_mean: Vec<f64>,
    /// Principal components, row-major `p x p`.
    pub pca_components: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn from_fit(result: &FitResult, weight: f64) -> Self {
        let e = &result.ellipsoid_original;
        let p = e.dim();
        let r = e.rotation.matrix();
        // M = R^T A^2 R with A = diag(1 / axis length).
        let mut a2r = r.clone();
        for i in 0..p {
            let ai2 = 1.0 / (e.axis_lengths[i] * e.axis_lengths[i]);
            for j in 0..p {
                a2r[(i, j)] *= ai2;
            }
        }
        let quadratic = r.transpose() * a2r;
        Self {
            schema_version: SCHEMA_VERSION,
            dim: p,
            weight,
            subspace: result
                .subspace
                .as_ref()
                .map(|cols| cols.iter().map(|c| c + 1).collect()),
            center: e.center.iter().cloned().collect(),
            axis_lengths: e.axis_lengths.iter().cloned().collect(),
            rotation: matrix_rows(r),
            quadratic_form: matrix_rows(&quadratic),
            loss: result.loss,
            iterations: result.report.n_iterations,
            status: result.report.status.as_str().to_string(),
            active_bounds: result.report.active_bounds.clone(),
            pca_mean: result.pca.mean.iter().cloned().collect(),
            pca_components: matrix_rows(&result.pca.components),
            warnings: result.warnings.clone(),
        }
    }
}

/// Serialized ground truth of a simulated dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct TruthReport {
    pub schema_version: u32,
    pub dim: usize,
    pub n_samples: usize,
    pub tau: f64,
    pub noise_pct: f64,
    pub axis_ratio: f64,
    pub seed: u64,
    pub center: Vec<f64>,
    /// Shape matrix `Lambda = R^T A^{-1}`, row-major.
    pub lambda: Vec<Vec<f64>>,
    pub rotation: Vec<Vec<f64>>,
    pub axis_lengths: Vec<f64>,
    pub mean_direction: Vec<f64>,
}

impl TruthReport {
    pub fn new(spec: &SimSpec, truth: &GroundTruth) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: spec.dim,
            n_samples: spec.n_samples,
            tau: spec.concentration,
            noise_pct: spec.noise_pct,
            axis_ratio: spec.axis_ratio,
            seed: spec.seed,
            center: truth.center.iter().cloned().collect(),
            lambda: matrix_rows(&truth.lambda),
            rotation: matrix_rows(truth.rotation.matrix()),
            axis_lengths: truth.axis_lengths().iter().cloned().collect(),
            mean_direction: truth.mu.iter().cloned().collect(),
        }
    }
}

/// Serialized clustering outcome.
#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub schema_version: u32,
    pub n_clusters: usize,
    pub steps: usize,
    pub objective: f64,
    /// One entry per cluster; `null` for dormant clusters.
    pub ellipsoids: Vec<Option<FitReport>>,
    pub warnings: Vec<String>,
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable reports");
    text.push('\n');
    text
}
