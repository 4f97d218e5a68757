//! Ellipsoid clustering: alternate between fitting one ellipsoid per cluster
//! and reassigning each point to the cluster whose ellipsoid it sits closest
//! to (in squared implicit residual), starting from a k-means partition.
//!
//! The alternation only finds local optima, and symmetric geometries such as
//! concentric rings trap a single k-means start in a side-by-side split. The
//! driver therefore runs the loop from a small set of initializations (the
//! k-means partition, a distance-to-centroid quantile split and random
//! assignments) and keeps the state with the smallest total squared residual,
//! the same pattern as restarting Lloyd's algorithm.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pipeline::{self, FitResult};
use crate::solver::SolveOptions;

/// State of a clustering run.
#[derive(Debug)]
pub struct ClusterState {
    /// Cluster id per point, in `{0, .., n_clusters - 1}`.
    pub assignments: Vec<usize>,
    /// Fitted ellipsoid per cluster; `None` marks a dormant cluster that
    /// never accumulated enough points to fit.
    pub ellipsoids: Vec<Option<FitResult>>,
    /// Alternating steps executed by the selected run.
    pub steps: usize,
    /// Total objective `sum_m min_j (||A_j R_j (x_m - c_j)||^2 - 1)^2`.
    pub objective: f64,
    pub warnings: Vec<String>,
}

/// Options of [`cluster`].
#[derive(Debug, Clone, Copy)]
pub struct ClusterOptions {
    /// Maximum number of fit/reassign steps per initialization.
    pub max_steps: usize,
    /// Feasible-box weight passed to every per-cluster fit.
    pub weight: f64,
    /// Number of initializations to try; 1 uses the k-means start alone.
    pub n_restarts: usize,
    pub solver: SolveOptions,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            max_steps: 20,
            weight: pipeline::DEFAULT_WEIGHT,
            n_restarts: 4,
            solver: SolveOptions::default(),
        }
    }
}

fn squared_distance(data: &DMatrix<f64>, row: usize, center: &DVector<f64>) -> f64 {
    let mut sum = 0.0;
    for j in 0..data.ncols() {
        let d = data[(row, j)] - center[j];
        sum += d * d;
    }
    sum
}

/// Lloyd's algorithm with k-means++ seeding; at most 100 iterations.
/// Deterministic for a given generator state. Empty clusters are re-seeded
/// from the point farthest from its current center.
pub fn kmeans_init<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    n_clusters: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = data.nrows();
    let p = data.ncols();
    if n_clusters == 0 {
        return Err(Error::InvalidArgument("need at least one cluster".into()));
    }
    if n < n_clusters {
        return Err(Error::InsufficientData {
            needed: n_clusters,
            got: n,
        });
    }
    if n_clusters == 1 {
        return Ok(vec![0; n]);
    }

    // k-means++ seeding: subsequent centers drawn proportionally to the
    // squared distance from the nearest existing center.
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(n_clusters);
    centers.push(data.row(rng.random_range(0..n)).transpose());
    let mut nearest_sq = vec![0.0f64; n];
    while centers.len() < n_clusters {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for center in &centers {
                best = best.min(squared_distance(data, i, center));
            }
            nearest_sq[i] = best;
            total += best;
        }
        let chosen = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for i in 0..n {
                target -= nearest_sq[i];
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(data.row(chosen).transpose());
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..100 {
        // Assign.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (j, center) in centers.iter().enumerate() {
                let dist = squared_distance(data, i, center);
                if dist < best_dist {
                    best_dist = dist;
                    best = j;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }
        // Update.
        let mut counts = vec![0usize; n_clusters];
        let mut sums = vec![DVector::<f64>::zeros(p); n_clusters];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for j in 0..p {
                sums[assignments[i]][j] += data[(i, j)];
            }
        }
        for j in 0..n_clusters {
            if counts[j] > 0 {
                centers[j] = &sums[j] / counts[j] as f64;
            } else {
                // Re-seed an empty cluster from the farthest point.
                let mut farthest = 0;
                let mut farthest_dist = -1.0;
                for i in 0..n {
                    let dist = squared_distance(data, i, &centers[assignments[i]]);
                    if dist > farthest_dist {
                        farthest_dist = dist;
                        farthest = i;
                    }
                }
                centers[j] = data.row(farthest).transpose();
                assignments[farthest] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assignments)
}

/// Contiguous quantile split by squared distance from the data centroid; the
/// natural starting partition for nested or ring-like clusters.
fn radial_init(data: &DMatrix<f64>, n_clusters: usize) -> Vec<usize> {
    let n = data.nrows();
    let centroid = data.row_mean().transpose();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        squared_distance(data, a, &centroid)
            .partial_cmp(&squared_distance(data, b, &centroid))
            .unwrap()
    });
    let mut assignments = vec![0usize; n];
    for (rank, &i) in order.iter().enumerate() {
        assignments[i] = (rank * n_clusters / n).min(n_clusters - 1);
    }
    assignments
}

fn rows_of(data: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(indices.len(), data.ncols());
    for (k, &i) in indices.iter().enumerate() {
        out.row_mut(k).copy_from(&data.row(i));
    }
    out
}

struct Run {
    assignments: Vec<usize>,
    ellipsoids: Vec<Option<FitResult>>,
    steps: usize,
    objective: f64,
    warnings: Vec<String>,
}

/// One alternation run from a fixed initial assignment.
fn alternate(
    data: &DMatrix<f64>,
    n_clusters: usize,
    init: &[usize],
    opts: &ClusterOptions,
) -> Result<Run> {
    let n = data.nrows();
    let p = data.ncols();
    let mut assignments = init.to_vec();
    let mut ellipsoids: Vec<Option<FitResult>> = (0..n_clusters).map(|_| None).collect();
    let mut warnings = Vec::new();
    let mut steps = 0;

    for step in 1..=opts.max_steps {
        steps = step;
        let membership: Vec<Vec<usize>> = (0..n_clusters)
            .map(|j| (0..n).filter(|&i| assignments[i] == j).collect())
            .collect();

        let fits: Vec<Option<std::result::Result<FitResult, String>>> = membership
            .par_iter()
            .map(|members| {
                if members.len() < p + 1 {
                    return None;
                }
                let subset = rows_of(data, members);
                Some(pipeline::fit(&subset, opts.weight, &opts.solver).map_err(|e| e.to_string()))
            })
            .collect();
        for (j, outcome) in fits.into_iter().enumerate() {
            match outcome {
                Some(Ok(result)) => ellipsoids[j] = Some(result),
                Some(Err(message)) => warnings.push(format!(
                    "step {step}: cluster {j} fit failed ({message}); keeping previous ellipsoid"
                )),
                None => warnings.push(format!(
                    "step {step}: cluster {j} has {} points (need {}); keeping previous ellipsoid",
                    membership[j].len(),
                    p + 1
                )),
            }
        }

        if ellipsoids.iter().all(|e| e.is_none()) {
            return Err(Error::DegenerateData("no cluster could be fitted".into()));
        }

        // Reassign to the ellipsoid with the smallest squared residual;
        // ties go to the lowest cluster index.
        let mut changed = false;
        for i in 0..n {
            let x = data.row(i).transpose();
            let mut best = assignments[i];
            let mut best_value = f64::INFINITY;
            for (j, fit) in ellipsoids.iter().enumerate() {
                if let Some(fit) = fit {
                    let r = fit.ellipsoid_original.implicit_residual(&x);
                    let value = r * r;
                    if value < best_value {
                        best_value = value;
                        best = j;
                    }
                }
            }
            if best != assignments[i] {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut objective = 0.0;
    for i in 0..n {
        let x = data.row(i).transpose();
        let mut best = f64::INFINITY;
        for fit in ellipsoids.iter().flatten() {
            let r = fit.ellipsoid_original.implicit_residual(&x);
            best = best.min(r * r);
        }
        objective += best;
    }

    Ok(Run {
        assignments,
        ellipsoids,
        steps,
        objective,
        warnings,
    })
}

/// Clusters the rows of `data` into `n_clusters` groups by alternating
/// per-cluster ellipsoid fits with residual-based reassignment, for at most
/// `opts.max_steps` steps per initialization, stopping early once
/// assignments no longer change. A cluster with fewer than `p + 1` members
/// keeps its previous ellipsoid for the round.
///
/// `opts.n_restarts` initializations are tried (k-means, then a radial
/// quantile split, then random assignments) and the run with the smallest
/// total squared residual wins; ties keep the earliest initialization.
/// Deterministic for a given generator state.
pub fn cluster<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    n_clusters: usize,
    rng: &mut R,
    opts: &ClusterOptions,
) -> Result<ClusterState> {
    let n = data.nrows();
    if opts.max_steps == 0 {
        return Err(Error::InvalidArgument("need at least one step".into()));
    }
    if opts.n_restarts == 0 {
        return Err(Error::InvalidArgument("need at least one restart".into()));
    }

    let mut inits: Vec<Vec<usize>> = vec![kmeans_init(data, n_clusters, rng)?];
    if opts.n_restarts > 1 && n_clusters > 1 {
        inits.push(radial_init(data, n_clusters));
        while inits.len() < opts.n_restarts {
            inits.push((0..n).map(|_| rng.random_range(0..n_clusters)).collect());
        }
    }

    let runs: Vec<Result<Run>> = inits
        .par_iter()
        .map(|init| alternate(data, n_clusters, init, opts))
        .collect();

    let mut best: Option<Run> = None;
    let mut first_error = None;
    for run in runs {
        match run {
            Ok(run) => {
                let better = best
                    .as_ref()
                    .is_none_or(|current| run.objective < current.objective);
                if better {
                    best = Some(run);
                }
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match best {
        Some(run) => Ok(ClusterState {
            assignments: run.assignments,
            ellipsoids: run.ellipsoids,
            steps: run.steps,
            objective: run.objective,
            warnings: run.warnings,
        }),
        None => Err(first_error.expect("at least one run")),
    }
}

/// Fraction of points whose labels agree with the reference after the best
/// relabeling of clusters. Both labelings must use ids below 16.
pub fn permutation_accuracy(predicted: &[usize], reference: &[usize]) -> f64 {
    assert_eq!(predicted.len(), reference.len());
    if predicted.is_empty() {
        return 1.0;
    }
    let k = predicted
        .iter()
        .chain(reference.iter())
        .max()
        .map_or(0, |&m| m + 1);
    assert!(k <= 16, "too many clusters for exhaustive matching");
    let mut labels: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    permute(&mut labels, 0, &mut |perm| {
        let matches = predicted
            .iter()
            .zip(reference.iter())
            .filter(|&(&p, &r)| perm[p] == r)
            .count();
        best = best.max(matches);
    });
    best as f64 / predicted.len() as f64
}

fn permute(labels: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == labels.len() {
        visit(labels);
        return;
    }
    for i in start..labels.len() {
        labels.swap(start, i);
        permute(labels, start + 1, visit);
        labels.swap(start, i);
    }
}

/// Adjusted Rand index between two labelings; 1 for identical partitions,
/// near 0 for independent ones.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for i in 0..n {
        table[a[i]][b[i]] += 1;
    }
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_rows: f64 = table.iter().map(|row| choose2(row.iter().sum())).sum();
    let sum_cols: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum()))
        .sum();
    let total = choose2(n);
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index - expected).abs() < 1e-15 {
        return 1.0;
    }
    (sum_cells - expected) / (max_index - expected)
}
