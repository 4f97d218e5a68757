//! Cross-module properties of the fitting pipeline: invariance of the fitted
//! ellipsoid under rigid motions of the data, recovery from exact surface
//! samples, and frame consistency of the reported results.

use approx::assert_relative_eq;
use ctef::geometry::{random_rotation, sample_surface};
use ctef::pipeline::{fit, DEFAULT_WEIGHT};
use ctef::simulate::{random_ground_truth, sample_sphere, simulate, SimSpec};
use ctef::solver::SolveOptions;
use ctef::{metrics, Ellipsoid};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quadratic_matrix(e: &Ellipsoid) -> DMatrix<f64> {
    let p = e.dim();
    let r = e.rotation.matrix();
    let mut a2r = r.clone();
    for i in 0..p {
        let ai2 = 1.0 / (e.axis_lengths[i] * e.axis_lengths[i]);
        for j in 0..p {
            a2r[(i, j)] *= ai2;
        }
    }
    r.transpose() * a2r
}

#[test]
fn fitted_ellipsoid_is_invariant_under_rigid_motions() {
    let mut rng = ChaCha8Rng::seed_from_u64(241);
    let spec = SimSpec::new(3, 40, 1.0, 0.01, 2.0, 77);
    let (data, _) = simulate(&spec, &mut rng).unwrap();
    let opts = SolveOptions::default();
    let base = fit(&data, DEFAULT_WEIGHT, &opts).unwrap();
    let m_base = quadratic_matrix(&base.ellipsoid_original);

    for _ in 0..10 {
        let q = random_rotation(3, &mut rng).into_matrix();
        let shift = DVector::from_fn(3, |_, _| {
            10.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5)
        });
        let mut moved = DMatrix::zeros(data.nrows(), 3);
        for i in 0..data.nrows() {
            let x = data.row(i).transpose();
            moved.row_mut(i).copy_from(&((&q * x) + &shift).transpose());
        }
        let transformed = fit(&moved, DEFAULT_WEIGHT, &opts).unwrap();

        let expected_center = &q * &base.ellipsoid_original.center + &shift;
        let center_err = (&transformed.ellipsoid_original.center - &expected_center).norm()
            / expected_center.norm().max(1.0);
        assert!(center_err < 1e-6, "center error {center_err}");

        let m_moved = quadratic_matrix(&transformed.ellipsoid_original);
        let expected_m = &q * &m_base * q.transpose();
        let m_err = (&m_moved - &expected_m).norm() / expected_m.norm();
        assert!(m_err < 1e-6, "quadratic form error {m_err}");
    }
}

#[test]
fn exact_surface_samples_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(251);
    let opts = SolveOptions::default();
    for trial in 0..10 {
        let spec = SimSpec::new(3, 50, 0.0, 0.0, 1.0 + 0.5 * (trial % 4) as f64, trial);
        let truth = random_ground_truth(&spec, &mut rng).unwrap();
        let e = truth.ellipsoid();
        let mut data = DMatrix::zeros(50, 3);
        for i in 0..50 {
            let eta = sample_sphere(3, &mut rng);
            let x = sample_surface(&e, &eta).unwrap();
            data.row_mut(i).copy_from(&x.transpose());
        }
        let result = fit(&data, DEFAULT_WEIGHT, &opts).unwrap();
        let max_axis = truth.axis_lengths().max();
        let offset =
            metrics::offset_error(&result.ellipsoid_original.center, &truth.center).unwrap();
        let shape = metrics::shape_error(
            &result.ellipsoid_original.shape_matrix(),
            &truth.lambda,
        )
        .unwrap();
        assert!(
            offset < 1e-5 * max_axis,
            "trial {trial}: offset error {offset}"
        );
        assert!(shape < 1e-5, "trial {trial}: shape error {shape}");
    }
}

#[test]
fn reported_loss_and_frames_are_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(257);
    let spec = SimSpec::new(4, 60, 2.0, 0.02, 2.5, 99);
    let (data, _) = simulate(&spec, &mut rng).unwrap();
    let result = fit(&data, DEFAULT_WEIGHT, &SolveOptions::default()).unwrap();

    // Loss field agrees with an independent evaluation through the metrics
    // module (l_{2,2} of the fitted shape on the transformed data).
    let y = result.pca.transform(&data);
    let lambda = result.params_pca.to_ellipsoid().shape_matrix();
    let l22 = metrics::lpq_error(&lambda, &result.params_pca.c, &y, 2, 2).unwrap();
    assert_relative_eq!(result.loss, l22, epsilon = 1e-10, max_relative = 1e-10);

    // Both frames give the same implicit residual for arbitrary points.
    let pca_frame = result.params_pca.to_ellipsoid();
    for _ in 0..100 {
        let x = DVector::from_fn(4, |_, _| 30.0 * (rand::Rng::random::<f64>(&mut rng) - 0.5));
        let y = result
            .pca
            .transform(&DMatrix::from_fn(1, 4, |_, j| x[j]))
            .row(0)
            .transpose();
        let delta = result.ellipsoid_original.implicit_residual(&x)
            - pca_frame.implicit_residual(&y);
        assert!(delta.abs() < 1e-10, "frame residual difference {delta}");
    }

    // The fitted parameters always describe a real ellipsoid.
    assert!(result.params_pca.a.iter().all(|&ai| ai > 0.0));
    assert!(result
        .ellipsoid_original
        .axis_lengths
        .iter()
        .all(|&l| l.is_finite() && l > 0.0));
}
