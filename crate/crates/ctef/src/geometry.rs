//! Ellipsoid representations and the Cayley parametrization of rotations.
//!
//! An ellipsoid in `R^p` is the set `{x : ||A R (x - c)||^2 = 1}` where
//! `A = diag(a)` holds the inverse axis lengths, `R` is a rotation and `c` is
//! the center. Rotations are reached from unconstrained coordinates
//! `s in R^{p(p-1)/2}` through the Cayley transform of the skew-symmetric
//! matrix `S(s)`, which turns the rotation constraint into plain Euclidean
//! coordinates the least-squares solver can handle.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Unconstrained rotation coordinates; length must be `p(p-1)/2`.
pub type SkewCoords = DVector<f64>;

/// Number of free skew-symmetric coordinates in dimension `p`.
pub fn skew_dim(p: usize) -> usize {
    p * (p - 1) / 2
}

/// A rotation matrix, i.e. an element of SO(p).
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    matrix: DMatrix<f64>,
}

impl Rotation {
    /// Validates orthogonality (`R^T R = I` within 1e-12 per entry) and
    /// `det R = 1` within 1e-12.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let p = matrix.nrows();
        if matrix.ncols() != p {
            return Err(Error::DimensionMismatch {
                context: "Rotation::from_matrix",
                expected: p,
                got: matrix.ncols(),
            });
        }
        let gram = matrix.transpose() * &matrix;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not orthogonal: (R^T R)[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "matrix has determinant {det}, not +1"
            )));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix the caller promises is in SO(p). Used for matrices that
    /// are orthogonal by construction.
    pub fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            matrix: DMatrix::identity(p, p),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// The inverse rotation.
    pub fn transposed(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
        }
    }
}

/// Optimization coordinates of an ellipsoid: inverse axis lengths `a`,
/// center `c` and rotation coordinates `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidParams {
    pub a: DVector<f64>,
    pub c: DVector<f64>,
    pub s: SkewCoords,
}

impl EllipsoidParams {
    /// Validates `a_i > 0`, matching lengths of `a` and `c`, and
    /// `len(s) = p(p-1)/2`.
    pub fn new(a: DVector<f64>, c: DVector<f64>, s: SkewCoords) -> Result<Self> {
        let p = a.len();
        if c.len() != p {
            return Err(Error::DimensionMismatch {
                context: "EllipsoidParams center",
                expected: p,
                got: c.len(),
            });
        }
        if s.len() != skew_dim(p) {
            return Err(Error::DimensionMismatch {
                context: "EllipsoidParams skew coords",
                expected: skew_dim(p),
                got: s.len(),
            });
        }
        if a.iter().any(|&ai| ai <= 0.0 || !ai.is_finite()) {
            return Err(Error::InvalidArgument(
                "inverse axis lengths must be positive and finite".into(),
            ));
        }
        Ok(Self { a, c, s })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Total number of free coordinates, `2p + p(p-1)/2`.
    pub fn flat_dim(p: usize) -> usize {
        2 * p + skew_dim(p)
    }

    /// Packs `(a, c, s)` into one vector in that coordinate order.
    pub fn to_flat(&self) -> DVector<f64> {
        let p = self.dim();
        let mut flat = DVector::zeros(Self::flat_dim(p));
        flat.rows_mut(0, p).copy_from(&self.a);
        flat.rows_mut(p, p).copy_from(&self.c);
        flat.rows_mut(2 * p, skew_dim(p)).copy_from(&self.s);
        flat
    }

    /// Inverse of [`EllipsoidParams::to_flat`].
    pub fn from_flat(flat: &DVector<f64>, p: usize) -> Result<Self> {
        if flat.len() != Self::flat_dim(p) {
            return Err(Error::DimensionMismatch {
                context: "EllipsoidParams::from_flat",
                expected: Self::flat_dim(p),
                got: flat.len(),
            });
        }
        Self::new(
            flat.rows(0, p).into_owned(),
            flat.rows(p, p).into_owned(),
            flat.rows(2 * p, skew_dim(p)).into_owned(),
        )
    }

    pub fn rotation(&self) -> Rotation {
        rotation_from_coords(&self.s, self.dim()).expect("validated on construction")
    }

    /// Geometric form with axis lengths `1/a_i`.
    pub fn to_ellipsoid(&self) -> Ellipsoid {
        Ellipsoid {
            center: self.c.clone(),
            rotation: self.rotation(),
            axis_lengths: self.a.map(|ai| 1.0 / ai),
        }
    }
}

/// Geometric form of an ellipsoid: center, orientation and axis lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    pub rotation: Rotation,
    pub axis_lengths: DVector<f64>,
}

impl Ellipsoid {
    pub fn new(center: DVector<f64>, rotation: Rotation, axis_lengths: DVector<f64>) -> Result<Self> {
        let p = center.len();
        if rotation.dim() != p || axis_lengths.len() != p {
            return Err(Error::DimensionMismatch {
                context: "Ellipsoid::new",
                expected: p,
                got: rotation.dim().max(axis_lengths.len()),
            });
        }
        if axis_lengths.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return Err(Error::InvalidArgument(
                "axis lengths must be positive and finite".into(),
            ));
        }
        Ok(Self {
            center,
            rotation,
            axis_lengths,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Inverse axis lengths, the diagonal of `A`.
    pub fn inverse_axis_lengths(&self) -> DVector<f64> {
        self.axis_lengths.map(|l| 1.0 / l)
    }

    /// The shape matrix `Lambda = R^T A^{-1}`, which maps the unit sphere
    /// onto the centered ellipsoid.
    pub fn shape_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut m = self.rotation.matrix().transpose();
        for j in 0..p {
            let lj = self.axis_lengths[j];
            for i in 0..p {
                m[(i, j)] *= lj;
            }
        }
        m
    }

    /// `||A R (x - c)||^2 - 1`; zero exactly on the surface.
    pub fn implicit_residual(&self, x: &DVector<f64>) -> f64 {
        let z = self.rotation.matrix() * (x - &self.center);
        z.iter()
            .zip(self.axis_lengths.iter())
            .map(|(zi, li)| (zi / li) * (zi / li))
            .sum::<f64>()
            - 1.0
    }
}

/// Quadratic form representation `(x - c)^T M (x - c) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub matrix: DMatrix<f64>,
    pub center: DVector<f64>,
}

/// Embeds coordinates into a skew-symmetric matrix, filling the strict upper
/// triangle row by row: `s_1 -> (1,2)`, `s_2 -> (1,3)`, `s_3 -> (2,3)` for
/// `p = 3`, with the lower triangle negated.
pub fn skew_embed(s: &SkewCoords, p: usize) -> Result<DMatrix<f64>> {
    if s.len() != skew_dim(p) {
        return Err(Error::DimensionMismatch {
            context: "skew_embed",
            expected: skew_dim(p),
            got: s.len(),
        });
    }
    let mut m = DMatrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            m[(i, j)] = s[k];
            m[(j, i)] = -s[k];
            k += 1;
        }
    }
    Ok(m)
}

/// Reads the strict upper triangle of a matrix back into coordinates, using
/// the same ordering as [`skew_embed`].
pub fn skew_extract(m: &DMatrix<f64>) -> SkewCoords {
    let p = m.nrows();
    let mut s = DVector::zeros(skew_dim(p));
    let mut k = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            s[k] = m[(i, j)];
            k += 1;
        }
    }
    s
}

/// The Cayley transform `S -> (I + S)^{-1} (I - S)`, mapping skew-symmetric
/// matrices into SO(p). Evaluated by solving the linear system
/// `(I + S) X = I - S` rather than forming the inverse.
pub fn cayley(skew: &DMatrix<f64>) -> Rotation {
    let p = skew.nrows();
    debug_assert_eq!(skew.ncols(), p);
    let identity = DMatrix::<f64>::identity(p, p);
    let plus = &identity + skew;
    let minus = &identity - skew;
    let solution = plus
        .lu()
        .solve(&minus)
        .expect("I + S is invertible for every skew-symmetric S");
    Rotation::from_matrix_unchecked(solution)
}

/// Composite map `s -> Cay(S(s))` from coordinates to rotations.
pub fn rotation_from_coords(s: &SkewCoords, p: usize) -> Result<Rotation> {
    Ok(cayley(&skew_embed(s, p)?))
}

/// Quadratic form `M = R(s)^T diag(a)^2 R(s)` of the parametrized ellipsoid.
pub fn to_quadratic_form(params: &EllipsoidParams) -> QuadraticForm {
    let p = params.dim();
    let r = params.rotation();
    // A^2 R computed by scaling rows of R.
    let mut a2r = r.matrix().clone();
    for i in 0..p {
        let ai2 = params.a[i] * params.a[i];
        for j in 0..p {
            a2r[(i, j)] *= ai2;
        }
    }
    let m = r.matrix().transpose() * a2r;
    // Enforce exact symmetry against roundoff in the product.
    let sym = 0.5 * (&m + m.transpose());
    QuadraticForm {
        matrix: sym,
        center: params.c.clone(),
    }
}

/// Maps a unit direction `eta` to the surface point `R^T A^{-1} eta + c`.
pub fn sample_surface(ellipsoid: &Ellipsoid, eta: &DVector<f64>) -> Result<DVector<f64>> {
    let p = ellipsoid.dim();
    if eta.len() != p {
        return Err(Error::DimensionMismatch {
            context: "sample_surface",
            expected: p,
            got: eta.len(),
        });
    }
    let norm = eta.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NonUnitVector { norm });
    }
    let scaled = DVector::from_fn(p, |i, _| ellipsoid.axis_lengths[i] * eta[i]);
    Ok(ellipsoid.rotation.matrix().transpose() * scaled + &ellipsoid.center)
}

/// Haar-distributed random rotation, by QR-orthonormalizing a Gaussian matrix
/// with sign-corrected factors and flipping one column if det = -1.
pub fn random_rotation<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Rotation {
    assert!(p >= 1, "dimension must be at least 1");
    let gaussian = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = gaussian.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the sign ambiguity of QR so Q is Haar distributed.
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            for i in 0..p {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..p {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    Rotation::from_matrix_unchecked(q)
}
