//! Bound-constrained nonlinear least squares via a trust-region reflective
//! method.
//!
//! Minimizes `0.5 ||r(theta)||^2` subject to box constraints. The iteration
//! scales coordinates by their distance to the active bound (the
//! interior-reflective hallmark), solves the trust-region subproblem
//! near-exactly through the SVD of the scaled Jacobian, and reflects steps
//! that hit a face of the box back into the interior. Every iterate stays
//! strictly feasible.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Componentwise box constraints. Use `f64::NEG_INFINITY` / `f64::INFINITY`
/// for unconstrained coordinates.
#[derive(Debug, Clone)]
pub struct Bounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Bounds {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "Bounds::new",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for i in 0..lower.len() {
            if lower[i] >= upper[i] || lower[i].is_nan() || upper[i].is_nan() {
                return Err(Error::InvalidBounds { index: i });
            }
        }
        Ok(Self { lower, upper })
    }

    /// Fully unconstrained box of dimension `d`.
    pub fn unbounded(d: usize) -> Self {
        Self {
            lower: DVector::from_element(d, f64::NEG_INFINITY),
            upper: DVector::from_element(d, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        (0..x.len()).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }
}

/// Convergence tolerances and iteration cap.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Infinity-norm threshold on the scaled projected gradient.
    pub gtol: f64,
    /// Relative cost-decrease threshold.
    pub ftol: f64,
    /// Relative step-size threshold.
    pub xtol: f64,
    pub max_iterations: usize,
    /// Initial trust radius; defaults to `||theta0||`, or 1 when that is 0.
    pub initial_trust_radius: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gtol: 1e-8,
            ftol: 1e-8,
            xtol: 1e-8,
            max_iterations: 500,
            initial_trust_radius: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    GradientConverged,
    StepConverged,
    CostConverged,
    MaxIterations,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::GradientConverged => "gradient-converged",
            SolveStatus::StepConverged => "step-converged",
            SolveStatus::CostConverged => "cost-converged",
            SolveStatus::MaxIterations => "max-iterations",
        }
    }
}

/// Outcome of a solve. The solution is always within bounds.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: DVector<f64>,
    /// `0.5 ||r||^2` at the solution.
    pub final_cost: f64,
    pub n_iterations: usize,
    pub status: SolveStatus,
    /// Coordinates resting at a bound at the solution.
    pub active_bounds: Vec<usize>,
    /// Cost after each accepted iterate, starting with the initial cost.
    pub cost_history: Vec<f64>,
}

/// Minimizes `0.5 ||r(theta)||^2` over the box.
///
/// `theta0` is clamped into the box and nudged off any face it sits on.
/// Returns an error if the residuals are not finite at the starting point, or
/// if the trust region collapses while residuals keep coming back non-finite.
pub fn minimize<F, J>(
    mut residual_fn: F,
    mut jacobian_fn: J,
    theta0: &DVector<f64>,
    bounds: &Bounds,
    opts: &SolveOptions,
) -> Result<SolveReport>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    let d = bounds.dim();
    if theta0.len() != d {
        return Err(Error::DimensionMismatch {
            context: "minimize starting point",
            expected: d,
            got: theta0.len(),
        });
    }
    let lb = bounds.lower();
    let ub = bounds.upper();

    let mut x = theta0.clone();
    for i in 0..d {
        x[i] = x[i].clamp(lb[i], ub[i]);
    }
    x = make_strictly_feasible(&x, lb, ub, 1e-10);

    let mut f = residual_fn(&x);
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteResiduals);
    }
    let mut jac = jacobian_fn(&x);
    let mut cost = 0.5 * f.norm_squared();
    let mut g = jac.transpose() * &f;

    let mut delta = match opts.initial_trust_radius {
        Some(r) => r,
        None => {
            let norm = theta0.norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        }
    };

    let mut cost_history = vec![cost];
    let mut status = None;
    let mut iteration = 0;
    // Levenberg-Marquardt parameter of the subproblem, warm-started across
    // trust-region updates.
    let mut alpha = 0.0;

    while iteration < opts.max_iterations {
        let (v, dv) = cl_scaling(&x, &g, lb, ub);
        let g_norm = (0..d).map(|i| (g[i] * v[i]).abs()).fold(0.0, f64::max);
        if g_norm < opts.gtol {
            status = Some(SolveStatus::GradientConverged);
            break;
        }

        let dscale = v.map(f64::sqrt);
        // Curvature correction from the changing scaling matrix.
        let diag_h = DVector::from_fn(d, |i, _| g[i] * dv[i]);
        let g_h = DVector::from_fn(d, |i, _| dscale[i] * g[i]);
        let mut j_h = jac.clone();
        for j in 0..d {
            let s = dscale[j];
            for i in 0..j_h.nrows() {
                j_h[(i, j)] *= s;
            }
        }
        let model = QuadraticModel {
            jac: &j_h,
            grad: &g_h,
            diag: &diag_h,
        };
        let subproblem = TrustRegionSubproblem::new(&j_h, &diag_h, &f);
        let theta_interior = (1.0 - g_norm).max(0.995);

        let mut actual_reduction = -1.0;
        let mut x_new = x.clone();
        let mut f_new = f.clone();
        let mut cost_new = cost;
        while actual_reduction <= 0.0 {
            let p_h = subproblem.solve(delta, &mut alpha);
            let (step, step_h, predicted_reduction) =
                select_step(&x, &model, &p_h, &dscale, delta, lb, ub, theta_interior);
            let step_h_norm = step_h.norm();

            x_new = make_strictly_feasible(&(&x + &step), lb, ub, 0.0);
            f_new = residual_fn(&x_new);
            if !f_new.iter().all(|val| val.is_finite()) {
                delta = 0.25 * step_h_norm;
                if delta < 1e-250 {
                    return Err(Error::TrustRegionCollapse);
                }
                continue;
            }
            cost_new = 0.5 * f_new.norm_squared();
            actual_reduction = cost - cost_new;

            let bound_hit = step_h_norm > 0.95 * delta;
            let (delta_new, ratio) = update_trust_radius(
                delta,
                actual_reduction,
                predicted_reduction,
                step_h_norm,
                bound_hit,
            );
            let step_norm = (&x_new - &x).norm();
            status = check_termination(
                actual_reduction,
                cost,
                step_norm,
                x.norm(),
                ratio,
                opts.ftol,
                opts.xtol,
            );
            if delta_new > 0.0 {
                alpha *= delta / delta_new;
            }
            delta = delta_new;
            if status.is_some() {
                break;
            }
            if delta < 1e-250 {
                // The model stopped matching the function entirely; the step
                // is numerically zero, so report step convergence.
                status = Some(SolveStatus::StepConverged);
                break;
            }
        }

        if actual_reduction > 0.0 {
            x = x_new;
            f = f_new;
            cost = cost_new;
            jac = jacobian_fn(&x);
            g = jac.transpose() * &f;
            cost_history.push(cost);
        }
        iteration += 1;
        if status.is_some() {
            break;
        }
    }

    let status = status.unwrap_or(SolveStatus::MaxIterations);
    let active_bounds = find_active_bounds(&x, lb, ub, 10.0 * opts.xtol);
    Ok(SolveReport {
        solution: x,
        final_cost: cost,
        n_iterations: iteration,
        status,
        active_bounds,
        cost_history,
    })
}

/// Quadratic model `m(s) = g^T s + 0.5 s^T (J^T J + diag) s` in scaled space.
struct QuadraticModel<'a> {
    jac: &'a DMatrix<f64>,
    grad: &'a DVector<f64>,
    diag: &'a DVector<f64>,
}

impl QuadraticModel<'_> {
    fn value(&self, s: &DVector<f64>) -> f64 {
        let js = self.jac * s;
        let mut quad = js.norm_squared();
        for i in 0..s.len() {
            quad += self.diag[i] * s[i] * s[i];
        }
        0.5 * quad + self.grad.dot(s)
    }

    /// Coefficients `(a, b, c)` of `m(s0 + t s)` as a polynomial in `t`.
    fn along(&self, s: &DVector<f64>, s0: Option<&DVector<f64>>) -> (f64, f64, f64) {
        let js = self.jac * s;
        let mut a = js.norm_squared();
        for i in 0..s.len() {
            a += self.diag[i] * s[i] * s[i];
        }
        a *= 0.5;
        let mut b = self.grad.dot(s);
        let mut c = 0.0;
        if let Some(s0) = s0 {
            let js0 = self.jac * s0;
            b += js0.dot(&js);
            c = 0.5 * js0.norm_squared() + self.grad.dot(s0);
            for i in 0..s.len() {
                b += self.diag[i] * s0[i] * s[i];
                c += 0.5 * self.diag[i] * s0[i] * s0[i];
            }
        }
        (a, b, c)
    }
}

/// Minimum of `a t^2 + b t + c` over `[lo, hi]`.
fn minimize_quadratic_1d(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> (f64, f64) {
    let mut candidates = vec![lo, hi];
    if a > 0.0 {
        let vertex = -0.5 * b / a;
        if lo < vertex && vertex < hi {
            candidates.push(vertex);
        }
    }
    let mut best_t = lo;
    let mut best_v = f64::INFINITY;
    for &t in &candidates {
        let v = (a * t + b) * t + c;
        if v < best_v {
            best_v = v;
            best_t = t;
        }
    }
    (best_t, best_v)
}

/// Bound distances beyond this are treated as unbounded by the scaling;
/// sentinel bounds like 1e300 would otherwise blow up the scaled Jacobian.
const EFFECTIVELY_UNBOUNDED: f64 = 1e100;

/// Coleman-Li scaling: distance to the bound the gradient is pushing toward,
/// together with the derivative indicator of that distance.
fn cl_scaling(
    x: &DVector<f64>,
    g: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let d = x.len();
    let mut v = DVector::from_element(d, 1.0);
    let mut dv = DVector::zeros(d);
    for i in 0..d {
        if g[i] < 0.0 && ub[i] - x[i] < EFFECTIVELY_UNBOUNDED {
            v[i] = ub[i] - x[i];
            dv[i] = -1.0;
        } else if g[i] > 0.0 && x[i] - lb[i] < EFFECTIVELY_UNBOUNDED {
            v[i] = x[i] - lb[i];
            dv[i] = 1.0;
        }
    }
    (v, dv)
}

/// Near-exact solver of the least-squares trust-region subproblem
/// `min ||J p + f||  s.t. ||p|| <= delta`, through the SVD of the augmented
/// Jacobian `[J_h; sqrt(diag)]` and Newton iterations on the secular
/// equation of the Levenberg-Marquardt parameter.
struct TrustRegionSubproblem {
    /// `U^T f` of the augmented system.
    uf: DVector<f64>,
    /// Singular values, descending.
    singular: DVector<f64>,
    /// Right singular vectors as columns.
    v: DMatrix<f64>,
    full_rank: bool,
}

impl TrustRegionSubproblem {
    fn new(j_h: &DMatrix<f64>, diag: &DVector<f64>, f: &DVector<f64>) -> Self {
        let m = j_h.nrows();
        let d = j_h.ncols();
        let mut augmented = DMatrix::zeros(m + d, d);
        augmented.view_mut((0, 0), (m, d)).copy_from(j_h);
        for i in 0..d {
            augmented[(m + i, i)] = diag[i].max(0.0).sqrt();
        }
        let mut f_augmented = DVector::zeros(m + d);
        f_augmented.rows_mut(0, m).copy_from(f);

        let svd = augmented.svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested V^T").transpose();
        let singular = svd.singular_values;
        let uf = u.transpose() * f_augmented;
        let threshold = f64::EPSILON * (m + d) as f64 * singular[0];
        let full_rank = singular[d - 1] > threshold;
        Self {
            uf,
            singular,
            v,
            full_rank,
        }
    }

    fn phi_and_derivative(&self, alpha: f64, suf: &DVector<f64>, delta: f64) -> (f64, f64) {
        let d = self.singular.len();
        let mut norm_sq = 0.0;
        let mut derivative_acc = 0.0;
        for i in 0..d {
            let denom = self.singular[i] * self.singular[i] + alpha;
            let term = suf[i] / denom;
            norm_sq += term * term;
            derivative_acc += term * term / denom;
        }
        let p_norm = norm_sq.sqrt();
        (p_norm - delta, -derivative_acc / p_norm.max(f64::MIN_POSITIVE))
    }

    /// Solves for the step at the given radius. `alpha` carries the warm
    /// start between calls and is updated with the converged value.
    fn solve(&self, delta: f64, alpha: &mut f64) -> DVector<f64> {
        let d = self.singular.len();
        let suf = DVector::from_fn(d, |i, _| self.singular[i] * self.uf[i]);
        if suf.amax() == 0.0 {
            // Zero projected gradient: the model is already stationary.
            *alpha = 0.0;
            return DVector::zeros(d);
        }

        if self.full_rank {
            let gauss_newton = -(&self.v
                * DVector::from_fn(d, |i, _| self.uf[i] / self.singular[i]));
            if gauss_newton.norm() <= delta {
                *alpha = 0.0;
                return gauss_newton;
            }
        }

        let mut alpha_upper = suf.norm() / delta;
        let mut alpha_lower = if self.full_rank {
            let (phi, phi_prime) = self.phi_and_derivative(0.0, &suf, delta);
            -phi / phi_prime
        } else {
            0.0
        };
        let mut a = if *alpha == 0.0 {
            (alpha_lower * alpha_upper).sqrt().max(0.001 * alpha_upper)
        } else {
            *alpha
        };
        for _ in 0..10 {
            if a < alpha_lower || a > alpha_upper {
                a = (alpha_lower * alpha_upper).sqrt().max(0.001 * alpha_upper);
            }
            let (phi, phi_prime) = self.phi_and_derivative(a, &suf, delta);
            if phi < 0.0 {
                alpha_upper = a;
            }
            let ratio = phi / phi_prime;
            alpha_lower = alpha_lower.max(a - ratio);
            a -= (phi + delta) * ratio / delta;
            if phi.abs() < 0.01 * delta {
                break;
            }
        }
        *alpha = a;
        let mut p = -(&self.v
            * DVector::from_fn(d, |i, _| {
                suf[i] / (self.singular[i] * self.singular[i] + a)
            }));
        // Keep the step exactly inside the region.
        let norm = p.norm();
        if norm > 0.0 {
            p *= delta / norm;
        }
        p
    }
}

/// Largest stride `t >= 0` such that `x + t s` stays within bounds, and the
/// hit pattern (+1 upper, -1 lower) of coordinates reaching a bound there.
fn step_size_to_bound(
    x: &DVector<f64>,
    s: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
) -> (f64, Vec<i8>) {
    let d = x.len();
    let mut steps = vec![f64::INFINITY; d];
    for i in 0..d {
        if s[i] != 0.0 {
            let a = (lb[i] - x[i]) / s[i];
            let b = (ub[i] - x[i]) / s[i];
            steps[i] = a.max(b);
        }
    }
    let min_step = steps.iter().cloned().fold(f64::INFINITY, f64::min);
    let hits = (0..d)
        .map(|i| {
            if steps[i] == min_step {
                if s[i] > 0.0 {
                    1
                } else if s[i] < 0.0 {
                    -1
                } else {
                    0
                }
            } else {
                0
            }
        })
        .collect();
    (min_step, hits)
}

/// Positive root of `||base + t dir|| = delta`.
fn intersect_trust_region(base: &DVector<f64>, dir: &DVector<f64>, delta: f64) -> f64 {
    let a = dir.norm_squared();
    let b = 2.0 * base.dot(dir);
    let c = base.norm_squared() - delta * delta;
    if a == 0.0 {
        return 0.0;
    }
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    (-b + disc) / (2.0 * a)
}

/// Chooses between the interior-truncated step, the reflected step and the
/// constrained steepest descent step; this is the reflective part of the
/// method. Returns `(step, scaled_step, predicted_reduction)`.
#[allow(clippy::too_many_arguments)]
fn select_step(
    x: &DVector<f64>,
    model: &QuadraticModel<'_>,
    p_h: &DVector<f64>,
    dscale: &DVector<f64>,
    delta: f64,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    theta: f64,
) -> (DVector<f64>, DVector<f64>, f64) {
    let d = x.len();
    let p = DVector::from_fn(d, |i, _| dscale[i] * p_h[i]);
    let candidate = x + &p;
    if (0..d).all(|i| candidate[i] > lb[i] && candidate[i] < ub[i]) {
        let value = model.value(p_h);
        return (p, p_h.clone(), -value);
    }

    // Truncate at the first face hit and reflect the crossing coordinates.
    let (p_stride, hits) = step_size_to_bound(x, &p, lb, ub);
    let mut r_h = p_h.clone();
    for i in 0..d {
        if hits[i] != 0 {
            r_h[i] = -r_h[i];
        }
    }
    let r = DVector::from_fn(d, |i, _| dscale[i] * r_h[i]);
    let p_trunc = &p * p_stride;
    let p_h_trunc = p_h * p_stride;
    let x_on_bound = x + &p_trunc;

    let to_tr = intersect_trust_region(&p_h_trunc, &r_h, delta);
    let (to_bound, _) = step_size_to_bound(&x_on_bound, &r, lb, ub);

    // Admissible stride range along the reflected direction, keeping the
    // final point strictly interior.
    let r_stride_max = to_bound.min(to_tr);
    let (r_stride_lo, r_stride_hi) = if r_stride_max > 0.0 {
        let lo = (1.0 - theta) * p_stride / r_stride_max;
        let hi = if r_stride_max == to_bound {
            theta * to_bound
        } else {
            to_tr
        };
        (lo, hi)
    } else {
        (0.0, -1.0)
    };

    let (reflected, reflected_h, r_value) = if r_stride_lo <= r_stride_hi {
        let (a, b, c) = model.along(&r_h, Some(&p_h_trunc));
        let (stride, value) = minimize_quadratic_1d(a, b, c, r_stride_lo, r_stride_hi);
        let step_h = &p_h_trunc + &r_h * stride;
        let step = DVector::from_fn(d, |i, _| dscale[i] * step_h[i]);
        (step, step_h, value)
    } else {
        (DVector::zeros(d), DVector::zeros(d), f64::INFINITY)
    };

    // Interior truncation of the original step.
    let p_interior = &p_trunc * theta;
    let p_h_interior = &p_h_trunc * theta;
    let p_value = model.value(&p_h_interior);

    // Constrained steepest descent.
    let ag_h = -model.grad;
    let ag = DVector::from_fn(d, |i, _| dscale[i] * ag_h[i]);
    let ag_norm = ag_h.norm();
    let to_tr_sd = if ag_norm > 0.0 { delta / ag_norm } else { 0.0 };
    let (to_bound_sd, _) = step_size_to_bound(x, &ag, lb, ub);
    let sd_limit = if to_bound_sd < to_tr_sd {
        theta * to_bound_sd
    } else {
        to_tr_sd
    };
    let (a, b, _) = model.along(&ag_h, None);
    let (sd_stride, sd_value) = minimize_quadratic_1d(a, b, 0.0, 0.0, sd_limit);
    let sd = &ag * sd_stride;
    let sd_h = ag_h * sd_stride;

    if p_value < r_value && p_value < sd_value {
        (p_interior, p_h_interior, -p_value)
    } else if r_value < p_value && r_value < sd_value {
        (reflected, reflected_h, -r_value)
    } else {
        (sd, sd_h, -sd_value)
    }
}

fn update_trust_radius(
    delta: f64,
    actual: f64,
    predicted: f64,
    step_norm: f64,
    bound_hit: bool,
) -> (f64, f64) {
    let ratio = if predicted > 0.0 {
        actual / predicted
    } else if predicted == 0.0 && actual == 0.0 {
        1.0
    } else {
        0.0
    };
    let new_delta = if ratio < 0.25 {
        0.25 * step_norm
    } else if ratio > 0.75 && bound_hit {
        2.0 * delta
    } else {
        delta
    };
    (new_delta, ratio)
}

fn check_termination(
    actual_reduction: f64,
    cost: f64,
    step_norm: f64,
    x_norm: f64,
    ratio: f64,
    ftol: f64,
    xtol: f64,
) -> Option<SolveStatus> {
    let ftol_ok = actual_reduction < ftol * cost && ratio > 0.25;
    let xtol_ok = step_norm < xtol * (xtol + x_norm);
    if ftol_ok {
        Some(SolveStatus::CostConverged)
    } else if xtol_ok {
        Some(SolveStatus::StepConverged)
    } else {
        None
    }
}

/// Moves points on (or beyond) a face strictly inside the box. `rstep = 0`
/// nudges by the smallest representable amount.
fn make_strictly_feasible(
    x: &DVector<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    rstep: f64,
) -> DVector<f64> {
    let mut out = x.clone();
    for i in 0..x.len() {
        let mut xi = x[i];
        if xi <= lb[i] {
            xi = if rstep == 0.0 {
                lb[i].next_up()
            } else {
                lb[i] + rstep * lb[i].abs().max(1.0)
            };
        } else if xi >= ub[i] {
            xi = if rstep == 0.0 {
                ub[i].next_down()
            } else {
                ub[i] - rstep * ub[i].abs().max(1.0)
            };
        }
        if xi <= lb[i] || xi >= ub[i] {
            xi = 0.5 * (lb[i] + ub[i]);
        }
        out[i] = xi;
    }
    out
}

fn find_active_bounds(x: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>, rtol: f64) -> Vec<usize> {
    let mut active = Vec::new();
    for i in 0..x.len() {
        let lower_dist = x[i] - lb[i];
        let upper_dist = ub[i] - x[i];
        let lower_threshold = rtol * lb[i].abs().max(1.0);
        let upper_threshold = rtol * ub[i].abs().max(1.0);
        let at_lower = lb[i].is_finite() && lower_dist <= upper_dist.min(lower_threshold);
        let at_upper = ub[i].is_finite() && upper_dist <= lower_dist.min(upper_threshold);
        if at_lower || at_upper {
            active.push(i);
        }
    }
    active
}
