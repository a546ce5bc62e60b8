//! Sparse recovery of the dominant coefficient vector from ICI-free pilots,
//! and channel reconstruction from the estimate.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bem::ChannelMatrix;
use crate::config::SystemParams;
use crate::dft::frequency_response;
use crate::error::{dimension, validation, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub c_hat: Vec<Complex64>,
    /// Recovered nonzero indices, ascending.
    pub support: Vec<usize>,
    /// `‖y − A c_hat‖₂`.
    pub residual_norm: f64,
    pub iterations: usize,
    /// False when the solver stopped on a singular system or hit its
    /// iteration cap; the estimate is still usable.
    pub converged: bool,
}

fn check_system(a: &DMatrix<Complex64>, y: &[Complex64]) -> Result<()> {
    if a.nrows() != y.len() {
        return Err(dimension(format!("A has {} rows but y has {} entries", a.nrows(), y.len())));
    }
    if let Some(j) = (0..a.ncols()).find(|&j| a.column(j).norm() == 0.0) {
        return Err(validation(format!("sensing matrix column {j} is zero")));
    }
    Ok(())
}

fn residual(a: &DMatrix<Complex64>, y: &DVector<Complex64>, c: &DVector<Complex64>) -> DVector<Complex64> {
    y - a * c
}

/// Least squares on the columns in `support`; `None` if the normal
/// equations are singular.
fn restricted_ls(a: &DMatrix<Complex64>, y: &DVector<Complex64>, support: &[usize]) -> Option<DVector<Complex64>> {
    let sub = a.select_columns(support);
    let gram = sub.adjoint() * &sub;
    let rhs = sub.adjoint() * y;
    let chol = gram.cholesky()?;
    let x = chol.solve(&rhs);
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    let mut c = DVector::from_element(a.ncols(), ZERO);
    for (&j, v) in support.iter().zip(x.iter()) {
        c[j] = *v;
    }
    Some(c)
}

/// Gram condition number above which the BP refit is skipped.
const REFIT_MAX_CONDITION: f64 = 1e1;

fn well_conditioned_ls(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    support: &[usize],
    max_condition: f64,
) -> Option<DVector<Complex64>> {
    let sub = a.select_columns(support);
    let eig = (sub.adjoint() * &sub).symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 || hi / lo > max_condition {
        return None;
    }
    restricted_ls(a, y, support)
}

fn finish(
    a: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    c: DVector<Complex64>,
    iterations: usize,
    converged: bool,
) -> EstimateResult {
    let residual_norm = residual(a, y, &c).norm();
    let support = (0..c.len()).filter(|&j| c[j] != ZERO).collect();
    EstimateResult { c_hat: c.iter().copied().collect(), support, residual_norm, iterations, converged }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpStop {
    /// Select exactly this many atoms (fewer if the fit becomes exact).
    Sparsity(usize),
    /// Stop once the residual norm drops to this value.
    Residual(f64),
}

/// Orthogonal matching pursuit.
pub fn omp(a: &DMatrix<Complex64>, y: &[Complex64], stop: OmpStop) -> Result<EstimateResult> {
    check_system(a, y)?;
    let yv = DVector::from_column_slice(y);
    let (p, l) = a.shape();
    let max_atoms = match stop {
        OmpStop::Sparsity(s) => s.min(p).min(l),
        OmpStop::Residual(_) => p.min(l),
    };
    let exact = 1e-12 * yv.norm();
    let tol = match stop {
        OmpStop::Sparsity(_) => exact,
        OmpStop::Residual(t) => t.max(exact),
    };
    let norms: Vec<f64> = (0..l).map(|j| a.column(j).norm()).collect();

    let mut c = DVector::from_element(l, ZERO);
    let mut r = yv.clone();
    let mut support: Vec<usize> = Vec::with_capacity(max_atoms);
    let mut iterations = 0;
    let mut converged = true;

    while support.len() < max_atoms && r.norm() > tol {
        let corr = a.adjoint() * &r;
        let pick = (0..l)
            .filter(|j| !support.contains(j))
            .map(|j| (j, corr[j].norm() / norms[j]))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(j, _)| j);
        let Some(j) = pick else { break };
        support.push(j);
        iterations += 1;
        match restricted_ls(a, &yv, &support) {
            Some(next) => {
                c = next;
                r = residual(a, &yv, &c);
            }
            None => {
                support.pop();
                converged = false;
                break;
            }
        }
    }
    let mut out = finish(a, &yv, c, iterations, converged);
    let mut sorted = support;
    sorted.sort_unstable();
    out.support = sorted;
    Ok(out)
}

/// Minimum-ℓ2-norm least-squares solution via the pseudoinverse.
pub fn ls_estimate(a: &DMatrix<Complex64>, y: &[Complex64]) -> Result<EstimateResult> {
    LsSolver::new(a)?.solve(y)
}

/// Pseudoinverse cached for repeated solves against one sensing matrix.
#[derive(Debug, Clone)]
pub struct LsSolver {
    a: DMatrix<Complex64>,
    pinv: DMatrix<Complex64>,
}

impl LsSolver {
    pub fn new(a: &DMatrix<Complex64>) -> Result<Self> {
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| validation(format!("pseudoinverse failed: {e}")))?;
        Ok(LsSolver { a: a.clone(), pinv })
    }

    pub fn solve(&self, y: &[Complex64]) -> Result<EstimateResult> {
        if y.len() != self.a.nrows() {
            return Err(dimension("observation length does not match A"));
        }
        let yv = DVector::from_column_slice(y);
        let c = &self.pinv * &yv;
        Ok(finish(&self.a, &yv, c, 1, true))
    }
}

/// Basis pursuit denoising `min ‖c‖₁ s.t. ‖A c − y‖₂ ≤ noise_level`.
pub fn bp(a: &DMatrix<Complex64>, y: &[Complex64], noise_level: f64) -> Result<EstimateResult> {
    BpSolver::new(a)?.solve(y, noise_level)
}

/// Proximal-gradient ℓ1 solver with cached Gram matrix and step size.
///
/// The constrained problem is reached by continuation on the ℓ1 weight:
/// starting from `λ = ‖Aᴴy‖∞` (where `c = 0` is optimal) the weight is
/// reduced geometrically, each stage warm-started and solved by monotone
/// accelerated proximal gradient with step `1/‖A‖₂²`, until the residual
/// meets `noise_level`. The detected support is then refit by least squares.
#[derive(Debug, Clone)]
pub struct BpSolver {
    a: DMatrix<Complex64>,
    gram: DMatrix<Complex64>,
    step: f64,
    pub max_iterations: usize,
    pub rel_tol: f64,
    pub lambda_decay: f64,
}

fn soft_threshold(v: Complex64, t: f64) -> Complex64 {
    let m = v.norm();
    if m <= t {
        ZERO
    } else {
        v * ((m - t) / m)
    }
}

fn l1(c: &DVector<Complex64>) -> f64 {
    c.iter().map(|v| v.norm()).sum()
}

impl BpSolver {
    pub fn new(a: &DMatrix<Complex64>) -> Result<Self> {
        if let Some(j) = (0..a.ncols()).find(|&j| a.column(j).norm() == 0.0) {
            return Err(validation(format!("sensing matrix column {j} is zero")));
        }
        let gram = a.adjoint() * a;
        let lip = gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(*v));
        Ok(BpSolver {
            a: a.clone(),
            gram,
            step: 1.0 / lip,
            max_iterations: 10_000,
            rel_tol: 1e-8,
            lambda_decay: 0.5,
        })
    }

    /// `½‖A c − y‖² + λ‖c‖₁`.
    pub fn objective(&self, y: &[Complex64], c: &[Complex64], lambda: f64) -> f64 {
        let yv = DVector::from_column_slice(y);
        let cv = DVector::from_column_slice(c);
        0.5 * residual(&self.a, &yv, &cv).norm_squared() + lambda * l1(&cv)
    }

    /// Solves the ℓ1-penalized problem at fixed `lambda` from `start`.
    /// Returns the solution, iterations used, and the objective after each one.
    pub fn solve_penalized(
        &self,
        y: &[Complex64],
        lambda: f64,
        start: &[Complex64],
        max_iterations: usize,
    ) -> (Vec<Complex64>, usize, Vec<f64>) {
        let yv = DVector::from_column_slice(y);
        let aty = self.a.adjoint() * &yv;
        let yy = yv.norm_squared();
        let (c, used, trace) = self.penalized_stage(&aty, yy, lambda, DVector::from_column_slice(start), max_iterations);
        (c.iter().copied().collect(), used, trace)
    }

    /// Objective via the Gram matrix: ½(cᴴGc − 2Re(cᴴAᴴy) + ‖y‖²) + λ‖c‖₁.
    fn objective_from(&self, aty: &DVector<Complex64>, yy: f64, c: &DVector<Complex64>, gc: &DVector<Complex64>, lambda: f64) -> f64 {
        let quad = c.dotc(gc).re - 2.0 * c.dotc(aty).re + yy;
        0.5 * quad.max(0.0) + lambda * l1(c)
    }

    /// Monotone FISTA. `G·z` is tracked as a linear combination of the
    /// products already computed, so each step costs one Gram product.
    fn penalized_stage(
        &self,
        aty: &DVector<Complex64>,
        yy: f64,
        lambda: f64,
        start: DVector<Complex64>,
        max_iterations: usize,
    ) -> (DVector<Complex64>, usize, Vec<f64>) {
        let n = start.len();
        let thresh = lambda * self.step;
        let mut x = start;
        let mut gx = &self.gram * &x;
        let mut fx = self.objective_from(aty, yy, &x, &gx, lambda);
        let mut z = x.clone();
        let mut gz = gx.clone();
        let mut cand = DVector::from_element(n, ZERO);
        let mut gcand = DVector::from_element(n, ZERO);
        let mut prev = x.clone();
        let mut gprev = gx.clone();
        let mut t = 1.0f64;
        let mut trace = Vec::new();
        let mut used = 0;
        while used < max_iterations {
            used += 1;
            for k in 0..n {
                let g = gz[k] - aty[k];
                cand[k] = soft_threshold(z[k] - g * self.step, thresh);
            }
            gcand.gemv(Complex64::new(1.0, 0.0), &self.gram, &cand, ZERO);
            let fc = self.objective_from(aty, yy, &cand, &gcand, lambda);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            prev.copy_from(&x);
            gprev.copy_from(&gx);
            if fc <= fx {
                x.copy_from(&cand);
                gx.copy_from(&gcand);
                fx = fc;
            }
            // monotone momentum: extrapolate from the accepted point
            let a1 = t / t_next;
            let a2 = (t - 1.0) / t_next;
            let mut change = 0.0;
            for k in 0..n {
                z[k] = x[k] + (cand[k] - x[k]) * a1 + (x[k] - prev[k]) * a2;
                gz[k] = gx[k] + (gcand[k] - gx[k]) * a1 + (gx[k] - gprev[k]) * a2;
                change += (x[k] - prev[k]).norm_sqr();
            }
            t = t_next;
            trace.push(fx);
            let scale = x.norm().max(f64::MIN_POSITIVE);
            if change.sqrt() <= self.rel_tol * scale && fc <= fx {
                break;
            }
        }
        (x, used, trace)
    }

    pub fn solve(&self, y: &[Complex64], noise_level: f64) -> Result<EstimateResult> {
        if y.len() != self.a.nrows() {
            return Err(dimension("observation length does not match A"));
        }
        let yv = DVector::from_column_slice(y);
        let l = self.a.ncols();
        let y_norm = yv.norm();
        if y_norm <= noise_level || y_norm == 0.0 {
            return Ok(finish(&self.a, &yv, DVector::from_element(l, ZERO), 0, true));
        }
        let target = noise_level.max(1e-7 * y_norm);
        let aty = self.a.adjoint() * &yv;
        let yy = yv.norm_squared();
        let lambda_max = aty.iter().map(|v| v.norm()).fold(0.0, f64::max);

        let mut c = DVector::from_element(l, ZERO);
        let mut lambda = lambda_max;
        let mut total = 0;
        let mut converged = false;
        while total < self.max_iterations {
            lambda *= self.lambda_decay;
            let (next, used, _) = self.penalized_stage(&aty, yy, lambda, c, self.max_iterations - total);
            c = next;
            total += used;
            if residual(&self.a, &yv, &c).norm() <= target {
                converged = true;
                break;
            }
            if lambda < 1e-12 * lambda_max {
                break;
            }
        }

        let peak = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let support: Vec<usize> = (0..l).filter(|&j| c[j].norm() > 1e-6 * peak).collect();
        // a refit on more than P/2 atoms or on nearly collinear atoms can
        // blow up on coherent dictionaries; keep the penalized solution then
        let debiased = if support.is_empty() || support.len() > self.a.nrows() / 2 {
            None
        } else {
            well_conditioned_ls(&self.a, &yv, &support, REFIT_MAX_CONDITION)
        };
        let c_final = debiased.unwrap_or(c);
        let ok = converged;
        Ok(finish(&self.a, &yv, c_final, total, ok))
    }
}

/// `Ĥ = P_{q* − Q/2} diag{F_L ĉ}`.
pub fn reconstruct_channel(c_hat: &[Complex64], q_star: usize, params: &SystemParams) -> Result<ChannelMatrix> {
    if c_hat.len() != params.l {
        return Err(dimension(format!("estimate has length {}, expected L = {}", c_hat.len(), params.l)));
    }
    ChannelMatrix::permuted_diagonal(params.q_order, q_star, frequency_response(c_hat, params.k))
}

/// `‖ĉ − c‖² / ‖c‖²`.
pub fn nmse(c_hat: &[Complex64], c_true: &[Complex64]) -> Result<f64> {
    if c_hat.len() != c_true.len() {
        return Err(dimension("estimate and truth differ in length"));
    }
    let truth: f64 = c_true.iter().map(|v| v.norm_sqr()).sum();
    if truth == 0.0 {
        return Err(validation("true coefficient vector is zero"));
    }
    let err: f64 = c_hat.iter().zip(c_true).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / truth)
}
