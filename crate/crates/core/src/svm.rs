//! Maximum-margin classification in the lifted space `Φ = Y ⊗ Y`.
//!
//! The separating hyperplane passes through the origin (no bias), so the
//! Wolfe dual
//!
//! ```text
//!     max  1ᵀμ − ½ μᵀ Z μ      subject to  0 ≤ μ_k ≤ C
//! ```
//!
//! has no equality constraint; `Z_kj = ℓ_k ℓ_j κ(Y_k, Y_j)` with the
//! homogeneous quadratic kernel `κ(Y, Z) = (YᵀZ)²`, and `C = ∞` for the hard
//! margin. The solver runs cyclic coordinate ascent (each coordinate update is
//! an exact projected line search) and then finishes with a primal active-set
//! method on the bound-constrained QP, which terminates at the exact optimum
//! even when `Z` is badly conditioned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, norm, svd, Matrix};
use crate::trajectories::{normalize, Dataset, Label};

/// `Y ⊗ Y`, stored so that entry `i·len + j` is `Y_i Y_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn feature_map(y: &[f64]) -> FeatureVector {
    let mut phi = Vec::with_capacity(y.len() * y.len());
    for &a in y {
        phi.extend(y.iter().map(|&b| a * b));
    }
    FeatureVector(phi)
}

/// `(YᵀZ)²`.
pub fn kernel(y: &[f64], z: &[f64]) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::DimensionMismatch {
            context: "kernel arguments",
            expected: y.len(),
            found: z.len(),
        });
    }
    Ok(dot(y, z).powi(2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualSolver {
    /// Coordinate-ascent warm start, then active-set refinement.
    #[default]
    Auto,
    ActiveSet,
    CoordinateAscent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub solver: DualSolver,
    /// Maximum violation of the KKT conditions, in units of functional margin.
    pub tol: f64,
    /// Sweep cap for pure coordinate ascent.
    pub max_sweeps: usize,
    /// Coordinate-ascent sweeps spent warming up the active-set phase.
    pub warm_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            solver: DualSolver::Auto,
            tol: 1e-8,
            max_sweeps: 100_000,
            warm_sweeps: 50,
        }
    }
}

/// Solution of the through-origin dual.
#[derive(Clone, Debug)]
pub struct DualSolution {
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Largest violation of the KKT conditions of the box-constrained dual.
pub fn kkt_residual(z: &Matrix, mu: &[f64], upper: Option<f64>) -> f64 {
    let grad = gradient(z, mu);
    mu.iter()
        .zip(&grad)
        .map(|(&m, &g)| projected_gradient(m, g, upper).abs())
        .fold(0.0, f64::max)
}

// Gradient of ½μᵀZμ − 1ᵀμ.
fn gradient(z: &Matrix, mu: &[f64]) -> Vec<f64> {
    z.matvec(mu).into_iter().map(|v| v - 1.0).collect()
}

fn projected_gradient(mu: f64, g: f64, upper: Option<f64>) -> f64 {
    if mu <= 0.0 {
        g.min(0.0)
    } else if upper.is_some_and(|c| mu >= c) {
        g.max(0.0)
    } else {
        g
    }
}

/// Solves `min ½μᵀZμ − 1ᵀμ` over `0 ≤ μ ≤ upper` (`None` = no upper bound).
pub fn solve_dual(z: &Matrix, upper: Option<f64>, opts: &SolverOptions) -> Result<DualSolution> {
    if !z.is_square() {
        return Err(Error::NotSquare {
            rows: z.rows(),
            cols: z.cols(),
        });
    }
    if let Some(k) = (0..z.rows()).find(|&k| !(z[(k, k)] > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "dual Gram matrix has nonpositive diagonal at {k} (zero feature vector)"
        )));
    }
    if let Some(c) = upper {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("box bound must be positive, got {c}")));
        }
    }
    let l = z.rows();
    let mut mu = vec![0.0; l];
    let sol = match opts.solver {
        DualSolver::CoordinateAscent => {
            let sweeps = coordinate_ascent(z, &mut mu, upper, opts.tol, opts.max_sweeps);
            let residual = kkt_residual(z, &mu, upper);
            if residual > opts.tol {
                return Err(Error::SolverNoConvergence {
                    iterations: sweeps,
                    residual,
                });
            }
            DualSolution {
                mu,
                iterations: sweeps,
                kkt_residual: residual,
            }
        }
        DualSolver::ActiveSet => active_set(z, mu, upper, opts.tol, 0)?,
        DualSolver::Auto => {
            let sweeps = coordinate_ascent(z, &mut mu, upper, opts.tol, opts.warm_sweeps);
            let residual = kkt_residual(z, &mu, upper);
            if residual <= opts.tol {
                DualSolution {
                    mu,
                    iterations: sweeps,
                    kkt_residual: residual,
                }
            } else {
                active_set(z, mu, upper, opts.tol, sweeps)?
            }
        }
    };
    Ok(sol)
}

/// Cyclic coordinate ascent; returns the number of sweeps performed.
fn coordinate_ascent(z: &Matrix, mu: &mut [f64], upper: Option<f64>, tol: f64, max_sweeps: usize) -> usize {
    let l = mu.len();
    let cap = upper.unwrap_or(f64::INFINITY);
    let mut grad = gradient(z, mu);
    for sweep in 1..=max_sweeps {
        let mut worst = 0.0_f64;
        for k in 0..l {
            worst = worst.max(projected_gradient(mu[k], grad[k], upper).abs());
            let updated = (mu[k] - grad[k] / z[(k, k)]).clamp(0.0, cap);
            let delta = updated - mu[k];
            if delta != 0.0 {
                mu[k] = updated;
                for (j, g) in grad.iter_mut().enumerate() {
                    *g += delta * z[(j, k)];
                }
            }
        }
        if worst <= tol {
            return sweep;
        }
        // Refresh to keep the incremental gradient from drifting.
        if sweep % 64 == 0 {
            grad = gradient(z, mu);
        }
    }
    max_sweeps
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
    Free,
}

/// Primal active-set method for the bound-constrained convex QP.
///
/// Each iteration minimizes over the free variables (Newton step through the
/// pseudo-inverse of `Z_FF`). If the gradient has a component in the null
/// space of `Z_FF`, the objective is linear along that direction and the
/// iterate moves along it until a bound blocks; an unblocked such ray proves
/// the dual unbounded, i.e. the primal constraints infeasible.
fn active_set(
    z: &Matrix,
    mut mu: Vec<f64>,
    upper: Option<f64>,
    tol: f64,
    warm_iterations: usize,
) -> Result<DualSolution> {
    let l = mu.len();
    let cap = upper.unwrap_or(f64::INFINITY);
    let mut status: Vec<Bound> = mu
        .iter()
        .map(|&m| {
            if m <= 0.0 {
                Bound::Lower
            } else if m >= cap {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();
    for (m, s) in mu.iter_mut().zip(&status) {
        match s {
            Bound::Lower => *m = 0.0,
            Bound::Upper => *m = cap,
            Bound::Free => {}
        }
    }

    let max_iter = 100 * l + 1000;
    let mut subspace_optimal = false;
    for iter in 0..max_iter {
        let grad = gradient(z, &mu);
        if subspace_optimal {
            // Release the bound variable whose multiplier has the wrong sign.
            let candidate = (0..l)
                .filter_map(|k| match status[k] {
                    Bound::Lower if grad[k] < -tol => Some((k, -grad[k])),
                    Bound::Upper if grad[k] > tol => Some((k, grad[k])),
                    _ => None,
                })
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match candidate {
                Some((k, _)) => status[k] = Bound::Free,
                None => {
                    return Ok(DualSolution {
                        kkt_residual: kkt_residual(z, &mu, upper),
                        mu,
                        iterations: warm_iterations + iter,
                    })
                }
            }
        }

        let free: Vec<usize> = (0..l).filter(|&k| status[k] == Bound::Free).collect();
        if free.is_empty() {
            subspace_optimal = true;
            continue;
        }
        let zff = sub_matrix(z, &free);
        let gf: Vec<f64> = free.iter().map(|&k| grad[k]).collect();
        let step = free_step(&zff, &gf)?;

        let (dir, t_limit) = match step {
            FreeStep::Newton(p) => (p, 1.0),
            FreeStep::Ray(d) => {
                let slope = dot(&gf, &d);
                let curvature = dot(&d, &zff.matvec(&d));
                let t = if curvature > 0.0 {
                    -slope / curvature
                } else {
                    f64::INFINITY
                };
                (d, t)
            }
        };

        let mut t = t_limit;
        let mut blocking = None;
        for (i, &k) in free.iter().enumerate() {
            let d = dir[i];
            if d < 0.0 {
                let tk = mu[k] / -d;
                if tk < t {
                    t = tk;
                    blocking = Some((i, Bound::Lower));
                }
            } else if d > 0.0 && cap.is_finite() {
                let tk = (cap - mu[k]) / d;
                if tk < t {
                    t = tk;
                    blocking = Some((i, Bound::Upper));
                }
            }
        }
        if !t.is_finite() || t > 1e30 {
            let mut witnesses: Vec<(usize, f64)> = free
                .iter()
                .zip(&dir)
                .filter(|(_, &d)| d > 0.0)
                .map(|(&k, &d)| (k, d))
                .collect();
            witnesses.sort_by(|a, b| b.1.total_cmp(&a.1));
            return Err(Error::NotSeparable {
                witnesses: witnesses.into_iter().map(|w| w.0).collect(),
            });
        }
        for (i, &k) in free.iter().enumerate() {
            mu[k] = (mu[k] + t * dir[i]).clamp(0.0, cap);
        }
        match blocking {
            Some((i, bound)) => {
                let k = free[i];
                status[k] = bound;
                mu[k] = if bound == Bound::Lower { 0.0 } else { cap };
                subspace_optimal = false;
            }
            None => subspace_optimal = true,
        }
    }
    Err(Error::SolverNoConvergence {
        iterations: warm_iterations + max_iter,
        residual: kkt_residual(z, &mu, upper),
    })
}

enum FreeStep {
    /// Minimizer of the quadratic model over the free variables.
    Newton(Vec<f64>),
    /// Descent direction of zero curvature.
    Ray(Vec<f64>),
}

fn sub_matrix(z: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), idx.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            out[(a, b)] = z[(i, j)];
        }
    }
    out
}

fn free_step(zff: &Matrix, gf: &[f64]) -> Result<FreeStep> {
    if let Some(p) = cholesky_solve(zff, gf) {
        return Ok(FreeStep::Newton(p.into_iter().map(|v| -v).collect()));
    }
    let f = svd(zff)?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * zff.rows() as f64 * 16.0;
    // p = −Z⁺ g, using the symmetric factors Z = V S Vᵀ.
    let vtg = f.v.tr_matvec(gf);
    let scaled: Vec<f64> = vtg
        .iter()
        .zip(&f.s)
        .map(|(&x, &s)| if s > cutoff { -x / s } else { 0.0 })
        .collect();
    let p = f.v.matvec(&scaled);
    // Component of g in the numerical null space.
    let null_coef: Vec<f64> = vtg
        .iter()
        .zip(&f.s)
        .map(|(&x, &s)| if s > cutoff { 0.0 } else { x })
        .collect();
    let r = f.v.matvec(&null_coef);
    if norm(&r) > 1e-10 * norm(gf).max(1.0) {
        Ok(FreeStep::Ray(r.into_iter().map(|v| -v).collect()))
    } else {
        Ok(FreeStep::Newton(p))
    }
}

/// Solves `A x = b` for symmetric positive definite `A`; `None` when a pivot
/// is not safely positive.
fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let scale = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > scale * 1e-12) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    Some(y)
}

/// Replaces a hard-margin dual solution by the minimum-norm multipliers that
/// generate the same weight vector, when those are admissible.
fn min_norm_multipliers(z: &Matrix, sol: &DualSolution, tol: f64) -> Option<Vec<f64>> {
    let grad = gradient(z, &sol.mu);
    let active: Vec<usize> = (0..sol.mu.len())
        .filter(|&k| sol.mu[k] > 0.0 || grad[k].abs() <= tol)
        .collect();
    if active.is_empty() {
        return None;
    }
    let zss = sub_matrix(z, &active);
    let f = svd(&zss).ok()?;
    let smax = f.s.first().copied().unwrap_or(0.0);
    let cutoff = smax * f64::EPSILON * zss.rows() as f64 * 16.0;
    let ones = vec![1.0; active.len()];
    let vt1 = f.v.tr_matvec(&ones);
    let coef: Vec<f64> = vt1
        .iter()
        .zip(&f.s)
        .map(|(&x, &s)| if s > cutoff { x / s } else { 0.0 })
        .collect();
    let sub_mu = f.v.matvec(&coef);
    if sub_mu.iter().any(|&m| m < 0.0) {
        return None;
    }
    let mut mu = vec![0.0; sol.mu.len()];
    for (&k, &m) in active.iter().zip(&sub_mu) {
        mu[k] = m;
    }
    (kkt_residual(z, &mu, None) <= sol.kkt_residual.max(tol)).then_some(mu)
}

/// Through-origin linear SVM on explicit feature vectors.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub support_indices: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Trains on explicit features with labels; `upper = None` is the hard margin.
pub fn fit_features(
    features: &[Vec<f64>],
    labels: &[Label],
    upper: Option<f64>,
    opts: &SolverOptions,
) -> Result<LinearModel> {
    check_labels(labels)?;
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "features vs labels",
            expected: labels.len(),
            found: features.len(),
        });
    }
    let dim = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            context: "feature vector length",
            expected: dim,
            found: f.len(),
        });
    }
    let l = features.len();
    let mut z = Matrix::zeros(l, l);
    for i in 0..l {
        for j in 0..=i {
            let v = labels[i].sign() * labels[j].sign() * dot(&features[i], &features[j]);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    let mu = solve_checked(&z, upper, opts)?;
    let mut w = vec![0.0; dim];
    for (k, (&m, f)) in mu.mu.iter().zip(features).enumerate() {
        if m > 0.0 {
            let c = m * labels[k].sign();
            for (acc, &x) in w.iter_mut().zip(f) {
                *acc += c * x;
            }
        }
    }
    Ok(LinearModel {
        w,
        support_indices: support_of(&mu.mu),
        mu: mu.mu,
        kkt_residual: mu.kkt_residual,
        iterations: mu.iterations,
    })
}

fn solve_checked(z: &Matrix, upper: Option<f64>, opts: &SolverOptions) -> Result<DualSolution> {
    let mut sol = solve_dual(z, upper, opts)?;
    if upper.is_none() {
        if let Some(mu) = min_norm_multipliers(z, &sol, opts.tol) {
            sol.kkt_residual = kkt_residual(z, &mu, None);
            sol.mu = mu;
        }
    }
    Ok(sol)
}

fn support_of(mu: &[f64]) -> Vec<usize> {
    mu.iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(k, _)| k)
        .collect()
}

fn check_labels(labels: &[Label]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyData);
    }
    let pos = labels.iter().any(|&l| l == Label::Positive);
    let neg = labels.iter().any(|&l| l == Label::Negative);
    if !(pos && neg) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Slack penalty of the soft-margin problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftMarginConfig {
    c: f64,
}

impl SoftMarginConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "soft-margin penalty must be positive and finite, got {c}"
            )));
        }
        Ok(SoftMarginConfig { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// SVM trained on trajectories through the quadratic kernel.
#[derive(Clone, Debug)]
pub struct SvmModel {
    /// Feature-space weights `Σ μ_k ℓ_k Φ_k`, length `(Nm)²`.
    pub w: Vec<f64>,
    /// One multiplier per training trajectory.
    pub mu: Vec<f64>,
    pub labels: Vec<Label>,
    pub support_indices: Vec<usize>,
    /// Training trajectories at the support indices, as seen by the solver.
    pub support_y: Vec<Vec<f64>>,
    pub normalized: bool,
    /// `min_k |wᵀΦ_k| / ‖w‖` over the training features.
    pub margin: f64,
    /// `max(0, 1 − ℓ_k wᵀΦ_k)`.
    pub slacks: Vec<f64>,
    pub box_c: Option<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub trained_on: u64,
}

/// FNV-1a over labels and raw sample bits.
pub fn dataset_fingerprint(data: &Dataset) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
    };
    eat(&(data.horizon() as u64).to_le_bytes());
    eat(&(data.output_dim() as u64).to_le_bytes());
    for t in data.items() {
        eat(&[i8::from(t.label().expect("labeled")) as u8]);
        for v in t.y() {
            eat(&v.to_bits().to_le_bytes());
        }
    }
    h
}

fn training_inputs(data: &Dataset, normalize_flag: bool) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let labels = data.labels();
    check_labels(&labels)?;
    let ys = data
        .items()
        .iter()
        .map(|t| {
            if t.is_zero() {
                Err(Error::ZeroTrajectory)
            } else if normalize_flag {
                normalize(t).map(|n| n.y().to_vec())
            } else {
                Ok(t.y().to_vec())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ys, labels))
}

fn kernel_gram(ys: &[Vec<f64>], labels: &[Label]) -> Matrix {
    let l = ys.len();
    let mut z = Matrix::zeros(l, l);
    for i in 0..l {
        for j in 0..=i {
            let v = labels[i].sign() * labels[j].sign() * dot(&ys[i], &ys[j]).powi(2);
            z[(i, j)] = v;
            z[(j, i)] = v;
        }
    }
    z
}

fn train_with(
    data: &Dataset,
    normalize_flag: bool,
    upper: Option<f64>,
    opts: &SolverOptions,
) -> Result<SvmModel> {
    let (ys, labels) = training_inputs(data, normalize_flag)?;
    let z = kernel_gram(&ys, &labels);
    let sol = solve_checked(&z, upper, opts)?;
    let dim = data.horizon() * data.output_dim();
    let support_indices = support_of(&sol.mu);
    let mut w = vec![0.0; dim * dim];
    for &k in &support_indices {
        let c = sol.mu[k] * labels[k].sign();
        for (acc, x) in w.iter_mut().zip(feature_map(&ys[k]).as_slice()) {
            *acc += c * x;
        }
    }
    // Functional margins from the dual route, ℓ_k (Zμ)_k.
    let functional: Vec<f64> = z.matvec(&sol.mu);
    let wnorm = norm(&w);
    let margin = if wnorm > 0.0 {
        ys.iter()
            .map(|y| dot(&w, feature_map(y).as_slice()).abs() / wnorm)
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    Ok(SvmModel {
        support_y: support_indices.iter().map(|&k| ys[k].clone()).collect(),
        slacks: functional.iter().map(|f| (1.0 - f).max(0.0)).collect(),
        w,
        mu: sol.mu,
        labels,
        support_indices,
        normalized: normalize_flag,
        margin,
        box_c: upper,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        trained_on: dataset_fingerprint(data),
    })
}

/// Hard-margin through-origin SVM. Fails with [`Error::NotSeparable`] when no
/// hyperplane through the origin separates the lifted training data.
pub fn train_hard_margin(data: &Dataset, normalize_flag: bool) -> Result<SvmModel> {
    train_hard_margin_with(data, normalize_flag, &SolverOptions::default())
}

pub fn train_hard_margin_with(
    data: &Dataset,
    normalize_flag: bool,
    opts: &SolverOptions,
) -> Result<SvmModel> {
    train_with(data, normalize_flag, None, opts)
}

/// Soft-margin variant with multipliers boxed in `[0, C]`.
pub fn train_soft_margin(data: &Dataset, cfg: &SoftMarginConfig, normalize_flag: bool) -> Result<SvmModel> {
    train_with(data, normalize_flag, Some(cfg.c), &SolverOptions::default())
}

/// `Σ_k coeff_k (Y_kᵀY)²` summed in support order.
fn kernel_expansion(support_y: &[Vec<f64>], coeffs: &[f64], y: &[f64]) -> f64 {
    support_y
        .iter()
        .zip(coeffs)
        .map(|(s, c)| c * dot(s, y).powi(2))
        .sum()
}

impl SvmModel {
    pub fn input_dim(&self) -> usize {
        (self.w.len() as f64).sqrt().round() as usize
    }

    fn support_coeffs(&self) -> Vec<f64> {
        self.support_indices
            .iter()
            .map(|&k| self.mu[k] * self.labels[k].sign())
            .collect()
    }

    /// Raw decision value `wᵀΦ(Y)`; `via_kernel` sums over support vectors instead.
    pub fn predict(&self, y: &[f64], via_kernel: bool) -> Result<f64> {
        if y.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "trajectory length",
                expected: self.input_dim(),
                found: y.len(),
            });
        }
        Ok(if via_kernel {
            kernel_expansion(&self.support_y, &self.support_coeffs(), y)
        } else {
            dot(&self.w, feature_map(y).as_slice())
        })
    }

    pub fn to_file(&self) -> SvmModelFile {
        SvmModelFile {
            mu: self.support_indices.iter().map(|&k| self.mu[k]).collect(),
            labels: self.support_indices.iter().map(|&k| self.labels[k]).collect(),
            support_y: self.support_y.clone(),
            normalized: self.normalized,
        }
    }
}

/// Serialized kernel-form model: `{"mu", "labels", "support_Y", "normalized"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModelFile {
    pub mu: Vec<f64>,
    pub labels: Vec<Label>,
    #[serde(rename = "support_Y")]
    pub support_y: Vec<Vec<f64>>,
    pub normalized: bool,
}

impl SvmModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: SvmModelFile = serde_json::from_str(s)?;
        if f.mu.len() != f.labels.len() || f.mu.len() != f.support_y.len() {
            return Err(Error::DimensionMismatch {
                context: "model file support arrays",
                expected: f.mu.len(),
                found: f.support_y.len(),
            });
        }
        Ok(f)
    }

    /// Kernel-path decision value; identical bits to [`SvmModel::predict`] with `via_kernel`.
    pub fn predict(&self, y: &[f64]) -> Result<f64> {
        if let Some(s) = self.support_y.iter().find(|s| s.len() != y.len()) {
            return Err(Error::DimensionMismatch {
                context: "trajectory length",
                expected: s.len(),
                found: y.len(),
            });
        }
        let coeffs: Vec<f64> = self.mu.iter().zip(&self.labels).map(|(m, l)| m * l.sign()).collect();
        Ok(kernel_expansion(&self.support_y, &coeffs, y))
    }
}

/// `min_k |wᵀΦ_k| / ‖w‖`.
pub fn margin(w: &[f64], features: &[Vec<f64>]) -> Result<f64> {
    let wn = norm(w);
    if wn == 0.0 {
        return Err(Error::InvalidParameter("weight vector is zero".into()));
    }
    if features.is_empty() {
        return Err(Error::EmptyData);
    }
    features
        .iter()
        .map(|f| {
            if f.len() != w.len() {
                Err(Error::DimensionMismatch {
                    context: "feature vector length",
                    expected: w.len(),
                    found: f.len(),
                })
            } else {
                Ok(dot(w, f).abs() / wn)
            }
        })
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

/// Margin of `w` over the normalized trajectories of `data`.
pub fn margin_on_dataset(w: &[f64], data: &Dataset) -> Result<f64> {
    let feats = data
        .items()
        .iter()
        .map(|t| normalize(t).map(|n| feature_map(n.y()).into_vec()))
        .collect::<Result<Vec<_>>>()?;
    margin(w, &feats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn feature_map_examples() {
        assert_eq!(feature_map(&[1.0, 2.0]).as_slice(), &[1.0, 2.0, 2.0, 4.0]);
        assert!(feature_map(&[0.0, 0.0]).as_slice().iter().all(|&x| x == 0.0));
        let y = [0.3, -1.2, 2.5];
        assert!((norm(feature_map(&y).as_slice()) - dot(&y, &y)).abs() < 1e-14);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 121.0);
        assert_eq!(kernel(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        let u = [0.6, 0.8];
        assert!((kernel(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(kernel(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hard_margin_orthogonal_pair() {
        let feats = vec![e(0, 4), e(1, 4)];
        let labels = [Label::Positive, Label::Negative];
        for solver in [DualSolver::Auto, DualSolver::ActiveSet, DualSolver::CoordinateAscent] {
            let opts = SolverOptions {
                solver,
                ..Default::default()
            };
            let m = fit_features(&feats, &labels, None, &opts).unwrap();
            assert!(close(&m.w, &[1.0, -1.0, 0.0, 0.0], 1e-12), "{solver:?}");
            assert!(close(&m.mu, &[1.0, 1.0], 1e-12));
            let rho = margin(&m.w, &feats).unwrap();
            assert!((rho - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn hard_margin_antipodal_pair_min_norm_duals() {
        let phi = vec![0.6, 0.0, 0.0, 0.8];
        let neg: Vec<f64> = phi.iter().map(|x| -x).collect();
        let m = fit_features(
            &[phi.clone(), neg],
            &[Label::Positive, Label::Negative],
            None,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(close(&m.w, &phi, 1e-12));
        assert!(close(&m.mu, &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn scalar_pair_dataset_trains() {
        let data = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 1.0]),
            (Label::Negative, vec![1.0, -1.0]),
        ])
        .unwrap();
        let model = train_hard_margin(&data, true).unwrap();
        for (t, f) in data.items().iter().zip(model.slacks.iter()) {
            let y = normalize(t).unwrap();
            let v = model.predict(y.y(), false).unwrap();
            assert!(t.label().unwrap().sign() * v >= 1.0 - 1e-6);
            assert!(*f <= 1e-6);
        }
        assert!(model.kkt_residual <= 1e-8);
    }

    #[test]
    fn contradictory_soft_margin() {
        let phi = vec![1.0, 0.0, 0.0, 0.0];
        let feats = vec![phi.clone(), phi];
        let labels = [Label::Positive, Label::Negative];
        let m = fit_features(&feats, &labels, Some(1.0), &SolverOptions::default()).unwrap();
        assert!(close(&m.mu, &[1.0, 1.0], 1e-12));
        assert!(close(&m.w, &[0.0; 4], 1e-12));

        let data = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 0.0]),
            (Label::Negative, vec![1.0, 0.0]),
        ])
        .unwrap();
        let model = train_soft_margin(&data, &SoftMarginConfig::new(1.0).unwrap(), false).unwrap();
        assert_eq!(model.mu, vec![1.0, 1.0]);
        assert!(model.slacks.iter().all(|&s| s > 0.0));
        assert!(matches!(train_hard_margin(&data, false), Err(Error::NotSeparable { .. })));
    }

    #[test]
    fn soft_margin_rejects_nonpositive_c() {
        assert!(SoftMarginConfig::new(0.0).is_err());
        assert!(SoftMarginConfig::new(-1.0).is_err());
        assert!(SoftMarginConfig::new(f64::INFINITY).is_err());
        assert!(SoftMarginConfig::new(1e-300).is_ok());
    }

    #[test]
    fn not_separable_reports_witnesses() {
        // Y and −Y share the feature vector Y⊗Y.
        let data = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 2.0]),
            (Label::Negative, vec![0.5, 0.5]),
            (Label::Negative, vec![-1.0, -2.0]),
        ])
        .unwrap();
        match train_hard_margin(&data, true) {
            Err(Error::NotSeparable { witnesses }) => {
                assert!(witnesses.contains(&0) && witnesses.contains(&2), "{witnesses:?}")
            }
            other => panic!("expected NotSeparable, got {other:?}"),
        }
    }

    #[test]
    fn predict_examples() {
        let feats = vec![e(0, 4), e(1, 4)];
        let m = fit_features(&feats, &[Label::Positive, Label::Negative], None, &SolverOptions::default())
            .unwrap();
        // Φ(Y) = e1 for Y = (1, 0).
        assert!((dot(&m.w, feature_map(&[1.0, 0.0]).as_slice()) - 1.0).abs() < 1e-12);

        let data = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 1.0]),
            (Label::Negative, vec![1.0, -1.0]),
        ])
        .unwrap();
        let model = train_hard_margin(&data, true).unwrap();
        assert_eq!(model.predict(&[0.0, 0.0], true).unwrap(), 0.0);
        assert_eq!(model.predict(&[0.0, 0.0], false).unwrap(), 0.0);
        assert!(model.predict(&[1.0], true).is_err());
    }

    #[test]
    fn dataset_errors() {
        let one_class = Dataset::from_pairs(&[(Label::Positive, vec![1.0, 1.0])]).unwrap();
        assert!(matches!(train_hard_margin(&one_class, true), Err(Error::SingleClass)));
        let zero = Dataset::from_pairs(&[
            (Label::Positive, vec![0.0, 0.0]),
            (Label::Negative, vec![1.0, 0.0]),
        ])
        .unwrap();
        assert!(matches!(train_hard_margin(&zero, false), Err(Error::ZeroTrajectory)));
        let empty = Dataset::new(2, 1, 0, vec![]).unwrap();
        assert!(matches!(train_hard_margin(&empty, true), Err(Error::EmptyData)));
    }

    #[test]
    fn margin_examples() {
        assert_eq!(margin(&[1.0], &[vec![1.0]]).unwrap(), 1.0);
        let rho = margin(&[1.0, -1.0, 0.0, 0.0], &[e(0, 4), e(1, 4)]).unwrap();
        assert!((rho - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(margin(&[0.0, 0.0], &[vec![1.0, 0.0]]).is_err());
        assert!(margin(&[1.0], &[]).is_err());
    }

    #[test]
    fn model_file_round_trip_is_bitwise() {
        let data = Dataset::from_pairs(&[
            (Label::Positive, vec![1.0, 0.3, 0.2]),
            (Label::Positive, vec![0.9, 0.5, -0.1]),
            (Label::Negative, vec![0.1, -1.0, 0.4]),
            (Label::Negative, vec![-0.3, 0.8, 0.7]),
        ])
        .unwrap();
        let model = train_hard_margin(&data, true).unwrap();
        let json = model.to_file().to_json().unwrap();
        assert!(json.starts_with(r#"{"mu":["#) && json.contains(r#""support_Y":"#));
        let file = SvmModelFile::from_json(&json).unwrap();
        for y in [[0.4, -0.2, 1.0], [3.0, 1.0, -2.0]] {
            assert_eq!(
                file.predict(&y).unwrap().to_bits(),
                model.predict(&y, true).unwrap().to_bits()
            );
        }
        assert!(SvmModelFile::from_json(r#"{"mu":[1.0],"labels":[],"support_Y":[],"normalized":true}"#).is_err());
    }

    #[test]
    fn solver_options_cap_reports_failure() {
        // Ill-conditioned 2x2 system that coordinate ascent cannot finish in 3 sweeps.
        let z = Matrix::from_rows(&[[1.0, 0.999], [0.999, 1.0]]).unwrap();
        let opts = SolverOptions {
            solver: DualSolver::CoordinateAscent,
            max_sweeps: 3,
            ..Default::default()
        };
        assert!(matches!(
            solve_dual(&z, None, &opts),
            Err(Error::SolverNoConvergence { .. })
        ));
        let exact = solve_dual(&z, None, &SolverOptions::default()).unwrap();
        assert!(exact.kkt_residual < 1e-12);
        assert!(close(&exact.mu, &[1.0 / 1.999, 1.0 / 1.999], 1e-12));
    }
}
