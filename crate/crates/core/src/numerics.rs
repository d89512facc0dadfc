//! Small dense linear-algebra kernels.
//!
//! Everything here works on [`Matrix`], a row-major `f64` matrix sized for the
//! problems in this crate (tens to a few hundred rows). The SVD is a one-sided
//! Jacobi iteration, which gives high relative accuracy on the small singular
//! values that decide observability ranks and principal angles.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before the SVD reports failure.
const SVD_MAX_SWEEPS: usize = 80;

/// Dense row-major matrix of finite reals.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                context: "matrix data length",
                expected: rows * cols,
                found: data.len(),
            });
        }
        let m = Matrix {
            rows,
            cols,
            data: data.to_vec(),
        };
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    context: "ragged matrix rows",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_row_slice(rows.len(), cols, &data)
    }

    /// Column vector from a slice.
    pub fn column_vector(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("matrix entry"))
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix product. Panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product. Panics on dimension mismatch.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v` without forming the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        assert_eq!(self.shape(), rhs.shape(), "elementwise shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Column-stacked vectorization: entry `(i, j)` lands at `j * rows + i`.
    pub fn vec_columns(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self[(i, j)]);
            }
        }
        out
    }

    /// `[self rhs]`.
    pub fn hstack(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch {
                context: "horizontal concatenation rows",
                expected: self.rows,
                found: rhs.rows,
            });
        }
        let cols = self.cols + rhs.cols;
        let mut out = Matrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            out.data[i * cols..i * cols + self.cols].copy_from_slice(self.row(i));
            out.data[i * cols + self.cols..(i + 1) * cols].copy_from_slice(rhs.row(i));
        }
        Ok(out)
    }

    /// `[self; rhs]`.
    pub fn vstack(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::DimensionMismatch {
                context: "vertical concatenation columns",
                expected: self.cols,
                found: rhs.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&rhs.data);
        Ok(Matrix {
            rows: self.rows + rhs.rows,
            cols: self.cols,
            data,
        })
    }

    /// `blkdiag(self, rhs)`.
    pub fn block_diag(&self, rhs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows + rhs.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
        }
        for i in 0..rhs.rows {
            for j in 0..rhs.cols {
                out[(self.rows + i, self.cols + j)] = rhs[(i, j)];
            }
        }
        out
    }

    /// Selects the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (jj, &j) in cols.iter().enumerate() {
                out[(i, jj)] = self[(i, j)];
            }
        }
        out
    }

    /// Replaces `self` by `(self + selfᵀ) / 2`. Panics if not square.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    /// Solves `self · X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        Lu::factor(self)?.solve(rhs)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.rows))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

// Serialized as nested rows, `[[a, b], [c, d]]`.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, scaled to avoid overflow/underflow.
pub fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(m: &Matrix) -> Result<Lu> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                rows: m.rows,
                cols: m.cols,
            });
        }
        let n = m.rows;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.max_abs();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= f64::EPSILON * scale * n as f64 || pivot == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        let n = self.lu.rows;
        if rhs.rows != n {
            return Err(Error::DimensionMismatch {
                context: "linear solve right-hand side rows",
                expected: n,
                found: rhs.rows,
            });
        }
        let mut x = Matrix::zeros(n, rhs.cols);
        for c in 0..rhs.cols {
            let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[(p, c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    y[i] -= self.lu[(i, k)] * y[k];
                }
                y[i] /= self.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }
}

/// Economy SVD `M = U · diag(S) · Vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub u: Matrix,
    /// Nonincreasing singular values, length `k`.
    pub s: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub v: Matrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.v.transpose())
    }

    /// Leading `k` left singular vectors as columns.
    pub fn leading_left(&self, k: usize) -> Matrix {
        self.u.select_columns(&(0..k).collect::<Vec<_>>())
    }
}

/// Reduced singular value decomposition by one-sided Jacobi rotations.
pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    m.check_finite()?;
    if m.rows >= m.cols {
        jacobi_svd_tall(m)
    } else {
        let t = jacobi_svd_tall(&m.transpose())?;
        Ok(SvdFactors {
            u: t.v,
            s: t.s,
            v: t.u,
        })
    }
}

fn jacobi_svd_tall(m: &Matrix) -> Result<SvdFactors> {
    let (rows, cols) = m.shape();
    // Work on columns: store Aᵀ so each column of A is a contiguous row.
    let mut a = m.transpose();
    let mut v = Matrix::identity(cols);
    let tol = f64::EPSILON * rows.max(1) as f64;
    // Columns below this squared norm are rounding noise; rotating them need not converge.
    let negligible = (f64::EPSILON * m.frobenius_norm()).powi(2) * 1e-2;

    let mut converged = cols < 2;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let ap = a.row(p);
                    let aq = a.row(q);
                    (dot(ap, ap), dot(aq, aq), dot(ap, aq))
                };
                if gamma == 0.0
                    || gamma.abs() <= tol * (alpha * beta).sqrt()
                    || alpha.min(beta) <= negligible
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut a, p, q, c, s);
                rotate_rows_of_columns(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: SVD_MAX_SWEEPS,
        });
    }

    let mut order: Vec<(usize, f64)> = (0..cols).map(|j| (j, norm(a.row(j)))).collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let smax = order.first().map_or(0.0, |x| x.1);
    let mut u = Matrix::zeros(rows, cols);
    let mut vs = Matrix::zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    let mut null_cols = Vec::new();
    for (k, &(j, sigma)) in order.iter().enumerate() {
        s.push(sigma);
        for i in 0..cols {
            vs[(i, k)] = v[(i, j)];
        }
        if sigma > 0.0 && sigma > smax * f64::EPSILON * 1e-3 {
            for i in 0..rows {
                u[(i, k)] = a[(j, i)] / sigma;
            }
        } else {
            null_cols.push(k);
        }
    }
    complete_orthonormal_columns(&mut u, &null_cols);
    Ok(SvdFactors { u, s, v: vs })
}

// Rows p, q of `a` hold columns p, q of the working matrix.
fn rotate_rows(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = a.cols;
    for k in 0..cols {
        let x = a.data[p * cols + k];
        let y = a.data[q * cols + k];
        a.data[p * cols + k] = c * x - s * y;
        a.data[q * cols + k] = s * x + c * y;
    }
}

fn rotate_rows_of_columns(v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..v.rows {
        let x = v[(i, p)];
        let y = v[(i, q)];
        v[(i, p)] = c * x - s * y;
        v[(i, q)] = s * x + c * y;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every other column.
fn complete_orthonormal_columns(u: &mut Matrix, targets: &[usize]) {
    if targets.is_empty() {
        return;
    }
    let rows = u.rows;
    let mut filled: Vec<usize> = (0..u.cols).filter(|j| !targets.contains(j)).collect();
    let mut candidate = 0;
    for &t in targets {
        while candidate < rows {
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt.
            for _ in 0..2 {
                for &j in &filled {
                    let col = u.column(j);
                    let proj = dot(&col, &e);
                    for (x, c) in e.iter_mut().zip(&col) {
                        *x -= proj * c;
                    }
                }
            }
            let n = norm(&e);
            if n > 1e-8 {
                for i in 0..rows {
                    u[(i, t)] = e[i] / n;
                }
                filled.push(t);
                break;
            }
        }
    }
}

/// Default relative rank tolerance `max(rows, cols) · ε`.
pub fn default_rank_tol(m: &Matrix) -> f64 {
    m.rows.max(m.cols) as f64 * f64::EPSILON
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(m: &Matrix, rel_tol: f64) -> Result<usize> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rank tolerance must be positive, got {rel_tol}"
        )));
    }
    let s = svd(m)?.s;
    Ok(rank_from_singular_values(&s, rel_tol))
}

pub(crate) fn rank_from_singular_values(s: &[f64], rel_tol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Orthonormal basis for the column space, using the given relative rank tolerance.
pub fn orthonormal_basis(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let f = svd(m)?;
    let r = rank_from_singular_values(&f.s, rel_tol);
    Ok(f.leading_left(r))
}

// Padé numerator coefficients b_0..b_m, Higham (2005).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// Largest 1-norms for which each order meets unit-roundoff backward error.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    m.check_finite()?;
    let n = m.rows;
    let ident = Matrix::identity(n);
    let norm1 = m.norm_one();

    for &(order, theta) in &THETA {
        if norm1 <= theta {
            let coeffs: &[f64] = match order {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low_order(m, coeffs, &ident);
        }
    }

    let squarings = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = m.scale(0.5_f64.powi(squarings));
    let b = &PADE13;
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let u_inner = a6
        .scale(b[13])
        .add(&a4.scale(b[11]))
        .add(&a2.scale(b[9]));
    let u = a.matmul(
        &a6.matmul(&u_inner)
            .add(&a6.scale(b[7]))
            .add(&a4.scale(b[5]))
            .add(&a2.scale(b[3]))
            .add(&ident.scale(b[1])),
    );
    let v_inner = a6
        .scale(b[12])
        .add(&a4.scale(b[10]))
        .add(&a2.scale(b[8]));
    let v = a6
        .matmul(&v_inner)
        .add(&a6.scale(b[6]))
        .add(&a4.scale(b[4]))
        .add(&a2.scale(b[2]))
        .add(&ident.scale(b[0]));

    let mut r = v.sub(&u).solve(&v.add(&u))?;
    for _ in 0..squarings {
        r = r.matmul(&r);
    }
    r.check_finite()?;
    Ok(r)
}

fn pade_low_order(a: &Matrix, b: &[f64], ident: &Matrix) -> Result<Matrix> {
    let a2 = a.matmul(a);
    let mut even_power = ident.clone();
    let mut u_sum = Matrix::zeros(a.rows, a.cols);
    let mut v_sum = Matrix::zeros(a.rows, a.cols);
    for k in (0..b.len()).step_by(2) {
        v_sum = v_sum.add(&even_power.scale(b[k]));
        u_sum = u_sum.add(&even_power.scale(b[k + 1]));
        even_power = even_power.matmul(&a2);
    }
    let u = a.matmul(&u_sum);
    v_sum.sub(&u).solve(&v_sum.add(&u))
}

/// Cosines of the principal angles between the column spaces of two
/// orthonormal bases, nonincreasing and clamped to `[0, 1]`.
pub fn principal_angle_cosines(u1: &Matrix, u2: &Matrix) -> Result<Vec<f64>> {
    if u1.rows != u2.rows {
        return Err(Error::DimensionMismatch {
            context: "principal angles: ambient dimension",
            expected: u1.rows,
            found: u2.rows,
        });
    }
    if u1.cols == 0 || u2.cols == 0 {
        return Ok(Vec::new());
    }
    let cross = u1.transpose().matmul(u2);
    let s = svd(&cross)?.s;
    Ok(s.into_iter().map(|x| x.clamp(0.0, 1.0)).collect())
}
