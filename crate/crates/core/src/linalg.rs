//! Dense numerical kernels.
//!
//! Everything here works on small row-major matrices (tens of rows at most)
//! and is written for clarity over blocking or SIMD. The routines cover what
//! the rest of the crate needs: LU solves, Cholesky factors that tolerate
//! semidefinite input, the spectral norm by power iteration, eigenvalues of
//! nonsymmetric matrices through Hessenberg reduction and Francis double-shift
//! QR, a cyclic Jacobi eigensolver for symmetric matrices, the chi-squared
//! tail and seeded multivariate Gaussian draws.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (no usable pivot in column {column})")]
    SingularMatrix { column: usize },
    #[error("{routine} did not converge within {iterations} iterations")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
    },
    #[error("matrix is not positive semidefinite (pivot {pivot} = {value:e})")]
    NotPsd { pivot: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    /// Outer product `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &ai) in a.iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                m[(i, j)] = ai * bj;
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Mᵀ x` without forming the transpose.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "tr_mul_vec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o += m * xi;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "elementwise dimension mismatch"
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for v in self.row(i) {
                write!(f, "{v:>12.6e} ")?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// LU factorization with partial pivoting, stored compactly.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = tol::PIVOT_EPS * n as f64 * a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold {
                return Err(LinalgError::SingularMatrix { column: k });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }
}

/// Solves `A x = b` by LU with partial pivoting and one step of iterative
/// refinement.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != b.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "A is {}x{}, b has length {}",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let residual: Vec<f64> = a
        .mul_vec(&x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| bi - ax)
        .collect();
    let dx = lu.solve(&residual);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    Ok(x)
}

/// Lower-triangular factor `L` with `A = L Lᵀ`, tolerant of semidefinite
/// input: a pivot in `[NOT_PSD_PIVOT, tiny]` zeroes its column instead of
/// failing.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    l: Matrix,
}

impl PsdFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(LinalgError::DimensionMismatch(
                "Cholesky needs a square matrix".into(),
            ));
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = a.rows();
        let scale = a.max_abs();
        let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let d = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
            if d < tol::NOT_PSD_PIVOT {
                return Err(LinalgError::NotPsd { pivot: j, value: d });
            }
            if d <= tiny {
                continue;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let s = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }
}

/// Strict Cholesky factor of a symmetric positive definite matrix.
///
/// Returns `None` when a pivot is not strictly positive; callers use this
/// as a definiteness test.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Largest singular value of `m`, by power iteration on `MᵀM`.
///
/// The iteration runs on a block of up to eight vectors with a Rayleigh–Ritz
/// step, so clustered top singular values (typical at the optimum of a norm
/// minimization) do not slow it down.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    spectral_norm_with_cap(m, tol::SPECTRAL_NORM_MAX_ITER)
}

pub fn spectral_norm_with_cap(m: &Matrix, max_iter: usize) -> Result<f64> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let m = m.scale(1.0 / scale);
    let n = m.cols();
    let p = n.min(8);
    // Deterministic start: a generic vector followed by unit vectors.
    let mut block: Vec<Vec<f64>> = vec![(0..n).map(|i| 1.0 + 0.37 * ((i + 1) as f64).sin()).collect()];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        block.push(e);
    }
    let mut v = orthonormalize(block, p);
    let mut theta = -1.0;
    for _ in 0..max_iter {
        // W = MᵀM V, then Rayleigh–Ritz on span(W).
        let w: Vec<Vec<f64>> = v.iter().map(|c| m.tr_mul_vec(&m.mul_vec(c))).collect();
        let basis = orthonormalize(w, p);
        if basis.is_empty() {
            return Ok(0.0);
        }
        let images: Vec<Vec<f64>> = basis.iter().map(|c| m.mul_vec(c)).collect();
        let k = basis.len();
        let mut h = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let d = dot(&images[i], &images[j]);
                h[(i, j)] = d;
                h[(j, i)] = d;
            }
        }
        let (vals, vecs) = symmetric_eigen(&h)?;
        let next = vals[0].max(0.0);
        // Rotate the basis onto the Ritz vectors.
        v = (0..k)
            .map(|c| {
                let mut x = vec![0.0; n];
                for (r, b) in basis.iter().enumerate() {
                    let coef = vecs[(r, c)];
                    x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
                }
                x
            })
            .collect();
        if k == n || (next - theta).abs() <= tol::POWER_ITERATION_STALL * next {
            return Ok(next.sqrt() * scale);
        }
        theta = next;
    }
    Err(LinalgError::NonConvergence {
        routine: "spectral_norm",
        iterations: max_iter,
    })
}

/// Modified Gram–Schmidt keeping at most `limit` independent columns.
fn orthonormalize(cols: Vec<Vec<f64>>, limit: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(limit);
    for mut c in cols {
        if out.len() == limit {
            break;
        }
        let before = norm2(&c);
        if before == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let d = dot(q, &c);
                c.iter_mut().zip(q).for_each(|(ci, qi)| *ci -= d * qi);
            }
        }
        let after = norm2(&c);
        if after > 1e-10 * before {
            c.iter_mut().for_each(|x| *x /= after);
            out.push(c);
        }
    }
    out
}

/// Eigenvalue as a `(re, im)` pair.
pub type Complex = (f64, f64);

/// All eigenvalues of a square matrix, unordered.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex>> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(
            "eigenvalues need a square matrix".into(),
        ));
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut h = m.clone();
    hessenberg_in_place(&mut h);
    francis_qr(&mut h)
}

/// Moduli of all eigenvalues of `m`, sorted descending.
pub fn eigenvalue_moduli(m: &Matrix) -> Result<Vec<f64>> {
    let mut moduli: Vec<f64> = eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

/// Householder reduction to upper Hessenberg form.
fn hessenberg_in_place(h: &mut Matrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n];
    for k in 0..n - 2 {
        let scale: f64 = (k + 1..n).map(|i| h[(i, k)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut sigma = 0.0;
        for i in k + 1..n {
            v[i] = h[(i, k)] / scale;
            sigma += v[i] * v[i];
        }
        let mut alpha = sigma.sqrt();
        if v[k + 1] > 0.0 {
            alpha = -alpha;
        }
        // v ← x − alpha e₁, beta = vᵀv / 2
        let beta = sigma - v[k + 1] * alpha;
        v[k + 1] -= alpha;
        // H ← (I − v vᵀ/beta) H
        for j in 0..n {
            let f: f64 = (k + 1..n).map(|i| v[i] * h[(i, j)]).sum::<f64>() / beta;
            for i in k + 1..n {
                h[(i, j)] -= f * v[i];
            }
        }
        // H ← H (I − v vᵀ/beta)
        for i in 0..n {
            let f: f64 = (k + 1..n).map(|j| v[j] * h[(i, j)]).sum::<f64>() / beta;
            for j in k + 1..n {
                h[(i, j)] -= f * v[j];
            }
        }
        h[(k + 1, k)] = scale * alpha;
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (EISPACK `hqr`
/// structure), returning the eigenvalues.
fn francis_qr(h: &mut Matrix) -> Result<Vec<Complex>> {
    let nn = h.rows();
    let mut eig = vec![(0.0, 0.0); nn];
    if nn == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }
    let at = |h: &Matrix, i: isize, j: isize| h[(i as usize, j as usize)];

    let mut n = nn as isize - 1;
    let mut exshift = 0.0;
    let mut iter = 0usize;
    let mut total = 0usize;
    let cap = tol::QR_SWEEPS_PER_EIGENVALUE * nn.max(1);
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    while n >= 0 {
        // Find a negligible subdiagonal entry.
        let mut l = n;
        while l > 0 {
            s = at(h, l - 1, l - 1).abs() + at(h, l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if at(h, l, l - 1).abs() <= eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One real root.
            eig[n as usize] = (at(h, n, n) + exshift, 0.0);
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots from the trailing 2x2 block.
            w = at(h, n, n - 1) * at(h, n - 1, n);
            p = (at(h, n - 1, n - 1) - at(h, n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            x = at(h, n, n) + exshift;
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                let first = x + z;
                let second = if z != 0.0 { x - w / z } else { first };
                eig[(n - 1) as usize] = (first, 0.0);
                eig[n as usize] = (second, 0.0);
            } else {
                eig[(n - 1) as usize] = (x + p, z);
                eig[n as usize] = (x + p, -z);
            }
            n -= 2;
            iter = 0;
        } else {
            x = at(h, n, n);
            y = at(h, n - 1, n - 1);
            w = at(h, n, n - 1) * at(h, n - 1, n);

            if iter == 10 {
                // Exceptional shift.
                exshift += x;
                for i in 0..=n {
                    h[(i as usize, i as usize)] -= x;
                }
                s = at(h, n, n - 1).abs() + at(h, n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=n {
                        h[(i as usize, i as usize)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if total > cap {
                return Err(LinalgError::NonConvergence {
                    routine: "francis_qr",
                    iterations: total,
                });
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            loop {
                z = at(h, m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / at(h, m + 1, m) + at(h, m, m + 1);
                q = at(h, m + 1, m + 1) - z - r - s;
                r = at(h, m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if at(h, m, m - 1).abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (at(h, m - 1, m - 1).abs() + z.abs() + at(h, m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=n {
                h[(i as usize, (i - 2) as usize)] = 0.0;
                if i > m + 2 {
                    h[(i as usize, (i - 3) as usize)] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            let mut k = m;
            while k <= n - 1 {
                let notlast = k != n - 1;
                if k != m {
                    p = at(h, k, k - 1);
                    q = at(h, k + 1, k - 1);
                    r = if notlast { at(h, k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k as usize, (k - 1) as usize)] = -s * x;
                    } else if l != m {
                        h[(k as usize, (k - 1) as usize)] = -at(h, k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn as isize {
                        let (ku, ju) = (k as usize, j as usize);
                        p = h[(ku, ju)] + q * h[(ku + 1, ju)];
                        if notlast {
                            p += r * h[(ku + 2, ju)];
                            h[(ku + 2, ju)] -= p * z;
                        }
                        h[(ku, ju)] -= p * x;
                        h[(ku + 1, ju)] -= p * y;
                    }
                    let upper = n.min(k + 3);
                    for i in 0..=upper {
                        let (iu, ku) = (i as usize, k as usize);
                        p = x * h[(iu, ku)] + y * h[(iu, ku + 1)];
                        if notlast {
                            p += z * h[(iu, ku + 2)];
                            h[(iu, ku + 2)] -= p * r;
                        }
                        h[(iu, ku)] -= p;
                        h[(iu, ku + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(eig)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues (descending) and the matching orthonormal
/// eigenvectors as the columns of the second matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(LinalgError::DimensionMismatch(
            "symmetric_eigen needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    const MAX_SWEEPS: usize = 100;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total: f64 = m.as_slice().iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(LinalgError::NonConvergence {
            routine: "symmetric_eigen",
            iterations: MAX_SWEEPS,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vecs[(k, dst)] = v[(k, src)];
        }
    }
    Ok((values, vecs))
}

/// Orthonormal basis of the null space of `a`, as columns.
pub fn null_space(a: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let gram = a.transpose().matmul(a);
    let (values, vecs) = symmetric_eigen(&gram)?;
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let cut = rel_tol * top.max(f64::MIN_POSITIVE);
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= cut).collect();
    let mut z = Matrix::zeros(a.cols(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        for k in 0..a.cols() {
            z[(k, dst)] = vecs[(k, src)];
        }
    }
    Ok(z)
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized upper incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..10_000 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (h.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Upper-tail probability `P(χ²_dof > x)`.
pub fn chi2_survival(x: f64, dof: u32) -> f64 {
    assert!(dof >= 1, "chi-squared needs at least one degree of freedom");
    if !(x > 0.0) {
        return 1.0;
    }
    gamma_q(dof as f64 / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Multivariate normal sampler with a fixed covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: PsdFactor,
}

impl GaussianSampler {
    pub fn new(cov: &Matrix) -> Result<Self> {
        if !cov.is_symmetric(tol::SYMMETRY_TOL * cov.max_abs().max(1.0)) {
            return Err(LinalgError::DimensionMismatch(
                "covariance must be symmetric".into(),
            ));
        }
        Ok(Self {
            factor: PsdFactor::new(cov)?,
        })
    }

    /// Draws `mean + L z` with `z` standard normal from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        let n = self.factor.dim();
        assert_eq!(mean.len(), n, "mean has wrong dimension");
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.factor.factor();
        (0..n)
            .map(|i| mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }
}

/// One draw from `N(mean, cov)`.
pub fn sample_gaussian<R: Rng + ?Sized>(mean: &[f64], cov: &Matrix, rng: &mut R) -> Result<Vec<f64>> {
    if cov.rows() != mean.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "mean has length {}, covariance is {}x{}",
            mean.len(),
            cov.rows(),
            cov.cols()
        )));
    }
    Ok(GaussianSampler::new(cov)?.sample(mean, rng))
}
