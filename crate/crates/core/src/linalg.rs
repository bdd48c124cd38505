//! Small dense linear algebra: a row-major [`Matrix`], one-sided Jacobi SVD,
//! polar orthonormalization and inter-column angles.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rotation threshold for the Jacobi sweeps, relative to the column norms.
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 60;
/// Singular values at or below this are treated as zero by the polar factor.
pub const RANK_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
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

    /// Builds a matrix from row-major values, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Shape(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let m = Matrix::from_fn(rows, columns.len(), |r, c| columns[c][r]);
        Matrix::from_vec(m.rows, m.cols, m.data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, so zero-width matrices yield empty rows.
        let cols = self.cols;
        (0..self.rows).map(move |r| &self.data[r * cols..(r + 1) * cols])
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Gathers the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in sub");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self · other`. Panics when the inner dimensions disagree.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols,
            other.rows,
            "matmul of {:?} by {:?}",
            self.shape(),
            other.shape()
        );
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(1.0, self.view(), other.view(), 0.0, &mut out);
        out
    }

    /// Per-column arithmetic means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for row in self.row_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows.max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Copy with each column's mean subtracted.
    pub fn centered(&self) -> Matrix {
        let means = self.column_means();
        let mut out = self.clone();
        for r in 0..out.rows {
            for (v, m) in out.row_mut(r).iter_mut().zip(&means) {
                *v -= m;
            }
        }
        out
    }

    pub(crate) fn view(&self) -> MatView<'_> {
        MatView {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Borrowed strided matrix, used to express transposes without copying.
#[derive(Clone, Copy)]
pub(crate) struct MatView<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl MatView<'_> {
    pub(crate) fn t(self) -> Self {
        MatView {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// `c ← alpha·a·b + beta·c`.
pub(crate) fn gemm(alpha: f64, a: MatView<'_>, b: MatView<'_>, beta: f64, c: &mut Matrix) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!((a.rows, b.cols), c.shape(), "gemm output shape");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.data.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let rsc = c.cols as isize;
    // SAFETY: the views borrow slices that hold every index reachable through
    // their (rows, cols, strides), and `c` is exclusively borrowed with the
    // asserted m x n shape.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.data.as_mut_ptr(),
            rsc,
            1,
        );
    }
}

/// Thin SVD `A = U·diag(S)·Vᵀ` with `k = min(rows, cols)`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// rows × k, orthonormal columns.
    pub u: Matrix,
    /// k singular values, nonincreasing.
    pub s: Vec<f64>,
    /// cols × k, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (x, s) in us.row_mut(r).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        let mut out = Matrix::zeros(self.u.rows(), self.v.rows());
        gemm(1.0, us.view(), self.v.view().t(), 0.0, &mut out);
        out
    }
}

/// Singular value decomposition by cyclic one-sided (Hestenes) Jacobi sweeps.
///
/// Singular vectors are unique up to paired sign flips; the sign is fixed so
/// that the largest-magnitude entry of every column of `V` is positive.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::EmptyInput("svd of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input".into()));
    }
    let mut out = if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose());
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    };
    fix_signs(&mut out);
    Ok(out)
}

fn jacobi_tall(a: &Matrix) -> Svd {
    let (m, n) = a.shape();
    // Column-major working copies so that each column is contiguous.
    let mut u: Vec<f64> = (0..n).flat_map(|c| a.column(c)).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let up = &u[p * m..(p + 1) * m];
                    let uq = &u[q * m..(q + 1) * m];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in up.iter().zip(uq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut u, m, p, q, c, s);
                rotate_columns(&mut v, n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| {
            u[j * m..(j + 1) * m]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let smax = norms[order[0]];
    let null_tol = smax * 1e-12;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending_null = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        if sigma > null_tol && sigma > 0.0 {
            u_cols.push(u[j * m..(j + 1) * m].iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(Vec::new());
            pending_null.push(k);
        }
    }
    // Columns with (numerically) zero singular value carry no direction of
    // their own: complete them to an orthonormal set.
    for k in pending_null {
        u_cols[k] = orthonormal_completion(&u_cols, m);
    }

    let s = order.iter().map(|&j| norms[j]).collect();
    let u_mat = Matrix::from_fn(m, n, |r, c| u_cols[c][r]);
    let v_mat = Matrix::from_fn(n, n, |r, c| v[order[c] * n + r]);
    Svd {
        u: u_mat,
        s,
        v: v_mat,
    }
}

fn rotate_columns(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// A unit vector orthogonal to every nonempty column in `cols`.
fn orthonormal_completion(cols: &[Vec<f64>], m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for e in 0..m {
        let mut w = vec![0.0; m];
        w[e] = 1.0;
        // Two Gram-Schmidt passes keep the residual orthogonal to working precision.
        for _ in 0..2 {
            for c in cols.iter().filter(|c| !c.is_empty()) {
                let d: f64 = c.iter().zip(&w).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(c).for_each(|(wi, ci)| *wi -= d * ci);
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.5 {
            return w.into_iter().map(|x| x / norm).collect();
        }
        if best.as_ref().is_none_or(|(n, _)| norm > *n) {
            best = Some((norm, w));
        }
    }
    let (norm, w) = best.expect("m > 0");
    w.into_iter().map(|x| x / norm).collect()
}

fn fix_signs(svd: &mut Svd) {
    for j in 0..svd.v.cols() {
        let mut pivot = 0.0_f64;
        for r in 0..svd.v.rows() {
            let x = svd.v[(r, j)];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        if pivot < 0.0 {
            for r in 0..svd.v.rows() {
                svd.v[(r, j)] = -svd.v[(r, j)];
            }
            for r in 0..svd.u.rows() {
                svd.u[(r, j)] = -svd.u[(r, j)];
            }
        }
    }
}

/// Nearest matrix with orthonormal columns in Frobenius norm, `U·Vᵀ`.
pub fn polar_orthonormalize(w: &Matrix) -> Result<Matrix> {
    if w.rows() < w.cols() {
        return Err(Error::Shape(format!(
            "polar factor needs rows >= cols, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let f = svd(w)?;
    let smallest = *f.s.last().expect("k >= 1");
    if smallest <= RANK_TOL {
        return Err(Error::RankDeficient { smallest });
    }
    let mut q = Matrix::zeros(w.rows(), w.cols());
    gemm(1.0, f.u.view(), f.v.view().t(), 0.0, &mut q);
    Ok(q)
}

/// Angles in degrees between every unordered column pair `(i, j)`, `i < j`,
/// in lexicographic order.
pub fn pairwise_angles(columns: &Matrix) -> Result<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..columns.cols()).map(|c| columns.column(c)).collect();
    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&n| n <= 1e-12) {
        return Err(Error::DegenerateVector(j));
    }
    let mut angles = Vec::with_capacity(cols.len() * cols.len().saturating_sub(1) / 2);
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            angles.push(cos.acos().to_degrees());
        }
    }
    Ok(angles)
}
