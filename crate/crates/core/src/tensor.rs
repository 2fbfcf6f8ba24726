//! Dense row-major matrices and the handful of kernels the pipeline needs:
//! scaled softmax, cosine similarity and a one-sided Jacobi SVD.

use std::fmt;

use crate::error::{Error, Result};

/// Row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
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

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                axpy(a, other.row(k), out_row);
            }
        }
        Ok(out)
    }

    /// `self · v` for a column vector `v`.
    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: v.len() });
        }
        Ok(self.row_iter().map(|r| dot(r, v)).collect())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape(), other.shape())));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Returns `v / ‖v‖`.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !n.is_finite() {
        return Err(Error::NonFinite);
    }
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Softmax of `scale · v`.
///
/// The scale multiplies the scores before exponentiation, so larger values
/// sharpen the distribution. The maximum is subtracted first.
pub fn softmax_scaled(v: &[f64], scale: f64) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    if v.iter().any(|x| !x.is_finite()) || !scale.is_finite() {
        return Err(Error::NonFinite);
    }
    if scale <= 0.0 {
        return Err(Error::Config(format!("softmax scale must be positive, got {scale}")));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (scale * (x - max)).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    Ok(out)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na.is_finite() && nb.is_finite()) {
        return Err(Error::NonFinite);
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Thin singular value decomposition `A = U · diag(S) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × p` with orthonormal columns, `p = min(m, n)`.
    pub u: DenseMatrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `n × p` with orthonormal columns.
    pub v: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (x, s) in us.row_mut(r).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("svd factors have matching shapes")
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &DenseMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if a.rows() < a.cols() {
        let t = svd(&a.transpose())?;
        return Ok(Svd { u: t.v, s: t.s, v: t.u });
    }
    let (m, n) = a.shape();
    // Work on columns stored contiguously: cols[j] is column j of A.
    let mut cols = a.transpose();
    let mut vt = DenseMatrix::identity(n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (cols.row(p), cols.row(q));
                    (dot(cp, cp), dot(cq, cq), dot(cp, cq))
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = (0..n).map(|j| norm(cols.row(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let smax = order.first().map_or(0.0, |&j| sigma[j]);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for &j in &order {
        s.push(sigma[j]);
        v_cols.push(vt.row(j).to_vec());
        if sigma[j] > smax * 1e-13 && sigma[j] > 0.0 {
            u_cols.push(cols.row(j).iter().map(|x| x / sigma[j]).collect());
        } else {
            deficient.push(u_cols.len());
            u_cols.push(vec![0.0; m]);
        }
    }
    for idx in deficient {
        u_cols[idx] = complete_basis(&u_cols, idx, m);
    }

    let u = DenseMatrix::from_rows(&u_cols)?.transpose();
    let v = DenseMatrix::from_rows(&v_cols)?.transpose();
    Ok(Svd { u, s, v })
}

fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let (head, tail) = m.as_mut_slice().split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// A unit vector orthogonal to every nonzero column in `basis` other than `skip`.
fn complete_basis(basis: &[Vec<f64>], skip: usize, m: usize) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..m {
        let mut cand = vec![0.0; m];
        cand[i] = 1.0;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for (k, b) in basis.iter().enumerate() {
                if k == skip || b.iter().all(|&x| x == 0.0) {
                    continue;
                }
                let proj = dot(&cand, b);
                axpy(-proj, b, &mut cand);
            }
        }
        let n = norm(&cand);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, cand));
        }
        if n > 0.7 {
            break;
        }
    }
    let (n, v) = best.expect("m > 0");
    v.into_iter().map(|x| x / n).collect()
}
