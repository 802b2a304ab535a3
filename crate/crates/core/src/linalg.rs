//! Dense symmetric and PSD matrix primitives.
//!
//! [`SymMatrix`] stores the lower triangle only, so `get(i, j)` and `get(j, i)`
//! read the same slot and symmetry holds bit-exactly through every update. The
//! eigensolver is Householder tridiagonalization followed by implicit QL
//! iteration with accumulated transformations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
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
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
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
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Symmetric matrix with packed lower-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    order: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            packed: vec![0.0; order * (order + 1) / 2],
        }
    }

    pub fn identity(order: usize) -> Self {
        Self::scaled_identity(order, 1.0)
    }

    pub fn scaled_identity(order: usize, s: f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.packed[packed_index(i, i)] = s;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.packed[packed_index(i, i)] = v;
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the lower triangle (`i >= j`).
    pub fn from_lower_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut packed = Vec::with_capacity(order * (order + 1) / 2);
        for i in 0..order {
            for j in 0..=i {
                packed.push(f(i, j));
            }
        }
        SymMatrix { order, packed }
    }

    pub fn from_packed(order: usize, packed: Vec<f64>) -> Result<Self> {
        check_len(order * (order + 1) / 2, packed.len())?;
        Ok(SymMatrix { order, packed })
    }

    /// Converts a square dense matrix, rejecting asymmetry above
    /// `tol · max|entry|`. The stored value is the average of the two halves.
    pub fn from_dense(a: &Matrix, tol: f64) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let scale = a.max_abs();
        let n = a.rows();
        for i in 0..n {
            for j in 0..i {
                if (a.get(i, j) - a.get(j, i)).abs() > tol * scale {
                    return Err(Error::input("matrix is not symmetric"));
                }
            }
        }
        Ok(Self::from_lower_fn(n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i))))
    }

    /// Block-diagonal assembly `diag(a, b)`.
    pub fn block_diag(a: &SymMatrix, b: &SymMatrix) -> Self {
        let na = a.order;
        Self::from_lower_fn(na + b.order, |i, j| {
            if i < na {
                a.get(i, j)
            } else if j >= na {
                b.get(i - na, j - na)
            } else {
                0.0
            }
        })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    pub fn is_finite(&self) -> bool {
        self.packed.iter().all(|x| x.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.frobenius_sq())
    }

    fn frobenius_sq(&self) -> f64 {
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..self.order {
            for j in 0..=i {
                let v = self.packed[k];
                s += if i == j { v * v } else { 2.0 * v * v };
                k += 1;
            }
        }
        s
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..self.order {
            for j in 0..=i {
                let d = self.packed[k] - other.packed[k];
                s += if i == j { d * d } else { 2.0 * d * d };
                k += 1;
            }
        }
        libm::sqrt(s)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order, v.len())?;
        let mut out = vec![0.0; self.order];
        let mut k = 0;
        for i in 0..self.order {
            let vi = v[i];
            let mut acc = 0.0;
            for j in 0..i {
                let a = self.packed[k];
                acc += a * v[j];
                out[j] += a * vi;
                k += 1;
            }
            acc += self.packed[k] * vi;
            k += 1;
            out[i] += acc;
        }
        Ok(out)
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        check_len(self.order, v.len())?;
        let mut s = 0.0;
        let mut k = 0;
        for i in 0..self.order {
            let mut row = 0.0;
            for j in 0..i {
                row += self.packed[k] * v[j];
                k += 1;
            }
            s += v[i] * (2.0 * row + self.packed[k] * v[i]);
            k += 1;
        }
        Ok(s)
    }

    /// In-place `A += c · w wᵀ`.
    pub fn add_outer(&mut self, w: &[f64], c: f64) -> Result<()> {
        check_len(self.order, w.len())?;
        let mut k = 0;
        for i in 0..self.order {
            let cwi = c * w[i];
            for &wj in &w[..=i] {
                self.packed[k] += cwi * wj;
                k += 1;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.packed {
            *v *= s;
        }
    }
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix,
}

impl EigenPair {
    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// `V · diag(f(σ)) · Vᵀ`.
    pub fn map_values(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&s| f(s)).collect();
        SymMatrix::from_lower_fn(n, |i, j| {
            let vi = self.vectors.row(i);
            let vj = self.vectors.row(j);
            let mut s = 0.0;
            for k in 0..n {
                s += vi[k] * fv[k] * vj[k];
            }
            s
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_values(|s| s)
    }
}

/// Symmetric eigendecomposition with descending eigenvalues.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenPair> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = a.order();
    if n == 0 {
        return Ok(EigenPair {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = a.to_dense().data;
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(n, &mut v, &mut d, &mut e);
    tridiagonal_ql(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[i * n + order[j]]);
    Ok(EigenPair { values, vectors })
}

// Householder reduction to tridiagonal form (EISPACK tred2 lineage). On exit
// `v` holds the accumulated orthogonal transform, `d` the diagonal and `e` the
// subdiagonal in e[1..n].
fn tridiagonalize(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in e.iter_mut().take(i) {
                *x = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal (d, e), rotating the columns of `v`.
fn tridiagonal_ql(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    const MAX_SWEEPS: usize = 64;
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d.iter_mut().skip(l + 2) {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[at(k, i + 1)];
                        v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                        v[at(k, i)] = c * v[at(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Relative tolerance below which a PSD input's negative eigenvalues are
/// treated as rounding noise.
pub const PSD_TOL: f64 = 1e-8;

/// Relative eigenvalue floor used before inverting.
pub const EIG_FLOOR: f64 = 1e-12;

fn check_psd(eig: &EigenPair) -> Result<()> {
    let max = eig.max_value();
    let min = eig.min_value();
    if min < -PSD_TOL * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::Indefinite { min_eigenvalue: min });
    }
    Ok(())
}

/// `(K + ridge·I)^{-1/2}`. Shifted eigenvalues below `1e-12 · σ_max` are
/// clamped to that floor before inversion.
pub fn inv_sqrt_psd(k: &SymMatrix, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0) {
        return Err(Error::config("ridge must be nonnegative"));
    }
    let eig = eig_sym(k)?;
    check_psd(&eig)?;
    let floor = EIG_FLOOR * eig.max_value();
    if !(eig.max_value() + ridge > 0.0) {
        return Err(Error::Singular {
            min_eigenvalue: eig.min_value(),
        });
    }
    Ok(eig.map_values(|s| 1.0 / libm::sqrt((s + ridge).max(floor).max(ridge))))
}

/// `(K (K + ridge·I)^{-1/2}, (K + ridge·I)^{-1/2})` from one decomposition,
/// with the same eigenvalue floor as [`inv_sqrt_psd`]. The first factor equals
/// `K^{1/2}` when `ridge = 0` and `K` is nonsingular.
pub fn sqrt_pair_psd(k: &SymMatrix, ridge: f64) -> Result<(SymMatrix, SymMatrix)> {
    if !(ridge >= 0.0) {
        return Err(Error::config("ridge must be nonnegative"));
    }
    let eig = eig_sym(k)?;
    check_psd(&eig)?;
    let floor = EIG_FLOOR * eig.max_value();
    if !(eig.max_value() + ridge > 0.0) {
        return Err(Error::Singular {
            min_eigenvalue: eig.min_value(),
        });
    }
    let root = |s: f64| libm::sqrt((s + ridge).max(floor).max(ridge));
    Ok((
        eig.map_values(|s| s.max(0.0) / root(s)),
        eig.map_values(|s| 1.0 / root(s)),
    ))
}

/// `(K + ridge·I)^{1/2}` with negative rounding noise clipped to zero.
pub fn sqrt_psd(k: &SymMatrix, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0) {
        return Err(Error::config("ridge must be nonnegative"));
    }
    let eig = eig_sym(k)?;
    check_psd(&eig)?;
    Ok(eig.map_values(|s| libm::sqrt((s + ridge).max(0.0))))
}

/// `M + c · (Mv)(Mv)ᵀ`.
pub fn sandwich_rank_one(m: &SymMatrix, v: &[f64], c: f64) -> Result<SymMatrix> {
    let w = m.mul_vec(v)?;
    let mut out = m.clone();
    out.add_outer(&w, c)?;
    Ok(out)
}

/// `log det A` for positive definite `A`.
pub fn logdet_psd(a: &SymMatrix) -> Result<f64> {
    let eig = eig_sym(a)?;
    if !(eig.min_value() > 0.0) {
        return Err(Error::Singular {
            min_eigenvalue: eig.min_value(),
        });
    }
    Ok(eig.values.iter().map(|&s| libm::log(s)).sum())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
