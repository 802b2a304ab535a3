//! Principal component analysis for dimensionality reduction.

use mlhd_core::linalg::{eig_sym, Matrix, SymMatrix};
use mlhd_core::{DomainData, Error as CoreError};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// `dim × d`, orthonormal columns.
    pub projection: Matrix,
    pub mean: Vec<f64>,
    /// Sample variance along each direction, descending.
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(CoreError::DimensionMismatch {
                expected: self.mean.len(),
                found: v.len(),
            }
            .into());
        }
        let c: Vec<f64> = v.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        Ok(self.projection.tr_mul_vec(&c)?)
    }

    /// Projects every sample, keeping labels.
    pub fn apply(&self, data: &DomainData) -> Result<DomainData> {
        let mut out = Vec::with_capacity(data.len() * self.projection.cols());
        for s in data.samples() {
            out.extend(self.transform(s)?);
        }
        Ok(DomainData::new(self.projection.cols(), out, data.labels().to_vec())?)
    }
}

/// Fits `d` principal directions. Each direction's largest-magnitude entry is
/// made positive. Wide data (`dim > N`) goes through the `N × N` Gram matrix.
pub fn fit_pca(x: &DomainData, d: usize) -> Result<Pca> {
    let (dim, n) = (x.dim(), x.len());
    if n < 2 {
        return Err(CoreError::InvalidInput("PCA needs at least two samples".into()).into());
    }
    if d == 0 || d > dim.min(n) {
        return Err(CoreError::InvalidConfig(format!("PCA dimension {d} must be in 1..={}", dim.min(n))).into());
    }
    let mean = x.mean();
    let centered = Matrix::from_fn(dim, n, |i, j| x.sample(j)[i] - mean[i]);
    let scale = 1.0 / (n - 1) as f64;

    let mut projection = Matrix::zeros(dim, d);
    let mut explained_variance = Vec::with_capacity(d);
    if dim <= n {
        let cov = SymMatrix::from_dense(&centered.matmul(&centered.transpose())?, f64::INFINITY)?;
        let eig = eig_sym(&cov)?;
        for k in 0..d {
            explained_variance.push(eig.values[k].max(0.0) * scale);
            for i in 0..dim {
                projection.set(i, k, eig.vectors.get(i, k));
            }
        }
    } else {
        let gram = SymMatrix::from_dense(&centered.transpose().matmul(&centered)?, f64::INFINITY)?;
        let eig = eig_sym(&gram)?;
        let floor = 1e-12 * eig.max_value();
        for k in 0..d {
            let s = eig.values[k];
            if !(s > floor) {
                return Err(CoreError::InvalidConfig(format!(
                    "PCA dimension {d} exceeds the rank of the centered data"
                ))
                .into());
            }
            let dir = centered.mul_vec(&eig.vectors.column(k))?;
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (i, v) in dir.into_iter().enumerate() {
                projection.set(i, k, v / norm);
            }
            explained_variance.push(s * scale);
        }
    }
    for k in 0..d {
        let col = projection.column(k);
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            for i in 0..dim {
                projection.set(i, k, -projection.get(i, k));
            }
        }
    }
    Ok(Pca {
        projection,
        mean,
        explained_variance,
    })
}

/// Fits and applies PCA in one step.
pub fn pca_reduce(x: &DomainData, d: usize) -> Result<(DomainData, Pca)> {
    let pca = fit_pca(x, d)?;
    Ok((pca.apply(x)?, pca))
}
