//! Linear canonical correlation analysis on cross-domain pairs.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_len, eig_sym, inv_sqrt_psd, Matrix, SymMatrix};
use crate::metric::{DomainData, Label};

pub const DEFAULT_RIDGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    /// `dim_x × d`
    pub proj_x: Matrix,
    /// `dim_y × d`
    pub proj_y: Matrix,
    /// Descending.
    pub correlations: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
}

impl CcaModel {
    pub fn dim(&self) -> usize {
        self.correlations.len()
    }

    pub fn project_x(&self, x: &[f64]) -> Result<Vec<f64>> {
        project(&self.proj_x, &self.mean_x, x)
    }

    pub fn project_y(&self, y: &[f64]) -> Result<Vec<f64>> {
        project(&self.proj_y, &self.mean_y, y)
    }
}

fn project(p: &Matrix, mean: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len(mean.len(), v.len())?;
    let centered: Vec<f64> = v.iter().zip(mean).map(|(a, m)| a - m).collect();
    p.tr_mul_vec(&centered)
}

fn center(a: &Matrix) -> (Matrix, Vec<f64>) {
    let n = a.cols() as f64;
    let mean: Vec<f64> = (0..a.rows()).map(|i| a.row(i).iter().sum::<f64>() / n).collect();
    (Matrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) - mean[i]), mean)
}

fn regularized_cov(a: &Matrix, ridge: f64) -> Result<SymMatrix> {
    let n = a.cols() as f64;
    let mut c = SymMatrix::from_dense(&a.matmul(&a.transpose())?, f64::INFINITY)?;
    c.scale(1.0 / n);
    let shift = ridge * c.trace();
    for i in 0..c.order() {
        c.set(i, i, c.get(i, i) + shift);
    }
    Ok(c)
}

/// Fits `d` canonical pairs from paired columns of `x_paired` (`dim_x × n`)
/// and `y_paired` (`dim_y × n`). Covariances get `ridge · trace(C) · I` added.
pub fn fit_cca(x_paired: &Matrix, y_paired: &Matrix, d: usize, ridge: f64) -> Result<CcaModel> {
    check_len(x_paired.cols(), y_paired.cols())?;
    let (dx, dy, n) = (x_paired.rows(), y_paired.rows(), x_paired.cols());
    if d == 0 || d > dx.min(dy) {
        return Err(Error::config(format!(
            "CCA dimension {d} must be in 1..={}",
            dx.min(dy)
        )));
    }
    if n < d {
        return Err(Error::input(format!("CCA needs at least {d} pairs, got {n}")));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::config(format!("ridge must be nonnegative, got {ridge}")));
    }
    let (xc, mean_x) = center(x_paired);
    let (yc, mean_y) = center(y_paired);
    let cxx = regularized_cov(&xc, ridge)?;
    let cyy = regularized_cov(&yc, ridge)?;
    let mut cxy = xc.matmul(&yc.transpose())?;
    for v in 0..dx {
        for w in 0..dy {
            cxy.set(v, w, cxy.get(v, w) / n as f64);
        }
    }
    let wx = inv_sqrt_psd(&cxx, 0.0)?.to_dense();
    let wy = inv_sqrt_psd(&cyy, 0.0)?.to_dense();
    let t = wx.matmul(&cxy)?.matmul(&wy)?;
    let ttt = SymMatrix::from_dense(&t.matmul(&t.transpose())?, f64::INFINITY)?;
    let left = eig_sym(&ttt)?;
    let tt_t = SymMatrix::from_dense(&t.transpose().matmul(&t)?, f64::INFINITY)?;
    let right = eig_sym(&tt_t)?;

    let correlations: Vec<f64> = left.values[..d].iter().map(|&s| libm::sqrt(s.max(0.0))).collect();
    let u = Matrix::from_fn(dx, d, |i, k| left.vectors.get(i, k));
    // pair each right vector with its left partner, v = Tᵀu/ρ; fall back to the
    // right eigenvector when ρ vanishes
    let mut v = Matrix::zeros(dy, d);
    for k in 0..d {
        let rho = correlations[k];
        let col = if rho > 1e-12 {
            let tu = t.tr_mul_vec(&left.vectors.column(k))?;
            tu.into_iter().map(|e| e / rho).collect()
        } else {
            right.vectors.column(k)
        };
        for (i, e) in col.into_iter().enumerate() {
            v.set(i, k, e);
        }
    }
    Ok(CcaModel {
        proj_x: wx.matmul(&u)?,
        proj_y: wy.matmul(&v)?,
        correlations,
        mean_x,
        mean_y,
    })
}

/// Pairs labeled source and target samples of the same class uniformly at
/// random, cycling the smaller side so every sample of the larger side is used.
/// Returns `(source, target)` index pairs, classes in ascending order.
pub fn pair_within_class(x: &DomainData, y: &DomainData, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let indices = |d: &DomainData, c: Label| -> Vec<usize> {
        d.labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect()
    };
    for c in x.classes() {
        let mut xs = indices(x, c);
        let mut ys = indices(y, c);
        if ys.is_empty() {
            continue;
        }
        xs.shuffle(&mut rng);
        ys.shuffle(&mut rng);
        for k in 0..xs.len().max(ys.len()) {
            pairs.push((xs[k % xs.len()], ys[k % ys.len()]));
        }
    }
    pairs
}

/// Pairs the labeled samples and fits CCA on them.
pub fn fit_cca_labeled(x: &DomainData, y: &DomainData, d: usize, ridge: f64, seed: u64) -> Result<CcaModel> {
    let pairs = pair_within_class(x, y, seed);
    if pairs.is_empty() {
        return Err(Error::input("no class has labeled samples in both domains"));
    }
    let xp = Matrix::from_fn(x.dim(), pairs.len(), |i, k| x.sample(pairs[k].0)[i]);
    let yp = Matrix::from_fn(y.dim(), pairs.len(), |i, k| y.sample(pairs[k].1)[i]);
    fit_cca(&xp, &yp, d, ridge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identical_domains_are_perfectly_correlated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(3, 30, &mut rng);
        let m = fit_cca(&x, &x, 3, 0.0).unwrap();
        for &r in &m.correlations {
            assert!((r - 1.0).abs() < 1e-8, "{r}");
        }
    }

    #[test]
    fn independent_domains_with_large_ridge_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(3, 200, &mut rng);
        let y = random(2, 200, &mut rng);
        let m = fit_cca(&x, &y, 2, 100.0).unwrap();
        assert!(m.correlations[0] < 0.01, "{:?}", m.correlations);
    }

    #[test]
    fn linearly_related_domains_have_top_correlation_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(4, 50, &mut rng);
        let a = random(3, 4, &mut rng);
        let y = a.matmul(&x).unwrap();
        let m = fit_cca(&x, &y, 3, 1e-6).unwrap();
        assert!(m.correlations[0] >= 0.99);
        for w in m.correlations.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn projections_have_unit_variance_and_stated_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(3, 80, &mut rng);
        let noise = random(2, 80, &mut rng);
        let y = Matrix::from_fn(2, 80, |i, j| x.get(i, j) + 0.5 * noise.get(i, j));
        let m = fit_cca(&x, &y, 2, 0.0).unwrap();
        for k in 0..2 {
            let px: Vec<f64> = (0..80).map(|j| m.project_x(&x.column(j)).unwrap()[k]).collect();
            let py: Vec<f64> = (0..80).map(|j| m.project_y(&y.column(j)).unwrap()[k]).collect();
            let vx = px.iter().map(|a| a * a).sum::<f64>() / 80.0;
            let vy = py.iter().map(|a| a * a).sum::<f64>() / 80.0;
            let cxy = px.iter().zip(&py).map(|(a, b)| a * b).sum::<f64>() / 80.0;
            assert!((vx - 1.0).abs() < 1e-8 && (vy - 1.0).abs() < 1e-8);
            assert!((cxy - m.correlations[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn cca_errors() {
        let x = Matrix::zeros(3, 2);
        let y = Matrix::zeros(2, 2);
        assert!(fit_cca(&x, &y, 3, 0.1).is_err());
        assert!(fit_cca(&x, &Matrix::zeros(2, 3), 1, 0.1).is_err());
        let x1 = Matrix::zeros(3, 1);
        assert!(fit_cca(&x1, &Matrix::zeros(2, 1), 2, 0.1).is_err());
        assert!(fit_cca(&x, &y, 0, 0.1).is_err());
    }

    #[test]
    fn pairing_cycles_smaller_side_within_class() {
        let x = DomainData::new(1, alloc::vec![0., 1., 2., 3., 4.], alloc::vec![0, 0, 0, 1, 2]).unwrap();
        let y = DomainData::new(1, alloc::vec![0., 1., 2.], alloc::vec![0, 1, 1]).unwrap();
        let pairs = pair_within_class(&x, &y, 7);
        assert_eq!(pairs.len(), 5);
        for &(i, j) in &pairs {
            assert_eq!(x.labels()[i], y.labels()[j]);
        }
        let mut src: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        src.sort();
        assert_eq!(src, alloc::vec![0, 1, 2, 3, 3]);
        assert_eq!(pairs, pair_within_class(&x, &y, 7));
    }
}
