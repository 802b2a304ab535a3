//! Kernelized cross-domain metric.
//!
//! With `Q = diag(X, Y)` and block kernel `K = diag(K_X, K_Y)`, an optimal
//! metric has the form `M = Q K^{-1/2} L K^{-1/2} Qᵀ` for a PSD `L` of order
//! `N_x + N_y`. Training-pair distances become `e_ijᵀ K^{1/2} L K^{1/2} e_ij`
//! and the MMD statistic `ēᵀ K^{1/2} L K^{1/2} ē`, so the same projection
//! solver runs on `L` with constraint vectors `K^{1/2} e_ij` and `K^{1/2} ē`.
//!
//! Out-of-sample distances substitute `M` back into `zᵀ M z`. For a new pair
//! `(x, y)`, `Qᵀ z = c = [k_x(X, x); −k_y(Y, y)]` and
//!
//! ```text
//! d²(x, y) = cᵀ K^{-1/2} L K^{-1/2} c.
//! ```
//!
//! On a training pair `c = K e_ij`, which reproduces the training value.
//!
//! Each block gets a small ridge `r`, and tiny eigenvalues are floored, so
//! rank-deficient Gram matrices (more samples than features under a linear
//! kernel) are handled. Training uses `K (K + r)^{-1/2}` in place of `K^{1/2}`
//! so that the out-of-sample formula reproduces training distances exactly.

use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::linalg::{self, check_len, eig_sym, sqrt_pair_psd, sqrt_psd, Matrix, SymMatrix};
use crate::metric::{ConstraintSet, DomainData, MetricModel};
use crate::solver::{self, check_constraints, FitReport, ProjectionProblem, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(−γ‖a − b‖²)`
    Rbf {
        gamma: f64,
    },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::config(format!("RBF gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => linalg::dot(a, b),
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                libm::exp(-gamma * d2)
            }
        }
    }

    /// RBF kernel with `γ = 1 / median pairwise squared distance`.
    pub fn rbf_median(data: &DomainData) -> Result<Self> {
        let n = data.len();
        let mut d = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in 0..i {
                let a = data.sample(i);
                let b = data.sample(j);
                d.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>());
            }
        }
        if d.is_empty() {
            return Err(Error::input("median heuristic needs at least two samples"));
        }
        d.sort_by(f64::total_cmp);
        let med = crate::metric::percentile(&d, 50.0);
        if !(med > 0.0) {
            return Err(Error::input("median pairwise distance is zero"));
        }
        Ok(KernelSpec::Rbf { gamma: 1.0 / med })
    }
}

/// Gram matrix `[k(a_i, b_j)]`.
pub fn gram(spec: &KernelSpec, a: &DomainData, b: &DomainData) -> Result<Matrix> {
    spec.validate()?;
    check_len(a.dim(), b.dim())?;
    Ok(Matrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval(a.sample(i), b.sample(j))
    }))
}

fn gram_sym(spec: &KernelSpec, a: &DomainData) -> SymMatrix {
    SymMatrix::from_lower_fn(a.len(), |i, j| spec.eval(a.sample(i), a.sample(j)))
}

/// Kernel column `[k(a_i, v)]_i`.
pub fn kernel_column(spec: &KernelSpec, a: &DomainData, v: &[f64]) -> Result<Vec<f64>> {
    check_len(a.dim(), v.len())?;
    Ok(a.samples().map(|s| spec.eval(s, v)).collect())
}

/// Block-diagonal `diag(K_x, K_y)`.
pub fn build_block_kernel(kx: &Matrix, ky: &Matrix) -> Result<SymMatrix> {
    let kx = SymMatrix::from_dense(kx, 1e-12)?;
    let ky = SymMatrix::from_dense(ky, 1e-12)?;
    Ok(SymMatrix::block_diag(&kx, &ky))
}

/// `K^{1/2} e_ij` where `e_ij` has `+1` at source slot `i` and `−1` at target
/// slot `n_x + j`.
pub fn constraint_vector(k_sqrt: &SymMatrix, n_x: usize, i: usize, j: usize) -> Result<Vec<f64>> {
    let n = k_sqrt.order();
    if i >= n_x || n_x + j >= n {
        return Err(Error::input(format!("pair ({i}, {j}) out of range")));
    }
    Ok((0..n).map(|r| k_sqrt.get(r, i) - k_sqrt.get(r, n_x + j)).collect())
}

/// `K^{1/2} ē` with `ē = [1/N_x ...; −1/N_y ...]`.
pub fn mmd_constraint_vector(k_sqrt: &SymMatrix, n_x: usize, n_y: usize) -> Result<Vec<f64>> {
    check_len(n_x + n_y, k_sqrt.order())?;
    if n_x == 0 || n_y == 0 {
        return Err(Error::input("both domains must be nonempty"));
    }
    let mut e = vec![1.0 / n_x as f64; n_x];
    e.extend(core::iter::repeat_n(-1.0 / n_y as f64, n_y));
    k_sqrt.mul_vec(&e)
}

/// Ridge used when none is given: `1e-8 · trace(K) / order`.
pub fn default_ridge(k: &SymMatrix) -> f64 {
    1e-8 * k.trace() / k.order() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    pub l: SymMatrix,
    pub spec_x: KernelSpec,
    pub spec_y: KernelSpec,
    pub train_x: DomainData,
    pub train_y: DomainData,
    pub ridge_x: f64,
    pub ridge_y: f64,
    kx_inv_sqrt: SymMatrix,
    ky_inv_sqrt: SymMatrix,
}

impl KernelModel {
    /// Rebuilds the cached factors from retained data (used after loading).
    pub fn new(
        l: SymMatrix,
        spec_x: KernelSpec,
        spec_y: KernelSpec,
        train_x: DomainData,
        train_y: DomainData,
        ridge_x: f64,
        ridge_y: f64,
    ) -> Result<Self> {
        spec_x.validate()?;
        spec_y.validate()?;
        check_len(train_x.len() + train_y.len(), l.order())?;
        let kx_inv_sqrt = sqrt_pair_psd(&gram_sym(&spec_x, &train_x), ridge_x)?.1;
        let ky_inv_sqrt = sqrt_pair_psd(&gram_sym(&spec_y, &train_y), ridge_y)?.1;
        Ok(KernelModel {
            l,
            spec_x,
            spec_y,
            train_x,
            train_y,
            ridge_x,
            ridge_y,
            kx_inv_sqrt,
            ky_inv_sqrt,
        })
    }

    fn n_x(&self) -> usize {
        self.train_x.len()
    }

    /// `[K_x^{-1/2} k_x(X, x); 0]`.
    pub fn source_feature(&self, x: &[f64]) -> Result<Vec<f64>> {
        let kx = kernel_column(&self.spec_x, &self.train_x, x)?;
        let mut g = self.kx_inv_sqrt.mul_vec(&kx)?;
        g.resize(self.l.order(), 0.0);
        Ok(g)
    }

    /// `[0; K_y^{-1/2} k_y(Y, y)]`.
    pub fn target_feature(&self, y: &[f64]) -> Result<Vec<f64>> {
        let ky = kernel_column(&self.spec_y, &self.train_y, y)?;
        let mut g = vec![0.0; self.n_x()];
        g.extend(self.ky_inv_sqrt.mul_vec(&ky)?);
        Ok(g)
    }

    fn quad_of_difference(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        Ok(self.l.quad_form(&diff)?.max(0.0))
    }

    /// Squared cross-domain distance for arbitrary `(x, y)`.
    pub fn cross_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.quad_of_difference(&self.source_feature(x)?, &self.target_feature(y)?)
    }

    /// Squared distance between two target samples.
    pub fn target_distance(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.quad_of_difference(&self.target_feature(y)?, &self.target_feature(y_ref)?)
    }

    /// `L^{1/2}`, mapping features into a space where the learned distance is
    /// Euclidean.
    pub fn l_sqrt(&self) -> Result<SymMatrix> {
        sqrt_psd(&self.l, 0.0)
    }
}

/// Out-of-sample squared distance `cᵀ K^{-1/2} L K^{-1/2} c`.
pub fn cross_distance_oos(model: &KernelModel, x_new: &[f64], y_new: &[f64]) -> Result<f64> {
    model.cross_distance(x_new, y_new)
}

/// Learns `L` by running the projection solver on `K^{1/2} e_ij` and `K^{1/2} ē`.
/// `ridge = None` uses [`default_ridge`] per block.
pub fn fit_kernelized(
    x: &DomainData,
    y: &DomainData,
    cs: &ConstraintSet,
    config: &SolverConfig,
    spec_x: KernelSpec,
    spec_y: KernelSpec,
    ridge: Option<f64>,
) -> Result<(KernelModel, FitReport)> {
    spec_x.validate()?;
    spec_y.validate()?;
    check_constraints(x, y, cs)?;
    let kx = gram_sym(&spec_x, x);
    let ky = gram_sym(&spec_y, y);
    let ridge_x = ridge.unwrap_or_else(|| default_ridge(&kx));
    let ridge_y = ridge.unwrap_or_else(|| default_ridge(&ky));
    let (kx_half, kx_inv_sqrt) = sqrt_pair_psd(&kx, ridge_x)?;
    let (ky_half, ky_inv_sqrt) = sqrt_pair_psd(&ky, ridge_y)?;
    let k_sqrt = SymMatrix::block_diag(&kx_half, &ky_half);

    let n_x = x.len();
    let vectors = cs
        .constraints
        .iter()
        .map(|c| constraint_vector(&k_sqrt, n_x, c.source, c.target))
        .collect::<Result<Vec<_>>>()?;
    let problem = ProjectionProblem {
        order: n_x + y.len(),
        vectors,
        constraints: cs.constraints.clone(),
        xi0: cs.xi0.clone(),
        mmd: mmd_constraint_vector(&k_sqrt, n_x, y.len())?,
    };
    let (state, report) = solver::solve(&problem, config)?;
    let model = KernelModel {
        l: state.m,
        spec_x,
        spec_y,
        train_x: x.clone(),
        train_y: y.clone(),
        ridge_x,
        ridge_y,
        kx_inv_sqrt,
        ky_inv_sqrt,
    };
    Ok((model, report))
}

/// Materializes `M* = Q K^{-1/2} L K^{-1/2} Qᵀ` (linear kernels only).
pub fn recover_m(model: &KernelModel) -> Result<MetricModel> {
    if model.spec_x != KernelSpec::Linear || model.spec_y != KernelSpec::Linear {
        return Err(Error::Unsupported("recovering M needs linear kernels on both domains"));
    }
    let (dx, dy) = (model.train_x.dim(), model.train_y.dim());
    let xq = model.train_x.to_matrix().matmul(&model.kx_inv_sqrt.to_dense())?;
    let yq = model.train_y.to_matrix().matmul(&model.ky_inv_sqrt.to_dense())?;
    let n_x = model.n_x();
    let n = model.l.order();
    // B = Q K^{-1/2}, block diagonal
    let b = Matrix::from_fn(dx + dy, n, |r, c| match (r < dx, c < n_x) {
        (true, true) => xq.get(r, c),
        (false, false) => yq.get(r - dx, c - n_x),
        _ => 0.0,
    });
    let bl = b.matmul(&model.l.to_dense())?;
    let m = bl.matmul(&b.transpose())?;
    let sym = SymMatrix::from_dense(&m, 1e-8)?;
    // clip rounding noise so the model passes the PSD check
    let eig = eig_sym(&sym)?;
    let clipped = eig.map_values(|s| s.max(0.0));
    MetricModel::new(dx, dy, clipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{build_constraints, ConstraintOrientation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_domain(dim: usize, n: usize, n_lab: usize, rng: &mut ChaCha8Rng) -> DomainData {
        let data = (0..dim * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..n_lab).map(|i| (i % 2) as i64).collect();
        DomainData::new(dim, data, labels).unwrap()
    }

    #[test]
    fn gram_examples() {
        let eye = DomainData::new(3, alloc::vec![1., 0., 0., 0., 1., 0., 0., 0., 1.], alloc::vec![]).unwrap();
        assert_eq!(gram(&KernelSpec::Linear, &eye, &eye).unwrap(), Matrix::identity(3));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_domain(4, 12, 0, &mut rng);
        let g = gram(&KernelSpec::Rbf { gamma: 0.7 }, &a, &a).unwrap();
        for i in 0..12 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..12 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        let e = eig_sym(&SymMatrix::from_dense(&g, 0.0).unwrap()).unwrap();
        assert!(e.min_value() >= -1e-9);
        let b = random_domain(3, 2, 0, &mut rng);
        assert!(gram(&KernelSpec::Linear, &a, &b).is_err());
        assert!(gram(&KernelSpec::Rbf { gamma: -1.0 }, &a, &a).is_err());
    }

    #[test]
    fn block_kernel_examples() {
        let k = build_block_kernel(&Matrix::identity(2), &Matrix::identity(3)).unwrap();
        assert_eq!(k, SymMatrix::identity(5));
        let asym = Matrix::from_row_major(2, 2, alloc::vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(build_block_kernel(&asym, &Matrix::identity(1)).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_domain(3, 4, 0, &mut rng);
        let b = random_domain(2, 3, 0, &mut rng);
        let ka = gram(&KernelSpec::Rbf { gamma: 1.0 }, &a, &a).unwrap();
        let kb = gram(&KernelSpec::Rbf { gamma: 1.0 }, &b, &b).unwrap();
        let k = build_block_kernel(&ka, &kb).unwrap();
        for i in 0..4 {
            for j in 4..7 {
                assert_eq!(k.get(i, j), 0.0);
            }
        }
        let mut union: Vec<f64> = eig_sym(&SymMatrix::from_dense(&ka, 0.0).unwrap()).unwrap().values;
        union.extend(eig_sym(&SymMatrix::from_dense(&kb, 0.0).unwrap()).unwrap().values);
        union.sort_by(|a, b| b.total_cmp(a));
        let all = eig_sym(&k).unwrap().values;
        for (a, b) in all.iter().zip(&union) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constraint_vector_examples() {
        let v = constraint_vector(&SymMatrix::identity(4), 2, 1, 0).unwrap();
        assert_eq!(v, alloc::vec![0.0, 1.0, -1.0, 0.0]);
        let v = constraint_vector(&SymMatrix::scaled_identity(4, 2.0), 2, 0, 1).unwrap();
        assert_eq!(v, alloc::vec![2.0, 0.0, 0.0, -2.0]);
        assert!(constraint_vector(&SymMatrix::identity(4), 2, 2, 0).is_err());
        assert!(constraint_vector(&SymMatrix::identity(4), 2, 0, 2).is_err());

        let e = mmd_constraint_vector(&SymMatrix::identity(4), 2, 2).unwrap();
        assert_eq!(e, alloc::vec![0.5, 0.5, -0.5, -0.5]);
        let e = mmd_constraint_vector(&SymMatrix::identity(2), 1, 1).unwrap();
        assert_eq!(e, alloc::vec![1.0, -1.0]);
    }

    #[test]
    fn constraint_vectors_match_dense_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = Matrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let k = SymMatrix::from_dense(&b.matmul(&b.transpose()).unwrap(), 1e-12).unwrap();
        let ks = sqrt_psd(&k, 0.0).unwrap().to_dense();
        let e = [0.0, 1.0, 0.0, 0.0, -1.0];
        let want = ks.mul_vec(&e).unwrap();
        let got = constraint_vector(&sqrt_psd(&k, 0.0).unwrap(), 3, 1, 1).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
        let ebar = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, -0.5, -0.5];
        let want = ks.mul_vec(&ebar).unwrap();
        let got = mmd_constraint_vector(&sqrt_psd(&k, 0.0).unwrap(), 3, 2).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_kernelized_without_active_constraints_keeps_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_domain(2, 5, 2, &mut rng);
        let y = random_domain(2, 4, 0, &mut rng);
        let cs = ConstraintSet::empty(1.0, 2.0);
        let cfg = SolverConfig {
            t0: 1e6,
            ..SolverConfig::default()
        };
        let (model, report) = fit_kernelized(&x, &y, &cs, &cfg, KernelSpec::Linear, KernelSpec::Linear, None).unwrap();
        assert_eq!(model.l, SymMatrix::identity(9));
        assert_eq!(report.cycles_run, 1);
    }

    #[test]
    fn training_pairs_match_oos_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_domain(3, 8, 4, &mut rng);
        let y = random_domain(2, 7, 3, &mut rng);
        let cs = build_constraints(&x, &y, 0.3, 3.0, ConstraintOrientation::Standard).unwrap();
        for spec in [KernelSpec::Rbf { gamma: 0.8 }, KernelSpec::Linear] {
            let cfg = SolverConfig::default();
            let (model, _) = fit_kernelized(&x, &y, &cs, &cfg, spec, spec, None).unwrap();
            let kx = gram_sym(&spec, &x);
            let ky = gram_sym(&spec, &y);
            let ks = SymMatrix::block_diag(
                &sqrt_pair_psd(&kx, model.ridge_x).unwrap().0,
                &sqrt_pair_psd(&ky, model.ridge_y).unwrap().0,
            );
            for c in &cs.constraints {
                let v = constraint_vector(&ks, 8, c.source, c.target).unwrap();
                let train = model.l.quad_form(&v).unwrap();
                let oos = cross_distance_oos(&model, x.sample(c.source), y.sample(c.target)).unwrap();
                assert!((train - oos).abs() <= 1e-8 * train.max(1.0), "{train} vs {oos}");
            }
        }
    }

    #[test]
    fn sqrt_pair_squares_back_to_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_domain(3, 6, 0, &mut rng);
        let k = gram_sym(&KernelSpec::Rbf { gamma: 0.5 }, &a);
        let (half, _) = sqrt_pair_psd(&k, 0.0).unwrap();
        let sq = half.to_dense().matmul(&half.to_dense()).unwrap();
        let sq = SymMatrix::from_dense(&sq, 1e-10).unwrap();
        assert!(sq.frobenius_distance(&k) < 1e-10);
    }

    #[test]
    fn recover_m_identity_l_is_projection() {
        // orthonormal training columns: K = I, so M* = Q Qᵀ
        let x = DomainData::new(3, alloc::vec![1., 0., 0., 0., 1., 0.], alloc::vec![0]).unwrap();
        let y = DomainData::new(2, alloc::vec![0., 1.], alloc::vec![0]).unwrap();
        let model = KernelModel::new(
            SymMatrix::identity(3),
            KernelSpec::Linear,
            KernelSpec::Linear,
            x,
            y,
            0.0,
            0.0,
        )
        .unwrap();
        let m = recover_m(&model).unwrap();
        let want = SymMatrix::diagonal(&[1.0, 1.0, 0.0, 0.0, 1.0]);
        assert!(m.matrix().frobenius_distance(&want) < 1e-12);
    }

    #[test]
    fn recover_m_matches_oos_and_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_domain(3, 6, 4, &mut rng);
        let y = random_domain(2, 5, 2, &mut rng);
        let cs = build_constraints(&x, &y, 0.3, 3.0, ConstraintOrientation::Standard).unwrap();
        let (model, _) = fit_kernelized(
            &x,
            &y,
            &cs,
            &SolverConfig::default(),
            KernelSpec::Linear,
            KernelSpec::Linear,
            None,
        )
        .unwrap();
        let m = recover_m(&model).unwrap();
        assert!(eig_sym(m.matrix()).unwrap().min_value() >= -1e-8);
        for _ in 0..10 {
            let xn: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let yn: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = m.cross_distance(&xn, &yn).unwrap();
            let b = cross_distance_oos(&model, &xn, &yn).unwrap();
            assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} vs {b}");
        }
        let rbf = KernelModel {
            spec_x: KernelSpec::Rbf { gamma: 1.0 },
            ..model
        };
        assert!(matches!(recover_m(&rbf), Err(Error::Unsupported(_))));
    }

    #[test]
    fn far_target_reduces_to_source_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_domain(2, 6, 3, &mut rng);
        let y = random_domain(2, 5, 2, &mut rng);
        let cs = build_constraints(&x, &y, 0.3, 3.0, ConstraintOrientation::Standard).unwrap();
        let spec = KernelSpec::Rbf { gamma: 2.0 };
        let (model, _) = fit_kernelized(&x, &y, &cs, &SolverConfig::default(), spec, spec, None).unwrap();
        let xn = [0.2, -0.1];
        let far = [1e3, 1e3];
        let d = cross_distance_oos(&model, &xn, &far).unwrap();
        let gx = model.source_feature(&xn).unwrap();
        let pure = model.l.quad_form(&gx).unwrap();
        assert!((d - pure).abs() < 1e-12 * pure.max(1.0));
    }

    #[test]
    fn kernelized_fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_domain(2, 6, 4, &mut rng);
        let y = random_domain(3, 5, 2, &mut rng);
        let cs = build_constraints(&x, &y, 0.3, 3.0, ConstraintOrientation::Standard).unwrap();
        let spec = KernelSpec::Rbf { gamma: 1.0 };
        let cfg = SolverConfig::default();
        let a = fit_kernelized(&x, &y, &cs, &cfg, spec, spec, None).unwrap();
        let b = fit_kernelized(&x, &y, &cs, &cfg, spec, spec, None).unwrap();
        assert_eq!(a.0.l.packed(), b.0.l.packed());
    }
}
