//! Domains, the cross-domain quadratic-form metric, the linear MMD statistic,
//! LogDet divergences and pair-constraint generation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, check_len, eig_sym, Matrix, SymMatrix};

/// Class identifier shared by both domains.
pub type Label = i64;

/// One domain's samples, stored one sample per contiguous column.
///
/// The first `labels.len()` samples are labeled; the rest are unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainData {
    dim: usize,
    data: Vec<f64>,
    labels: Vec<Label>,
}

impl DomainData {
    pub fn new(dim: usize, data: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("feature dimension must be positive"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "sample buffer of length {} does not hold whole samples of dimension {dim}",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let n = data.len() / dim;
        if labels.len() > n {
            return Err(Error::input(format!("{} labels for {n} samples", labels.len())));
        }
        Ok(DomainData { dim, data, labels })
    }

    /// Builds from per-sample optional labels, moving labeled samples to the
    /// front (stable). Returns the data and `order`, where `order[k]` is the
    /// original index of stored sample `k`.
    pub fn from_unordered(dim: usize, samples: &[Vec<f64>], labels: &[Option<Label>]) -> Result<(Self, Vec<usize>)> {
        check_len(samples.len(), labels.len())?;
        let mut order: Vec<usize> = (0..samples.len()).filter(|&i| labels[i].is_some()).collect();
        order.extend((0..samples.len()).filter(|&i| labels[i].is_none()));
        let mut data = Vec::with_capacity(samples.len() * dim);
        for &i in &order {
            check_len(dim, samples[i].len())?;
            data.extend_from_slice(&samples[i]);
        }
        let lab = order.iter().map_while(|&i| labels[i]).collect();
        Ok((DomainData::new(dim, data, lab)?, order))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn n_labeled(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn sample(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn samples(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, j: usize) -> Option<Label> {
        self.labels.get(j).copied()
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for s in self.samples() {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<Label> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// New domain made of the given samples; the first `n_labeled` of `picks`
    /// keep their labels, the rest become unlabeled.
    pub fn select(&self, picks: &[usize], n_labeled: usize) -> Result<DomainData> {
        let mut data = Vec::with_capacity(picks.len() * self.dim);
        let mut labels = Vec::with_capacity(n_labeled);
        for (k, &i) in picks.iter().enumerate() {
            data.extend_from_slice(self.sample(i));
            if k < n_labeled {
                labels.push(
                    self.label(i)
                        .ok_or_else(|| Error::input(format!("sample {i} is unlabeled")))?,
                );
            }
        }
        DomainData::new(self.dim, data, labels)
    }

    /// Samples as a `dim × N` matrix.
    pub fn to_matrix(&self) -> Matrix {
        let n = self.len();
        Matrix::from_fn(self.dim, n, |i, j| self.data[j * self.dim + i])
    }
}

/// The learned PSD matrix over the concatenated `dim_x + dim_y` space.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    dim_x: usize,
    dim_y: usize,
    m: SymMatrix,
}

impl MetricModel {
    /// Validates the order and that `m` is PSD within `1e-8 · σ_max`.
    pub fn new(dim_x: usize, dim_y: usize, m: SymMatrix) -> Result<Self> {
        check_len(dim_x + dim_y, m.order())?;
        let eig = eig_sym(&m)?;
        if eig.min_value() < -linalg::PSD_TOL * eig.max_value().abs() {
            return Err(Error::Indefinite {
                min_eigenvalue: eig.min_value(),
            });
        }
        Ok(MetricModel { dim_x, dim_y, m })
    }

    pub fn identity(dim_x: usize, dim_y: usize) -> Self {
        MetricModel {
            dim_x,
            dim_y,
            m: SymMatrix::identity(dim_x + dim_y),
        }
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.m
    }

    pub fn make_z(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim_x, x.len())?;
        check_len(self.dim_y, y.len())?;
        Ok(make_z(x, y))
    }

    /// Squared cross-domain distance `d²(x, y)`.
    pub fn cross_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        squared_distance(self, &self.make_z(x, y)?)
    }

    /// Squared distance between two target samples, using the target block of
    /// `M` (the quadratic form of `[0; y - y']`).
    pub fn target_distance(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        check_len(self.dim_y, y.len())?;
        check_len(self.dim_y, y_ref.len())?;
        let dx = self.dim_x;
        let diff: Vec<f64> = y.iter().zip(y_ref).map(|(a, b)| a - b).collect();
        let mut s = 0.0;
        for i in 0..self.dim_y {
            for j in 0..self.dim_y {
                s += diff[i] * self.m.get(dx + i, dx + j) * diff[j];
            }
        }
        Ok(s.max(0.0))
    }
}

/// `z = [x; -y]`.
pub fn make_z(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().copied().chain(y.iter().map(|v| -v)).collect()
}

/// `zᵀ M z`, with rounding below zero clamped.
pub fn squared_distance(model: &MetricModel, z: &[f64]) -> Result<f64> {
    Ok(model.m.quad_form(z)?.max(0.0))
}

/// Concatenation of the source mean and the negated target mean, over every
/// sample (labeled and unlabeled).
pub fn mmd_vector(x: &DomainData, y: &DomainData) -> Vec<f64> {
    make_z(&x.mean(), &y.mean())
}

/// Linear-kernel squared MMD `z̄ᵀ M z̄`.
pub fn mmd_sq(model: &MetricModel, zbar: &[f64]) -> Result<f64> {
    squared_distance(model, zbar)
}

/// LogDet divergence `tr(M M₀⁻¹) − log det(M M₀⁻¹) − n`.
///
/// Evaluated through the eigenvalues of `M₀^{-1/2} M M₀^{-1/2}`.
pub fn logdet_div_matrix(m: &SymMatrix, m0: &SymMatrix) -> Result<f64> {
    check_len(m0.order(), m.order())?;
    let e0 = eig_sym(m0)?;
    if !(e0.min_value() > 0.0) {
        return Err(Error::Singular {
            min_eigenvalue: e0.min_value(),
        });
    }
    let w = e0.map_values(|s| 1.0 / libm::sqrt(s)).to_dense();
    let inner = w.matmul(&m.to_dense())?.matmul(&w)?;
    let rel = eig_sym(&SymMatrix::from_dense(&inner, 1e-8)?)?;
    if !(rel.min_value() > 0.0) {
        return Err(Error::Singular {
            min_eigenvalue: rel.min_value(),
        });
    }
    let d: f64 = rel.values.iter().map(|&s| s - libm::log(s) - 1.0).sum();
    Ok(d.max(0.0))
}

/// Scalar LogDet divergence `v/v₀ − log(v/v₀) − 1`.
#[inline]
pub fn logdet_div_scalar(v: f64, v0: f64) -> f64 {
    let r = v / v0;
    r - libm::log(r) - 1.0
}

/// LogDet divergence between diagonal matrices `diag(v)` and `diag(v0)`.
pub fn logdet_div_vector(v: &[f64], v0: &[f64]) -> Result<f64> {
    check_len(v0.len(), v.len())?;
    if v.iter().chain(v0).any(|&a| !(a > 0.0)) {
        return Err(Error::input("LogDet divergence needs strictly positive entries"));
    }
    Ok(v.iter().zip(v0).map(|(&a, &b)| logdet_div_scalar(a, b)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Same,
    Different,
}

/// Which side of the slack the squared distance must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bound {
    /// `d² ≤ ξ`
    Upper,
    /// `d² ≥ ξ`
    Lower,
}

impl Bound {
    /// `+1` for upper bounds, `-1` for lower bounds.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Bound::Upper => 1.0,
            Bound::Lower => -1.0,
        }
    }
}

/// How pair relations map to bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintOrientation {
    /// Same-class pairs get `d² ≤ ξ` (ξ₀ = u), different-class pairs `d² ≥ ξ`
    /// (ξ₀ = l).
    #[default]
    Standard,
    /// Same-class pairs get `d² ≥ ξ` (ξ₀ = l), different-class pairs `d² ≤ ξ`
    /// (ξ₀ = u). Kept for auditing against the printed inequalities.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairConstraint {
    /// Index of a labeled source sample.
    pub source: usize,
    /// Index of a labeled target sample.
    pub target: usize,
    pub relation: Relation,
    pub bound: Bound,
    pub slack_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub constraints: Vec<PairConstraint>,
    pub xi0: Vec<f64>,
    pub u: f64,
    pub l: f64,
}

impl ConstraintSet {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn empty(u: f64, l: f64) -> Self {
        ConstraintSet {
            constraints: Vec::new(),
            xi0: Vec::new(),
            u,
            l,
        }
    }
}

/// One constraint per (labeled source, labeled target) pair, ordered source
/// major, with slack index equal to position.
pub fn build_constraints(
    x: &DomainData,
    y: &DomainData,
    u: f64,
    l: f64,
    orientation: ConstraintOrientation,
) -> Result<ConstraintSet> {
    if !(u > 0.0 && u < l && l.is_finite()) {
        return Err(Error::config(format!("bounds need 0 < u < l, got u={u}, l={l}")));
    }
    if x.n_labeled() == 0 || y.n_labeled() == 0 {
        return Err(Error::input("both domains need at least one labeled sample"));
    }
    let mut constraints = Vec::with_capacity(x.n_labeled() * y.n_labeled());
    let mut xi0 = Vec::with_capacity(constraints.capacity());
    for (i, &lx) in x.labels().iter().enumerate() {
        for (j, &ly) in y.labels().iter().enumerate() {
            let relation = if lx == ly { Relation::Same } else { Relation::Different };
            let bound = match (orientation, relation) {
                (ConstraintOrientation::Standard, Relation::Same)
                | (ConstraintOrientation::Literal, Relation::Different) => Bound::Upper,
                _ => Bound::Lower,
            };
            xi0.push(match bound {
                Bound::Upper => u,
                Bound::Lower => l,
            });
            constraints.push(PairConstraint {
                source: i,
                target: j,
                relation,
                bound,
                slack_index: constraints.len(),
            });
        }
    }
    Ok(ConstraintSet { constraints, xi0, u, l })
}

/// Percentile with linear interpolation between order statistics.
pub(crate) fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Bounds `(u, l)` from percentiles of the squared Euclidean cross-domain
/// distances `‖z_ij‖²` over all labeled pairs.
pub fn estimate_bounds(x: &DomainData, y: &DomainData, p_low: f64, p_high: f64) -> Result<(f64, f64)> {
    if !(p_low > 0.0 && p_low < p_high && p_high < 100.0) {
        return Err(Error::config(format!(
            "percentiles need 0 < low < high < 100, got {p_low}, {p_high}"
        )));
    }
    let mut d = Vec::with_capacity(x.n_labeled() * y.n_labeled());
    for i in 0..x.n_labeled() {
        for j in 0..y.n_labeled() {
            let xs = x.sample(i);
            let ys = y.sample(j);
            d.push(xs.iter().map(|a| a * a).sum::<f64>() + ys.iter().map(|b| b * b).sum::<f64>());
        }
    }
    if d.is_empty() {
        return Err(Error::input("no labeled cross-domain pairs"));
    }
    d.sort_by(f64::total_cmp);
    let u = percentile(&d, p_low);
    let mut l = percentile(&d, p_high);
    if !(u > 0.0) {
        return Err(Error::input("lower distance percentile is zero"));
    }
    if l <= u {
        l = u * (1.0 + 1e-6);
    }
    Ok((u, l))
}

/// Factors `M ≈ W Wᵀ` with `W = V_{:, :d_c} Σ^{1/2}` and splits `W` into the
/// source rows `W_x` and target rows `W_y`.
pub fn embed_common_space(model: &MetricModel, d_c: usize) -> Result<(Matrix, Matrix)> {
    let eig = eig_sym(&model.m)?;
    let floor = linalg::EIG_FLOOR * eig.max_value();
    let positive = eig.values.iter().filter(|&&s| s > floor).count();
    if d_c == 0 || d_c > positive {
        return Err(Error::config(format!(
            "common-space dimension {d_c} must be in 1..={positive} (positive eigenvalues)"
        )));
    }
    let scale: Vec<f64> = eig.values[..d_c].iter().map(|&s| libm::sqrt(s)).collect();
    let w = |i: usize, k: usize| eig.vectors.get(i, k) * scale[k];
    let dx = model.dim_x;
    Ok((
        Matrix::from_fn(dx, d_c, &w),
        Matrix::from_fn(model.dim_y, d_c, |i, k| w(dx + i, k)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dom(dim: usize, rows: &[&[f64]], labels: &[Label]) -> DomainData {
        DomainData::new(dim, rows.concat(), labels.to_vec()).unwrap()
    }

    fn random_psd(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let b = Matrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
        SymMatrix::from_dense(&b.matmul(&b.transpose()).unwrap(), 1e-12).unwrap()
    }

    #[test]
    fn make_z_examples() {
        assert_eq!(make_z(&[1.0, 0.0], &[1.0]), vec![1.0, 0.0, -1.0]);
        assert_eq!(make_z(&[0.0, 0.0], &[0.0]), vec![0.0, 0.0, -0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z = make_z(&x, &y);
        for i in 0..4 {
            assert_eq!(z[i], x[i]);
        }
        for j in 0..3 {
            assert_eq!(z[4 + j], -y[j]);
        }
        let model = MetricModel::identity(4, 3);
        assert!(matches!(model.make_z(&x, &x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn squared_distance_examples() {
        let model = MetricModel::identity(2, 1);
        assert_eq!(model.cross_distance(&[1.0, 0.0], &[1.0]).unwrap(), 2.0);
        let zero = MetricModel::new(2, 1, SymMatrix::zeros(3)).unwrap();
        assert_eq!(zero.cross_distance(&[3.0, 1.0], &[-2.0]).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_psd(5, 5, &mut rng);
        let model = MetricModel::new(3, 2, m.clone()).unwrap();
        let z: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dense = m.to_dense();
        let mut want = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                want += z[i] * dense.get(i, j) * z[j];
            }
        }
        assert!((squared_distance(&model, &z).unwrap() - want).abs() < 1e-12);
        assert!(matches!(
            squared_distance(&model, &z[..4]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mmd_examples() {
        let x = dom(2, &[&[1.0, 1.0], &[-1.0, -1.0]], &[]);
        let y = dom(1, &[&[3.0], &[-3.0]], &[]);
        assert_eq!(mmd_vector(&x, &y), vec![0.0, 0.0, -0.0]);
        let x = dom(2, &[&[1.0, 1.0]], &[]);
        let y = dom(1, &[&[2.0]], &[]);
        let zbar = mmd_vector(&x, &y);
        assert_eq!(zbar, vec![1.0, 1.0, -2.0]);
        assert_eq!(mmd_sq(&MetricModel::identity(2, 1), &zbar).unwrap(), 6.0);
        assert_eq!(mmd_sq(&MetricModel::identity(2, 1), &[0.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn mmd_vector_matches_column_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..3 * 11).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ys: Vec<f64> = (0..2 * 7).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = DomainData::new(3, xs.clone(), vec![]).unwrap();
        let y = DomainData::new(2, ys.clone(), vec![]).unwrap();
        let zbar = mmd_vector(&x, &y);
        for r in 0..3 {
            let m: f64 = (0..11).map(|c| xs[c * 3 + r]).sum::<f64>() / 11.0;
            assert!((zbar[r] - m).abs() < 1e-12);
        }
        for r in 0..2 {
            let m: f64 = (0..7).map(|c| ys[c * 2 + r]).sum::<f64>() / 7.0;
            assert!((zbar[3 + r] + m).abs() < 1e-12);
        }
    }

    #[test]
    fn logdet_divergence_examples() {
        assert!(logdet_div_matrix(&SymMatrix::identity(3), &SymMatrix::identity(3)).unwrap() < 1e-15);
        let d = logdet_div_matrix(&SymMatrix::scaled_identity(2, 2.0), &SymMatrix::identity(2)).unwrap();
        assert!((d - (4.0 - 2.0 * core::f64::consts::LN_2 - 2.0)).abs() < 1e-12);
        assert!(matches!(
            logdet_div_matrix(&SymMatrix::identity(2), &SymMatrix::diagonal(&[1.0, 0.0])),
            Err(Error::Singular { .. })
        ));

        assert_eq!(logdet_div_vector(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        let d = logdet_div_vector(&[2.0], &[1.0]).unwrap();
        assert!((d - (1.0 - core::f64::consts::LN_2)).abs() < 1e-15);
        assert!(logdet_div_vector(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn logdet_vector_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let v: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..5.0)).collect();
        let v0: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..5.0)).collect();
        let mut want = 0.0;
        for i in 0..9 {
            want += v[i] / v0[i] - libm::log(v[i] / v0[i]) - 1.0;
        }
        assert!((logdet_div_vector(&v, &v0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn build_constraints_all_same() {
        let x = dom(1, &[&[0.0], &[1.0]], &[3, 3]);
        let y = dom(1, &[&[0.0], &[1.0]], &[3, 3]);
        let cs = build_constraints(&x, &y, 0.5, 2.0, ConstraintOrientation::Standard).unwrap();
        assert_eq!(cs.len(), 4);
        assert_eq!(cs.xi0, vec![0.5; 4]);
        assert!(cs
            .constraints
            .iter()
            .all(|c| c.relation == Relation::Same && c.bound == Bound::Upper));
    }

    #[test]
    fn build_constraints_single_different() {
        let x = dom(1, &[&[0.0]], &[0]);
        let y = dom(1, &[&[0.0]], &[1]);
        let cs = build_constraints(&x, &y, 0.5, 2.0, ConstraintOrientation::Standard).unwrap();
        assert_eq!(cs.len(), 1);
        assert_eq!(cs.constraints[0].relation, Relation::Different);
        assert_eq!(cs.constraints[0].bound, Bound::Lower);
        assert_eq!(cs.xi0, vec![2.0]);

        let lit = build_constraints(&x, &y, 0.5, 2.0, ConstraintOrientation::Literal).unwrap();
        assert_eq!(lit.constraints[0].bound, Bound::Upper);
        assert_eq!(lit.xi0, vec![0.5]);
    }

    #[test]
    fn build_constraints_rejects_bad_bounds() {
        let x = dom(1, &[&[0.0]], &[0]);
        let y = dom(1, &[&[0.0]], &[1]);
        assert!(matches!(
            build_constraints(&x, &y, 2.0, 2.0, ConstraintOrientation::Standard),
            Err(Error::InvalidConfig(_))
        ));
        let unl = dom(1, &[&[0.0]], &[]);
        assert!(build_constraints(&x, &unl, 1.0, 2.0, ConstraintOrientation::Standard).is_err());
    }

    #[test]
    fn build_constraints_tallies_match_enumeration() {
        let xs: Vec<&[f64]> = (0..20).map(|_| &[0.0][..]).collect();
        let xl: Vec<Label> = (0..20).map(|i| (i % 2) as Label).collect();
        let ys: Vec<&[f64]> = (0..5).map(|_| &[0.0][..]).collect();
        let yl: Vec<Label> = vec![0, 1, 0, 1, 0];
        let x = dom(1, &xs, &xl);
        let y = dom(1, &ys, &yl);
        let cs = build_constraints(&x, &y, 1.0, 2.0, ConstraintOrientation::Standard).unwrap();
        let mut same = 0;
        let mut diff = 0;
        for a in &xl {
            for b in &yl {
                if a == b {
                    same += 1
                } else {
                    diff += 1
                }
            }
        }
        assert_eq!(cs.len(), 100);
        assert_eq!(
            cs.constraints.iter().filter(|c| c.relation == Relation::Same).count(),
            same
        );
        assert_eq!(
            cs.constraints
                .iter()
                .filter(|c| c.relation == Relation::Different)
                .count(),
            diff
        );
        for (k, c) in cs.constraints.iter().enumerate() {
            assert_eq!(c.slack_index, k);
            assert_eq!(c.relation == Relation::Same, xl[c.source] == yl[c.target]);
        }
    }

    #[test]
    fn estimate_bounds_degenerate_cases() {
        let x = dom(1, &[&[1.0], &[-1.0]], &[0, 1]);
        let y = dom(1, &[&[1.0]], &[0]);
        let (u, l) = estimate_bounds(&x, &y, 5.0, 95.0).unwrap();
        assert_eq!(u, 2.0);
        assert_eq!(l, 2.0 * (1.0 + 1e-6));

        let x = dom(1, &[&[1.0]], &[0]);
        let (u, l) = estimate_bounds(&x, &y, 5.0, 95.0).unwrap();
        assert!(u < l);
        assert_eq!(u, 2.0);

        let unl = dom(1, &[&[1.0]], &[]);
        assert!(estimate_bounds(&x, &unl, 5.0, 95.0).is_err());
        assert!(estimate_bounds(&x, &y, 50.0, 50.0).is_err());
    }

    #[test]
    fn estimate_bounds_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (0..2 * 13).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..3 * 9).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x = DomainData::new(2, xs, (0..13).map(|i| i % 2).collect()).unwrap();
        let y = DomainData::new(3, ys, (0..9).map(|i| i % 2).collect()).unwrap();
        let mut d = Vec::new();
        for i in 0..13 {
            for j in 0..9 {
                let z = make_z(x.sample(i), y.sample(j));
                d.push(z.iter().map(|v| v * v).sum::<f64>());
            }
        }
        d.sort_by(f64::total_cmp);
        // numpy-style linear interpolation at rank p/100·(n−1)
        let rank = |p: f64| {
            let r = p / 100.0 * (d.len() as f64 - 1.0);
            let k = r as usize;
            d[k] * (1.0 - (r - k as f64)) + d[k + 1] * (r - k as f64)
        };
        let (u, l) = estimate_bounds(&x, &y, 5.0, 95.0).unwrap();
        assert!((u - rank(5.0)).abs() < 1e-12);
        assert!((l - rank(95.0)).abs() < 1e-12);
    }

    #[test]
    fn embed_examples() {
        let (wx, wy) = embed_common_space(&MetricModel::identity(1, 1), 2).unwrap();
        let xx: f64 = (0..2).map(|k| wx.get(0, k) * wx.get(0, k)).sum();
        let yy: f64 = (0..2).map(|k| wy.get(0, k) * wy.get(0, k)).sum();
        let xy: f64 = (0..2).map(|k| wx.get(0, k) * wy.get(0, k)).sum();
        assert!((xx - 1.0).abs() < 1e-10 && (yy - 1.0).abs() < 1e-10 && xy.abs() < 1e-10);

        let v = [0.5, -1.0, 2.0];
        let m = SymMatrix::from_lower_fn(3, |i, j| v[i] * v[j]);
        let model = MetricModel::new(2, 1, m.clone()).unwrap();
        let (wx, wy) = embed_common_space(&model, 1).unwrap();
        let w = [wx.get(0, 0), wx.get(1, 0), wy.get(0, 0)];
        for i in 0..3 {
            for j in 0..3 {
                assert!((w[i] * w[j] - m.get(i, j)).abs() < 1e-10);
            }
        }
        assert!(embed_common_space(&model, 2).is_err());
    }

    #[test]
    fn embed_blocks_reassemble_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = random_psd(5, 5, &mut rng);
        let model = MetricModel::new(2, 3, m.clone()).unwrap();
        let (wx, wy) = embed_common_space(&model, 5).unwrap();
        let w = Matrix::from_fn(5, 5, |i, k| if i < 2 { wx.get(i, k) } else { wy.get(i - 2, k) });
        let wwt = w.matmul(&w.transpose()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((wwt.get(i, j) - m.get(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn from_unordered_moves_labeled_first() {
        let samples = vec![vec![1.0], vec![2.0], vec![3.0]];
        let labels = vec![None, Some(4), Some(5)];
        let (d, order) = DomainData::from_unordered(1, &samples, &labels).unwrap();
        assert_eq!(order, vec![1, 2, 0]);
        assert_eq!(d.labels(), &[4, 5]);
        assert_eq!(d.sample(2), &[1.0]);
    }
}
