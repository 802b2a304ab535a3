//! Comparison methods.

pub mod arc;
pub mod cca;

pub use arc::{arc_similarity, fit_arc, ArcConfig, ArcModel};
pub use cca::{fit_cca, fit_cca_labeled, pair_within_class, CcaModel};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{check_len, SymMatrix};
use crate::metric::{build_constraints, percentile, ConstraintOrientation, DomainData};
use crate::solver::{self, FitReport, ProjectionProblem, SolverConfig};

/// CCA projection followed by a single-domain LogDet metric in the shared
/// space, learned with the MLHD solver and the MMD term disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaItmlModel {
    pub cca: CcaModel,
    /// `d × d`
    pub a: SymMatrix,
}

impl CcaItmlModel {
    fn quad(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        Ok(self.a.quad_form(&diff)?.max(0.0))
    }

    pub fn cross_distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.quad(&self.cca.project_x(x)?, &self.cca.project_y(y)?)
    }

    pub fn target_distance(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.quad(&self.cca.project_y(y)?, &self.cca.project_y(y_ref)?)
    }
}

/// Fits CCA+ITML. The bounds are the `p_low`/`p_high` percentiles of squared
/// Euclidean distances between projected labeled pairs.
pub fn fit_cca_itml(
    x: &DomainData,
    y: &DomainData,
    cca: CcaModel,
    percentiles: (f64, f64),
    config: &SolverConfig,
) -> Result<(CcaItmlModel, FitReport)> {
    check_len(cca.mean_x.len(), x.dim())?;
    check_len(cca.mean_y.len(), y.dim())?;
    let d = cca.dim();
    let project = |data: &DomainData, f: &dyn Fn(&[f64]) -> Result<Vec<f64>>| -> Result<DomainData> {
        let mut out = Vec::with_capacity(d * data.n_labeled());
        for j in 0..data.n_labeled() {
            out.extend(f(data.sample(j))?);
        }
        DomainData::new(d, out, data.labels().to_vec())
    };
    let px = project(x, &|v| cca.project_x(v))?;
    let py = project(y, &|v| cca.project_y(v))?;

    let diff = |i: usize, j: usize| -> Vec<f64> { px.sample(i).iter().zip(py.sample(j)).map(|(a, b)| a - b).collect() };
    let mut dists: Vec<f64> = Vec::with_capacity(px.len() * py.len());
    for i in 0..px.len() {
        for j in 0..py.len() {
            dists.push(diff(i, j).iter().map(|v| v * v).sum());
        }
    }
    if dists.is_empty() {
        return Err(Error::input("no labeled cross-domain pairs"));
    }
    dists.sort_by(f64::total_cmp);
    let u = percentile(&dists, percentiles.0);
    let mut l = percentile(&dists, percentiles.1);
    if !(u > 0.0) {
        return Err(Error::input("lower distance percentile is zero"));
    }
    if l <= u {
        l = u * (1.0 + 1e-6);
    }
    let cs = build_constraints(&px, &py, u, l, ConstraintOrientation::Standard)?;
    let problem = ProjectionProblem {
        order: d,
        vectors: cs.constraints.iter().map(|c| diff(c.source, c.target)).collect(),
        constraints: cs.constraints.clone(),
        xi0: cs.xi0.clone(),
        mmd: vec![0.0; d],
    };
    let (state, report) = solver::solve(&problem, config)?;
    Ok((CcaItmlModel { cca, a: state.m }, report))
}
