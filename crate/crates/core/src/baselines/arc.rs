//! Asymmetric regularized cross-domain transformation.
//!
//! Learns a bilinear similarity `s(x, y) = xᵀWy` by minimizing
//!
//! ```text
//! ‖W‖²_F + λ ( Σ_same max(0, l − s)² + Σ_diff max(0, s − u)² )
//! ```
//!
//! with full-batch gradient descent.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{check_len, Matrix};
use crate::metric::{ConstraintSet, DomainData, Relation};

#[derive(Debug, Clone, PartialEq)]
pub struct ArcConfig {
    pub lambda: f64,
    /// Similarity floor for same-class pairs.
    pub l: f64,
    /// Similarity ceiling for different-class pairs.
    pub u: f64,
    pub steps: usize,
    /// Initial step size.
    pub rate: f64,
    /// Halve the step until the objective decreases sufficiently.
    pub backtracking: bool,
}

impl Default for ArcConfig {
    fn default() -> Self {
        ArcConfig {
            lambda: 1.0,
            l: 1.0,
            u: -1.0,
            steps: 1000,
            rate: 0.1,
            backtracking: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcModel {
    /// `dim_x × dim_y`
    pub w: Matrix,
    pub lambda: f64,
    pub u: f64,
    pub l: f64,
}

impl ArcModel {
    pub fn similarity(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        arc_similarity(self, x, y)
    }
}

/// `xᵀWy`.
pub fn arc_similarity(model: &ArcModel, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(model.w.rows(), x.len())?;
    let wy = model.w.mul_vec(y)?;
    Ok(x.iter().zip(&wy).map(|(a, b)| a * b).sum())
}

/// Training pairs as `(x, y, same)`.
#[derive(Debug, Clone)]
pub struct ArcProblem {
    pub pairs: Vec<(Vec<f64>, Vec<f64>, bool)>,
    pub dim_x: usize,
    pub dim_y: usize,
}

impl ArcProblem {
    pub fn from_constraints(x: &DomainData, y: &DomainData, cs: &ConstraintSet) -> Result<Self> {
        if cs.is_empty() {
            return Err(Error::input("ARC needs at least one labeled pair"));
        }
        let pairs = cs
            .constraints
            .iter()
            .map(|c| {
                if c.source >= x.len() || c.target >= y.len() {
                    return Err(Error::input(format!("pair ({}, {}) out of range", c.source, c.target)));
                }
                Ok((
                    x.sample(c.source).to_vec(),
                    y.sample(c.target).to_vec(),
                    c.relation == Relation::Same,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ArcProblem {
            pairs,
            dim_x: x.dim(),
            dim_y: y.dim(),
        })
    }

    fn residual(&self, s: f64, same: bool, cfg: &ArcConfig) -> f64 {
        if same {
            (cfg.l - s).max(0.0)
        } else {
            (s - cfg.u).max(0.0)
        }
    }

    fn similarity(w: &Matrix, x: &[f64], y: &[f64]) -> f64 {
        (0..x.len())
            .map(|i| x[i] * w.row(i).iter().zip(y).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn objective(&self, w: &Matrix, cfg: &ArcConfig) -> f64 {
        let reg: f64 = w.as_slice().iter().map(|v| v * v).sum();
        let loss: f64 = self
            .pairs
            .iter()
            .map(|(x, y, same)| {
                let r = self.residual(Self::similarity(w, x, y), *same, cfg);
                r * r
            })
            .sum();
        reg + cfg.lambda * loss
    }

    pub fn gradient(&self, w: &Matrix, cfg: &ArcConfig) -> Matrix {
        let mut g = Matrix::from_fn(w.rows(), w.cols(), |i, j| 2.0 * w.get(i, j));
        for (x, y, same) in &self.pairs {
            let r = self.residual(Self::similarity(w, x, y), *same, cfg);
            if r == 0.0 {
                continue;
            }
            let c = if *same { -2.0 } else { 2.0 } * cfg.lambda * r;
            for (i, &xi) in x.iter().enumerate() {
                for (j, &yj) in y.iter().enumerate() {
                    g.set(i, j, g.get(i, j) + c * xi * yj);
                }
            }
        }
        g
    }
}

fn validate(cfg: &ArcConfig) -> Result<()> {
    if !(cfg.lambda >= 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::config(format!(
            "ARC lambda must be nonnegative, got {}",
            cfg.lambda
        )));
    }
    if !(cfg.rate > 0.0 && cfg.rate.is_finite()) {
        return Err(Error::config(format!("ARC rate must be positive, got {}", cfg.rate)));
    }
    if !(cfg.l.is_finite() && cfg.u.is_finite()) {
        return Err(Error::config("ARC bounds must be finite"));
    }
    Ok(())
}

/// Descends from `W = 0`. Returns the model and the objective after each
/// accepted step (first entry is the starting objective).
pub fn fit_arc_problem(problem: &ArcProblem, cfg: &ArcConfig) -> Result<(ArcModel, Vec<f64>)> {
    validate(cfg)?;
    let mut w = Matrix::zeros(problem.dim_x, problem.dim_y);
    let mut f = problem.objective(&w, cfg);
    let start = f;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(f);
    let mut rate = cfg.rate;
    for step in 0..cfg.steps {
        let g = problem.gradient(&w, cfg);
        let gsq: f64 = g.as_slice().iter().map(|v| v * v).sum();
        if gsq <= 1e-24 * (1.0 + f * f) {
            break;
        }
        let take = |rate: f64| Matrix::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j) - rate * g.get(i, j));
        if cfg.backtracking {
            let mut accepted = None;
            for _ in 0..60 {
                let cand = take(rate);
                let fc = problem.objective(&cand, cfg);
                if fc <= f - 0.5 * rate * gsq {
                    accepted = Some((cand, fc));
                    break;
                }
                rate *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            w = cand;
            f = fc;
            rate *= 1.5;
        } else {
            w = take(rate);
            f = problem.objective(&w, cfg);
            if !f.is_finite() || f > 1e6 * (start + 1.0) {
                return Err(Error::Divergence { step, objective: f });
            }
        }
        trace.push(f);
    }
    Ok((
        ArcModel {
            w,
            lambda: cfg.lambda,
            u: cfg.u,
            l: cfg.l,
        },
        trace,
    ))
}

pub fn fit_arc(x: &DomainData, y: &DomainData, cs: &ConstraintSet, cfg: &ArcConfig) -> Result<ArcModel> {
    let problem = ArcProblem::from_constraints(x, y, cs)?;
    Ok(fit_arc_problem(&problem, cfg)?.0)
}
