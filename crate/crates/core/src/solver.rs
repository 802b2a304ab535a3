//! Cyclic Bregman projections for the relaxed LogDet problem
//!
//! ```text
//! min  LogDet(M, I) + λ₁·LogDet(t, t₀) + λ₂·LogDet(ξ, ξ₀)
//! s.t. zᵢⱼᵀ M zᵢⱼ ≤ ξᵢⱼ  (upper-bound pairs)
//!      zᵢⱼᵀ M zᵢⱼ ≥ ξᵢⱼ  (lower-bound pairs)
//!      z̄ᵀ M z̄ ≤ t
//! ```
//!
//! Each step projects the current `(M, slack)` onto a single constraint. With
//! `p = vᵀMv` and `δ = ±1` for upper/lower bounds, the equality projection
//! under weight `λ` has the closed-form multiplier
//!
//! ```text
//! α* = δ · λ/(1+λ) · (1/p − 1/ξ)
//! ```
//!
//! which is clamped by the constraint's accumulated dual, `α = min(dual, α*)`,
//! so that a constraint can release earlier corrections once it is satisfied.
//! The update is then
//!
//! ```text
//! M ← M + δα/(1 − δαp) · (Mv)(Mv)ᵀ
//! ξ ← λξ/(λ + δαξ)
//! dual ← dual − α
//! ```
//!
//! Both `1 − δαp` and `λ + δαξ` stay positive for any admissible `α`, so `M`
//! remains positive definite and the slack positive.

use alloc::vec::Vec;
use alloc::{format, vec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{logdet_psd, SymMatrix};
use crate::metric::{
    logdet_div_scalar, make_z, mmd_vector, Bound, ConstraintSet, DomainData, MetricModel, PairConstraint,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the MMD slack divergence.
    pub lambda1: f64,
    /// Weight of the pair-slack divergence.
    pub lambda2: f64,
    /// Initial MMD slack.
    pub t0: f64,
    pub max_cycles: usize,
    /// Relative Frobenius change of `M` per cycle below which the fit stops.
    pub tol: f64,
    pub seed: u64,
    /// Visit constraints in a fresh seeded random order each cycle instead of
    /// ascending slack index.
    pub shuffle: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda1: 1.0,
            lambda2: 1.0,
            t0: 1e-3,
            max_cycles: 50,
            tol: 1e-5,
            seed: 0,
            shuffle: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("lambda1", self.lambda1)?;
        positive("lambda2", self.lambda2)?;
        positive("t0", self.t0)?;
        positive("tol", self.tol)?;
        if self.tol >= 1.0 {
            return Err(Error::config("tol must be below 1"));
        }
        if self.max_cycles == 0 {
            return Err(Error::config("max_cycles must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub m: SymMatrix,
    /// Pair slacks, indexed by slack index.
    pub xi: Vec<f64>,
    /// MMD slack.
    pub t: f64,
    /// Pair duals, nonnegative.
    pub beta: Vec<f64>,
    /// MMD dual, nonnegative.
    pub zeta: f64,
}

impl SolverState {
    pub fn initial(order: usize, xi0: &[f64], t0: f64) -> Self {
        SolverState {
            m: SymMatrix::identity(order),
            xi: xi0.to_vec(),
            t: t0,
            beta: vec![0.0; xi0.len()],
            zeta: 0.0,
        }
    }
}

/// Outcome of one projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Multiplier actually applied.
    pub multiplier: f64,
    /// Multiplier of the unclamped equality projection.
    pub unclamped: f64,
}

impl Projection {
    const NONE: Projection = Projection {
        multiplier: 0.0,
        unclamped: 0.0,
    };

    pub fn is_active(&self) -> bool {
        self.multiplier != 0.0
    }

    /// True when the equality projection was applied, so the constraint now
    /// holds with equality.
    pub fn reached_equality(&self) -> bool {
        self.is_active() && self.multiplier == self.unclamped
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub cycles_run: usize,
    pub final_objective: f64,
    /// Largest constraint violation (pairs and MMD) at exit.
    pub max_violation: f64,
    /// `z̄ᵀ z̄`, the MMD statistic under the identity.
    pub mmd_initial: f64,
    pub mmd_final: f64,
    pub converged: bool,
}

fn bregman_step(
    m: &mut SymMatrix,
    v: &[f64],
    slack: &mut f64,
    dual: &mut f64,
    weight: f64,
    bound: Bound,
    id: Option<usize>,
) -> Result<Projection> {
    let w = m.mul_vec(v)?;
    let p: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    // v lies in the null space of M (or is zero): no rank-one update can move
    // the constraint value.
    if !(p > 0.0) {
        return Ok(Projection::NONE);
    }
    let delta = bound.sign();
    let unclamped = delta * weight / (1.0 + weight) * (1.0 / p - 1.0 / *slack);
    let alpha = dual.min(unclamped);
    if alpha == 0.0 {
        return Ok(Projection {
            multiplier: 0.0,
            unclamped,
        });
    }
    let denom = 1.0 - delta * alpha * p;
    let slack_denom = weight + delta * alpha * *slack;
    if !(denom > 0.0) || !(slack_denom > 0.0) {
        return Err(Error::PositivityLoss { constraint: id });
    }
    *slack = weight * *slack / slack_denom;
    *dual -= alpha;
    m.add_outer(&w, delta * alpha / denom)?;
    Ok(Projection {
        multiplier: alpha,
        unclamped,
    })
}

/// Projects onto the pair constraint `c` with constraint vector `z`.
pub fn project_distance_constraint(
    state: &mut SolverState,
    c: &PairConstraint,
    z: &[f64],
    lambda2: f64,
) -> Result<Projection> {
    let k = c.slack_index;
    if k >= state.xi.len() {
        return Err(Error::input(format!("slack index {k} out of range")));
    }
    bregman_step(
        &mut state.m,
        z,
        &mut state.xi[k],
        &mut state.beta[k],
        lambda2,
        c.bound,
        Some(k),
    )
}

/// Projects onto `z̄ᵀ M z̄ ≤ t`.
pub fn project_mmd_constraint(state: &mut SolverState, zbar: &[f64], lambda1: f64) -> Result<Projection> {
    bregman_step(
        &mut state.m,
        zbar,
        &mut state.t,
        &mut state.zeta,
        lambda1,
        Bound::Upper,
        None,
    )
}

/// The projection problem in terms of raw constraint vectors, shared by the
/// linear and kernelized fits.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProblem {
    pub order: usize,
    /// One vector per pair constraint, indexed like `constraints`.
    pub vectors: Vec<Vec<f64>>,
    pub constraints: Vec<PairConstraint>,
    pub xi0: Vec<f64>,
    pub mmd: Vec<f64>,
}

impl ProjectionProblem {
    fn validate(&self) -> Result<()> {
        if self.vectors.len() != self.constraints.len() {
            return Err(Error::DimensionMismatch {
                expected: self.constraints.len(),
                found: self.vectors.len(),
            });
        }
        if self.mmd.len() != self.order || self.vectors.iter().any(|v| v.len() != self.order) {
            return Err(Error::input("constraint vector length differs from matrix order"));
        }
        if self.xi0.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::input("initial slacks must be positive"));
        }
        if self.constraints.iter().any(|c| c.slack_index >= self.xi0.len()) {
            return Err(Error::input("slack index out of range"));
        }
        Ok(())
    }
}

/// Runs the cyclic projections from `M = I, ξ = ξ₀, t = t₀` with zero duals.
/// Each cycle visits every pair constraint, then the MMD constraint once.
pub fn solve(problem: &ProjectionProblem, config: &SolverConfig) -> Result<(SolverState, FitReport)> {
    config.validate()?;
    problem.validate()?;
    let mut state = SolverState::initial(problem.order, &problem.xi0, config.t0);
    let mut visit: Vec<usize> = (0..problem.constraints.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut cycles_run = 0;
    let mut converged = false;
    while cycles_run < config.max_cycles {
        let prev = state.m.clone();
        if config.shuffle {
            visit.shuffle(&mut rng);
        }
        for &k in &visit {
            project_distance_constraint(&mut state, &problem.constraints[k], &problem.vectors[k], config.lambda2)?;
        }
        project_mmd_constraint(&mut state, &problem.mmd, config.lambda1)?;
        cycles_run += 1;
        if state.m.frobenius_distance(&prev) < config.tol * state.m.frobenius_norm() {
            converged = true;
            break;
        }
    }

    let mut max_violation: f64 = 0.0;
    for (c, v) in problem.constraints.iter().zip(&problem.vectors) {
        let p = state.m.quad_form(v)?;
        let slack = state.xi[c.slack_index];
        let gap = match c.bound {
            Bound::Upper => p - slack,
            Bound::Lower => slack - p,
        };
        max_violation = max_violation.max(gap);
    }
    let mmd_final = state.m.quad_form(&problem.mmd)?.max(0.0);
    max_violation = max_violation.max(mmd_final - state.t);

    let report = FitReport {
        cycles_run,
        final_objective: objective_terms(&state, &problem.xi0, config)?,
        max_violation,
        mmd_initial: problem.mmd.iter().map(|v| v * v).sum(),
        mmd_final,
        converged,
    };
    Ok((state, report))
}

/// Builds the linear projection problem `z_ij = [x_i; -y_j]`, `z̄` from all
/// samples.
pub fn linear_problem(x: &DomainData, y: &DomainData, cs: &ConstraintSet) -> Result<ProjectionProblem> {
    check_constraints(x, y, cs)?;
    let vectors = cs
        .constraints
        .iter()
        .map(|c| make_z(x.sample(c.source), y.sample(c.target)))
        .collect();
    Ok(ProjectionProblem {
        order: x.dim() + y.dim(),
        vectors,
        constraints: cs.constraints.clone(),
        xi0: cs.xi0.clone(),
        mmd: mmd_vector(x, y),
    })
}

pub(crate) fn check_constraints(x: &DomainData, y: &DomainData, cs: &ConstraintSet) -> Result<()> {
    if cs.xi0.len() < cs.constraints.len() {
        return Err(Error::input("fewer initial slacks than constraints"));
    }
    for c in &cs.constraints {
        if c.source >= x.n_labeled() || c.target >= y.n_labeled() {
            return Err(Error::input(format!(
                "constraint ({}, {}) references an unlabeled or missing sample",
                c.source, c.target
            )));
        }
    }
    Ok(())
}

/// Learns the cross-domain metric.
pub fn fit(
    x: &DomainData,
    y: &DomainData,
    cs: &ConstraintSet,
    config: &SolverConfig,
) -> Result<(MetricModel, FitReport)> {
    let problem = linear_problem(x, y, cs)?;
    let (state, report) = solve(&problem, config)?;
    let model = MetricModel::new(x.dim(), y.dim(), state.m)?;
    Ok((model, report))
}

/// Relaxed objective `LogDet(M, I) + λ₁·LogDet(t, t₀) + λ₂·LogDet(ξ, ξ₀)`.
pub fn objective(state: &SolverState, cs: &ConstraintSet, config: &SolverConfig) -> Result<f64> {
    objective_terms(state, &cs.xi0, config)
}

pub(crate) fn objective_terms(state: &SolverState, xi0: &[f64], config: &SolverConfig) -> Result<f64> {
    let n = state.m.order() as f64;
    let matrix_term = state.m.trace() - logdet_psd(&state.m)? - n;
    let mmd_term = logdet_div_scalar(state.t, config.t0);
    let slack_term: f64 = state.xi.iter().zip(xi0).map(|(&v, &v0)| logdet_div_scalar(v, v0)).sum();
    Ok(matrix_term + config.lambda1 * mmd_term + config.lambda2 * slack_term)
}
