//! Cross-domain nearest-neighbor evaluation, seeded trials and parameter
//! sweeps.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{self, ArcConfig, ArcModel, CcaItmlModel, CcaModel};
use crate::error::{Error, Result};
use crate::kernel::{fit_kernelized, KernelModel, KernelSpec};
use crate::metric::{build_constraints, estimate_bounds, ConstraintOrientation, DomainData, Label, MetricModel};
use crate::solver::{fit, SolverConfig};

/// A learned cross-domain dissimilarity; smaller means closer.
pub trait Scorer {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Dissimilarity between two target samples, if the method defines one.
    fn target_target(&self, _y: &[f64], _y_ref: &[f64]) -> Result<f64> {
        Err(Error::Unsupported("target-target dissimilarity"))
    }

    fn supports_target_refs(&self) -> bool {
        false
    }
}

impl Scorer for MetricModel {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.cross_distance(x, y)
    }
    fn target_target(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.target_distance(y, y_ref)
    }
    fn supports_target_refs(&self) -> bool {
        true
    }
}

impl Scorer for KernelModel {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.cross_distance(x, y)
    }
    fn target_target(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.target_distance(y, y_ref)
    }
    fn supports_target_refs(&self) -> bool {
        true
    }
}

/// Squared Euclidean distance in the canonical space.
impl Scorer for CcaModel {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(sq_dist(&self.project_x(x)?, &self.project_y(y)?))
    }
    fn target_target(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        Ok(sq_dist(&self.project_y(y)?, &self.project_y(y_ref)?))
    }
    fn supports_target_refs(&self) -> bool {
        true
    }
}

impl Scorer for CcaItmlModel {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.cross_distance(x, y)
    }
    fn target_target(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.target_distance(y, y_ref)
    }
    fn supports_target_refs(&self) -> bool {
        true
    }
}

/// Negated similarity. Only source references are supported.
impl Scorer for ArcModel {
    fn source_target(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(-self.similarity(x, y)?)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Majority label among the `k` nearest references of each query. Ties go to
/// the smallest summed distance, then the lowest label.
pub fn knn_classify(
    mut dist: impl FnMut(usize, usize) -> Result<f64>,
    ref_labels: &[Label],
    n_queries: usize,
    k: usize,
) -> Result<Vec<Label>> {
    if ref_labels.is_empty() {
        return Err(Error::input("reference set is empty"));
    }
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    let k = k.min(ref_labels.len());
    let mut out = Vec::with_capacity(n_queries);
    let mut row: Vec<(f64, usize)> = Vec::with_capacity(ref_labels.len());
    for q in 0..n_queries {
        row.clear();
        for r in 0..ref_labels.len() {
            let d = dist(q, r)?;
            if d.is_nan() {
                return Err(Error::NonFinite);
            }
            row.push((d, r));
        }
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<Label, (usize, f64)> = BTreeMap::new();
        for &(d, r) in &row[..k] {
            let e = votes.entry(ref_labels[r]).or_insert((0, 0.0));
            e.0 += 1;
            e.1 += d;
        }
        // BTreeMap iterates labels ascending, so strict comparisons keep the
        // lowest label on a full tie
        let mut best: Option<(Label, usize, f64)> = None;
        for (&label, &(count, sum)) in &votes {
            let better = match best {
                None => true,
                Some((_, bc, bs)) => count > bc || (count == bc && sum < bs),
            };
            if better {
                best = Some((label, count, sum));
            }
        }
        out.push(best.map(|b| b.0).unwrap_or(ref_labels[0]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefSet {
    /// Labeled source training samples.
    Source,
    /// Labeled source and labeled target training samples. Falls back to the
    /// source references for scorers without a target-target dissimilarity.
    #[default]
    Both,
}

/// Classifies `queries` against labeled training references with `scorer`.
pub fn classify_targets(
    scorer: &dyn Scorer,
    source: &DomainData,
    target: &DomainData,
    queries: &DomainData,
    k: usize,
    refs: RefSet,
) -> Result<Vec<Label>> {
    let ns = source.n_labeled();
    let use_target = refs == RefSet::Both && scorer.supports_target_refs();
    let nt = if use_target { target.n_labeled() } else { 0 };
    let mut labels: Vec<Label> = source.labels().to_vec();
    labels.extend_from_slice(&target.labels()[..nt]);
    knn_classify(
        |q, r| {
            let y = queries.sample(q);
            if r < ns {
                scorer.source_target(source.sample(r), y)
            } else {
                scorer.target_target(y, target.sample(r - ns))
            }
        },
        &labels,
        queries.len(),
        k,
    )
}

/// Fraction of matching entries.
pub fn accuracy(predicted: &[Label], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::input("prediction and truth lengths differ or are empty"));
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCount {
    /// Every target sample not used for training.
    All,
    /// At most this many of them.
    Count(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialProtocol {
    pub n_source_labeled_per_class: usize,
    pub n_target_labeled_per_class: usize,
    pub n_target_unlabeled_per_class: usize,
    pub n_test: TestCount,
    pub n_trials: usize,
    pub seed: u64,
    pub k: usize,
    pub refs: RefSet,
    /// Report the sample rather than population standard deviation.
    pub sample_std: bool,
}

impl Default for TrialProtocol {
    fn default() -> Self {
        TrialProtocol {
            n_source_labeled_per_class: 20,
            n_target_labeled_per_class: 1,
            n_target_unlabeled_per_class: 20,
            n_test: TestCount::Count(300),
            n_trials: 10,
            seed: 0,
            k: 1,
            refs: RefSet::Both,
            sample_std: false,
        }
    }
}

impl TrialProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.n_source_labeled_per_class == 0 || self.n_target_labeled_per_class == 0 {
            return Err(Error::config("each domain needs at least one labeled sample per class"));
        }
        Ok(())
    }

    /// Seed of trial `index`.
    pub fn trial_seed(&self, index: usize) -> u64 {
        splitmix64(self.seed ^ splitmix64(index as u64))
    }
}

/// Fully labeled sample pools. Target labels are ground truth; only the
/// sampled labeled subset is revealed to the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Pools {
    pub source: DomainData,
    pub target: DomainData,
}

impl Pools {
    pub fn new(source: DomainData, target: DomainData) -> Result<Self> {
        if source.n_labeled() != source.len() || target.n_labeled() != target.len() {
            return Err(Error::input("evaluation pools must be fully labeled"));
        }
        Ok(Pools { source, target })
    }
}

/// Indices into the pools for one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub source: Vec<usize>,
    pub target_labeled: Vec<usize>,
    pub target_unlabeled: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// FNV-1a over all index lists.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for part in [&self.source, &self.target_labeled, &self.target_unlabeled, &self.test] {
            for &i in part.iter().chain(core::iter::once(&usize::MAX)) {
                for b in (i as u64).to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// Training view of a split: labeled source, and target with the labeled
/// samples first.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub source: DomainData,
    pub target: DomainData,
}

fn class_indices(d: &DomainData) -> BTreeMap<Label, Vec<usize>> {
    let mut m: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in d.labels().iter().enumerate() {
        m.entry(l).or_default().push(i);
    }
    m
}

/// Draws the split of trial `seed`.
pub fn sample_split(pools: &Pools, protocol: &TrialProtocol, seed: u64) -> Result<Split> {
    protocol.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut source = Vec::new();
    for (class, mut idx) in class_indices(&pools.source) {
        let needed = protocol.n_source_labeled_per_class;
        if idx.len() < needed {
            return Err(Error::InsufficientSamples {
                class,
                needed,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        source.extend_from_slice(&idx[..needed]);
    }
    let mut target_labeled = Vec::new();
    let mut target_unlabeled = Vec::new();
    let mut rest = Vec::new();
    for (class, mut idx) in class_indices(&pools.target) {
        let nl = protocol.n_target_labeled_per_class;
        let nu = protocol.n_target_unlabeled_per_class;
        if idx.len() < nl + nu {
            return Err(Error::InsufficientSamples {
                class,
                needed: nl + nu,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        target_labeled.extend_from_slice(&idx[..nl]);
        target_unlabeled.extend_from_slice(&idx[nl..nl + nu]);
        rest.extend_from_slice(&idx[nl + nu..]);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    if let TestCount::Count(n) = protocol.n_test {
        rest.truncate(n);
    }
    if rest.is_empty() {
        return Err(Error::input("no target samples left for testing"));
    }
    Ok(Split {
        source,
        target_labeled,
        target_unlabeled,
        test: rest,
    })
}

impl Split {
    pub fn training_set(&self, pools: &Pools) -> Result<TrainingSet> {
        let source = pools.source.select(&self.source, self.source.len())?;
        let mut picks = self.target_labeled.clone();
        picks.extend_from_slice(&self.target_unlabeled);
        let target = pools.target.select(&picks, self.target_labeled.len())?;
        Ok(TrainingSet { source, target })
    }

    /// Test samples with their true labels.
    pub fn test_set(&self, pools: &Pools) -> Result<DomainData> {
        pools.target.select(&self.test, self.test.len())
    }
}

/// A trainable method.
pub trait Method {
    fn name(&self) -> String;

    /// Human-readable hyperparameters.
    fn describe(&self) -> String;

    fn train(&self, train: &TrainingSet, seed: u64) -> Result<Box<dyn Scorer>>;
}

/// How MLHD picks the bounds `u < l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundsChoice {
    /// Percentiles of squared Euclidean cross-domain distances over labeled
    /// pairs.
    Percentiles(f64, f64),
    Fixed {
        u: f64,
        l: f64,
    },
}

impl Default for BoundsChoice {
    fn default() -> Self {
        BoundsChoice::Percentiles(5.0, 95.0)
    }
}

impl BoundsChoice {
    pub fn resolve(&self, x: &DomainData, y: &DomainData) -> Result<(f64, f64)> {
        match *self {
            BoundsChoice::Percentiles(lo, hi) => estimate_bounds(x, y, lo, hi),
            BoundsChoice::Fixed { u, l } => Ok((u, l)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelChoice {
    Linear,
    /// RBF with a per-domain median-heuristic width.
    RbfMedian,
    /// RBF with the same width on both domains.
    Rbf {
        gamma: f64,
    },
}

impl KernelChoice {
    pub fn resolve(&self, x: &DomainData, y: &DomainData) -> Result<(KernelSpec, KernelSpec)> {
        Ok(match *self {
            KernelChoice::Linear => (KernelSpec::Linear, KernelSpec::Linear),
            KernelChoice::RbfMedian => (KernelSpec::rbf_median(x)?, KernelSpec::rbf_median(y)?),
            KernelChoice::Rbf { gamma } => (KernelSpec::Rbf { gamma }, KernelSpec::Rbf { gamma }),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlhdMethod {
    pub solver: SolverConfig,
    pub bounds: BoundsChoice,
    pub orientation: ConstraintOrientation,
    /// `None` fits `M` directly.
    pub kernel: Option<KernelChoice>,
}

impl Default for MlhdMethod {
    fn default() -> Self {
        MlhdMethod {
            solver: SolverConfig::default(),
            bounds: BoundsChoice::default(),
            orientation: ConstraintOrientation::Standard,
            kernel: None,
        }
    }
}

impl Method for MlhdMethod {
    fn name(&self) -> String {
        match self.kernel {
            None => "MLHD".into(),
            Some(_) => "MLHD-kernel".into(),
        }
    }

    fn describe(&self) -> String {
        format!(
            "lambda1={} lambda2={} t0={} max_cycles={} tol={} bounds={:?} orientation={:?} kernel={:?}",
            self.solver.lambda1,
            self.solver.lambda2,
            self.solver.t0,
            self.solver.max_cycles,
            self.solver.tol,
            self.bounds,
            self.orientation,
            self.kernel
        )
    }

    fn train(&self, train: &TrainingSet, seed: u64) -> Result<Box<dyn Scorer>> {
        let (x, y) = (&train.source, &train.target);
        let (u, l) = self.bounds.resolve(x, y)?;
        let cs = build_constraints(x, y, u, l, self.orientation)?;
        let cfg = SolverConfig {
            seed,
            ..self.solver.clone()
        };
        Ok(match self.kernel {
            None => Box::new(fit(x, y, &cs, &cfg)?.0),
            Some(choice) => {
                let (sx, sy) = choice.resolve(x, y)?;
                Box::new(fit_kernelized(x, y, &cs, &cfg, sx, sy, None)?.0)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcMethod {
    pub config: ArcConfig,
}

impl Method for ArcMethod {
    fn name(&self) -> String {
        "ARC".into()
    }

    fn describe(&self) -> String {
        let c = &self.config;
        format!(
            "lambda={} l={} u={} steps={} rate={} backtracking={}",
            c.lambda, c.l, c.u, c.steps, c.rate, c.backtracking
        )
    }

    fn train(&self, train: &TrainingSet, _seed: u64) -> Result<Box<dyn Scorer>> {
        let (x, y) = (&train.source, &train.target);
        // relation is all that ARC reads from the constraint set
        let cs = build_constraints(x, y, 1.0, 2.0, ConstraintOrientation::Standard)?;
        Ok(Box::new(baselines::fit_arc(x, y, &cs, &self.config)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcaMethod {
    /// Shared dimension; `None` uses `min(dim_x, dim_y)`.
    pub dim: Option<usize>,
    pub ridge: f64,
    /// Learn a LogDet metric in the shared space.
    pub itml: Option<SolverConfig>,
}

impl Default for CcaMethod {
    fn default() -> Self {
        CcaMethod {
            dim: None,
            ridge: baselines::cca::DEFAULT_RIDGE,
            itml: None,
        }
    }
}

impl Method for CcaMethod {
    fn name(&self) -> String {
        if self.itml.is_some() {
            "CCA+ITML".into()
        } else {
            "CCA+NN".into()
        }
    }

    fn describe(&self) -> String {
        match &self.itml {
            None => format!("dim={:?} ridge={}", self.dim, self.ridge),
            Some(s) => format!(
                "dim={:?} ridge={} lambda2={} max_cycles={} tol={}",
                self.dim, self.ridge, s.lambda2, s.max_cycles, s.tol
            ),
        }
    }

    fn train(&self, train: &TrainingSet, seed: u64) -> Result<Box<dyn Scorer>> {
        let (x, y) = (&train.source, &train.target);
        let d = self.dim.unwrap_or(x.dim().min(y.dim()));
        let cca = baselines::fit_cca_labeled(x, y, d, self.ridge, seed)?;
        Ok(match &self.itml {
            None => Box::new(cca),
            Some(cfg) => {
                let cfg = SolverConfig { seed, ..cfg.clone() };
                Box::new(baselines::fit_cca_itml(x, y, cca, (5.0, 95.0), &cfg)?.0)
            }
        })
    }
}

/// Result of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub accuracy: f64,
    pub split_hash: u64,
}

/// Trains on `split` and classifies its test samples.
pub fn evaluate_split(
    pools: &Pools,
    split: &Split,
    protocol: &TrialProtocol,
    method: &dyn Method,
    seed: u64,
) -> Result<TrialOutcome> {
    let train = split.training_set(pools)?;
    let test = split.test_set(pools)?;
    let scorer = method.train(&train, seed)?;
    let predicted = classify_targets(
        scorer.as_ref(),
        &train.source,
        &train.target,
        &test,
        protocol.k,
        protocol.refs,
    )?;
    Ok(TrialOutcome {
        accuracy: accuracy(&predicted, test.labels())?,
        split_hash: split.fingerprint(),
    })
}

pub fn run_trial(
    pools: &Pools,
    protocol: &TrialProtocol,
    method: &dyn Method,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    let split = sample_split(pools, protocol, trial_seed)?;
    evaluate_split(pools, &split, protocol, method, trial_seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub method_name: String,
    pub config_snapshot: String,
    pub per_trial_accuracy: Vec<f64>,
    pub split_hashes: Vec<u64>,
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation (population unless `sample`).
pub fn mean_std(values: &[f64], sample: bool) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let denom = if sample && values.len() > 1 { n - 1.0 } else { n };
    (mean, libm::sqrt(ss / denom))
}

/// Runs every method on the same `n_trials` splits.
pub fn run_experiment(
    pools: &Pools,
    protocol: &TrialProtocol,
    methods: &[&dyn Method],
) -> Result<Vec<ExperimentResult>> {
    protocol.validate()?;
    let mut acc: Vec<Vec<f64>> = methods.iter().map(|_| Vec::with_capacity(protocol.n_trials)).collect();
    let mut hashes: Vec<Vec<u64>> = acc.iter().map(|_| Vec::new()).collect();
    for t in 0..protocol.n_trials {
        let seed = protocol.trial_seed(t);
        let split = sample_split(pools, protocol, seed)?;
        for (m, method) in methods.iter().enumerate() {
            let out = evaluate_split(pools, &split, protocol, *method, seed)?;
            acc[m].push(out.accuracy);
            hashes[m].push(out.split_hash);
        }
    }
    Ok(methods
        .iter()
        .zip(acc)
        .zip(hashes)
        .map(|((method, per_trial_accuracy), split_hashes)| {
            let (mean, std) = mean_std(&per_trial_accuracy, protocol.sample_std);
            ExperimentResult {
                method_name: method.name(),
                config_snapshot: method.describe(),
                per_trial_accuracy,
                split_hashes,
                mean,
                std,
            }
        })
        .collect())
}

pub const DEFAULT_GRID_L1: [f64; 6] = [1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2];
pub const DEFAULT_GRID_L2: [f64; 6] = [1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub result: ExperimentResult,
}

/// One experiment per `(λ₁, λ₂)` cell, row-major over `grid_l1`.
pub fn param_sweep<M: Method>(
    pools: &Pools,
    protocol: &TrialProtocol,
    grid_l1: &[f64],
    grid_l2: &[f64],
    make: impl Fn(f64, f64) -> M,
) -> Result<Vec<SweepCell>> {
    if grid_l1.is_empty() || grid_l2.is_empty() {
        return Err(Error::config("sweep grids must be nonempty"));
    }
    let mut cells = Vec::with_capacity(grid_l1.len() * grid_l2.len());
    for &lambda1 in grid_l1 {
        for &lambda2 in grid_l2 {
            let method = make(lambda1, lambda2);
            let mut results = run_experiment(pools, protocol, &[&method])?;
            cells.push(SweepCell {
                lambda1,
                lambda2,
                result: results.remove(0),
            });
        }
    }
    Ok(cells)
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
