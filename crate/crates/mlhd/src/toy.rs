//! Two-class synthetic problem: a 2-D source and a 3-D target domain.
//!
//! Source samples are all labeled. The target has mostly unlabeled samples
//! and a few labeled ones drawn from the class Gaussian shifted by
//! `bias_shift`, so the labeled target samples misrepresent their classes.

use std::fmt;

use mlhd_core::{DomainData, Label};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

pub const SOURCE_MEANS: [[f64; 2]; 2] = [[1.0, 2.0], [3.0, 2.0]];
pub const SOURCE_STD: f64 = 0.5;
pub const TARGET_MEANS: [[f64; 3]; 2] = [[-2.0, 1.0, 1.0], [-2.0, 3.0, 1.0]];
pub const TARGET_STD: f64 = 0.5;
/// Default bias, in target standard deviations along the first axis.
pub const DEFAULT_BIAS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub seed: u64,
    pub n_labeled_source_per_class: usize,
    pub n_unlabeled_target_per_class: usize,
    pub n_labeled_target_per_class: usize,
    pub bias_shift: [f64; 3],
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            seed: 0,
            n_labeled_source_per_class: 40,
            n_unlabeled_target_per_class: 40,
            n_labeled_target_per_class: 2,
            bias_shift: [DEFAULT_BIAS * TARGET_STD, 0.0, 0.0],
        }
    }
}

impl ToySpec {
    /// Bias of `sigmas` target standard deviations along the first axis.
    pub fn with_bias(seed: u64, sigmas: f64) -> Self {
        ToySpec {
            seed,
            bias_shift: [sigmas * TARGET_STD, 0.0, 0.0],
            ..ToySpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_labeled_source_per_class == 0
            || self.n_unlabeled_target_per_class == 0
            || self.n_labeled_target_per_class == 0
        {
            return Err(mlhd_core::Error::InvalidConfig("toy sample counts must be at least 1".into()).into());
        }
        if !self.bias_shift.iter().all(|v| v.is_finite()) {
            return Err(mlhd_core::Error::InvalidConfig("bias must be finite".into()).into());
        }
        Ok(())
    }
}

impl fmt::Display for ToySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "source_dim=2")?;
        writeln!(f, "target_dim=3")?;
        for (c, m) in SOURCE_MEANS.iter().enumerate() {
            writeln!(f, "source_mean_{c}={m:?}")?;
        }
        writeln!(f, "source_std={SOURCE_STD}")?;
        for (c, m) in TARGET_MEANS.iter().enumerate() {
            writeln!(f, "target_mean_{c}={m:?}")?;
        }
        writeln!(f, "target_std={TARGET_STD}")?;
        writeln!(f, "n_labeled_source_per_class={}", self.n_labeled_source_per_class)?;
        writeln!(f, "n_unlabeled_target_per_class={}", self.n_unlabeled_target_per_class)?;
        writeln!(f, "n_labeled_target_per_class={}", self.n_labeled_target_per_class)?;
        write!(f, "bias_shift={:?}", self.bias_shift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Toy {
    pub source: DomainData,
    /// Labeled samples first, then unlabeled.
    pub target: DomainData,
    /// True labels of the unlabeled target samples, in stored order.
    pub target_truth: Vec<Label>,
}

impl Toy {
    /// Unlabeled target samples with their true labels.
    pub fn target_test(&self) -> DomainData {
        let nl = self.target.n_labeled();
        let mut data = Vec::with_capacity((self.target.len() - nl) * 3);
        for k in nl..self.target.len() {
            data.extend_from_slice(self.target.sample(k));
        }
        DomainData::new(3, data, self.target_truth.clone()).expect("toy test set is well formed")
    }

    /// Target samples with every label revealed.
    pub fn target_full(&self) -> DomainData {
        let mut labels = self.target.labels().to_vec();
        labels.extend_from_slice(&self.target_truth);
        DomainData::new(3, self.target.raw().to_vec(), labels).expect("toy target is well formed")
    }
}

pub fn gen_toy(spec: &ToySpec) -> Result<Toy> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let source_noise = Normal::new(0.0, SOURCE_STD).expect("valid std");
    let target_noise = Normal::new(0.0, TARGET_STD).expect("valid std");

    let mut source = Vec::new();
    let mut source_labels = Vec::new();
    for (c, mean) in SOURCE_MEANS.iter().enumerate() {
        for _ in 0..spec.n_labeled_source_per_class {
            source.extend(mean.iter().map(|m| m + source_noise.sample(&mut rng)));
            source_labels.push(c as Label);
        }
    }

    let mut labeled = Vec::new();
    let mut labeled_labels = Vec::new();
    let mut unlabeled = Vec::new();
    let mut truth = Vec::new();
    for (c, mean) in TARGET_MEANS.iter().enumerate() {
        for _ in 0..spec.n_unlabeled_target_per_class {
            unlabeled.extend(mean.iter().map(|m| m + target_noise.sample(&mut rng)));
            truth.push(c as Label);
        }
        for _ in 0..spec.n_labeled_target_per_class {
            labeled.extend(
                mean.iter()
                    .zip(&spec.bias_shift)
                    .map(|(m, b)| m + b + target_noise.sample(&mut rng)),
            );
            labeled_labels.push(c as Label);
        }
    }
    labeled.extend(unlabeled);
    Ok(Toy {
        source: DomainData::new(2, source, source_labels)?,
        target: DomainData::new(3, labeled, labeled_labels)?,
        target_truth: truth,
    })
}
