//! Versioned JSON model files.
//!
//! Linear files store the dense matrix `M` row-major. Kernelized files store
//! `L`, both kernel specifications, the ridges and the training samples, so
//! the loaded model reproduces distances bit-exactly.

use std::fs;
use std::path::Path;

use mlhd_core::eval::Scorer;
use mlhd_core::kernel::{KernelModel, KernelSpec};
use mlhd_core::linalg::{Matrix, SymMatrix};
use mlhd_core::{DomainData, Label, MetricModel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "mlhd-model/1";

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(MetricModel),
    Kernelized(KernelModel),
}

impl Model {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Model::Linear(m) => (m.dim_x(), m.dim_y()),
            Model::Kernelized(k) => (k.train_x.dim(), k.train_y.dim()),
        }
    }

    pub fn scorer(&self) -> &dyn Scorer {
        match self {
            Model::Linear(m) => m,
            Model::Kernelized(k) => k,
        }
    }
}

/// Free-form training metadata stored alongside the model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub lambda1: f64,
    pub lambda2: f64,
    pub t0: f64,
    pub u: f64,
    pub l: f64,
    pub max_cycles: usize,
    pub tol: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub literal_constraints: bool,
    pub cycles_run: usize,
    pub converged: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Linear,
    Kernelized,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum KernelRepr {
    Linear,
    Rbf { gamma: f64 },
}

impl From<KernelSpec> for KernelRepr {
    fn from(s: KernelSpec) -> Self {
        match s {
            KernelSpec::Linear => KernelRepr::Linear,
            KernelSpec::Rbf { gamma } => KernelRepr::Rbf { gamma },
        }
    }
}

impl From<KernelRepr> for KernelSpec {
    fn from(s: KernelRepr) -> Self {
        match s {
            KernelRepr::Linear => KernelSpec::Linear,
            KernelRepr::Rbf { gamma } => KernelSpec::Rbf { gamma },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SamplesRepr {
    dim: usize,
    count: usize,
    /// Sample-major.
    values: Vec<f64>,
    labels: Vec<Label>,
}

impl SamplesRepr {
    fn from_data(d: &DomainData) -> Self {
        SamplesRepr {
            dim: d.dim(),
            count: d.len(),
            values: d.raw().to_vec(),
            labels: d.labels().to_vec(),
        }
    }

    fn into_data(self) -> Result<DomainData> {
        if self.values.len() != self.dim * self.count {
            return Err(Error::Format("training sample payload is truncated".into()));
        }
        Ok(DomainData::new(self.dim, self.values, self.labels)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct KernelPart {
    source_kernel: KernelRepr,
    target_kernel: KernelRepr,
    ridge_source: f64,
    ridge_target: f64,
    source: SamplesRepr,
    target: SamplesRepr,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelRepr {
    format_version: String,
    kind: Kind,
    dim_source: usize,
    dim_target: usize,
    order: usize,
    /// Row-major `order × order`.
    matrix: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    kernel: Option<KernelPart>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    training: Option<TrainingInfo>,
}

fn dense(m: &SymMatrix) -> Vec<f64> {
    m.to_dense().as_slice().to_vec()
}

fn sym(order: usize, values: Vec<f64>) -> Result<SymMatrix> {
    if values.len() != order * order {
        return Err(Error::Format(format!(
            "matrix payload has {} values, expected {}",
            values.len(),
            order * order
        )));
    }
    let m = Matrix::from_row_major(order, order, values)?;
    SymMatrix::from_dense(&m, 0.0).map_err(|_| Error::Format("matrix payload is not symmetric".into()))
}

pub fn to_json(model: &Model, training: Option<&TrainingInfo>) -> Result<String> {
    let (dx, dy) = model.dims();
    let repr = match model {
        Model::Linear(m) => ModelRepr {
            format_version: FORMAT_VERSION.into(),
            kind: Kind::Linear,
            dim_source: dx,
            dim_target: dy,
            order: m.matrix().order(),
            matrix: dense(m.matrix()),
            kernel: None,
            training: training.cloned(),
        },
        Model::Kernelized(k) => ModelRepr {
            format_version: FORMAT_VERSION.into(),
            kind: Kind::Kernelized,
            dim_source: dx,
            dim_target: dy,
            order: k.l.order(),
            matrix: dense(&k.l),
            kernel: Some(KernelPart {
                source_kernel: k.spec_x.into(),
                target_kernel: k.spec_y.into(),
                ridge_source: k.ridge_x,
                ridge_target: k.ridge_y,
                source: SamplesRepr::from_data(&k.train_x),
                target: SamplesRepr::from_data(&k.train_y),
            }),
            training: training.cloned(),
        },
    };
    let mut s = serde_json::to_string_pretty(&repr).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<(Model, Option<TrainingInfo>)> {
    let version: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    match version.get("format_version").and_then(|v| v.as_str()) {
        Some(FORMAT_VERSION) => {}
        Some(other) => return Err(Error::Format(format!("unsupported format version '{other}'"))),
        None => return Err(Error::Format("missing format_version".into())),
    }
    let repr: ModelRepr = serde_json::from_value(version).map_err(|e| Error::Format(e.to_string()))?;
    let m = sym(repr.order, repr.matrix)?;
    let model = match (repr.kind, repr.kernel) {
        (Kind::Linear, None) => {
            if repr.order != repr.dim_source + repr.dim_target {
                return Err(Error::Format("matrix order does not match dimensions".into()));
            }
            Model::Linear(MetricModel::new(repr.dim_source, repr.dim_target, m)?)
        }
        (Kind::Kernelized, Some(k)) => {
            let x = k.source.into_data()?;
            let y = k.target.into_data()?;
            if x.dim() != repr.dim_source || y.dim() != repr.dim_target {
                return Err(Error::Format("training samples do not match dimensions".into()));
            }
            Model::Kernelized(KernelModel::new(
                m,
                k.source_kernel.into(),
                k.target_kernel.into(),
                x,
                y,
                k.ridge_source,
                k.ridge_target,
            )?)
        }
        (Kind::Linear, Some(_)) => return Err(Error::Format("linear model carries kernel data".into())),
        (Kind::Kernelized, None) => return Err(Error::Format("kernelized model lacks kernel data".into())),
    };
    Ok((model, repr.training))
}

pub fn save_model(path: &Path, model: &Model, training: Option<&TrainingInfo>) -> Result<()> {
    fs::write(path, to_json(model, training)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(Model, Option<TrainingInfo>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
