//! Dense CSV and sparse `label idx:val` readers and writers.
//!
//! CSV files are comma-separated UTF-8 with a mandatory header row. One column
//! (default `label`) holds integer labels; an empty cell marks the sample as
//! unlabeled. Sparse files hold one sample per line: a label (`?` when
//! unlabeled) followed by 1-based ascending `index:value` pairs. Blank lines
//! and lines starting with `#` are skipped.
//!
//! Labeled samples are moved in front of unlabeled ones; the returned `order`
//! maps stored positions back to input rows.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use mlhd_core::{DomainData, Label};

use crate::error::{Error, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Sparse,
}

impl DataFormat {
    /// `.csv` is dense; `.svm`, `.libsvm`, `.sparse` and `.txt` are sparse.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" => Some(DataFormat::Csv),
            "svm" | "libsvm" | "sparse" | "txt" => Some(DataFormat::Sparse),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub data: DomainData,
    /// `order[k]` is the input row of stored sample `k`.
    pub order: Vec<usize>,
    /// Feature column names (CSV only).
    pub feature_names: Vec<String>,
}

impl Loaded {
    /// Labels in input-row order.
    pub fn labels_in_input_order(&self) -> Vec<Option<Label>> {
        let mut out = vec![None; self.order.len()];
        for (k, &row) in self.order.iter().enumerate() {
            out[row] = self.data.label(k);
        }
        out
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn origin(path: &Path) -> String {
    path.display().to_string()
}

fn parse_label(cell: &str, origin: &str, line: u64) -> Result<Option<Label>> {
    let cell = cell.trim();
    if cell.is_empty() || cell == "?" {
        return Ok(None);
    }
    cell.parse::<Label>()
        .map(Some)
        .map_err(|_| Error::parse(origin, line, format!("label '{cell}' is not an integer")))
}

fn finish(
    dim: usize,
    samples: Vec<Vec<f64>>,
    labels: Vec<Option<Label>>,
    feature_names: Vec<String>,
    origin: &str,
) -> Result<Loaded> {
    if samples.is_empty() {
        return Err(Error::parse(origin, 1, "no samples"));
    }
    let (data, order) = DomainData::from_unordered(dim, &samples, &labels)?;
    Ok(Loaded {
        data,
        order,
        feature_names,
    })
}

/// Reads a dense CSV. `label_column = None` treats every column as a feature.
pub fn read_dense_csv<R: Read>(reader: R, label_column: Option<&str>, origin: &str) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(origin, 1, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(str::is_empty) {
        return Err(Error::parse(origin, 1, "missing header"));
    }
    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::parse(origin, 1, format!("no column named '{name}'")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != label_idx)
        .map(|(_, h)| h.to_owned())
        .collect();
    let dim = feature_names.len();
    if dim == 0 {
        return Err(Error::parse(origin, 1, "no feature columns"));
    }

    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(origin, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::parse(
                origin,
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let mut x = Vec::with_capacity(dim);
        let mut label = None;
        for (i, cell) in rec.iter().enumerate() {
            if Some(i) == label_idx {
                label = parse_label(cell, origin, line)?;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::parse(
                    origin,
                    line,
                    format!("'{cell}' in column '{}' is not a number", &header[i]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    origin,
                    line,
                    format!("non-finite value in column '{}'", &header[i]),
                ));
            }
            x.push(v);
        }
        samples.push(x);
        labels.push(label);
    }
    finish(dim, samples, labels, feature_names, origin)
}

pub fn load_dense_csv(path: &Path, label_column: Option<&str>) -> Result<Loaded> {
    read_dense_csv(open(path)?, label_column, &origin(path))
}

/// Reads sparse lines. `dim = None` takes the largest index seen.
pub fn read_sparse<R: BufRead>(reader: R, dim: Option<usize>, origin: &str) -> Result<Loaded> {
    let mut rows: Vec<(Option<Label>, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n as u64 + 1;
        let line = line.map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), origin, line_no)?;
        let mut entries = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (i, v) = tok
                .split_once(':')
                .ok_or_else(|| Error::parse(origin, line_no, format!("'{tok}' is not index:value")))?;
            let i: usize = i
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("bad index in '{tok}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("bad value in '{tok}'")))?;
            if i == 0 || i <= last {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("index {i} is not 1-based ascending"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::parse(origin, line_no, format!("non-finite value in '{tok}'")));
            }
            if let Some(d) = dim {
                if i > d {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("index {i} exceeds dimension {d}"),
                    ));
                }
            }
            last = i;
            entries.push((i, v));
        }
        max_index = max_index.max(last);
        rows.push((label, entries));
    }
    let dim = dim.unwrap_or(max_index);
    if dim == 0 {
        return Err(Error::parse(origin, 1, "no features"));
    }
    let mut samples = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, entries) in rows {
        let mut x = vec![0.0; dim];
        for (i, v) in entries {
            x[i - 1] = v;
        }
        samples.push(x);
        labels.push(label);
    }
    finish(dim, samples, labels, Vec::new(), origin)
}

pub fn load_sparse(path: &Path, dim: Option<usize>) -> Result<Loaded> {
    read_sparse(BufReader::new(open(path)?), dim, &origin(path))
}

/// Loads by `format`, or by extension when `format` is `None`.
pub fn load(path: &Path, format: Option<DataFormat>, label_column: &str) -> Result<Loaded> {
    let format = format
        .or_else(|| DataFormat::from_path(path))
        .ok_or_else(|| Error::parse(&origin(path), 0, "cannot infer format from extension; pass --format"))?;
    match format {
        DataFormat::Csv => load_dense_csv(path, Some(label_column)),
        DataFormat::Sparse => load_sparse(path, None),
    }
}

/// Writes samples as CSV with columns `x0, x1, ...` and a trailing label
/// column. `labels[k]` applies to sample `k`; missing entries are unlabeled.
pub fn write_dense_csv<W: Write>(writer: W, data: &DomainData, labels: &[Option<Label>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    header.push(DEFAULT_LABEL_COLUMN.into());
    w.write_record(&header).map_err(to_err)?;
    for (k, s) in data.samples().enumerate() {
        let mut row: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
        row.push(
            labels
                .get(k)
                .copied()
                .flatten()
                .map_or(String::new(), |l| l.to_string()),
        );
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Labels of `data` as stored (labeled first).
pub fn stored_labels(data: &DomainData) -> Vec<Option<Label>> {
    (0..data.len()).map(|k| data.label(k)).collect()
}

pub fn save_dense_csv(path: &Path, data: &DomainData, labels: &[Option<Label>]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dense_csv(BufWriter::new(f), data, labels)
}

/// Writes sparse lines, omitting zero entries.
pub fn write_sparse<W: Write>(mut writer: W, data: &DomainData, labels: &[Option<Label>]) -> std::io::Result<()> {
    for (k, s) in data.samples().enumerate() {
        match labels.get(k).copied().flatten() {
            Some(l) => write!(writer, "{l}")?,
            None => write!(writer, "?")?,
        }
        for (i, v) in s.iter().enumerate() {
            if *v != 0.0 {
                write!(writer, " {}:{v:?}", i + 1)?;
            }
        }
        writeln!(writer)?;
    }
    writer.flush()
}
