use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-example sentence features exported from an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub values: Tensor,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<String>, values: Tensor) -> Result<Self> {
        if values.ndim() != 2 || values.rows() != ids.len() {
            return Err(Error::Shape(format!(
                "{} ids for feature matrix {:?}",
                ids.len(),
                values.shape()
            )));
        }
        Ok(FeatureMatrix { ids, values })
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Fails unless the rows follow `ids` exactly.
    pub fn check_aligned<S: AsRef<str>>(&self, ids: &[S]) -> Result<()> {
        if self.ids.len() != ids.len() {
            return Err(Error::Alignment(format!(
                "{} feature rows for {} examples",
                self.ids.len(),
                ids.len()
            )));
        }
        for (i, (a, b)) in self.ids.iter().zip(ids).enumerate() {
            if a != b.as_ref() {
                return Err(Error::Alignment(format!("row {i}: id {a:?} vs {:?}", b.as_ref())));
            }
        }
        Ok(())
    }
}

/// Reads `id\tv1,v2,...,vd` lines.
pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_features(&text, path)
}

pub fn parse_features(text: &str, origin: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let origin = origin.as_ref();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(origin, i + 1, "expected id<TAB>values"))?;
        let row = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::parse(origin, i + 1, format!("expected {d} values, found {}", row.len())))
            }
            _ => {}
        }
        ids.push(id.to_string());
        data.extend(row);
    }
    let d = dim.ok_or_else(|| Error::parse(origin, 1, "feature file is empty"))?;
    let values = Tensor::new(vec![ids.len(), d], data)?;
    values.ensure_finite("feature values")?;
    FeatureMatrix::new(ids, values)
}

pub fn features_to_text(features: &FeatureMatrix) -> String {
    let mut out = String::new();
    for (i, id) in features.ids.iter().enumerate() {
        out.push_str(id);
        out.push('\t');
        let row: Vec<String> = features.values.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Column-wise concatenation: the first matrix's columns, then the second's, ...
pub fn concat_features(parts: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?;
    for p in &parts[1..] {
        p.check_aligned(&first.ids)?;
    }
    let n = first.len();
    let total: usize = parts.iter().map(FeatureMatrix::dim).sum();
    let mut data = Vec::with_capacity(n * total);
    for i in 0..n {
        for p in parts {
            data.extend_from_slice(p.values.row(i));
        }
    }
    FeatureMatrix::new(first.ids.clone(), Tensor::new(vec![n, total], data)?)
}
