use std::fs;
use std::path::Path;

use crate::data::{Label, NUM_CLASSES};
use crate::error::{Error, Result};

/// Labels (and optionally class probabilities) one model assigned to a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub name: String,
    pub ids: Vec<String>,
    pub labels: Vec<Label>,
    pub probs: Option<Vec<[f64; NUM_CLASSES]>>,
}

const HEADER: &str = "id\tlabel";
const PROB_HEADER: &str = "\tp_happy\tp_sad\tp_angry\tp_others";

impl PredictionSet {
    pub fn new(
        name: impl Into<String>,
        ids: Vec<String>,
        labels: Vec<Label>,
        probs: Option<Vec<[f64; NUM_CLASSES]>>,
    ) -> Result<Self> {
        if ids.len() != labels.len() || probs.as_ref().is_some_and(|p| p.len() != ids.len()) {
            return Err(Error::Alignment("prediction ids, labels and probabilities differ in length".into()));
        }
        Ok(PredictionSet {
            name: name.into(),
            ids,
            labels,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Errors unless `ids` equals this set's ids in order.
    pub fn check_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<()> {
        if ids.len() != self.ids.len() {
            return Err(Error::Alignment(format!(
                "{} has {} predictions, expected {}",
                self.name,
                self.ids.len(),
                ids.len()
            )));
        }
        if let Some(i) = self.ids.iter().zip(ids).position(|(a, b)| a != b.as_ref()) {
            return Err(Error::Alignment(format!(
                "{}: row {} has id {}, expected {}",
                self.name,
                i + 1,
                self.ids[i],
                ids[i].as_ref()
            )));
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(HEADER);
        if self.probs.is_some() {
            out.push_str(PROB_HEADER);
        }
        out.push('\n');
        for (i, (id, label)) in self.ids.iter().zip(&self.labels).enumerate() {
            out.push_str(id);
            out.push('\t');
            out.push_str(label.as_str());
            if let Some(p) = &self.probs {
                for v in p[i] {
                    out.push_str(&format!("\t{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    parse_predictions(&text, name, path)
}

/// Parses `id\tlabel[\tp_happy\tp_sad\tp_angry\tp_others]` with a header row.
pub fn parse_predictions(text: &str, name: impl Into<String>, origin: impl AsRef<Path>) -> Result<PredictionSet> {
    let origin = origin.as_ref();
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).unwrap_or("");
    let with_probs = if header == HEADER {
        false
    } else if header == format!("{HEADER}{PROB_HEADER}") {
        true
    } else {
        return Err(Error::parse(origin, 1, format!("unexpected header {header:?}")));
    };
    let width = if with_probs { 2 + NUM_CLASSES } else { 2 };
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        labels.push(
            fields[1]
                .parse::<Label>()
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?,
        );
        if with_probs {
            let mut row = [0.0; NUM_CLASSES];
            for (slot, f) in row.iter_mut().zip(&fields[2..]) {
                *slot = f.parse().map_err(|_| Error::parse(origin, i + 1, format!("bad probability {f:?}")))?;
            }
            probs.push(row);
        }
    }
    PredictionSet::new(name, ids, labels, with_probs.then_some(probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_and_without_probs() {
        let plain = PredictionSet::new("m", vec!["a".into(), "b".into()], vec![Label::Happy, Label::Others], None).unwrap();
        assert_eq!(parse_predictions(&plain.to_tsv(), "m", "x").unwrap(), plain);
        let probs = PredictionSet::new(
            "m",
            vec!["a".into()],
            vec![Label::Sad],
            Some(vec![[0.125, 0.5, 0.25, 0.125]]),
        )
        .unwrap();
        let text = probs.to_tsv();
        assert!(text.starts_with("id\tlabel\tp_happy\tp_sad\tp_angry\tp_others\na\tsad\t0.125000"));
        assert_eq!(parse_predictions(&text, "m", "x").unwrap(), probs);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(parse_predictions("id\tlabel\na\tjoy\n", "m", "x").is_err());
        assert!(parse_predictions("id\tlabel\na\n", "m", "x").is_err());
        assert!(parse_predictions("id\tguess\na\thappy\n", "m", "x").is_err());
    }

    #[test]
    fn id_check() {
        let p = PredictionSet::new("m", vec!["a".into(), "b".into()], vec![Label::Happy; 2], None).unwrap();
        assert!(p.check_ids(&["a", "b"]).is_ok());
        assert!(p.check_ids(&["b", "a"]).is_err());
        assert!(p.check_ids(&["a"]).is_err());
    }
}
