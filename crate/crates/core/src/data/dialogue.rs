use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four dialogue classes. Index order is the column order of every
/// probability vector and logit row in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Happy,
    Sad,
    Angry,
    Others,
}

pub const NUM_CLASSES: usize = 4;

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label::Happy, Label::Sad, Label::Angry, Label::Others];
    /// Classes scored by the micro-F1 metric.
    pub const EMOTIONS: [Label; 3] = [Label::Happy, Label::Sad, Label::Angry];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Happy => "happy",
            Label::Sad => "sad",
            Label::Angry => "angry",
            Label::Others => "others",
        }
    }

    pub fn is_emotion(self) -> bool {
        self != Label::Others
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "happy" => Ok(Label::Happy),
            "sad" => Ok(Label::Sad),
            "angry" => Ok(Label::Angry),
            "others" => Ok(Label::Others),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

/// One example: two context turns and the turn whose emotion is classified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: [String; 3],
    pub label: Option<Label>,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, turns: [&str; 3], label: Option<Label>) -> Self {
        Dialogue {
            id: id.into(),
            turns: turns.map(str::to_string),
            label,
        }
    }
}

const HEADER: [&str; 4] = ["id", "turn1", "turn2", "turn3"];

pub fn load_tsv(path: impl AsRef<Path>, labeled: bool) -> Result<Vec<Dialogue>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tsv(&text, labeled, path)
}

/// Parses corpus text. `origin` is only used in error messages.
///
/// When `labeled` is false a label column, if present, is ignored.
pub fn parse_tsv(text: &str, labeled: bool, origin: impl AsRef<Path>) -> Result<Vec<Dialogue>> {
    let origin = origin.as_ref();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing header"))?;
    let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let has_label = match header.as_slice() {
        [a, b, c, d] if [*a, *b, *c, *d] == HEADER => false,
        [a, b, c, d, e] if [*a, *b, *c, *d] == HEADER && *e == "label" => true,
        _ => {
            return Err(Error::parse(
                origin,
                1,
                "header must be id\\tturn1\\tturn2\\tturn3[\\tlabel]",
            ))
        }
    };
    if labeled && !has_label {
        return Err(Error::parse(origin, 1, "labeled corpus requested but there is no label column"));
    }
    let columns = if has_label { 5 } else { 4 };

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns {
            return Err(Error::parse(
                origin,
                lineno,
                format!("expected {columns} columns, found {}", fields.len()),
            ));
        }
        let id = fields[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::parse(origin, lineno, format!("duplicate id {id:?}")));
        }
        let label = if labeled {
            Some(
                fields[4]
                    .parse::<Label>()
                    .map_err(|e| Error::parse(origin, lineno, e.to_string()))?,
            )
        } else {
            None
        };
        out.push(Dialogue {
            id,
            turns: [fields[1].to_string(), fields[2].to_string(), fields[3].to_string()],
            label,
        });
    }
    Ok(out)
}

/// Serialises dialogues in the corpus format. The label column is written
/// only when every dialogue carries a label.
pub fn to_tsv(dialogues: &[Dialogue]) -> Result<String> {
    let labeled = !dialogues.is_empty() && dialogues.iter().all(|d| d.label.is_some());
    let mut out = HEADER.join("\t");
    if labeled {
        out.push_str("\tlabel");
    }
    out.push('\n');
    for d in dialogues {
        for field in std::iter::once(&d.id).chain(d.turns.iter()) {
            if field.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidArgument(format!(
                    "dialogue {:?} contains a tab or newline",
                    d.id
                )));
            }
        }
        out.push_str(&d.id);
        for t in &d.turns {
            out.push('\t');
            out.push_str(t);
        }
        if let (true, Some(l)) = (labeled, d.label) {
            out.push('\t');
            out.push_str(l.as_str());
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub happy: usize,
    pub sad: usize,
    pub angry: usize,
    pub others: usize,
    pub unlabeled: usize,
    /// happy + sad + angry
    pub emotion: usize,
}

pub fn stats(dialogues: &[Dialogue]) -> CorpusStats {
    let mut counts = [0usize; NUM_CLASSES];
    let mut unlabeled = 0;
    for d in dialogues {
        match d.label {
            Some(l) => counts[l.index()] += 1,
            None => unlabeled += 1,
        }
    }
    CorpusStats {
        total: dialogues.len(),
        happy: counts[0],
        sad: counts[1],
        angry: counts[2],
        others: counts[3],
        unlabeled,
        emotion: counts[0] + counts[1] + counts[2],
    }
}
