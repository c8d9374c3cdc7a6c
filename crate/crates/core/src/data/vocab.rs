use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::Dialogue;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SEP: usize = 2;
pub const RESERVED: [&str; 3] = ["<pad>", "<unk>", "<sep>"];

/// Token/index bijection with `<pad>`, `<unk>`, `<sep>` at indices 0..3.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its full token list, reserved tokens first.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens[..3] != RESERVED {
            return Err(Error::InvalidArgument(
                "vocabulary must start with <pad>, <unk>, <sep>".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token ids of one turn; an empty turn becomes a lone `<unk>`.
    pub fn encode_turn(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = tokenize(text).iter().map(|t| self.id(t)).collect();
        if ids.is_empty() {
            vec![UNK]
        } else {
            ids
        }
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// Tokens with corpus frequency `>= min_count`, ordered by descending
/// frequency then ascending token, after the reserved entries.
pub fn build_vocab(dialogues: &[Dialogue], min_count: usize) -> Result<Vocabulary> {
    if dialogues.is_empty() {
        return Err(Error::InvalidArgument("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for d in dialogues {
        for turn in &d.turns {
            for tok in tokenize(turn) {
                *counts.entry(tok).or_default() += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count.max(1) && !RESERVED.contains(&t.as_str()))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens)
}

/// `turn1 <sep> turn2 <sep> turn3` as ids; unknown tokens map to `<unk>`.
pub fn flatten_dialogue(dialogue: &Dialogue, vocab: &Vocabulary) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, turn) in dialogue.turns.iter().enumerate() {
        if i > 0 {
            out.push(SEP);
        }
        out.extend(tokenize(turn).iter().map(|t| vocab.id(t)));
    }
    out
}
