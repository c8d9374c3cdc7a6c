//! Deterministic toy corpus with a cross-turn dependency.
//!
//! Turn 3 carries one emotion keyword. Turn 1 may carry the negation
//! marker, which flips the label (happy <-> sad, angry -> others; a negated
//! neutral keyword stays others). Every turn is padded with distractor
//! tokens to a length of 10..=20 tokens, so the label depends on both the
//! first and the last turn.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dialogue, Label};

pub const NEGATION: &str = "not";

const HAPPY: [&str; 5] = ["happy", "glad", "delighted", "cheerful", "joyful"];
const SAD: [&str; 5] = ["sad", "unhappy", "gloomy", "miserable", "depressed"];
const ANGRY: [&str; 5] = ["angry", "furious", "mad", "annoyed", "outraged"];
const NEUTRAL: [&str; 5] = ["okay", "fine", "table", "weather", "lunch"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub n_distractors: usize,
    pub negation_rate: f64,
}

impl SyntheticSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            seed,
            min_len: 10,
            max_len: 20,
            n_distractors: 300,
            negation_rate: 0.5,
        }
    }
}

pub fn keywords(label: Label) -> &'static [&'static str] {
    match label {
        Label::Happy => &HAPPY,
        Label::Sad => &SAD,
        Label::Angry => &ANGRY,
        Label::Others => &NEUTRAL,
    }
}

pub fn negate(label: Label) -> Label {
    match label {
        Label::Happy => Label::Sad,
        Label::Sad => Label::Happy,
        Label::Angry => Label::Others,
        Label::Others => Label::Others,
    }
}

fn distractor(k: usize) -> String {
    format!("w{k}")
}

fn turn<R: Rng>(rng: &mut R, spec: &SyntheticSpec, special: Option<&str>) -> String {
    let len = rng.gen_range(spec.min_len..=spec.max_len);
    let mut words: Vec<String> = (0..len)
        .map(|_| distractor(rng.gen_range(0..spec.n_distractors)))
        .collect();
    if let Some(word) = special {
        let pos = rng.gen_range(0..len);
        words[pos] = word.to_string();
    }
    words.join(" ")
}

/// Generates `spec.n` labeled dialogues with ids `{prefix}{i}`.
pub fn generate(spec: &SyntheticSpec, prefix: &str) -> Vec<Dialogue> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.n)
        .map(|i| {
            let base = Label::ALL[rng.gen_range(0..4)];
            let negated = rng.gen_bool(spec.negation_rate);
            let keyword = *keywords(base).choose(&mut rng).expect("keyword lists are non-empty");
            let t1 = turn(&mut rng, spec, negated.then_some(NEGATION));
            let t2 = turn(&mut rng, spec, None);
            let t3 = turn(&mut rng, spec, Some(keyword));
            let label = if negated { negate(base) } else { base };
            Dialogue {
                id: format!("{prefix}{i}"),
                turns: [t1, t2, t3],
                label: Some(label),
            }
        })
        .collect()
}

/// Applies the generating rule to a dialogue, for checking generated data.
pub fn rule_label(d: &Dialogue) -> Option<Label> {
    let t3: Vec<&str> = d.turns[2].split_whitespace().collect();
    let base = Label::ALL
        .into_iter()
        .find(|&l| keywords(l).iter().any(|k| t3.contains(k)))?;
    let negated = d.turns[0].split_whitespace().any(|w| w == NEGATION);
    Some(if negated { negate(base) } else { base })
}
