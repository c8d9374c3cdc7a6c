//! Corpus ingestion, tokenisation, vocabularies, embedding and feature
//! files, and the shuffle/split protocol.

mod dialogue;
mod features;
mod split;
pub mod synthetic;
mod tokenize;
mod vectors;
mod vocab;

pub use dialogue::{load_tsv, parse_tsv, stats, to_tsv, CorpusStats, Dialogue, Label, NUM_CLASSES};
pub use features::{concat_features, features_to_text, load_features, parse_features, FeatureMatrix};
pub use split::{permutation, split_shuffle};
pub use tokenize::tokenize;
pub use vectors::{load_word_vectors, parse_word_vectors, random_embeddings, uniform_embeddings, OOV_INIT_RANGE};
pub use vocab::{build_vocab, flatten_dialogue, Vocabulary, PAD, RESERVED, SEP, UNK};

/// Token ids of a dialogue in both the flat and per-turn layouts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDialogue {
    pub flat: Vec<usize>,
    pub turns: [Vec<usize>; 3],
}

impl EncodedDialogue {
    pub fn new(dialogue: &Dialogue, vocab: &Vocabulary) -> Self {
        EncodedDialogue {
            flat: flatten_dialogue(dialogue, vocab),
            turns: [0, 1, 2].map(|i| vocab.encode_turn(&dialogue.turns[i])),
        }
    }
}
