use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::config::{Architecture, EmbeddingSource, ModelConfig};
use super::sequence::{SequenceEncoder, SequenceEncoderCache};
use crate::data::{load_word_vectors, random_embeddings, Dialogue, EncodedDialogue, Label, Vocabulary, NUM_CLASSES, PAD};
use crate::encoders::{embed, embed_backward, AttentionPool, AttentionPoolCache, MlpCache, MlpHead};
use crate::error::{Error, Result};
use crate::numerics::{dropout_mask, join, softmax_in_place, Params, Tensor};
use crate::training::cross_entropy_with_grad;

pub const CLASSIFIER_KIND: &str = "classifier";

/// Trainable tensors of a flat (`turn == None`) or hierarchical classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub embedding: Tensor,
    pub word: SequenceEncoder,
    pub pool: AttentionPool,
    pub turn: Option<SequenceEncoder>,
    pub head: MlpHead,
}

impl Params for ClassifierParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "embedding"), &self.embedding);
        self.word.visit(&join(prefix, "word"), f);
        self.pool.visit(&join(prefix, "pool"), f);
        self.turn.visit(&join(prefix, "turn"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        f(join(prefix, "embedding"), &mut self.embedding);
        self.word.visit_mut(&join(prefix, "word"), f);
        self.pool.visit_mut(&join(prefix, "pool"), f);
        self.turn.visit_mut(&join(prefix, "turn"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

#[derive(Debug, Clone)]
struct WordCache {
    ids: Vec<usize>,
    rows: usize,
    encoder: SequenceEncoderCache,
    pool: AttentionPoolCache,
}

/// Intermediate values of one forward pass, consumed by [`Classifier::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    words: Vec<WordCache>,
    turn: Option<SequenceEncoderCache>,
    drop: Option<Vec<f64>>,
    head: MlpCache,
    turn_vectors: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// Pooled vector of each word-level sequence: three turns, or the single
    /// flattened dialogue.
    pub fn pooled(&self) -> &[Vec<f64>] {
        &self.turn_vectors
    }
}

/// Flat or hierarchical emotion classifier together with its vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    config: ModelConfig,
    vocab: Vocabulary,
    pub params: ClassifierParams,
}

impl Classifier {
    /// Builds a freshly initialised model; the embedding table comes from the
    /// configured source and every other tensor from `config.seed`.
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let table = match &config.embeddings {
            EmbeddingSource::Random => random_embeddings(vocab.len(), config.embed_dim, config.seed)?,
            EmbeddingSource::File { path } => load_word_vectors(path, &vocab, config.embed_dim, config.seed)?,
        };
        Self::with_embeddings(config, vocab, table)
    }

    pub fn with_embeddings(config: ModelConfig, vocab: Vocabulary, table: Tensor) -> Result<Self> {
        config.validate()?;
        if table.shape() != [vocab.len(), config.embed_dim] {
            return Err(Error::Shape(format!(
                "embedding table {:?} does not match vocabulary {} x {}",
                table.shape(),
                vocab.len(),
                config.embed_dim
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d6f_6465_6c00);
        let word = SequenceEncoder::new(&config, config.embed_dim, &mut rng)?;
        let dim = word.output_dim();
        let pool = AttentionPool::new(dim, &mut rng);
        let turn = match config.architecture {
            Architecture::Flat => None,
            Architecture::Hierarchical => Some(SequenceEncoder::new(&config, dim, &mut rng)?),
        };
        let head = MlpHead::new(config.encoder_dim(), config.head_hidden(), &mut rng);
        Ok(Classifier {
            config,
            vocab,
            params: ClassifierParams {
                embedding: table,
                word,
                pool,
                turn,
                head,
            },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn encode(&self, dialogue: &Dialogue) -> EncodedDialogue {
        EncodedDialogue::new(dialogue, &self.vocab)
    }

    /// Zeroed gradient container with this model's structure.
    pub fn zero_grads(&self) -> ClassifierParams {
        let mut g = self.params.clone();
        g.zero();
        g
    }

    /// Forward pass. Dropout is active only when `rng` is given.
    pub fn forward(
        &self,
        input: &EncodedDialogue,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<([f64; NUM_CLASSES], ForwardCache)> {
        let p = &self.params;
        let sequences: Vec<&[usize]> = match self.config.architecture {
            Architecture::Flat => vec![&input.flat],
            Architecture::Hierarchical => input.turns.iter().map(|t| t.as_slice()).collect(),
        };
        let mut words = Vec::with_capacity(sequences.len());
        let mut pooled = Vec::with_capacity(sequences.len());
        for ids in sequences {
            let x = embed(ids, &p.embedding)?;
            let mask: Vec<bool> = ids.iter().map(|&id| id != PAD).collect();
            let (h, _, encoder) = p.word.forward(&x, &mask)?;
            let (s, pool) = p.pool.forward(&h, &mask)?;
            pooled.push(s);
            words.push(WordCache {
                ids: ids.to_vec(),
                rows: h.rows(),
                encoder,
                pool,
            });
        }
        let (features, turn) = match &p.turn {
            None => (pooled[0].clone(), None),
            Some(enc) => {
                let s = Tensor::from_rows(&pooled)?;
                let (_, last, cache) = enc.forward(&s, &[true; 3])?;
                (last, Some(cache))
            }
        };
        let (features, drop) = match rng {
            Some(rng) if self.config.dropout > 0.0 => {
                let m = dropout_mask(features.len(), self.config.dropout, rng)?;
                (features.iter().zip(&m).map(|(a, b)| a * b).collect(), Some(m))
            }
            _ => (features, None),
        };
        let (logits, head) = p.head.forward(&features)?;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier logits".into()));
        }
        Ok((
            logits,
            ForwardCache {
                words,
                turn,
                drop,
                head,
                turn_vectors: pooled,
            },
        ))
    }

    /// Accumulates parameter gradients of a loss with gradient `d_logits`.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64], grads: &mut ClassifierParams) {
        let p = &self.params;
        let mut d_features = p.head.backward(&cache.head, d_logits, &mut grads.head);
        if let Some(m) = &cache.drop {
            d_features.iter_mut().zip(m).for_each(|(g, m)| *g *= m);
        }
        let d_pooled: Vec<Vec<f64>> = match (&p.turn, &cache.turn, &mut grads.turn) {
            (Some(enc), Some(c), Some(g)) => {
                let d_out = Tensor::zeros(&[3, enc.output_dim()]);
                let ds = enc.backward(c, &d_out, &d_features, g);
                (0..3).map(|k| ds.row(k).to_vec()).collect()
            }
            _ => vec![d_features],
        };
        for (w, ds) in cache.words.iter().zip(&d_pooled) {
            let dh = p.pool.backward(&w.pool, ds, &mut grads.pool);
            let zeros = vec![0.0; p.word.output_dim()];
            debug_assert_eq!(dh.rows(), w.rows);
            let dx = p.word.backward(&w.encoder, &dh, &zeros, &mut grads.word);
            if !self.config.freeze_embeddings {
                embed_backward(&w.ids, &dx, &mut grads.embedding);
            }
        }
    }

    /// Cross-entropy of one example; gradients are added to `grads`.
    pub fn accumulate(
        &self,
        input: &EncodedDialogue,
        gold: Label,
        rng: Option<&mut dyn RngCore>,
        grads: &mut ClassifierParams,
    ) -> Result<f64> {
        let (logits, cache) = self.forward(input, rng)?;
        let (loss, d_logits) = cross_entropy_with_grad(&logits, gold);
        self.backward(&cache, &d_logits, grads);
        Ok(loss)
    }

    pub fn logits(&self, input: &EncodedDialogue) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.forward(input, None)?.0)
    }

    /// Argmax label (lowest index on ties) and class probabilities.
    pub fn predict(&self, input: &EncodedDialogue) -> Result<(Label, [f64; NUM_CLASSES])> {
        let mut probs = self.logits(input)?;
        softmax_in_place(&mut probs);
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if probs[k] > probs[best] {
                best = k;
            }
        }
        Ok((Label::from_index(best).expect("class index"), probs))
    }

    /// The three pooled turn vectors fed to the turn-level encoder, or
    /// `None` for a flat model.
    pub fn turn_vectors(&self, input: &EncodedDialogue) -> Result<Option<Vec<Vec<f64>>>> {
        if self.config.architecture == Architecture::Flat {
            return Ok(None);
        }
        Ok(Some(self.forward(input, None)?.1.turn_vectors))
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            kind: CLASSIFIER_KIND.into(),
            config: serde_json::to_value(&self.config)?,
            vocab: Some(self.vocab.tokens().to_vec()),
            tensors: self
                .params
                .named_tensors()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.kind != CLASSIFIER_KIND {
            return Err(Error::Checkpoint(format!("expected a {CLASSIFIER_KIND} checkpoint, found {}", ckpt.kind)));
        }
        let config: ModelConfig = serde_json::from_value(ckpt.config.clone())?;
        let tokens = ckpt
            .vocab
            .clone()
            .ok_or_else(|| Error::Checkpoint("classifier checkpoint lacks a vocabulary".into()))?;
        let vocab = Vocabulary::from_tokens(tokens)?;
        let table = Tensor::zeros(&[vocab.len(), config.embed_dim]);
        let mut model = Self::with_embeddings(config, vocab, table)?;
        ckpt.restore(&mut model.params)?;
        Ok(model)
    }
}
