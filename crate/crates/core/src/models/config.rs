use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Flat,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Lstm,
    Utrs,
}

/// Where the initial embedding table comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSource {
    Random,
    File { path: PathBuf },
}

/// Shape and regularisation of a flat or hierarchical classifier.
///
/// The config alone determines every parameter shape; only the vocabulary
/// size is taken from the vocabulary the model is built with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    #[serde(default = "default_encoder")]
    pub encoder: EncoderKind,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_heads")]
    pub n_heads: usize,
    #[serde(default = "default_hops")]
    pub hops: usize,
    #[serde(default = "default_filters")]
    pub ffn_filters: usize,
    #[serde(default)]
    pub bidirectional: bool,
    /// Width of the head's hidden layer; defaults to the encoder output width.
    #[serde(default)]
    pub mlp_hidden: Option<usize>,
    #[serde(default = "default_embeddings")]
    pub embeddings: EmbeddingSource,
    #[serde(default)]
    pub freeze_embeddings: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_architecture() -> Architecture {
    Architecture::Hierarchical
}
fn default_encoder() -> EncoderKind {
    EncoderKind::Lstm
}
fn default_embed_dim() -> usize {
    64
}
fn default_hidden() -> usize {
    64
}
fn default_dropout() -> f64 {
    0.2
}
fn default_heads() -> usize {
    4
}
fn default_hops() -> usize {
    1
}
fn default_filters() -> usize {
    50
}
fn default_embeddings() -> EmbeddingSource {
    EmbeddingSource::Random
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: default_architecture(),
            encoder: default_encoder(),
            embed_dim: default_embed_dim(),
            hidden_size: default_hidden(),
            dropout: default_dropout(),
            n_heads: default_heads(),
            hops: default_hops(),
            ffn_filters: default_filters(),
            bidirectional: false,
            mlp_hidden: None,
            embeddings: default_embeddings(),
            freeze_embeddings: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.hidden_size < 1 || self.embed_dim < 1 {
            return Err(Error::Config("hidden_size and embed_dim must be at least 1".into()));
        }
        if self.mlp_hidden == Some(0) {
            return Err(Error::Config("mlp_hidden must be at least 1".into()));
        }
        if self.encoder == EncoderKind::Utrs {
            if self.hops < 1 {
                return Err(Error::Config("hops must be at least 1".into()));
            }
            if self.n_heads < 1 || !self.hidden_size.is_multiple_of(self.n_heads) {
                return Err(Error::Config(format!(
                    "hidden_size {} is not divisible into {} heads",
                    self.hidden_size, self.n_heads
                )));
            }
            if self.ffn_filters < 1 {
                return Err(Error::Config("ffn_filters must be at least 1".into()));
            }
            if self.bidirectional {
                return Err(Error::Config("bidirectional applies to lstm encoders only".into()));
            }
        }
        Ok(())
    }

    /// Width of the vectors produced by one encoder instance.
    pub fn encoder_dim(&self) -> usize {
        match self.encoder {
            EncoderKind::Lstm if self.bidirectional => 2 * self.hidden_size,
            _ => self.hidden_size,
        }
    }

    pub fn head_hidden(&self) -> usize {
        self.mlp_hidden.unwrap_or_else(|| self.encoder_dim())
    }

    /// Hierarchical LSTM grid: hidden sizes {1000, 1500} by dropout {0.2, 0.3, 0.4, 0.5}.
    pub fn hlstm_grid() -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for hidden_size in [1000, 1500] {
            for dropout in [0.2, 0.3, 0.4, 0.5] {
                out.push(ModelConfig {
                    architecture: Architecture::Hierarchical,
                    encoder: EncoderKind::Lstm,
                    embed_dim: 300,
                    hidden_size,
                    dropout,
                    ..ModelConfig::default()
                });
            }
        }
        out
    }

    /// Hierarchical UTRS with a single hop and ten heads. The reported width
    /// of 488 does not split into ten heads, so the nearest width that does
    /// (490) is used.
    pub fn hutrs_searched() -> ModelConfig {
        ModelConfig {
            architecture: Architecture::Hierarchical,
            encoder: EncoderKind::Utrs,
            embed_dim: 300,
            hidden_size: 490,
            n_heads: 10,
            hops: 1,
            ffn_filters: 50,
            ..ModelConfig::default()
        }
    }

    /// Six-hop UTRS over contextual features: four heads of width ten, 50
    /// filters, dropout 0.3. Pair with a 5e-5 learning rate.
    pub fn context_utrs() -> ModelConfig {
        ModelConfig {
            architecture: Architecture::Hierarchical,
            encoder: EncoderKind::Utrs,
            embed_dim: 768,
            hidden_size: 40,
            n_heads: 4,
            hops: 6,
            ffn_filters: 50,
            dropout: 0.3,
            ..ModelConfig::default()
        }
    }
}
