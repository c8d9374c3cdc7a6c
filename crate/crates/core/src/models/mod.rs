//! Classifier assemblies: flat and hierarchical neural models over token
//! sequences, and logistic regression over precomputed features.

mod checkpoint;
mod classifier;
mod config;
mod logreg;
mod sequence;

pub use checkpoint::Checkpoint;
pub use classifier::{Classifier, ClassifierParams, ForwardCache, CLASSIFIER_KIND};
pub use config::{Architecture, EmbeddingSource, EncoderKind, ModelConfig};
pub use logreg::{lr_train, LogisticRegression, LrOptions, LrReport, LOGREG_KIND};
pub use sequence::{SequenceEncoder, SequenceEncoderCache};
