//! Trainable building blocks with hand-written backward passes.
//!
//! Each layer exposes `forward` returning its output plus a cache, and
//! `backward` taking that cache and the output gradient. Parameter gradients
//! accumulate into a second instance of the same type (see
//! [`Params`](crate::numerics::Params)). Masks use `true` for real tokens.

mod attention;
mod attention_pool;
mod linear;
mod lstm;
mod mlp;
mod transformer;

#[cfg(test)]
mod tests;

pub use attention::{AttentionCache, MultiHeadAttention};
pub use attention_pool::{AttentionPool, AttentionPoolCache};
pub use linear::{embed, embed_backward, Linear};
pub use lstm::{Lstm, LstmCache, LstmEncoder, LstmEncoderCache, LstmOutput};
pub use mlp::{MlpCache, MlpHead};
pub use transformer::{
    sinusoid, timing_signal, FeedForward, FeedForwardCache, LayerNorm, LayerNormCache, UniversalTransformer,
    UniversalTransformerCache, LAYER_NORM_EPS,
};
