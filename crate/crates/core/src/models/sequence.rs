use rand::Rng;

use super::config::{EncoderKind, ModelConfig};
use crate::encoders::{Linear, LstmEncoder, LstmEncoderCache, UniversalTransformer, UniversalTransformerCache};
use crate::error::{Error, Result};
use crate::numerics::{join, Params, Tensor};

/// One encoder instance of either family, producing per-step outputs and a
/// final state. For the transformer the final state is the output row of the
/// last unmasked position.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceEncoder {
    Lstm(LstmEncoder),
    Utrs { project: Linear, block: UniversalTransformer },
}

#[derive(Debug, Clone)]
pub enum SequenceEncoderCache {
    Lstm(LstmEncoderCache),
    Utrs {
        x: Tensor,
        block: UniversalTransformerCache,
        last: usize,
    },
}

impl SequenceEncoder {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, input: usize, rng: &mut R) -> Result<Self> {
        Ok(match config.encoder {
            EncoderKind::Lstm => {
                SequenceEncoder::Lstm(LstmEncoder::new(input, config.hidden_size, config.bidirectional, rng))
            }
            EncoderKind::Utrs => SequenceEncoder::Utrs {
                project: Linear::new(input, config.hidden_size, rng),
                block: UniversalTransformer::new(config.hidden_size, config.n_heads, config.ffn_filters, config.hops, rng)?,
            },
        })
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SequenceEncoder::Lstm(e) => e.output_dim(),
            SequenceEncoder::Utrs { block, .. } => block.dim(),
        }
    }

    pub fn forward(&self, x: &Tensor, mask: &[bool]) -> Result<(Tensor, Vec<f64>, SequenceEncoderCache)> {
        match self {
            SequenceEncoder::Lstm(e) => {
                let (h, last, cache) = e.forward(x, mask)?;
                Ok((h, last, SequenceEncoderCache::Lstm(cache)))
            }
            SequenceEncoder::Utrs { project, block } => {
                let last = mask
                    .iter()
                    .rposition(|&m| m)
                    .ok_or_else(|| Error::InvalidArgument("sequence is entirely masked".into()))?;
                let projected = project.forward(x)?;
                let (h, cache) = block.forward(&projected, mask)?;
                let final_state = h.row(last).to_vec();
                Ok((
                    h,
                    final_state,
                    SequenceEncoderCache::Utrs {
                        x: x.clone(),
                        block: cache,
                        last,
                    },
                ))
            }
        }
    }

    pub fn backward(
        &self,
        cache: &SequenceEncoderCache,
        d_out: &Tensor,
        d_last: &[f64],
        grads: &mut SequenceEncoder,
    ) -> Tensor {
        match (self, cache, grads) {
            (SequenceEncoder::Lstm(e), SequenceEncoderCache::Lstm(c), SequenceEncoder::Lstm(g)) => {
                e.backward(c, d_out, d_last, g)
            }
            (
                SequenceEncoder::Utrs { project, block },
                SequenceEncoderCache::Utrs {
                    x,
                    block: c,
                    last,
                },
                SequenceEncoder::Utrs {
                    project: gp,
                    block: gb,
                },
            ) => {
                let mut d = d_out.clone();
                for (a, b) in d.row_mut(*last).iter_mut().zip(d_last) {
                    *a += b;
                }
                let dp = block.backward(c, &d, gb);
                project.backward(x, &dp, gp)
            }
            _ => panic!("encoder, cache and gradient variants differ"),
        }
    }
}

impl Params for SequenceEncoder {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        match self {
            SequenceEncoder::Lstm(e) => e.visit(&join(prefix, "lstm"), f),
            SequenceEncoder::Utrs { project, block } => {
                project.visit(&join(prefix, "project"), f);
                block.visit(&join(prefix, "utrs"), f);
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        match self {
            SequenceEncoder::Lstm(e) => e.visit_mut(&join(prefix, "lstm"), f),
            SequenceEncoder::Utrs { project, block } => {
                project.visit_mut(&join(prefix, "project"), f);
                block.visit_mut(&join(prefix, "utrs"), f);
            }
        }
    }
}
