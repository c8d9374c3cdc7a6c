use std::time::Instant;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dialogue, EncodedDialogue, Label};
use crate::error::{Error, Result};
use crate::evaluation::micro_f1;
use crate::models::Classifier;
use crate::numerics::{Adam, LrSchedule, Params};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    /// Epochs without a validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 50,
            batch_size: 32,
            schedule: LrSchedule::Fixed { lr: 1e-3 },
            patience: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
}

/// Per-epoch history of a run. Wall time is kept out of serialisation so
/// reports of identical runs are byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochReport>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.epochs == other.epochs && self.best_epoch == other.best_epoch && self.best_val_f1 == other.best_val_f1
    }
}

fn labelled(set: &[Dialogue], what: &str) -> Result<Vec<Label>> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(format!("{what} set is empty")));
    }
    set.iter()
        .map(|d| {
            d.label
                .ok_or_else(|| Error::InvalidArgument(format!("{what} example {} has no label", d.id)))
        })
        .collect()
}

/// Micro-F1 of `model` on an encoded, labelled set.
pub fn evaluate_encoded(model: &Classifier, inputs: &[EncodedDialogue], gold: &[Label]) -> Result<f64> {
    let pred = inputs
        .iter()
        .map(|x| model.predict(x).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(micro_f1(gold, &pred)?.f1())
}

/// Mini-batch Adam with per-epoch reshuffling and early stopping on
/// validation micro-F1.
///
/// Stops once `patience` consecutive epochs fail to beat the best score and
/// returns the parameters of the earliest best epoch, rounded to `f32`.
pub fn train(
    mut model: Classifier,
    train_set: &[Dialogue],
    val_set: &[Dialogue],
    opts: &TrainOptions,
) -> Result<(Classifier, TrainReport)> {
    let start = Instant::now();
    if opts.batch_size < 1 || opts.max_epochs < 1 {
        return Err(Error::InvalidArgument("batch_size and max_epochs must be at least 1".into()));
    }
    let train_gold = labelled(train_set, "training")?;
    let val_gold = labelled(val_set, "validation")?;
    let train_x: Vec<EncodedDialogue> = train_set.iter().map(|d| model.encode(d)).collect();
    let val_x: Vec<EncodedDialogue> = val_set.iter().map(|d| model.encode(d)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(&model.params);
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, _)> = None;
    let mut since_best = 0;

    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            grads.zero();
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss += model
                    .accumulate(&train_x[i], train_gold[i], Some(&mut rng), &mut grads)
                    .map_err(|e| match e {
                        Error::NonFinite(message) => Error::Diverged { epoch, message },
                        e => e,
                    })?;
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged {
                    epoch,
                    message: format!("non-finite loss after {} optimizer steps", adam.steps_taken()),
                });
            }
            total += batch_loss;
            grads.scale_all(1.0 / batch.len() as f64);
            let lr = opts.schedule.lr(adam.steps_taken() + 1)?;
            adam.step(&mut model.params, &grads, lr)?;
        }
        let train_loss = total / train_x.len() as f64;
        let val_f1 = evaluate_encoded(&model, &val_x, &val_gold)?;
        debug!("epoch {epoch}: loss {train_loss:.5}, val F1 {val_f1:.4}");
        epochs.push(EpochReport {
            epoch,
            train_loss,
            val_f1,
        });
        match &best {
            Some((_, f1, _)) if val_f1 <= *f1 => {
                since_best += 1;
                if since_best > opts.patience {
                    break;
                }
            }
            _ => {
                best = Some((epoch, val_f1, model.params.clone()));
                since_best = 0;
            }
        }
    }
    let (best_epoch, best_val_f1, params) = best.expect("at least one epoch runs");
    model.params = params;
    model.params.round_to_f32();
    info!("best epoch {best_epoch} of {} with val F1 {best_val_f1:.4}", epochs.len());
    Ok((
        model,
        TrainReport {
            epochs,
            best_epoch,
            best_val_f1,
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_vocab;
    use crate::data::synthetic::{generate, SyntheticSpec};
    use crate::models::{Architecture, ModelConfig};

    fn tiny_model(data: &[Dialogue]) -> Classifier {
        let config = ModelConfig {
            architecture: Architecture::Flat,
            embed_dim: 8,
            hidden_size: 8,
            dropout: 0.0,
            ..ModelConfig::default()
        };
        Classifier::new(config, build_vocab(data, 1).unwrap()).unwrap()
    }

    fn corpus(n: usize, seed: u64) -> Vec<Dialogue> {
        let mut spec = SyntheticSpec::new(n, seed);
        spec.min_len = 2;
        spec.max_len = 4;
        spec.negation_rate = 0.0;
        generate(&spec, "t")
    }

    #[test]
    fn same_seed_same_report() {
        let data = corpus(60, 1);
        let opts = TrainOptions {
            max_epochs: 3,
            batch_size: 8,
            seed: 4,
            ..TrainOptions::default()
        };
        let (a, ra) = train(tiny_model(&data), &data[..40], &data[40..], &opts).unwrap();
        let (b, rb) = train(tiny_model(&data), &data[..40], &data[40..], &opts).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    }

    #[test]
    fn patience_zero_stops_after_first_non_improvement() {
        let data = corpus(40, 2);
        let opts = TrainOptions {
            max_epochs: 40,
            patience: 0,
            schedule: LrSchedule::Fixed { lr: 1e-6 },
            ..TrainOptions::default()
        };
        let (_, r) = train(tiny_model(&data), &data[..30], &data[30..], &opts).unwrap();
        let mut best = f64::MIN;
        let mut first_miss = None;
        for e in &r.epochs {
            if e.val_f1 <= best {
                first_miss = Some(e.epoch);
                break;
            }
            best = e.val_f1;
        }
        assert_eq!(Some(r.epochs.len()), first_miss);
    }

    #[test]
    fn best_epoch_is_earliest_maximum() {
        let data = corpus(80, 3);
        let opts = TrainOptions {
            max_epochs: 8,
            patience: 8,
            batch_size: 16,
            ..TrainOptions::default()
        };
        let (_, r) = train(tiny_model(&data), &data[..60], &data[60..], &opts).unwrap();
        let max = r.epochs.iter().map(|e| e.val_f1).fold(f64::MIN, f64::max);
        let earliest = r.epochs.iter().find(|e| e.val_f1 == max).unwrap().epoch;
        assert_eq!(r.best_epoch, earliest);
        assert_eq!(r.best_val_f1, max);
    }

    #[test]
    fn returned_model_is_f32_exact() {
        let data = corpus(30, 5);
        let opts = TrainOptions {
            max_epochs: 1,
            ..TrainOptions::default()
        };
        let (m, _) = train(tiny_model(&data), &data[..20], &data[20..], &opts).unwrap();
        assert!(m.params.flatten().iter().all(|&v| v as f32 as f64 == v));
    }

    #[test]
    fn divergence_is_reported() {
        let data = corpus(30, 6);
        let mut model = tiny_model(&data);
        model.params.head.output.b.data_mut()[0] = f64::INFINITY;
        let err = train(model, &data[..20], &data[20..], &TrainOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }), "{err}");
    }

    #[test]
    fn unlabeled_or_empty_sets_are_rejected() {
        let data = corpus(10, 7);
        let mut unlabeled = data.clone();
        unlabeled[0].label = None;
        assert!(train(tiny_model(&data), &unlabeled, &data, &TrainOptions::default()).is_err());
        assert!(train(tiny_model(&data), &data, &[], &TrainOptions::default()).is_err());
    }
}
