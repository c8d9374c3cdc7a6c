use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

/// Precision, recall and F1 from raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassScore {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub micro: ClassScore,
    pub happy: ClassScore,
    pub sad: ClassScore,
    pub angry: ClassScore,
    pub examples: usize,
}

impl EvalReport {
    pub fn f1(&self) -> f64 {
        self.micro.f1
    }

    pub fn class(&self, label: Label) -> Option<&ClassScore> {
        match label {
            Label::Happy => Some(&self.happy),
            Label::Sad => Some(&self.sad),
            Label::Angry => Some(&self.angry),
            Label::Others => None,
        }
    }
}

fn check(gold: &[Label], pred: &[Label]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Alignment(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty prediction list".into()));
    }
    Ok(())
}

/// One-vs-rest scores for happy, sad and angry, in that order.
pub fn per_class_f1(gold: &[Label], pred: &[Label]) -> Result<[ClassScore; 3]> {
    check(gold, pred)?;
    Ok(Label::EMOTIONS.map(|c| {
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (&g, &p) in gold.iter().zip(pred) {
            match (g == c, p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        ClassScore::from_counts(tp, fp, fn_)
    }))
}

/// Micro-averaged F1 with counts summed over the three emotion classes;
/// `others` contributes to no count.
pub fn micro_f1(gold: &[Label], pred: &[Label]) -> Result<EvalReport> {
    let [happy, sad, angry] = per_class_f1(gold, pred)?;
    let micro = ClassScore::from_counts(
        happy.tp + sad.tp + angry.tp,
        happy.fp + sad.fp + angry.fp,
        happy.fn_ + sad.fn_ + angry.fn_,
    );
    Ok(EvalReport {
        micro,
        happy,
        sad,
        angry,
        examples: gold.len(),
    })
}
