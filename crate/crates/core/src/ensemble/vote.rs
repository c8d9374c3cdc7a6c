use super::PredictionSet;
use crate::data::{Label, NUM_CLASSES};
use crate::error::{Error, Result};

/// The label with a strict plurality of `votes`; any tie for the top count
/// yields `others`.
pub fn majority_vote(votes: &[Label]) -> Result<Label> {
    if votes.is_empty() {
        return Err(Error::InvalidArgument("majority vote over no votes".into()));
    }
    let mut counts = [0usize; NUM_CLASSES];
    for v in votes {
        counts[v.index()] += 1;
    }
    let top = *counts.iter().max().expect("four classes");
    let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == top);
    let (first, _) = winners.next().expect("top count is attained");
    if winners.next().is_some() {
        return Ok(Label::Others);
    }
    Ok(Label::from_index(first).expect("class index"))
}

/// Per-example majority vote across aligned prediction sets.
pub fn vote_committee(sets: &[PredictionSet]) -> Result<PredictionSet> {
    combine(sets, "committee")
}

/// Majority vote over ensemble outputs and extra models alike.
pub fn final_ensemble(sets: &[PredictionSet]) -> Result<PredictionSet> {
    combine(sets, "ensemble")
}

fn combine(sets: &[PredictionSet], name: &str) -> Result<PredictionSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::InvalidArgument("voting needs at least one prediction set".into()))?;
    for s in &sets[1..] {
        s.check_ids(&first.ids)?;
    }
    let mut votes = Vec::with_capacity(sets.len());
    let labels = (0..first.len())
        .map(|i| {
            votes.clear();
            votes.extend(sets.iter().map(|s| s.labels[i]));
            majority_vote(&votes)
        })
        .collect::<Result<Vec<_>>>()?;
    PredictionSet::new(name, first.ids.clone(), labels, None)
}
