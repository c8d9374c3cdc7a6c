use log::warn;

use crate::data::{Label, NUM_CLASSES};
use crate::error::{Error, Result};

fn one_hot(labels: &[Label]) -> Vec<f64> {
    let mut out = vec![0.0; labels.len() * NUM_CLASSES];
    for (i, l) in labels.iter().enumerate() {
        out[i * NUM_CLASSES + l.index()] = 1.0;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        warn!("pearson correlation undefined for a constant vector");
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson r between the flattened one-hot encodings of two prediction
/// lists. A constant encoding yields `NaN` and a logged warning.
pub fn pearson_agreement(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Alignment(format!("{} vs {} predictions", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::InvalidArgument("agreement needs at least two examples".into()));
    }
    Ok(pearson(&one_hot(a), &one_hot(b)))
}

/// Symmetric matrix of pairwise agreements with unit diagonal.
pub fn agreement_matrix(predictions: &[&[Label]]) -> Result<Vec<Vec<f64>>> {
    let k = predictions.len();
    let mut m = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let r = pearson_agreement(predictions[i], predictions[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    if k == 1 {
        pearson_agreement(predictions[0], predictions[0])?;
    }
    Ok(m)
}

/// TSV with model names heading both the columns and the rows.
pub fn matrix_to_tsv(names: &[String], matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("model");
    for n in names {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    for (n, row) in names.iter().zip(matrix) {
        out.push_str(n);
        for v in row {
            out.push_str(&format!("\t{v:.6}"));
        }
        out.push('\n');
    }
    out
}
