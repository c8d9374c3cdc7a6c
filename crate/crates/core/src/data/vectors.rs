use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vocab::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Half-width of the uniform distribution used for rows missing from the file.
pub const OOV_INIT_RANGE: f64 = 0.05;

/// Embedding table for `vocab` from a whitespace-separated text file
/// (`token v1 .. v_dim` per line, optional `count dim` header).
///
/// Rows for tokens absent from the file are drawn from
/// `uniform(-0.05, 0.05)` under `seed`; the `<pad>` row is zero.
pub fn load_word_vectors(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<Tensor> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_word_vectors(&text, vocab, dim, seed, path)
}

pub fn parse_word_vectors(
    text: &str,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
    origin: impl AsRef<Path>,
) -> Result<Tensor> {
    let origin = origin.as_ref();
    let mut table = random_embeddings(vocab.len(), dim, seed)?;
    let mut filled = vec![false; vocab.len()];
    let mut hits = 0usize;
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        if fields.len() != dim + 1 {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected {dim} values, found {}", fields.len() - 1),
            ));
        }
        let Some(id) = vocab.get(fields[0]) else { continue };
        if filled[id] {
            continue;
        }
        let row = table.row_mut(id);
        for (slot, f) in row.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse::<f64>()
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
        }
        filled[id] = true;
        hits += 1;
    }
    table.row_mut(PAD).fill(0.0);
    table.ensure_finite("word vectors")?;
    log::info!("word vectors: {hits}/{} vocabulary rows found", vocab.len());
    Ok(table)
}

/// Seeded `uniform(-0.05, 0.05)` table with a zero `<pad>` row.
pub fn random_embeddings(rows: usize, dim: usize, seed: u64) -> Result<Tensor> {
    uniform_embeddings(rows, dim, OOV_INIT_RANGE, seed)
}

/// Seeded `uniform(-half_width, half_width)` table with a zero `<pad>` row.
pub fn uniform_embeddings(rows: usize, dim: usize, half_width: f64, seed: u64) -> Result<Tensor> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("half width must be positive, got {half_width}")));
    }
    if rows == 0 || dim == 0 {
        return Err(Error::InvalidArgument("embedding table needs rows and dim > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Tensor::zeros(&[rows, dim]);
    for v in table.data_mut() {
        *v = rng.gen_range(-half_width..half_width);
    }
    table.row_mut(PAD).fill(0.0);
    Ok(table)
}
