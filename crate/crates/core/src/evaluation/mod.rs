//! The shared-task micro-F1 over happy, sad and angry, per-class scores,
//! and Pearson agreement between prediction sets.

mod agreement;
mod f1;

pub use agreement::{agreement_matrix, matrix_to_tsv, pearson_agreement};
pub use f1::{micro_f1, per_class_f1, ClassScore, EvalReport};
