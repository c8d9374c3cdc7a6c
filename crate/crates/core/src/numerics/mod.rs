//! Dense tensors, activation/softmax/dropout primitives, Adam with the Noam
//! schedule, and the finite-difference gradient checker every layer is
//! verified against.

mod gradcheck;
pub(crate) mod ops;
mod optim;
mod params;
mod tensor;

pub use gradcheck::{grad_check, FnObjective, Objective, ParamObjective, REL_ERROR_FLOOR};
pub use ops::{dropout, dropout_mask, elementwise, log_sum_exp, matmul, sigmoid, softmax, softmax_in_place, Activation};
pub use optim::{adam_step, noam_lr, Adam, AdamState, LrSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
#[allow(unused_imports)]
pub(crate) use params::join;
pub use params::Params;
pub use tensor::Tensor;
