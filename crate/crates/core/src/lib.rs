//! Emotion classification for three-turn dialogues.
//!
//! The crate covers the whole pipeline: corpus and feature ingestion
//! ([`data`]), trainable layers ([`encoders`]), flat/hierarchical classifiers
//! and a logistic-regression baseline ([`models`]), training with voting
//! committees ([`training`]), the three-class micro-F1 metric
//! ([`evaluation`]), majority-vote ensembling ([`ensemble`]) and Gaussian
//! process Bayesian optimisation ([`hpo`]). The `del` binary wires these
//! together ([`cli`]).

pub mod error;
pub mod cli;
pub mod data;
pub mod ensemble;
pub mod hpo;
pub mod encoders;
pub mod evaluation;
pub mod io;
pub mod models;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
