//! Trainable hierarchical geolocalization head.
//!
//! The library classifies pre-extracted feature vectors into four nested
//! location levels (city, state/province, country, continent). The head
//! combines per-level linear classifiers, multihead attention over the
//! concatenated logit vector, a scene branch trained against soft frame
//! distributions, and a text-alignment branch trained against frozen
//! label embeddings. Inference can refine fine predictions with coarse
//! probabilities and trace codependent label paths. A data pipeline
//! (manifests, binary feature files, stratified splitting, synthetic
//! data) and distribution-inequality analytics round out the crate.

pub mod error;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod rng;
pub mod scene;
pub mod taxonomy;
pub mod textalign;

pub use error::{Error, Result};
