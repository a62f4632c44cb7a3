//! News-driven credit downgrade modeling.
//!
//! The library covers the full pipeline: news preprocessing ([`corpus`]),
//! downgrade label construction from two-agency rating timelines ([`ratings`]),
//! three text featurizations (sentiment lexicons in [`lexicon`], LDA topics in
//! [`topics`], document embeddings in [`embeddings`]), SMOTE-balanced logistic
//! regression ([`classifier`]), wiring and model stacking ([`pipeline`]),
//! metrics and robustness harnesses ([`evaluation`]), and a seeded synthetic
//! data generator ([`synthgen`]) so everything runs at desk scale.

pub mod classifier;
pub mod corpus;
pub mod embeddings;
pub mod evaluation;
pub mod key;
pub mod lexicon;
pub mod manifest;
pub mod pipeline;
pub mod ratings;
pub mod synthgen;
pub mod topics;

pub use key::RowKey;
