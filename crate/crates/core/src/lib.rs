//! Multilingual code-switching data augmentation for joint intent
//! classification / slot filling corpora.
//!
//! The pipeline: [`corpus`] reads BIO-tagged datasets, [`chunker`] splits
//! utterances into slot chunks, [`translate`] renders chunks in other
//! languages, [`align`] recreates slot labels over the translations, and
//! [`augment`] drives the whole thing `k` times per utterance. [`toymodel`]
//! is a small joint intent/slot classifier with a synthetic multilingual
//! corpus for checking zero-shot transfer end to end.

pub mod align;
pub mod augment;
pub mod chunker;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod hash;
pub mod metrics;
pub mod toymodel;
pub mod translate;

pub use error::{Error, Result, UtteranceFailure};
