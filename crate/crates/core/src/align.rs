//! Slot-label recreation for translated chunks.

use crate::chunker::{bio_labels, Chunk};
use crate::corpus::SlotTag;
use crate::error::{Error, Result};
use crate::translate::{Provenance, TranslationResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedChunk {
    pub tokens: Vec<String>,
    pub slot_labels: Vec<SlotTag>,
    /// `(start, end)` of the chunk in the source utterance.
    pub source_span: (usize, usize),
    pub language: String,
    pub provenance: Provenance,
}

/// Maps a chunk and its translation to labelled tokens.
pub trait AlignmentStrategy: Send + Sync {
    /// `continuation` is set when the chunk continues a slot span opened by
    /// the preceding chunk (word-level switching splits multiword slots).
    fn align(
        &self,
        chunk: &Chunk,
        translation: &TranslationResult,
        language: &str,
        continuation: bool,
    ) -> Result<AlignedChunk>;
}

/// Re-emits BIO tags over the translated tokens from the chunk's slot type
/// alone: `[B-t, I-t, ..., I-t]`, or all `O` for untyped chunks.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectAlignment;

impl AlignmentStrategy for DirectAlignment {
    fn align(
        &self,
        chunk: &Chunk,
        translation: &TranslationResult,
        language: &str,
        continuation: bool,
    ) -> Result<AlignedChunk> {
        if translation.tokens.is_empty() {
            return Err(Error::EmptyTranslation(chunk.text()));
        }
        Ok(AlignedChunk {
            tokens: translation.tokens.clone(),
            slot_labels: bio_labels(chunk.slot_type.as_deref(), translation.tokens.len(), continuation),
            source_span: (chunk.start, chunk.end),
            language: language.to_string(),
            provenance: translation.provenance,
        })
    }
}

pub fn align_label(chunk: &Chunk, translation: &TranslationResult, language: &str) -> Result<AlignedChunk> {
    DirectAlignment.align(chunk, translation, language, false)
}
