//! Chunk decomposition of a BIO-labelled utterance.
//!
//! Every `B-x (I-x)*` group becomes one chunk typed `x`; every maximal run of
//! `O` tokens becomes one untyped chunk. The chunks tile the utterance.

use crate::corpus::{check_bio, SlotTag, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub tokens: Vec<String>,
    /// `None` for a run of `O` tokens.
    pub slot_type: Option<String>,
    pub start: usize,
    pub end: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// BIO tags for this chunk's own tokens.
    pub fn labels(&self) -> Vec<SlotTag> {
        bio_labels(self.slot_type.as_deref(), self.tokens.len(), false)
    }
}

/// Direct BIO emission over `n` tokens: `[B-t, I-t, ...]`, all `I-t` when the
/// run continues an already open span, or all `O` for untyped runs.
pub fn bio_labels(slot_type: Option<&str>, n: usize, continuation: bool) -> Vec<SlotTag> {
    match slot_type {
        None => vec![SlotTag::Outside; n],
        Some(t) => (0..n)
            .map(|i| {
                if i == 0 && !continuation {
                    SlotTag::begin(t)
                } else {
                    SlotTag::inside(t)
                }
            })
            .collect(),
    }
}

pub fn slot_chunks(u: &Utterance) -> Result<Vec<Chunk>> {
    chunks_from_labels(u.tokens(), u.slot_labels())
}

/// Chunk decomposition of raw token/label slices. Fails on non-strict BIO.
pub fn chunks_from_labels(tokens: &[String], labels: &[SlotTag]) -> Result<Vec<Chunk>> {
    if tokens.len() != labels.len() {
        return Err(Error::MalformedRecord {
            location: "chunker input".into(),
            reason: format!("{} tokens but {} labels", tokens.len(), labels.len()),
        });
    }
    check_bio(labels).map_err(|v| Error::IllegalBioTransition {
        location: "chunker input".into(),
        position: v.position,
        slot_type: v.label.slot_type().unwrap_or_default().to_string(),
        label: v.label.to_string(),
    })?;

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let slot_type = labels[start].slot_type();
        let mut end = start + 1;
        while end < labels.len() {
            let continues = matches!(
                (&labels[end], slot_type),
                (SlotTag::Outside, None) | (SlotTag::Inside(_), Some(_))
            );
            if !continues {
                break;
            }
            end += 1;
        }
        chunks.push(Chunk {
            tokens: tokens[start..end].to_vec(),
            slot_type: slot_type.map(str::to_string),
            start,
            end,
        });
        start = end;
    }
    Ok(chunks)
}

/// Inverse of [`slot_chunks`]: concatenates chunk tokens and re-emits BIO tags.
pub fn reassemble(chunks: &[Chunk]) -> Result<(Vec<String>, Vec<SlotTag>)> {
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    let mut expected = chunks.first().map_or(0, |c| c.start);
    for chunk in chunks {
        if chunk.start != expected || chunk.end <= chunk.start || chunk.tokens.len() != chunk.len() {
            return Err(Error::NonContiguousChunks {
                expected,
                found: chunk.start,
            });
        }
        expected = chunk.end;
        tokens.extend(chunk.tokens.iter().cloned());
        labels.extend(chunk.labels());
    }
    Ok((tokens, labels))
}
