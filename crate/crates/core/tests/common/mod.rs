//! Helpers shared by the integration tests: independent reference
//! implementations, a recording provider, and random corpora.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Mutex;

use csaug::corpus::{Dataset, SlotTag, Split, Utterance};
use csaug::translate::{Provenance, TranslationProvider, TranslationRequest, TranslationResult};
use csaug::Result;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn tag(s: &str) -> SlotTag {
    s.parse().unwrap()
}

/// Chunk boundaries by direct rule: a chunk starts at position 0, at every
/// `B-`, and wherever the tag switches between `O` and non-`O`.
pub fn reference_chunks(labels: &[SlotTag]) -> Vec<(usize, usize, Option<String>)> {
    let mut out: Vec<(usize, usize, Option<String>)> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let starts = match (i, label) {
            (0, _) => true,
            (_, SlotTag::Begin(_)) => true,
            (_, SlotTag::Outside) => !matches!(labels[i - 1], SlotTag::Outside),
            (_, SlotTag::Inside(_)) => matches!(labels[i - 1], SlotTag::Outside),
        };
        if starts {
            let ty = match label {
                SlotTag::Outside => None,
                SlotTag::Begin(t) | SlotTag::Inside(t) => Some(t.clone()),
            };
            out.push((i, i + 1, ty));
        } else {
            out.last_mut().unwrap().1 = i + 1;
        }
    }
    out
}

/// Strict BIO validity, written independently of the library's checker.
pub fn is_valid_bio(labels: &[SlotTag]) -> bool {
    labels.iter().enumerate().all(|(i, l)| match l {
        SlotTag::Inside(t) => i > 0 && labels[i - 1].slot_type() == Some(t.as_str()),
        _ => true,
    })
}

/// Every valid BIO sequence of exactly `len` tags over {O, B-a, I-a, B-b, I-b}.
pub fn all_valid_sequences(len: usize) -> Vec<Vec<SlotTag>> {
    let alphabet = ["O", "B-a", "I-a", "B-b", "I-b"].map(tag);
    let mut out = Vec::new();
    let total = alphabet.len().pow(len as u32);
    for mut code in 0..total {
        let seq: Vec<SlotTag> = (0..len)
            .map(|_| {
                let t = alphabet[code % alphabet.len()].clone();
                code /= alphabet.len();
                t
            })
            .collect();
        if is_valid_bio(&seq) {
            out.push(seq);
        }
    }
    out
}

/// Multiset of slot types, counted at `B-` tags (valid BIO only).
pub fn slot_type_multiset(labels: &[SlotTag]) -> Vec<String> {
    let mut types: Vec<String> = labels
        .iter()
        .filter_map(|l| match l {
            SlotTag::Begin(t) => Some(t.clone()),
            _ => None,
        })
        .collect();
    types.sort();
    types
}

pub fn random_labels<R: Rng>(rng: &mut R, len: usize, types: &[&str]) -> Vec<SlotTag> {
    let mut labels: Vec<SlotTag> = Vec::with_capacity(len);
    for _ in 0..len {
        let prev_type = labels.last().and_then(|l| l.slot_type().map(str::to_string));
        let next = match rng.gen_range(0..3) {
            0 => SlotTag::Outside,
            1 => SlotTag::begin(types[rng.gen_range(0..types.len())]),
            _ => match prev_type {
                Some(t) => SlotTag::inside(t),
                None => SlotTag::Outside,
            },
        };
        labels.push(next);
    }
    labels
}

pub fn random_utterance<R: Rng>(rng: &mut R, id: &str, max_len: usize) -> Utterance {
    let len = rng.gen_range(1..=max_len);
    let labels = random_labels(rng, len, &["city", "date", "airline"]);
    let tokens = (0..len).map(|_| format!("w{}", rng.gen_range(0..50))).collect();
    let intent = ["flight", "fare", "airline"][rng.gen_range(0..3)];
    Utterance::new(id, tokens, labels, intent).unwrap()
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, max_len: usize) -> Dataset {
    let utterances = (0..n)
        .map(|i| random_utterance(rng, &format!("u{i}"), max_len))
        .collect();
    Dataset::new("en", Split::Train, utterances).unwrap()
}

/// Provider that answers every request with `1 + hash % 3` synthetic tokens
/// and records the target language of each call.
pub struct SpyProvider {
    pub languages: BTreeSet<String>,
    pub targets: Mutex<Vec<String>>,
}

impl SpyProvider {
    pub fn new(languages: &[&str]) -> Self {
        SpyProvider {
            languages: languages.iter().map(|s| s.to_string()).collect(),
            targets: Mutex::new(Vec::new()),
        }
    }

    pub fn recorded(&self) -> Vec<String> {
        self.targets.lock().unwrap().clone()
    }
}

impl TranslationProvider for SpyProvider {
    fn id(&self) -> String {
        "spy".into()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        Ok(self.languages.clone())
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        self.targets.lock().unwrap().push(req.target_lang.clone());
        let h = req
            .text
            .bytes()
            .fold(7usize, |h, b| h.wrapping_mul(31).wrapping_add(b as usize));
        let n = 1 + h % 3;
        let text: Vec<String> = (0..n).map(|i| format!("{}{}", req.target_lang, i)).collect();
        Ok(TranslationResult::from_text(
            text.join(" "),
            &req.target_lang,
            Provenance::Lexicon,
        ))
    }
}
