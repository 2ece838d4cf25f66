//! Multilingual code-switching augmentation.
//!
//! Each source utterance is split into chunks, every chunk is translated into
//! a language drawn uniformly from the effective language pool, slot labels
//! are re-aligned, and the pieces are reassembled. This is repeated `k` times
//! per utterance.

pub mod families;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::align::{AlignedChunk, AlignmentStrategy, DirectAlignment};
use crate::chunker::{slot_chunks, Chunk};
use crate::corpus::{Dataset, SlotTag, Utterance};
use crate::error::{Error, Result, UtteranceFailure};
use crate::hash::mix64;
use crate::translate::{Provenance, TranslationProvider, TranslationRequest, TranslationResult};

pub use families::{family_members, find_family, is_scriptio_continua, LanguageFamily, FAMILIES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Level {
    #[default]
    Chunk,
    Word,
    Sentence,
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chunk" => Ok(Level::Chunk),
            "word" => Ok(Level::Word),
            "sentence" => Ok(Level::Sentence),
            other => Err(Error::Configuration(format!(
                "unknown level `{other}` (expected chunk, word or sentence)"
            ))),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Chunk => "chunk",
            Level::Word => "word",
            Level::Sentence => "sentence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationConfig {
    pub level: Level,
    /// Code-switched copies per source utterance.
    pub k: usize,
    /// Sampling pool. Empty means "everything the provider supports".
    pub allowed_languages: BTreeSet<String>,
    /// Never sampled, whatever the pool says.
    pub excluded_languages: BTreeSet<String>,
    /// Replaces `allowed_languages` with the family's members.
    pub family: Option<String>,
    pub include_original: bool,
    pub seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            level: Level::Chunk,
            k: 5,
            allowed_languages: BTreeSet::new(),
            excluded_languages: BTreeSet::new(),
            family: None,
            include_original: true,
            seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// The sorted language pool, without consulting a provider.
    ///
    /// Fails when neither a family nor allowed languages are configured.
    pub fn effective_languages(&self) -> Result<Vec<String>> {
        self.resolve_pool(None)
    }

    /// The sorted language pool; an unconfigured pool falls back to the
    /// provider's supported languages, and every pool member must be
    /// supported by the provider.
    pub fn resolve_languages(&self, provider: &dyn TranslationProvider) -> Result<Vec<String>> {
        self.resolve_pool(Some(provider))
    }

    fn resolve_pool(&self, provider: Option<&dyn TranslationProvider>) -> Result<Vec<String>> {
        if self.k == 0 {
            return Err(Error::Configuration("k must be positive".into()));
        }
        let supported = provider.map(|p| p.supported_languages()).transpose()?;
        let base: BTreeSet<String> = if let Some(name) = &self.family {
            family_members(name)?
        } else if !self.allowed_languages.is_empty() {
            self.allowed_languages.clone()
        } else if let Some(supported) = &supported {
            supported.clone()
        } else {
            return Err(Error::Configuration(
                "no language pool: give allowed languages, a family, or a provider".into(),
            ));
        };
        let pool: Vec<String> = base.difference(&self.excluded_languages).cloned().collect();
        if pool.is_empty() {
            return Err(Error::Configuration(
                "effective language set is empty after exclusions".into(),
            ));
        }
        if let (Some(supported), Some(provider)) = (&supported, provider) {
            if let Some(missing) = pool.iter().find(|l| !supported.contains(*l)) {
                return Err(Error::UnsupportedLanguage {
                    provider: provider.id(),
                    source_lang: "*".into(),
                    target_lang: missing.clone(),
                });
            }
        }
        Ok(pool)
    }
}

/// Seed of the random stream for `(utterance index, repetition)`. Streams
/// are independent of processing order and worker count.
pub fn derive_seed(seed: u64, utterance_index: usize, repetition: usize) -> u64 {
    mix64(mix64(seed ^ mix64(utterance_index as u64)).wrapping_add(repetition as u64))
}

pub fn utterance_rng(seed: u64, utterance_index: usize, repetition: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, utterance_index, repetition))
}

/// One unit of translation with its sampled language.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedSegment {
    pub chunk: Chunk,
    /// The chunk continues a slot span opened by the previous segment.
    pub continuation: bool,
    pub language: String,
}

/// Segments an utterance for `level` and draws one language per segment
/// (one per utterance at sentence level). This is the only consumer of
/// randomness, so the plan fully determines the output.
pub fn plan_utterance<R: Rng + ?Sized>(
    u: &Utterance,
    level: Level,
    languages: &[String],
    rng: &mut R,
) -> Result<Vec<PlannedSegment>> {
    if languages.is_empty() {
        return Err(Error::Configuration("empty language pool".into()));
    }
    let chunks = slot_chunks(u)?;
    let draw = |rng: &mut R| languages[rng.gen_range(0..languages.len())].clone();
    let plan = match level {
        Level::Chunk => chunks
            .into_iter()
            .map(|chunk| PlannedSegment {
                language: draw(rng),
                chunk,
                continuation: false,
            })
            .collect(),
        Level::Word => {
            let mut plan = Vec::with_capacity(u.len());
            for chunk in chunks {
                for (offset, token) in chunk.tokens.iter().enumerate() {
                    plan.push(PlannedSegment {
                        chunk: Chunk {
                            tokens: vec![token.clone()],
                            slot_type: chunk.slot_type.clone(),
                            start: chunk.start + offset,
                            end: chunk.start + offset + 1,
                        },
                        continuation: offset > 0 && chunk.slot_type.is_some(),
                        language: draw(rng),
                    });
                }
            }
            plan
        }
        Level::Sentence => {
            let language = draw(rng);
            chunks
                .into_iter()
                .map(|chunk| PlannedSegment {
                    chunk,
                    continuation: false,
                    language: language.clone(),
                })
                .collect()
        }
    };
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSwitchedUtterance {
    pub utterance: Utterance,
    pub source_id: String,
    pub repetition: usize,
    pub chunks: Vec<AlignedChunk>,
}

impl CodeSwitchedUtterance {
    pub fn chunk_languages(&self) -> Vec<&str> {
        self.chunks.iter().map(|c| c.language.as_str()).collect()
    }
}

type ChunkFailure = (Option<(usize, usize)>, Error);

fn execute_plan(
    u: &Utterance,
    source_lang: &str,
    plan: Vec<PlannedSegment>,
    provider: &dyn TranslationProvider,
    aligner: &dyn AlignmentStrategy,
    repetition: usize,
) -> Result<CodeSwitchedUtterance, ChunkFailure> {
    let mut tokens = Vec::with_capacity(u.len());
    let mut labels: Vec<SlotTag> = Vec::with_capacity(u.len());
    let mut aligned = Vec::with_capacity(plan.len());
    for segment in plan {
        let span = Some((segment.chunk.start, segment.chunk.end));
        let translation = if segment.language == source_lang {
            TranslationResult {
                text: segment.chunk.text(),
                tokens: segment.chunk.tokens.clone(),
                provenance: Provenance::Source,
            }
        } else {
            let req = TranslationRequest::new(segment.chunk.text(), source_lang, segment.language.as_str())
                .map_err(|e| (span, e))?;
            provider.translate(&req).map_err(|e| (span, e))?
        };
        let piece = aligner
            .align(&segment.chunk, &translation, &segment.language, segment.continuation)
            .map_err(|e| (span, e))?;
        tokens.extend(piece.tokens.iter().cloned());
        labels.extend(piece.slot_labels.iter().cloned());
        aligned.push(piece);
    }
    let id = format!("{}#cs{}", u.id(), repetition);
    let utterance = Utterance::new(id, tokens, labels, u.intent()).map_err(|e| (None, e))?;
    Ok(CodeSwitchedUtterance {
        utterance,
        source_id: u.id().to_string(),
        repetition,
        chunks: aligned,
    })
}

fn failure(u: &Utterance, (span, error): ChunkFailure) -> UtteranceFailure {
    UtteranceFailure {
        id: u.id().to_string(),
        span,
        provider_failure: error.is_provider_failure(),
        message: error.to_string(),
    }
}

/// Produces the `repetition`-th code-switched copy of `u`.
pub fn code_switch_utterance<R: Rng + ?Sized>(
    u: &Utterance,
    source_lang: &str,
    cfg: &AugmentationConfig,
    provider: &dyn TranslationProvider,
    rng: &mut R,
    repetition: usize,
) -> Result<CodeSwitchedUtterance> {
    let languages = cfg.resolve_languages(provider)?;
    let plan =
        plan_utterance(u, cfg.level, &languages, rng).map_err(|e| Error::Augmentation(vec![failure(u, (None, e))]))?;
    execute_plan(u, source_lang, plan, provider, &DirectAlignment, repetition)
        .map_err(|f| Error::Augmentation(vec![failure(u, f)]))
}

#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub dataset: Dataset,
    /// The code-switched copies in output order (originals excluded).
    pub switched: Vec<CodeSwitchedUtterance>,
}

pub fn augment_dataset(ds: &Dataset, cfg: &AugmentationConfig, provider: &dyn TranslationProvider) -> Result<Dataset> {
    Ok(augment_dataset_with(ds, cfg, provider, 1)?.dataset)
}

/// Augments with `workers` threads. Output is identical for every worker count.
///
/// Layout: the originals (when `include_original`), then the `k` copies of
/// utterance 1, the `k` copies of utterance 2, and so on. Any failure aborts
/// the run and reports every failing utterance.
pub fn augment_dataset_with(
    ds: &Dataset,
    cfg: &AugmentationConfig,
    provider: &dyn TranslationProvider,
    workers: usize,
) -> Result<AugmentedDataset> {
    let languages = cfg.resolve_languages(provider)?;
    let source_lang = ds.language();
    let k = cfg.k;
    let run_one = |index: usize, u: &Utterance| -> Vec<Result<CodeSwitchedUtterance, UtteranceFailure>> {
        (1..=k)
            .map(|rep| {
                let mut rng = utterance_rng(cfg.seed, index, rep);
                let plan = plan_utterance(u, cfg.level, &languages, &mut rng).map_err(|e| failure(u, (None, e)))?;
                execute_plan(u, source_lang, plan, provider, &DirectAlignment, rep).map_err(|f| failure(u, f))
            })
            .collect()
    };

    let per_utterance: Vec<Vec<_>> = if workers <= 1 {
        ds.iter().enumerate().map(|(i, u)| run_one(i, u)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Configuration(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| {
            ds.utterances()
                .par_iter()
                .enumerate()
                .map(|(i, u)| run_one(i, u))
                .collect()
        })
    };

    let mut switched = Vec::with_capacity(ds.len() * k);
    let mut failures = Vec::new();
    for result in per_utterance.into_iter().flatten() {
        match result {
            Ok(cs) => switched.push(cs),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Augmentation(failures));
    }

    let mut utterances = Vec::with_capacity(switched.len() + if cfg.include_original { ds.len() } else { 0 });
    if cfg.include_original {
        utterances.extend(ds.iter().cloned());
    }
    utterances.extend(switched.iter().map(|cs| cs.utterance.clone()));
    let dataset = Dataset::new(ds.language(), ds.split(), utterances)?;
    Ok(AugmentedDataset { dataset, switched })
}

/// The language plan of every copy, computed without any translation calls.
pub fn plan_dataset(
    ds: &Dataset,
    cfg: &AugmentationConfig,
    languages: &[String],
) -> Result<Vec<(String, Vec<PlannedSegment>)>> {
    if cfg.k == 0 {
        return Err(Error::Configuration("k must be positive".into()));
    }
    let mut plans = Vec::with_capacity(ds.len() * cfg.k);
    for (i, u) in ds.iter().enumerate() {
        for rep in 1..=cfg.k {
            let mut rng = utterance_rng(cfg.seed, i, rep);
            plans.push((
                format!("{}#cs{rep}", u.id()),
                plan_utterance(u, cfg.level, languages, &mut rng)?,
            ));
        }
    }
    Ok(plans)
}

#[derive(Debug, Serialize)]
struct AuditChunk<'a> {
    start: usize,
    end: usize,
    slot_type: Option<&'a str>,
    language: &'a str,
    provenance: &'a str,
    tokens: &'a [String],
}

#[derive(Debug, Serialize)]
struct AuditRecord<'a> {
    id: &'a str,
    source_id: &'a str,
    repetition: usize,
    original: bool,
    chunks: Vec<AuditChunk<'a>>,
}

/// Writes one JSON line per output utterance, in output order.
pub fn write_audit<W: Write>(
    out: &mut W,
    source: &Dataset,
    augmented: &AugmentedDataset,
    include_original: bool,
) -> std::io::Result<()> {
    let mut emit = |record: &AuditRecord<'_>| -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")
    };
    if include_original {
        for u in source {
            emit(&AuditRecord {
                id: u.id(),
                source_id: u.id(),
                repetition: 0,
                original: true,
                chunks: Vec::new(),
            })?;
        }
    }
    for cs in &augmented.switched {
        let labels = cs.utterance.slot_labels();
        let mut offset = 0;
        let chunks = cs
            .chunks
            .iter()
            .map(|c| {
                let slot_type = labels[offset].slot_type();
                offset += c.tokens.len();
                AuditChunk {
                    start: c.source_span.0,
                    end: c.source_span.1,
                    slot_type,
                    language: &c.language,
                    provenance: c.provenance.as_str(),
                    tokens: &c.tokens,
                }
            })
            .collect();
        emit(&AuditRecord {
            id: cs.utterance.id(),
            source_id: &cs.source_id,
            repetition: cs.repetition,
            original: false,
            chunks,
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::translate::LexiconProvider;

    fn set(codes: &[&str]) -> BTreeSet<String> {
        codes.iter().map(|c| c.to_string()).collect()
    }

    fn identity_lexicon(langs: &[&str], words: &[&str]) -> LexiconProvider {
        let tables = langs.iter().map(|l| {
            let entries: Vec<(String, String)> = words.iter().map(|w| (w.to_string(), w.to_string())).collect();
            (("en".to_string(), l.to_string()), entries)
        });
        LexiconProvider::from_tables("lex:identity", tables).unwrap()
    }

    fn dataset(n: usize) -> Dataset {
        let us = (0..n)
            .map(|i| Utterance::parse(&format!("u{i}"), "fly to new york", "O O B-city I-city", "flight").unwrap())
            .collect();
        Dataset::new("en", Split::Train, us).unwrap()
    }

    #[test]
    fn level_names() {
        assert_eq!("word".parse::<Level>().unwrap(), Level::Word);
        assert!("phrase".parse::<Level>().is_err());
    }

    #[test]
    fn pool_resolution() {
        let cfg = AugmentationConfig {
            family: Some("turkic".into()),
            excluded_languages: set(&["tr"]),
            ..AugmentationConfig::default()
        };
        assert_eq!(cfg.effective_languages().unwrap(), ["az", "kk", "ug"]);

        let cfg = AugmentationConfig {
            allowed_languages: set(&["aa"]),
            excluded_languages: set(&["aa"]),
            ..AugmentationConfig::default()
        };
        assert!(matches!(cfg.effective_languages(), Err(Error::Configuration(_))));

        let cfg = AugmentationConfig {
            allowed_languages: set(&["aa"]),
            k: 0,
            ..AugmentationConfig::default()
        };
        assert!(cfg.effective_languages().is_err());

        assert!(AugmentationConfig::default().effective_languages().is_err());
    }

    #[test]
    fn pool_defaults_to_provider_languages() {
        let p = identity_lexicon(&["aa", "bb", "hi"], &["x"]);
        let cfg = AugmentationConfig {
            excluded_languages: set(&["hi"]),
            ..AugmentationConfig::default()
        };
        assert_eq!(cfg.resolve_languages(&p).unwrap(), ["aa", "bb"]);

        let cfg = AugmentationConfig {
            allowed_languages: set(&["aa", "zz"]),
            ..AugmentationConfig::default()
        };
        assert!(matches!(
            cfg.resolve_languages(&p),
            Err(Error::UnsupportedLanguage { .. })
        ));
    }

    #[test]
    fn identity_provider_keeps_utterance() {
        let p = identity_lexicon(&["aa"], &["fly to", "new york"]);
        let u = Utterance::parse("1", "fly to new york", "O O B-city I-city", "flight").unwrap();
        let cfg = AugmentationConfig {
            allowed_languages: set(&["aa"]),
            ..AugmentationConfig::default()
        };
        let mut rng = utterance_rng(42, 0, 1);
        let cs = code_switch_utterance(&u, "en", &cfg, &p, &mut rng, 1).unwrap();
        assert_eq!(cs.utterance.tokens(), u.tokens());
        assert_eq!(cs.utterance.slot_labels(), u.slot_labels());
        assert_eq!(cs.utterance.id(), "1#cs1");
        assert_eq!(cs.chunk_languages(), ["aa", "aa"]);
    }

    #[test]
    fn word_level_keeps_multiword_slot_as_one_span() {
        let p = identity_lexicon(&["aa", "bb"], &["fly", "to", "new", "york"]);
        let u = Utterance::parse("1", "fly to new york", "O O B-city I-city", "flight").unwrap();
        let cfg = AugmentationConfig {
            level: Level::Word,
            allowed_languages: set(&["aa", "bb"]),
            ..AugmentationConfig::default()
        };
        let cs = code_switch_utterance(&u, "en", &cfg, &p, &mut utterance_rng(1, 0, 1), 1).unwrap();
        assert_eq!(cs.chunks.len(), 4);
        assert_eq!(cs.utterance.slot_labels(), u.slot_labels());
    }

    #[test]
    fn sentence_level_uses_one_language() {
        let p = identity_lexicon(&["aa", "bb", "cc"], &["fly to", "new york"]);
        let u = Utterance::parse("1", "fly to new york", "O O B-city I-city", "flight").unwrap();
        let cfg = AugmentationConfig {
            level: Level::Sentence,
            allowed_languages: set(&["aa", "bb", "cc"]),
            ..AugmentationConfig::default()
        };
        for seed in 0..20 {
            let cs = code_switch_utterance(&u, "en", &cfg, &p, &mut utterance_rng(seed, 0, 1), 1).unwrap();
            let langs = cs.chunk_languages();
            assert!(langs.windows(2).all(|w| w[0] == w[1]), "{langs:?}");
        }
    }

    #[test]
    fn source_language_draw_keeps_chunk() {
        let p = identity_lexicon(&["aa"], &["x"]);
        let u = Utterance::parse("1", "fly to boston", "O O B-city", "flight").unwrap();
        let plan = vec![PlannedSegment {
            chunk: slot_chunks(&u).unwrap()[0].clone(),
            continuation: false,
            language: "en".into(),
        }];
        let u2 = Utterance::parse("1", "fly to", "O O", "flight").unwrap();
        let cs = execute_plan(&u2, "en", plan, &p, &DirectAlignment, 1).unwrap();
        assert_eq!(cs.chunks[0].provenance, Provenance::Source);
        assert_eq!(cs.utterance.tokens(), u2.tokens());
    }

    #[test]
    fn sizes_and_order() {
        let p = identity_lexicon(&["aa"], &["fly to", "new york"]);
        let mut cfg = AugmentationConfig {
            k: 2,
            allowed_languages: set(&["aa"]),
            include_original: false,
            ..AugmentationConfig::default()
        };
        let out = augment_dataset(&dataset(3), &cfg, &p).unwrap();
        assert_eq!(out.len(), 6);
        let ids: Vec<&str> = out.iter().map(Utterance::id).collect();
        assert_eq!(ids, ["u0#cs1", "u0#cs2", "u1#cs1", "u1#cs2", "u2#cs1", "u2#cs2"]);

        cfg.include_original = true;
        let out = augment_dataset(&dataset(3), &cfg, &p).unwrap();
        assert_eq!(out.len(), 9);
        let ids: Vec<&str> = out.iter().take(4).map(Utterance::id).collect();
        assert_eq!(ids, ["u0", "u1", "u2", "u0#cs1"]);
    }

    #[test]
    fn failures_name_utterance_and_span() {
        // The lexicon has no en-zz table.
        let p = identity_lexicon(&["aa"], &["x"]);
        let u = Utterance::parse("bad", "fly", "O", "i").unwrap();
        let plan = vec![PlannedSegment {
            chunk: slot_chunks(&u).unwrap()[0].clone(),
            continuation: false,
            language: "zz".into(),
        }];
        let f = execute_plan(&u, "en", plan, &p, &DirectAlignment, 1).unwrap_err();
        let f = failure(&u, f);
        assert_eq!(f.id, "bad");
        assert_eq!(f.span, Some((0, 1)));
        assert!(f.provider_failure);
    }

    #[test]
    fn dry_run_plan_matches_execution() {
        let p = identity_lexicon(&["aa", "bb", "cc"], &["fly to", "new york"]);
        let cfg = AugmentationConfig {
            k: 3,
            allowed_languages: set(&["aa", "bb", "cc"]),
            seed: 9,
            ..AugmentationConfig::default()
        };
        let ds = dataset(4);
        let plans = plan_dataset(&ds, &cfg, &cfg.effective_languages().unwrap()).unwrap();
        let out = augment_dataset_with(&ds, &cfg, &p, 1).unwrap();
        assert_eq!(plans.len(), out.switched.len());
        for ((id, plan), cs) in plans.iter().zip(&out.switched) {
            assert_eq!(id, cs.utterance.id());
            let planned: Vec<&str> = plan.iter().map(|s| s.language.as_str()).collect();
            assert_eq!(planned, cs.chunk_languages());
        }
    }

    #[test]
    fn audit_lines() {
        let p = identity_lexicon(&["aa"], &["fly to", "new york"]);
        let cfg = AugmentationConfig {
            k: 1,
            allowed_languages: set(&["aa"]),
            ..AugmentationConfig::default()
        };
        let ds = dataset(2);
        let out = augment_dataset_with(&ds, &cfg, &p, 1).unwrap();
        let mut buf = Vec::new();
        write_audit(&mut buf, &ds, &out, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0]["original"], true);
        assert_eq!(lines[2]["id"], "u0#cs1");
        assert_eq!(lines[2]["chunks"][1]["slot_type"], "city");
        assert_eq!(lines[2]["chunks"][1]["start"], 2);
        assert_eq!(lines[2]["chunks"][1]["language"], "aa");
        assert_eq!(lines[2]["chunks"][1]["provenance"], "lexicon");
    }
}
