//! Phrase translation behind a provider trait.
//!
//! Providers: [`LexiconProvider`] (offline, deterministic, file backed),
//! [`HttpProvider`] (JSON over HTTP) and [`CachedProvider`], which puts a
//! persistent [`TranslationCache`] in front of any other provider.

mod cache;
mod http;
mod lexicon;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

pub use cache::{CachedProvider, TranslationCache};
pub use http::{HttpProvider, TOKEN_ENV};
pub use lexicon::LexiconProvider;

use crate::augment::families::is_scriptio_continua;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TranslationRequest {
    pub text: String,
    pub source_lang: String,
    pub target_lang: String,
}

impl TranslationRequest {
    pub fn new(
        text: impl Into<String>,
        source_lang: impl Into<String>,
        target_lang: impl Into<String>,
    ) -> Result<Self> {
        let req = TranslationRequest {
            text: text.into(),
            source_lang: source_lang.into(),
            target_lang: target_lang.into(),
        };
        if req.text.trim().is_empty() {
            return Err(Error::Configuration("translation text must be non-empty".into()));
        }
        if req.source_lang == req.target_lang {
            return Err(Error::Configuration(format!(
                "source and target language are both `{}`",
                req.source_lang
            )));
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Lexicon,
    Http,
    Cache,
    /// At least one word had no lexicon entry and was copied through.
    IdentityFallback,
    /// The sampled language was the source language; nothing was translated.
    Source,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Lexicon => "lexicon",
            Provenance::Http => "http",
            Provenance::Cache => "cache",
            Provenance::IdentityFallback => "identity-fallback",
            Provenance::Source => "source",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationResult {
    pub text: String,
    pub tokens: Vec<String>,
    pub provenance: Provenance,
}

impl TranslationResult {
    /// Wraps provider output, segmenting it for the target language.
    pub fn from_text(text: impl Into<String>, target_lang: &str, provenance: Provenance) -> Self {
        let text = text.into();
        let tokens = tokenize_translation(&text, target_lang);
        TranslationResult {
            text,
            tokens,
            provenance,
        }
    }
}

pub trait TranslationProvider: Send + Sync {
    /// Stable identifier; caches are partitioned by it.
    fn id(&self) -> String;

    fn supported_languages(&self) -> Result<BTreeSet<String>>;

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult>;
}

impl<P: TranslationProvider + ?Sized> TranslationProvider for &P {
    fn id(&self) -> String {
        (**self).id()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        (**self).supported_languages()
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        (**self).translate(req)
    }
}

impl<P: TranslationProvider + ?Sized> TranslationProvider for Box<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        (**self).supported_languages()
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        (**self).translate(req)
    }
}

impl<P: TranslationProvider + ?Sized> TranslationProvider for Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        (**self).supported_languages()
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        (**self).translate(req)
    }
}

pub fn translate(req: &TranslationRequest, provider: &dyn TranslationProvider) -> Result<TranslationResult> {
    provider.translate(req)
}

pub fn supported_languages(provider: &dyn TranslationProvider) -> Result<BTreeSet<String>> {
    provider.supported_languages()
}

fn is_han_or_kana(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x309F     // hiragana
        | 0x30A0..=0x30FF   // katakana
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF   // CJK ext A
        | 0x4E00..=0x9FFF   // CJK unified
        | 0xF900..=0xFAFF
        | 0xFF66..=0xFF9F   // half-width katakana
        | 0x20000..=0x2FA1F)
}

/// Splits translated text into tokens. Whitespace splitting everywhere; for
/// scriptio-continua targets each whitespace piece is further split at
/// Han/Kana boundaries so a contiguous Han/Kana run is one token.
pub fn tokenize_translation(text: &str, target_lang: &str) -> Vec<String> {
    if !is_scriptio_continua(target_lang) {
        return text.split_whitespace().map(str::to_string).collect();
    }
    let mut tokens = Vec::new();
    for piece in text.split_whitespace() {
        let mut current = String::new();
        let mut current_cjk = None;
        for c in piece.chars() {
            let cjk = is_han_or_kana(c);
            if current_cjk.is_some_and(|prev| prev != cjk) {
                tokens.push(std::mem::take(&mut current));
            }
            current.push(c);
            current_cjk = Some(cjk);
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Opens a provider from `lex:<directory>` or `http:<base-url>`.
///
/// With `cache_dir` the provider is wrapped in a persistent cache. HTTP
/// providers always get at least an in-memory cache.
pub fn open_provider(spec: &str, cache_dir: Option<&Path>) -> Result<Arc<dyn TranslationProvider>> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| Error::Configuration(format!("provider `{spec}` must be lex:<dir> or http:<url>")))?;
    let provider: Arc<dyn TranslationProvider> = match kind {
        "lex" => {
            let lexicon = LexiconProvider::load(rest)?;
            match cache_dir {
                Some(dir) => {
                    let cache = TranslationCache::open(dir, &lexicon.id())?;
                    Arc::new(CachedProvider::new(lexicon, cache))
                }
                None => Arc::new(lexicon),
            }
        }
        "http" => {
            let http = HttpProvider::from_env(rest)?;
            let cache = match cache_dir {
                Some(dir) => TranslationCache::open(dir, &http.id())?,
                None => TranslationCache::in_memory(),
            };
            Arc::new(CachedProvider::new(http, cache))
        }
        other => {
            return Err(Error::Configuration(format!(
                "unknown provider kind `{other}` (expected lex or http)"
            )))
        }
    };
    Ok(provider)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_invariants() {
        assert!(TranslationRequest::new("", "en", "es").is_err());
        assert!(TranslationRequest::new("  ", "en", "es").is_err());
        assert!(TranslationRequest::new("hi", "en", "en").is_err());
        assert!(TranslationRequest::new("hi", "en", "es").is_ok());
    }

    #[test]
    fn whitespace_tokenization() {
        assert_eq!(tokenize_translation(" nueva  york ", "es"), ["nueva", "york"]);
        // Korean is space-delimited.
        assert_eq!(tokenize_translation("뉴욕 에서", "ko"), ["뉴욕", "에서"]);
    }

    #[test]
    fn cjk_runs_are_tokens() {
        assert_eq!(tokenize_translation("ニューヨーク", "ja"), ["ニューヨーク"]);
        assert_eq!(
            tokenize_translation("去纽约JFK机场", "zh-cn"),
            ["去纽约", "JFK", "机场"]
        );
        assert_eq!(tokenize_translation("boston 行き", "ja"), ["boston", "行き"]);
        // Without the scriptio-continua flag the same text is one token.
        assert_eq!(tokenize_translation("去纽约JFK机场", "ko"), ["去纽约JFK机场"]);
    }

    #[test]
    fn provider_spec_errors() {
        assert!(matches!(open_provider("google", None), Err(Error::Configuration(_))));
        assert!(matches!(open_provider("ftp:x", None), Err(Error::Configuration(_))));
    }
}
