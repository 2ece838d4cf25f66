use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use super::{Provenance, TranslationProvider, TranslationRequest, TranslationResult};
use crate::corpus::validate_language_code;
use crate::error::{Error, Result};

/// Language tags whose region subtag is part of a lexicon filename, used to
/// split three-part stems like `zh-cn-en` / `en-zh-cn`.
const COMPOUND_CODES: &[&str] = &["zh-cn", "zh-tw", "pt-br", "pt-pt", "en-us", "en-gb", "fr-ca"];

/// Offline phrase lexicons, one `<src>-<tgt>.tsv` file per language pair.
///
/// Lookup is exact phrase first, then word by word; unknown words pass through
/// unchanged and the result is flagged `identity-fallback`.
#[derive(Debug, Clone)]
pub struct LexiconProvider {
    id: String,
    tables: BTreeMap<(String, String), HashMap<String, String>>,
}

fn normalize(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn split_pair(stem: &str) -> Option<(String, String)> {
    let parts: Vec<&str> = stem.split('-').collect();
    let (src, tgt) = match parts.len() {
        2 => (parts[0].to_string(), parts[1].to_string()),
        3 => {
            let head = format!("{}-{}", parts[0], parts[1]);
            if COMPOUND_CODES.contains(&head.as_str()) {
                (head, parts[2].to_string())
            } else {
                (parts[0].to_string(), format!("{}-{}", parts[1], parts[2]))
            }
        }
        4 => (
            format!("{}-{}", parts[0], parts[1]),
            format!("{}-{}", parts[2], parts[3]),
        ),
        _ => return None,
    };
    (validate_language_code(&src).is_ok() && validate_language_code(&tgt).is_ok()).then_some((src, tgt))
}

impl LexiconProvider {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("tsv") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let pair = split_pair(stem).ok_or_else(|| {
                Error::Configuration(format!("lexicon file {} is not named <src>-<tgt>.tsv", path.display()))
            })?;
            files.push((pair, path));
        }
        files.sort();

        let mut provider = LexiconProvider {
            id: format!("lex:{}", dir.display()),
            tables: BTreeMap::new(),
        };
        for (pair, path) in files {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut entries = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                let location = format!("{}:{}", path.display(), idx + 1);
                let (source, target) = line
                    .split_once('\t')
                    .filter(|(s, t)| !s.trim().is_empty() && !t.trim().is_empty() && !t.contains('\t'))
                    .ok_or_else(|| Error::Configuration(format!("{location}: expected `source<TAB>target`")))?;
                entries.push((location, source.to_string(), target.to_string()));
            }
            provider.insert_table(pair, entries)?;
        }
        if provider.tables.is_empty() {
            return Err(Error::Configuration(format!(
                "no lexicon files (<src>-<tgt>.tsv) in {}",
                dir.display()
            )));
        }
        Ok(provider)
    }

    /// Builds a provider from in-memory tables, with the same validation as
    /// [`LexiconProvider::load`].
    pub fn from_tables<I, E>(id: impl Into<String>, tables: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((String, String), E)>,
        E: IntoIterator<Item = (String, String)>,
    {
        let mut provider = LexiconProvider {
            id: id.into(),
            tables: BTreeMap::new(),
        };
        for ((src, tgt), entries) in tables {
            let location = format!("{src}-{tgt}");
            let entries = entries
                .into_iter()
                .enumerate()
                .map(|(i, (s, t))| (format!("{location}:{}", i + 1), s, t))
                .collect();
            provider.insert_table((src, tgt), entries)?;
        }
        if provider.tables.is_empty() {
            return Err(Error::Configuration("lexicon provider has no tables".into()));
        }
        Ok(provider)
    }

    fn insert_table(&mut self, pair: (String, String), entries: Vec<(String, String, String)>) -> Result<()> {
        validate_language_code(&pair.0)?;
        validate_language_code(&pair.1)?;
        let table = self.tables.entry(pair).or_default();
        for (location, source, target) in entries {
            let key = normalize(&source);
            if key.is_empty() || target.trim().is_empty() {
                return Err(Error::Configuration(format!("{location}: empty lexicon entry")));
            }
            if table.insert(key, target.trim().to_string()).is_some() {
                return Err(Error::Configuration(format!(
                    "{location}: duplicate source phrase `{}`",
                    source.trim()
                )));
            }
        }
        Ok(())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.tables.keys().map(|(s, t)| (s.as_str(), t.as_str()))
    }
}

impl TranslationProvider for LexiconProvider {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        Ok(self.tables.keys().map(|(_, tgt)| tgt.clone()).collect())
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        let table = self
            .tables
            .get(&(req.source_lang.clone(), req.target_lang.clone()))
            .ok_or_else(|| Error::UnsupportedLanguage {
                provider: self.id.clone(),
                source_lang: req.source_lang.clone(),
                target_lang: req.target_lang.clone(),
            })?;
        if let Some(hit) = table.get(&normalize(&req.text)) {
            return Ok(TranslationResult::from_text(
                hit.clone(),
                &req.target_lang,
                Provenance::Lexicon,
            ));
        }
        let mut fallback = false;
        let words: Vec<&str> = req
            .text
            .split_whitespace()
            .map(|word| match table.get(&word.to_lowercase()) {
                Some(t) => t.as_str(),
                None => {
                    fallback = true;
                    word
                }
            })
            .collect();
        let provenance = if fallback {
            Provenance::IdentityFallback
        } else {
            Provenance::Lexicon
        };
        Ok(TranslationResult::from_text(
            words.join(" "),
            &req.target_lang,
            provenance,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &str, t: &str) -> (String, String) {
        (s.to_string(), t.to_string())
    }

    fn provider(entries: &[(&str, &str)]) -> LexiconProvider {
        let entries: Vec<_> = entries.iter().map(|(s, t)| pair(s, t)).collect();
        LexiconProvider::from_tables("lex:test", [(pair("en", "ht"), entries)]).unwrap()
    }

    fn req(text: &str) -> TranslationRequest {
        TranslationRequest::new(text, "en", "ht").unwrap()
    }

    #[test]
    fn filename_pairs() {
        assert_eq!(split_pair("en-aa"), Some(pair("en", "aa")));
        assert_eq!(split_pair("en-zh-cn"), Some(pair("en", "zh-cn")));
        assert_eq!(split_pair("zh-cn-en"), Some(pair("zh-cn", "en")));
        assert_eq!(split_pair("zh-cn-pt-br"), Some(pair("zh-cn", "pt-br")));
        assert_eq!(split_pair("english"), None);
        assert_eq!(split_pair("EN-es"), None);
    }

    #[test]
    fn exact_phrase_then_words() {
        let p = provider(&[("new york", "nouvo yòk"), ("to", "nan"), ("new", "nouvo")]);
        let r = p.translate(&req("New York")).unwrap();
        assert_eq!(r.text, "nouvo yòk");
        assert_eq!(r.provenance, Provenance::Lexicon);

        let r = p.translate(&req("to new")).unwrap();
        assert_eq!(r.text, "nan nouvo");
        assert_eq!(r.provenance, Provenance::Lexicon);

        let r = p.translate(&req("to Boston")).unwrap();
        assert_eq!(r.tokens, ["nan", "Boston"]);
        assert_eq!(r.provenance, Provenance::IdentityFallback);
    }

    #[test]
    fn unknown_word_falls_back_to_identity() {
        let p = provider(&[("new york", "nouvo yòk")]);
        let r = p.translate(&req("asdfghjkl")).unwrap();
        assert_eq!(r.text, "asdfghjkl");
        assert_eq!(r.provenance, Provenance::IdentityFallback);
    }

    #[test]
    fn duplicates_are_load_errors() {
        let entries = vec![pair("Boston", "a"), pair("boston", "b")];
        let err = LexiconProvider::from_tables("x", [(pair("en", "ht"), entries)]).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn unsupported_pair() {
        let p = provider(&[("a", "b")]);
        let err = p
            .translate(&TranslationRequest::new("a", "en", "es").unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::UnsupportedLanguage { .. }));
    }

    #[test]
    fn load_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("en-aa.tsv"), "hello\thalo\n\nworld\twelt\n").unwrap();
        fs::write(dir.path().join("en-bb.tsv"), "hello\tbonjou\n").unwrap();
        fs::write(dir.path().join("README.md"), "ignored").unwrap();
        let p = LexiconProvider::load(dir.path()).unwrap();
        let langs: Vec<String> = p.supported_languages().unwrap().into_iter().collect();
        assert_eq!(langs, ["aa", "bb"]);
        let r = p
            .translate(&TranslationRequest::new("hello world", "en", "aa").unwrap())
            .unwrap();
        assert_eq!(r.text, "halo welt");
    }

    #[test]
    fn empty_directory_is_configuration_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            LexiconProvider::load(dir.path()),
            Err(Error::Configuration(_))
        ));
    }

    #[test]
    fn malformed_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("en-aa.tsv"), "hello halo\n").unwrap();
        let err = LexiconProvider::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("en-aa.tsv:1"), "{err}");
    }
}
