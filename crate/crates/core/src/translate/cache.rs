use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use super::{Provenance, TranslationProvider, TranslationRequest, TranslationResult};
use crate::error::{Error, Result};
use crate::hash::fnv1a64;

type Pair = (String, String);

/// Translation cache partitioned by provider id.
///
/// On disk: `<root>/<provider-slug>/<src>-<tgt>.tsv`, append-only lines of
/// `text<TAB>translation` (with `\t`, `\n`, `\r`, `\\` escaped). A pair's file
/// is loaded on first use; appends go through one writer lock.
#[derive(Debug)]
pub struct TranslationCache {
    dir: Option<PathBuf>,
    entries: RwLock<HashMap<Pair, HashMap<String, String>>>,
    writers: Mutex<HashMap<Pair, File>>,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

fn provider_slug(provider_id: &str) -> String {
    let readable: String = provider_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .take(40)
        .collect();
    format!("{readable}-{:016x}", fnv1a64(provider_id.as_bytes()))
}

impl TranslationCache {
    pub fn open(root: impl AsRef<Path>, provider_id: &str) -> Result<Self> {
        let dir = root.as_ref().join(provider_slug(provider_id));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let marker = dir.join("provider.txt");
        if !marker.exists() {
            fs::write(&marker, format!("{provider_id}\n")).map_err(|e| Error::io(&marker, e))?;
        }
        Ok(TranslationCache {
            dir: Some(dir),
            entries: RwLock::new(HashMap::new()),
            writers: Mutex::new(HashMap::new()),
        })
    }

    /// A cache that lives only for the lifetime of the process.
    pub fn in_memory() -> Self {
        TranslationCache {
            dir: None,
            entries: RwLock::new(HashMap::new()),
            writers: Mutex::new(HashMap::new()),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn pair_path(&self, pair: &Pair) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}-{}.tsv", pair.0, pair.1)))
    }

    fn ensure_loaded(&self, pair: &Pair) -> Result<()> {
        if self.entries.read().expect("cache lock poisoned").contains_key(pair) {
            return Ok(());
        }
        let mut entries = self.entries.write().expect("cache lock poisoned");
        if entries.contains_key(pair) {
            return Ok(());
        }
        let mut table = HashMap::new();
        if let Some(path) = self.pair_path(pair).filter(|p| p.exists()) {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            for line in text.lines() {
                // A torn final line from an interrupted run is skipped.
                if let Some((key, value)) = line.split_once('\t') {
                    table.insert(unescape(key), unescape(value));
                }
            }
        }
        entries.insert(pair.clone(), table);
        Ok(())
    }

    pub fn get(&self, source_lang: &str, target_lang: &str, text: &str) -> Result<Option<String>> {
        let pair = (source_lang.to_string(), target_lang.to_string());
        self.ensure_loaded(&pair)?;
        let entries = self.entries.read().expect("cache lock poisoned");
        Ok(entries.get(&pair).and_then(|t| t.get(text)).cloned())
    }

    /// Records a translation. An existing entry for the same text is kept.
    pub fn put(&self, source_lang: &str, target_lang: &str, text: &str, translation: &str) -> Result<()> {
        let pair = (source_lang.to_string(), target_lang.to_string());
        self.ensure_loaded(&pair)?;
        let mut writers = self.writers.lock().expect("cache writer poisoned");
        {
            let mut entries = self.entries.write().expect("cache lock poisoned");
            let table = entries.entry(pair.clone()).or_default();
            if table.contains_key(text) {
                return Ok(());
            }
            table.insert(text.to_string(), translation.to_string());
        }
        let Some(path) = self.pair_path(&pair) else {
            return Ok(());
        };
        if !writers.contains_key(&pair) {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(&path, e))?;
            writers.insert(pair.clone(), file);
        }
        let file = writers.get_mut(&pair).expect("writer just inserted");
        writeln!(file, "{}\t{}", escape(text), escape(translation)).map_err(|e| Error::io(&path, e))
    }
}

/// Serves repeated requests from a [`TranslationCache`] before calling the
/// wrapped provider.
#[derive(Debug)]
pub struct CachedProvider<P> {
    inner: P,
    cache: TranslationCache,
}

impl<P: TranslationProvider> CachedProvider<P> {
    pub fn new(inner: P, cache: TranslationCache) -> Self {
        CachedProvider { inner, cache }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }
}

impl<P: TranslationProvider> TranslationProvider for CachedProvider<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn supported_languages(&self) -> Result<BTreeSet<String>> {
        self.inner.supported_languages()
    }

    fn translate(&self, req: &TranslationRequest) -> Result<TranslationResult> {
        if let Some(hit) = self.cache.get(&req.source_lang, &req.target_lang, &req.text)? {
            return Ok(TranslationResult::from_text(hit, &req.target_lang, Provenance::Cache));
        }
        let result = self.inner.translate(req)?;
        self.cache
            .put(&req.source_lang, &req.target_lang, &req.text, &result.text)?;
        Ok(result)
    }
}
