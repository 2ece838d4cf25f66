//! Intent/slot corpora: the utterance data model, BIO validation, and the
//! two on-disk formats (`multiatis-tsv` and `conll`).

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const TSV_HEADER: &str = "id\tutterance\tslot_labels\tintent";

/// A single BIO slot tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotTag {
    Outside,
    Begin(String),
    Inside(String),
}

impl SlotTag {
    pub fn begin(slot_type: impl Into<String>) -> Self {
        SlotTag::Begin(slot_type.into())
    }

    pub fn inside(slot_type: impl Into<String>) -> Self {
        SlotTag::Inside(slot_type.into())
    }

    pub fn slot_type(&self) -> Option<&str> {
        match self {
            SlotTag::Outside => None,
            SlotTag::Begin(t) | SlotTag::Inside(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, SlotTag::Outside)
    }
}

impl fmt::Display for SlotTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotTag::Outside => f.write_str("O"),
            SlotTag::Begin(t) => write!(f, "B-{t}"),
            SlotTag::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseTagError(pub String);

impl fmt::Display for ParseTagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` is not a BIO tag (expected O, B-<type> or I-<type>)", self.0)
    }
}

impl std::error::Error for ParseTagError {}

impl FromStr for SlotTag {
    type Err = ParseTagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "O" {
            return Ok(SlotTag::Outside);
        }
        let (prefix, slot_type) = s.split_at_checked(2).ok_or_else(|| ParseTagError(s.to_string()))?;
        if slot_type.is_empty() || slot_type.chars().any(char::is_whitespace) {
            return Err(ParseTagError(s.to_string()));
        }
        match prefix {
            "B-" => Ok(SlotTag::Begin(slot_type.to_string())),
            "I-" => Ok(SlotTag::Inside(slot_type.to_string())),
            _ => Err(ParseTagError(s.to_string())),
        }
    }
}

/// First position where an `I-x` tag does not continue an `x` span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioViolation {
    pub position: usize,
    pub label: SlotTag,
}

/// Strict IOB2 check: every `I-x` must follow `B-x` or `I-x`.
pub fn check_bio(labels: &[SlotTag]) -> Result<(), BioViolation> {
    let mut open: Option<&str> = None;
    for (position, label) in labels.iter().enumerate() {
        match label {
            SlotTag::Outside => open = None,
            SlotTag::Begin(t) => open = Some(t),
            SlotTag::Inside(t) => {
                if open != Some(t.as_str()) {
                    return Err(BioViolation {
                        position,
                        label: label.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Rewrites every dangling `I-x` to `B-x`. Returns the number of rewritten tags.
pub fn repair_bio(labels: &mut [SlotTag]) -> usize {
    let mut repaired = 0;
    let mut open: Option<String> = None;
    for label in labels.iter_mut() {
        match label {
            SlotTag::Outside => open = None,
            SlotTag::Begin(t) => open = Some(t.clone()),
            SlotTag::Inside(t) => {
                if open.as_deref() != Some(t.as_str()) {
                    open = Some(t.clone());
                    *label = SlotTag::Begin(std::mem::take(t));
                    repaired += 1;
                }
            }
        }
    }
    repaired
}

fn bio_error(location: String, violation: BioViolation) -> Error {
    Error::IllegalBioTransition {
        location,
        position: violation.position,
        slot_type: violation.label.slot_type().unwrap_or_default().to_string(),
        label: violation.label.to_string(),
    }
}

/// One annotated utterance: tokens, one BIO tag per token, and an intent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    id: String,
    tokens: Vec<String>,
    slot_labels: Vec<SlotTag>,
    intent: String,
}

impl Utterance {
    /// Builds a validated utterance (strict BIO).
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        slot_labels: Vec<SlotTag>,
        intent: impl Into<String>,
    ) -> Result<Self> {
        let utterance = Utterance {
            id: id.into(),
            tokens,
            slot_labels,
            intent: intent.into(),
        };
        let location = format!("utterance `{}`", utterance.id);
        utterance.check_shape(&location)?;
        check_bio(&utterance.slot_labels).map_err(|v| bio_error(location, v))?;
        Ok(utterance)
    }

    /// Convenience constructor from whitespace-separated tokens and tags.
    pub fn parse(id: &str, tokens: &str, labels: &str, intent: &str) -> Result<Self> {
        let location = format!("utterance `{id}`");
        let tokens = tokens.split_whitespace().map(str::to_string).collect();
        let labels = parse_labels(labels, &location)?;
        Utterance::new(id, tokens, labels, intent)
    }

    fn check_shape(&self, location: &str) -> Result<()> {
        let malformed = |reason: String| Error::MalformedRecord {
            location: location.to_string(),
            reason,
        };
        if self.id.is_empty() || self.id.contains(['\t', '\n', '\r']) {
            return Err(malformed(format!("invalid id `{}`", self.id)));
        }
        if self.intent.is_empty() || self.intent.contains(['\t', '\n', '\r']) {
            return Err(malformed(format!("invalid intent `{}`", self.intent)));
        }
        if self.tokens.is_empty() {
            return Err(malformed("utterance has no tokens".into()));
        }
        if let Some(bad) = self
            .tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(malformed(format!("invalid token `{bad}`")));
        }
        if self.tokens.len() != self.slot_labels.len() {
            return Err(malformed(format!(
                "{} tokens but {} slot labels",
                self.tokens.len(),
                self.slot_labels.len()
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn slot_labels(&self) -> &[SlotTag] {
        &self.slot_labels
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Same utterance under a different id.
    pub fn with_id(&self, id: impl Into<String>) -> Result<Self> {
        Utterance::new(id, self.tokens.clone(), self.slot_labels.clone(), self.intent.clone())
    }
}

fn parse_labels(column: &str, location: &str) -> Result<Vec<SlotTag>> {
    column
        .split_whitespace()
        .map(|l| {
            l.parse::<SlotTag>().map_err(|e| Error::MalformedRecord {
                location: location.to_string(),
                reason: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Configuration(format!("unknown split `{other}`"))),
        }
    }
}

/// Checks a lowercase BCP-47-style tag such as `en` or `zh-cn`.
pub fn validate_language_code(code: &str) -> Result<()> {
    let ok = !code.is_empty()
        && code
            .split('-')
            .all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit()));
    if ok {
        Ok(())
    } else {
        Err(Error::Configuration(format!("invalid language code `{code}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    utterances: Vec<Utterance>,
    language: String,
    split: Split,
}

impl Dataset {
    pub fn new(language: impl Into<String>, split: Split, utterances: Vec<Utterance>) -> Result<Self> {
        let language = language.into();
        validate_language_code(&language)?;
        let mut seen = HashSet::with_capacity(utterances.len());
        for u in &utterances {
            if !seen.insert(u.id()) {
                return Err(Error::MalformedRecord {
                    location: format!("utterance `{}`", u.id()),
                    reason: "duplicate utterance id".into(),
                });
            }
        }
        Ok(Dataset {
            utterances,
            language,
            split,
        })
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Utterance> {
        self.utterances.iter()
    }

    pub fn into_utterances(self) -> Vec<Utterance> {
        self.utterances
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Utterance;
    type IntoIter = std::slice::Iter<'a, Utterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.utterances.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    MultiatisTsv,
    Conll,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiatis-tsv" | "tsv" => Ok(Format::MultiatisTsv),
            "conll" => Ok(Format::Conll),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::MultiatisTsv => "multiatis-tsv",
            Format::Conll => "conll",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReadOptions {
    pub format: Format,
    /// Rewrite dangling `I-x` tags to `B-x` instead of failing.
    pub repair: bool,
    pub language: String,
    pub split: Split,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            format: Format::MultiatisTsv,
            repair: false,
            language: "en".into(),
            split: Split::Train,
        }
    }
}

pub fn read_dataset(path: impl AsRef<Path>, opts: &ReadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
        location: path.display().to_string(),
        reason: format!("file is not valid UTF-8: {e}"),
    })?;
    parse_dataset(&text, opts, &path.display().to_string())
}

/// Parses dataset text; `source` names the input in error locations.
pub fn parse_dataset(text: &str, opts: &ReadOptions, source: &str) -> Result<Dataset> {
    let raw = match opts.format {
        Format::MultiatisTsv => parse_tsv(text, source)?,
        Format::Conll => parse_conll(text, source)?,
    };
    let mut utterances = Vec::with_capacity(raw.len());
    for mut record in raw {
        if opts.repair {
            let repaired = repair_bio(&mut record.labels);
            if repaired > 0 {
                log::warn!("{}: repaired {repaired} dangling I- tag(s)", record.location);
            }
        }
        let u = Utterance {
            id: record.id,
            tokens: record.tokens,
            slot_labels: record.labels,
            intent: record.intent,
        };
        u.check_shape(&record.location)?;
        check_bio(&u.slot_labels).map_err(|v| bio_error(record.location, v))?;
        utterances.push(u);
    }
    Dataset::new(opts.language.clone(), opts.split, utterances)
}

struct RawRecord {
    location: String,
    id: String,
    tokens: Vec<String>,
    labels: Vec<SlotTag>,
    intent: String,
}

fn parse_tsv(text: &str, source: &str) -> Result<Vec<RawRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == TSV_HEADER => {}
        Some(_) => {
            return Err(Error::MalformedRecord {
                location: format!("{source}:1"),
                reason: format!("expected header `{}`", TSV_HEADER.replace('\t', "<TAB>")),
            })
        }
        None => {
            return Err(Error::MalformedRecord {
                location: source.to_string(),
                reason: "missing header line".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let columns: Vec<&str> = line.split('\t').collect();
        let mut location = format!("{source}:{}", idx + 1);
        if columns.len() != 4 {
            return Err(Error::MalformedRecord {
                location,
                reason: format!("expected 4 tab-separated columns, found {}", columns.len()),
            });
        }
        location.push_str(&format!(" (id {})", columns[0]));
        let labels = parse_labels(columns[2], &location)?;
        records.push(RawRecord {
            id: columns[0].to_string(),
            tokens: columns[1].split_whitespace().map(str::to_string).collect(),
            labels,
            intent: columns[3].to_string(),
            location,
        });
    }
    Ok(records)
}

fn parse_conll(text: &str, source: &str) -> Result<Vec<RawRecord>> {
    #[derive(Default)]
    struct Block {
        first_line: usize,
        id: Option<String>,
        intent: Option<String>,
        tokens: Vec<String>,
        labels: Vec<SlotTag>,
    }

    fn finish(block: Block, ordinal: usize, source: &str) -> Result<RawRecord> {
        let id = block.id.unwrap_or_else(|| ordinal.to_string());
        let location = format!("{source}:{} (id {id})", block.first_line);
        let intent = block.intent.ok_or_else(|| Error::MalformedRecord {
            location: location.clone(),
            reason: "missing `# intent = <x>` line".into(),
        })?;
        Ok(RawRecord {
            location,
            id,
            tokens: block.tokens,
            labels: block.labels,
            intent,
        })
    }

    let mut records = Vec::new();
    let mut current: Option<Block> = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let line_no = idx + 1;
        if line.trim().is_empty() {
            if let Some(block) = current.take() {
                let ordinal = records.len();
                records.push(finish(block, ordinal, source)?);
            }
            continue;
        }
        let block = current.get_or_insert_with(|| Block {
            first_line: line_no,
            ..Block::default()
        });
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "id" => block.id = Some(value.trim().to_string()),
                    "intent" => block.intent = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        let location = format!("{source}:{line_no}");
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != 2 {
            return Err(Error::MalformedRecord {
                location,
                reason: format!("expected `token<TAB>label`, found {} column(s)", columns.len()),
            });
        }
        let label = columns[1].parse::<SlotTag>().map_err(|e| Error::MalformedRecord {
            location,
            reason: e.to_string(),
        })?;
        block.tokens.push(columns[0].to_string());
        block.labels.push(label);
    }
    if let Some(block) = current.take() {
        let ordinal = records.len();
        records.push(finish(block, ordinal, source)?);
    }
    Ok(records)
}

/// Serializes a dataset in the given format. Output always ends in a newline.
pub fn render_dataset(ds: &Dataset, format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::MultiatisTsv => {
            out.push_str(TSV_HEADER);
            out.push('\n');
            for u in ds {
                out.push_str(&u.id);
                out.push('\t');
                out.push_str(&u.tokens.join(" "));
                out.push('\t');
                push_joined(&mut out, &u.slot_labels, " ");
                out.push('\t');
                out.push_str(&u.intent);
                out.push('\n');
            }
        }
        Format::Conll => {
            for (i, u) in ds.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("# id = {}\n# intent = {}\n", u.id, u.intent));
                for (token, label) in u.tokens.iter().zip(&u.slot_labels) {
                    out.push_str(&format!("{token}\t{label}\n"));
                }
            }
        }
    }
    out
}

fn push_joined(out: &mut String, labels: &[SlotTag], sep: &str) {
    for (i, label) in labels.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        out.push_str(&label.to_string());
    }
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_dataset(ds, format)).map_err(|e| Error::io(path, e))
}

/// Corpus counts in the shape of a dataset statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DatasetStats {
    pub utterance_count: usize,
    /// Whitespace tokens.
    pub token_count: usize,
    pub intent_count: usize,
    /// Distinct slot types (`B-x`/`I-x` count once).
    pub slot_type_count: usize,
    /// Distinct non-`O` tags.
    pub slot_tag_count: usize,
}

pub fn compute_stats(ds: &Dataset) -> DatasetStats {
    let mut intents = BTreeSet::new();
    let mut types = BTreeSet::new();
    let mut tags = BTreeSet::new();
    let mut token_count = 0;
    for u in ds {
        token_count += u.len();
        intents.insert(u.intent());
        for label in u.slot_labels() {
            if let Some(t) = label.slot_type() {
                types.insert(t);
                tags.insert(label);
            }
        }
    }
    DatasetStats {
        utterance_count: ds.len(),
        token_count,
        intent_count: intents.len(),
        slot_type_count: types.len(),
        slot_tag_count: tags.len(),
    }
}
