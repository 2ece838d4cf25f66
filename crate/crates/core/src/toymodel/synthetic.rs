//! A generated multilingual intent/slot corpus with controllable lexical
//! overlap between languages.
//!
//! Every word is a *concept* rendered per language as `root + suffix`. Each
//! family draws its roots independently, except that with probability
//! `across_family_shared` it reuses the first family's root; each member
//! language reuses its family root with probability `within_family_shared`
//! and otherwise gets a fresh one. The suffix is fixed per language. All
//! languages share the same utterances, so every split is parallel and
//! word-for-word lexicons between any two languages are exact.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{write_dataset, Dataset, Format, SlotTag, Split, Utterance};
use crate::error::{Error, Result};
use crate::translate::LexiconProvider;

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const CARRIERS_PER_INTENT: usize = 3;
const FUNCTION_WORDS: usize = 6;
const VALUES_PER_SLOT: usize = 8;
const TEMPLATES_PER_INTENT: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub families: usize,
    pub languages_per_family: usize,
    /// Probability that a member language keeps its family's root.
    pub within_family_shared: f64,
    /// Probability that a family keeps the first family's root.
    pub across_family_shared: f64,
    pub intents: usize,
    pub slot_types: usize,
    pub train_size: usize,
    pub eval_size: usize,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            families: 3,
            languages_per_family: 2,
            within_family_shared: 0.8,
            across_family_shared: 0.1,
            intents: 6,
            slot_types: 5,
            train_size: 200,
            eval_size: 200,
            seed: 0,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Configuration(format!("synthetic corpus: {msg}")));
        if self.families == 0 || self.families > 26 || self.languages_per_family == 0 || self.languages_per_family > 26
        {
            return bad("families and languages per family must be in 1..=26");
        }
        if self.families * self.languages_per_family < 2 {
            return bad("need at least two languages");
        }
        for p in [self.within_family_shared, self.across_family_shared] {
            if !(0.0..=1.0).contains(&p) {
                return bad("sharing probabilities must lie in [0, 1]");
            }
        }
        if self.intents < 2 || self.slot_types < 2 {
            return bad("need at least two intents and two slot types");
        }
        if self.train_size == 0 || self.eval_size == 0 {
            return bad("split sizes must be positive");
        }
        Ok(())
    }

    /// Language codes: family letter then member letter (`aa`, `ab`, `ba`, ...).
    pub fn languages(&self) -> Vec<String> {
        (0..self.families)
            .flat_map(|f| (0..self.languages_per_family).map(move |m| code(f, m)))
            .collect()
    }

    pub fn source_language(&self) -> String {
        code(0, 0)
    }
}

fn code(family: usize, member: usize) -> String {
    [(b'a' + family as u8) as char, (b'a' + member as u8) as char]
        .iter()
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Carrier,
    Function(usize),
    Value(usize),
}

struct Template {
    intent: usize,
    items: Vec<Slot>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: SyntheticCorpusSpec,
    /// language → concept forms, indexed by concept id.
    forms: BTreeMap<String, Vec<String>>,
    suffixes: BTreeMap<String, String>,
    /// language → (train, dev, test)
    splits: BTreeMap<String, [Dataset; 3]>,
}

struct Vocabulary {
    carriers: Vec<Vec<usize>>,
    function: Vec<usize>,
    values: Vec<Vec<usize>>,
    concepts: usize,
}

impl Vocabulary {
    fn new(spec: &SyntheticCorpusSpec) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let ids: Vec<usize> = (next..next + n).collect();
            next += n;
            ids
        };
        let carriers = (0..spec.intents).map(|_| take(CARRIERS_PER_INTENT)).collect();
        let function = take(FUNCTION_WORDS);
        let values = (0..spec.slot_types).map(|_| take(VALUES_PER_SLOT)).collect();
        Vocabulary {
            carriers,
            function,
            values,
            concepts: next,
        }
    }
}

fn fresh_root(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.gen_range(2..=3);
        let root: String = (0..syllables)
            .flat_map(|_| [*CONSONANTS.choose(rng).unwrap(), *VOWELS.choose(rng).unwrap()])
            .collect();
        if used.insert(root.clone()) {
            return root;
        }
    }
}

fn slot_name(t: usize) -> String {
    format!("slot{t}")
}

fn intent_name(i: usize) -> String {
    format!("intent{i}")
}

impl SyntheticCorpus {
    pub fn generate(spec: &SyntheticCorpusSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let vocab = Vocabulary::new(spec);

        let mut used = HashSet::new();
        let suffixes: Vec<String> = spec
            .languages()
            .iter()
            .map(|_| fresh_root(&mut rng, &mut used))
            .collect();
        let mut forms: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for _ in 0..vocab.concepts {
            let global = fresh_root(&mut rng, &mut used);
            for f in 0..spec.families {
                let family_root = if f == 0 || rng.gen_bool(spec.across_family_shared) {
                    global.clone()
                } else {
                    fresh_root(&mut rng, &mut used)
                };
                for m in 0..spec.languages_per_family {
                    let root = if rng.gen_bool(spec.within_family_shared) {
                        family_root.clone()
                    } else {
                        fresh_root(&mut rng, &mut used)
                    };
                    let lang_index = f * spec.languages_per_family + m;
                    forms
                        .entry(code(f, m))
                        .or_default()
                        .push(format!("{root}{}", suffixes[lang_index]));
                }
            }
        }

        let templates = build_templates(spec, &mut rng);
        let mut splits: BTreeMap<String, Vec<Vec<Utterance>>> = BTreeMap::new();
        for (split_index, size) in [spec.train_size, spec.eval_size, spec.eval_size]
            .into_iter()
            .enumerate()
        {
            for n in 0..size {
                let template = templates.choose(&mut rng).unwrap();
                let concepts = instantiate(template, &vocab, &mut rng);
                let id = format!("{}-{n:05}", ["train", "dev", "test"][split_index]);
                for (lang, lang_forms) in &forms {
                    let mut tokens = Vec::new();
                    let mut labels = Vec::new();
                    for (words, slot_type) in &concepts {
                        for (j, &c) in words.iter().enumerate() {
                            tokens.push(lang_forms[c].clone());
                            labels.push(match (slot_type, j) {
                                (None, _) => SlotTag::Outside,
                                (Some(t), 0) => SlotTag::begin(slot_name(*t)),
                                (Some(t), _) => SlotTag::inside(slot_name(*t)),
                            });
                        }
                    }
                    let u = Utterance::new(id.clone(), tokens, labels, intent_name(template.intent))?;
                    let per_lang = splits.entry(lang.clone()).or_insert_with(|| vec![Vec::new(); 3]);
                    per_lang[split_index].push(u);
                }
            }
        }

        let splits = splits
            .into_iter()
            .map(|(lang, mut parts)| {
                let test = Dataset::new(&lang, Split::Test, parts.pop().unwrap())?;
                let dev = Dataset::new(&lang, Split::Dev, parts.pop().unwrap())?;
                let train = Dataset::new(&lang, Split::Train, parts.pop().unwrap())?;
                Ok((lang, [train, dev, test]))
            })
            .collect::<Result<_>>()?;
        let suffixes = spec.languages().into_iter().zip(suffixes).collect();
        Ok(SyntheticCorpus {
            spec: spec.clone(),
            forms,
            suffixes,
            splits,
        })
    }

    pub fn languages(&self) -> Vec<String> {
        self.spec.languages()
    }

    /// The ending shared by every word of `language`.
    pub fn suffix(&self, language: &str) -> Option<&str> {
        self.suffixes.get(language).map(String::as_str)
    }

    pub fn dataset(&self, language: &str, split: Split) -> Option<&Dataset> {
        let parts = self.splits.get(language)?;
        Some(match split {
            Split::Train => &parts[0],
            Split::Dev => &parts[1],
            Split::Test => &parts[2],
        })
    }

    /// Word-for-word lexicon entries from `src` to `tgt`.
    pub fn lexicon(&self, src: &str, tgt: &str) -> Option<Vec<(String, String)>> {
        let (s, t) = (self.forms.get(src)?, self.forms.get(tgt)?);
        Some(s.iter().cloned().zip(t.iter().cloned()).collect())
    }

    /// Lexicon provider covering every ordered language pair.
    pub fn lexicon_provider(&self) -> Result<LexiconProvider> {
        let langs = self.languages();
        let tables = langs.iter().flat_map(|s| {
            langs
                .iter()
                .filter(move |t| *t != s)
                .map(move |t| ((s.clone(), t.clone()), self.lexicon(s, t).unwrap()))
        });
        LexiconProvider::from_tables("synthetic", tables)
    }

    /// Writes `<lang>/{train,dev,test}.tsv` and `lexicon/<src>-<tgt>.tsv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for (lang, parts) in &self.splits {
            let lang_dir = dir.join(lang);
            fs::create_dir_all(&lang_dir).map_err(|e| Error::io(&lang_dir, e))?;
            for (ds, name) in parts.iter().zip(["train", "dev", "test"]) {
                write_dataset(ds, lang_dir.join(format!("{name}.tsv")), Format::MultiatisTsv)?;
            }
        }
        let lex_dir = dir.join("lexicon");
        fs::create_dir_all(&lex_dir).map_err(|e| Error::io(&lex_dir, e))?;
        let langs = self.languages();
        for s in &langs {
            for t in langs.iter().filter(|t| *t != s) {
                let body: String = self
                    .lexicon(s, t)
                    .unwrap()
                    .into_iter()
                    .map(|(a, b)| format!("{a}\t{b}\n"))
                    .collect();
                let path = lex_dir.join(format!("{s}-{t}.tsv"));
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }
}

fn build_templates(spec: &SyntheticCorpusSpec, rng: &mut ChaCha8Rng) -> Vec<Template> {
    let mut templates = Vec::new();
    for intent in 0..spec.intents {
        let mut types: Vec<usize> = (0..spec.slot_types).collect();
        types.shuffle(rng);
        let (a, b) = (types[0], types[1]);
        for shape in 0..TEMPLATES_PER_INTENT {
            let f = |rng: &mut ChaCha8Rng| Slot::Function(rng.gen_range(0..FUNCTION_WORDS));
            let items = match shape {
                0 => vec![Slot::Carrier, f(rng), Slot::Value(a), f(rng), Slot::Value(b)],
                1 => vec![f(rng), Slot::Value(a), Slot::Carrier, f(rng), Slot::Value(b)],
                _ => vec![Slot::Carrier, f(rng), Slot::Value(b), f(rng)],
            };
            templates.push(Template { intent, items });
        }
    }
    templates
}

/// Concept ids grouped into chunks, each with its slot type (`None` for O).
fn instantiate(template: &Template, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Vec<(Vec<usize>, Option<usize>)> {
    template
        .items
        .iter()
        .map(|item| match *item {
            Slot::Carrier => (vec![*vocab.carriers[template.intent].choose(rng).unwrap()], None),
            Slot::Function(i) => (vec![vocab.function[i]], None),
            Slot::Value(t) => {
                let n = rng.gen_range(1..=2);
                let words = vocab.values[t].choose_multiple(rng, n).copied().collect();
                (words, Some(t))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::{translate, TranslationRequest};

    fn small() -> SyntheticCorpus {
        SyntheticCorpus::generate(&SyntheticCorpusSpec {
            train_size: 40,
            eval_size: 10,
            ..SyntheticCorpusSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn languages_and_parallel_splits() {
        let c = small();
        assert_eq!(c.languages(), ["aa", "ab", "ba", "bb", "ca", "cb"]);
        let src = c.dataset("aa", Split::Train).unwrap();
        let tgt = c.dataset("cb", Split::Train).unwrap();
        assert_eq!(src.len(), 40);
        for (a, b) in src.iter().zip(tgt) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.intent(), b.intent());
            assert_eq!(a.slot_labels(), b.slot_labels());
        }
    }

    #[test]
    fn deterministic() {
        let a = small();
        let b = small();
        assert_eq!(a.forms, b.forms);
        assert_eq!(a.dataset("bb", Split::Test), b.dataset("bb", Split::Test));
    }

    #[test]
    fn lexicon_translates_parallel_sentences() {
        let c = small();
        let provider = c.lexicon_provider().unwrap();
        let src = c.dataset("aa", Split::Dev).unwrap();
        let tgt = c.dataset("ba", Split::Dev).unwrap();
        for (a, b) in src.iter().zip(tgt) {
            let req = TranslationRequest::new(a.tokens().join(" "), "aa", "ba").unwrap();
            assert_eq!(translate(&req, &provider).unwrap().tokens, b.tokens());
        }
    }

    #[test]
    fn sharing_rates_follow_the_spec() {
        let c = SyntheticCorpus::generate(&SyntheticCorpusSpec {
            train_size: 1,
            eval_size: 1,
            intents: 40,
            slot_types: 30,
            ..SyntheticCorpusSpec::default()
        })
        .unwrap();
        let root = |lang: &str, i: usize| {
            c.forms[lang][i]
                .strip_suffix(c.suffixes[lang].as_str())
                .unwrap()
                .to_string()
        };
        let n = c.forms["aa"].len();
        let same = |a: &str, b: &str| (0..n).filter(|&i| root(a, i) == root(b, i)).count() as f64 / n as f64;
        // Within family: both members keep the family root with p = 0.8 each.
        assert!((same("ba", "bb") - 0.64).abs() < 0.08, "{}", same("ba", "bb"));
        // Across families: 0.1 · 0.8 · 0.8.
        assert!(same("aa", "ba") < 0.15, "{}", same("aa", "ba"));
    }

    #[test]
    fn write_layout() {
        let dir = tempfile::tempdir().unwrap();
        let c = small();
        c.write(dir.path()).unwrap();
        assert!(dir.path().join("bb/test.tsv").is_file());
        assert!(dir.path().join("lexicon/aa-cb.tsv").is_file());
        let loaded = LexiconProvider::load(dir.path().join("lexicon")).unwrap();
        assert_eq!(loaded.pairs().count(), 30);
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = SyntheticCorpusSpec {
            within_family_shared: 1.5,
            ..SyntheticCorpusSpec::default()
        };
        assert!(SyntheticCorpus::generate(&spec).is_err());
    }
}
