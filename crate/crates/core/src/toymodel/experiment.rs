//! Zero-shot transfer on the synthetic corpus: train on the source language
//! only, with and without code-switched copies, and test on every other
//! language. The target language is always excluded from augmentation.

use std::collections::BTreeSet;

use super::features::FeatureExtractor;
use super::model::{JointTrainingConfig, ToyJointModel};
use super::synthetic::{SyntheticCorpus, SyntheticCorpusSpec};
use crate::augment::{augment_dataset, AugmentationConfig, Level};
use crate::corpus::{Dataset, Split};
use crate::error::Result;
use crate::metrics::EvaluationReport;

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotConfig {
    pub corpus: SyntheticCorpusSpec,
    pub training: JointTrainingConfig,
    pub features: FeatureExtractor,
    pub level: Level,
    pub k: usize,
    /// One corpus, augmentation and training seed per run.
    pub seeds: Vec<u64>,
}

impl Default for ZeroShotConfig {
    fn default() -> Self {
        ZeroShotConfig {
            corpus: SyntheticCorpusSpec::default(),
            training: JointTrainingConfig::default(),
            features: FeatureExtractor::default(),
            level: Level::Chunk,
            k: 5,
            seeds: (1..=5).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetScores {
    pub seed: u64,
    pub target: String,
    pub baseline_intent: f64,
    pub baseline_slot_f1: f64,
    pub augmented_intent: f64,
    pub augmented_slot_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZeroShotReport {
    pub scores: Vec<TargetScores>,
}

impl ZeroShotReport {
    fn mean(&self, f: impl Fn(&TargetScores) -> f64) -> f64 {
        if self.scores.is_empty() {
            return 0.0;
        }
        self.scores.iter().map(f).sum::<f64>() / self.scores.len() as f64
    }

    pub fn baseline_intent(&self) -> f64 {
        self.mean(|s| s.baseline_intent)
    }

    pub fn augmented_intent(&self) -> f64 {
        self.mean(|s| s.augmented_intent)
    }

    pub fn baseline_slot_f1(&self) -> f64 {
        self.mean(|s| s.baseline_slot_f1)
    }

    pub fn augmented_slot_f1(&self) -> f64 {
        self.mean(|s| s.augmented_slot_f1)
    }

    /// Mean augmented minus mean baseline target intent accuracy.
    pub fn intent_margin(&self) -> f64 {
        self.augmented_intent() - self.baseline_intent()
    }
}

fn train_and_eval(
    cfg: &ZeroShotConfig,
    seed: u64,
    train: &Dataset,
    inventory: &Dataset,
    test: &Dataset,
) -> Result<EvaluationReport> {
    let mut model = ToyJointModel::for_dataset(cfg.features, inventory);
    let training = JointTrainingConfig {
        seed,
        ..cfg.training.clone()
    };
    model.train(train, &training)?;
    model.evaluate(test)
}

pub fn run_zero_shot(cfg: &ZeroShotConfig) -> Result<ZeroShotReport> {
    let mut report = ZeroShotReport::default();
    for &seed in &cfg.seeds {
        let corpus = SyntheticCorpus::generate(&SyntheticCorpusSpec {
            seed,
            ..cfg.corpus.clone()
        })?;
        let provider = corpus.lexicon_provider()?;
        let source = cfg.corpus.source_language();
        let train = corpus.dataset(&source, Split::Train).expect("source split");
        let languages: BTreeSet<String> = corpus.languages().into_iter().collect();

        let mut baseline = ToyJointModel::for_dataset(cfg.features, train);
        baseline.train(
            train,
            &JointTrainingConfig {
                seed,
                ..cfg.training.clone()
            },
        )?;

        for target in languages.iter().filter(|l| **l != source) {
            let test = corpus.dataset(target, Split::Test).expect("target split");
            let base = baseline.evaluate(test)?;
            let aug_cfg = AugmentationConfig {
                level: cfg.level,
                k: cfg.k,
                allowed_languages: languages.clone(),
                excluded_languages: BTreeSet::from([target.clone()]),
                family: None,
                include_original: true,
                seed,
            };
            let augmented = augment_dataset(train, &aug_cfg, &provider)?;
            let aug = train_and_eval(cfg, seed, &augmented, train, test)?;
            report.scores.push(TargetScores {
                seed,
                target: target.clone(),
                baseline_intent: base.intent_accuracy(),
                baseline_slot_f1: base.slot_f1(),
                augmented_intent: aug.intent_accuracy(),
                augmented_slot_f1: aug.slot_f1(),
            });
        }
    }
    Ok(report)
}
