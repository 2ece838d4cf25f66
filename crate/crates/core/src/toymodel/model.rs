use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureExtractor, SparseVec, UtteranceFeatures};
use crate::corpus::{Dataset, SlotTag, Utterance};
use crate::error::{Error, Result};
use crate::metrics::EvaluationReport;

/// Linear joint model: an intent head over the pooled utterance vector and a
/// tag head shared across token positions.
///
/// `p_intent = softmax(W_i · pooled + b_i)`,
/// `p_tag[m] = softmax(W_sl · token_m + b_sl)` for every token `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyJointModel {
    pub(crate) extractor: FeatureExtractor,
    pub(crate) intents: Vec<String>,
    pub(crate) tags: Vec<SlotTag>,
    /// `intents.len() × dim`, row major.
    pub(crate) intent_w: Vec<f64>,
    pub(crate) intent_b: Vec<f64>,
    /// `tags.len() × 3·dim`, row major.
    pub(crate) slot_w: Vec<f64>,
    pub(crate) slot_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub intent_probs: Vec<f64>,
    pub tag_probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    /// `alpha · intent + beta · slot`
    pub total: f64,
    pub intent: f64,
    pub slot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointTrainingConfig {
    pub alpha: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the full-batch loss has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for JointTrainingConfig {
    /// Intent-focused weights (α = 1.0, β = 0.6).
    fn default() -> Self {
        JointTrainingConfig {
            alpha: 1.0,
            beta: 0.6,
            learning_rate: 3.0,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            patience: Some(5),
        }
    }
}

impl JointTrainingConfig {
    /// Equal task weights (α = β = 1.0).
    pub fn slot_focused() -> Self {
        JointTrainingConfig {
            beta: 1.0,
            ..JointTrainingConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights_ok = self.alpha.is_finite() && self.beta.is_finite() && self.alpha >= 0.0 && self.beta >= 0.0;
        if !weights_ok || self.alpha + self.beta <= 0.0 {
            return Err(Error::Configuration(format!(
                "task weights must be non-negative with a positive sum (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Configuration(format!(
                "invalid learning rate {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Configuration("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// An utterance with precomputed features and label indices.
#[derive(Debug, Clone)]
pub struct EncodedUtterance {
    pub features: UtteranceFeatures,
    pub intent: usize,
    pub tags: Vec<usize>,
}

/// Which parameter block a flat index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    IntentWeight,
    IntentBias,
    SlotWeight,
    SlotBias,
}

fn dot(row: &[f64], x: &SparseVec) -> f64 {
    x.iter().map(|&(i, v)| row[i] * v).sum()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &x)| if x > best.1 { (i, x) } else { best },
        )
        .0
}

impl ToyJointModel {
    /// Zero-initialized model over the given label inventories.
    pub fn new(extractor: FeatureExtractor, intents: Vec<String>, tags: Vec<SlotTag>) -> Self {
        let d = extractor.dim;
        ToyJointModel {
            intent_w: vec![0.0; intents.len() * d],
            intent_b: vec![0.0; intents.len()],
            slot_w: vec![0.0; tags.len() * 3 * d],
            slot_b: vec![0.0; tags.len()],
            extractor,
            intents,
            tags,
        }
    }

    /// Inventories taken from the dataset (sorted; `O` always present).
    pub fn for_dataset(extractor: FeatureExtractor, ds: &Dataset) -> Self {
        let intents: BTreeSet<String> = ds.iter().map(|u| u.intent().to_string()).collect();
        let mut tags: BTreeSet<SlotTag> = ds.iter().flat_map(|u| u.slot_labels().iter().cloned()).collect();
        tags.insert(SlotTag::Outside);
        ToyJointModel::new(extractor, intents.into_iter().collect(), tags.into_iter().collect())
    }

    pub fn extractor(&self) -> FeatureExtractor {
        self.extractor
    }

    pub fn intents(&self) -> &[String] {
        &self.intents
    }

    pub fn tags(&self) -> &[SlotTag] {
        &self.tags
    }

    fn check_inventory(&self) -> Result<()> {
        if self.intents.is_empty() {
            return Err(Error::UnknownLabelInventory("<empty intent inventory>".into()));
        }
        if self.tags.is_empty() {
            return Err(Error::UnknownLabelInventory("<empty tag inventory>".into()));
        }
        Ok(())
    }

    pub fn encode(&self, u: &Utterance) -> Result<EncodedUtterance> {
        let intent = self
            .intents
            .iter()
            .position(|i| i == u.intent())
            .ok_or_else(|| Error::UnknownLabelInventory(u.intent().to_string()))?;
        let tags = u
            .slot_labels()
            .iter()
            .map(|t| {
                self.tags
                    .iter()
                    .position(|x| x == t)
                    .ok_or_else(|| Error::UnknownLabelInventory(t.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(EncodedUtterance {
            features: self.extractor.extract(u.tokens()),
            intent,
            tags,
        })
    }

    pub fn encode_dataset(&self, ds: &Dataset) -> Result<Vec<EncodedUtterance>> {
        ds.iter().map(|u| self.encode(u)).collect()
    }

    fn intent_logits(&self, pooled: &SparseVec) -> Vec<f64> {
        let d = self.extractor.dim;
        (0..self.intents.len())
            .map(|c| dot(&self.intent_w[c * d..(c + 1) * d], pooled) + self.intent_b[c])
            .collect()
    }

    fn tag_logits(&self, token: &SparseVec) -> Vec<f64> {
        let width = 3 * self.extractor.dim;
        (0..self.tags.len())
            .map(|t| dot(&self.slot_w[t * width..(t + 1) * width], token) + self.slot_b[t])
            .collect()
    }

    pub fn predict_features(&self, features: &UtteranceFeatures) -> Prediction {
        Prediction {
            intent_probs: softmax(&self.intent_logits(&features.pooled)),
            tag_probs: features.tokens.iter().map(|t| softmax(&self.tag_logits(t))).collect(),
        }
    }

    pub fn predict(&self, u: &Utterance) -> Result<Prediction> {
        self.predict_tokens(u.tokens())
    }

    pub fn predict_tokens(&self, tokens: &[String]) -> Result<Prediction> {
        self.check_inventory()?;
        Ok(self.predict_features(&self.extractor.extract(tokens)))
    }

    /// Most probable intent and per-token tags.
    pub fn decode(&self, prediction: &Prediction) -> (&str, Vec<SlotTag>) {
        let intent = &self.intents[argmax(&prediction.intent_probs)];
        let tags = prediction
            .tag_probs
            .iter()
            .map(|p| self.tags[argmax(p)].clone())
            .collect();
        (intent, tags)
    }

    pub fn joint_loss(&self, batch: &[Utterance], cfg: &JointTrainingConfig) -> Result<JointLoss> {
        let encoded: Vec<EncodedUtterance> = batch.iter().map(|u| self.encode(u)).collect::<Result<_>>()?;
        self.loss_encoded(&encoded, cfg.alpha, cfg.beta)
    }

    /// Predictions and loss for a batch.
    fn forward(&self, batch: &[&EncodedUtterance], alpha: f64, beta: f64) -> Result<(JointLoss, Vec<Prediction>)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        self.check_inventory()?;
        let predictions: Vec<Prediction> = batch.iter().map(|e| self.predict_features(&e.features)).collect();
        let n_utt = batch.len() as f64;
        let n_tok = batch.iter().map(|e| e.tags.len()).sum::<usize>().max(1) as f64;
        let mut intent_loss = 0.0;
        let mut slot_loss = 0.0;
        for (e, p) in batch.iter().zip(&predictions) {
            intent_loss -= p.intent_probs[e.intent].ln();
            for (gold, probs) in e.tags.iter().zip(&p.tag_probs) {
                slot_loss -= probs[*gold].ln();
            }
        }
        intent_loss /= n_utt;
        slot_loss /= n_tok;
        let loss = JointLoss {
            total: alpha * intent_loss + beta * slot_loss,
            intent: intent_loss,
            slot: slot_loss,
        };
        Ok((loss, predictions))
    }

    fn loss_refs(&self, batch: &[&EncodedUtterance], alpha: f64, beta: f64) -> Result<JointLoss> {
        Ok(self.forward(batch, alpha, beta)?.0)
    }

    pub fn loss_encoded(&self, batch: &[EncodedUtterance], alpha: f64, beta: f64) -> Result<JointLoss> {
        let refs: Vec<&EncodedUtterance> = batch.iter().collect();
        self.loss_refs(&refs, alpha, beta)
    }

    /// Dense gradient of the joint loss in [`ToyJointModel::parameters`] order.
    pub fn gradient(&self, batch: &[EncodedUtterance], alpha: f64, beta: f64) -> Result<(JointLoss, Vec<f64>)> {
        let refs: Vec<&EncodedUtterance> = batch.iter().collect();
        let (loss, predictions) = self.forward(&refs, alpha, beta)?;
        let mut grad = vec![0.0; self.parameter_count()];
        let offsets = self.offsets();
        self.shape().backprop(&refs, &predictions, alpha, beta, |block, i, g| {
            grad[offsets.of(block) + i] += g
        });
        Ok((loss, grad))
    }

    fn shape(&self) -> Shape {
        Shape {
            dim: self.extractor.dim,
        }
    }

    fn offsets(&self) -> Offsets {
        let intent_b = self.intent_w.len();
        let slot_w = intent_b + self.intent_b.len();
        let slot_b = slot_w + self.slot_w.len();
        Offsets {
            intent_b,
            slot_w,
            slot_b,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.intent_w.len() + self.intent_b.len() + self.slot_w.len() + self.slot_b.len()
    }

    /// All parameters flattened: `W_i`, `b_i`, `W_sl`, `b_sl`.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.intent_w, &self.intent_b, &self.slot_w, &self.slot_b]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Configuration(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut rest = params;
        for block in [
            &mut self.intent_w,
            &mut self.intent_b,
            &mut self.slot_w,
            &mut self.slot_b,
        ] {
            let (head, tail) = rest.split_at(block.len());
            block.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    fn block_mut(&mut self, block: Param) -> &mut [f64] {
        match block {
            Param::IntentWeight => &mut self.intent_w,
            Param::IntentBias => &mut self.intent_b,
            Param::SlotWeight => &mut self.slot_w,
            Param::SlotBias => &mut self.slot_b,
        }
    }

    /// Mini-batch gradient descent. Returns the full-batch loss before
    /// training followed by the loss after each epoch.
    pub fn train(&mut self, ds: &Dataset, cfg: &JointTrainingConfig) -> Result<Vec<JointLoss>> {
        cfg.validate()?;
        let encoded = self.encode_dataset(ds)?;
        self.train_encoded(&encoded, cfg)
    }

    pub fn train_encoded(&mut self, data: &[EncodedUtterance], cfg: &JointTrainingConfig) -> Result<Vec<JointLoss>> {
        cfg.validate()?;
        let initial = self.loss_encoded(data, cfg.alpha, cfg.beta)?;
        let mut curve = vec![initial];
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut best = initial.total;
        let mut stale = 0;
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            for batch_idx in order.chunks(cfg.batch_size) {
                let batch: Vec<&EncodedUtterance> = batch_idx.iter().map(|&i| &data[i]).collect();
                let (_, predictions) = self.forward(&batch, cfg.alpha, cfg.beta)?;
                let lr = cfg.learning_rate;
                self.shape()
                    .backprop(&batch, &predictions, cfg.alpha, cfg.beta, |block, i, g| {
                        self.block_mut(block)[i] -= lr * g;
                    });
            }
            let loss = self.loss_encoded(data, cfg.alpha, cfg.beta)?;
            if !loss.total.is_finite() {
                return Err(Error::DivergenceDetected {
                    epoch,
                    loss: loss.total,
                });
            }
            curve.push(loss);
            if loss.total < best {
                best = loss.total;
                stale = 0;
            } else {
                stale += 1;
                if cfg.patience.is_some_and(|p| stale >= p) {
                    break;
                }
            }
        }
        Ok(curve)
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<EvaluationReport> {
        self.check_inventory()?;
        let mut report = EvaluationReport::default();
        for u in ds {
            let prediction = self.predict(u)?;
            let (intent, tags) = self.decode(&prediction);
            report.add_intent(u.intent(), intent);
            report.add_slots(u.slot_labels(), &tags);
        }
        Ok(report)
    }
}

/// The parameter geometry needed to route gradients, detached from the
/// parameters so updates can be applied while iterating.
#[derive(Clone, Copy)]
struct Shape {
    dim: usize,
}

impl Shape {
    /// Calls `visit(block, index, gradient)` once per non-zero gradient
    /// contribution of softmax cross-entropy on both heads.
    fn backprop(
        self,
        batch: &[&EncodedUtterance],
        predictions: &[Prediction],
        alpha: f64,
        beta: f64,
        mut visit: impl FnMut(Param, usize, f64),
    ) {
        let n_utt = batch.len() as f64;
        let n_tok = batch.iter().map(|e| e.tags.len()).sum::<usize>().max(1) as f64;
        let d = self.dim;
        let width = 3 * d;
        for (e, p) in batch.iter().zip(predictions) {
            for (c, &prob) in p.intent_probs.iter().enumerate() {
                let g = alpha * (prob - if c == e.intent { 1.0 } else { 0.0 }) / n_utt;
                visit(Param::IntentBias, c, g);
                for &(i, x) in &e.features.pooled {
                    visit(Param::IntentWeight, c * d + i, g * x);
                }
            }
            for ((gold, probs), token) in e.tags.iter().zip(&p.tag_probs).zip(&e.features.tokens) {
                for (t, &prob) in probs.iter().enumerate() {
                    let g = beta * (prob - if t == *gold { 1.0 } else { 0.0 }) / n_tok;
                    visit(Param::SlotBias, t, g);
                    for &(i, x) in token {
                        visit(Param::SlotWeight, t * width + i, g * x);
                    }
                }
            }
        }
    }
}

struct Offsets {
    intent_b: usize,
    slot_w: usize,
    slot_b: usize,
}

impl Offsets {
    fn of(&self, block: Param) -> usize {
        match block {
            Param::IntentWeight => 0,
            Param::IntentBias => self.intent_b,
            Param::SlotWeight => self.slot_w,
            Param::SlotBias => self.slot_b,
        }
    }
}
