//! Intent accuracy and CoNLL-style slot span F1.

use std::collections::BTreeMap;

use crate::corpus::SlotTag;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub slot_type: String,
}

/// Spans of a possibly ill-formed tag sequence. An `I-x` that does not
/// continue an `x` span opens a new one (conlleval convention), so model
/// output need not be valid BIO.
pub fn extract_spans(labels: &[SlotTag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, label) in labels.iter().enumerate() {
        let continues = matches!((label, open), (SlotTag::Inside(t), Some((_, o))) if t == o);
        if continues {
            continue;
        }
        if let Some((start, t)) = open.take() {
            spans.push(Span {
                start,
                end: i,
                slot_type: t.to_string(),
            });
        }
        if let Some(t) = label.slot_type() {
            open = Some((i, t));
        }
    }
    if let Some((start, t)) = open {
        spans.push(Span {
            start,
            end: labels.len(),
            slot_type: t.to_string(),
        });
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.true_positives += other.true_positives;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.predicted, self.gold == 0)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.gold, self.predicted == 0)
    }

    /// Harmonic mean of precision and recall. With no gold and no predicted
    /// items every score is 1.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: usize, den: usize, vacuous: bool) -> f64 {
    match (den, vacuous) {
        (0, true) => 1.0,
        (0, false) => 0.0,
        _ => num as f64 / den as f64,
    }
}

/// Per-type span counts for one sequence pair.
pub fn span_counts(gold: &[SlotTag], predicted: &[SlotTag]) -> BTreeMap<String, Counts> {
    let gold_spans = extract_spans(gold);
    let pred_spans = extract_spans(predicted);
    let mut counts: BTreeMap<String, Counts> = BTreeMap::new();
    for s in &gold_spans {
        counts.entry(s.slot_type.clone()).or_default().gold += 1;
    }
    for s in &pred_spans {
        let entry = counts.entry(s.slot_type.clone()).or_default();
        entry.predicted += 1;
        if gold_spans.contains(s) {
            entry.true_positives += 1;
        }
    }
    counts
}

/// Token-level counts over non-`O` tags.
pub fn token_counts(gold: &[SlotTag], predicted: &[SlotTag]) -> Counts {
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(predicted) {
        if !g.is_outside() {
            c.gold += 1;
        }
        if !p.is_outside() {
            c.predicted += 1;
            if g == p {
                c.true_positives += 1;
            }
        }
    }
    c
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationReport {
    pub intent_correct: usize,
    pub intent_total: usize,
    /// Micro-averaged span counts over all slot types.
    pub slot_spans: Counts,
    pub slot_tokens: Counts,
    /// intent → (correct, total)
    pub per_intent: BTreeMap<String, (usize, usize)>,
    pub per_slot_type: BTreeMap<String, Counts>,
}

impl EvaluationReport {
    pub fn add_intent(&mut self, gold: &str, predicted: &str) {
        let entry = self.per_intent.entry(gold.to_string()).or_default();
        entry.1 += 1;
        self.intent_total += 1;
        if gold == predicted {
            entry.0 += 1;
            self.intent_correct += 1;
        }
    }

    pub fn add_slots(&mut self, gold: &[SlotTag], predicted: &[SlotTag]) {
        for (slot_type, c) in span_counts(gold, predicted) {
            self.slot_spans.add(c);
            self.per_slot_type.entry(slot_type).or_default().add(c);
        }
        self.slot_tokens.add(token_counts(gold, predicted));
    }

    pub fn intent_accuracy(&self) -> f64 {
        if self.intent_total == 0 {
            0.0
        } else {
            self.intent_correct as f64 / self.intent_total as f64
        }
    }

    pub fn slot_f1(&self) -> f64 {
        self.slot_spans.f1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<SlotTag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    #[test]
    fn spans_of_valid_sequence() {
        let spans = extract_spans(&tags("O B-city I-city O B-date"));
        assert_eq!(
            spans,
            vec![
                Span {
                    start: 1,
                    end: 3,
                    slot_type: "city".into()
                },
                Span {
                    start: 4,
                    end: 5,
                    slot_type: "date".into()
                },
            ]
        );
    }

    #[test]
    fn dangling_inside_opens_span() {
        let spans = extract_spans(&tags("I-a I-a B-a I-b"));
        let ranges: Vec<_> = spans.iter().map(|s| (s.start, s.end, s.slot_type.as_str())).collect();
        assert_eq!(ranges, [(0, 2, "a"), (2, 3, "a"), (3, 4, "b")]);
    }

    #[test]
    fn one_false_positive() {
        // gold {(1,3,city)}, predicted {(1,3,city),(4,5,date)}
        let gold = tags("O B-city I-city O O");
        let pred = tags("O B-city I-city O B-date");
        let mut report = EvaluationReport::default();
        report.add_slots(&gold, &pred);
        assert_eq!(report.slot_spans.precision(), 0.5);
        assert_eq!(report.slot_spans.recall(), 1.0);
        assert!((report.slot_f1() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.per_slot_type["date"].predicted, 1);
        assert_eq!(report.per_slot_type["date"].gold, 0);
    }

    #[test]
    fn intent_accuracy_three_of_four() {
        let mut report = EvaluationReport::default();
        for (g, p) in [("a", "a"), ("a", "b"), ("b", "b"), ("c", "c")] {
            report.add_intent(g, p);
        }
        assert_eq!(report.intent_accuracy(), 0.75);
        assert_eq!(report.per_intent["a"], (1, 2));
    }

    #[test]
    fn identical_predictions_score_one() {
        let gold = tags("B-a I-a O B-b");
        let mut report = EvaluationReport::default();
        report.add_intent("x", "x");
        report.add_slots(&gold, &gold);
        assert_eq!(report.intent_accuracy(), 1.0);
        assert_eq!(report.slot_f1(), 1.0);
        assert_eq!(report.slot_tokens.f1(), 1.0);
    }

    #[test]
    fn boundary_mismatch_is_a_miss() {
        let c = span_counts(&tags("B-a I-a"), &tags("B-a O"));
        assert_eq!(
            c["a"],
            Counts {
                true_positives: 0,
                predicted: 1,
                gold: 1
            }
        );
        let t = token_counts(&tags("B-a I-a"), &tags("B-a O"));
        assert_eq!(
            t,
            Counts {
                true_positives: 1,
                predicted: 1,
                gold: 2
            }
        );
    }

    #[test]
    fn empty_counts() {
        assert_eq!(Counts::default().f1(), 1.0);
        let only_gold = Counts {
            true_positives: 0,
            predicted: 0,
            gold: 3,
        };
        assert_eq!(only_gold.f1(), 0.0);
    }
}
