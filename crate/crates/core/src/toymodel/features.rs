use crate::hash::fnv1a64;

/// Sparse vector as `(index, value)` pairs sorted by index, no duplicates.
pub type SparseVec = Vec<(usize, f64)>;

/// Hashed character n-gram features.
///
/// A token is wrapped in `<` `>`, lowercased, and cut into character n-grams;
/// each n-gram is hashed (FNV-1a 64) into `dim` buckets. The token vector is
/// the L2-normalized bucket count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureExtractor {
    pub dim: usize,
    pub ngram: usize,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor { dim: 4096, ngram: 3 }
    }
}

/// Features of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    /// Mean of the token vectors; length `dim`.
    pub pooled: SparseVec,
    /// Per token `[previous | token | next]`; length `3 * dim`, zero blocks at
    /// the utterance boundaries.
    pub tokens: Vec<SparseVec>,
}

fn merge(mut entries: Vec<(usize, f64)>) -> SparseVec {
    entries.sort_unstable_by_key(|&(i, _)| i);
    let mut out: SparseVec = Vec::with_capacity(entries.len());
    for (i, v) in entries {
        match out.last_mut() {
            Some((last, acc)) if *last == i => *acc += v,
            _ => out.push((i, v)),
        }
    }
    out
}

impl FeatureExtractor {
    pub fn new(dim: usize, ngram: usize) -> Self {
        assert!(
            dim > 0 && ngram > 0,
            "feature dimension and n-gram size must be positive"
        );
        FeatureExtractor { dim, ngram }
    }

    pub fn token_vector(&self, token: &str) -> SparseVec {
        let marked: Vec<char> = format!("<{}>", token.to_lowercase()).chars().collect();
        let mut buf = String::new();
        let mut hash_gram = |gram: &[char]| {
            buf.clear();
            buf.extend(gram);
            (fnv1a64(buf.as_bytes()) % self.dim as u64) as usize
        };
        let buckets: Vec<(usize, f64)> = if marked.len() <= self.ngram {
            vec![(hash_gram(&marked), 1.0)]
        } else {
            marked.windows(self.ngram).map(|g| (hash_gram(g), 1.0)).collect()
        };
        let mut v = merge(buckets);
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        for (_, x) in &mut v {
            *x /= norm;
        }
        v
    }

    pub fn extract(&self, tokens: &[String]) -> UtteranceFeatures {
        let vectors: Vec<SparseVec> = tokens.iter().map(|t| self.token_vector(t)).collect();
        let scale = 1.0 / vectors.len().max(1) as f64;
        let pooled = merge(vectors.iter().flatten().map(|&(i, v)| (i, v * scale)).collect());
        let d = self.dim;
        let per_token = (0..vectors.len())
            .map(|m| {
                let mut entries = Vec::new();
                if m > 0 {
                    entries.extend(vectors[m - 1].iter().copied());
                }
                entries.extend(vectors[m].iter().map(|&(i, v)| (i + d, v)));
                if let Some(next) = vectors.get(m + 1) {
                    entries.extend(next.iter().map(|&(i, v)| (i + 2 * d, v)));
                }
                entries
            })
            .collect();
        UtteranceFeatures {
            pooled,
            tokens: per_token,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &SparseVec) -> f64 {
        v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn token_vectors_are_unit_length() {
        let fx = FeatureExtractor::default();
        for t in ["a", "boston", "ニューヨーク", "x-y_z"] {
            let v = fx.token_vector(t);
            assert!((norm(&v) - 1.0).abs() < 1e-12, "{t}");
            assert!(v.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(v.iter().all(|&(i, _)| i < fx.dim));
        }
    }

    #[test]
    fn trigram_count() {
        // "<ab>" has trigrams "<ab" and "ab>".
        let fx = FeatureExtractor::new(1 << 20, 3);
        assert_eq!(fx.token_vector("ab").len(), 2);
        assert_eq!(fx.token_vector("AB"), fx.token_vector("ab"));
    }

    #[test]
    fn single_token_pooled_equals_token_vector() {
        let fx = FeatureExtractor::default();
        let f = fx.extract(&["denver".to_string()]);
        assert_eq!(f.pooled, fx.token_vector("denver"));
        // No neighbours: only the middle block is populated.
        assert!(f.tokens[0].iter().all(|&(i, _)| (fx.dim..2 * fx.dim).contains(&i)));
    }

    #[test]
    fn neighbour_blocks() {
        let fx = FeatureExtractor::new(64, 3);
        let tokens: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let f = fx.extract(&tokens);
        let blocks = |v: &SparseVec| {
            let mut b: Vec<usize> = v.iter().map(|&(i, _)| i / 64).collect();
            b.dedup();
            b
        };
        assert_eq!(blocks(&f.tokens[0]), [1, 2]);
        assert_eq!(blocks(&f.tokens[1]), [0, 1, 2]);
        assert_eq!(blocks(&f.tokens[2]), [0, 1]);
    }

    #[test]
    fn deterministic() {
        let fx = FeatureExtractor::default();
        let tokens: Vec<String> = ["show", "flights"].iter().map(|s| s.to_string()).collect();
        assert_eq!(fx.extract(&tokens), fx.extract(&tokens));
    }
}
