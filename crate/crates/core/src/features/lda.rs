//! Latent Dirichlet allocation over repository descriptions, fitted by
//! collapsed Gibbs sampling. New documents are folded in against the fixed
//! topic-word distributions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
    /// Fold-in sweeps used by [`infer_topics`].
    pub infer_iters: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 2,
            alpha: 0.5,
            beta: 0.01,
            iters: 500,
            seed: 0,
            infer_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub vocab: BTreeMap<String, usize>,
    /// `k × V`, each row a word distribution.
    pub topic_word: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub infer_iters: usize,
    pub infer_seed: u64,
}

/// Fitted model plus the per-document topic proportions of the training corpus.
#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: LdaModel,
    pub doc_topics: Vec<Vec<f64>>,
}

/// Draws an index proportionally to `weights` (not necessarily normalized).
fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct GibbsState {
    docs: Vec<Vec<usize>>,
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<usize>>,
    topic_word: Vec<Vec<usize>>,
    topic_total: Vec<usize>,
}

impl GibbsState {
    fn init(docs: Vec<Vec<usize>>, k: usize, vocab_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut doc_topic = vec![vec![0; k]; docs.len()];
        let mut topic_word = vec![vec![0; vocab_size]; k];
        let mut topic_total = vec![0; k];
        let assignments = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| {
                doc.iter()
                    .map(|&w| {
                        let z = rng.gen_range(0..k);
                        doc_topic[d][z] += 1;
                        topic_word[z][w] += 1;
                        topic_total[z] += 1;
                        z
                    })
                    .collect()
            })
            .collect();
        GibbsState {
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_total,
        }
    }

    fn sweep(&mut self, alpha: f64, beta: f64, rng: &mut ChaCha8Rng) {
        let k = self.topic_total.len();
        let vbeta = beta * self.topic_word[0].len() as f64;
        let mut weights = vec![0.0; k];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i];
                let old = self.assignments[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;
                for (t, wt) in weights.iter_mut().enumerate() {
                    *wt = (self.doc_topic[d][t] as f64 + alpha)
                        * (self.topic_word[t][w] as f64 + beta)
                        / (self.topic_total[t] as f64 + vbeta);
                }
                let new = sample_index(&weights, rng);
                self.assignments[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
    }

    #[cfg(test)]
    fn total_assignments(&self) -> usize {
        self.topic_total.iter().sum()
    }
}

fn theta(counts: &[usize], alpha: f64) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let denom = n as f64 + alpha * counts.len() as f64;
    counts.iter().map(|c| (*c as f64 + alpha) / denom).collect()
}

/// Fits `cfg.k` topics to tokenized documents. Vocabulary ids follow first
/// appearance. Empty documents are allowed as long as some token exists.
pub fn fit_lda(docs: &[Vec<String>], cfg: &LdaConfig) -> Result<LdaFit, FeatureError> {
    if cfg.k < 2 {
        return Err(FeatureError::InvalidConfig("LDA needs k >= 2".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.beta > 0.0) {
        return Err(FeatureError::InvalidConfig("LDA priors must be positive".into()));
    }
    let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
    let ids: Vec<Vec<usize>> = docs
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|tok| {
                    let next = vocab.len();
                    *vocab.entry(tok.clone()).or_insert(next)
                })
                .collect()
        })
        .collect();
    if vocab.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = GibbsState::init(ids, cfg.k, vocab.len(), &mut rng);
    for _ in 0..cfg.iters {
        state.sweep(cfg.alpha, cfg.beta, &mut rng);
    }
    let v = vocab.len() as f64;
    let topic_word = state
        .topic_word
        .iter()
        .zip(&state.topic_total)
        .map(|(row, total)| {
            let denom = *total as f64 + v * cfg.beta;
            row.iter().map(|c| (*c as f64 + cfg.beta) / denom).collect()
        })
        .collect();
    let doc_topics = state.doc_topic.iter().map(|c| theta(c, cfg.alpha)).collect();
    Ok(LdaFit {
        model: LdaModel {
            vocab,
            topic_word,
            alpha: cfg.alpha,
            beta: cfg.beta,
            k: cfg.k,
            infer_iters: cfg.infer_iters,
            infer_seed: cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        },
        doc_topics,
    })
}

/// Topic proportions for one tokenized description. Out-of-vocabulary
/// tokens are skipped; a description with no known tokens gets the uniform
/// vector. The estimate averages the second half of the fold-in sweeps.
pub fn infer_topics(model: &LdaModel, tokens: &[String]) -> Vec<f64> {
    let k = model.k;
    let words: Vec<usize> = tokens.iter().filter_map(|t| model.vocab.get(t).copied()).collect();
    if words.is_empty() {
        return vec![1.0 / k as f64; k];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.infer_seed);
    let mut counts = vec![0usize; k];
    let mut weights = vec![0.0; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|&w| {
            for (t, wt) in weights.iter_mut().enumerate() {
                *wt = model.topic_word[t][w];
            }
            let t = sample_index(&weights, &mut rng);
            counts[t] += 1;
            t
        })
        .collect();
    let iters = model.infer_iters.max(2);
    let burn_in = iters / 2;
    let mut acc = vec![0.0; k];
    for it in 0..iters {
        for (i, &w) in words.iter().enumerate() {
            counts[z[i]] -= 1;
            for (t, wt) in weights.iter_mut().enumerate() {
                *wt = (counts[t] as f64 + model.alpha) * model.topic_word[t][w];
            }
            z[i] = sample_index(&weights, &mut rng);
            counts[z[i]] += 1;
        }
        if it >= burn_in {
            for (a, t) in acc.iter_mut().zip(theta(&counts, model.alpha)) {
                *a += t;
            }
        }
    }
    let total: f64 = acc.iter().sum();
    acc.iter().map(|a| a / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block_corpus(n_per_block: usize, doc_len: usize, seed: u64) -> Vec<Vec<String>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut docs = Vec::new();
        for block in ["a", "b"] {
            for _ in 0..n_per_block {
                docs.push(
                    (0..doc_len)
                        .map(|_| format!("{block}{}", rng.gen_range(0..20)))
                        .collect(),
                );
            }
        }
        docs
    }

    fn cfg(iters: usize) -> LdaConfig {
        LdaConfig {
            iters,
            seed: 11,
            alpha: 0.1,
            ..Default::default()
        }
    }

    #[test]
    fn disjoint_vocabularies_separate() {
        let docs = block_corpus(50, 12, 1);
        let fit = fit_lda(&docs, &cfg(200)).unwrap();
        // Topic ids are arbitrary; align them with block A by majority.
        let a_topic = (0..2)
            .max_by(|x, y| {
                let sx: f64 = fit.doc_topics[..50].iter().map(|t| t[*x]).sum();
                let sy: f64 = fit.doc_topics[..50].iter().map(|t| t[*y]).sum();
                sx.total_cmp(&sy)
            })
            .unwrap();
        let good = fit
            .doc_topics
            .iter()
            .enumerate()
            .filter(|(d, t)| {
                let topic = if *d < 50 { a_topic } else { 1 - a_topic };
                t[topic] >= 0.8
            })
            .count();
        assert!(good >= 90, "only {good}/100 documents aligned");

        let a_doc: Vec<String> = (0..10).map(|i| format!("a{i}")).collect();
        let inferred = infer_topics(&fit.model, &a_doc);
        assert!(inferred[a_topic] >= 0.8, "{inferred:?}");
    }

    #[test]
    fn rows_are_distributions() {
        let fit = fit_lda(&block_corpus(10, 5, 2), &cfg(20)).unwrap();
        for row in &fit.model.topic_word {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for t in &fit.doc_topics {
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_document_inference() {
        let docs = vec![vec!["neural".to_string(), "network".to_string()]];
        let fit = fit_lda(&docs, &LdaConfig { iters: 10, ..Default::default() }).unwrap();
        let t = infer_topics(&fit.model, &docs[0]);
        assert_eq!(t.len(), 2);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(infer_topics(&fit.model, &[]), vec![0.5, 0.5]);
        assert_eq!(infer_topics(&fit.model, &["unseen".to_string()]), vec![0.5, 0.5]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_lda(&[vec![], vec![]], &LdaConfig::default()),
            Err(FeatureError::EmptyCorpus)
        ));
        assert!(matches!(
            fit_lda(&[vec!["x".into()]], &LdaConfig { k: 1, ..Default::default() }),
            Err(FeatureError::InvalidConfig(_))
        ));
    }

    #[test]
    fn sweeps_conserve_assignment_counts() {
        let docs = block_corpus(8, 7, 3);
        let total_len: usize = docs.iter().map(Vec::len).sum();
        let mut vocab = BTreeMap::new();
        let ids: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| {
                d.iter()
                    .map(|t| {
                        let n = vocab.len();
                        *vocab.entry(t.clone()).or_insert(n)
                    })
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut state = GibbsState::init(ids, 3, vocab.len(), &mut rng);
        for _ in 0..10 {
            state.sweep(0.5, 0.01, &mut rng);
            assert_eq!(state.total_assignments(), total_len);
            let doc_sum: usize = state.doc_topic.iter().flatten().sum();
            assert_eq!(doc_sum, total_len);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let docs = block_corpus(10, 6, 4);
        let a = fit_lda(&docs, &cfg(30)).unwrap();
        let b = fit_lda(&docs, &cfg(30)).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.doc_topics, b.doc_topics);
        let q: Vec<String> = vec!["a1".into(), "b2".into(), "a3".into()];
        assert_eq!(infer_topics(&a.model, &q), infer_topics(&b.model, &q));
    }
}
