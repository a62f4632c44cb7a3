//! LDA by collapsed Gibbs sampling, plus sliding-window NPMI coherence and
//! grid search over the topic count.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::derive_seed;

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("degenerate vocabulary: {vocab} distinct words for {topics} topics")]
    DegenerateVocabulary { vocab: usize, topics: usize },
    #[error("document {index} is empty after vocabulary filtering")]
    EmptyDocument { index: usize },
    #[error("top word `{word}` never occurs in the reference corpus")]
    InsufficientCorpus { word: String },
    #[error("empty topic-count grid")]
    EmptyGrid,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Serde(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric per-document Dirichlet hyperparameter. `None` means 50 / K.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, alpha: None, beta: 0.01, iterations: 1000, seed }
    }

    pub fn effective_alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Vocabulary pruning before training: words must occur at least `min_count`
/// times and in at most `max_doc_fraction` of the documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabFilter {
    pub min_count: usize,
    pub max_doc_fraction: f64,
}

impl Default for VocabFilter {
    fn default() -> Self {
        Self { min_count: 2, max_doc_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LdaModel {
    pub version: u32,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// K x V, flattened row-major.
    pub topic_word_counts: Vec<u32>,
    pub topic_totals: Vec<u32>,
    pub seed: u64,
}

impl LdaModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn word_index(&self) -> HashMap<&str, usize> {
        self.vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect()
    }

    /// The `n` most probable words of topic `k`, ties broken by vocabulary
    /// index.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<&str> {
        let v = self.vocab_size();
        let mut order: Vec<usize> = (0..v).collect();
        order.sort_by(|&a, &b| {
            self.topic_word_counts[k * v + b]
                .cmp(&self.topic_word_counts[k * v + a])
                .then(a.cmp(&b))
        });
        order.into_iter().take(n).map(|w| self.vocab[w].as_str()).collect()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<(), TopicsError> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self, TopicsError> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Per-document topic proportions; non-negative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicMixture(pub Vec<f64>);

impl TopicMixture {
    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }
}

/// Gibbs sampler with exposed per-sweep state so invariants (count
/// conservation) can be checked from outside.
pub struct LdaTrainer {
    k: usize,
    v: usize,
    alpha: f64,
    beta: f64,
    vocab: Vec<String>,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u16>>,
    doc_topic: Vec<u32>,
    topic_word: Vec<u32>,
    topic_totals: Vec<u32>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl LdaTrainer {
    pub fn new(
        corpus: &[Vec<String>],
        params: &LdaParams,
        filter: &VocabFilter,
    ) -> Result<Self, TopicsError> {
        if corpus.is_empty() {
            return Err(TopicsError::EmptyCorpus);
        }
        let (vocab, docs) = build_vocabulary(corpus, filter);
        if vocab.len() < params.k {
            return Err(TopicsError::DegenerateVocabulary {
                vocab: vocab.len(),
                topics: params.k,
            });
        }
        if let Some(index) = docs.iter().position(Vec::is_empty) {
            return Err(TopicsError::EmptyDocument { index });
        }

        let k = params.k;
        let v = vocab.len();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut topic_word = vec![0u32; k * v];
        let mut topic_totals = vec![0u32; k];
        let mut assignments = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut z = Vec::with_capacity(doc.len());
            for &w in doc {
                let topic = rng.random_range(0..k) as u16;
                z.push(topic);
                doc_topic[d * k + topic as usize] += 1;
                topic_word[topic as usize * v + w as usize] += 1;
                topic_totals[topic as usize] += 1;
            }
            assignments.push(z);
        }
        Ok(Self {
            k,
            v,
            alpha: params.effective_alpha(),
            beta: params.beta,
            vocab,
            docs,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            seed: params.seed,
            rng,
        })
    }

    /// One full Gibbs sweep: resample the topic of every token from the
    /// collapsed conditional (n_dk + alpha) * (n_kw + beta) / (n_k + V*beta).
    pub fn sweep(&mut self) {
        let k = self.k;
        let v = self.v;
        let vbeta = v as f64 * self.beta;
        let mut weights = vec![0.0f64; k];
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.assignments[d][i] as usize;
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for (t, slot) in weights.iter_mut().enumerate() {
                    let wt = (f64::from(self.doc_topic[d * k + t]) + self.alpha)
                        * (f64::from(self.topic_word[t * v + w]) + self.beta)
                        / (f64::from(self.topic_totals[t]) + vbeta);
                    *slot = wt;
                    total += wt;
                }
                let mut u = self.rng.random::<f64>() * total;
                let mut new = k - 1;
                for (t, &wt) in weights.iter().enumerate() {
                    u -= wt;
                    if u <= 0.0 {
                        new = t;
                        break;
                    }
                }

                self.assignments[d][i] = new as u16;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_totals[new] += 1;
            }
        }
    }

    /// Total tokens currently assigned across all topics; must equal the
    /// corpus token count after every sweep.
    pub fn assigned_tokens(&self) -> u64 {
        self.topic_word.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn corpus_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.len() as u64).sum()
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.topic_totals
    }

    pub fn into_model(self) -> LdaModel {
        LdaModel {
            version: 1,
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            vocab: self.vocab,
            topic_word_counts: self.topic_word,
            topic_totals: self.topic_totals,
            seed: self.seed,
        }
    }
}

fn build_vocabulary(corpus: &[Vec<String>], filter: &VocabFilter) -> (Vec<String>, Vec<Vec<u32>>) {
    // first-occurrence order keeps vocabulary construction deterministic
    let mut order: Vec<&str> = Vec::new();
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new(); // (total, doc count)
    for doc in corpus {
        let mut seen: Vec<&str> = Vec::new();
        for token in doc {
            let entry = counts.entry(token.as_str()).or_insert_with(|| {
                order.push(token.as_str());
                (0, 0)
            });
            entry.0 += 1;
            if !seen.contains(&token.as_str()) {
                entry.1 += 1;
                seen.push(token.as_str());
            }
        }
    }
    let max_docs = (filter.max_doc_fraction * corpus.len() as f64).floor() as usize;
    let vocab: Vec<String> = order
        .into_iter()
        .filter(|w| {
            let (total, doc_count) = counts[w];
            total >= filter.min_count && doc_count <= max_docs.max(1)
        })
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, u32> =
        vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();
    let docs = corpus
        .iter()
        .map(|doc| doc.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
        .collect();
    (vocab, docs)
}

/// Train an LDA model to completion. Deterministic for a fixed seed.
pub fn train_lda(
    corpus: &[Vec<String>],
    params: &LdaParams,
    filter: &VocabFilter,
) -> Result<LdaModel, TopicsError> {
    let mut trainer = LdaTrainer::new(corpus, params, filter)?;
    for _ in 0..params.iterations.max(1) {
        trainer.sweep();
    }
    Ok(trainer.into_model())
}

/// Fold a held-out document in against frozen topic-word counts and return
/// its topic mixture (n_dk + alpha) / (N_d + K*alpha). Unseen words are
/// skipped; a document with no known words gets the uniform mixture.
pub fn infer_topic_mixture(
    model: &LdaModel,
    tokens: &[String],
    burn_in_iterations: usize,
    seed: u64,
) -> TopicMixture {
    let index = model.word_index();
    let ids: Vec<usize> = tokens.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
    if ids.is_empty() {
        return TopicMixture::uniform(model.k);
    }
    let k = model.k;
    let v = model.vocab_size();
    let vbeta = v as f64 * model.beta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc_topic = vec![0u32; k];
    let mut z: Vec<usize> = Vec::with_capacity(ids.len());
    for _ in &ids {
        let t = rng.random_range(0..k);
        doc_topic[t] += 1;
        z.push(t);
    }
    let mut weights = vec![0.0f64; k];
    for _ in 0..burn_in_iterations.max(1) {
        for (i, &w) in ids.iter().enumerate() {
            let old = z[i];
            doc_topic[old] -= 1;
            let mut total = 0.0;
            for (t, slot) in weights.iter_mut().enumerate() {
                let wt = (f64::from(doc_topic[t]) + model.alpha)
                    * (f64::from(model.topic_word_counts[t * v + w]) + model.beta)
                    / (f64::from(model.topic_totals[t]) + vbeta);
                *slot = wt;
                total += wt;
            }
            let mut u = rng.random::<f64>() * total;
            let mut new = k - 1;
            for (t, &wt) in weights.iter().enumerate() {
                u -= wt;
                if u <= 0.0 {
                    new = t;
                    break;
                }
            }
            z[i] = new;
            doc_topic[new] += 1;
        }
    }
    let denom = ids.len() as f64 + k as f64 * model.alpha;
    TopicMixture(doc_topic.iter().map(|&c| (f64::from(c) + model.alpha) / denom).collect())
}

/// Mean over topics of mean pairwise NPMI between the topic's `top_n` words,
/// counted over sliding windows of `window` tokens in the reference corpus,
/// with +1 smoothing on co-occurrence counts. Documents shorter than the
/// window contribute a single window.
pub fn coherence(
    model: &LdaModel,
    corpus: &[Vec<String>],
    top_n: usize,
    window: usize,
) -> Result<f64, TopicsError> {
    let top: Vec<Vec<&str>> = (0..model.k).map(|k| model.top_words(k, top_n)).collect();

    // candidate words across all topics
    let mut cand_index: HashMap<&str, usize> = HashMap::new();
    for words in &top {
        for &w in words {
            let next = cand_index.len();
            cand_index.entry(w).or_insert(next);
        }
    }
    let n_cand = cand_index.len();

    // unordered candidate pairs needed by at least one topic
    let topic_pairs: Vec<Vec<(usize, usize)>> = top
        .iter()
        .map(|words| {
            let ids: Vec<usize> = words.iter().map(|w| cand_index[w]).collect();
            let mut pairs = Vec::new();
            for i in 0..ids.len() {
                for j in (i + 1)..ids.len() {
                    let (a, b) = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                    if a != b {
                        pairs.push((a, b));
                    }
                }
            }
            pairs
        })
        .collect();
    let mut pair_counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for pairs in &topic_pairs {
        for &p in pairs {
            pair_counts.entry(p).or_insert(0);
        }
    }

    let mut word_counts = vec![0u64; n_cand];
    let mut total_windows = 0u64;
    let mut in_window = vec![0u32; n_cand];
    let mut present: Vec<usize> = Vec::new();

    let mut tally = |in_window: &[u32],
                     present: &[usize],
                     word_counts: &mut [u64],
                     pair_counts: &mut BTreeMap<(usize, usize), u64>| {
        for &c in present {
            if in_window[c] > 0 {
                word_counts[c] += 1;
            }
        }
        for (pair, count) in pair_counts.iter_mut() {
            if in_window[pair.0] > 0 && in_window[pair.1] > 0 {
                *count += 1;
            }
        }
    };

    for doc in corpus {
        let ids: Vec<Option<usize>> =
            doc.iter().map(|t| cand_index.get(t.as_str()).copied()).collect();
        in_window.iter_mut().for_each(|c| *c = 0);
        present.clear();
        if doc.len() <= window {
            for id in ids.iter().flatten() {
                if in_window[*id] == 0 {
                    present.push(*id);
                }
                in_window[*id] += 1;
            }
            total_windows += 1;
            tally(&in_window, &present, &mut word_counts, &mut pair_counts);
        } else {
            // prime the first window
            for id in ids[..window].iter().flatten() {
                if in_window[*id] == 0 {
                    present.push(*id);
                }
                in_window[*id] += 1;
            }
            total_windows += 1;
            tally(&in_window, &present, &mut word_counts, &mut pair_counts);
            for start in 1..=(doc.len() - window) {
                if let Some(out) = ids[start - 1] {
                    in_window[out] -= 1;
                }
                if let Some(inc) = ids[start + window - 1] {
                    in_window[inc] += 1;
                }
                present.clear();
                present.extend((0..n_cand).filter(|&c| in_window[c] > 0));
                total_windows += 1;
                tally(&in_window, &present, &mut word_counts, &mut pair_counts);
            }
        }
    }

    for (word, &idx) in &cand_index {
        if word_counts[idx] == 0 {
            return Err(TopicsError::InsufficientCorpus { word: (*word).to_string() });
        }
    }

    let w_total = total_windows as f64;
    let npmi = |a: usize, b: usize| -> f64 {
        let joint = pair_counts[&(a.min(b), a.max(b))];
        // +1 smoothing on the co-occurrence count
        let p_joint = (joint as f64 + 1.0) / (w_total + 1.0);
        if p_joint >= 1.0 {
            return 1.0;
        }
        let p_a = word_counts[a] as f64 / w_total;
        let p_b = word_counts[b] as f64 / w_total;
        let value = (p_joint / (p_a * p_b)).ln() / -p_joint.ln();
        value.clamp(-1.0, 1.0)
    };

    let mut topic_scores = Vec::with_capacity(model.k);
    for pairs in &topic_pairs {
        if pairs.is_empty() {
            topic_scores.push(0.0);
            continue;
        }
        let sum: f64 = pairs.iter().map(|&(a, b)| npmi(a, b)).sum();
        topic_scores.push(sum / pairs.len() as f64);
    }
    Ok(topic_scores.iter().sum::<f64>() / topic_scores.len().max(1) as f64)
}

pub const COHERENCE_TOP_N: usize = 10;
pub const COHERENCE_WINDOW: usize = 110;

/// Train one model per grid entry and pick the K with the highest coherence
/// (ties go to the smaller K). Returns the winner and the full curve.
pub fn select_topic_count(
    corpus: &[Vec<String>],
    k_grid: &[usize],
    params_for: impl Fn(usize) -> LdaParams,
    filter: &VocabFilter,
) -> Result<(usize, Vec<(usize, f64)>), TopicsError> {
    if k_grid.is_empty() {
        return Err(TopicsError::EmptyGrid);
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for &k in &grid {
        let mut params = params_for(k);
        // independent per-K streams so grid entries do not interact
        params.seed = derive_seed(params.seed, &format!("lda-grid-{k}"));
        let model = train_lda(corpus, &params, filter)?;
        let score = coherence(&model, corpus, COHERENCE_TOP_N, COHERENCE_WINDOW)?;
        curve.push((k, score));
        match best {
            Some((_, best_score)) if score <= best_score => {}
            _ => best = Some((k, score)),
        }
    }
    Ok((best.expect("non-empty grid").0, curve))
}
