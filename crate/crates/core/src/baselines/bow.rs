//! Bag-of-words ranker: normalised word frequencies of the dialogue prefix
//! through a small feed-forward network.

use std::collections::{BTreeMap, HashMap};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use oppmodel_neural::{Graph, Linear, NodeId, ParamStore, Tensor};

use crate::baselines::stopwords::is_stopword;
use crate::corpus::{partial_view, Instance, PartialDialogue, Utterance};
use crate::error::{Error, Result};
use crate::issue::DEFAULT_ISSUES;
use crate::metrics::PriorityModel;
use crate::ranker::tokenize;

/// The most frequent non-stopword training tokens; ties in lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct BowVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for BowVocab {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self { words, index }
    }
}

impl From<BowVocab> for Vec<String> {
    fn from(v: BowVocab) -> Self {
        v.words
    }
}

impl BowVocab {
    pub const DEFAULT_SIZE: usize = 500;

    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, size: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                if tok.chars().any(char::is_alphanumeric) && !is_stopword(&tok) {
                    *counts.entry(tok).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
            .into_iter()
            .take(size)
            .map(|(w, _)| w)
            .collect::<Vec<_>>()
            .into()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn add_counts(&self, text: &str, counts: &mut [f64]) {
        for tok in tokenize(text) {
            if let Some(&i) = self.index.get(&tok) {
                counts[i] += 1.0;
            }
        }
    }
}

fn normalise(counts: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        counts.to_vec()
    } else {
        counts.iter().map(|c| c / total).collect()
    }
}

/// L1-normalised vocabulary counts over every utterance of the prefix.
pub fn bow_features(partial: &PartialDialogue, vocab: &BowVocab) -> Vec<f64> {
    let mut counts = vec![0.0; vocab.len()];
    for u in partial.utterances() {
        vocab.add_counts(&u.text, &mut counts);
    }
    normalise(&counts)
}

/// Row j holds the features of utterances 0..=j.
pub fn bow_prefix_matrix(utterances: &[Utterance], vocab: &BowVocab) -> Tensor {
    let mut counts = vec![0.0; vocab.len()];
    let mut out = Array2::zeros((utterances.len(), vocab.len()));
    for (j, u) in utterances.iter().enumerate() {
        vocab.add_counts(&u.text, &mut counts);
        for (c, v) in normalise(&counts).into_iter().enumerate() {
            out[[j, c]] = v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BowConfig {
    pub vocab_size: usize,
    pub hidden: [usize; 2],
    pub issues: usize,
}

impl Default for BowConfig {
    fn default() -> Self {
        Self {
            vocab_size: BowVocab::DEFAULT_SIZE,
            hidden: [256, 64],
            issues: DEFAULT_ISSUES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BowModel {
    config: BowConfig,
    vocab: BowVocab,
    store: ParamStore,
    layers: [Linear; 3],
}

impl BowModel {
    pub fn new(config: BowConfig, vocab: BowVocab, seed: u64) -> Result<Self> {
        if vocab.is_empty() {
            return Err(Error::Argument("bag-of-words vocabulary is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let [h1, h2] = config.hidden;
        let layers = [
            Linear::new(&mut store, "bow.fc1", vocab.len(), h1, &mut rng),
            Linear::new(&mut store, "bow.fc2", h1, h2, &mut rng),
            Linear::new(&mut store, "bow.out", h2, config.issues, &mut rng),
        ];
        Ok(Self {
            config,
            vocab,
            store,
            layers,
        })
    }

    pub fn from_parts(config: BowConfig, vocab: BowVocab, params: &ParamStore) -> Result<Self> {
        let mut model = Self::new(config, vocab, 0)?;
        model.store.load_values_from(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &BowConfig {
        &self.config
    }

    pub fn vocab(&self) -> &BowVocab {
        &self.vocab
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Scores for a features matrix, one row per prefix.
    pub fn forward_features(&self, g: &mut Graph, features: NodeId) -> Result<NodeId> {
        let width = g.value(features).ncols();
        if width != self.vocab.len() {
            return Err(Error::Argument(format!(
                "feature width {width} but vocabulary has {} words",
                self.vocab.len()
            )));
        }
        let h = self.layers[0].forward(g, features)?;
        let h = g.relu(h);
        let h = g.dropout(h);
        let h = self.layers[1].forward(g, h)?;
        let h = g.relu(h);
        let logits = self.layers[2].forward(g, h)?;
        Ok(g.sigmoid(logits))
    }

    /// m scores in (0, 1) for one feature vector.
    pub fn bow_forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.store);
        let x = g.input(
            Array2::from_shape_vec((1, features.len()), features.to_vec())
                .map_err(|e| Error::Argument(e.to_string()))?,
        );
        let s = self.forward_features(&mut g, x)?;
        Ok(g.value(s).row(0).to_vec())
    }

    /// Scores for every prefix of the dialogue.
    pub fn forward(&self, g: &mut Graph, utterances: &[Utterance]) -> Result<NodeId> {
        let x = g.input(bow_prefix_matrix(utterances, &self.vocab));
        self.forward_features(g, x)
    }
}

impl PriorityModel for BowModel {
    fn name(&self) -> &str {
        "bow"
    }

    fn scores_at_k(&self, instance: &Instance, k: usize) -> Result<Vec<f64>> {
        let view = partial_view(instance, k)?;
        self.bow_forward(&bow_features(&view, &self.vocab))
    }
}
