//! Hierarchical ranker: token-level encoder per utterance, causally masked
//! utterance-level encoder, and a sigmoid score head.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use oppmodel_neural::{
    AttentionMask, Graph, LayerNorm, Linear, NodeId, NormLayout, ParamId, ParamStore, Tensor,
    TransformerLayer, TransformerLayerConfig,
};

use crate::corpus::{partial_view, Author, Instance, Utterance};
use crate::error::{Error, Result};
use crate::issue::{Issue, PriorityOrder, DEFAULT_ISSUES};
use crate::ranker::tokenize::{Vocab, OPP_TOKEN, SELF_TOKEN};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankerConfig {
    pub d: usize,
    pub heads: usize,
    pub level1_layers: usize,
    pub level2_layers: usize,
    pub ff_hidden: usize,
    /// Tokens kept per utterance, author token included.
    pub max_tokens: usize,
    /// Utterance positions with their own embedding; later ones share the last.
    pub max_utterances: usize,
    pub norm: NormLayout,
    pub issues: usize,
    pub min_freq: usize,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            d: 128,
            heads: 4,
            level1_layers: 2,
            level2_layers: 1,
            ff_hidden: 256,
            max_tokens: 64,
            max_utterances: 128,
            norm: NormLayout::Post,
            issues: DEFAULT_ISSUES,
            min_freq: 2,
        }
    }
}

impl RankerConfig {
    pub fn validate(&self) -> Result<()> {
        self.layer().validate()?;
        if self.level1_layers == 0 || self.level2_layers == 0 {
            return Err(Error::Argument("both encoder levels need a layer".into()));
        }
        if self.max_tokens == 0 || self.max_utterances == 0 || self.issues < 2 {
            return Err(Error::Argument(
                "max_tokens, max_utterances must be positive and issues >= 2".into(),
            ));
        }
        Ok(())
    }

    fn layer(&self) -> TransformerLayerConfig {
        TransformerLayerConfig {
            d: self.d,
            heads: self.heads,
            ff_hidden: self.ff_hidden,
            norm: self.norm,
        }
    }
}

/// N × m scores in (0, 1), one row per utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub values: Tensor,
}

impl ScoreMatrix {
    pub fn new(values: Tensor) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
            return Err(Error::Numeric(format!("score {v} outside (0, 1)")));
        }
        Ok(Self { values })
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        self.values.row(r).to_vec()
    }
}

/// Issues by descending score; exact ties keep canonical order.
pub fn predict_ranking(row: &[f64]) -> Result<PriorityOrder> {
    if row.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric(format!("NaN in score row {row:?}")));
    }
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).expect("no NaN").then(a.cmp(&b)));
    PriorityOrder::new(idx.into_iter().map(Issue).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub k: usize,
    pub order: PriorityOrder,
    pub scores: Vec<f64>,
    /// Opponent utterances actually seen.
    pub opponent_seen: usize,
    pub clamped: bool,
}

/// Source of d-dimensional utterance vectors for the utterance-level
/// encoder. The built-in token encoder is one implementation; a frozen
/// external sentence encoder can be another.
pub trait UtteranceEmbedder {
    fn dim(&self) -> usize;
    fn embed(&self, utterances: &[Utterance]) -> Result<Tensor>;
}

/// Graph nodes of one forward pass.
pub struct ForwardNodes {
    pub pooled: NodeId,
    pub encoded: NodeId,
    pub scores: NodeId,
    /// Per-head attention of the last utterance-level layer.
    pub attention: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct RankerModel {
    config: RankerConfig,
    vocab: Vocab,
    store: ParamStore,
    tok_embed: ParamId,
    pos_embed: ParamId,
    utt_embed: ParamId,
    embed_ln: LayerNorm,
    level1: Vec<TransformerLayer>,
    level2: Vec<TransformerLayer>,
    head1: Linear,
    head2: Linear,
}

impl RankerModel {
    pub fn new(config: RankerConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let d = config.d;
        let tok_embed = store.add_uniform("embed.tok", vocab.len(), d, d, &mut rng);
        let pos_embed = store.add_uniform("embed.pos", config.max_tokens, d, d, &mut rng);
        let utt_embed = store.add_uniform("embed.utt", config.max_utterances, d, d, &mut rng);
        let embed_ln = LayerNorm::new(&mut store, "embed.ln", d);
        let layer = config.layer();
        let level1 = (0..config.level1_layers)
            .map(|i| TransformerLayer::new(&mut store, &format!("l1.{i}"), layer, &mut rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let level2 = (0..config.level2_layers)
            .map(|i| TransformerLayer::new(&mut store, &format!("l2.{i}"), layer, &mut rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let head1 = Linear::new(&mut store, "head.fc1", d, d, &mut rng);
        let head2 = Linear::new(&mut store, "head.fc2", d, config.issues, &mut rng);
        Ok(Self {
            config,
            vocab,
            store,
            tok_embed,
            pos_embed,
            utt_embed,
            embed_ln,
            level1,
            level2,
            head1,
            head2,
        })
    }

    /// Rebuilds a model around saved parameter values.
    pub fn from_parts(config: RankerConfig, vocab: Vocab, params: &ParamStore) -> Result<Self> {
        let mut model = Self::new(config, vocab, 0)?;
        model.store.load_values_from(params)?;
        Ok(model)
    }

    pub fn config(&self) -> &RankerConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Token ids per utterance with the author token first.
    pub fn encode_ids(&self, utterances: &[Utterance]) -> Result<Vec<Vec<usize>>> {
        utterances
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let body = self.vocab.encode(&u.text);
                if body.is_empty() {
                    return Err(Error::Input(format!("utterance {i} has no tokens")));
                }
                let author = match u.author {
                    Author::SelfParty => SELF_TOKEN,
                    Author::Opponent => OPP_TOKEN,
                };
                let mut ids = Vec::with_capacity(body.len() + 1);
                ids.push(author);
                ids.extend(body);
                ids.truncate(self.config.max_tokens);
                Ok(ids)
            })
            .collect()
    }

    /// Token-level encoding of all utterances at once: the packed token
    /// matrix is attended under a block-diagonal mask and mean-pooled per
    /// utterance. Returns the N × d pooled node.
    pub fn level1_forward(&self, g: &mut Graph, encoded: &[Vec<usize>]) -> Result<NodeId> {
        if encoded.is_empty() || encoded.iter().any(Vec::is_empty) {
            return Err(Error::Input("no tokens to encode".into()));
        }
        let lengths: Vec<usize> = encoded.iter().map(Vec::len).collect();
        let total: usize = lengths.iter().sum();
        let ids: Vec<usize> = encoded.iter().flatten().copied().collect();
        let positions: Vec<usize> = lengths.iter().flat_map(|&l| 0..l).collect();
        let tok = g.embed(self.tok_embed, &ids)?;
        let pos = g.embed(self.pos_embed, &positions)?;
        let x = g.add(tok, pos)?;
        let x = self.embed_ln.forward(g, x)?;
        let mut x = g.dropout(x);
        let mask = AttentionMask::block_diagonal(&lengths);
        for layer in &self.level1 {
            x = layer.forward(g, x, &mask)?.out;
        }
        let mut pool = Array2::zeros((encoded.len(), total));
        let mut start = 0;
        for (r, &l) in lengths.iter().enumerate() {
            pool.row_mut(r)
                .slice_mut(ndarray::s![start..start + l])
                .fill(1.0 / l as f64);
            start += l;
        }
        Ok(g.const_matmul(pool, x)?)
    }

    /// Utterance-level encoder and score head over N × d utterance vectors.
    pub fn level2_forward(&self, g: &mut Graph, pooled: NodeId) -> Result<ForwardNodes> {
        let n = g.value(pooled).nrows();
        if n == 0 {
            return Err(Error::Input("dialogue has no utterances".into()));
        }
        let slots: Vec<usize> = (0..n)
            .map(|j| j.min(self.config.max_utterances - 1))
            .collect();
        let utt = g.embed(self.utt_embed, &slots)?;
        let mut x = g.add(pooled, utt)?;
        let mask = AttentionMask::causal(n);
        let mut attention = Vec::new();
        for layer in &self.level2 {
            let out = layer.forward(g, x, &mask)?;
            x = out.out;
            attention = out.attention;
        }
        let h = self.head1.forward(g, x)?;
        let h = g.gelu(h);
        let h = g.dropout(h);
        let logits = self.head2.forward(g, h)?;
        let scores = g.sigmoid(logits);
        Ok(ForwardNodes {
            pooled,
            encoded: x,
            scores,
            attention,
        })
    }

    pub fn forward(&self, g: &mut Graph, utterances: &[Utterance]) -> Result<ForwardNodes> {
        let encoded = self.encode_ids(utterances)?;
        let pooled = self.level1_forward(g, &encoded)?;
        self.level2_forward(g, pooled)
    }

    /// Pooled token-level vector of one utterance.
    pub fn encode_utterance(&self, utterance: &Utterance) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.store);
        let encoded = self.encode_ids(std::slice::from_ref(utterance))?;
        let pooled = self.level1_forward(&mut g, &encoded)?;
        Ok(g.value(pooled).row(0).to_vec())
    }

    /// Utterance-level encoding F of an N × d matrix of utterance vectors.
    pub fn encode_dialogue(&self, vectors: &Tensor) -> Result<Tensor> {
        if vectors.nrows() == 0 {
            return Err(Error::Input("dialogue has no utterances".into()));
        }
        let mut g = Graph::new(&self.store);
        let x = g.input(vectors.clone());
        let nodes = self.level2_forward(&mut g, x)?;
        Ok(g.value(nodes.encoded).clone())
    }

    /// Score head applied row-wise to an N × d encoding.
    pub fn score_issues(&self, encoded: &Tensor) -> Result<ScoreMatrix> {
        let mut g = Graph::new(&self.store);
        let x = g.input(encoded.clone());
        let h = self.head1.forward(&mut g, x)?;
        let h = g.gelu(h);
        let logits = self.head2.forward(&mut g, h)?;
        let s = g.sigmoid(logits);
        ScoreMatrix::new(g.value(s).clone())
    }

    pub fn score_matrix(&self, utterances: &[Utterance]) -> Result<ScoreMatrix> {
        let mut g = Graph::new(&self.store);
        let nodes = self.forward(&mut g, utterances)?;
        ScoreMatrix::new(g.value(nodes.scores).clone())
    }

    /// Scores for utterance vectors from an external embedder.
    pub fn score_from_vectors(&self, vectors: &Tensor) -> Result<ScoreMatrix> {
        if vectors.ncols() != self.config.d {
            return Err(Error::Argument(format!(
                "embedder width {} but d={}",
                vectors.ncols(),
                self.config.d
            )));
        }
        let mut g = Graph::new(&self.store);
        let x = g.input(vectors.clone());
        let nodes = self.level2_forward(&mut g, x)?;
        ScoreMatrix::new(g.value(nodes.scores).clone())
    }

    /// Last-layer utterance-level attention, one N × N matrix per head.
    pub fn level2_attention(&self, utterances: &[Utterance]) -> Result<Vec<Tensor>> {
        let mut g = Graph::new(&self.store);
        let nodes = self.forward(&mut g, utterances)?;
        Ok(nodes
            .attention
            .iter()
            .map(|a| g.value(*a).clone())
            .collect())
    }

    /// Ranking after the k-th opponent utterance, from a forward pass over
    /// that prefix only.
    pub fn predict_at_k(&self, instance: &Instance, k: usize) -> Result<Prediction> {
        let view = partial_view(instance, k)?;
        let scores = self.score_matrix(view.utterances())?;
        let row = scores.row(view.readout_row());
        Ok(Prediction {
            k,
            order: predict_ranking(&row)?,
            scores: row,
            opponent_seen: view.opponent_seen,
            clamped: view.clamped,
        })
    }
}

impl UtteranceEmbedder for RankerModel {
    fn dim(&self) -> usize {
        self.config.d
    }

    fn embed(&self, utterances: &[Utterance]) -> Result<Tensor> {
        let mut g = Graph::new(&self.store);
        let encoded = self.encode_ids(utterances)?;
        let pooled = self.level1_forward(&mut g, &encoded)?;
        Ok(g.value(pooled).clone())
    }
}
