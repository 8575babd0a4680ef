//! The three model kinds behind one type.

use oppmodel_neural::{Graph, NodeId, ParamStore};

use crate::baselines::{BowModel, BowVocab, RandomModel};
use crate::corpus::Instance;
use crate::error::{Error, Result};
use crate::metrics::PriorityModel;
use crate::ranker::{RankerModel, Vocab};
use crate::train::config::{ModelKind, TrainConfig};

/// A model whose parameters are fitted by gradient descent on full-dialogue
/// score matrices.
pub trait Trainable: PriorityModel {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    /// N × m score node, one row per utterance of the whole dialogue.
    fn score_node(&self, g: &mut Graph<'_>, instance: &Instance) -> Result<NodeId>;
}

impl Trainable for RankerModel {
    fn params(&self) -> &ParamStore {
        self.store()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self.store_mut()
    }

    fn score_node(&self, g: &mut Graph<'_>, instance: &Instance) -> Result<NodeId> {
        Ok(self.forward(g, &instance.utterances)?.scores)
    }
}

impl Trainable for BowModel {
    fn params(&self) -> &ParamStore {
        self.store()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self.store_mut()
    }

    fn score_node(&self, g: &mut Graph<'_>, instance: &Instance) -> Result<NodeId> {
        self.forward(g, &instance.utterances)
    }
}

#[derive(Clone, Debug)]
pub enum AnyModel {
    Ranker(RankerModel),
    Bow(BowModel),
    Random(RandomModel),
}

impl AnyModel {
    /// Fresh model with vocabularies built from the training texts only.
    pub fn initialise(config: &TrainConfig, train: &[&Instance]) -> Result<Self> {
        let texts = || {
            train
                .iter()
                .flat_map(|i| i.utterances.iter().map(|u| u.text.as_str()))
        };
        match config.model {
            ModelKind::Ranker => {
                let vocab = Vocab::build(texts(), config.ranker.min_freq);
                Ok(AnyModel::Ranker(RankerModel::new(
                    config.ranker.clone(),
                    vocab,
                    config.seed,
                )?))
            }
            ModelKind::Bow => {
                let vocab = BowVocab::build(texts(), config.bow.vocab_size);
                Ok(AnyModel::Bow(BowModel::new(
                    config.bow.clone(),
                    vocab,
                    config.seed,
                )?))
            }
            ModelKind::Random => Ok(AnyModel::Random(RandomModel::new(
                config.seed,
                config.ranker.issues,
            ))),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Ranker(_) => ModelKind::Ranker,
            AnyModel::Bow(_) => ModelKind::Bow,
            AnyModel::Random(_) => ModelKind::Random,
        }
    }

    pub fn as_ranker(&self) -> Result<&RankerModel> {
        match self {
            AnyModel::Ranker(m) => Ok(m),
            other => Err(Error::Argument(format!(
                "{} model has no utterance-level attention",
                other.kind().name()
            ))),
        }
    }

    pub fn params(&self) -> Option<&ParamStore> {
        match self {
            AnyModel::Ranker(m) => Some(m.store()),
            AnyModel::Bow(m) => Some(m.store()),
            AnyModel::Random(_) => None,
        }
    }
}

impl PriorityModel for AnyModel {
    fn name(&self) -> &str {
        match self {
            AnyModel::Ranker(m) => m.name(),
            AnyModel::Bow(m) => m.name(),
            AnyModel::Random(m) => m.name(),
        }
    }

    fn scores_at_k(&self, instance: &Instance, k: usize) -> Result<Vec<f64>> {
        match self {
            AnyModel::Ranker(m) => PriorityModel::scores_at_k(m, instance, k),
            AnyModel::Bow(m) => m.scores_at_k(instance, k),
            AnyModel::Random(m) => m.scores_at_k(instance, k),
        }
    }
}
