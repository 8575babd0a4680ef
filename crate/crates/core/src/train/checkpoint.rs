//! Self-describing checkpoint files.
//!
//! A checkpoint holds the run configuration and its hash, the selected
//! epoch with its tuning score, the vocabulary and all parameter values.
//! Floats round-trip exactly, so a reloaded model predicts bit-identically.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use oppmodel_neural::params::ParamsFile;
use oppmodel_neural::ParamStore;

use crate::baselines::{BowModel, BowVocab, RandomModel};
use crate::error::{Error, Result};
use crate::ranker::{RankerModel, Vocab};
use crate::train::config::TrainConfig;
use crate::train::model::AnyModel;

pub const CHECKPOINT_FORMAT: &str = "oppmodel-checkpoint";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelState {
    Ranker { vocab: Vocab, params: ParamsFile },
    Bow { vocab: BowVocab, params: ParamsFile },
    Random { seed: u64, issues: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: TrainConfig,
    pub config_hash: String,
    pub epoch: usize,
    pub tune_ema_at_5: Option<f64>,
    pub state: ModelState,
}

impl Checkpoint {
    pub fn new(
        config: &TrainConfig,
        model: &AnyModel,
        epoch: usize,
        tune_ema: Option<f64>,
    ) -> Self {
        let state = match model {
            AnyModel::Ranker(m) => ModelState::Ranker {
                vocab: m.vocab().clone(),
                params: m.store().to_file_repr(),
            },
            AnyModel::Bow(m) => ModelState::Bow {
                vocab: m.vocab().clone(),
                params: m.store().to_file_repr(),
            },
            AnyModel::Random(m) => ModelState::Random {
                seed: m.seed,
                issues: m.issues,
            },
        };
        Self {
            format: CHECKPOINT_FORMAT.into(),
            config: config.clone(),
            config_hash: config.hash(),
            epoch,
            tune_ema_at_5: tune_ema,
            state,
        }
    }

    /// Rebuilds the model and checks the stored configuration hash.
    pub fn model(&self) -> Result<AnyModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!(
                "unknown checkpoint format {:?}",
                self.format
            )));
        }
        if self.config.hash() != self.config_hash {
            return Err(Error::Validation(
                "checkpoint configuration does not match its hash".into(),
            ));
        }
        Ok(match &self.state {
            ModelState::Ranker { vocab, params } => AnyModel::Ranker(RankerModel::from_parts(
                self.config.ranker.clone(),
                vocab.clone(),
                &ParamStore::from_file_repr(params.clone())?,
            )?),
            ModelState::Bow { vocab, params } => AnyModel::Bow(BowModel::from_parts(
                self.config.bow.clone(),
                vocab.clone(),
                &ParamStore::from_file_repr(params.clone())?,
            )?),
            ModelState::Random { seed, issues } => {
                AnyModel::Random(RandomModel::new(*seed, *issues))
            }
        })
    }

    /// SHA-256 of the serialised checkpoint.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(self).expect("checkpoint serialises"),
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Line {
            path: path.to_path_buf(),
            line: e.line(),
            detail: e.to_string(),
        })
    }
}
