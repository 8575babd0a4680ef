use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::BowConfig;
use crate::corpus::Source;
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::ranker::RankerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ranker,
    Bow,
    Random,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ranker" => Ok(ModelKind::Ranker),
            "bow" => Ok(ModelKind::Bow),
            "random" => Ok(ModelKind::Random),
            other => Err(Error::Argument(format!("unknown model {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ranker => "ranker",
            ModelKind::Bow => "bow",
            ModelKind::Random => "random",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Defaults by model kind when unset, see [`TrainConfig::learning_rate`].
    pub lr: Option<f64>,
    pub epochs: usize,
    pub batch: usize,
    pub dropout: f64,
    #[serde(flatten)]
    pub loss: LossConfig,
    /// Sources admitted to training.
    pub mixture: Vec<Source>,
    pub seed: u64,
    pub precision: Precision,
    pub ranker: RankerConfig,
    pub bow: BowConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Ranker,
            lr: None,
            epochs: 20,
            batch: 25,
            dropout: 0.1,
            loss: LossConfig::default(),
            mixture: vec![Source::Cd],
            seed: 0,
            precision: Precision::F64,
            ranker: RankerConfig::default(),
            bow: BowConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings for training the ranker from scratch on a workstation: the
    /// encoder has no pretrained weights, so it needs a larger step size.
    pub fn desk(model: ModelKind) -> Self {
        Self {
            model,
            lr: match model {
                ModelKind::Ranker => Some(5e-4),
                _ => None,
            },
            epochs: 12,
            ..Self::default()
        }
    }

    /// Step size: explicit `lr`, else 2e-5 for the ranker and 2e-3 for BoW.
    pub fn learning_rate(&self) -> f64 {
        self.lr.unwrap_or(match self.model {
            ModelKind::Ranker => 2e-5,
            ModelKind::Bow => 2e-3,
            ModelKind::Random => 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.model != ModelKind::Random {
            let lr = self.learning_rate();
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Argument(format!(
                    "learning rate {lr} must be positive"
                )));
            }
        }
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Argument("epochs and batch must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.mixture.is_empty() {
            return Err(Error::Argument("training mixture is empty".into()));
        }
        if self.model == ModelKind::Ranker {
            self.ranker.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}

/// Mixes seed components into one 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
