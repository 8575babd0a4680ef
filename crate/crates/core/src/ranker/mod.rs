//! The hierarchical ranking model and its tokenizer.

pub mod model;
pub mod tokenize;

pub use model::{
    predict_ranking, ForwardNodes, Prediction, RankerConfig, RankerModel, ScoreMatrix,
    UtteranceEmbedder,
};
pub use tokenize::{tokenize, Vocab};
