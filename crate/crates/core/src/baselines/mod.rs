//! Random and bag-of-words baselines.

pub mod bow;
pub mod random;
pub mod stopwords;

pub use bow::{bow_features, bow_prefix_matrix, BowConfig, BowModel, BowVocab};
pub use random::{random_rank, RandomModel};
