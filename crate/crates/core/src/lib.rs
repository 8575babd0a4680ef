//! Opponent priority ranking from partial negotiation dialogues.
//!
//! A dialogue is seen from one party's perspective; the task is to rank the
//! other party's issues by priority after each of its utterances.

pub mod adapt;
pub mod baselines;
pub mod corpus;
pub mod error;
pub mod issue;
pub mod loss;
pub mod metrics;
pub mod ranker;
pub mod train;

pub use corpus::{partial_view, Author, Instance, PartialDialogue, Source, Utterance};
pub use error::{Error, Result};
pub use issue::{Issue, PriorityOrder};
