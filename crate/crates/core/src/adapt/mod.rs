//! Data adaptations: template dialogues from argument metadata, issue
//! remapping of DealOrNoDeal-style records, and utterance categories.

pub mod ca;
pub mod dnd;
pub mod offer;

pub use ca::{argument_sets, build_ca_instances, ArgumentSet, CaTemplate};
pub use dnd::{filter_dnd, remap_dnd, IssueMapping};
pub use offer::{detect_offer, tag_utterance_category, Category, OFFER_PHRASES};
