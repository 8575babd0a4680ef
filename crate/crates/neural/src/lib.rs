//! A deliberately small reverse-mode differentiation substrate.
//!
//! Everything here operates on dense `f64` matrices ([`Tensor`]). A
//! [`Graph`] records a forward pass over parameters held in a
//! [`ParamStore`]; [`Graph::backward`] then produces [`Gradients`] keyed by
//! [`ParamId`]. Only the operations a hierarchical transformer ranker needs
//! are provided: affine maps, masked multi-head attention, layer norm,
//! GELU/ReLU/sigmoid, dropout, embedding lookup and a pairwise hinge loss.

pub mod adam;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod mask;
pub mod params;

pub use adam::{Adam, AdamConfig};
pub use error::{NeuralError, Result};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use graph::{Gradients, Graph, HingeTerm, NodeId};
pub use layers::{
    transformer_layer_forward, Activation, LayerNorm, Linear, NormLayout, TransformerLayer,
    TransformerLayerConfig,
};
pub use mask::AttentionMask;
pub use params::{ParamId, ParamStore};

/// Dense row-major matrix of doubles.
pub type Tensor = ndarray::Array2<f64>;

/// True when every entry is finite.
pub fn all_finite(t: &Tensor) -> bool {
    t.iter().all(|v| v.is_finite())
}
