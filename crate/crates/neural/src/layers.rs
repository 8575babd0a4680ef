//! Parameterised building blocks recorded onto a [`Graph`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, NeuralError, Result};
use crate::graph::{Graph, NodeId};
use crate::mask::AttentionMask;
use crate::params::{ParamId, ParamStore};
use crate::Tensor;

/// Affine map `x · W + b`, `W` is `in × out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.add_uniform(format!("{name}.w"), input, output, input, rng);
        let b = store.add_uniform(format!("{name}.b"), 1, output, input, rng);
        Self {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let w = g.param(self.w);
        let b = g.param(self.b);
        let xw = g.matmul(x, w)?;
        g.add_row(xw, b)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new(store: &mut ParamStore, name: &str, d: usize) -> Self {
        Self {
            gamma: store.add_constant(format!("{name}.gamma"), 1, d, 1.0),
            beta: store.add_constant(format!("{name}.beta"), 1, d, 0.0),
        }
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let gamma = g.param(self.gamma);
        let beta = g.param(self.beta);
        g.layer_norm(x, gamma, beta, Self::EPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormLayout {
    /// `LN(x + sublayer(x))`, the BERT arrangement.
    #[default]
    Post,
    /// `x + sublayer(LN(x))`.
    Pre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: NodeId) -> NodeId {
        match self {
            Activation::Gelu => g.gelu(x),
            Activation::Relu => g.relu(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerLayerConfig {
    pub d: usize,
    pub heads: usize,
    pub ff_hidden: usize,
    pub norm: NormLayout,
}

impl TransformerLayerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.ff_hidden == 0 {
            return Err(NeuralError::Argument(
                "transformer dimensions must be positive".into(),
            ));
        }
        if self.d % self.heads != 0 {
            return Err(NeuralError::Argument(format!(
                "d={} is not divisible by {} heads",
                self.d, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Head {
    q: Linear,
    k: Linear,
    v: Linear,
    /// `d_head × d` slice of the output projection.
    o: ParamId,
}

/// Multi-head self-attention followed by a position-wise feed-forward block.
#[derive(Debug, Clone)]
pub struct TransformerLayer {
    config: TransformerLayerConfig,
    heads: Vec<Head>,
    out_bias: ParamId,
    ln_attn: LayerNorm,
    ln_ff: LayerNorm,
    ff1: Linear,
    ff2: Linear,
}

/// Output of one layer, plus per-head attention nodes when requested.
pub struct LayerOutput {
    pub out: NodeId,
    pub attention: Vec<NodeId>,
}

impl TransformerLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        config: TransformerLayerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let d = config.d;
        let dh = d / config.heads;
        let heads = (0..config.heads)
            .map(|h| Head {
                q: Linear::new(store, &format!("{name}.h{h}.q"), d, dh, rng),
                k: Linear::new(store, &format!("{name}.h{h}.k"), d, dh, rng),
                v: Linear::new(store, &format!("{name}.h{h}.v"), d, dh, rng),
                o: store.add_uniform(format!("{name}.h{h}.o"), dh, d, d, rng),
            })
            .collect();
        let out_bias = store.add_uniform(format!("{name}.o.b"), 1, d, d, rng);
        let ln_attn = LayerNorm::new(store, &format!("{name}.ln_attn"), d);
        let ln_ff = LayerNorm::new(store, &format!("{name}.ln_ff"), d);
        let ff1 = Linear::new(store, &format!("{name}.ff1"), d, config.ff_hidden, rng);
        let ff2 = Linear::new(store, &format!("{name}.ff2"), config.ff_hidden, d, rng);
        Ok(Self {
            config,
            heads,
            out_bias,
            ln_attn,
            ln_ff,
            ff1,
            ff2,
        })
    }

    pub fn config(&self) -> &TransformerLayerConfig {
        &self.config
    }

    fn attention(
        &self,
        g: &mut Graph,
        x: NodeId,
        mask: &AttentionMask,
        weights: &mut Vec<NodeId>,
    ) -> Result<NodeId> {
        let dh = self.config.d / self.config.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut acc: Option<NodeId> = None;
        for head in &self.heads {
            let q = head.q.forward(g, x)?;
            let k = head.k.forward(g, x)?;
            let v = head.v.forward(g, x)?;
            let scores = g.matmul_t(q, k)?;
            let scores = g.scale(scores, scale);
            let a = g.masked_softmax(scores, mask)?;
            weights.push(a);
            let ctx = g.matmul(a, v)?;
            let o = g.param(head.o);
            let proj = g.matmul(ctx, o)?;
            acc = Some(match acc {
                None => proj,
                Some(prev) => g.add(prev, proj)?,
            });
        }
        let b = g.param(self.out_bias);
        g.add_row(acc.expect("at least one head"), b)
    }

    fn feed_forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let h = self.ff1.forward(g, x)?;
        let h = g.gelu(h);
        self.ff2.forward(g, h)
    }

    pub fn forward(&self, g: &mut Graph, x: NodeId, mask: &AttentionMask) -> Result<LayerOutput> {
        let (rows, cols) = g.value(x).dim();
        if cols != self.config.d {
            return Err(dim_err(
                "transformer_layer",
                format!("input width {cols} but d={}", self.config.d),
            ));
        }
        if rows != mask.size() || mask.size() != mask.keys() {
            return Err(dim_err(
                "transformer_layer",
                format!("{rows} rows against a {}x{} mask", mask.size(), mask.keys()),
            ));
        }
        let mut attention = Vec::with_capacity(self.heads.len());
        let out = match self.config.norm {
            NormLayout::Post => {
                let a = self.attention(g, x, mask, &mut attention)?;
                let a = g.dropout(a);
                let h = g.add(x, a)?;
                let h = self.ln_attn.forward(g, h)?;
                let f = self.feed_forward(g, h)?;
                let f = g.dropout(f);
                let o = g.add(h, f)?;
                self.ln_ff.forward(g, o)?
            }
            NormLayout::Pre => {
                let n = self.ln_attn.forward(g, x)?;
                let a = self.attention(g, n, mask, &mut attention)?;
                let a = g.dropout(a);
                let h = g.add(x, a)?;
                let n = self.ln_ff.forward(g, h)?;
                let f = self.feed_forward(g, n)?;
                let f = g.dropout(f);
                g.add(h, f)?
            }
        };
        Ok(LayerOutput { out, attention })
    }
}

/// Evaluation-mode forward of a single layer on a plain matrix.
pub fn transformer_layer_forward(
    store: &ParamStore,
    layer: &TransformerLayer,
    x: &Tensor,
    mask: &AttentionMask,
) -> Result<Tensor> {
    let mut g = Graph::new(store);
    let xi = g.input(x.clone());
    let out = layer.forward(&mut g, xi, mask)?.out;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckOptions};
    use ndarray::{s, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layer(norm: NormLayout, seed: u64) -> (ParamStore, TransformerLayer) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = TransformerLayerConfig {
            d: 8,
            heads: 2,
            ff_hidden: 12,
            norm,
        };
        let l = TransformerLayer::new(&mut store, "t", cfg, &mut rng).unwrap();
        (store, l)
    }

    fn input(rows: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, 8), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn single_row_output_ignores_mask_choice() {
        let (store, l) = layer(NormLayout::Post, 1);
        let x = input(1, 2);
        let a = transformer_layer_forward(&store, &l, &x, &AttentionMask::full(1)).unwrap();
        let b = transformer_layer_forward(&store, &l, &x, &AttentionMask::causal(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn causal_rows_ignore_future_rows_bitwise() {
        for norm in [NormLayout::Post, NormLayout::Pre] {
            let (store, l) = layer(norm, 3);
            let x = input(5, 4);
            let mask = AttentionMask::causal(5);
            let base = transformer_layer_forward(&store, &l, &x, &mask).unwrap();
            for j in 1..5 {
                let mut z = x.clone();
                z.slice_mut(s![j.., ..]).fill(0.0);
                let out = transformer_layer_forward(&store, &l, &z, &mask).unwrap();
                for i in 0..j {
                    let a: Vec<u64> = base.row(i).iter().map(|v| v.to_bits()).collect();
                    let b: Vec<u64> = out.row(i).iter().map(|v| v.to_bits()).collect();
                    assert_eq!(a, b, "row {i} changed when rows >= {j} were zeroed");
                }
            }
        }
    }

    #[test]
    fn masked_row_matches_truncated_unmasked_forward() {
        let (store, l) = layer(NormLayout::Post, 5);
        let x = input(6, 6);
        let full = transformer_layer_forward(&store, &l, &x, &AttentionMask::causal(6)).unwrap();
        for i in 0..6 {
            let prefix = x.slice(s![..=i, ..]).to_owned();
            let t = transformer_layer_forward(&store, &l, &prefix, &AttentionMask::full(i + 1))
                .unwrap();
            for c in 0..8 {
                assert!((full[[i, c]] - t[[i, c]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let (store, l) = layer(NormLayout::Post, 7);
        let x = input(3, 1);
        let err = transformer_layer_forward(&store, &l, &x, &AttentionMask::full(4));
        assert!(matches!(err, Err(NeuralError::Dimension { .. })));
    }

    #[test]
    fn heads_must_divide_width() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = TransformerLayerConfig {
            d: 10,
            heads: 4,
            ff_hidden: 8,
            norm: NormLayout::Post,
        };
        assert!(TransformerLayer::new(&mut store, "t", cfg, &mut rng).is_err());
    }

    #[test]
    fn layer_gradients_match_central_differences() {
        for norm in [NormLayout::Post, NormLayout::Pre] {
            let (store, l) = layer(norm, 8);
            let x = input(4, 9);
            let mask = AttentionMask::causal(4);
            let probe = input(4, 10);
            fn build<'a>(
                s: &'a ParamStore,
                l: &TransformerLayer,
                x: &Tensor,
                probe: &Tensor,
                mask: &AttentionMask,
            ) -> Result<(Graph<'a>, NodeId)> {
                let mut g = Graph::new(s);
                let xi = g.input(x.clone());
                let out = l.forward(&mut g, xi, mask)?.out;
                let p = g.input(probe.clone());
                let p = g.matmul_t(out, p)?;
                let p = g.sigmoid(p);
                let loss = g.sum(p);
                Ok((g, loss))
            }
            let (g, loss) = build(&store, &l, &x, &probe, &mask).unwrap();
            let grads = g.backward(loss).unwrap();
            let report = grad_check(
                &store,
                |s| {
                    let (g, l) = build(s, &l, &x, &probe, &mask)?;
                    Ok(g.value(l)[[0, 0]])
                },
                &grads,
                &GradCheckOptions {
                    samples: 300,
                    ..GradCheckOptions::default()
                },
            )
            .unwrap();
            assert!(report.max_relative_error < 1e-5, "{norm:?}: {report:?}");
        }
    }
}
