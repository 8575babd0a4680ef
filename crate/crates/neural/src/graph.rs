//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] borrows a [`ParamStore`] immutably, so any number of graphs
//! may be built concurrently against the same frozen parameters. Nodes are
//! appended in evaluation order and [`Graph::backward`] walks them in
//! reverse.

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, NeuralError, Result};
use crate::mask::AttentionMask;
use crate::params::{ParamId, ParamStore};
use crate::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// One hinge term `weight * max(0, margin - (s[row, hi] - s[row, lo]))`.
///
/// `hi` is the column that should score higher.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HingeTerm {
    pub row: usize,
    pub hi: usize,
    pub lo: usize,
    pub weight: f64,
}

enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    MatMulTransB(NodeId, NodeId),
    ConstMatMul(Tensor, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    MaskedSoftmax(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Gelu(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    Dropout(NodeId, Tensor),
    Embed(ParamId, Vec<usize>),
    SelectRows(NodeId, Vec<usize>),
    Sum(NodeId),
    PairHinge {
        scores: NodeId,
        terms: Vec<HingeTerm>,
        margin: f64,
    },
}

struct Node {
    op: Op,
    value: Option<Tensor>,
    requires_grad: bool,
}

struct DropoutState {
    rate: f64,
    rng: ChaCha8Rng,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    dropout: Option<DropoutState>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<'s> Graph<'s> {
    /// Evaluation mode: dropout is the identity.
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            dropout: None,
        }
    }

    /// Training mode with inverted dropout at `rate`, masks drawn from `seed`.
    pub fn training(store: &'s ParamStore, rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NeuralError::Argument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        Ok(Self {
            store,
            nodes: Vec::new(),
            dropout: Some(DropoutState {
                rate,
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
        })
    }

    pub fn is_training(&self) -> bool {
        self.dropout.is_some()
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (Op::Param(p), _) => self.store.get(*p),
            (_, Some(v)) => v,
            (_, None) => unreachable!("non-parameter node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Option<Tensor>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, Some(value), false)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.push(Op::Param(id), None, true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(dim_err(
                "matmul",
                format!("{:?} x {:?}", av.dim(), bv.dim()),
            ));
        }
        let out = av.dot(bv);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), Some(out), rg))
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.ncols() {
            return Err(dim_err(
                "matmul_t",
                format!("{:?} x {:?}ᵀ", av.dim(), bv.dim()),
            ));
        }
        let out = av.dot(&bv.t());
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMulTransB(a, b), Some(out), rg))
    }

    /// `c · b` for a constant left factor (pooling, averaging).
    pub fn const_matmul(&mut self, c: Tensor, b: NodeId) -> Result<NodeId> {
        let bv = self.value(b);
        if c.ncols() != bv.nrows() {
            return Err(dim_err(
                "const_matmul",
                format!("{:?} x {:?}", c.dim(), bv.dim()),
            ));
        }
        let out = c.dot(bv);
        let rg = self.rg(b);
        Ok(self.push(Op::ConstMatMul(c, b), Some(out), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.dim() != bv.dim() {
            return Err(dim_err("add", format!("{:?} + {:?}", av.dim(), bv.dim())));
        }
        let out = av + bv;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), Some(out), rg))
    }

    /// Adds a 1 × d row to every row of an n × d matrix.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.nrows() != 1 || rv.ncols() != av.ncols() {
            return Err(dim_err(
                "add_row",
                format!("{:?} + {:?}", av.dim(), rv.dim()),
            ));
        }
        let out = av + rv;
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Op::AddRow(a, row), Some(out), rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let out = self.value(a) * factor;
        let rg = self.rg(a);
        self.push(Op::Scale(a, factor), Some(out), rg)
    }

    /// Row-wise softmax over allowed keys; disallowed keys get exactly 0.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &AttentionMask) -> Result<NodeId> {
        let av = self.value(a);
        if av.nrows() != mask.size() || av.ncols() != mask.keys() {
            return Err(dim_err(
                "masked_softmax",
                format!(
                    "scores {:?} vs mask {}x{}",
                    av.dim(),
                    mask.size(),
                    mask.keys()
                ),
            ));
        }
        let mut out = Array2::zeros(av.dim());
        for (i, row) in av.rows().into_iter().enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (j, &v) in row.iter().enumerate() {
                if mask.is_allowed(i, j) && v > max {
                    max = v;
                }
            }
            let mut total = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if mask.is_allowed(i, j) {
                    let e = (v - max).exp();
                    out[[i, j]] = e;
                    total += e;
                }
            }
            out.row_mut(i).mapv_inplace(|e| e / total);
        }
        let rg = self.rg(a);
        Ok(self.push(Op::MaskedSoftmax(a), Some(out), rg))
    }

    /// Row-wise layer normalisation with learned 1 × d gain and bias.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<NodeId> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let d = xv.ncols();
        if gv.dim() != (1, d) || bv.dim() != (1, d) {
            return Err(dim_err(
                "layer_norm",
                format!(
                    "x {:?}, gamma {:?}, beta {:?}",
                    xv.dim(),
                    gv.dim(),
                    bv.dim()
                ),
            ));
        }
        let mut xhat = Array2::zeros(xv.dim());
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for (i, row) in xv.rows().into_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, v) in row.iter().enumerate() {
                xhat[[i, j]] = (v - mean) * is;
            }
        }
        let out = &xhat * gv + bv;
        let rg = self.rg(x) || self.rg(gamma) || self.rg(beta);
        Ok(self.push(
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            Some(out),
            rg,
        ))
    }

    /// tanh approximation of GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let out = self
            .value(a)
            .mapv(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()));
        let rg = self.rg(a);
        self.push(Op::Gelu(a), Some(out), rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).mapv(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(Op::Relu(a), Some(out), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).mapv(sigmoid);
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a), Some(out), rg)
    }

    /// Inverted dropout in training mode, identity otherwise.
    pub fn dropout(&mut self, a: NodeId) -> NodeId {
        let dim = self.value(a).dim();
        let Some(state) = self.dropout.as_mut() else {
            return a;
        };
        if state.rate == 0.0 {
            return a;
        }
        let rate = state.rate;
        let keep = 1.0 - rate;
        let rng = &mut state.rng;
        let mask = Array2::from_shape_simple_fn(dim, || {
            if rng.gen::<f64>() < rate {
                0.0
            } else {
                1.0 / keep
            }
        });
        let out = self.value(a) * &mask;
        let rg = self.rg(a);
        self.push(Op::Dropout(a, mask), Some(out), rg)
    }

    /// Gathers rows of an embedding table.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Result<NodeId> {
        let tv = self.store.get(table);
        if let Some(&bad) = ids.iter().find(|&&i| i >= tv.nrows()) {
            return Err(dim_err(
                "embed",
                format!("id {bad} outside table of {} rows", tv.nrows()),
            ));
        }
        let out = tv.select(Axis(0), ids);
        Ok(self.push(Op::Embed(table, ids.to_vec()), Some(out), true))
    }

    pub fn select_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let av = self.value(a);
        if let Some(&bad) = rows.iter().find(|&&r| r >= av.nrows()) {
            return Err(dim_err(
                "select_rows",
                format!("row {bad} outside {} rows", av.nrows()),
            ));
        }
        let out = av.select(Axis(0), rows);
        let rg = self.rg(a);
        Ok(self.push(Op::SelectRows(a, rows.to_vec()), Some(out), rg))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let out = Array2::from_elem((1, 1), self.value(a).sum());
        let rg = self.rg(a);
        self.push(Op::Sum(a), Some(out), rg)
    }

    /// Weighted sum of pairwise hinge terms over a score matrix; 1 × 1.
    pub fn pair_hinge(
        &mut self,
        scores: NodeId,
        terms: &[HingeTerm],
        margin: f64,
    ) -> Result<NodeId> {
        let sv = self.value(scores);
        let mut total = 0.0;
        for t in terms {
            if t.row >= sv.nrows() || t.hi >= sv.ncols() || t.lo >= sv.ncols() {
                return Err(dim_err(
                    "pair_hinge",
                    format!("term {t:?} outside scores {:?}", sv.dim()),
                ));
            }
            total += t.weight * hinge(sv[[t.row, t.hi]], sv[[t.row, t.lo]], margin);
        }
        let rg = self.rg(scores);
        Ok(self.push(
            Op::PairHinge {
                scores,
                terms: terms.to_vec(),
                margin,
            },
            Some(Array2::from_elem((1, 1), total)),
            rg,
        ))
    }

    /// Reverse sweep from a 1 × 1 node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(NeuralError::State(
                "backward called before any forward operation".into(),
            ));
        }
        if loss.0 >= self.nodes.len() {
            return Err(NeuralError::State(format!(
                "node {} does not belong to this graph",
                loss.0
            )));
        }
        if self.value(loss).dim() != (1, 1) {
            return Err(NeuralError::State(format!(
                "backward needs a scalar node, got {:?}",
                self.value(loss).dim()
            )));
        }

        let mut param_grads = Gradients::empty(self.store.len());
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(p) => param_grads.add(*p, g),
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        acc(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        acc(&mut grads, *b, gb);
                    }
                }
                Op::MatMulTransB(a, b) => {
                    if self.rg(*a) {
                        let ga = g.dot(self.value(*b));
                        acc(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = g.t().dot(self.value(*a));
                        acc(&mut grads, *b, gb);
                    }
                }
                Op::ConstMatMul(c, b) => {
                    let gb = c.t().dot(&g);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    if self.rg(*b) {
                        acc(&mut grads, *b, g.clone());
                    }
                    if self.rg(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.rg(*row) {
                        let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(&mut grads, *row, gr);
                    }
                    if self.rg(*a) {
                        acc(&mut grads, *a, g);
                    }
                }
                Op::Scale(a, f) => acc(&mut grads, *a, g * *f),
                Op::MaskedSoftmax(a) => {
                    let y = node.value.as_ref().expect("softmax value");
                    let mut gs = &g * y;
                    for (i, mut row) in gs.rows_mut().into_iter().enumerate() {
                        let dot: f64 = row.sum();
                        for (j, v) in row.iter_mut().enumerate() {
                            *v -= y[[i, j]] * dot;
                        }
                    }
                    acc(&mut grads, *a, gs);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    if self.rg(*beta) {
                        acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if self.rg(*gamma) {
                        let gg = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(&mut grads, *gamma, gg);
                    }
                    if self.rg(*x) {
                        let gv = self.value(*gamma);
                        let dxhat = &g * gv;
                        let d = dxhat.ncols() as f64;
                        let mut gx = Array2::zeros(dxhat.dim());
                        for i in 0..dxhat.nrows() {
                            let dr = dxhat.row(i);
                            let xr = xhat.row(i);
                            let mean_d = dr.sum() / d;
                            let mean_dx =
                                dr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
                            for j in 0..dxhat.ncols() {
                                gx[[i, j]] = inv_std[i] * (dr[j] - mean_d - xr[j] * mean_dx);
                            }
                        }
                        acc(&mut grads, *x, gx);
                    }
                }
                Op::Gelu(a) => {
                    let xv = self.value(*a);
                    let mut gx = g;
                    gx.zip_mut_with(xv, |gi, &x| {
                        let u = GELU_C * (x + GELU_A * x * x * x);
                        let t = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                        *gi *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
                    });
                    acc(&mut grads, *a, gx);
                }
                Op::Relu(a) => {
                    let xv = self.value(*a);
                    let mut gx = g;
                    gx.zip_mut_with(xv, |gi, &x| {
                        if x <= 0.0 {
                            *gi = 0.0;
                        }
                    });
                    acc(&mut grads, *a, gx);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().expect("sigmoid value");
                    let mut gx = g;
                    gx.zip_mut_with(y, |gi, &s| *gi *= s * (1.0 - s));
                    acc(&mut grads, *a, gx);
                }
                Op::Dropout(a, mask) => acc(&mut grads, *a, g * mask),
                Op::Embed(table, ids) => {
                    let rows = self.store.get(*table).nrows();
                    let mut gt = Array2::zeros((rows, g.ncols()));
                    for (r, &id) in ids.iter().enumerate() {
                        let mut dst = gt.row_mut(id);
                        dst += &g.row(r);
                    }
                    param_grads.add(*table, gt);
                }
                Op::SelectRows(a, rows) => {
                    let mut ga = Array2::zeros(self.value(*a).dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = ga.row_mut(src);
                        dst += &g.row(r);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let seed = g[[0, 0]];
                    let ga = Array2::from_elem(self.value(*a).dim(), seed);
                    acc(&mut grads, *a, ga);
                }
                Op::PairHinge {
                    scores,
                    terms,
                    margin,
                } => {
                    let seed = g[[0, 0]];
                    let sv = self.value(*scores);
                    let mut gs = Array2::zeros(sv.dim());
                    for t in terms {
                        let arg = margin - (sv[[t.row, t.hi]] - sv[[t.row, t.lo]]);
                        if arg > 0.0 {
                            gs[[t.row, t.hi]] -= seed * t.weight;
                            gs[[t.row, t.lo]] += seed * t.weight;
                        }
                    }
                    acc(&mut grads, *scores, gs);
                }
            }
        }
        Ok(param_grads)
    }

    /// Copy of rows `start..end` of a node value, for inspection.
    pub fn rows_of(&self, id: NodeId, start: usize, end: usize) -> Tensor {
        self.value(id).slice(s![start..end, ..]).to_owned()
    }
}

fn acc(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn hinge(hi: f64, lo: f64, margin: f64) -> f64 {
    (margin - (hi - lo)).max(0.0)
}

/// Per-parameter gradients; parameters untouched by a graph have no entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn empty(params: usize) -> Self {
        Self {
            grads: (0..params).map(|_| None).collect(),
        }
    }

    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store
                .entries()
                .iter()
                .map(|e| Some(Array2::zeros(e.value.dim())))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn add(&mut self, id: ParamId, g: Tensor) {
        match &mut self.grads[id.0] {
            Some(existing) => *existing += &g,
            slot @ None => *slot = Some(g),
        }
    }

    /// Adds another gradient set in place.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => *m += t,
                    None => *mine = Some(t.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.mapv_inplace(|v| v * factor);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }

    /// Scalar value of coordinate `(row, col)` of a parameter's gradient; 0 when absent.
    pub fn coordinate(&self, id: ParamId, row: usize, col: usize) -> f64 {
        self.get(id).map(|g| g[[row, col]]).unwrap_or(0.0)
    }
}
