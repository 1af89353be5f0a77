//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Graph`] is an append-only arena of nodes. Every op records its parents
//! and a backward rule; because parents always precede their children in the
//! arena, walking the arena backwards from the root is a valid reverse
//! topological order and the graph is acyclic by construction.
//!
//! Weights use the row convention: activations are `rows x features` and a
//! linear map is `x · W` with `W: d_in x d_out`.

use rand::Rng as _;

use super::tensor::{matmul_nt, matmul_tn, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Handle to a node inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Arguments handed to a backward rule.
pub struct BackwardCtx<'a> {
    pub inputs: &'a [&'a Tensor],
    pub output: &'a Tensor,
    pub grad_output: &'a Tensor,
    /// Which inputs want a gradient; rules may skip the others.
    pub needs_grad: &'a [bool],
}

/// Maps the output gradient to one optional gradient per input.
pub type BackwardFn = Box<dyn Fn(&BackwardCtx<'_>) -> Vec<Option<Tensor>>>;

struct Node {
    value: Tensor,
    parents: Vec<NodeId>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(
        &mut self,
        value: Tensor,
        parents: Vec<NodeId>,
        backward: Option<BackwardFn>,
        requires_grad: bool,
    ) -> NodeId {
        self.nodes.push(Node {
            value,
            parents,
            backward,
            requires_grad,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn op(&mut self, value: Tensor, parents: Vec<NodeId>, backward: BackwardFn) -> NodeId {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        if requires_grad {
            self.push(value, parents, Some(backward), true)
        } else {
            self.push(value, Vec::new(), None, false)
        }
    }

    /// Differentiable leaf (a parameter or an input under test).
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push(value, Vec::new(), None, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Vec::new(), None, false)
    }

    /// Copy of `id`'s value cut off from the gradient flow.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let value = self.nodes[id.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Accumulated gradient of `id`; `None` means all zeros.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// Accumulated gradient of `id`, materialized (zeros if nothing flowed in).
    pub fn grad_or_zeros(&self, id: NodeId) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.nodes[id.0].value.shape();
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Op with a caller-supplied backward rule.
    pub fn custom(&mut self, parents: &[NodeId], value: Tensor, backward: BackwardFn) -> NodeId {
        self.op(value, parents.to_vec(), backward)
    }

    /// Accumulates `d(root)/d(node)` into every node reachable from `root`.
    ///
    /// Calling this twice without [`Graph::zero_grad`] adds the gradients
    /// twice.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let shape = self.nodes[root.0].value.shape();
        if shape != (1, 1) {
            return Err(Error::Usage(format!(
                "backward needs a scalar root, got shape {shape:?}"
            )));
        }
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let mut local: Vec<Option<Tensor>> = (0..=root.0).map(|_| None).collect();
        local[root.0] = Some(Tensor::ones(1, 1));

        for i in (0..=root.0).rev() {
            let Some(g) = local[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            if let Some(rule) = &node.backward {
                let inputs: Vec<&Tensor> =
                    node.parents.iter().map(|p| &nodes[p.0].value).collect();
                let needs: Vec<bool> = node
                    .parents
                    .iter()
                    .map(|p| nodes[p.0].requires_grad)
                    .collect();
                let contributions = rule(&BackwardCtx {
                    inputs: &inputs,
                    output: &node.value,
                    grad_output: &g,
                    needs_grad: &needs,
                });
                for (p, contribution) in node.parents.iter().zip(contributions) {
                    if let (Some(c), true) = (contribution, nodes[p.0].requires_grad) {
                        accumulate(&mut local[p.0], c);
                    }
                }
            }
            accumulate(&mut grads[i], g);
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Linear algebra

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.op(
            value,
            vec![a, b],
            Box::new(|ctx| {
                let (a, b, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad_output);
                let ga = ctx.needs_grad[0].then(|| {
                    let mut out = Tensor::zeros(a.rows(), a.cols());
                    matmul_nt(g, b, &mut out);
                    out
                });
                let gb = ctx.needs_grad[1].then(|| {
                    let mut out = Tensor::zeros(b.rows(), b.cols());
                    matmul_tn(a, g, &mut out);
                    out
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape {
                op: "add",
                left: va.shape(),
                right: vb.shape(),
            });
        }
        let value = va.zip_map(vb, |x, y| x + y);
        Ok(self.op(
            value,
            vec![a, b],
            Box::new(|ctx| {
                vec![
                    Some(ctx.grad_output.clone()),
                    Some(ctx.grad_output.clone()),
                ]
            }),
        ))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (vx, vb) = (self.value(x), self.value(bias));
        if vb.rows() != 1 || vb.cols() != vx.cols() {
            return Err(Error::Shape {
                op: "add_row",
                left: vx.shape(),
                right: vb.shape(),
            });
        }
        let mut value = vx.clone();
        for r in 0..value.rows() {
            for (o, b) in value.row_mut(r).iter_mut().zip(vb.data()) {
                *o += b;
            }
        }
        Ok(self.op(
            value,
            vec![x, bias],
            Box::new(|ctx| {
                let g = ctx.grad_output;
                let gb = ctx.needs_grad[1].then(|| column_sums(g));
                vec![Some(g.clone()), gb]
            }),
        ))
    }

    /// `x · w + b` with `b: 1 x d_out`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::Shape {
                op: "mul",
                left: va.shape(),
                right: vb.shape(),
            });
        }
        let value = va.zip_map(vb, |x, y| x * y);
        Ok(self.op(
            value,
            vec![a, b],
            Box::new(|ctx| {
                let g = ctx.grad_output;
                let ga = ctx.needs_grad[0].then(|| g.zip_map(ctx.inputs[1], |g, y| g * y));
                let gb = ctx.needs_grad[1].then(|| g.zip_map(ctx.inputs[0], |g, x| g * x));
                vec![ga, gb]
            }),
        ))
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> NodeId {
        let value = self.value(x).scale(s);
        self.op(
            value,
            vec![x],
            Box::new(move |ctx| vec![Some(ctx.grad_output.scale(s))]),
        )
    }

    /// Sum of all elements, as a 1x1 node.
    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(x).sum());
        self.op(
            value,
            vec![x],
            Box::new(|ctx| {
                let (r, c) = ctx.inputs[0].shape();
                vec![Some(Tensor::full(r, c, ctx.grad_output.item()))]
            }),
        )
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.value(x).numel() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    // ------------------------------------------------------------------
    // Activations

    /// Tanh-approximated GELU: `0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))`.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(gelu_scalar);
        self.op(
            value,
            vec![x],
            Box::new(|ctx| {
                vec![Some(
                    ctx.inputs[0].zip_map(ctx.grad_output, |x, g| g * gelu_derivative(x)),
                )]
            }),
        )
    }

    /// `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v.max(0.0));
        self.op(
            value,
            vec![x],
            Box::new(|ctx| {
                vec![Some(ctx.inputs[0].zip_map(ctx.grad_output, |x, g| {
                    if x > 0.0 {
                        g
                    } else {
                        0.0
                    }
                }))]
            }),
        )
    }

    pub fn softmax_rows(&mut self, x: NodeId, temperature: f64) -> Result<NodeId> {
        check_temperature(temperature)?;
        let value = softmax_rows(self.value(x), temperature);
        Ok(self.op(
            value,
            vec![x],
            Box::new(move |ctx| {
                let (y, g) = (ctx.output, ctx.grad_output);
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((d, &yv), &gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *d = yv * (gv - inner) / temperature;
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    pub fn log_softmax_rows(&mut self, x: NodeId, temperature: f64) -> Result<NodeId> {
        check_temperature(temperature)?;
        let value = log_softmax_rows(self.value(x), temperature);
        Ok(self.op(
            value,
            vec![x],
            Box::new(move |ctx| {
                let (y, g) = (ctx.output, ctx.grad_output);
                let mut dx = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    let total: f64 = gr.iter().sum();
                    for ((d, &yv), &gv) in dx.row_mut(r).iter_mut().zip(yr).zip(gr) {
                        *d = (gv - yv.exp() * total) / temperature;
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    // ------------------------------------------------------------------
    // Normalization and regularization

    /// Per-row standardization (biased variance) followed by `gain`/`bias`.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        epsilon: f64,
    ) -> Result<NodeId> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let width = vx.cols();
        for v in [vg, vb] {
            if v.shape() != (1, width) {
                return Err(Error::Shape {
                    op: "layer_norm",
                    left: vx.shape(),
                    right: v.shape(),
                });
            }
        }
        if epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "layer norm epsilon must be positive, got {epsilon}"
            )));
        }
        let mut normalized = Tensor::zeros(vx.rows(), width);
        let mut inv_std = Vec::with_capacity(vx.rows());
        for r in 0..vx.rows() {
            let row = vx.row(r);
            let mean = row.iter().sum::<f64>() / width as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / width as f64;
            let inv = 1.0 / (var + epsilon).sqrt();
            inv_std.push(inv);
            for (o, v) in normalized.row_mut(r).iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
        }
        let mut value = normalized.clone();
        for r in 0..value.rows() {
            for ((o, g), b) in value.row_mut(r).iter_mut().zip(vg.data()).zip(vb.data()) {
                *o = *o * g + b;
            }
        }
        Ok(self.op(
            value,
            vec![x, gain, bias],
            Box::new(move |ctx| {
                let (gain, g) = (ctx.inputs[1], ctx.grad_output);
                let n = normalized.cols() as f64;
                let dx = ctx.needs_grad[0].then(|| {
                    let mut dx = Tensor::zeros(g.rows(), g.cols());
                    for r in 0..g.rows() {
                        let xhat = normalized.row(r);
                        let dxhat: Vec<f64> =
                            g.row(r).iter().zip(gain.data()).map(|(a, b)| a * b).collect();
                        let mean_d = dxhat.iter().sum::<f64>() / n;
                        let mean_dx = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, d), xh) in dx.row_mut(r).iter_mut().zip(&dxhat).zip(xhat) {
                            *o = inv_std[r] * (d - mean_d - xh * mean_dx);
                        }
                    }
                    dx
                });
                let dgain = ctx.needs_grad[1].then(|| column_sums(&g.zip_map(&normalized, |a, b| a * b)));
                let dbias = ctx.needs_grad[2].then(|| column_sums(g));
                vec![dx, dgain, dbias]
            }),
        ))
    }

    /// Inverted dropout. Inference mode and `rate == 0` return `x` itself.
    pub fn dropout(&mut self, x: NodeId, rate: f64, training: bool, rng: &mut Rng) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let vx = self.value(x);
        let mask = Tensor::from_vec(
            vx.rows(),
            vx.cols(),
            (0..vx.numel())
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep_scale })
                .collect(),
        )?;
        let value = vx.zip_map(&mask, |a, m| a * m);
        Ok(self.op(
            value,
            vec![x],
            Box::new(move |ctx| vec![Some(ctx.grad_output.zip_map(&mask, |g, m| g * m))]),
        ))
    }

    // ------------------------------------------------------------------
    // Sequence ops. Batched sequences are stored as stacked rows:
    // sample b occupies rows b*seq_len .. (b+1)*seq_len.

    /// Scaled dot-product attention, per sample and per head.
    ///
    /// `q`, `k`, `v` are `(batch·seq_len) x d_model`; head `h` owns columns
    /// `h·d_head .. (h+1)·d_head` and uses the scale `1/√d_head`.
    pub fn attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        seq_len: usize,
        heads: usize,
    ) -> Result<NodeId> {
        let (vq, vk, vv) = (self.value(q), self.value(k), self.value(v));
        if vq.shape() != vk.shape() || vq.shape() != vv.shape() {
            return Err(Error::Shape {
                op: "attention",
                left: vq.shape(),
                right: if vq.shape() != vk.shape() { vk.shape() } else { vv.shape() },
            });
        }
        let (rows, d_model) = vq.shape();
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Config(format!(
                "model width {d_model} is not divisible by {heads} attention heads"
            )));
        }
        if seq_len == 0 || rows % seq_len != 0 {
            return Err(Error::Config(format!(
                "{rows} rows do not split into sequences of length {seq_len}"
            )));
        }
        let geom = AttnGeom {
            batch: rows / seq_len,
            seq_len,
            heads,
            d_head: d_model / heads,
        };
        let (value, weights) = attention_forward(vq, vk, vv, geom);
        Ok(self.op(
            value,
            vec![q, k, v],
            Box::new(move |ctx| {
                let (dq, dk, dv) = attention_backward(
                    ctx.inputs[0],
                    ctx.inputs[1],
                    ctx.inputs[2],
                    &weights,
                    ctx.grad_output,
                    geom,
                );
                vec![Some(dq), Some(dk), Some(dv)]
            }),
        ))
    }

    /// Multi-head self-attention: heads of `softmax(QKᵀ/√d_head)·V` with
    /// `Q = X·W_q` (etc.), concatenated and mapped back by `W_o`.
    #[allow(clippy::too_many_arguments)]
    pub fn self_attention(
        &mut self,
        x: NodeId,
        w_q: NodeId,
        w_k: NodeId,
        w_v: NodeId,
        w_o: NodeId,
        seq_len: usize,
        heads: usize,
    ) -> Result<NodeId> {
        let q = self.matmul(x, w_q)?;
        let k = self.matmul(x, w_k)?;
        let v = self.matmul(x, w_v)?;
        let z = self.attention(q, k, v, seq_len, heads)?;
        self.matmul(z, w_o)
    }

    /// Mean over the rows of each sequence: `(batch·seq_len) x d -> batch x d`.
    pub fn mean_pool(&mut self, x: NodeId, seq_len: usize) -> Result<NodeId> {
        let vx = self.value(x);
        if seq_len == 0 || !vx.rows().is_multiple_of(seq_len) {
            return Err(Error::Config(format!(
                "{} rows do not split into sequences of length {seq_len}",
                vx.rows()
            )));
        }
        let batch = vx.rows() / seq_len;
        let d = vx.cols();
        let mut value = Tensor::zeros(batch, d);
        for b in 0..batch {
            let out = value.row_mut(b);
            for t in 0..seq_len {
                for (o, v) in out.iter_mut().zip(vx.row(b * seq_len + t)) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|o| *o /= seq_len as f64);
        }
        Ok(self.op(
            value,
            vec![x],
            Box::new(move |ctx| {
                let g = ctx.grad_output;
                let mut dx = Tensor::zeros(g.rows() * seq_len, g.cols());
                for b in 0..g.rows() {
                    for t in 0..seq_len {
                        for (o, gv) in dx.row_mut(b * seq_len + t).iter_mut().zip(g.row(b)) {
                            *o = gv / seq_len as f64;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Turns each of the `k` feature columns into a token:
    /// `token(b, j) = features[b, j] · embed[j] + position[j]`.
    pub fn token_embed(
        &mut self,
        features: NodeId,
        embed: NodeId,
        position: NodeId,
    ) -> Result<NodeId> {
        let (vf, ve, vp) = (self.value(features), self.value(embed), self.value(position));
        let k = vf.cols();
        if ve.rows() != k || vp.shape() != ve.shape() {
            return Err(Error::Shape {
                op: "token_embed",
                left: vf.shape(),
                right: ve.shape(),
            });
        }
        let d = ve.cols();
        let mut value = Tensor::zeros(vf.rows() * k, d);
        for b in 0..vf.rows() {
            for j in 0..k {
                let f = vf.get(b, j);
                let out = value.row_mut(b * k + j);
                for ((o, e), p) in out.iter_mut().zip(ve.row(j)).zip(vp.row(j)) {
                    *o = f * e + p;
                }
            }
        }
        Ok(self.op(
            value,
            vec![features, embed, position],
            Box::new(move |ctx| {
                let (vf, ve, g) = (ctx.inputs[0], ctx.inputs[1], ctx.grad_output);
                let mut df = Tensor::zeros(vf.rows(), k);
                let mut de = Tensor::zeros(k, d);
                let mut dp = Tensor::zeros(k, d);
                for b in 0..vf.rows() {
                    for j in 0..k {
                        let gr = g.row(b * k + j);
                        let f = vf.get(b, j);
                        df.set(b, j, gr.iter().zip(ve.row(j)).map(|(a, e)| a * e).sum());
                        for (o, gv) in de.row_mut(j).iter_mut().zip(gr) {
                            *o += f * gv;
                        }
                        for (o, gv) in dp.row_mut(j).iter_mut().zip(gr) {
                            *o += gv;
                        }
                    }
                }
                vec![
                    ctx.needs_grad[0].then_some(df),
                    ctx.needs_grad[1].then_some(de),
                    ctx.needs_grad[2].then_some(dp),
                ]
            }),
        ))
    }

    // ------------------------------------------------------------------
    // Losses

    /// Batch mean of `-log softmax(logits)[label]`, log-sum-exp stabilized.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let vz = self.value(logits);
        let (batch, classes) = vz.shape();
        if labels.len() != batch {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: vz.shape(),
                right: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Parameter(format!(
                "class index {bad} out of range for {classes} classes"
            )));
        }
        let log_probs = log_softmax_rows(vz, 1.0);
        let loss = -labels
            .iter()
            .enumerate()
            .map(|(b, &l)| log_probs.get(b, l))
            .sum::<f64>()
            / batch as f64;
        let labels = labels.to_vec();
        Ok(self.op(
            Tensor::scalar(loss),
            vec![logits],
            Box::new(move |ctx| {
                let g = ctx.grad_output.item() / labels.len() as f64;
                let mut dz = log_probs.map(f64::exp);
                for (b, &l) in labels.iter().enumerate() {
                    let v = dz.get(b, l);
                    dz.set(b, l, v - 1.0);
                }
                vec![Some(dz.scale(g))]
            }),
        ))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => existing.add_assign(&g),
        None => *slot = Some(g),
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for r in 0..g.rows() {
        for (o, v) in out.data_mut().iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "temperature must be positive, got {temperature}"
        )))
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_A: f64 = 0.044_715;

pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_derivative(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Row-wise `softmax(x / τ)`, stabilized by subtracting the row maximum.
pub fn softmax_rows(x: &Tensor, temperature: f64) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = ((*v - max) / temperature).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Row-wise `log softmax(x / τ)` computed as shifted logits minus log-sum-exp.
pub fn log_softmax_rows(x: &Tensor, temperature: f64) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.iter_mut().for_each(|v| *v = (*v - max) / temperature);
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|v| *v -= lse);
    }
    out
}

#[derive(Clone, Copy)]
struct AttnGeom {
    batch: usize,
    seq_len: usize,
    heads: usize,
    d_head: usize,
}

/// Returns the attended values and the attention weights, laid out as
/// `[batch][head][query][key]`.
fn attention_forward(q: &Tensor, k: &Tensor, v: &Tensor, g: AttnGeom) -> (Tensor, Vec<f64>) {
    let (t, dh) = (g.seq_len, g.d_head);
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Tensor::zeros(q.rows(), q.cols());
    let mut weights = vec![0.0; g.batch * g.heads * t * t];
    for b in 0..g.batch {
        for h in 0..g.heads {
            let c0 = h * dh;
            let a = &mut weights[(b * g.heads + h) * t * t..][..t * t];
            for i in 0..t {
                let qi = &q.row(b * t + i)[c0..c0 + dh];
                let arow = &mut a[i * t..(i + 1) * t];
                for (j, w) in arow.iter_mut().enumerate() {
                    let kj = &k.row(b * t + j)[c0..c0 + dh];
                    *w = qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() * scale;
                }
                let max = arow.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for w in arow.iter_mut() {
                    *w = (*w - max).exp();
                    total += *w;
                }
                arow.iter_mut().for_each(|w| *w /= total);
                for (j, &w) in arow.iter().enumerate() {
                    let vj = &v.row(b * t + j)[c0..c0 + dh];
                    let oi = &mut out.row_mut(b * t + i)[c0..c0 + dh];
                    for (o, x) in oi.iter_mut().zip(vj) {
                        *o += w * x;
                    }
                }
            }
        }
    }
    (out, weights)
}

fn attention_backward(
    q: &Tensor,
    k: &Tensor,
    v: &Tensor,
    weights: &[f64],
    dout: &Tensor,
    g: AttnGeom,
) -> (Tensor, Tensor, Tensor) {
    let (t, dh) = (g.seq_len, g.d_head);
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Tensor::zeros(q.rows(), q.cols());
    let mut dk = Tensor::zeros(k.rows(), k.cols());
    let mut dv = Tensor::zeros(v.rows(), v.cols());
    let mut da = vec![0.0; t];
    for b in 0..g.batch {
        for h in 0..g.heads {
            let c0 = h * dh;
            let a = &weights[(b * g.heads + h) * t * t..][..t * t];
            for i in 0..t {
                let arow = &a[i * t..(i + 1) * t];
                let doi = &dout.row(b * t + i)[c0..c0 + dh];
                for j in 0..t {
                    let vj = &v.row(b * t + j)[c0..c0 + dh];
                    da[j] = doi.iter().zip(vj).map(|(x, y)| x * y).sum();
                    let dvj = &mut dv.row_mut(b * t + j)[c0..c0 + dh];
                    for (o, x) in dvj.iter_mut().zip(doi) {
                        *o += arow[j] * x;
                    }
                }
                let inner: f64 = arow.iter().zip(&da).map(|(x, y)| x * y).sum();
                let qi: Vec<f64> = q.row(b * t + i)[c0..c0 + dh].to_vec();
                for j in 0..t {
                    let ds = arow[j] * (da[j] - inner) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kj = &k.row(b * t + j)[c0..c0 + dh];
                    let dqi = &mut dq.row_mut(b * t + i)[c0..c0 + dh];
                    for (o, x) in dqi.iter_mut().zip(kj) {
                        *o += ds * x;
                    }
                    let dkj = &mut dk.row_mut(b * t + j)[c0..c0 + dh];
                    for (o, x) in dkj.iter_mut().zip(&qi) {
                        *o += ds * x;
                    }
                }
            }
        }
    }
    (dq, dk, dv)
}
