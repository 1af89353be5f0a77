use crate::engine::{softmax_rows, Graph, NodeId, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::spec::{Activation, ModelKind, ModelSpec, FF_MULT, LAYER_NORM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Zeros,
    Ones,
    /// uniform(−1/√fan_in, 1/√fan_in)
    FanIn(usize),
    /// normal(0, 0.02)
    Embedding,
}

/// Name, shape and initializer of one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSlot {
    pub name: String,
    pub shape: (usize, usize),
    init: Init,
}

struct Layout(Vec<ParamSlot>);

impl Layout {
    fn push(&mut self, name: String, shape: (usize, usize), init: Init) {
        self.0.push(ParamSlot { name, shape, init });
    }

    fn linear(&mut self, prefix: &str, d_in: usize, d_out: usize) {
        self.push(format!("{prefix}.weight"), (d_in, d_out), Init::FanIn(d_in));
        self.push(format!("{prefix}.bias"), (1, d_out), Init::FanIn(d_in));
    }

    fn norm(&mut self, prefix: &str, d: usize) {
        self.push(format!("{prefix}.gain"), (1, d), Init::Ones);
        self.push(format!("{prefix}.bias"), (1, d), Init::Zeros);
    }

    fn encoder_layer(&mut self, prefix: &str, d: usize) {
        self.norm(&format!("{prefix}.ln1"), d);
        for w in ["w_q", "w_k", "w_v", "w_o"] {
            self.push(format!("{prefix}.attn.{w}"), (d, d), Init::FanIn(d));
        }
        self.norm(&format!("{prefix}.ln2"), d);
        self.linear(&format!("{prefix}.ff1"), d, FF_MULT * d);
        self.linear(&format!("{prefix}.ff2"), FF_MULT * d, d);
    }

    fn block(&mut self, prefix: &str, d: usize, layers: usize) {
        for i in 0..layers {
            self.encoder_layer(&format!("{prefix}.layer{i}"), d);
        }
        self.norm(&format!("{prefix}.norm"), d);
    }

    fn head(&mut self, input: usize, widths: &[usize], classes: usize, layer_norm: bool) {
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            self.linear(&format!("head.{i}"), prev, w);
            if layer_norm {
                self.norm(&format!("head.{i}.ln"), w);
            }
            prev = w;
        }
        self.linear("head.out", prev, classes);
    }
}

/// Parameter tensors of `spec`, in the order the forward pass consumes them.
pub fn parameter_layout(spec: &ModelSpec) -> Vec<ParamSlot> {
    let mut l = Layout(Vec::new());
    let (k, d1, d2) = (spec.num_features, spec.d_model_1, spec.d_model_2);
    if spec.has_block1() {
        l.push("embed.weight".into(), (k, d1), Init::Embedding);
        l.push("embed.position".into(), (k, d1), Init::Embedding);
        l.block("block1", d1, spec.encoder_layers_1);
    }
    match spec.kind {
        ModelKind::Teacher => {
            l.linear("expand", d1, d2);
            l.block("block2", d2, spec.encoder_layers_2);
            l.head(d2, &spec.mlp_widths, spec.num_classes, true);
        }
        ModelKind::StudentTx => l.head(d1, &spec.mlp_widths, spec.num_classes, true),
        ModelKind::StudentMlp => l.head(k, &spec.mlp_widths, spec.num_classes, false),
    }
    l.0
}

/// A model with concrete parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    spec: ModelSpec,
    names: Vec<String>,
    params: Vec<Tensor>,
    mode: Mode,
}

/// Initializes a model: fan-in uniform for linear maps, normal(0, 0.02) for
/// token embeddings, unit gain and zero bias for layer norms.
pub fn build_model(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelInstance> {
    spec.validate()?;
    let layout = parameter_layout(spec);
    let mut names = Vec::with_capacity(layout.len());
    let mut params = Vec::with_capacity(layout.len());
    for slot in layout {
        let (r, c) = slot.shape;
        let t = match slot.init {
            Init::Zeros => Tensor::zeros(r, c),
            Init::Ones => Tensor::ones(r, c),
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                Tensor::uniform(r, c, -bound, bound, rng)
            }
            Init::Embedding => Tensor::normal(r, c, 0.0, 0.02, rng),
        };
        names.push(slot.name);
        params.push(t);
    }
    Ok(ModelInstance {
        spec: spec.clone(),
        names,
        params,
        mode: Mode::Train,
    })
}

/// Result of wiring a model into a graph.
pub struct Forward {
    pub logits: NodeId,
    /// Parameter leaves, aligned with [`ModelInstance::params`].
    pub params: Vec<NodeId>,
}

struct Cursor<'a> {
    ids: &'a [NodeId],
    next: usize,
}

impl Cursor<'_> {
    fn take(&mut self) -> NodeId {
        let id = self.ids[self.next];
        self.next += 1;
        id
    }
}

impl ModelInstance {
    /// Reassembles a model from stored tensors, checking names and shapes.
    pub fn from_parameters(spec: ModelSpec, named: Vec<(String, Tensor)>) -> Result<Self> {
        spec.validate()?;
        let layout = parameter_layout(&spec);
        if layout.len() != named.len() {
            return Err(Error::Data(format!(
                "model expects {} parameter tensors, got {}",
                layout.len(),
                named.len()
            )));
        }
        let mut names = Vec::with_capacity(named.len());
        let mut params = Vec::with_capacity(named.len());
        for (slot, (name, t)) in layout.into_iter().zip(named) {
            if slot.name != name {
                return Err(Error::Data(format!(
                    "expected parameter `{}`, found `{name}`",
                    slot.name
                )));
            }
            if slot.shape != t.shape() {
                return Err(Error::CheckpointShape {
                    name,
                    expected: slot.shape,
                    found: t.shape(),
                });
            }
            names.push(name);
            params.push(t);
        }
        Ok(Self {
            spec,
            names,
            params,
            mode: Mode::Eval,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &mut self.params[i])
    }

    /// Element count over all parameter tensors.
    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    /// Builds the forward graph for `features` (batch x num_features).
    ///
    /// Parameters enter as differentiable leaves. Dropout is active only in
    /// [`Mode::Train`], which then requires `dropout_rng`.
    pub fn forward(
        &self,
        g: &mut Graph,
        features: &Tensor,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<Forward> {
        let params: Vec<NodeId> = self.params.iter().map(|p| g.variable(p.clone())).collect();
        let logits = self.wire(g, &params, features, dropout_rng)?;
        Ok(Forward { logits, params })
    }

    /// Inference-mode logits (dropout off regardless of [`Self::mode`]).
    pub fn logits(&self, features: &Tensor) -> Result<Tensor> {
        const CHUNK: usize = 256;
        let mut out = Tensor::zeros(features.rows(), self.spec.num_classes);
        let mut start = 0;
        while start < features.rows() {
            let end = (start + CHUNK).min(features.rows());
            let mut g = Graph::new();
            let params: Vec<NodeId> =
                self.params.iter().map(|p| g.constant(p.clone())).collect();
            let chunk = features.slice_rows(start, end);
            let id = self.wire_mode(&mut g, &params, &chunk, None, false)?;
            for (i, r) in (start..end).enumerate() {
                out.row_mut(r).copy_from_slice(g.value(id).row(i));
            }
            start = end;
        }
        Ok(out)
    }

    /// Inference-mode class probabilities.
    pub fn probabilities(&self, features: &Tensor) -> Result<Tensor> {
        Ok(softmax_rows(&self.logits(features)?, 1.0))
    }

    fn wire(
        &self,
        g: &mut Graph,
        params: &[NodeId],
        features: &Tensor,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<NodeId> {
        self.wire_mode(g, params, features, dropout_rng, self.mode == Mode::Train)
    }

    fn wire_mode(
        &self,
        g: &mut Graph,
        params: &[NodeId],
        features: &Tensor,
        dropout_rng: Option<&mut Rng>,
        training: bool,
    ) -> Result<NodeId> {
        let spec = &self.spec;
        if features.cols() != spec.num_features {
            return Err(Error::Shape {
                op: "model input",
                left: features.shape(),
                right: (features.rows(), spec.num_features),
            });
        }
        let uses_dropout = training && spec.has_block1() && spec.dropout_1 > 0.0;
        if uses_dropout && dropout_rng.is_none() {
            return Err(Error::Usage("training-mode forward needs a dropout generator".into()));
        }
        let mut p = Cursor { ids: params, next: 0 };
        let x = g.constant(features.clone());
        let k = spec.num_features;

        let pooled = if spec.has_block1() {
            let (emb, pos) = (p.take(), p.take());
            let mut h = g.token_embed(x, emb, pos)?;
            let dropout = if uses_dropout { spec.dropout_1 } else { 0.0 };
            h = encoder_block(
                g,
                &mut p,
                h,
                k,
                spec.heads_1,
                spec.encoder_layers_1,
                spec.activation_1,
                dropout,
                dropout_rng,
            )?;
            if spec.has_block2() {
                let (w, b) = (p.take(), p.take());
                h = g.linear(h, w, b)?;
                h = encoder_block(
                    g,
                    &mut p,
                    h,
                    k,
                    spec.heads_2,
                    spec.encoder_layers_2,
                    spec.activation_2,
                    0.0,
                    None,
                )?;
            }
            g.mean_pool(h, k)?
        } else {
            x
        };

        let layer_norm = spec.kind != ModelKind::StudentMlp;
        let mut h = pooled;
        for _ in &spec.mlp_widths {
            let (w, b) = (p.take(), p.take());
            h = g.linear(h, w, b)?;
            if layer_norm {
                let (gain, bias) = (p.take(), p.take());
                h = g.layer_norm(h, gain, bias, LAYER_NORM_EPS)?;
            }
            h = activate(g, h, spec.activation_head);
        }
        let (w, b) = (p.take(), p.take());
        let logits = g.linear(h, w, b)?;
        debug_assert_eq!(p.next, params.len());
        Ok(logits)
    }
}

fn activate(g: &mut Graph, x: NodeId, act: Activation) -> NodeId {
    match act {
        Activation::Gelu => g.gelu(x),
        Activation::Relu => g.relu(x),
    }
}

/// Stack of pre-norm encoder layers followed by a final layer norm.
#[allow(clippy::too_many_arguments)]
fn encoder_block(
    g: &mut Graph,
    p: &mut Cursor<'_>,
    mut x: NodeId,
    seq_len: usize,
    heads: usize,
    layers: usize,
    act: Activation,
    dropout: f64,
    mut rng: Option<&mut Rng>,
) -> Result<NodeId> {
    let mut drop = |g: &mut Graph, h: NodeId| -> Result<NodeId> {
        match rng.as_deref_mut() {
            Some(r) if dropout > 0.0 => g.dropout(h, dropout, true, r),
            _ => Ok(h),
        }
    };
    for _ in 0..layers {
        let (g1, b1) = (p.take(), p.take());
        let h = g.layer_norm(x, g1, b1, LAYER_NORM_EPS)?;
        let (wq, wk, wv, wo) = (p.take(), p.take(), p.take(), p.take());
        let a = g.self_attention(h, wq, wk, wv, wo, seq_len, heads)?;
        let a = drop(g, a)?;
        x = g.add(x, a)?;

        let (g2, b2) = (p.take(), p.take());
        let h = g.layer_norm(x, g2, b2, LAYER_NORM_EPS)?;
        let (w1, c1, w2, c2) = (p.take(), p.take(), p.take(), p.take());
        let f = g.linear(h, w1, c1)?;
        let f = activate(g, f, act);
        let f = g.linear(f, w2, c2)?;
        let f = drop(g, f)?;
        x = g.add(x, f)?;
    }
    let (gain, bias) = (p.take(), p.take());
    g.layer_norm(x, gain, bias, LAYER_NORM_EPS)
}

/// Plain gradient descent step `w − lr·grad`.
pub fn sgd_update(weight: &Tensor, grad: &Tensor, lr: f64) -> Result<Tensor> {
    if weight.shape() != grad.shape() {
        return Err(Error::Shape {
            op: "sgd_update",
            left: weight.shape(),
            right: grad.shape(),
        });
    }
    if !(lr > 0.0) {
        return Err(Error::Parameter(format!("learning rate must be positive, got {lr}")));
    }
    Ok(weight.zip_map(grad, |w, g| w - lr * g))
}
