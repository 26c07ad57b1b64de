//! Desk-scale trainable encoder: a plain MLP with analytic gradients,
//! masked parameter updates, and per-layer freezing.
//!
//! Weight matrices follow the d_out x d_in row convention, so a layer
//! computes y = x W^T + b for row-major input batches. Hidden layers apply
//! tanh or relu; the final layer is linear and its output is the embedding.

use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::pruner::SparsityMask;
use crate::rng::SeededRng;
use crate::spectrum::FreezePlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Architecture description: layer widths, one activation per hidden layer,
/// and a unique name per weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    layer_names: Vec<String>,
}

impl ModelSpec {
    pub fn new(
        layer_dims: Vec<usize>,
        activations: Vec<Activation>,
        layer_names: Vec<String>,
    ) -> Result<Self> {
        let spec = ModelSpec { layer_dims, activations, layer_names };
        spec.validate()?;
        Ok(spec)
    }

    /// Re-check the construction invariants; needed after deserializing,
    /// which bypasses `new`.
    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidArgument(
                "model needs at least input and output widths".into(),
            ));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        let weight_layers = self.layer_dims.len() - 1;
        if self.activations.len() != weight_layers - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} hidden layers need {} activations, got {}",
                weight_layers - 1,
                weight_layers - 1,
                self.activations.len()
            )));
        }
        if self.layer_names.len() != weight_layers {
            return Err(Error::InvalidArgument(format!(
                "{weight_layers} weight layers need {weight_layers} names, got {}",
                self.layer_names.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &self.layer_names {
            if !seen.insert(name) {
                return Err(Error::InvalidArgument(format!("duplicate layer name '{name}'")));
            }
        }
        Ok(())
    }

    /// Names layers fc0, fc1, ... in order.
    pub fn with_default_names(layer_dims: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let names = (0..layer_dims.len().saturating_sub(1)).map(|i| format!("fc{i}")).collect();
        ModelSpec::new(layer_dims, activations, names)
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Number of weight matrices.
    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn layer_name(&self, i: usize) -> &str {
        &self.layer_names[i]
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layer_names.iter().position(|n| n == name)
    }

    /// (d_out, d_in) of weight matrix i.
    pub fn layer_shape(&self, i: usize) -> (usize, usize) {
        (self.layer_dims[i + 1], self.layer_dims[i])
    }

    /// Activation applied after layer i, None for the final linear layer.
    pub fn activation(&self, i: usize) -> Option<Activation> {
        self.activations.get(i).copied()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn embed_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Total count of maskable weights (biases excluded).
    pub fn weight_count(&self) -> usize {
        (0..self.num_layers())
            .map(|i| {
                let (o, n) = self.layer_shape(i);
                o * n
            })
            .sum()
    }
}

pub const INIT_SCHEME: &str = "xavier-uniform";

/// Model parameters: one weight matrix and bias vector per layer, plus the
/// record of how they were initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    pub init_seed: u64,
    pub init_scheme: String,
}

impl ParameterStore {
    /// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)), zero
    /// biases, drawn layer by layer from a dedicated substream of `seed`.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed).derive(0x494e4954); // "INIT"
        let mut weights = Vec::with_capacity(spec.num_layers());
        let mut biases = Vec::with_capacity(spec.num_layers());
        for i in 0..spec.num_layers() {
            let (d_out, d_in) = spec.layer_shape(i);
            let bound = (6.0 / (d_in + d_out) as f64).sqrt();
            weights.push((0..d_out * d_in).map(|_| rng.uniform(-bound, bound)).collect());
            biases.push(vec![0.0; d_out]);
        }
        ParameterStore { weights, biases, init_seed: seed, init_scheme: INIT_SCHEME.into() }
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn check_shapes(&self, spec: &ModelSpec) -> Result<()> {
        if self.weights.len() != spec.num_layers() {
            return Err(Error::ShapeMismatch(format!(
                "store has {} layers, spec has {}",
                self.weights.len(),
                spec.num_layers()
            )));
        }
        for i in 0..spec.num_layers() {
            let (d_out, d_in) = spec.layer_shape(i);
            if self.weights[i].len() != d_out * d_in || self.biases[i].len() != d_out {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} ('{}') does not match spec shape {}x{}",
                    i,
                    spec.layer_name(i),
                    d_out,
                    d_in
                )));
            }
        }
        Ok(())
    }

    /// Zero out masked weight positions in place.
    pub fn apply_mask(&mut self, mask: &SparsityMask) -> Result<()> {
        if mask.num_layers() != self.weights.len() {
            return Err(Error::ShapeMismatch("mask layer count differs from store".into()));
        }
        for (w, m) in self.weights.iter_mut().zip(mask.layer_values()) {
            if w.len() != m.len() {
                return Err(Error::ShapeMismatch("mask shape differs from weights".into()));
            }
            for (wi, &mi) in w.iter_mut().zip(m) {
                if mi == 0 {
                    *wi = 0.0;
                }
            }
        }
        Ok(())
    }

    /// Serialize spec + parameters into a container. Extra metadata entries
    /// (stage info, config hash) can be attached by the caller afterwards.
    pub fn to_container(&self, spec: &ModelSpec) -> Result<Container> {
        self.check_shapes(spec)?;
        let mut c = Container::new();
        for i in 0..spec.num_layers() {
            let (d_out, d_in) = spec.layer_shape(i);
            let name = spec.layer_name(i);
            c.insert(
                format!("{name}.weight"),
                Tensor::from_f64(vec![d_out, d_in], &self.weights[i])?,
            );
            c.insert(format!("{name}.bias"), Tensor::from_f64(vec![d_out], &self.biases[i])?);
        }
        c.set_meta("model_spec", spec)?;
        c.set_meta("init_seed", self.init_seed)?;
        c.set_meta("init_scheme", &self.init_scheme)?;
        Ok(c)
    }

    /// Restore spec + parameters written by [`ParameterStore::to_container`].
    pub fn from_container(c: &Container) -> Result<(ModelSpec, ParameterStore)> {
        let spec_value = c
            .metadata
            .get("model_spec")
            .ok_or_else(|| Error::Format("checkpoint missing 'model_spec' metadata".into()))?;
        let spec: ModelSpec = serde_json::from_value(spec_value.clone())?;
        let mut weights = Vec::with_capacity(spec.num_layers());
        let mut biases = Vec::with_capacity(spec.num_layers());
        for i in 0..spec.num_layers() {
            let (d_out, d_in) = spec.layer_shape(i);
            let name = spec.layer_name(i);
            let w = c.require(&format!("{name}.weight"))?;
            if w.shape() != [d_out, d_in] {
                return Err(Error::Format(format!(
                    "tensor '{name}.weight' shape {:?} does not match spec {d_out}x{d_in}",
                    w.shape()
                )));
            }
            weights.push(w.as_f64()?);
            let b = c.require(&format!("{name}.bias"))?;
            if b.shape() != [d_out] {
                return Err(Error::Format(format!(
                    "tensor '{name}.bias' shape {:?} does not match spec [{d_out}]",
                    b.shape()
                )));
            }
            biases.push(b.as_f64()?);
        }
        let init_seed = c.meta_u64("init_seed").unwrap_or(0);
        let init_scheme = c.meta_str("init_scheme").unwrap_or(INIT_SCHEME).to_string();
        Ok((spec, ParameterStore { weights, biases, init_seed, init_scheme }))
    }
}

/// Optimizer settings for one training phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.0001, iterations: 200, batch_size: 32, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Activations captured by the forward pass; `outputs[0]` is the input batch
/// and `outputs[i+1]` the post-activation output of layer i.
pub struct ForwardCache {
    outputs: Vec<DenseMatrix>,
}

impl ForwardCache {
    pub fn embedding(&self) -> &DenseMatrix {
        self.outputs.last().unwrap()
    }

    /// Post-activation output of layer i (the embedding for the last layer).
    pub fn layer_output(&self, i: usize) -> &DenseMatrix {
        &self.outputs[i + 1]
    }
}

fn masked_weight(w: &[f64], m: &[u8]) -> Vec<f64> {
    w.iter().zip(m).map(|(&wi, &mi)| if mi == 1 { wi } else { 0.0 }).collect()
}

/// Run the batch through the masked network, caching every layer output.
pub fn forward(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    batch: &DenseMatrix,
) -> Result<ForwardCache> {
    params.check_shapes(spec)?;
    mask.check_shapes(spec)?;
    if batch.cols() != spec.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} columns, model expects {}",
            batch.cols(),
            spec.input_dim()
        )));
    }

    let mut outputs = Vec::with_capacity(spec.num_layers() + 1);
    outputs.push(batch.clone());
    for i in 0..spec.num_layers() {
        let (d_out, d_in) = spec.layer_shape(i);
        let w = masked_weight(params.weights(i), mask.layer_values_at(i));
        let b = params.bias(i);
        let x = outputs.last().unwrap();
        let mut y = DenseMatrix::zeros(x.rows(), d_out);
        for r in 0..x.rows() {
            let xr = x.row(r);
            for o in 0..d_out {
                let wo = &w[o * d_in..(o + 1) * d_in];
                let mut acc = b[o];
                for k in 0..d_in {
                    acc += xr[k] * wo[k];
                }
                y.set(r, o, acc);
            }
        }
        if let Some(act) = spec.activation(i) {
            let mut activated = DenseMatrix::zeros(y.rows(), y.cols());
            for r in 0..y.rows() {
                for c in 0..y.cols() {
                    activated.set(r, c, act.apply(y.get(r, c)));
                }
            }
            outputs.push(activated);
        } else {
            outputs.push(y);
        }
    }
    Ok(ForwardCache { outputs })
}

/// Per-layer gradient pair.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients indexed by layer; `None` for frozen layers, which are skipped
/// entirely rather than zeroed.
pub type Gradients = Vec<Option<LayerGrad>>;

/// Backpropagate `upstream` (d loss / d embedding, one row per batch item)
/// through the cached forward pass.
///
/// Frozen layers get no weight or bias gradient but still pass the
/// hidden-feature gradient through to earlier layers. Weight gradients are
/// zeroed at masked positions before returning.
pub fn backward(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    cache: &ForwardCache,
    upstream: &DenseMatrix,
    plan: &FreezePlan,
) -> Result<Gradients> {
    let l = spec.num_layers();
    if cache.outputs.len() != l + 1 {
        return Err(Error::ShapeMismatch("forward cache does not match model depth".into()));
    }
    let last = cache.embedding();
    if upstream.rows() != last.rows() || upstream.cols() != last.cols() {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient is {}x{}, embedding is {}x{}",
            upstream.rows(),
            upstream.cols(),
            last.rows(),
            last.cols()
        )));
    }

    let mut grads: Gradients = vec![None; l];
    let mut delta = upstream.clone();

    for i in (0..l).rev() {
        let (d_out, d_in) = spec.layer_shape(i);
        // delta currently holds d loss / d output_i; convert to
        // d loss / d preactivation_i.
        if let Some(act) = spec.activation(i) {
            let out = cache.layer_output(i);
            for r in 0..delta.rows() {
                for c in 0..delta.cols() {
                    let d = delta.get(r, c) * act.derivative_from_output(out.get(r, c));
                    delta.set(r, c, d);
                }
            }
        }

        let x = &cache.outputs[i];
        let frozen = plan.is_frozen(spec.layer_name(i));
        if !frozen {
            let m = mask.layer_values_at(i);
            let mut dw = vec![0.0; d_out * d_in];
            let mut db = vec![0.0; d_out];
            for r in 0..delta.rows() {
                let xr = x.row(r);
                for o in 0..d_out {
                    let d = delta.get(r, o);
                    if d == 0.0 {
                        continue;
                    }
                    db[o] += d;
                    let row = &mut dw[o * d_in..(o + 1) * d_in];
                    for k in 0..d_in {
                        row[k] += d * xr[k];
                    }
                }
            }
            for (g, &mi) in dw.iter_mut().zip(m) {
                if mi == 0 {
                    *g = 0.0;
                }
            }
            grads[i] = Some(LayerGrad { weight: dw, bias: db });
        }

        // Propagate to the previous layer through the masked weights; skip
        // for the first layer since nothing consumes d loss / d input.
        if i > 0 {
            let w = masked_weight(params.weights(i), mask.layer_values_at(i));
            let mut prev = DenseMatrix::zeros(delta.rows(), d_in);
            for r in 0..delta.rows() {
                for o in 0..d_out {
                    let d = delta.get(r, o);
                    if d == 0.0 {
                        continue;
                    }
                    let wo = &w[o * d_in..(o + 1) * d_in];
                    for k in 0..d_in {
                        prev.set(r, k, prev.get(r, k) + d * wo[k]);
                    }
                }
            }
            delta = prev;
        }
    }
    Ok(grads)
}

/// Plain SGD update. Masked weight positions stay exactly 0; layers without a
/// gradient entry are left untouched.
pub fn sgd_step(
    params: &mut ParameterStore,
    grads: &Gradients,
    mask: &SparsityMask,
    learning_rate: f64,
) -> Result<()> {
    if grads.len() != params.num_layers() {
        return Err(Error::ShapeMismatch("gradient set does not match layer count".into()));
    }
    for (i, grad) in grads.iter().enumerate() {
        let Some(g) = grad else { continue };
        let m = mask.layer_values_at(i);
        let w = &mut params.weights[i];
        if g.weight.len() != w.len() || g.bias.len() != params.biases[i].len() {
            return Err(Error::ShapeMismatch(format!("gradient shape mismatch at layer {i}")));
        }
        for ((wi, &gi), &mi) in w.iter_mut().zip(&g.weight).zip(m) {
            if mi == 1 {
                *wi -= learning_rate * gi;
            } else {
                *wi = 0.0;
            }
        }
        for (bi, &gi) in params.biases[i].iter_mut().zip(&g.bias) {
            *bi -= learning_rate * gi;
        }
    }
    Ok(())
}
