//! Shared training loop over the toy encoder, plus evaluation helpers.
//!
//! The loop drives masked SGD with one of two objectives: distillation only
//! (used between pruning rounds) or classification cross-entropy plus a
//! weighted distillation term (used for fine-tuning). Divergence, defined as
//! a non-finite batch loss, aborts immediately with the offending iteration.

use crate::dataset::SyntheticDataset;
use crate::distill::{classify, classify_ce_grad, cross_entropy, tgkd_loss, tgkd_loss_grad, EmbeddingBatch};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{backward, forward, sgd_step, ModelSpec, ParameterStore};
use crate::pruner::SparsityMask;
use crate::rng::SeededRng;
use crate::spectrum::FreezePlan;

/// Loss function driving a training phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Distillation loss only.
    DistillOnly,
    /// Classification cross-entropy plus `lambda_kd` times the distillation
    /// loss.
    Classification { lambda_kd: f64 },
}

/// Per-iteration hook; receives (iteration just finished, params).
pub type IterationHook<'h> = dyn FnMut(usize, &ParameterStore) + 'h;

/// Run `iterations` steps of masked SGD and return the loss curve.
///
/// Batches are drawn with replacement from the train split using `rng`, so
/// the caller controls the sampling stream. Frozen layers in `plan` receive
/// no updates but still pass gradients backwards.
#[allow(clippy::too_many_arguments)]
pub fn train_loop(
    spec: &ModelSpec,
    params: &mut ParameterStore,
    mask: &SparsityMask,
    plan: &FreezePlan,
    data: &SyntheticDataset,
    objective: Objective,
    iterations: usize,
    learning_rate: f64,
    batch_size: usize,
    rng: &mut SeededRng,
    mut hook: Option<&mut IterationHook<'_>>,
) -> Result<Vec<f64>> {
    if batch_size == 0 || iterations == 0 {
        return Err(Error::InvalidArgument("batch_size and iterations must be >= 1".into()));
    }
    let n = data.train.len();
    let mut curve = Vec::with_capacity(iterations);
    for iter in 0..iterations {
        let indices: Vec<usize> = (0..batch_size).map(|_| rng.below(n)).collect();
        let (x, labels, teacher) = data.train.gather(&indices);
        let cache = forward(spec, params, mask, &x)?;
        let v = embedding_batch(cache.embedding());

        let (loss, upstream) = match objective {
            Objective::DistillOnly => {
                let texts = batch_texts(&data.text, &labels);
                let g = tgkd_loss_grad(&v, &teacher, &texts)?;
                let up = DenseMatrix::new(batch_size, spec.embed_dim(), g.grad_v)?;
                (g.loss, up)
            }
            Objective::Classification { lambda_kd } => {
                let texts = batch_texts(&data.text, &labels);
                let kd = tgkd_loss_grad(&v, &teacher, &texts)?;
                let mut up = vec![0.0; batch_size * spec.embed_dim()];
                let mut ce_total = 0.0;
                let inv_b = 1.0 / batch_size as f64;
                for (i, &label) in labels.iter().enumerate() {
                    let g = classify_ce_grad(v.row(i), &data.text, label)?;
                    ce_total += g.loss * inv_b;
                    for (k, gv) in g.grad_v.iter().enumerate() {
                        up[i * spec.embed_dim() + k] += gv * inv_b;
                    }
                }
                for (u, kd_g) in up.iter_mut().zip(&kd.grad_v) {
                    *u += lambda_kd * kd_g;
                }
                let up = DenseMatrix::new(batch_size, spec.embed_dim(), up)?;
                (ce_total + lambda_kd * kd.loss, up)
            }
        };

        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: iter, loss });
        }
        curve.push(loss);

        let grads = backward(spec, params, mask, &cache, &upstream, plan)?;
        sgd_step(params, &grads, mask, learning_rate)?;
        if let Some(h) = hook.as_deref_mut() {
            h(iter, params);
        }
    }
    Ok(curve)
}

fn embedding_batch(m: &DenseMatrix) -> EmbeddingBatch {
    EmbeddingBatch::new(m.rows(), m.cols(), m.data().to_vec())
        .expect("embedding matrix is rectangular and non-empty")
}

fn batch_texts(text: &EmbeddingBatch, labels: &[usize]) -> EmbeddingBatch {
    let rows: Vec<Vec<f64>> = labels.iter().map(|&l| text.row(l).to_vec()).collect();
    EmbeddingBatch::from_rows(&rows).expect("label rows are rectangular")
}

/// Distillation loss of the masked model over the full held-out split.
pub fn heldout_distill_loss(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<f64> {
    let cache = forward(spec, params, mask, &data.heldout.inputs)?;
    let v = embedding_batch(cache.embedding());
    let texts = data.heldout.label_texts(&data.text);
    tgkd_loss(&v, &data.heldout.teacher, &texts)
}

/// Fraction of held-out items whose top class-score matches the label.
pub fn heldout_accuracy(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<f64> {
    let cache = forward(spec, params, mask, &data.heldout.inputs)?;
    let e = cache.embedding();
    let mut correct = 0usize;
    for (i, &label) in data.heldout.labels.iter().enumerate() {
        let scores = classify(e.row(i), &data.text)?;
        let argmax = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("scores are finite"))
            .map(|(j, _)| j)
            .unwrap();
        if argmax == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.heldout.len() as f64)
}

/// Mean held-out classification cross-entropy.
pub fn heldout_cross_entropy(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<f64> {
    let cache = forward(spec, params, mask, &data.heldout.inputs)?;
    let e = cache.embedding();
    let mut total = 0.0;
    for (i, &label) in data.heldout.labels.iter().enumerate() {
        total += cross_entropy(&classify(e.row(i), &data.text)?, label)?;
    }
    Ok(total / data.heldout.len() as f64)
}

/// Per-layer outputs of the masked model on the held-out inputs, for
/// feature-similarity measurements.
pub fn heldout_layer_features(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<Vec<DenseMatrix>> {
    let cache = forward(spec, params, mask, &data.heldout.inputs)?;
    Ok((0..spec.num_layers()).map(|i| cache.layer_output(i).clone()).collect())
}
