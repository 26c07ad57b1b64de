//! Integer FLOPs accounting for training under per-layer sparsity and
//! frozen flags.
//!
//! Each layer carries its dense inference cost `C`. One training iteration
//! costs `sc = round_half_up(sigma * C)` forward; backward always pays `C`
//! for hidden-feature gradients plus `sc` more for weight gradients unless
//! the layer is frozen. The four reference regimes fall out directly:
//! dense active (1C, 2C), dense frozen (1C, 1C), sparse sigma=0.1 active
//! (0.1C, 1.1C), sparse frozen (0.1C, 1C). All totals are exact 128-bit
//! integers; the only rounding is the single sigma*C product per layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::pruner::SparsityMask;
use crate::spectrum::FreezePlan;

/// Cost inputs for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer_name: String,
    /// Dense inference FLOPs for this layer at the chosen batch size.
    pub dense_inference_flops: u64,
    /// Fraction of weights active, in (0, 1].
    pub sparsity: f64,
    pub frozen: bool,
}

impl LayerCost {
    pub fn validate(&self) -> Result<()> {
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "layer '{}': sparsity must be in (0, 1], got {}",
                self.layer_name, self.sparsity
            )));
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> u128 {
    debug_assert!(x >= 0.0);
    x.round() as u128
}

/// (forward, backward) FLOPs for one training iteration of one layer.
pub fn layer_training_flops(cost: &LayerCost) -> Result<(u128, u128)> {
    cost.validate()?;
    let c = cost.dense_inference_flops as u128;
    let sc = round_half_up(cost.sparsity * cost.dense_inference_flops as f64);
    let forward = sc;
    let backward = c + if cost.frozen { 0 } else { sc };
    Ok((forward, backward))
}

/// One row of the ledger: inputs plus the derived per-iteration costs.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub layer_name: String,
    pub dense_inference_flops: u64,
    pub sparsity: f64,
    pub frozen: bool,
    pub forward: u128,
    pub backward: u128,
}

/// Per-layer and aggregate training FLOPs for a run.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopsLedger {
    pub rows: Vec<LedgerRow>,
    pub iterations: u64,
    pub per_iteration_total: u128,
    pub run_total: u128,
    /// Sum of dense inference costs, the baseline for ratios.
    pub dense_inference_total: u128,
}

impl FlopsLedger {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,c,sigma,frozen,fwd,bwd\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.layer_name, r.dense_inference_flops, r.sparsity, r.frozen, r.forward, r.backward
            ));
        }
        out
    }

    /// Training cost per iteration relative to one dense inference pass.
    pub fn training_over_dense_inference(&self) -> f64 {
        self.per_iteration_total as f64 / self.dense_inference_total as f64
    }

    /// Training cost relative to fully dense, nothing-frozen training (3x
    /// inference per iteration).
    pub fn training_over_dense_training(&self) -> f64 {
        self.per_iteration_total as f64 / (3.0 * self.dense_inference_total as f64)
    }

    /// JSON summary; totals are decimal strings so 128-bit values survive
    /// any JSON reader exactly.
    pub fn to_json_summary(&self) -> serde_json::Value {
        serde_json::json!({
            "iterations": self.iterations,
            "per_iteration_total": self.per_iteration_total.to_string(),
            "run_total": self.run_total.to_string(),
            "dense_inference_total": self.dense_inference_total.to_string(),
            "training_over_dense_inference": self.training_over_dense_inference(),
            "training_over_dense_training": self.training_over_dense_training(),
        })
    }
}

/// Build the full ledger for one training run.
pub fn model_training_flops(costs: &[LayerCost], iterations: u64) -> Result<FlopsLedger> {
    if costs.is_empty() {
        return Err(Error::InvalidArgument("cost list is empty".into()));
    }
    let mut rows = Vec::with_capacity(costs.len());
    let mut per_iteration_total = 0u128;
    let mut dense_inference_total = 0u128;
    for cost in costs {
        let (forward, backward) = layer_training_flops(cost)?;
        per_iteration_total += forward + backward;
        dense_inference_total += cost.dense_inference_flops as u128;
        rows.push(LedgerRow {
            layer_name: cost.layer_name.clone(),
            dense_inference_flops: cost.dense_inference_flops,
            sparsity: cost.sparsity,
            frozen: cost.frozen,
            forward,
            backward,
        });
    }
    Ok(FlopsLedger {
        rows,
        iterations,
        per_iteration_total,
        run_total: per_iteration_total * iterations as u128,
        dense_inference_total,
    })
}

/// Dense inference FLOPs of one fully-connected layer: a multiply-add
/// counts as 2, plus one bias add and one activation evaluation per output.
pub fn layer_dense_flops(d_in: usize, d_out: usize, batch_size: usize) -> u64 {
    let (d_in, d_out, b) = (d_in as u64, d_out as u64, batch_size as u64);
    2 * d_in * d_out * b + 2 * d_out * b
}

/// Per-layer costs for a model, taking sparsity from `mask` (dense when
/// absent) and frozen flags from `plan` (all active when absent).
pub fn model_costs(
    spec: &ModelSpec,
    batch_size: usize,
    mask: Option<&SparsityMask>,
    plan: Option<&FreezePlan>,
) -> Result<Vec<LayerCost>> {
    if let Some(m) = mask {
        m.check_shapes(spec)?;
    }
    if let Some(p) = plan {
        if p.num_layers() != spec.num_layers() {
            return Err(Error::ShapeMismatch(format!(
                "freeze plan covers {} layers, model has {}",
                p.num_layers(),
                spec.num_layers()
            )));
        }
    }
    (0..spec.num_layers())
        .map(|i| {
            let (d_out, d_in) = spec.layer_shape(i);
            let cost = LayerCost {
                layer_name: spec.layer_name(i).to_string(),
                dense_inference_flops: layer_dense_flops(d_in, d_out, batch_size),
                sparsity: mask.map_or(1.0, |m| m.layer_remaining_fraction(i)),
                frozen: plan.is_some_and(|p| p.is_frozen(spec.layer_name(i))),
            };
            cost.validate().map(|()| cost)
        })
        .collect()
}
