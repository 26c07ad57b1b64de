//! Magnitude pruning: global threshold selection, the iterative
//! prune-while-distilling driver, the random-mask baseline, and cross-model
//! mask transfer.
//!
//! Sparsity bookkeeping counts weight matrices only; biases are never
//! masked. The target sparsity `s` is the fraction of weights REMAINING at
//! the end (s = 0.10 keeps 10%), and each round removes
//! ceil(p * currently_remaining) of the globally smallest magnitudes.

use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor};
use crate::dataset::SyntheticDataset;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParameterStore, TrainConfig};
use crate::rng::SeededRng;
use crate::spectrum::FreezePlan;
use crate::train::{train_loop, Objective};

/// One pruning event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskHistoryEntry {
    pub round: usize,
    /// Largest magnitude removed in this round (the effective cutoff).
    pub global_threshold: f64,
    /// Fraction of maskable weights still active after the round.
    pub remaining_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct MaskLayer {
    name: String,
    shape: Vec<usize>,
    values: Vec<u8>,
}

/// Per-layer binary masks over weight matrices, with the pruning history
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityMask {
    layers: Vec<MaskLayer>,
    pub history: Vec<MaskHistoryEntry>,
}

impl SparsityMask {
    pub fn all_ones(spec: &ModelSpec) -> Self {
        let layers = (0..spec.num_layers())
            .map(|i| {
                let (d_out, d_in) = spec.layer_shape(i);
                MaskLayer {
                    name: spec.layer_name(i).to_string(),
                    shape: vec![d_out, d_in],
                    values: vec![1; d_out * d_in],
                }
            })
            .collect();
        SparsityMask { layers, history: Vec::new() }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_name(&self, i: usize) -> &str {
        &self.layers[i].name
    }

    pub fn layer_shape(&self, i: usize) -> &[usize] {
        &self.layers[i].shape
    }

    pub fn layer_values_at(&self, i: usize) -> &[u8] {
        &self.layers[i].values
    }

    pub fn layer_values(&self) -> impl Iterator<Item = &[u8]> {
        self.layers.iter().map(|l| l.values.as_slice())
    }

    pub fn by_name(&self, name: &str) -> Option<(&[usize], &[u8])> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .map(|l| (l.shape.as_slice(), l.values.as_slice()))
    }

    pub fn set_value(&mut self, layer: usize, offset: usize, value: u8) {
        debug_assert!(value <= 1);
        self.layers[layer].values[offset] = value;
    }

    pub fn zero_all(&mut self) {
        for layer in &mut self.layers {
            layer.values.iter_mut().for_each(|v| *v = 0);
        }
    }

    pub fn ones_count(&self) -> usize {
        self.layers.iter().map(|l| l.values.iter().filter(|&&v| v == 1).count()).sum()
    }

    pub fn total_count(&self) -> usize {
        self.layers.iter().map(|l| l.values.len()).sum()
    }

    pub fn remaining_fraction(&self) -> f64 {
        self.ones_count() as f64 / self.total_count() as f64
    }

    /// Per-layer remaining fraction, for sparsity-aware cost accounting.
    pub fn layer_remaining_fraction(&self, i: usize) -> f64 {
        let l = &self.layers[i];
        l.values.iter().filter(|&&v| v == 1).count() as f64 / l.values.len() as f64
    }

    pub fn check_shapes(&self, spec: &ModelSpec) -> Result<()> {
        if self.layers.len() != spec.num_layers() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} layers, model has {}",
                self.layers.len(),
                spec.num_layers()
            )));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let (d_out, d_in) = spec.layer_shape(i);
            if layer.name != spec.layer_name(i) || layer.shape != [d_out, d_in] {
                return Err(Error::ShapeMismatch(format!(
                    "mask layer {i} ('{}' {:?}) does not match model layer '{}' [{d_out}, {d_in}]",
                    layer.name,
                    layer.shape,
                    spec.layer_name(i)
                )));
            }
        }
        Ok(())
    }

    /// True when every active position of `self` is active in `other`.
    pub fn support_subset_of(&self, other: &SparsityMask) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| {
                    a.values.len() == b.values.len()
                        && a.values.iter().zip(&b.values).all(|(&x, &y)| x == 0 || y == 1)
                })
    }

    /// Serialize as container entries `<layer>.mask` plus history metadata.
    pub fn to_container(&self) -> Result<Container> {
        let mut c = Container::new();
        for layer in &self.layers {
            c.insert(
                format!("{}.mask", layer.name),
                Tensor::from_u8(layer.shape.clone(), &layer.values)?,
            );
        }
        c.set_meta("kind", "mask")?;
        c.set_meta("layer_order", self.layers.iter().map(|l| l.name.clone()).collect::<Vec<_>>())?;
        c.set_meta("history", &self.history)?;
        Ok(c)
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        let order: Vec<String> = c
            .metadata
            .get("layer_order")
            .cloned()
            .ok_or_else(|| Error::Format("mask container missing 'layer_order'".into()))
            .and_then(|v| serde_json::from_value(v).map_err(Error::from))?;
        let history: Vec<MaskHistoryEntry> = match c.metadata.get("history") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => Vec::new(),
        };
        let mut layers = Vec::with_capacity(order.len());
        for name in &order {
            let t = c.require(&format!("{name}.mask"))?;
            let values = t.as_u8()?.to_vec();
            if values.iter().any(|&v| v > 1) {
                return Err(Error::Format(format!("mask '{name}' has non-binary values")));
            }
            layers.push(MaskLayer { name: name.clone(), shape: t.shape().to_vec(), values });
        }
        Ok(SparsityMask { layers, history })
    }
}

/// Settings for one iterative pruning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpConfig {
    /// Fraction of weights remaining when pruning stops.
    pub target_sparsity: f64,
    /// Fraction of remaining weights removed per round.
    pub per_round_rate: f64,
    /// Distillation iterations per round.
    pub train_iterations: usize,
    pub seed: u64,
}

impl Default for ImpConfig {
    fn default() -> Self {
        ImpConfig { target_sparsity: 0.10, per_round_rate: 0.10, train_iterations: 200, seed: 42 }
    }
}

impl ImpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_sparsity > 0.0 && self.target_sparsity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target_sparsity must be in (0, 1], got {}",
                self.target_sparsity
            )));
        }
        if !(self.per_round_rate > 0.0 && self.per_round_rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "per_round_rate must be in (0, 1), got {}",
                self.per_round_rate
            )));
        }
        if self.train_iterations == 0 {
            return Err(Error::InvalidArgument("train_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Zero out the ceil(p * remaining) smallest-magnitude active weights,
/// pooled across all layers. Ties break deterministically: smaller
/// magnitude first, then lower layer index, then lower flat offset.
pub fn global_magnitude_prune(
    params: &ParameterStore,
    mask: &SparsityMask,
    p: f64,
) -> Result<SparsityMask> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("prune rate must be in (0, 1), got {p}")));
    }
    if params.num_layers() != mask.num_layers() {
        return Err(Error::ShapeMismatch("mask layer count differs from params".into()));
    }

    let mut pool: Vec<(f64, usize, usize)> = Vec::new();
    for layer in 0..mask.num_layers() {
        let w = params.weights(layer);
        let m = mask.layer_values_at(layer);
        if w.len() != m.len() {
            return Err(Error::ShapeMismatch(format!("layer {layer} mask/weight size mismatch")));
        }
        for (offset, (&wi, &mi)) in w.iter().zip(m).enumerate() {
            if mi == 1 {
                pool.push((wi.abs(), layer, offset));
            }
        }
    }
    let remaining = pool.len();
    if remaining == 0 {
        return Err(Error::InvalidArgument("no active weights left to prune".into()));
    }

    let k = ((p * remaining as f64).ceil() as usize).min(remaining);
    pool.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut next = mask.clone();
    let mut threshold = 0.0f64;
    for &(magnitude, layer, offset) in pool.iter().take(k) {
        next.set_value(layer, offset, 0);
        threshold = threshold.max(magnitude);
    }
    let round = next.history.last().map_or(1, |h| h.round + 1);
    let remaining_fraction = next.remaining_fraction();
    next.history.push(MaskHistoryEntry { round, global_threshold: threshold, remaining_fraction });
    Ok(next)
}

/// Snapshot of one pruning round, handed to the observer before the round's
/// result is committed.
pub struct ImpRound<'a> {
    pub round: usize,
    /// Weights after this round's training, before pruning.
    pub pre_prune: &'a ParameterStore,
    pub mask_before: &'a SparsityMask,
    pub mask_after: &'a SparsityMask,
    /// Training loss at each iteration of this round.
    pub round_losses: &'a [f64],
}

/// Iterative magnitude pruning: alternate `train_iterations` steps of
/// distillation-only training with one global pruning event, until the
/// remaining fraction reaches the target. Weights are never rewound; each
/// round resumes from the current parameters.
///
/// The learning rate and batch size come from `train`; the per-round
/// iteration count comes from `imp` (the `iterations` field of `train` is
/// ignored here).
pub fn imp_run(
    spec: &ModelSpec,
    params: ParameterStore,
    data: &SyntheticDataset,
    imp: &ImpConfig,
    train: &TrainConfig,
    mut observer: impl FnMut(&ImpRound<'_>),
) -> Result<(SparsityMask, ParameterStore)> {
    imp.validate()?;
    train.validate()?;
    params.check_shapes(spec)?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("distillation dataset is empty".into()));
    }

    let mut params = params;
    let mut mask = SparsityMask::all_ones(spec);
    let plan = FreezePlan::all_active(spec.layer_names().to_vec());
    let root = SeededRng::new(imp.seed);
    let mut round = 0usize;

    while mask.remaining_fraction() > imp.target_sparsity {
        round += 1;
        let mut rng = root.derive(round as u64);
        let curve = train_loop(
            spec,
            &mut params,
            &mask,
            &plan,
            data,
            Objective::DistillOnly,
            imp.train_iterations,
            train.learning_rate,
            train.batch_size,
            &mut rng,
            None,
        )?;
        let next = global_magnitude_prune(&params, &mask, imp.per_round_rate)?;
        observer(&ImpRound {
            round,
            pre_prune: &params,
            mask_before: &mask,
            mask_after: &next,
            round_losses: &curve,
        });
        mask = next;
        params.apply_mask(&mask)?;
    }
    Ok((mask, params))
}

/// Random mask at the given remaining fraction: each layer keeps exactly
/// round(sparsity * layer_size) uniformly chosen positions.
pub fn random_mask(spec: &ModelSpec, sparsity: f64, seed: u64) -> Result<SparsityMask> {
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sparsity must be in (0, 1], got {sparsity}"
        )));
    }
    let root = SeededRng::new(seed);
    let mut mask = SparsityMask::all_ones(spec);
    for layer in 0..mask.num_layers() {
        let size = mask.layer_values_at(layer).len();
        let keep = (sparsity * size as f64).round() as usize;
        let mut indices: Vec<usize> = (0..size).collect();
        root.derive(layer as u64).shuffle(&mut indices);
        for &idx in &indices[keep..] {
            mask.set_value(layer, idx, 0);
        }
    }
    Ok(mask)
}

/// Outcome of grafting a mask onto a (possibly different) architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub matched: Vec<String>,
    pub unmatched: Vec<String>,
    /// matched / total target layers.
    pub coverage: f64,
}

/// Graft `mask` onto `target`: layers matching by name AND shape get the
/// source mask verbatim, everything else stays dense (all ones). A name
/// match with a different shape is ambiguous and rejected.
pub fn transfer_mask(
    mask: &SparsityMask,
    target: &ModelSpec,
) -> Result<(SparsityMask, TransferReport)> {
    let mut out = SparsityMask::all_ones(target);
    let mut matched = Vec::new();
    let mut unmatched = Vec::new();
    for i in 0..target.num_layers() {
        let name = target.layer_name(i);
        let (d_out, d_in) = target.layer_shape(i);
        match mask.by_name(name) {
            Some((shape, values)) => {
                if shape != [d_out, d_in] {
                    return Err(Error::ShapeMismatch(format!(
                        "layer '{name}' exists in both models with different shapes \
                         ({shape:?} vs [{d_out}, {d_in}])"
                    )));
                }
                out.layers[i].values.copy_from_slice(values);
                matched.push(name.to_string());
            }
            None => unmatched.push(name.to_string()),
        }
    }
    let coverage = matched.len() as f64 / target.num_layers() as f64;
    Ok((out, TransferReport { matched, unmatched, coverage }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, DatasetConfig};
    use crate::model::Activation;

    fn two_layer_store(a: &[f64], b: &[f64]) -> (ModelSpec, ParameterStore, SparsityMask) {
        // 1-wide layers so flat weight vectors map directly onto shapes.
        let spec = ModelSpec::new(
            vec![a.len(), 1, b.len()],
            vec![Activation::Tanh],
            vec!["la".into(), "lb".into()],
        )
        .unwrap();
        let mut params = ParameterStore::init(&spec, 0);
        params.weights_mut(0).copy_from_slice(a);
        params.weights_mut(1).copy_from_slice(b);
        let mask = SparsityMask::all_ones(&spec);
        (spec, params, mask)
    }

    #[test]
    fn prune_single_layer_by_hand() {
        let spec = ModelSpec::new(vec![4, 1], vec![], vec!["only".into()]).unwrap();
        let mut params = ParameterStore::init(&spec, 0);
        params.weights_mut(0).copy_from_slice(&[0.1, -0.5, 0.3, 0.2]);
        let mask = SparsityMask::all_ones(&spec);
        let pruned = global_magnitude_prune(&params, &mask, 0.5).unwrap();
        assert_eq!(pruned.layer_values_at(0), &[0, 1, 1, 0]);
        assert_eq!(pruned.history.len(), 1);
        assert_eq!(pruned.history[0].round, 1);
        assert!((pruned.history[0].global_threshold - 0.2).abs() < 1e-15);
        assert!((pruned.history[0].remaining_fraction - 0.5).abs() < 1e-15);
    }

    #[test]
    fn prune_pools_across_layers() {
        let (_, params, mask) = two_layer_store(&[1.0, 0.01], &[0.5, 0.02]);
        let pruned = global_magnitude_prune(&params, &mask, 0.5).unwrap();
        assert_eq!(pruned.layer_values_at(0), &[1, 0]);
        assert_eq!(pruned.layer_values_at(1), &[1, 0]);
    }

    #[test]
    fn prune_minimum_is_one_weight() {
        let (_, params, mask) = two_layer_store(&[1.0, 0.01, 0.8], &[0.5, 0.9, 0.7]);
        let pruned = global_magnitude_prune(&params, &mask, 0.01).unwrap();
        assert_eq!(mask.ones_count() - pruned.ones_count(), 1);
        assert_eq!(pruned.layer_values_at(0), &[1, 0, 1]);
    }

    #[test]
    fn prune_tie_break_prefers_lower_layer_and_offset() {
        let (_, params, mask) = two_layer_store(&[0.3, 0.3], &[0.3, 0.3]);
        let pruned = global_magnitude_prune(&params, &mask, 0.26).unwrap();
        // ceil(0.26 * 4) = 2: both zeros land in the first layer.
        assert_eq!(pruned.layer_values_at(0), &[0, 0]);
        assert_eq!(pruned.layer_values_at(1), &[1, 1]);
    }

    #[test]
    fn prune_errors_when_nothing_active() {
        let (_, params, mut mask) = two_layer_store(&[1.0, 2.0], &[3.0, 4.0]);
        mask.zero_all();
        assert!(global_magnitude_prune(&params, &mask, 0.5).is_err());
        assert!(global_magnitude_prune(&params, &mask, 1.5).is_err());
    }

    #[test]
    fn threshold_separates_survivors_from_pruned() {
        let mut rng = SeededRng::new(50);
        let spec = ModelSpec::with_default_names(vec![6, 8, 4], vec![Activation::Tanh]).unwrap();
        let mut params = ParameterStore::init(&spec, 51);
        for layer in 0..2 {
            for w in params.weights_mut(layer) {
                *w = rng.standard_normal();
            }
        }
        let mask = SparsityMask::all_ones(&spec);
        let pruned = global_magnitude_prune(&params, &mask, 0.3).unwrap();
        let mut survivor_min = f64::INFINITY;
        let mut pruned_max = 0.0f64;
        for layer in 0..2 {
            for (offset, &w) in params.weights(layer).iter().enumerate() {
                if pruned.layer_values_at(layer)[offset] == 1 {
                    survivor_min = survivor_min.min(w.abs());
                } else {
                    pruned_max = pruned_max.max(w.abs());
                }
            }
        }
        assert!(survivor_min >= pruned_max);
        assert!((pruned.history[0].global_threshold - pruned_max).abs() < 1e-15);
    }

    fn imp_setup(seed: u64) -> (ModelSpec, ParameterStore, SyntheticDataset) {
        let spec =
            ModelSpec::with_default_names(vec![6, 12, 4], vec![Activation::Tanh]).unwrap();
        let params = ParameterStore::init(&spec, seed);
        let data = generate(&DatasetConfig {
            n_train: 64,
            n_heldout: 32,
            n_categories: 3,
            d_in: 6,
            d_embed: 4,
            noise: 0.2,
            seed: seed + 1,
        })
        .unwrap();
        (spec, params, data)
    }

    #[test]
    fn imp_reaches_target_in_expected_rounds() {
        let (spec, params, data) = imp_setup(60);
        let imp = ImpConfig {
            target_sparsity: 0.25,
            per_round_rate: 0.5,
            train_iterations: 5,
            seed: 3,
        };
        let train = TrainConfig { learning_rate: 0.01, batch_size: 8, ..TrainConfig::default() };
        let mut rounds = 0;
        let (mask, final_params) =
            imp_run(&spec, params, &data, &imp, &train, |_| rounds += 1).unwrap();
        assert_eq!(rounds, 2);
        assert_eq!(mask.history.len(), 2);
        assert!((mask.remaining_fraction() - 0.25).abs() < 1e-12);
        // Returned weights honor the final mask exactly.
        for layer in 0..spec.num_layers() {
            for (w, &m) in final_params.weights(layer).iter().zip(mask.layer_values_at(layer)) {
                if m == 0 {
                    assert_eq!(*w, 0.0);
                }
            }
        }
    }

    #[test]
    fn imp_with_target_one_is_a_no_op() {
        let (spec, params, data) = imp_setup(61);
        let imp = ImpConfig { target_sparsity: 1.0, ..ImpConfig::default() };
        let train = TrainConfig::default();
        let before = params.clone();
        let (mask, after) = imp_run(&spec, params, &data, &imp, &train, |_| {}).unwrap();
        assert_eq!(mask.ones_count(), mask.total_count());
        assert!(mask.history.is_empty());
        assert_eq!(after, before);
    }

    #[test]
    fn imp_masks_shrink_monotonically() {
        let (spec, params, data) = imp_setup(62);
        let imp = ImpConfig {
            target_sparsity: 0.4,
            per_round_rate: 0.25,
            train_iterations: 3,
            seed: 4,
        };
        let train = TrainConfig { learning_rate: 0.01, batch_size: 8, ..TrainConfig::default() };
        let mut ok = true;
        imp_run(&spec, params, &data, &imp, &train, |round| {
            ok &= round.mask_after.support_subset_of(round.mask_before);
        })
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn imp_is_deterministic() {
        let run = || {
            let (spec, params, data) = imp_setup(63);
            let imp = ImpConfig {
                target_sparsity: 0.5,
                per_round_rate: 0.3,
                train_iterations: 4,
                seed: 5,
            };
            let train =
                TrainConfig { learning_rate: 0.01, batch_size: 8, ..TrainConfig::default() };
            imp_run(&spec, params, &data, &imp, &train, |_| {}).unwrap()
        };
        let (mask_a, params_a) = run();
        let (mask_b, params_b) = run();
        assert_eq!(mask_a, mask_b);
        assert_eq!(params_a, params_b);
    }

    #[test]
    fn random_mask_counts_and_determinism() {
        let spec = ModelSpec::with_default_names(
            vec![10, 100, 10],
            vec![Activation::Relu],
        )
        .unwrap();
        let m = random_mask(&spec, 0.1, 7).unwrap();
        assert_eq!(
            m.layer_values_at(0).iter().filter(|&&v| v == 1).count(),
            100
        );
        assert_eq!(
            m.layer_values_at(1).iter().filter(|&&v| v == 1).count(),
            100
        );
        assert_eq!(m, random_mask(&spec, 0.1, 7).unwrap());
        assert_ne!(m, random_mask(&spec, 0.1, 8).unwrap());

        let full = random_mask(&spec, 1.0, 7).unwrap();
        assert_eq!(full.ones_count(), full.total_count());
    }

    #[test]
    fn transfer_identity_and_partial() {
        let spec = ModelSpec::with_default_names(vec![4, 6, 3], vec![Activation::Tanh]).unwrap();
        let mut mask = SparsityMask::all_ones(&spec);
        mask.set_value(0, 3, 0);
        mask.set_value(1, 1, 0);

        let (same, report) = transfer_mask(&mask, &spec).unwrap();
        assert_eq!(same.layers, mask.layers);
        assert_eq!(report.coverage, 1.0);
        assert!(report.unmatched.is_empty());

        // Target adds a layer; fc1 changes shape context: use a new name so
        // shapes still match for fc0.
        let target = ModelSpec::new(
            vec![4, 6, 5, 3],
            vec![Activation::Tanh, Activation::Tanh],
            vec!["fc0".into(), "mid".into(), "out".into()],
        )
        .unwrap();
        let (transferred, report) = transfer_mask(&mask, &target).unwrap();
        assert_eq!(transferred.layer_values_at(0), mask.layer_values_at(0));
        assert!(transferred.layer_values_at(1).iter().all(|&v| v == 1));
        assert!(transferred.layer_values_at(2).iter().all(|&v| v == 1));
        assert_eq!(report.matched, vec!["fc0".to_string()]);
        assert_eq!(report.unmatched, vec!["mid".to_string(), "out".to_string()]);
        assert!((report.coverage - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn transfer_rejects_shape_collision() {
        let spec = ModelSpec::with_default_names(vec![4, 6, 3], vec![Activation::Tanh]).unwrap();
        let mask = SparsityMask::all_ones(&spec);
        let target = ModelSpec::with_default_names(vec![4, 8, 3], vec![Activation::Tanh]).unwrap();
        assert!(transfer_mask(&mask, &target).is_err());
    }

    #[test]
    fn mask_container_round_trip_is_exact() {
        let spec = ModelSpec::with_default_names(vec![5, 7, 2], vec![Activation::Relu]).unwrap();
        let mut params = ParameterStore::init(&spec, 70);
        let mut rng = SeededRng::new(71);
        for layer in 0..2 {
            for w in params.weights_mut(layer) {
                *w = rng.standard_normal();
            }
        }
        let mask0 = SparsityMask::all_ones(&spec);
        let mask1 = global_magnitude_prune(&params, &mask0, 0.3).unwrap();
        let mask2 = global_magnitude_prune(&params, &mask1, 0.3).unwrap();

        let c = mask2.to_container().unwrap();
        let bytes = c.to_bytes().unwrap();
        let back = SparsityMask::from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
        assert_eq!(back, mask2);
        assert_eq!(back.history.len(), 2);

        // Serialization is stable byte-for-byte.
        assert_eq!(back.to_container().unwrap().to_bytes().unwrap(), bytes);
    }

    #[test]
    fn mask_container_rejects_non_binary() {
        let spec = ModelSpec::new(vec![2, 1], vec![], vec!["w".into()]).unwrap();
        let mask = SparsityMask::all_ones(&spec);
        let mut c = mask.to_container().unwrap();
        c.insert("w.mask", Tensor::from_u8(vec![1, 2], &[1, 2]).unwrap());
        assert!(SparsityMask::from_container(&c).is_err());
    }
}
