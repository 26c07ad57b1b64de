//! End-to-end run orchestration.
//!
//! A run is a directory of files keyed by fixed names; each stage consumes
//! only the serialized outputs of earlier stages, never in-memory state, so
//! masks and checkpoints are transferable artifacts by construction:
//!
//! 1. prune: dataset + fresh weights + iterative magnitude pruning under
//!    the distillation loss -> mask, pruned checkpoint, round metrics.
//! 2. finetune: heavy-tail analysis of the masked weights picks layers to
//!    freeze; classification + distillation training on the rest.
//! 3. transfer: graft a mask (and matching weights) onto a different
//!    architecture, then run the same fine-tune.
//! 4. report: spectrum + FLOPs + feature-similarity exports and a manifest
//!    of content digests over everything produced.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::container::{write_atomic, Container};
use crate::dataset::{generate, SyntheticDataset};
use crate::distill::{linear_cka, EmbeddingBatch};
use crate::error::{Error, Result};
use crate::flops::{model_costs, model_training_flops, FlopsLedger};
use crate::linalg::DenseMatrix;
use crate::model::{ModelSpec, ParameterStore};
use crate::pruner::{imp_run, random_mask, transfer_mask, MaskHistoryEntry, SparsityMask, TransferReport};
use crate::rng::SeededRng;
use crate::spectrum::{
    alpha_drift_report, alpha_snapshot, analyze_model, build_report, make_freeze_plan,
    DriftReport, FreezePlan,
};
use crate::train::{
    heldout_accuracy, heldout_cross_entropy, heldout_distill_loss, heldout_layer_features,
    train_loop, Objective,
};

/// Weight of the distillation term in the fine-tune objective.
pub const LAMBDA_KD: f64 = 1.0;

pub const CONFIG_FILE: &str = "config.json";
pub const MASK_FILE: &str = "mask.spwt";
pub const PRUNED_FILE: &str = "pruned.spwt";
pub const PRUNE_METRICS_FILE: &str = "prune_metrics.json";
pub const FREEZE_PLAN_FILE: &str = "freeze_plan.json";
pub const FINETUNED_FILE: &str = "finetuned.spwt";
pub const FINETUNE_METRICS_FILE: &str = "finetune_metrics.json";
pub const TRANSFER_REPORT_FILE: &str = "transfer_report.json";
pub const SPECTRUM_CSV_FILE: &str = "spectrum.csv";
pub const FLOPS_CSV_FILE: &str = "flops.csv";
pub const FLOPS_JSON_FILE: &str = "flops.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Files a report refuses to run without.
const REQUIRED_FOR_REPORT: [&str; 4] =
    [MASK_FILE, FREEZE_PLAN_FILE, FINETUNED_FILE, FINETUNE_METRICS_FILE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneMetrics {
    pub rounds: usize,
    pub final_remaining_fraction: f64,
    /// Mean training loss of each round's distillation block.
    pub round_mean_train_loss: Vec<f64>,
    /// Held-out distillation loss right after each round's pruning event.
    pub round_heldout_distill_loss: Vec<f64>,
    pub history: Vec<MaskHistoryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneMetrics {
    pub loss_curve: Vec<f64>,
    pub final_heldout_accuracy: f64,
    pub final_heldout_cross_entropy: f64,
    pub final_heldout_distill_loss: f64,
    /// Iterations completed at each alpha snapshot (0 = before training).
    pub snapshot_iterations: Vec<usize>,
    /// Per snapshot, per layer; None where the tail fit failed.
    pub alpha_snapshots: Vec<Vec<Option<f64>>>,
    pub drift: DriftReport,
}

/// Digest index over one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    /// File name -> hex SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
    pub metrics: serde_json::Value,
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn prepare_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    write_atomic(&cfg.output_dir.join(CONFIG_FILE), cfg.to_json().as_bytes())?;
    Ok(cfg.output_dir.clone())
}

/// Iterative magnitude pruning from fresh weights; writes the mask, the
/// pruned checkpoint, and per-round metrics.
pub fn stage_prune(cfg: &ExperimentConfig) -> Result<PruneMetrics> {
    let dir = prepare_dir(cfg)?;
    let data = generate(&cfg.dataset)?;
    let params = ParameterStore::init(&cfg.model, cfg.init_seed);

    let mut round_mean = Vec::new();
    let mut round_heldout = Vec::new();
    let (mask, params) = imp_run(&cfg.model, params, &data, &cfg.imp, &cfg.finetune, |round| {
        let mean =
            round.round_losses.iter().sum::<f64>() / round.round_losses.len().max(1) as f64;
        round_mean.push(mean);
        // Evaluating pre-prune weights under the post-prune mask gives the
        // freshly pruned model.
        round_heldout.push(
            heldout_distill_loss(&cfg.model, round.pre_prune, round.mask_after, &data)
                .expect("shapes are consistent during a run"),
        );
    })?;

    let mut mask_container = mask.to_container()?;
    mask_container.set_meta("imp_config", &cfg.imp)?;
    mask_container.write_to(&dir.join(MASK_FILE))?;
    params.to_container(&cfg.model)?.write_to(&dir.join(PRUNED_FILE))?;

    let metrics = PruneMetrics {
        rounds: mask.history.len(),
        final_remaining_fraction: mask.remaining_fraction(),
        round_mean_train_loss: round_mean,
        round_heldout_distill_loss: round_heldout,
        history: mask.history.clone(),
    };
    write_json(&dir.join(PRUNE_METRICS_FILE), &metrics)?;
    Ok(metrics)
}

/// Load a mask container, ignoring extra metadata.
pub fn load_mask(path: &Path) -> Result<SparsityMask> {
    SparsityMask::from_container(&Container::read_from(path)?)
}

/// Load a checkpoint container as (spec, weights).
pub fn load_checkpoint(path: &Path) -> Result<(ModelSpec, ParameterStore)> {
    ParameterStore::from_container(&Container::read_from(path)?)
}

/// Shared fine-tune body: freeze plan from the masked weights' tail
/// exponents, then classification + distillation training with periodic
/// alpha snapshots. Writes the plan, the final checkpoint, and metrics.
fn finetune_body(
    cfg: &ExperimentConfig,
    dir: &Path,
    mut params: ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<FinetuneMetrics> {
    let spec = &cfg.model;
    let analysis = analyze_model(spec, &params, mask)?;
    let fits: Vec<(String, f64)> = analysis
        .iter()
        .map(|(esd, fit)| (esd.layer_name.clone(), fit.alpha))
        .collect();
    let plan = make_freeze_plan(&fits, cfg.freeze_ratio)?;
    write_json(&dir.join(FREEZE_PLAN_FILE), &plan)?;

    let t = cfg.finetune.iterations;
    let step = (t / 5).max(1);
    let mut snapshot_iterations = vec![0usize];
    let mut snapshots =
        vec![alpha_snapshot(spec, &params, mask).expect("shapes are consistent during a run")];
    {
        let mut hook = |iter: usize, p: &ParameterStore| {
            if (iter + 1) % step == 0 {
                snapshot_iterations.push(iter + 1);
                snapshots.push(
                    alpha_snapshot(spec, p, mask).expect("shapes are consistent during a run"),
                );
            }
        };
        let mut rng = SeededRng::new(cfg.finetune.seed);
        let curve = train_loop(
            spec,
            &mut params,
            mask,
            &plan,
            data,
            Objective::Classification { lambda_kd: LAMBDA_KD },
            t,
            cfg.finetune.learning_rate,
            cfg.finetune.batch_size,
            &mut rng,
            Some(&mut hook),
        )?;
        params.to_container(spec)?.write_to(&dir.join(FINETUNED_FILE))?;

        let drift = alpha_drift_report(spec.layer_names(), &snapshots)?;
        let metrics = FinetuneMetrics {
            loss_curve: curve,
            final_heldout_accuracy: heldout_accuracy(spec, &params, mask, data)?,
            final_heldout_cross_entropy: heldout_cross_entropy(spec, &params, mask, data)?,
            final_heldout_distill_loss: heldout_distill_loss(spec, &params, mask, data)?,
            snapshot_iterations,
            alpha_snapshots: snapshots,
            drift,
        };
        write_json(&dir.join(FINETUNE_METRICS_FILE), &metrics)?;
        Ok(metrics)
    }
}

/// Fine-tune the pruned checkpoint under its mask.
pub fn stage_finetune(
    cfg: &ExperimentConfig,
    mask_path: &Path,
    checkpoint_path: &Path,
) -> Result<FinetuneMetrics> {
    let dir = prepare_dir(cfg)?;
    let mask = load_mask(mask_path)?;
    let (spec, params) = load_checkpoint(checkpoint_path)?;
    if spec != cfg.model {
        return Err(Error::ShapeMismatch(
            "checkpoint architecture differs from the configured model".into(),
        ));
    }
    mask.check_shapes(&cfg.model)?;
    let data = generate(&cfg.dataset)?;
    finetune_body(cfg, &dir, params, &mask, &data)
}

/// Graft a source run's mask and matching weights onto the target
/// architecture in `cfg`, then fine-tune. Unmatched layers start dense
/// with fresh weights.
pub fn stage_transfer(
    cfg: &ExperimentConfig,
    source_mask_path: &Path,
    source_checkpoint_path: &Path,
) -> Result<(TransferReport, FinetuneMetrics)> {
    let dir = prepare_dir(cfg)?;
    let source_mask = load_mask(source_mask_path)?;
    let (source_spec, source_params) = load_checkpoint(source_checkpoint_path)?;
    let (mask, report) = transfer_mask(&source_mask, &cfg.model)?;

    let mut params = ParameterStore::init(&cfg.model, cfg.init_seed);
    for name in &report.matched {
        let target_idx = cfg.model.layer_index(name).expect("matched layers exist in target");
        let source_idx = match source_spec.layer_index(name) {
            Some(i) => i,
            None => {
                return Err(Error::ShapeMismatch(format!(
                    "mask layer '{name}' is missing from the source checkpoint"
                )))
            }
        };
        if source_spec.layer_shape(source_idx) != cfg.model.layer_shape(target_idx) {
            return Err(Error::ShapeMismatch(format!(
                "layer '{name}' has different shapes in source checkpoint and target model"
            )));
        }
        params.weights_mut(target_idx).copy_from_slice(source_params.weights(source_idx));
        params.bias_mut(target_idx).copy_from_slice(source_params.bias(source_idx));
    }

    mask.to_container()?.write_to(&dir.join(MASK_FILE))?;
    write_json(&dir.join(TRANSFER_REPORT_FILE), &report)?;

    let data = generate(&cfg.dataset)?;
    let metrics = finetune_body(cfg, &dir, params, &mask, &data)?;
    Ok((report, metrics))
}

/// Aggregate a completed run directory: spectrum and FLOPs exports,
/// feature similarity to the teacher, combined metrics, and a manifest of
/// content digests.
pub fn stage_report(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();

    let missing: Vec<String> = REQUIRED_FOR_REPORT
        .iter()
        .filter(|name| !dir.join(name).exists())
        .map(|name| name.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }

    let mask = load_mask(&dir.join(MASK_FILE))?;
    let (spec, params) = load_checkpoint(&dir.join(FINETUNED_FILE))?;
    if spec != cfg.model {
        return Err(Error::ShapeMismatch(
            "finetuned checkpoint architecture differs from the configured model".into(),
        ));
    }
    let plan: FreezePlan = read_json(&dir.join(FREEZE_PLAN_FILE))?;
    let data = generate(&cfg.dataset)?;

    let analysis = analyze_model(&spec, &params, &mask)?;
    let spectrum = build_report(&analysis, &plan);
    write_atomic(&dir.join(SPECTRUM_CSV_FILE), spectrum.to_csv().as_bytes())?;

    let costs = model_costs(&spec, cfg.finetune.batch_size, Some(&mask), Some(&plan))?;
    let ledger: FlopsLedger = model_training_flops(&costs, cfg.finetune.iterations as u64)?;
    write_atomic(&dir.join(FLOPS_CSV_FILE), ledger.to_csv().as_bytes())?;
    write_json(&dir.join(FLOPS_JSON_FILE), &ledger.to_json_summary())?;

    let teacher = embeddings_as_matrix(&data.heldout.teacher)?;
    let features = heldout_layer_features(&spec, &params, &mask, &data)?;
    let cka_per_layer: Vec<f64> = features
        .iter()
        .map(|f| linear_cka(f, &teacher))
        .collect::<Result<_>>()?;
    let cka_mean = cka_per_layer.iter().sum::<f64>() / cka_per_layer.len() as f64;

    let finetune_metrics: serde_json::Value = read_json(&dir.join(FINETUNE_METRICS_FILE))?;
    let prune_metrics: Option<serde_json::Value> =
        maybe_read_json(&dir.join(PRUNE_METRICS_FILE))?;
    let transfer_report: Option<serde_json::Value> =
        maybe_read_json(&dir.join(TRANSFER_REPORT_FILE))?;

    let metrics = serde_json::json!({
        "config_hash": cfg.hash(),
        "prune": prune_metrics,
        "transfer": transfer_report,
        "finetune": finetune_metrics,
        "cka": { "per_layer": cka_per_layer, "mean": cka_mean },
        "flops": ledger.to_json_summary(),
    });
    write_json(&dir.join(METRICS_FILE), &metrics)?;

    let mut files = BTreeMap::new();
    let known = [
        CONFIG_FILE,
        MASK_FILE,
        PRUNED_FILE,
        PRUNE_METRICS_FILE,
        FREEZE_PLAN_FILE,
        FINETUNED_FILE,
        FINETUNE_METRICS_FILE,
        TRANSFER_REPORT_FILE,
        SPECTRUM_CSV_FILE,
        FLOPS_CSV_FILE,
        FLOPS_JSON_FILE,
        METRICS_FILE,
    ];
    for name in known {
        let path = dir.join(name);
        if path.exists() {
            files.insert(name.to_string(), sha256_file(&path)?);
        }
    }
    let manifest = RunManifest { config_hash: cfg.hash(), files, metrics };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn maybe_read_json(path: &Path) -> Result<Option<serde_json::Value>> {
    if path.exists() {
        Ok(Some(read_json(path)?))
    } else {
        Ok(None)
    }
}

fn embeddings_as_matrix(e: &EmbeddingBatch) -> Result<DenseMatrix> {
    DenseMatrix::new(e.len(), e.dim(), e.data().to_vec())
}

/// Re-check every file a manifest lists against the directory contents.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest> {
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.exists() {
        return Err(Error::Incomplete { missing: vec![MANIFEST_FILE.to_string()] });
    }
    let manifest: RunManifest = read_json(&manifest_path)?;
    let missing: Vec<String> = manifest
        .files
        .keys()
        .filter(|name| !dir.join(name.as_str()).exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    for (name, digest) in &manifest.files {
        let actual = sha256_file(&dir.join(name))?;
        if actual != *digest {
            return Err(Error::Format(format!(
                "digest mismatch for '{name}': manifest {digest}, file {actual}"
            )));
        }
    }
    Ok(manifest)
}

/// Run prune, finetune, and report in sequence on one config.
pub fn run_all(cfg: &ExperimentConfig) -> Result<RunManifest> {
    stage_prune(cfg)?;
    stage_finetune(
        cfg,
        &cfg.output_dir.join(MASK_FILE),
        &cfg.output_dir.join(PRUNED_FILE),
    )?;
    stage_report(cfg)
}

/// One paired comparison: the same derived seed feeds both arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub seed: u64,
    pub pruned_arm: f64,
    pub random_arm: f64,
}

const BASELINE_STREAM: u64 = 0x42415345;

/// Mask-quality comparison: arm A takes the mask found by iterative
/// pruning, arm B a random mask of equal density. Both train
/// distillation-only from the SAME initial weights for the same iteration
/// count (the pruning run's total budget), so only the mask structure
/// differs. Returns held-out distillation losses (lower is better).
pub fn imp_vs_random_distill(
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<PairedOutcome>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = cfg.with_seed(seed);
            let data = generate(&cfg.dataset)?;
            let init = ParameterStore::init(&cfg.model, cfg.init_seed);

            let (imp_mask, _) =
                imp_run(&cfg.model, init.clone(), &data, &cfg.imp, &cfg.finetune, |_| {})?;
            let rand_mask =
                random_mask(&cfg.model, imp_mask.remaining_fraction(), cfg.imp.seed)?;
            let total_iters = imp_mask.history.len() * cfg.imp.train_iterations;

            let score = |mask: &SparsityMask| -> Result<f64> {
                let mut params = init.clone();
                params.apply_mask(mask)?;
                let plan = FreezePlan::all_active(cfg.model.layer_names().to_vec());
                let mut rng = SeededRng::new(cfg.imp.seed).derive(BASELINE_STREAM);
                train_loop(
                    &cfg.model,
                    &mut params,
                    mask,
                    &plan,
                    &data,
                    Objective::DistillOnly,
                    total_iters,
                    cfg.finetune.learning_rate,
                    cfg.finetune.batch_size,
                    &mut rng,
                    None,
                )?;
                heldout_distill_loss(&cfg.model, &params, mask, &data)
            };
            let pruned_arm = score(&imp_mask)?;
            let random_arm = score(&rand_mask)?;
            Ok(PairedOutcome { seed, pruned_arm, random_arm })
        })
        .collect()
}

/// Arm A: pruned checkpoint + tail-exponent freezing at `cfg.freeze_ratio`,
/// then the standard fine-tune. Arm B: random mask of equal density on
/// fresh weights, nothing frozen, same fine-tune budget. Returns held-out
/// classification accuracies (higher is better).
pub fn imp_vs_random_accuracy(
    cfg: &ExperimentConfig,
    seeds: &[u64],
) -> Result<Vec<PairedOutcome>> {
    seeds
        .iter()
        .map(|&seed| {
            let cfg = cfg.with_seed(seed);
            let data = generate(&cfg.dataset)?;
            let init = ParameterStore::init(&cfg.model, cfg.init_seed);

            let (imp_mask, imp_params) =
                imp_run(&cfg.model, init.clone(), &data, &cfg.imp, &cfg.finetune, |_| {})?;
            let pruned_arm =
                finetune_eval(&cfg, imp_params, &imp_mask, &data, cfg.freeze_ratio)?;

            let rand_mask =
                random_mask(&cfg.model, imp_mask.remaining_fraction(), cfg.imp.seed)?;
            let mut rand_params = ParameterStore::init(&cfg.model, cfg.init_seed);
            rand_params.apply_mask(&rand_mask)?;
            let random_arm = finetune_eval(&cfg, rand_params, &rand_mask, &data, 0.0)?;
            Ok(PairedOutcome { seed, pruned_arm, random_arm })
        })
        .collect()
}

/// Fine-tune in memory and return final held-out accuracy.
fn finetune_eval(
    cfg: &ExperimentConfig,
    mut params: ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
    freeze_ratio: f64,
) -> Result<f64> {
    let plan = if freeze_ratio > 0.0 {
        let analysis = analyze_model(&cfg.model, &params, mask)?;
        let fits: Vec<(String, f64)> = analysis
            .iter()
            .map(|(esd, fit)| (esd.layer_name.clone(), fit.alpha))
            .collect();
        make_freeze_plan(&fits, freeze_ratio)?
    } else {
        FreezePlan::all_active(cfg.model.layer_names().to_vec())
    };
    let mut rng = SeededRng::new(cfg.finetune.seed);
    train_loop(
        &cfg.model,
        &mut params,
        mask,
        &plan,
        data,
        Objective::Classification { lambda_kd: LAMBDA_KD },
        cfg.finetune.iterations,
        cfg.finetune.learning_rate,
        cfg.finetune.batch_size,
        &mut rng,
        None,
    )?;
    heldout_accuracy(&cfg.model, &params, mask, data)
}

/// Arm A: mask and matching weights from a source pruning run grafted onto
/// the target model, fine-tuned. Arm B: random mask of equal density on
/// fresh target weights, identical fine-tune. Returns held-out
/// distillation losses on the target (lower is better).
pub fn transfer_vs_random_distill(
    source_cfg: &ExperimentConfig,
    target_model: &ModelSpec,
    seeds: &[u64],
) -> Result<Vec<PairedOutcome>> {
    seeds
        .iter()
        .map(|&seed| {
            let source = source_cfg.with_seed(seed);
            let mut target = source.clone();
            target.model = target_model.clone();
            target.validate()?;
            let data = generate(&target.dataset)?;

            let source_init = ParameterStore::init(&source.model, source.init_seed);
            let source_data = generate(&source.dataset)?;
            let (source_mask, source_params) = imp_run(
                &source.model,
                source_init,
                &source_data,
                &source.imp,
                &source.finetune,
                |_| {},
            )?;

            let (mask, report) = transfer_mask(&source_mask, &target.model)?;
            let mut params = ParameterStore::init(&target.model, target.init_seed);
            for name in &report.matched {
                let ti = target.model.layer_index(name).expect("matched layer");
                let si = source.model.layer_index(name).expect("matched layer");
                params.weights_mut(ti).copy_from_slice(source_params.weights(si));
                params.bias_mut(ti).copy_from_slice(source_params.bias(si));
            }
            let pruned_arm =
                finetune_distill_eval(&target, params, &mask, &data)?;

            let rand_mask =
                random_mask(&target.model, mask.remaining_fraction(), target.imp.seed)?;
            let mut rand_params = ParameterStore::init(&target.model, target.init_seed);
            rand_params.apply_mask(&rand_mask)?;
            let random_arm = finetune_distill_eval(&target, rand_params, &rand_mask, &data)?;
            Ok(PairedOutcome { seed, pruned_arm, random_arm })
        })
        .collect()
}

/// Same fine-tune as `finetune_eval`, but scored by held-out distillation
/// loss; both arms get the identical freeze procedure.
fn finetune_distill_eval(
    cfg: &ExperimentConfig,
    mut params: ParameterStore,
    mask: &SparsityMask,
    data: &SyntheticDataset,
) -> Result<f64> {
    let analysis = analyze_model(&cfg.model, &params, mask)?;
    let fits: Vec<(String, f64)> = analysis
        .iter()
        .map(|(esd, fit)| (esd.layer_name.clone(), fit.alpha))
        .collect();
    let plan = make_freeze_plan(&fits, cfg.freeze_ratio)?;
    let mut rng = SeededRng::new(cfg.finetune.seed);
    train_loop(
        &cfg.model,
        &mut params,
        mask,
        &plan,
        data,
        Objective::Classification { lambda_kd: LAMBDA_KD },
        cfg.finetune.iterations,
        cfg.finetune.learning_rate,
        cfg.finetune.batch_size,
        &mut rng,
        None,
    )?;
    heldout_distill_loss(&cfg.model, &params, mask, data)
}
