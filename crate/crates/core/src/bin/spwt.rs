//! Command-line front end: each subcommand is one pipeline stage, all
//! state flows through files, and exit codes are a stable contract
//! (0 ok, 2 input/format, 3 fit failure, 4 divergence, 5 incomplete run).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spwt_core::config::ExperimentConfig;
use spwt_core::container::write_atomic;
use spwt_core::flops::{model_costs, model_training_flops};
use spwt_core::pipeline::{
    self, load_checkpoint, load_mask, stage_finetune, stage_prune, stage_report, stage_transfer,
};
use spwt_core::pruner::SparsityMask;
use spwt_core::spectrum::{analyze_model, build_report, make_freeze_plan, FreezePlan};
use spwt_core::Result;

#[derive(Parser)]
#[command(name = "spwt", version, about = "Sparse-weight training toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-layer spectral tail exponents and derive a freeze plan.
    Analyze {
        /// Checkpoint container to analyze.
        checkpoint: PathBuf,
        /// Sparsity mask applied to the weights before analysis.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Fraction of layers to freeze, smallest tail exponents first.
        #[arg(long, default_value_t = 0.5)]
        freeze_ratio: f64,
        /// Directory receiving spectrum.csv and freeze_plan.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Iterative magnitude pruning from fresh weights.
    Prune {
        /// Experiment config JSON.
        config: PathBuf,
        /// Re-derive all stage seeds from this value.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fine-tune a pruned checkpoint under its mask.
    Finetune {
        config: PathBuf,
        /// Mask container (default: <output_dir>/mask.spwt).
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Checkpoint container (default: <output_dir>/pruned.spwt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Graft a source run's mask and matching weights onto the configured
    /// model, then fine-tune; unmatched layers start dense and fresh.
    Transfer {
        config: PathBuf,
        /// Source run directory.
        #[arg(long)]
        source: PathBuf,
        /// Override the source mask (default: <source>/mask.spwt).
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Override the source checkpoint (default: <source>/pruned.spwt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Training-cost ledger for the configured model.
    Flops {
        config: PathBuf,
        /// Sparsity mask supplying per-layer density (default: dense).
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Freeze plan JSON supplying frozen flags (default: all active).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Directory receiving flops.csv and flops.json (default: output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate a completed run directory into reports and a digest manifest.
    Report {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    let cfg = match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    println!("config hash: {}", cfg.hash());
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze { checkpoint, mask, freeze_ratio, out } => {
            cmd_analyze(&checkpoint, mask.as_deref(), freeze_ratio, &out)
        }
        Command::Prune { config, seed } => {
            let cfg = load_config(&config, seed)?;
            let metrics = stage_prune(&cfg)?;
            println!(
                "pruned in {} rounds to remaining fraction {:.6}",
                metrics.rounds, metrics.final_remaining_fraction
            );
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Finetune { config, mask, checkpoint, seed } => {
            let cfg = load_config(&config, seed)?;
            let mask = mask.unwrap_or_else(|| cfg.output_dir.join(pipeline::MASK_FILE));
            let checkpoint =
                checkpoint.unwrap_or_else(|| cfg.output_dir.join(pipeline::PRUNED_FILE));
            let metrics = stage_finetune(&cfg, &mask, &checkpoint)?;
            print_finetune(&metrics);
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Transfer { config, source, mask, checkpoint, seed } => {
            let cfg = load_config(&config, seed)?;
            let mask = mask.unwrap_or_else(|| source.join(pipeline::MASK_FILE));
            let checkpoint = checkpoint.unwrap_or_else(|| source.join(pipeline::PRUNED_FILE));
            let (report, metrics) = stage_transfer(&cfg, &mask, &checkpoint)?;
            println!(
                "transferred {} of {} layers (coverage {:.4}); fresh dense: {:?}",
                report.matched.len(),
                report.matched.len() + report.unmatched.len(),
                report.coverage,
                report.unmatched
            );
            print_finetune(&metrics);
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Flops { config, mask, plan, out, seed } => {
            let cfg = load_config(&config, seed)?;
            cmd_flops(&cfg, mask.as_deref(), plan.as_deref(), out.as_deref())
        }
        Command::Report { config, seed } => {
            let cfg = load_config(&config, seed)?;
            let manifest = stage_report(&cfg)?;
            println!(
                "manifest covers {} files in {}",
                manifest.files.len(),
                cfg.output_dir.display()
            );
            Ok(())
        }
    }
}

fn print_finetune(metrics: &pipeline::FinetuneMetrics) {
    println!(
        "fine-tuned: heldout accuracy {:.4}, cross-entropy {:.4}, distill loss {:.4}",
        metrics.final_heldout_accuracy,
        metrics.final_heldout_cross_entropy,
        metrics.final_heldout_distill_loss
    );
}

fn cmd_analyze(
    checkpoint: &Path,
    mask: Option<&Path>,
    freeze_ratio: f64,
    out: &Path,
) -> Result<()> {
    let (spec, params) = load_checkpoint(checkpoint)?;
    let mask = match mask {
        Some(path) => load_mask(path)?,
        None => SparsityMask::all_ones(&spec),
    };
    let analysis = analyze_model(&spec, &params, &mask)?;
    let fits: Vec<(String, f64)> =
        analysis.iter().map(|(esd, fit)| (esd.layer_name.clone(), fit.alpha)).collect();
    let plan = make_freeze_plan(&fits, freeze_ratio)?;
    let report = build_report(&analysis, &plan);

    std::fs::create_dir_all(out)?;
    write_atomic(&out.join("spectrum.csv"), report.to_csv().as_bytes())?;
    write_plan(&out.join("freeze_plan.json"), &plan)?;

    for r in &report.records {
        println!(
            "{}: alpha {:.4} (tail {} of {}, ks {:.4}){}",
            r.layer,
            r.alpha,
            r.n_tail,
            r.n.min(r.m),
            r.ks,
            if r.frozen { " frozen" } else { "" }
        );
    }
    println!("plan freezes {} of {} layers", plan.frozen_count(), plan.num_layers());
    println!("reports in {}", out.display());
    Ok(())
}

fn write_plan(path: &Path, plan: &FreezePlan) -> Result<()> {
    let text = serde_json::to_string_pretty(plan)? + "\n";
    write_atomic(path, text.as_bytes())
}

fn cmd_flops(
    cfg: &ExperimentConfig,
    mask: Option<&Path>,
    plan: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    cfg.validate()?;
    let mask = match mask {
        Some(path) => Some(load_mask(path)?),
        None => None,
    };
    let plan: Option<FreezePlan> = match plan {
        Some(path) => Some(serde_json::from_str(&std::fs::read_to_string(path)?)?),
        None => None,
    };
    let costs = model_costs(&cfg.model, cfg.finetune.batch_size, mask.as_ref(), plan.as_ref())?;
    let ledger = model_training_flops(&costs, cfg.finetune.iterations as u64)?;

    let out = out.unwrap_or(&cfg.output_dir);
    std::fs::create_dir_all(out)?;
    write_atomic(&out.join(pipeline::FLOPS_CSV_FILE), ledger.to_csv().as_bytes())?;
    let summary = serde_json::to_string_pretty(&ledger.to_json_summary())? + "\n";
    write_atomic(&out.join(pipeline::FLOPS_JSON_FILE), summary.as_bytes())?;

    println!(
        "per-iteration training FLOPs: {} ({} layers, batch {})",
        ledger.per_iteration_total,
        ledger.rows.len(),
        cfg.finetune.batch_size
    );
    println!("vs one dense inference pass: {:.6}", ledger.training_over_dense_inference());
    println!("vs dense nothing-frozen training: {:.6}", ledger.training_over_dense_training());
    println!("run total over {} iterations: {}", ledger.iterations, ledger.run_total);
    println!("reports in {}", out.display());
    Ok(())
}
