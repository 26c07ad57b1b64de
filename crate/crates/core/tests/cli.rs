//! Black-box tests of the installed binary: exit codes, stderr
//! diagnostics, and output digests.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use spwt_core::config::ExperimentConfig;
use spwt_core::container::Container;
use spwt_core::model::{Activation, ModelSpec, ParameterStore};
use spwt_core::pruner::SparsityMask;
use spwt_core::rng::SeededRng;
use spwt_core::spectrum::FreezePlan;

fn spwt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spwt"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn digest(path: &Path) -> String {
    hex::encode(Sha256::digest(fs::read(path).unwrap()))
}

/// Desk config shrunk to keep spawned-process runs quick.
fn small_cfg(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_desk();
    cfg.model = ModelSpec::with_default_names(
        vec![16, 24, 24, 16],
        vec![Activation::Tanh, Activation::Tanh],
    )
    .unwrap();
    cfg.imp.train_iterations = 40;
    cfg.finetune.iterations = 120;
    cfg.output_dir = dir.join("run");
    cfg
}

fn write_cfg(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path
}

#[test]
fn prune_finetune_report_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    write_cfg(tmp.path(), &cfg);

    let prune = spwt(&["prune", "config.json"], tmp.path());
    assert_eq!(code(&prune), 0, "{}", stderr(&prune));
    assert!(stdout(&prune).contains(&format!("config hash: {}", cfg.hash())));
    assert!(stdout(&prune).contains("22 rounds"));

    let finetune = spwt(&["finetune", "config.json"], tmp.path());
    assert_eq!(code(&finetune), 0, "{}", stderr(&finetune));

    let report = spwt(&["report", "config.json"], tmp.path());
    assert_eq!(code(&report), 0, "{}", stderr(&report));
    assert!(stdout(&report).contains("manifest covers 11 files"));

    let analyze = spwt(
        &["analyze", "run/pruned.spwt", "--mask", "run/mask.spwt", "--out", "analysis"],
        tmp.path(),
    );
    assert_eq!(code(&analyze), 0, "{}", stderr(&analyze));
    let csv = fs::read_to_string(tmp.path().join("analysis/spectrum.csv")).unwrap();
    assert!(csv.starts_with("layer,n,m,n_tail,xmin,alpha,ks,frozen,over_trained\n"));
    assert!(tmp.path().join("analysis/freeze_plan.json").exists());
}

#[test]
fn prune_is_idempotent_and_seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    write_cfg(tmp.path(), &cfg);

    assert_eq!(code(&spwt(&["prune", "config.json"], tmp.path())), 0);
    let first = digest(&tmp.path().join("run/mask.spwt"));
    assert_eq!(code(&spwt(&["prune", "config.json"], tmp.path())), 0);
    assert_eq!(first, digest(&tmp.path().join("run/mask.spwt")));

    let reseeded = spwt(&["prune", "config.json", "--seed", "99"], tmp.path());
    assert_eq!(code(&reseeded), 0);
    assert!(!stdout(&reseeded).contains(&cfg.hash()), "seed override must change the hash");
    assert_ne!(first, digest(&tmp.path().join("run/mask.spwt")));
}

#[test]
fn transfer_identical_target_reports_full_coverage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    write_cfg(tmp.path(), &cfg);
    assert_eq!(code(&spwt(&["prune", "config.json"], tmp.path())), 0);

    let mut target = cfg.clone();
    target.output_dir = tmp.path().join("run2");
    fs::write(tmp.path().join("target.json"), target.to_json()).unwrap();
    let out = spwt(&["transfer", "target.json", "--source", "run"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("coverage 1.0000"));
}

#[test]
fn missing_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spwt(&["prune", "nope.json"], tmp.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_config_keys_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    let text = cfg.to_json().replacen('{', "{\n  \"surprise\": 1,", 1);
    fs::write(tmp.path().join("config.json"), text).unwrap();
    let out = spwt(&["prune", "config.json"], tmp.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn corrupt_magic_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.spwt"), b"XXXXnot a container").unwrap();
    let out = spwt(&["analyze", "bad.spwt"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("container format error"));
}

#[test]
fn unfittable_layer_exits_3_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    // A 3x3 layer yields 3 eigenvalues, far below the minimum tail size.
    let spec =
        ModelSpec::with_default_names(vec![3, 3, 3], vec![Activation::Tanh]).unwrap();
    let params = ParameterStore::init(&spec, 5);
    params.to_container(&spec).unwrap().write_to(&tmp.path().join("tiny.spwt")).unwrap();

    let out = spwt(&["analyze", "tiny.spwt"], tmp.path());
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("fc0"), "stderr names the failing layer: {}", stderr(&out));
}

#[test]
fn report_on_incomplete_dir_exits_5_with_missing_list() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    write_cfg(tmp.path(), &cfg);
    fs::create_dir_all(&cfg.output_dir).unwrap();
    let out = spwt(&["report", "config.json"], tmp.path());
    assert_eq!(code(&out), 5);
    let err = stderr(&out);
    for name in ["mask.spwt", "freeze_plan.json", "finetuned.spwt", "finetune_metrics.json"] {
        assert!(err.contains(name), "missing list should include {name}: {err}");
    }
}

#[test]
fn diverged_training_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_cfg(tmp.path());
    // Large enough that squared embedding distances overflow f64 within a
    // couple of steps.
    cfg.finetune.learning_rate = 1e300;
    write_cfg(tmp.path(), &cfg);
    let out = spwt(&["prune", "config.json"], tmp.path());
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn flops_reference_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    // Four equal-cost layers, sigma exactly 0.1 each, two frozen: training
    // costs 2(1.1C) + 2(1.2C) = 4.6C per iteration against 4C inference.
    let dims = vec![10usize, 10, 10, 10, 10];
    let spec =
        ModelSpec::with_default_names(dims.clone(), vec![Activation::Tanh; 3]).unwrap();

    let mut cfg = ExperimentConfig::default_desk();
    cfg.model = spec.clone();
    cfg.dataset.d_in = 10;
    cfg.dataset.d_embed = 10;
    cfg.output_dir = tmp.path().join("out");
    write_cfg(tmp.path(), &cfg);

    let mut mask = SparsityMask::all_ones(&spec);
    let mut rng = SeededRng::new(3);
    for layer in 0..spec.num_layers() {
        let total = mask.layer_values_at(layer).len();
        let keep = total / 10;
        let mut order: Vec<usize> = (0..total).collect();
        rng.shuffle(&mut order);
        for &off in &order[keep..] {
            mask.set_value(layer, off, 0);
        }
    }
    mask.to_container().unwrap().write_to(&tmp.path().join("mask.spwt")).unwrap();

    let plan = FreezePlan::from_flags(
        spec.layer_names().to_vec(),
        vec![true, true, false, false],
        vec![None; 4],
        0.5,
    );
    fs::write(tmp.path().join("plan.json"), serde_json::to_string(&plan).unwrap()).unwrap();

    let out = spwt(
        &["flops", "config.json", "--mask", "mask.spwt", "--plan", "plan.json"],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("vs one dense inference pass: 1.150000"), "{text}");
    assert!(text.contains("vs dense nothing-frozen training: 0.383333"), "{text}");

    let csv = fs::read_to_string(cfg.output_dir.join("flops.csv")).unwrap();
    let golden = "layer,c,sigma,frozen,fwd,bwd\n\
                  fc0,7040,0.1,true,704,7040\n\
                  fc1,7040,0.1,true,704,7040\n\
                  fc2,7040,0.1,false,704,7744\n\
                  fc3,7040,0.1,false,704,7744\n";
    assert_eq!(csv, golden);
}

#[test]
fn container_rewrite_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_cfg(tmp.path());
    write_cfg(tmp.path(), &cfg);
    assert_eq!(code(&spwt(&["prune", "config.json"], tmp.path())), 0);

    let path = tmp.path().join("run/mask.spwt");
    let original = fs::read(&path).unwrap();
    let reread = Container::read_from(&path).unwrap();
    assert_eq!(reread.to_bytes().unwrap(), original);
}
