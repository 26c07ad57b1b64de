//! C ABI over the toolkit: opaque handles, integer status codes, and a
//! thread-local error message. Every function catches panics at the
//! boundary; no Rust type crosses it except through an opaque pointer.
//!
//! Ownership rules for callers:
//! - every `*_load`/`*_from_*`/`spwt_analyze` out-pointer is released with
//!   the matching `*_free`;
//! - every returned string is released with `spwt_string_free`;
//! - `spwt_last_error_message` borrows thread-local storage and is valid
//!   until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use spwt_core::config::ExperimentConfig;
use spwt_core::model::{ModelSpec, ParameterStore};
use spwt_core::pipeline::{
    self, load_checkpoint, load_mask, run_all, stage_finetune, stage_prune, stage_report,
    stage_transfer, verify_manifest,
};
use spwt_core::pruner::SparsityMask;
use spwt_core::spectrum::{analyze_model, build_report, make_freeze_plan, SpectrumReport};
use spwt_core::Error;

/// Status of every call. Codes 2-5 match the command-line exit codes;
/// 1 flags misuse of this API (null or invalid arguments), 6 an internal
/// panic that was contained at the boundary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpwtStatus {
    Ok = 0,
    InvalidArgument = 1,
    Format = 2,
    FitFailed = 3,
    Diverged = 4,
    Incomplete = 5,
    Panic = 6,
}

/// Experiment configuration handle.
pub struct SpwtConfig(ExperimentConfig);

/// Loaded checkpoint handle: architecture plus weights.
pub struct SpwtCheckpoint {
    spec: ModelSpec,
    params: ParameterStore,
}

/// Loaded sparsity mask handle.
pub struct SpwtMask(SparsityMask);

/// Per-layer spectrum analysis handle.
pub struct SpwtSpectrum(SpectrumReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn core_error(e: Error) -> SpwtStatus {
    set_error(&e.to_string());
    match e.exit_code() {
        2 => SpwtStatus::Format,
        3 => SpwtStatus::FitFailed,
        4 => SpwtStatus::Diverged,
        5 => SpwtStatus::Incomplete,
        _ => SpwtStatus::InvalidArgument,
    }
}

fn arg_error(message: &str) -> SpwtStatus {
    set_error(message);
    SpwtStatus::InvalidArgument
}

/// Run a fallible body with panics contained at the ABI boundary.
fn guarded(body: impl FnOnce() -> Result<(), SpwtStatus>) -> SpwtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SpwtStatus::Ok,
        Ok(Err(status)) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            SpwtStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn require_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SpwtStatus> {
    if ptr.is_null() {
        return Err(arg_error(&format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| arg_error(&format!("{what} is not valid UTF-8")))
}

unsafe fn optional_path(
    ptr: *const c_char,
    what: &str,
) -> Result<Option<PathBuf>, SpwtStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    Ok(Some(PathBuf::from(unsafe { require_str(ptr, what) }?)))
}

fn require_out<T>(ptr: *mut T, what: &str) -> Result<*mut T, SpwtStatus> {
    if ptr.is_null() {
        return Err(arg_error(&format!("{what} out-pointer is null")));
    }
    Ok(ptr)
}

unsafe fn require_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, SpwtStatus> {
    if ptr.is_null() {
        return Err(arg_error(&format!("{what} handle is null")));
    }
    Ok(unsafe { &*ptr })
}

fn give_string(out: *mut *mut c_char, text: String, what: &str) -> Result<(), SpwtStatus> {
    let out = require_out(out, what)?;
    let text = CString::new(text.replace('\0', " "))
        .map_err(|_| arg_error("string contains interior NUL"))?;
    unsafe { *out = text.into_raw() };
    Ok(())
}

/// Message from the most recent failing call on this thread, or null.
/// Borrowed; do not free.
#[no_mangle]
pub extern "C" fn spwt_last_error_message() -> *const c_char {
    LAST_ERROR
        .with(|slot| slot.borrow().as_ref().map(|s| s.as_ptr()))
        .unwrap_or(std::ptr::null())
}

/// Release a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spwt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Load an experiment configuration from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_load(
    path: *const c_char,
    out: *mut *mut SpwtConfig,
) -> SpwtStatus {
    guarded(|| {
        let path = unsafe { require_str(path, "path") }?;
        let out = require_out(out, "config")?;
        let cfg = ExperimentConfig::load(Path::new(path)).map_err(core_error)?;
        unsafe { *out = Box::into_raw(Box::new(SpwtConfig(cfg))) };
        Ok(())
    })
}

/// Parse an experiment configuration from a JSON string.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_from_json(
    json: *const c_char,
    out: *mut *mut SpwtConfig,
) -> SpwtStatus {
    guarded(|| {
        let json = unsafe { require_str(json, "json") }?;
        let out = require_out(out, "config")?;
        let cfg = ExperimentConfig::from_json(json).map_err(core_error)?;
        unsafe { *out = Box::into_raw(Box::new(SpwtConfig(cfg))) };
        Ok(())
    })
}

/// Built-in small configuration that runs in seconds.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_default_desk(out: *mut *mut SpwtConfig) -> SpwtStatus {
    guarded(|| {
        let out = require_out(out, "config")?;
        unsafe { *out = Box::into_raw(Box::new(SpwtConfig(ExperimentConfig::default_desk()))) };
        Ok(())
    })
}

/// Copy of `cfg` with every stage seed re-derived from `seed`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_with_seed(
    cfg: *const SpwtConfig,
    seed: u64,
    out: *mut *mut SpwtConfig,
) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        let out = require_out(out, "config")?;
        unsafe { *out = Box::into_raw(Box::new(SpwtConfig(cfg.0.with_seed(seed)))) };
        Ok(())
    })
}

/// Hex digest identifying the full configuration. Free with
/// `spwt_string_free`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_hash(
    cfg: *const SpwtConfig,
    out: *mut *mut c_char,
) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        give_string(out, cfg.0.hash(), "hash")
    })
}

/// Configuration serialized back to JSON. Free with `spwt_string_free`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_to_json(
    cfg: *const SpwtConfig,
    out: *mut *mut c_char,
) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        give_string(out, cfg.0.to_json(), "json")
    })
}

/// # Safety
/// `cfg` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spwt_config_free(cfg: *mut SpwtConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Iterative magnitude pruning; writes mask, checkpoint, and metrics into
/// the configured output directory.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spwt_stage_prune(cfg: *const SpwtConfig) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        stage_prune(&cfg.0).map(drop).map_err(core_error)
    })
}

/// Fine-tune a pruned checkpoint under its mask. Null paths default to
/// `mask.spwt` and `pruned.spwt` in the configured output directory.
///
/// # Safety
/// `cfg` must be a live handle; paths must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn spwt_stage_finetune(
    cfg: *const SpwtConfig,
    mask_path: *const c_char,
    checkpoint_path: *const c_char,
) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        let mask = unsafe { optional_path(mask_path, "mask path") }?
            .unwrap_or_else(|| cfg.0.output_dir.join(pipeline::MASK_FILE));
        let checkpoint = unsafe { optional_path(checkpoint_path, "checkpoint path") }?
            .unwrap_or_else(|| cfg.0.output_dir.join(pipeline::PRUNED_FILE));
        stage_finetune(&cfg.0, &mask, &checkpoint).map(drop).map_err(core_error)
    })
}

/// Graft a source run's mask and matching weights onto the configured
/// model, then fine-tune.
///
/// # Safety
/// `cfg` must be a live handle; paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn spwt_stage_transfer(
    cfg: *const SpwtConfig,
    source_mask_path: *const c_char,
    source_checkpoint_path: *const c_char,
) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        let mask = unsafe { require_str(source_mask_path, "source mask path") }?;
        let checkpoint =
            unsafe { require_str(source_checkpoint_path, "source checkpoint path") }?;
        stage_transfer(&cfg.0, Path::new(mask), Path::new(checkpoint))
            .map(drop)
            .map_err(core_error)
    })
}

/// Aggregate a completed run directory into reports and a digest manifest.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spwt_stage_report(cfg: *const SpwtConfig) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        stage_report(&cfg.0).map(drop).map_err(core_error)
    })
}

/// Prune, fine-tune, and report in sequence.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spwt_run_all(cfg: *const SpwtConfig) -> SpwtStatus {
    guarded(|| {
        let cfg = unsafe { require_ref(cfg, "config") }?;
        run_all(&cfg.0).map(drop).map_err(core_error)
    })
}

/// Re-check every artifact in a run directory against its manifest digest.
///
/// # Safety
/// `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spwt_verify_run_dir(dir: *const c_char) -> SpwtStatus {
    guarded(|| {
        let dir = unsafe { require_str(dir, "directory") }?;
        verify_manifest(Path::new(dir)).map(drop).map_err(core_error)
    })
}

/// Load a checkpoint container.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_checkpoint_load(
    path: *const c_char,
    out: *mut *mut SpwtCheckpoint,
) -> SpwtStatus {
    guarded(|| {
        let path = unsafe { require_str(path, "path") }?;
        let out = require_out(out, "checkpoint")?;
        let (spec, params) = load_checkpoint(Path::new(path)).map_err(core_error)?;
        unsafe { *out = Box::into_raw(Box::new(SpwtCheckpoint { spec, params })) };
        Ok(())
    })
}

/// Number of weight layers in the checkpoint.
///
/// # Safety
/// `ckpt` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_checkpoint_num_layers(
    ckpt: *const SpwtCheckpoint,
    out: *mut usize,
) -> SpwtStatus {
    guarded(|| {
        let ckpt = unsafe { require_ref(ckpt, "checkpoint") }?;
        let out = require_out(out, "layer count")?;
        unsafe { *out = ckpt.spec.num_layers() };
        Ok(())
    })
}

/// Name of weight layer `index`. Free with `spwt_string_free`.
///
/// # Safety
/// `ckpt` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_checkpoint_layer_name(
    ckpt: *const SpwtCheckpoint,
    index: usize,
    out: *mut *mut c_char,
) -> SpwtStatus {
    guarded(|| {
        let ckpt = unsafe { require_ref(ckpt, "checkpoint") }?;
        if index >= ckpt.spec.num_layers() {
            return Err(arg_error(&format!(
                "layer index {index} out of range for {} layers",
                ckpt.spec.num_layers()
            )));
        }
        give_string(out, ckpt.spec.layer_name(index).to_string(), "layer name")
    })
}

/// # Safety
/// `ckpt` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spwt_checkpoint_free(ckpt: *mut SpwtCheckpoint) {
    if !ckpt.is_null() {
        drop(unsafe { Box::from_raw(ckpt) });
    }
}

/// Load a sparsity mask container.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_mask_load(
    path: *const c_char,
    out: *mut *mut SpwtMask,
) -> SpwtStatus {
    guarded(|| {
        let path = unsafe { require_str(path, "path") }?;
        let out = require_out(out, "mask")?;
        let mask = load_mask(Path::new(path)).map_err(core_error)?;
        unsafe { *out = Box::into_raw(Box::new(SpwtMask(mask))) };
        Ok(())
    })
}

/// Fraction of weights still active.
///
/// # Safety
/// `mask` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_mask_remaining_fraction(
    mask: *const SpwtMask,
    out: *mut f64,
) -> SpwtStatus {
    guarded(|| {
        let mask = unsafe { require_ref(mask, "mask") }?;
        let out = require_out(out, "fraction")?;
        unsafe { *out = mask.0.remaining_fraction() };
        Ok(())
    })
}

/// Number of recorded pruning rounds.
///
/// # Safety
/// `mask` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_mask_round_count(
    mask: *const SpwtMask,
    out: *mut usize,
) -> SpwtStatus {
    guarded(|| {
        let mask = unsafe { require_ref(mask, "mask") }?;
        let out = require_out(out, "round count")?;
        unsafe { *out = mask.0.history.len() };
        Ok(())
    })
}

/// # Safety
/// `mask` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spwt_mask_free(mask: *mut SpwtMask) {
    if !mask.is_null() {
        drop(unsafe { Box::from_raw(mask) });
    }
}

/// Fit per-layer spectral tail exponents and derive a freeze plan. `mask`
/// may be null for a dense analysis.
///
/// # Safety
/// Handles must be live (or null where allowed); `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn spwt_analyze(
    ckpt: *const SpwtCheckpoint,
    mask: *const SpwtMask,
    freeze_ratio: f64,
    out: *mut *mut SpwtSpectrum,
) -> SpwtStatus {
    guarded(|| {
        let ckpt = unsafe { require_ref(ckpt, "checkpoint") }?;
        let out = require_out(out, "spectrum")?;
        let dense;
        let mask = if mask.is_null() {
            dense = SparsityMask::all_ones(&ckpt.spec);
            &dense
        } else {
            &unsafe { require_ref(mask, "mask") }?.0
        };
        let analysis = analyze_model(&ckpt.spec, &ckpt.params, mask).map_err(core_error)?;
        let fits: Vec<(String, f64)> =
            analysis.iter().map(|(esd, fit)| (esd.layer_name.clone(), fit.alpha)).collect();
        let plan = make_freeze_plan(&fits, freeze_ratio).map_err(core_error)?;
        let report = build_report(&analysis, &plan);
        unsafe { *out = Box::into_raw(Box::new(SpwtSpectrum(report))) };
        Ok(())
    })
}

/// Number of analyzed layers.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_spectrum_num_layers(
    spectrum: *const SpwtSpectrum,
    out: *mut usize,
) -> SpwtStatus {
    guarded(|| {
        let spectrum = unsafe { require_ref(spectrum, "spectrum") }?;
        let out = require_out(out, "layer count")?;
        unsafe { *out = spectrum.0.records.len() };
        Ok(())
    })
}

fn spectrum_record<'a>(
    spectrum: &'a SpwtSpectrum,
    index: usize,
) -> Result<&'a spwt_core::spectrum::SpectrumRecord, SpwtStatus> {
    spectrum.0.records.get(index).ok_or_else(|| {
        arg_error(&format!(
            "layer index {index} out of range for {} layers",
            spectrum.0.records.len()
        ))
    })
}

/// Fitted tail exponent of layer `index`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_spectrum_alpha(
    spectrum: *const SpwtSpectrum,
    index: usize,
    out: *mut f64,
) -> SpwtStatus {
    guarded(|| {
        let spectrum = unsafe { require_ref(spectrum, "spectrum") }?;
        let out = require_out(out, "alpha")?;
        unsafe { *out = spectrum_record(spectrum, index)?.alpha };
        Ok(())
    })
}

/// Whether the freeze plan holds layer `index` fixed during fine-tuning.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_spectrum_is_frozen(
    spectrum: *const SpwtSpectrum,
    index: usize,
    out: *mut bool,
) -> SpwtStatus {
    guarded(|| {
        let spectrum = unsafe { require_ref(spectrum, "spectrum") }?;
        let out = require_out(out, "frozen flag")?;
        unsafe { *out = spectrum_record(spectrum, index)?.frozen };
        Ok(())
    })
}

/// Whole analysis as CSV. Free with `spwt_string_free`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spwt_spectrum_to_csv(
    spectrum: *const SpwtSpectrum,
    out: *mut *mut c_char,
) -> SpwtStatus {
    guarded(|| {
        let spectrum = unsafe { require_ref(spectrum, "spectrum") }?;
        give_string(out, spectrum.0.to_csv(), "csv")
    })
}

/// # Safety
/// `spectrum` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn spwt_spectrum_free(spectrum: *mut SpwtSpectrum) {
    if !spectrum.is_null() {
        drop(unsafe { Box::from_raw(spectrum) });
    }
}
