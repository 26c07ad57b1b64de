//! Spectral analysis of weight matrices: empirical spectral densities,
//! power-law tail fitting, layer ranking, and freeze-plan generation.
//!
//! The quality signal per layer is the tail exponent alpha of the eigenvalue
//! distribution of W^T W, fitted by the continuous (Hill) MLE over a tail
//! whose lower boundary xmin is chosen to minimize the Kolmogorov-Smirnov
//! distance. Smaller alpha marks a better-trained layer, so a freeze plan
//! freezes the smallest-alpha layers and leaves the rest trainable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{correlation_matrix, matricize, sym_eigenvalues, DenseMatrix};
use crate::model::{ModelSpec, ParameterStore};
use crate::pruner::SparsityMask;

/// Minimum number of tail eigenvalues a power-law fit may use.
pub const MIN_TAIL_SIZE: usize = 8;

/// Eigenvalues below this fraction of the largest are treated as numerical
/// zeros (pruned rows and columns produce exact-zero spectra) and excluded
/// from fitting.
pub const EIGENVALUE_FLOOR_RELATIVE: f64 = 1e-12;

/// Alpha below this marks a layer as over-trained; reported as an
/// annotation, never acted on.
pub const OVER_TRAINED_ALPHA: f64 = 2.0;

/// Eigenvalues of one layer's Gram matrix, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpectrum {
    pub layer_name: String,
    pub eigenvalues: Vec<f64>,
    /// Rows of the matricized weight (the larger dimension).
    pub n: usize,
    /// Columns of the matricized weight; also the eigenvalue count.
    pub m: usize,
}

/// Fitted tail of an eigenvalue spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub xmin: f64,
    pub n_tail: usize,
    pub ks_statistic: f64,
}

/// Eigenvalue spectrum of W^T W for an already-matricized weight matrix,
/// clamped at zero and sorted ascending.
pub fn layer_esd(layer_name: &str, w: &DenseMatrix) -> Result<LayerSpectrum> {
    if w.cols() < 2 || w.rows() < w.cols() {
        return Err(Error::ShapeMismatch(format!(
            "spectrum needs an NxM matrix with N >= M >= 2, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    let sigma = correlation_matrix(w);
    let eigenvalues = sym_eigenvalues(&sigma)?.into_iter().map(|l| l.max(0.0)).collect();
    Ok(LayerSpectrum {
        layer_name: layer_name.to_string(),
        eigenvalues,
        n: w.rows(),
        m: w.cols(),
    })
}

/// Hill estimate for a fixed tail: alpha = 1 + n / sum(ln(x_i / xmin)).
fn hill_alpha(tail_log_sum: f64, n_tail: usize, xmin: f64) -> f64 {
    1.0 + n_tail as f64 / (tail_log_sum - n_tail as f64 * xmin.ln())
}

/// Two-sided KS distance between the empirical tail and the fitted law with
/// CDF F(x) = 1 - (x / xmin)^(1 - alpha).
fn ks_distance(tail: &[f64], xmin: f64, alpha: f64) -> f64 {
    let n = tail.len() as f64;
    let mut d: f64 = 0.0;
    for (j, &x) in tail.iter().enumerate() {
        let f = 1.0 - (x / xmin).powf(1.0 - alpha);
        let below = f - j as f64 / n;
        let above = (j + 1) as f64 / n - f;
        d = d.max(below).max(above);
    }
    d
}

/// Fit the power-law tail of a spectrum.
///
/// Every positive eigenvalue (above the numerical-zero floor) is tried as
/// the tail boundary xmin, keeping candidates with at least
/// [`MIN_TAIL_SIZE`] tail members; the boundary with the smallest KS
/// distance wins, ties going to the smallest xmin. Degenerate tails where
/// every value is equal make the MLE diverge and are reported as an error
/// rather than a made-up exponent.
pub fn fit_power_law(spectrum: &LayerSpectrum) -> Result<PowerLawFit> {
    let lambda_max = spectrum.eigenvalues.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Err(Error::fit("spectrum has no positive eigenvalues"));
    }
    let floor = EIGENVALUE_FLOOR_RELATIVE * lambda_max;
    let kept: Vec<f64> =
        spectrum.eigenvalues.iter().copied().filter(|&l| l >= floor).collect();
    if kept.len() < MIN_TAIL_SIZE {
        return Err(Error::fit(format!(
            "only {} usable eigenvalues, need at least {MIN_TAIL_SIZE}",
            kept.len()
        )));
    }

    // Suffix sums of ln(lambda) let each candidate's Hill estimate come out
    // of one subtraction.
    let mut suffix_log_sum = vec![0.0; kept.len() + 1];
    for i in (0..kept.len()).rev() {
        suffix_log_sum[i] = suffix_log_sum[i + 1] + kept[i].ln();
    }

    let mut best: Option<PowerLawFit> = None;
    for i in 0..=(kept.len() - MIN_TAIL_SIZE) {
        let xmin = kept[i];
        let n_tail = kept.len() - i;
        let log_ratio_sum = suffix_log_sum[i] - n_tail as f64 * xmin.ln();
        if log_ratio_sum <= 0.0 {
            // All tail values equal xmin; the MLE diverges here.
            continue;
        }
        let alpha = hill_alpha(suffix_log_sum[i], n_tail, xmin);
        let ks = ks_distance(&kept[i..], xmin, alpha);
        if best.as_ref().map_or(true, |b| ks < b.ks_statistic) {
            best = Some(PowerLawFit { alpha, xmin, n_tail, ks_statistic: ks });
        }
    }
    best.ok_or_else(|| {
        Error::fit("degenerate tail: all candidate tails are constant, exponent diverges")
    })
}

/// Indices of layers sorted by ascending alpha, ties keeping input order.
pub fn rank_layers(alphas: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[a].partial_cmp(&alphas[b]).expect("alpha is finite"));
    order
}

/// Static per-layer frozen/active assignment derived from alpha ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezePlan {
    layers: Vec<String>,
    frozen: Vec<bool>,
    alpha_snapshot: Vec<Option<f64>>,
    pub freeze_ratio: f64,
}

impl FreezePlan {
    pub fn from_flags(
        layers: Vec<String>,
        frozen: Vec<bool>,
        alpha_snapshot: Vec<Option<f64>>,
        freeze_ratio: f64,
    ) -> Self {
        assert_eq!(layers.len(), frozen.len());
        assert_eq!(layers.len(), alpha_snapshot.len());
        FreezePlan { layers, frozen, alpha_snapshot, freeze_ratio }
    }

    pub fn all_active(layers: Vec<String>) -> Self {
        let n = layers.len();
        FreezePlan { layers, frozen: vec![false; n], alpha_snapshot: vec![None; n], freeze_ratio: 0.0 }
    }

    pub fn all_frozen(layers: Vec<String>) -> Self {
        let n = layers.len();
        FreezePlan { layers, frozen: vec![true; n], alpha_snapshot: vec![None; n], freeze_ratio: 1.0 }
    }

    pub fn is_frozen(&self, layer: &str) -> bool {
        self.layers.iter().position(|l| l == layer).map_or(false, |i| self.frozen[i])
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[String] {
        &self.layers
    }

    pub fn frozen_flags(&self) -> &[bool] {
        &self.frozen
    }

    pub fn alpha(&self, layer: &str) -> Option<f64> {
        self.layers.iter().position(|l| l == layer).and_then(|i| self.alpha_snapshot[i])
    }
}

/// Freeze the floor(ratio * L) layers with the smallest alpha.
pub fn make_freeze_plan(fits: &[(String, f64)], freeze_ratio: f64) -> Result<FreezePlan> {
    if !(0.0..=1.0).contains(&freeze_ratio) {
        return Err(Error::InvalidArgument(format!(
            "freeze_ratio must be in [0, 1], got {freeze_ratio}"
        )));
    }
    if fits.is_empty() {
        return Err(Error::InvalidArgument("freeze plan needs at least one layer".into()));
    }
    let l = fits.len();
    let k = ((freeze_ratio * l as f64).floor() as usize).min(l);
    let alphas: Vec<f64> = fits.iter().map(|(_, a)| *a).collect();
    let order = rank_layers(&alphas);
    let mut frozen = vec![false; l];
    for &idx in order.iter().take(k) {
        frozen[idx] = true;
    }
    Ok(FreezePlan {
        layers: fits.iter().map(|(n, _)| n.clone()).collect(),
        frozen,
        alpha_snapshot: alphas.into_iter().map(Some).collect(),
        freeze_ratio,
    })
}

/// One analyzed layer: spectrum dimensions, fitted tail, and plan flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub layer: String,
    pub n: usize,
    pub m: usize,
    pub n_tail: usize,
    pub xmin: f64,
    pub alpha: f64,
    pub ks: f64,
    pub frozen: bool,
    pub over_trained: bool,
}

/// Per-layer analysis results, exportable as CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub records: Vec<SpectrumRecord>,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,n,m,n_tail,xmin,alpha,ks,frozen,over_trained\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.layer, r.n, r.m, r.n_tail, r.xmin, r.alpha, r.ks, r.frozen, r.over_trained
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn parallelism(layers: usize) -> usize {
    let from_env = std::env::var("SPWT_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    from_env.unwrap_or(cores).clamp(1, layers.max(1))
}

/// Effective (masked) weights of one layer, as analyzed by the spectrum.
fn masked_layer(params: &ParameterStore, mask: &SparsityMask, i: usize) -> Vec<f64> {
    params
        .weights(i)
        .iter()
        .zip(mask.layer_values_at(i))
        .map(|(&w, &m)| if m == 1 { w } else { 0.0 })
        .collect()
}

/// Analyze every layer of a masked model: ESD plus power-law fit.
///
/// Layers are independent, so the work is spread over up to `SPWT_THREADS`
/// threads (default: available cores); results keep layer order and are
/// identical to a sequential run. Any layer whose fit fails aborts the whole
/// analysis with that layer named.
pub fn analyze_model(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
) -> Result<Vec<(LayerSpectrum, PowerLawFit)>> {
    params.check_shapes(spec)?;
    mask.check_shapes(spec)?;
    let l = spec.num_layers();
    let threads = parallelism(l);

    let analyze_one = |i: usize| -> Result<(LayerSpectrum, PowerLawFit)> {
        let name = spec.layer_name(i);
        let (d_out, d_in) = spec.layer_shape(i);
        let weights = masked_layer(params, mask, i);
        let w = matricize(&[d_out, d_in], &weights).map_err(|e| e.with_layer(name))?;
        let esd = layer_esd(name, &w).map_err(|e| e.with_layer(name))?;
        let fit = fit_power_law(&esd).map_err(|e| e.with_layer(name))?;
        Ok((esd, fit))
    };

    if threads == 1 {
        return (0..l).map(analyze_one).collect();
    }

    let mut results: Vec<Option<Result<(LayerSpectrum, PowerLawFit)>>> = Vec::new();
    results.resize_with(l, || None);
    let chunk = l.div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, slot) in results.chunks_mut(chunk).enumerate() {
            let analyze_one = &analyze_one;
            scope.spawn(move || {
                for (off, cell) in slot.iter_mut().enumerate() {
                    *cell = Some(analyze_one(t * chunk + off));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every layer analyzed")).collect()
}

/// Per-layer alpha with fit failures recorded as None instead of aborting;
/// shape mismatches still error. Used for drift snapshots during training,
/// where a transiently unfittable layer should not kill the run.
pub fn alpha_snapshot(
    spec: &ModelSpec,
    params: &ParameterStore,
    mask: &SparsityMask,
) -> Result<Vec<Option<f64>>> {
    params.check_shapes(spec)?;
    mask.check_shapes(spec)?;
    Ok((0..spec.num_layers())
        .map(|i| {
            let (d_out, d_in) = spec.layer_shape(i);
            let weights = masked_layer(params, mask, i);
            matricize(&[d_out, d_in], &weights)
                .and_then(|w| layer_esd(spec.layer_name(i), &w))
                .and_then(|esd| fit_power_law(&esd))
                .map(|fit| fit.alpha)
                .ok()
        })
        .collect())
}

/// Join analysis results with a freeze plan into an exportable report.
pub fn build_report(
    analysis: &[(LayerSpectrum, PowerLawFit)],
    plan: &FreezePlan,
) -> SpectrumReport {
    let records = analysis
        .iter()
        .map(|(esd, fit)| SpectrumRecord {
            layer: esd.layer_name.clone(),
            n: esd.n,
            m: esd.m,
            n_tail: fit.n_tail,
            xmin: fit.xmin,
            alpha: fit.alpha,
            ks: fit.ks_statistic,
            frozen: plan.is_frozen(&esd.layer_name),
            over_trained: fit.alpha < OVER_TRAINED_ALPHA,
        })
        .collect();
    SpectrumReport { records }
}

/// Per-layer drift of alpha across training snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    /// Per layer: maximum |alpha_{k+1} - alpha_k| over consecutive snapshot
    /// pairs where both fits succeeded; None when no such pair exists.
    pub max_abs_delta: Vec<Option<f64>>,
    pub layer_names: Vec<String>,
    /// Median alpha across layers, one value per snapshot.
    pub median_trace: Vec<Option<f64>>,
    /// Median of the trace above.
    pub median_of_medians: Option<f64>,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Summarize how much each layer's alpha moved over a training run.
///
/// `snapshots[k][l]` is layer l's alpha at snapshot k, None when the fit
/// failed at that point. Needs at least two snapshots.
pub fn alpha_drift_report(
    layer_names: &[String],
    snapshots: &[Vec<Option<f64>>],
) -> Result<DriftReport> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "drift report needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    if snapshots.iter().any(|s| s.len() != layer_names.len()) {
        return Err(Error::ShapeMismatch("snapshot layer count differs from names".into()));
    }
    let l = layer_names.len();
    let mut max_abs_delta = vec![None; l];
    for layer in 0..l {
        for pair in snapshots.windows(2) {
            if let (Some(a), Some(b)) = (pair[0][layer], pair[1][layer]) {
                let d = (b - a).abs();
                max_abs_delta[layer] =
                    Some(max_abs_delta[layer].map_or(d, |m: f64| m.max(d)));
            }
        }
    }
    let median_trace: Vec<Option<f64>> = snapshots
        .iter()
        .map(|snap| median(&mut snap.iter().filter_map(|a| *a).collect()))
        .collect();
    let median_of_medians = median(&mut median_trace.iter().filter_map(|m| *m).collect());
    Ok(DriftReport {
        max_abs_delta,
        layer_names: layer_names.to_vec(),
        median_trace,
        median_of_medians,
    })
}
