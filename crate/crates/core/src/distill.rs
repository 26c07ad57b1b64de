//! Distillation objectives, the dot-product classification head, and CKA
//! feature similarity.
//!
//! The two distillation losses match pairwise embedding distances: the
//! text-guided form compares student-to-reference distances against
//! text-to-text distances, the vision-guided form compares them against
//! student-to-student distances. Both are plain double sums normalized by N.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// N embedding vectors of equal dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBatch {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingBatch {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::InvalidArgument("embedding batch must be non-empty".into()));
        }
        if data.len() != n * dim {
            return Err(Error::ShapeMismatch(format!(
                "batch of {n} vectors of dim {dim} needs {} values, got {}",
                n * dim,
                data.len()
            )));
        }
        Ok(EmbeddingBatch { n, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("embedding batch must be non-empty".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged embedding rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        EmbeddingBatch::new(rows.len(), dim, data)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_pairing(v: &EmbeddingBatch, r: &EmbeddingBatch) -> Result<()> {
    if v.len() != r.len() {
        return Err(Error::ShapeMismatch(format!(
            "batch sizes differ: {} vs {}",
            v.len(),
            r.len()
        )));
    }
    if v.dim() != r.dim() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dimensions differ: {} vs {}",
            v.dim(),
            r.dim()
        )));
    }
    Ok(())
}

/// Text-guided distillation loss:
/// `(1/N) * sum_ij | ||V_i - R_j|| - ||T_i - T_j|| |`.
///
/// `V` and `R` must share a space; `T` may have a different dimension.
pub fn tgkd_loss(v: &EmbeddingBatch, r: &EmbeddingBatch, t: &EmbeddingBatch) -> Result<f64> {
    Ok(tgkd_loss_grad(v, r, t)?.loss)
}

/// Loss plus gradients for the student-side batches. Text embeddings are
/// treated as constants and get no gradient.
pub struct TgkdGrad {
    pub loss: f64,
    /// d loss / d V, same layout as `V`'s data.
    pub grad_v: Vec<f64>,
    /// d loss / d R, same layout as `R`'s data.
    pub grad_r: Vec<f64>,
}

pub fn tgkd_loss_grad(
    v: &EmbeddingBatch,
    r: &EmbeddingBatch,
    t: &EmbeddingBatch,
) -> Result<TgkdGrad> {
    check_pairing(v, r)?;
    if t.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "text batch size {} does not match student batch size {}",
            t.len(),
            v.len()
        )));
    }
    let n = v.len();
    let dim = v.dim();
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad_v = vec![0.0; n * dim];
    let mut grad_r = vec![0.0; n * dim];

    for i in 0..n {
        for j in 0..n {
            let d_vr = distance(v.row(i), r.row(j));
            let d_tt = distance(t.row(i), t.row(j));
            let gap = d_vr - d_tt;
            loss += gap.abs() * inv_n;
            // Subgradient 0 both at the |.| kink (gap = 0) and at the norm
            // kink (coincident V_i, R_j).
            if gap == 0.0 || d_vr == 0.0 {
                continue;
            }
            let scale = gap.signum() * inv_n / d_vr;
            let (vi, rj) = (v.row(i), r.row(j));
            for k in 0..dim {
                let diff = vi[k] - rj[k];
                grad_v[i * dim + k] += scale * diff;
                grad_r[j * dim + k] -= scale * diff;
            }
        }
    }
    Ok(TgkdGrad { loss, grad_v, grad_r })
}

/// Vision-guided distillation loss:
/// `(1/N) * sum_ij | ||V_i - R_j|| - ||V_i - V_j|| |`.
pub fn vgkd_loss(v: &EmbeddingBatch, r: &EmbeddingBatch) -> Result<f64> {
    check_pairing(v, r)?;
    let n = v.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d_vr = distance(v.row(i), r.row(j));
            let d_vv = distance(v.row(i), v.row(j));
            loss += (d_vr - d_vv).abs();
        }
    }
    Ok(loss / n as f64)
}

/// Softmax over the dot products of one embedding against every text vector.
pub fn classify(v: &[f64], text: &EmbeddingBatch) -> Result<Vec<f64>> {
    if v.len() != text.dim() {
        return Err(Error::ShapeMismatch(format!(
            "embedding dim {} does not match text dim {}",
            v.len(),
            text.dim()
        )));
    }
    let logits: Vec<f64> =
        (0..text.len()).map(|j| v.iter().zip(text.row(j)).map(|(a, b)| a * b).sum()).collect();
    Ok(softmax(&logits))
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood of the labeled class.
pub fn cross_entropy(scores: &[f64], label: usize) -> Result<f64> {
    if label >= scores.len() {
        return Err(Error::InvalidArgument(format!(
            "label {label} out of range for {} classes",
            scores.len()
        )));
    }
    Ok(-scores[label].ln())
}

/// Fused classification cross-entropy with its gradient w.r.t. the input
/// embedding: `grad = sum_j (p_j - [j == label]) * t_j`.
pub struct ClassifyCeGrad {
    pub loss: f64,
    pub scores: Vec<f64>,
    pub grad_v: Vec<f64>,
}

pub fn classify_ce_grad(
    v: &[f64],
    text: &EmbeddingBatch,
    label: usize,
) -> Result<ClassifyCeGrad> {
    let scores = classify(v, text)?;
    let loss = cross_entropy(&scores, label)?;
    let mut grad_v = vec![0.0; v.len()];
    for (j, &p) in scores.iter().enumerate() {
        let coeff = p - if j == label { 1.0 } else { 0.0 };
        for (g, t) in grad_v.iter_mut().zip(text.row(j)) {
            *g += coeff * t;
        }
    }
    Ok(ClassifyCeGrad { loss, scores, grad_v })
}

/// Linear centered kernel alignment between two feature matrices with the
/// same row count: `||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F)` with
/// column-centered Xc, Yc. Result clamped to [0, 1].
pub fn linear_cka(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.rows() != y.rows() {
        return Err(Error::ShapeMismatch(format!(
            "feature matrices need equal row counts, got {} and {}",
            x.rows(),
            y.rows()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidArgument("CKA needs at least 2 rows".into()));
    }
    let xc = center_columns(x);
    let yc = center_columns(y);
    let gram_x = xc.transpose().matmul(&xc)?;
    let gram_y = yc.transpose().matmul(&yc)?;
    let denom = gram_x.frobenius_norm() * gram_y.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument(
            "CKA undefined for zero-variance (constant) features".into(),
        ));
    }
    let cross = yc.transpose().matmul(&xc)?;
    let num = cross.frobenius_norm().powi(2);
    Ok((num / denom).clamp(0.0, 1.0))
}

fn center_columns(m: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for j in 0..m.cols() {
        let mean: f64 = (0..m.rows()).map(|i| m.get(i, j)).sum::<f64>() / m.rows() as f64;
        for i in 0..m.rows() {
            out.set(i, j, m.get(i, j) - mean);
        }
    }
    out
}
