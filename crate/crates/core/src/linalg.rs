//! Dense matrix helpers and a symmetric eigensolver.
//!
//! Everything here is f64 and row-major. The solver is a cyclic Jacobi
//! iteration, which is slow for big matrices but exact enough for the
//! layer-sized Gram matrices this crate works with, and has no external
//! dependencies.

use crate::error::{Error, Result};

/// Row-major dense f64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Reshape a tensor into a 2-D matrix for spectral analysis.
///
/// The leading axis is kept and all trailing axes are flattened, so a
/// `[d0, d1, ..., dk]` tensor becomes `d0 x (d1*...*dk)`. The result is then
/// transposed if needed so that rows >= cols, which keeps the Gram matrix
/// below at the smaller of the two dimensions. Tensors need at least two
/// axes; vectors have no meaningful spectrum here.
pub fn matricize(shape: &[usize], data: &[f64]) -> Result<DenseMatrix> {
    if shape.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "matricize needs at least 2 axes, got shape {shape:?}"
        )));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!("zero-sized axis in shape {shape:?}")));
    }
    let d0 = shape[0];
    let rest: usize = shape[1..].iter().product();
    let m = DenseMatrix::new(d0, rest, data.to_vec())?;
    if m.rows() >= m.cols() {
        Ok(m)
    } else {
        Ok(m.transpose())
    }
}

/// Gram matrix W^T W, built exactly symmetric (upper triangle mirrored).
pub fn correlation_matrix(w: &DenseMatrix) -> DenseMatrix {
    let m = w.cols();
    let mut out = DenseMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for k in 0..w.rows() {
                acc += w.get(k, i) * w.get(k, j);
            }
            out.set(i, j, acc);
            out.set(j, i, acc);
        }
    }
    out
}

/// Relative tolerance applied to the symmetry precondition of
/// [`sym_eigenvalues`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Sweep cap for the Jacobi iteration.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Convergence threshold: the off-diagonal Frobenius norm must fall below
/// this times the Frobenius norm of the input.
pub const JACOBI_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi rotations.
///
/// The input must be square and symmetric to within [`SYMMETRY_TOLERANCE`]
/// relative to its Frobenius norm. Convergence is declared when the
/// off-diagonal mass drops below [`JACOBI_RELATIVE_TOLERANCE`] relative to
/// the input norm; the relative test makes the solver insensitive to a
/// uniform rescaling of the input.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::ShapeMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let mut max_asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a.get(i, j) - a.get(j, i)).abs());
        }
    }
    if max_asym / norm > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric {
            asymmetry: max_asym / norm,
            tolerance: SYMMETRY_TOLERANCE,
        });
    }

    let mut m = a.data.clone();
    let idx = |i: usize, j: usize| i * n + j;
    let threshold = JACOBI_RELATIVE_TOLERANCE * norm;

    let off_diagonal = |m: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += m[idx(i, j)] * m[idx(i, j)];
                }
            }
        }
        acc.sqrt()
    };

    let mut off = off_diagonal(&m);
    let mut sweeps = 0;
    while off > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, off_diagonal: off });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[idx(p, p)];
                let aqq = m[idx(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                // With theta = +-inf this degrades gracefully to t = 0.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[idx(p, p)] = app - t * apq;
                m[idx(q, q)] = aqq + t * apq;
                m[idx(p, q)] = 0.0;
                m[idx(q, p)] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m[idx(k, p)];
                    let akq = m[idx(k, q)];
                    let new_kp = c * akp - s * akq;
                    let new_kq = s * akp + c * akq;
                    m[idx(k, p)] = new_kp;
                    m[idx(p, k)] = new_kp;
                    m[idx(k, q)] = new_kq;
                    m[idx(q, k)] = new_kq;
                }
            }
        }
        sweeps += 1;
        off = off_diagonal(&m);
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| m[idx(i, i)]).collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    Ok(eigenvalues)
}
