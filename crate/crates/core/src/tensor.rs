//! Dense matrices and third-order tensors with mode-n algebra.
//!
//! Layout conventions used everywhere in the crate:
//!
//! * [`Mat`] is row-major: entry `(r, c)` lives at `r * cols + c`.
//! * [`Tensor3`] stores mode-1 fastest: entry `(i, j, k)` lives at
//!   `i + d1 * (j + d2 * k)`.
//! * The mode-n unfolding puts mode `n` on the rows; the remaining two indices
//!   index the columns with the lower-numbered mode varying fastest. For
//!   mode 3 that is column `i + d1 * j`, so the mode-3 unfolding of a
//!   `W x H x S` image is the `S x (W*H)` matrix whose columns are pixel spectra.
//!
//! Zero-sized dimensions are allowed. They show up when an optional block of
//! the fusion model (for instance an empty residual subspace) is switched off.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat({}x{})", self.rows, self.cols)
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major backing slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · self`.
    pub fn gram(&self) -> Mat {
        let n = self.cols;
        let mut out = Mat::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let a = row[i];
                if a == 0.0 {
                    continue;
                }
                for j in i..n {
                    out.data[i * n + j] += a * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i];
            }
        }
        out
    }

    /// `self · selfᵀ`.
    pub fn outer_gram(&self) -> Mat {
        let n = self.rows;
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                out.data[i * n + j] = v;
                out.data[j * n + i] = v;
            }
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Adds `s` to every diagonal entry in place.
    pub fn add_diag(&mut self, s: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += s;
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Mat {
        assert!(start <= end && end <= self.cols, "column range out of bounds");
        Mat::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Mat) -> Result<Mat> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "hcat of {} and {} rows",
                self.rows, other.rows
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols + other.cols, |r, c| {
            if c < self.cols {
                self.get(r, c)
            } else {
                other.get(r, c - self.cols)
            }
        }))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Dense real tensor of order three, mode-1 fastest.
#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor3({}x{}x{})", self.dims[0], self.dims[1], self.dims[2])
    }
}

impl Tensor3 {
    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self {
            dims: [d1, d2, d3],
            data: vec![0.0; d1 * d2 * d3],
        }
    }

    pub fn filled(d1: usize, d2: usize, d3: usize, value: f64) -> Self {
        Self {
            dims: [d1, d2, d3],
            data: vec![value; d1 * d2 * d3],
        }
    }

    /// Wraps `data`, which must already be in mode-1-fastest order.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let expected = dims[0] * dims[1] * dims[2];
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {}x{}x{} tensor",
                data.len(),
                dims[0],
                dims[1],
                dims[2]
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data".into()));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(d1: usize, d2: usize, d3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for k in 0..d3 {
            for j in 0..d2 {
                for i in 0..d1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self {
            dims: [d1, d2, d3],
            data,
        }
    }

    #[inline]
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Frontal slice `k` (a `d1 x d2` image, mode-1 fastest).
    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.dims[0] * self.dims[1];
        &self.data[k * n..(k + 1) * n]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.dims[0] * self.dims[1];
        &mut self.data[k * n..(k + 1) * n]
    }

    /// Spectrum (mode-3 fiber) at pixel `(i, j)`.
    pub fn fiber3(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.dims[2]).map(|k| self.get(i, j, k)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_same(&self, other: &Tensor3) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        Ok(self.map_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.check_same(other)?;
        Ok(self.map_with(other, |a, b| a - b))
    }

    fn map_with(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `a * self + b * other`, elementwise.
    pub fn lincomb(&self, a: f64, other: &Tensor3, b: f64) -> Result<Tensor3> {
        self.check_same(other)?;
        Ok(self.map_with(other, |x, y| a * x + b * y))
    }

    /// Squared Frobenius distance to `other`.
    pub fn dist_sq(&self, other: &Tensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

fn check_mode(mode: usize) -> Result<usize> {
    match mode {
        1..=3 => Ok(mode - 1),
        _ => Err(Error::InvalidMode(mode)),
    }
}

/// Mode-`mode` unfolding (`mode` is 1-based).
pub fn unfold(t: &Tensor3, mode: usize) -> Result<Mat> {
    let m = check_mode(mode)?;
    let [d1, d2, d3] = t.dims;
    let out = match m {
        0 => Mat::from_fn(d1, d2 * d3, |i, col| t.get(i, col % d2.max(1), col / d2.max(1))),
        1 => Mat::from_fn(d2, d1 * d3, |j, col| t.get(col % d1.max(1), j, col / d1.max(1))),
        _ => {
            // Columns are pixels in storage order, so each row is a frontal slice.
            let n = d1 * d2;
            let mut data = Vec::with_capacity(d3 * n);
            for k in 0..d3 {
                data.extend_from_slice(t.slice(k));
            }
            Mat {
                rows: d3,
                cols: n,
                data,
            }
        }
    };
    Ok(out)
}

/// Inverse of [`unfold`] for a tensor of shape `dims`.
pub fn fold(m: &Mat, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
    let md = check_mode(mode)?;
    let [d1, d2, d3] = dims;
    let (er, ec) = match md {
        0 => (d1, d2 * d3),
        1 => (d2, d1 * d3),
        _ => (d3, d1 * d2),
    };
    if m.rows != er || m.cols != ec {
        return Err(Error::DimensionMismatch(format!(
            "cannot fold {}x{} into mode-{} of {:?}",
            m.rows, m.cols, mode, dims
        )));
    }
    let t = match md {
        0 => Tensor3::from_fn(d1, d2, d3, |i, j, k| m.get(i, j + d2 * k)),
        1 => Tensor3::from_fn(d1, d2, d3, |i, j, k| m.get(j, i + d1 * k)),
        _ => Tensor3 {
            dims,
            data: m.data.clone(),
        },
    };
    Ok(t)
}

/// Mode-n product `t ×ₙ m`: contracts mode `mode` of `t` with the columns of `m`.
pub fn mode_n_product(t: &Tensor3, m: &Mat, mode: usize) -> Result<Tensor3> {
    let md = check_mode(mode)?;
    let [d1, d2, d3] = t.dims;
    if m.cols != t.dims[md] {
        return Err(Error::DimensionMismatch(format!(
            "mode-{} product of {:?} tensor with {}x{} matrix",
            mode, t.dims, m.rows, m.cols
        )));
    }
    let r = m.rows;
    match md {
        0 => {
            let mut out = Tensor3::zeros(r, d2, d3);
            for (fiber, out_fiber) in t.data.chunks_exact(d1.max(1)).zip(out.data.chunks_exact_mut(r.max(1))) {
                if d1 == 0 || r == 0 {
                    break;
                }
                for (a, o) in out_fiber.iter_mut().enumerate() {
                    *o = m.row(a).iter().zip(fiber).map(|(x, y)| x * y).sum();
                }
            }
            Ok(out)
        }
        1 => {
            let mut out = Tensor3::zeros(d1, r, d3);
            for k in 0..d3 {
                for b in 0..r {
                    let dst = b * d1 + k * d1 * r;
                    for j in 0..d2 {
                        let w = m.get(b, j);
                        if w == 0.0 {
                            continue;
                        }
                        let src = j * d1 + k * d1 * d2;
                        for i in 0..d1 {
                            out.data[dst + i] += w * t.data[src + i];
                        }
                    }
                }
            }
            Ok(out)
        }
        _ => {
            let n = d1 * d2;
            let mut out = Tensor3::zeros(d1, d2, r);
            for c in 0..r {
                let dst = &mut out.data[c * n..(c + 1) * n];
                for k in 0..d3 {
                    let w = m.get(c, k);
                    if w == 0.0 {
                        continue;
                    }
                    for (o, x) in dst.iter_mut().zip(&t.data[k * n..(k + 1) * n]) {
                        *o += w * x;
                    }
                }
            }
            Ok(out)
        }
    }
}

/// `t ×₁ a ×₂ b`, the separable spatial operator used by the HSI model.
pub fn spatial_product(t: &Tensor3, a: &Mat, b: &Mat) -> Result<Tensor3> {
    mode_n_product(&mode_n_product(t, a, 1)?, b, 2)
}

impl Tensor3 {
    pub fn unfold(&self, mode: usize) -> Result<Mat> {
        unfold(self, mode)
    }

    pub fn mode_product(&self, m: &Mat, mode: usize) -> Result<Tensor3> {
        mode_n_product(self, m, mode)
    }
}
