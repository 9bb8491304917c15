//! Small dense linear algebra: a cyclic Jacobi symmetric eigensolver, Cholesky
//! solves, a truncated left SVD, and the separable ridge solver that gives the
//! coefficient-tensor subproblems their closed form.

use crate::error::{Error, Result};
use crate::tensor::{mode_n_product, Mat, Tensor3};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-10;
const EIG_CLAMP: f64 = 1e-12;

/// Full eigendecomposition `G = Q diag(λ) Qᵀ` of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEig {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Mat,
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// The input is symmetrized before iterating. Sweeps stop once the
/// off-diagonal Frobenius norm drops below `1e-12 * ‖G‖_F` or after 100
/// sweeps. The result is a deterministic function of the input bits.
pub fn sym_eig(g: &Mat) -> Result<SymEig> {
    let (rows, cols) = g.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;
    let norm = g.frobenius_norm();
    let asym = g.sub(&g.transpose())?.frobenius_norm();
    if asym > SYMMETRY_TOL * norm {
        return Err(Error::NotSymmetric(if norm > 0.0 { asym / norm } else { asym }));
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("eigensolver input".into()));
    }

    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (g.get(i, j) + g.get(j, i));
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = JACOBI_TOL * norm;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                // theta == 0 gives signum 1.0 for +0.0, which is what we want.
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps ties in index order, which keeps the output deterministic.
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let eigenvalues = order.iter().map(|&i| a[i * n + i]).collect();
    let eigenvectors = Mat::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &Mat) -> Result<Mat> {
    let (rows, cols) = a.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Solves `A X = B` for symmetric positive-definite `A`.
pub fn cholesky_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "system matrix has {} rows, right-hand side {}",
            a.rows(),
            b.rows()
        )));
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let m = b.cols();
    let mut x = b.clone();
    for c in 0..m {
        // forward: L y = b
        for i in 0..n {
            let mut s = x.get(i, c);
            for k in 0..i {
                s -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x.get(i, c);
            for k in (i + 1)..n {
                s -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, s / l.get(i, i));
        }
    }
    Ok(x)
}

/// Top-`k` left singular vectors of `y` (columns, descending singular value).
///
/// Computed from the eigendecomposition of the row Gram matrix `Y·Yᵀ`, so the
/// cost is governed by the number of rows. Each column's sign is fixed so that
/// its largest-magnitude entry is positive.
pub fn truncated_left_svd(y: &Mat, k: usize) -> Result<Mat> {
    Ok(truncated_left_svd_with_values(y, k)?.0)
}

/// Like [`truncated_left_svd`], also returning all squared singular values in
/// descending order.
pub fn truncated_left_svd_with_values(y: &Mat, k: usize) -> Result<(Mat, Vec<f64>)> {
    let limit = y.rows().min(y.cols());
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!(
            "truncation rank {} outside 1..={}",
            k, limit
        )));
    }
    let eig = sym_eig(&y.outer_gram())?;
    let n = y.rows();
    let mut u = Mat::zeros(n, k);
    for c in 0..k {
        let src = n - 1 - c;
        let col: Vec<f64> = (0..n).map(|r| eig.eigenvectors.get(r, src)).collect();
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (r, v) in col.iter().enumerate() {
            u.set(r, c, sign * v);
        }
    }
    let values = eig.eigenvalues.iter().rev().map(|v| v.max(0.0)).collect();
    Ok((u, values))
}

/// Precomputed eigenbases for minimizing
/// `‖T ×₁ B1 ×₂ B2 ×₃ D − Y‖² + ξ‖T − M‖²` over `T`.
///
/// The normal operator is `(DᵀD) ⊗ (B2ᵀB2) ⊗ (B1ᵀB1) + ξI`, which is
/// diagonalized by the Kronecker product of the three factor eigenbases, so
/// the solve costs three mode products in and three out.
#[derive(Clone, Debug)]
pub struct SeparableRidge {
    b1: Mat,
    b2: Mat,
    d: Mat,
    q1: Mat,
    q2: Mat,
    q3: Mat,
    lam1: Vec<f64>,
    lam2: Vec<f64>,
    lam3: Vec<f64>,
}

fn clamp_spectrum(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    values
        .iter()
        .map(|&v| if v < EIG_CLAMP * max { 0.0 } else { v })
        .collect()
}

impl SeparableRidge {
    pub fn new(b1: &Mat, b2: &Mat, d: &Mat) -> Result<Self> {
        let e1 = sym_eig(&b1.gram())?;
        let e2 = sym_eig(&b2.gram())?;
        let e3 = sym_eig(&d.gram())?;
        Ok(Self {
            b1: b1.clone(),
            b2: b2.clone(),
            d: d.clone(),
            lam1: clamp_spectrum(&e1.eigenvalues),
            lam2: clamp_spectrum(&e2.eigenvalues),
            lam3: clamp_spectrum(&e3.eigenvalues),
            q1: e1.eigenvectors,
            q2: e2.eigenvectors,
            q3: e3.eigenvectors,
        })
    }

    /// Shape of the unknown tensor.
    pub fn unknown_dims(&self) -> [usize; 3] {
        [self.b1.cols(), self.b2.cols(), self.d.cols()]
    }

    pub fn solve(&self, y: &Tensor3, xi: f64, m: &Tensor3) -> Result<Tensor3> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::InvalidArgument(format!("ridge weight must be positive, got {xi}")));
        }
        let [w, h, s] = y.dims();
        if [w, h, s] != [self.b1.rows(), self.b2.rows(), self.d.rows()] {
            return Err(Error::DimensionMismatch(format!(
                "observation {:?} vs operators {}x{}, {}x{}, {}x{}",
                y.dims(),
                self.b1.rows(),
                self.b1.cols(),
                self.b2.rows(),
                self.b2.cols(),
                self.d.rows(),
                self.d.cols()
            )));
        }
        if m.dims() != self.unknown_dims() {
            return Err(Error::DimensionMismatch(format!(
                "prior tensor {:?} vs unknown {:?}",
                m.dims(),
                self.unknown_dims()
            )));
        }
        let back = mode_n_product(
            &mode_n_product(&mode_n_product(y, &self.b1.transpose(), 1)?, &self.b2.transpose(), 2)?,
            &self.d.transpose(),
            3,
        )?;
        let rhs = back.lincomb(1.0, m, xi)?;
        let mut t = mode_n_product(
            &mode_n_product(&mode_n_product(&rhs, &self.q1.transpose(), 1)?, &self.q2.transpose(), 2)?,
            &self.q3.transpose(),
            3,
        )?;
        let [n1, n2, n3] = t.dims();
        let data = t.as_mut_slice();
        let mut idx = 0;
        for k in 0..n3 {
            for j in 0..n2 {
                let l23 = self.lam2[j] * self.lam3[k];
                for i in 0..n1 {
                    data[idx] /= self.lam1[i] * l23 + xi;
                    idx += 1;
                }
            }
        }
        mode_n_product(&mode_n_product(&mode_n_product(&t, &self.q1, 1)?, &self.q2, 2)?, &self.q3, 3)
    }
}

/// One-shot form of [`SeparableRidge::solve`].
pub fn separable_ridge_solve(
    b1: &Mat,
    b2: &Mat,
    d: &Mat,
    y: &Tensor3,
    xi: f64,
    m: &Tensor3,
) -> Result<Tensor3> {
    if !(xi > 0.0) {
        return Err(Error::InvalidArgument(format!("ridge weight must be positive, got {xi}")));
    }
    SeparableRidge::new(b1, b2, d)?.solve(y, xi, m)
}
