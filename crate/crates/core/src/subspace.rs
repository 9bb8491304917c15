//! Spectral dictionaries for the low-rank and residual components, estimated
//! from the observed hyperspectral image by a truncated SVD of its mode-3
//! unfolding.

use crate::error::{Error, Result};
use crate::linalg::truncated_left_svd_with_values;
use crate::tensor::{unfold, Mat, Tensor3};

/// Squared singular values below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-14;

/// Orthonormal dictionaries `D_L` (`S x s1`) and `D_E` (`S x s2`) spanning
/// mutually orthogonal subspaces.
#[derive(Clone, Debug)]
pub struct SubspacePair {
    pub d_l: Mat,
    pub d_e: Mat,
}

impl SubspacePair {
    pub fn s1(&self) -> usize {
        self.d_l.cols()
    }

    pub fn s2(&self) -> usize {
        self.d_e.cols()
    }

    pub fn bands(&self) -> usize {
        self.d_l.rows()
    }

    /// `[D_L | D_E]`.
    pub fn joint(&self) -> Mat {
        self.d_l.hcat(&self.d_e).expect("dictionaries share their row count")
    }
}

/// Leading `s1` left singular vectors of the mode-3 unfolding become `D_L`,
/// the next `s2` become `D_E`.
pub fn estimate_dictionaries(y: &Tensor3, s1: usize, s2: usize) -> Result<SubspacePair> {
    let bands = y.dims()[2];
    let k = s1 + s2;
    if s1 == 0 {
        return Err(Error::InvalidArgument("low-rank subspace dimension must be positive".into()));
    }
    if k > bands {
        return Err(Error::InvalidArgument(format!(
            "subspace dimensions {s1} + {s2} exceed {bands} bands"
        )));
    }
    let pixels = y.dims()[0] * y.dims()[1];
    if k > pixels {
        return Err(Error::RankDeficient {
            needed: k,
            found: pixels,
        });
    }
    let unfolded = unfold(y, 3)?;
    let (u, sq_values) = truncated_left_svd_with_values(&unfolded, k)?;
    let top = sq_values.first().copied().unwrap_or(0.0);
    let rank = sq_values.iter().filter(|v| **v > RANK_TOL * top && top > 0.0).count();
    if rank < k {
        return Err(Error::RankDeficient { needed: k, found: rank });
    }
    Ok(SubspacePair {
        d_l: u.columns(0, s1),
        d_e: u.columns(s1, k),
    })
}
