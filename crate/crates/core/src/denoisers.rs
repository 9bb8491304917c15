//! Plug-and-play denoisers for the prior step of the low-rank coefficient
//! update. Every built-in works band by band on the spatial plane.

use std::fmt;
use std::str::FromStr;

use crate::degradation::gaussian_conv_matrix;
use crate::error::{Error, Result};
use crate::tensor::{spatial_product, Tensor3};

/// Denoiser choice. The solver passes `λ/μ` as the strength; each kind maps
/// it to its own parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DenoiserKind {
    Identity,
    /// Separable Gaussian smoothing with `sigma = strength * sigma_per_strength`.
    Gaussian { sigma_per_strength: f64 },
    /// Orthonormal Haar transform, soft thresholding of detail coefficients at
    /// `strength`, inverse transform.
    HaarSoft { levels: usize },
}

impl DenoiserKind {
    pub const fn gaussian() -> Self {
        DenoiserKind::Gaussian {
            sigma_per_strength: 3.0,
        }
    }

    pub const fn haar_soft() -> Self {
        DenoiserKind::HaarSoft { levels: 2 }
    }
}

impl Default for DenoiserKind {
    fn default() -> Self {
        Self::gaussian()
    }
}

impl fmt::Display for DenoiserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenoiserKind::Identity => write!(f, "identity"),
            DenoiserKind::Gaussian { sigma_per_strength } => write!(f, "gaussian:{sigma_per_strength}"),
            DenoiserKind::HaarSoft { levels } => write!(f, "haar_soft:{levels}"),
        }
    }
}

impl FromStr for DenoiserKind {
    type Err = Error;

    /// Accepts `identity`, `gaussian[:sigma_per_strength]`, `haar_soft[:levels]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let bad = || Error::Config(format!("invalid denoiser '{s}'"));
        match (name, arg) {
            ("identity", None) => Ok(DenoiserKind::Identity),
            ("gaussian", None) => Ok(DenoiserKind::gaussian()),
            ("gaussian", Some(a)) => {
                let v: f64 = a.parse().map_err(|_| bad())?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(bad());
                }
                Ok(DenoiserKind::Gaussian { sigma_per_strength: v })
            }
            ("haar_soft", None) => Ok(DenoiserKind::haar_soft()),
            ("haar_soft", Some(a)) => Ok(DenoiserKind::HaarSoft {
                levels: a.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

pub trait Denoiser {
    fn denoise(&self, t: &Tensor3, strength: f64) -> Result<Tensor3>;
}

impl Denoiser for DenoiserKind {
    fn denoise(&self, t: &Tensor3, strength: f64) -> Result<Tensor3> {
        denoise(t, *self, strength)
    }
}

pub fn denoise(t: &Tensor3, kind: DenoiserKind, strength: f64) -> Result<Tensor3> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "denoiser strength must be non-negative, got {strength}"
        )));
    }
    if strength == 0.0 {
        return Ok(t.clone());
    }
    match kind {
        DenoiserKind::Identity => Ok(t.clone()),
        DenoiserKind::Gaussian { sigma_per_strength } => {
            let sigma = strength * sigma_per_strength;
            if sigma == 0.0 {
                return Ok(t.clone());
            }
            let [w, h, _] = t.dims();
            spatial_product(t, &gaussian_conv_matrix(w, sigma), &gaussian_conv_matrix(h, sigma))
        }
        DenoiserKind::HaarSoft { levels } => {
            let [w, h, s] = t.dims();
            let mut out = t.clone();
            for k in 0..s {
                let band = haar_shrink(t.slice(k), w, h, levels, strength);
                out.slice_mut(k).copy_from_slice(&band);
            }
            Ok(out)
        }
    }
}

fn soft(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v < -thr {
        v + thr
    } else {
        0.0
    }
}

/// Multi-level 2-D Haar shrinkage of a `w x h` image stored column-fastest
/// (`i + w * j`). Odd sizes are padded by edge replication at each level and
/// cropped back after reconstruction.
pub(crate) fn haar_shrink(img: &[f64], w: usize, h: usize, levels: usize, thr: f64) -> Vec<f64> {
    if levels == 0 || w < 2 || h < 2 {
        return img.to_vec();
    }
    let (pw, ph) = (w + w % 2, h + h % 2);
    let at = |i: usize, j: usize| img[i.min(w - 1) + w * j.min(h - 1)];
    let (hw, hh) = (pw / 2, ph / 2);
    let n = hw * hh;
    let (mut ll, mut lh, mut hl, mut hhb) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for j in 0..hh {
        for i in 0..hw {
            let a = at(2 * i, 2 * j);
            let b = at(2 * i + 1, 2 * j);
            let c = at(2 * i, 2 * j + 1);
            let d = at(2 * i + 1, 2 * j + 1);
            let o = i + hw * j;
            ll[o] = 0.5 * (a + b + c + d);
            lh[o] = 0.5 * (a - b + c - d);
            hl[o] = 0.5 * (a + b - c - d);
            hhb[o] = 0.5 * (a - b - c + d);
        }
    }
    for band in [&mut lh, &mut hl, &mut hhb] {
        for v in band.iter_mut() {
            *v = soft(*v, thr);
        }
    }
    let ll = haar_shrink(&ll, hw, hh, levels - 1, thr);
    let mut out = vec![0.0; w * h];
    for j in 0..hh {
        for i in 0..hw {
            let o = i + hw * j;
            let (s, x, y, z) = (ll[o], lh[o], hl[o], hhb[o]);
            let vals = [
                (2 * i, 2 * j, 0.5 * (s + x + y + z)),
                (2 * i + 1, 2 * j, 0.5 * (s - x + y - z)),
                (2 * i, 2 * j + 1, 0.5 * (s + x - y - z)),
                (2 * i + 1, 2 * j + 1, 0.5 * (s - x - y + z)),
            ];
            for (ii, jj, v) in vals {
                if ii < w && jj < h {
                    out[ii + w * jj] = v;
                }
            }
        }
    }
    out
}
