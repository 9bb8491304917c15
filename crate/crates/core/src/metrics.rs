//! Quality indices comparing a fused image `est` against a reference `ref`.
//!
//! PSNR, ERGAS, SSIM and UIQI are anchored on the reference (its band maxima,
//! means or dynamic range enter the formula); RMSE and SAM are symmetric.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// PSNR reported for a band with zero error.
pub const PSNR_CAP_DB: f64 = 300.0;
pub const SSIM_WINDOW: usize = 8;
pub const UIQI_BLOCK: usize = 32;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub psnr_per_band: Vec<f64>,
    pub ssim: f64,
    pub ergas: f64,
    pub sam_deg: f64,
    pub rmse: f64,
    pub uiqi: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "psnr_db,ssim,ergas,sam_deg,rmse,uiqi";

    /// Header line plus one data row.
    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            Self::CSV_HEADER,
            self.psnr_db,
            self.ssim,
            self.ergas,
            self.sam_deg,
            self.rmse,
            self.uiqi
        )
    }

    pub fn per_band_csv(&self) -> String {
        let mut out = String::from("band,psnr_db\n");
        for (k, v) in self.psnr_per_band.iter().enumerate() {
            writeln!(out, "{k},{v:.16e}").unwrap();
        }
        out
    }
}

fn check_dims(r: &Tensor3, e: &Tensor3) -> Result<()> {
    if r.dims() != e.dims() {
        return Err(Error::DimensionMismatch(format!(
            "reference {:?} vs estimate {:?}",
            r.dims(),
            e.dims()
        )));
    }
    if r.is_empty() {
        return Err(Error::InvalidArgument("metrics need a non-empty image".into()));
    }
    Ok(())
}

/// Per-band `10 log10(W H max(ref_s)² / ‖ref_s − est_s‖²)` and its mean.
pub fn psnr(r: &Tensor3, e: &Tensor3) -> Result<(f64, Vec<f64>)> {
    check_dims(r, e)?;
    let [w, h, s] = r.dims();
    let per_band: Vec<f64> = (0..s)
        .map(|k| {
            let (rb, eb) = (r.slice(k), e.slice(k));
            let peak = rb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let err: f64 = rb.iter().zip(eb).map(|(a, b)| (a - b) * (a - b)).sum();
            if err == 0.0 {
                PSNR_CAP_DB
            } else {
                (10.0 * ((w * h) as f64 * peak * peak / err).log10()).min(PSNR_CAP_DB)
            }
        })
        .collect();
    let mean = per_band.iter().sum::<f64>() / s as f64;
    Ok((mean, per_band))
}

/// Mean, variances and covariance of two equally sized samples (population
/// normalization).
fn moments(a: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64, f64, f64, f64) {
    let mut n = 0.0;
    let (mut sa, mut sb) = (0.0, 0.0);
    for (x, y) in a.clone() {
        n += 1.0;
        sa += x;
        sb += y;
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in a {
        vaa += (x - ma) * (x - ma);
        vbb += (y - mb) * (y - mb);
        vab += (x - ma) * (y - mb);
    }
    (ma, mb, vaa / n, vbb / n, vab / n)
}

fn window_pairs<'a>(
    rb: &'a [f64],
    eb: &'a [f64],
    w: usize,
    i0: usize,
    j0: usize,
    ww: usize,
    wh: usize,
) -> impl Iterator<Item = (f64, f64)> + Clone + 'a {
    (j0..j0 + wh).flat_map(move |j| (i0..i0 + ww).map(move |i| (rb[i + w * j], eb[i + w * j])))
}

/// Mean over bands of the mean local SSIM over all `8 x 8` windows (stride 1;
/// images smaller than the window use a single window covering the image).
/// Both inputs are mapped by `(v − min(ref)) / (max(ref) − min(ref))` first.
pub fn ssim(r: &Tensor3, e: &Tensor3) -> Result<f64> {
    check_dims(r, e)?;
    let [w, h, s] = r.dims();
    let (lo, hi) = (r.min(), r.max());
    let range = if hi > lo { hi - lo } else { 1.0 };
    let rs = r.map(|v| (v - lo) / range);
    let es = e.map(|v| (v - lo) / range);
    let (ww, wh) = (SSIM_WINDOW.min(w), SSIM_WINDOW.min(h));
    let mut total = 0.0;
    for k in 0..s {
        let (rb, eb) = (rs.slice(k), es.slice(k));
        let mut acc = 0.0;
        let mut count = 0usize;
        for j0 in 0..=(h - wh) {
            for i0 in 0..=(w - ww) {
                let (mx, my, vx, vy, cxy) = moments(window_pairs(rb, eb, w, i0, j0, ww, wh));
                acc += ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                    / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    Ok(total / s as f64)
}

/// `(W H)/(w h) · sqrt(10⁴/S · Σ_s ‖ref_s − est_s‖² / mean(ref_s)²)` with the
/// resolution ratio `(W H)/(w h) = sf²`. This is the literal form with the
/// squared Frobenius norm, not the more common `100/sf` RMSE-based variant.
pub fn ergas(r: &Tensor3, e: &Tensor3, sf: usize) -> Result<f64> {
    check_dims(r, e)?;
    if sf == 0 {
        return Err(Error::InvalidArgument("scale factor must be positive".into()));
    }
    let [w, h, s] = r.dims();
    let mut sum = 0.0;
    for k in 0..s {
        let (rb, eb) = (r.slice(k), e.slice(k));
        let mean = rb.iter().sum::<f64>() / (w * h) as f64;
        let err: f64 = rb.iter().zip(eb).map(|(a, b)| (a - b) * (a - b)).sum();
        if err == 0.0 {
            continue;
        }
        if mean == 0.0 {
            return Err(Error::InvalidArgument(format!("band {k} of the reference has zero mean")));
        }
        sum += err / (mean * mean);
    }
    let ratio = (sf * sf) as f64;
    Ok(ratio * (1e4 / s as f64 * sum).sqrt())
}

/// Mean spectral angle in degrees. The angle is taken as
/// `atan2(sqrt(Σ_{i<j} (a_i b_j − a_j b_i)²), a·b)`, which equals the arccos
/// form but stays accurate for nearly parallel spectra.
pub fn sam(r: &Tensor3, e: &Tensor3) -> Result<f64> {
    check_dims(r, e)?;
    let [w, h, s] = r.dims();
    let mut total = 0.0;
    let (mut a, mut b) = (vec![0.0; s], vec![0.0; s]);
    for j in 0..h {
        for i in 0..w {
            for k in 0..s {
                a[k] = r.get(i, j, k);
                b[k] = e.get(i, j, k);
            }
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            if a.iter().all(|v| *v == 0.0) || b.iter().all(|v| *v == 0.0) {
                return Err(Error::ZeroSpectrum(i, j));
            }
            let mut cross = 0.0;
            for p in 0..s {
                for q in (p + 1)..s {
                    let c = a[p] * b[q] - a[q] * b[p];
                    cross += c * c;
                }
            }
            total += cross.sqrt().atan2(dot);
        }
    }
    Ok((total / (w * h) as f64).to_degrees())
}

pub fn rmse(r: &Tensor3, e: &Tensor3) -> Result<f64> {
    check_dims(r, e)?;
    Ok((r.dist_sq(e)? / r.len() as f64).sqrt())
}

/// Universal image quality index of one block. Degenerate blocks fall back to
/// the factors that remain defined: two constant blocks score their luminance
/// agreement, and a block pair with zero means scores its correlation.
fn uiqi_block(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    let lum = mx * mx + my * my;
    let con = vx + vy;
    match (lum > 0.0, con > 0.0) {
        (true, true) => (2.0 * cxy) * (2.0 * mx * my) / (con * lum),
        (true, false) => 2.0 * mx * my / lum,
        (false, true) => 2.0 * cxy / con,
        (false, false) => 1.0,
    }
}

/// Per band, the index on non-overlapping `32 x 32` blocks (edge blocks may
/// be smaller), averaged over blocks and then over bands.
pub fn uiqi(r: &Tensor3, e: &Tensor3) -> Result<f64> {
    check_dims(r, e)?;
    let [w, h, s] = r.dims();
    let mut total = 0.0;
    for k in 0..s {
        let (rb, eb) = (r.slice(k), e.slice(k));
        let mut acc = 0.0;
        let mut count = 0usize;
        for j0 in (0..h).step_by(UIQI_BLOCK) {
            for i0 in (0..w).step_by(UIQI_BLOCK) {
                let bw = UIQI_BLOCK.min(w - i0);
                let bh = UIQI_BLOCK.min(h - j0);
                let (mx, my, vx, vy, cxy) = moments(window_pairs(rb, eb, w, i0, j0, bw, bh));
                acc += uiqi_block(mx, my, vx, vy, cxy);
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    Ok(total / s as f64)
}

pub fn evaluate(r: &Tensor3, e: &Tensor3, sf: usize) -> Result<MetricReport> {
    let (psnr_db, psnr_per_band) = psnr(r, e)?;
    Ok(MetricReport {
        psnr_db,
        psnr_per_band,
        ssim: ssim(r, e)?,
        ergas: ergas(r, e, sf)?,
        sam_deg: sam(r, e)?,
        rmse: rmse(r, e)?,
        uiqi: uiqi(r, e)?,
    })
}
