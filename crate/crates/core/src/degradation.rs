//! Observation operators: separable blur + decimation for the hyperspectral
//! image, a spectral response for the multispectral image, and additive
//! Gaussian noise calibrated to an exact SNR.

use crate::error::{Error, Result};
use crate::tensor::{mode_n_product, spatial_product, Mat, Tensor3};

/// Maps an out-of-range index back into `0..n` by half-sample symmetric
/// reflection (`-1 -> 0`, `n -> n-1`).
fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = idx.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Normalized 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub(crate) fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(0.0) as usize;
    let taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let t = i as f64 - radius as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|v| v / sum).collect()
}

/// `n x n` Gaussian convolution matrix with reflective boundaries.
pub(crate) fn gaussian_conv_matrix(n: usize, sigma: f64) -> Mat {
    let taps = gaussian_taps(sigma);
    let radius = (taps.len() / 2) as isize;
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for (t, w) in taps.iter().enumerate() {
            let src = reflect(i as isize + t as isize - radius, n);
            k.set(i, src, k.get(i, src) + w);
        }
    }
    k
}

/// `(n_hi / sf) x n_hi` matrix that blurs with a Gaussian of width `sigma`
/// (radius `ceil(3 sigma)`, reflective boundary) and keeps every `sf`-th
/// sample starting at index 0. Every row sums to one.
pub fn blur_downsample_matrix(n_hi: usize, sf: usize, sigma: f64) -> Result<Mat> {
    if sf == 0 || n_hi == 0 || n_hi % sf != 0 {
        return Err(Error::InvalidArgument(format!(
            "downsampling factor {sf} does not divide {n_hi}"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("blur sigma must be positive, got {sigma}")));
    }
    let k = gaussian_conv_matrix(n_hi, sigma);
    Ok(Mat::from_fn(n_hi / sf, n_hi, |r, c| k.get(r * sf, c)))
}

/// `s x S` spectral response averaging contiguous blocks of bands. Block `j`
/// covers bands `floor(j S / s) .. floor((j+1) S / s)`.
pub fn band_average_srf(bands: usize, ms_bands: usize) -> Result<Mat> {
    if ms_bands == 0 || ms_bands > bands {
        return Err(Error::InvalidArgument(format!(
            "cannot average {bands} bands into {ms_bands}"
        )));
    }
    let mut r = Mat::zeros(ms_bands, bands);
    for j in 0..ms_bands {
        let lo = j * bands / ms_bands;
        let hi = (j + 1) * bands / ms_bands;
        let w = 1.0 / (hi - lo) as f64;
        for c in lo..hi {
            r.set(j, c, w);
        }
    }
    Ok(r)
}

/// Target SNR and seed for one noise realization. `snr_db = +inf` disables noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed }
    }

    pub fn noiseless() -> Self {
        Self {
            snr_db: f64::INFINITY,
            seed: 0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in (0, 1], keyed by `(seed, counter)`.
fn keyed_uniform(seed: u64, counter: u64) -> f64 {
    let bits = splitmix64(splitmix64(seed) ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw for element `index`; independent of evaluation order.
pub(crate) fn keyed_normal(seed: u64, index: u64) -> f64 {
    let u1 = keyed_uniform(seed, 2 * index);
    let u2 = keyed_uniform(seed, 2 * index + 1);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Derives an independent 64-bit seed for a named sub-stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Adds white Gaussian noise rescaled so that the realized
/// `10 log10(‖t‖² / ‖n‖²)` equals `spec.snr_db`.
pub fn add_noise_snr(t: &Tensor3, spec: NoiseSpec) -> Result<Tensor3> {
    if spec.is_noiseless() {
        return Ok(t.clone());
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid SNR {}", spec.snr_db)));
    }
    let signal = t.norm_sq();
    if !(signal > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let noise: Vec<f64> = (0..t.len() as u64).map(|i| keyed_normal(spec.seed, i)).collect();
    let raw: f64 = noise.iter().map(|v| v * v).sum();
    let target = signal * 10f64.powf(-spec.snr_db / 10.0);
    let scale = (target / raw).sqrt();
    let data = t
        .as_slice()
        .iter()
        .zip(&noise)
        .map(|(x, n)| x + scale * n)
        .collect();
    Tensor3::from_vec(t.dims(), data)
}

/// Operator bundle for one observation scenario.
#[derive(Clone, Debug)]
pub struct DegradationModel {
    /// `w x W`.
    pub p1: Mat,
    /// `h x H`.
    pub p2: Mat,
    /// Nominal spectral response, `s x S`.
    pub r: Mat,
    pub hsi_snr_db: f64,
    pub msi_snr_db: f64,
    pub sf: usize,
    pub blur_sigma: f64,
}

impl DegradationModel {
    /// Gaussian blur + decimation spatially, band averaging spectrally.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        ms_bands: usize,
        sf: usize,
        blur_sigma: f64,
        hsi_snr_db: f64,
        msi_snr_db: f64,
    ) -> Result<Self> {
        Ok(Self {
            p1: blur_downsample_matrix(width, sf, blur_sigma)?,
            p2: blur_downsample_matrix(height, sf, blur_sigma)?,
            r: band_average_srf(bands, ms_bands)?,
            hsi_snr_db,
            msi_snr_db,
            sf,
            blur_sigma,
        })
    }

    /// High-resolution grid `(W, H)`.
    pub fn hr_dims(&self) -> (usize, usize) {
        (self.p1.cols(), self.p2.cols())
    }

    /// Low-resolution grid `(w, h)`.
    pub fn lr_dims(&self) -> (usize, usize) {
        (self.p1.rows(), self.p2.rows())
    }

    pub fn bands(&self) -> usize {
        self.r.cols()
    }

    pub fn ms_bands(&self) -> usize {
        self.r.rows()
    }
}

/// `x ×₁ P1 ×₂ P2` plus calibrated noise.
pub fn observe_hsi(x: &Tensor3, model: &DegradationModel, noise: NoiseSpec) -> Result<Tensor3> {
    let [w, h, s] = x.dims();
    if (w, h) != model.hr_dims() || s != model.bands() {
        return Err(Error::DimensionMismatch(format!(
            "scene {:?} vs model grid {:?} with {} bands",
            x.dims(),
            model.hr_dims(),
            model.bands()
        )));
    }
    add_noise_snr(&spatial_product(x, &model.p1, &model.p2)?, noise)
}

/// `x ×₃ srf_true` plus calibrated noise.
pub fn observe_msi(x: &Tensor3, srf_true: &Mat, noise: NoiseSpec) -> Result<Tensor3> {
    if srf_true.cols() != x.dims()[2] {
        return Err(Error::DimensionMismatch(format!(
            "spectral response has {} columns, scene has {} bands",
            srf_true.cols(),
            x.dims()[2]
        )));
    }
    add_noise_snr(&mode_n_product(x, srf_true, 3)?, noise)
}

/// Nearest-neighbour upsampling of every band by `sf`.
pub fn nearest_upsample(y: &Tensor3, sf: usize) -> Tensor3 {
    let [w, h, s] = y.dims();
    Tensor3::from_fn(w * sf, h * sf, s, |i, j, k| y.get(i / sf, j / sf, k))
}

/// Nearest-neighbour upsampling to an arbitrary `big_w x big_h` grid.
pub fn nearest_upsample_to(y: &Tensor3, big_w: usize, big_h: usize) -> Tensor3 {
    let [w, h, s] = y.dims();
    Tensor3::from_fn(big_w, big_h, s, |i, j, k| y.get(i * w / big_w, j * h / big_h, k))
}
