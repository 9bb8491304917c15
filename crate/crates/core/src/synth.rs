//! Synthetic scenes built by linear mixing, and observation pairs whose
//! multispectral side carries a perturbed spectral response and a localized
//! change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degradation::{
    derive_seed, gaussian_conv_matrix, observe_hsi, observe_msi, DegradationModel, NoiseSpec,
};
use crate::error::{Error, Result};
use crate::tensor::{spatial_product, Mat, Tensor3};

const STREAM_ENDMEMBERS: u64 = 1;
const STREAM_ABUNDANCE: u64 = 2;
const STREAM_DR: u64 = 3;
const STREAM_CHANGE: u64 = 4;
const STREAM_HSI_NOISE: u64 = 5;
const STREAM_MSI_NOISE: u64 = 6;
const STREAM_CHANGE_MIX: u64 = 7;

/// Softmax sharpness applied to the unit-variance smoothed fields.
const ABUNDANCE_TEMPERATURE: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub n_endmembers: usize,
    pub seed: u64,
    /// `‖ΔR‖_F / ‖R‖_F` of the true spectral-response deviation.
    pub dr_magnitude: f64,
    /// Fraction of pixels inside the changed rectangle.
    pub change_fraction: f64,
}

impl SceneSpec {
    pub fn new(width: usize, height: usize, bands: usize, n_endmembers: usize, seed: u64) -> Self {
        Self {
            width,
            height,
            bands,
            n_endmembers,
            seed,
            dr_magnitude: 0.0,
            change_fraction: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 || self.n_endmembers == 0 {
            return Err(Error::InvalidArgument("scene dimensions and endmember count must be positive".into()));
        }
        if self.n_endmembers > self.bands {
            return Err(Error::InvalidArgument(format!(
                "{} endmembers exceed {} bands",
                self.n_endmembers, self.bands
            )));
        }
        if !(self.dr_magnitude >= 0.0) || !self.dr_magnitude.is_finite() {
            return Err(Error::InvalidArgument(format!("dR magnitude {} must be non-negative", self.dr_magnitude)));
        }
        if !(0.0..=1.0).contains(&self.change_fraction) {
            return Err(Error::InvalidArgument(format!(
                "change fraction {} outside [0, 1]",
                self.change_fraction
            )));
        }
        Ok(())
    }

    /// Key-value record of every generation parameter.
    pub fn to_kv_string(&self) -> String {
        format!(
            "width = {}\nheight = {}\nbands = {}\nendmembers = {}\nseed = {}\ndr_magnitude = {}\nchange_fraction = {}\n",
            self.width, self.height, self.bands, self.n_endmembers, self.seed, self.dr_magnitude, self.change_fraction
        )
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut spec = SceneSpec::new(0, 0, 0, 0, 0);
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key = value, got '{line}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || Error::Config(format!("invalid value for {k}: '{v}'"));
            match k {
                "width" => spec.width = v.parse().map_err(|_| bad())?,
                "height" => spec.height = v.parse().map_err(|_| bad())?,
                "bands" => spec.bands = v.parse().map_err(|_| bad())?,
                "endmembers" => spec.n_endmembers = v.parse().map_err(|_| bad())?,
                "seed" => spec.seed = v.parse().map_err(|_| bad())?,
                "dr_magnitude" => spec.dr_magnitude = v.parse().map_err(|_| bad())?,
                "change_fraction" => spec.change_fraction = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// `S x n` matrix of endmember spectra: random walks with uniform increments,
/// lightly smoothed and mapped affinely onto `[0.05, 0.95]`.
pub fn endmembers(spec: &SceneSpec) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_ENDMEMBERS));
    let s = spec.bands;
    let smooth = gaussian_conv_matrix(s, 1.5);
    let mut out = Mat::zeros(s, spec.n_endmembers);
    for p in 0..spec.n_endmembers {
        let mut walk = vec![0.0; s];
        let mut acc = 0.0;
        for v in walk.iter_mut() {
            acc += rng.random_range(-1.0..1.0);
            *v = acc;
        }
        let curve: Vec<f64> = (0..s)
            .map(|b| smooth.row(b).iter().zip(&walk).map(|(a, w)| a * w).sum())
            .collect();
        let lo = curve.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (b, v) in curve.iter().enumerate() {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            out.set(b, p, 0.05 + 0.9 * t);
        }
    }
    out
}

/// `W x H x n` abundance maps: smoothed white noise standardized per map,
/// then a per-pixel softmax so abundances are positive and sum to one.
fn abundances(spec: &SceneSpec, stream: u64) -> Result<Tensor3> {
    let (w, h, n) = (spec.width, spec.height, spec.n_endmembers);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, stream));
    let white = Tensor3::from_fn(w, h, n, |_, _, _| rng.random_range(-1.0..1.0));
    let sigma = (w.min(h) as f64 / 8.0).max(1.0);
    let mut fields = spatial_product(&white, &gaussian_conv_matrix(w, sigma), &gaussian_conv_matrix(h, sigma))?;
    for p in 0..n {
        let band = fields.slice_mut(p);
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        let var = band.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / band.len() as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for v in band.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    let mut out = Tensor3::zeros(w, h, n);
    for j in 0..h {
        for i in 0..w {
            let top = (0..n).map(|p| fields.get(i, j, p)).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = (0..n)
                .map(|p| (ABUNDANCE_TEMPERATURE * (fields.get(i, j, p) - top)).exp())
                .collect();
            let total: f64 = weights.iter().sum();
            for (p, wt) in weights.iter().enumerate() {
                out.set(i, j, p, wt / total);
            }
        }
    }
    Ok(out)
}

/// Per-pixel abundance maps of the scene produced by [`generate_scene`].
pub fn scene_abundances(spec: &SceneSpec) -> Result<Tensor3> {
    spec.validate()?;
    abundances(spec, STREAM_ABUNDANCE)
}

/// `X = A ×₃ M` with endmember matrix `M` and softmax abundances `A`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Tensor3> {
    spec.validate()?;
    let a = abundances(spec, STREAM_ABUNDANCE)?;
    a.mode_product(&endmembers(spec), 3)
}

/// Smooth deviation of `r` supported on each row's nonzero entries, with
/// every row summing to zero and `‖ΔR‖_F = magnitude · ‖R‖_F`.
pub fn spectral_deviation(r: &Mat, magnitude: f64, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_DR));
    let mut dr = Mat::zeros(r.rows(), r.cols());
    for row in 0..r.rows() {
        let support: Vec<usize> = (0..r.cols()).filter(|&b| r.get(row, b) > 0.0).collect();
        let n = support.len();
        let coeffs: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        if n < 2 {
            continue;
        }
        let ripple: Vec<f64> = (0..n)
            .map(|t| {
                let x = t as f64 / (n - 1) as f64;
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(q, c)| c * (std::f64::consts::PI * (q + 1) as f64 * x).cos())
                    .sum()
            })
            .collect();
        let vals: Vec<f64> = support.iter().zip(&ripple).map(|(&b, v)| r.get(row, b) * v).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        for (&b, v) in support.iter().zip(&vals) {
            dr.set(row, b, v - mean);
        }
    }
    let norm = dr.frobenius_norm();
    if norm > 0.0 {
        dr.scale(magnitude * r.frobenius_norm() / norm)
    } else {
        dr
    }
}

/// `R + ΔR` clipped at zero with rows renormalized to sum to one.
pub fn perturbed_srf(r: &Mat, dr: &Mat) -> Result<Mat> {
    let mut out = r.add(dr)?;
    for row in 0..out.rows() {
        let mut total = 0.0;
        for b in 0..out.cols() {
            let v = out.get(row, b).max(0.0);
            out.set(row, b, v);
            total += v;
        }
        if total <= 0.0 {
            return Err(Error::InvalidArgument(format!("perturbed response row {row} vanished")));
        }
        for b in 0..out.cols() {
            out.set(row, b, out.get(row, b) / total);
        }
    }
    Ok(out)
}

/// Axis-aligned rectangle `[i0, i0 + rw) x [j0, j0 + rh)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChangeRegion {
    pub i0: usize,
    pub j0: usize,
    pub rw: usize,
    pub rh: usize,
}

impl ChangeRegion {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i0 + self.rw && j >= self.j0 && j < self.j0 + self.rh
    }

    pub fn area(&self) -> usize {
        self.rw * self.rh
    }
}

/// Rectangle with the image's aspect ratio covering about
/// `spec.change_fraction` of the pixels at a position drawn from `seed`.
/// `None` when the fraction is zero.
pub fn change_region(spec: &SceneSpec, seed: u64) -> Result<Option<ChangeRegion>> {
    spec.validate()?;
    if spec.change_fraction == 0.0 {
        return Ok(None);
    }
    let (w, h) = (spec.width, spec.height);
    let root = spec.change_fraction.sqrt();
    let rw = ((w as f64 * root).round() as usize).clamp(1, w);
    let rh = ((spec.change_fraction * (w * h) as f64 / rw as f64).round() as usize).min(h);
    if rh == 0 {
        return Err(Error::InvalidArgument(format!(
            "change fraction {} gives an empty rectangle on a {w}x{h} grid",
            spec.change_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_CHANGE));
    let i0 = rng.random_range(0..=w - rw);
    let j0 = rng.random_range(0..=h - rh);
    Ok(Some(ChangeRegion { i0, j0, rw, rh }))
}

/// Observation pair with inter-image variability.
#[derive(Clone, Debug)]
pub struct VariabilityPair {
    /// Hyperspectral observation of the original scene.
    pub y: Tensor3,
    /// Multispectral observation of the changed scene through `srf_true`.
    pub z: Tensor3,
    pub srf_true: Mat,
    /// The deviation before clipping and renormalization.
    pub dr_true: Mat,
    pub x_changed: Tensor3,
    pub region: Option<ChangeRegion>,
}

/// Perturbs the response, replaces the abundances inside the change region by
/// an independent mix of the same endmembers, and observes `x` as the HSI and
/// the changed scene as the MSI. `x` should come from [`generate_scene`] with
/// the same `spec`; `seed` drives the deviation, the region, the replacement
/// abundances and both noise realizations.
pub fn make_variability_pair(
    x: &Tensor3,
    spec: &SceneSpec,
    model: &DegradationModel,
    seed: u64,
) -> Result<VariabilityPair> {
    spec.validate()?;
    if x.dims() != [spec.width, spec.height, spec.bands] {
        return Err(Error::DimensionMismatch(format!(
            "scene {:?} vs spec {}x{}x{}",
            x.dims(),
            spec.width,
            spec.height,
            spec.bands
        )));
    }
    let dr_true = spectral_deviation(&model.r, spec.dr_magnitude, seed);
    // renormalizing would perturb R by rounding alone
    let srf_true = if spec.dr_magnitude == 0.0 {
        model.r.clone()
    } else {
        perturbed_srf(&model.r, &dr_true)?
    };

    let region = change_region(spec, seed)?;
    let x_changed = match region {
        None => x.clone(),
        Some(reg) => {
            let alt = abundances(&SceneSpec { seed, ..spec.clone() }, STREAM_CHANGE_MIX)?;
            let m = endmembers(spec);
            let mut out = x.clone();
            for j in reg.j0..reg.j0 + reg.rh {
                for i in reg.i0..reg.i0 + reg.rw {
                    // Flip the field so the replacement mix differs from the
                    // original even where the two draws happen to agree.
                    let (ai, aj) = (spec.width - 1 - i, spec.height - 1 - j);
                    for b in 0..spec.bands {
                        let v = (0..spec.n_endmembers).map(|p| alt.get(ai, aj, p) * m.get(b, p)).sum();
                        out.set(i, j, b, v);
                    }
                }
            }
            out
        }
    };

    let hsi_noise = NoiseSpec::new(model.hsi_snr_db, derive_seed(seed, STREAM_HSI_NOISE));
    let msi_noise = NoiseSpec::new(model.msi_snr_db, derive_seed(seed, STREAM_MSI_NOISE));
    let y = observe_hsi(x, model, hsi_noise)?;
    let z = observe_msi(&x_changed, &srf_true, msi_noise)?;
    Ok(VariabilityPair {
        y,
        z,
        srf_true,
        dr_true,
        x_changed,
        region,
    })
}
