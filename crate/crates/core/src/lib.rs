//! Fusion of a low-resolution hyperspectral image with a high-resolution
//! multispectral image when the two acquisitions disagree.
//!
//! The target image is modelled as a low-rank component plus a residual
//! component, each written as coefficients times an orthonormal spectral
//! dictionary. The spectral response linking the target to the multispectral
//! image is the nominal response plus an estimated deviation. The model is
//! solved by proximal alternating optimization with a plug-and-play denoiser
//! standing in for the spatial prior.

pub mod cli;
pub mod degradation;
pub mod denoisers;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod solver;
pub mod subspace;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{fold, mode_n_product, unfold, Mat, Tensor3};
