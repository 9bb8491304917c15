//! Proximal alternating optimization for the degradation-based low-rank and
//! residual fusion model.
//!
//! The unknowns are the low-rank coefficients `L` (`W x H x s1`), the residual
//! coefficients `E` (`W x H x s2`) and the spectral-response deviation `dR`
//! (`s x S`). With dictionaries `D_L`, `D_E` the reconstruction is
//! `X = L ×₃ D_L + E ×₃ D_E` and the data term is
//!
//! ```text
//! h(L, E, dR) = ‖X ×₁ P1 ×₂ P2 − Y‖² + τ ‖X ×₃ (R + dR) − Z‖²
//! ```
//!
//! Each outer iteration updates `L`, then `E`, then `dR`, each with a proximal
//! term `(η/2)‖· − previous‖²`. The `L` block is split with auxiliaries
//! `A = L` (multispectral fit) and `B = L` (prior), and the `E` block with
//! `C = E`, all coupled by the penalty `μ`.

use std::fmt;
use std::str::FromStr;

use log::{debug, warn};

use crate::degradation::nearest_upsample_to;
use crate::denoisers::{denoise, DenoiserKind};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, sym_eig, SeparableRidge, SymEig};
use crate::subspace::{estimate_dictionaries, SubspacePair};
use crate::tensor::{mode_n_product, spatial_product, unfold, Mat, Tensor3};

/// How the prior on `L` enters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegMode {
    /// The prior step is a plugged denoiser; the objective has no closed form.
    Pnp,
    /// `φ(L) = ‖L‖²`, whose proximal map is exact; used to check descent.
    ExplicitL2,
}

impl fmt::Display for RegMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegMode::Pnp => "pnp",
            RegMode::ExplicitL2 => "explicit_l2",
        })
    }
}

impl FromStr for RegMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pnp" => Ok(RegMode::Pnp),
            "explicit_l2" => Ok(RegMode::ExplicitL2),
            other => Err(Error::Config(format!("invalid reg_mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DlrrfConfig {
    /// Weight of the multispectral fidelity term.
    pub tau: f64,
    /// Prior weight.
    pub lambda: f64,
    /// Proximal weight of the outer iteration.
    pub eta: f64,
    /// Penalty coupling the auxiliaries to their blocks.
    pub mu: f64,
    pub s1: usize,
    /// Residual subspace dimension; 0 removes the residual component.
    pub s2: usize,
    pub max_outer: usize,
    pub inner_sweeps: usize,
    pub epsilon: f64,
    pub denoiser: DenoiserKind,
    pub reg_mode: RegMode,
    /// When false, `dR` stays at zero.
    pub estimate_dr: bool,
    /// Explicit mode only: solve the `L` and `E` subproblems in closed form
    /// instead of by the penalty split, so each block update is an exact
    /// minimizer. `inner_sweeps` is then unused.
    pub exact_subproblems: bool,
}

impl Default for DlrrfConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            lambda: 0.01,
            eta: 0.01,
            mu: 0.05,
            s1: 4,
            s2: 2,
            max_outer: 200,
            inner_sweeps: 1,
            epsilon: 1e-4,
            denoiser: DenoiserKind::default(),
            reg_mode: RegMode::Pnp,
            estimate_dr: true,
            exact_subproblems: false,
        }
    }
}

impl DlrrfConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("mu", self.mu),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.s1 == 0 {
            return Err(Error::Config("s1 must be at least 1".into()));
        }
        if self.max_outer == 0 || self.inner_sweeps == 0 {
            return Err(Error::Config("max_outer and inner_sweeps must be at least 1".into()));
        }
        if self.exact_subproblems && self.reg_mode != RegMode::ExplicitL2 {
            return Err(Error::Config("exact_subproblems requires reg_mode = explicit_l2".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// unknown keys are an error. Missing keys keep their defaults.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || -> Result<f64> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("line {}: {key} expects a number", lineno + 1)))
            };
            let int = || -> Result<usize> {
                value
                    .parse()
                    .map_err(|_| Error::Config(format!("line {}: {key} expects an integer", lineno + 1)))
            };
            match key {
                "tau" => cfg.tau = float()?,
                "lambda" => cfg.lambda = float()?,
                "eta" => cfg.eta = float()?,
                "mu" => cfg.mu = float()?,
                "epsilon" => cfg.epsilon = float()?,
                "s1" => cfg.s1 = int()?,
                "s2" => cfg.s2 = int()?,
                "max_outer" => cfg.max_outer = int()?,
                "inner_sweeps" => cfg.inner_sweeps = int()?,
                "denoiser" => cfg.denoiser = value.parse()?,
                "reg_mode" => cfg.reg_mode = value.parse()?,
                "estimate_dr" | "exact_subproblems" => {
                    let flag = value
                        .parse()
                        .map_err(|_| Error::Config(format!("line {}: {key} expects true/false", lineno + 1)))?;
                    if key == "estimate_dr" {
                        cfg.estimate_dr = flag;
                    } else {
                        cfg.exact_subproblems = flag;
                    }
                }
                other => return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "tau = {}\nlambda = {}\neta = {}\nmu = {}\ns1 = {}\ns2 = {}\nmax_outer = {}\ninner_sweeps = {}\nepsilon = {}\ndenoiser = {}\nreg_mode = {}\nestimate_dr = {}\nexact_subproblems = {}\n",
            self.tau,
            self.lambda,
            self.eta,
            self.mu,
            self.s1,
            self.s2,
            self.max_outer,
            self.inner_sweeps,
            self.epsilon,
            self.denoiser,
            self.reg_mode,
            self.estimate_dr,
            self.exact_subproblems
        )
    }
}

/// Observations, operators and dictionaries for one fusion problem, with the
/// eigenbases of the coefficient subproblems precomputed.
#[derive(Clone, Debug)]
pub struct Problem {
    pub y: Tensor3,
    pub z: Tensor3,
    pub p1: Mat,
    pub p2: Mat,
    pub r: Mat,
    pub dict: SubspacePair,
    ridge_l: SeparableRidge,
    ridge_e: SeparableRidge,
    spatial_eig: [SymEig; 2],
}

impl Problem {
    pub fn new(y: Tensor3, z: Tensor3, p1: Mat, p2: Mat, r: Mat, dict: SubspacePair) -> Result<Self> {
        let [w, h, bands] = y.dims();
        let [big_w, big_h, ms] = z.dims();
        let mismatch = |what: String| Err(Error::DimensionMismatch(what));
        if p1.shape() != (w, big_w) || p2.shape() != (h, big_h) {
            return mismatch(format!(
                "spatial operators {}x{}, {}x{} do not map the {}x{} grid to {}x{}",
                p1.rows(),
                p1.cols(),
                p2.rows(),
                p2.cols(),
                big_w,
                big_h,
                w,
                h
            ));
        }
        if r.shape() != (ms, bands) {
            return mismatch(format!(
                "spectral response {}x{} does not map {} hyperspectral bands to {} multispectral bands",
                r.rows(),
                r.cols(),
                bands,
                ms
            ));
        }
        if dict.bands() != bands || dict.d_e.rows() != bands {
            return mismatch(format!("dictionaries have {} rows for {} bands", dict.bands(), bands));
        }
        let ridge_l = SeparableRidge::new(&p1, &p2, &dict.d_l)?;
        let ridge_e = SeparableRidge::new(&p1, &p2, &dict.d_e)?;
        let spatial_eig = [sym_eig(&p1.gram())?, sym_eig(&p2.gram())?];
        Ok(Self {
            y,
            z,
            p1,
            p2,
            r,
            dict,
            ridge_l,
            ridge_e,
            spatial_eig,
        })
    }

    pub fn hr_dims(&self) -> (usize, usize) {
        (self.p1.cols(), self.p2.cols())
    }

    /// `R + dR`.
    pub fn srf(&self, dr: &Mat) -> Mat {
        self.r.add(dr).expect("dR has the shape of R")
    }

    /// `X = L ×₃ D_L + E ×₃ D_E`.
    pub fn reconstruct(&self, l: &Tensor3, e: &Tensor3) -> Result<Tensor3> {
        mode_n_product(l, &self.dict.d_l, 3)?.add(&mode_n_product(e, &self.dict.d_e, 3)?)
    }

    /// `T ×₁ P1 ×₂ P2`.
    pub fn degrade_spatial(&self, t: &Tensor3) -> Result<Tensor3> {
        spatial_product(t, &self.p1, &self.p2)
    }
}

/// Iterate `(L, E, dR)` with the auxiliaries `A`, `B` (for `L`) and `C` (for `E`).
#[derive(Clone, Debug, PartialEq)]
pub struct DlrrfState {
    pub l: Tensor3,
    pub e: Tensor3,
    pub dr: Mat,
    pub a: Tensor3,
    pub b: Tensor3,
    pub c: Tensor3,
    pub iter: usize,
}

impl DlrrfState {
    /// `L⁰` projects the nearest-neighbour upsampled HSI onto `D_L`; everything
    /// else starts at zero except `A⁰ = B⁰ = L⁰`.
    pub fn initialize(problem: &Problem) -> Result<Self> {
        let (big_w, big_h) = problem.hr_dims();
        let up = nearest_upsample_to(&problem.y, big_w, big_h);
        let l = mode_n_product(&up, &problem.dict.d_l.transpose(), 3)?;
        let e = Tensor3::zeros(big_w, big_h, problem.dict.s2());
        Ok(Self {
            a: l.clone(),
            b: l.clone(),
            c: e.clone(),
            l,
            e,
            dr: Mat::zeros(problem.r.rows(), problem.r.cols()),
            iter: 0,
        })
    }

    fn check_dims(&self, problem: &Problem) -> Result<()> {
        let (w, h) = problem.hr_dims();
        let ok = self.l.dims() == [w, h, problem.dict.s1()]
            && self.a.dims() == self.l.dims()
            && self.b.dims() == self.l.dims()
            && self.e.dims() == [w, h, problem.dict.s2()]
            && self.c.dims() == self.e.dims()
            && self.dr.shape() == problem.r.shape();
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "state L {:?}, E {:?}, dR {:?} inconsistent with problem",
                self.l.dims(),
                self.e.dims(),
                self.dr.shape()
            )))
        }
    }
}

/// The data term `h(L, E, dR)`.
pub fn data_term(problem: &Problem, l: &Tensor3, e: &Tensor3, dr: &Mat, tau: f64) -> Result<f64> {
    let x = problem.reconstruct(l, e)?;
    let hsi = problem.degrade_spatial(&x)?.dist_sq(&problem.y)?;
    let msi = mode_n_product(&x, &problem.srf(dr), 3)?.dist_sq(&problem.z)?;
    Ok(hsi + tau * msi)
}

/// Objective value at `state`: `h` in PnP mode (the prior is implicit), and
/// `h + λ‖L‖²` in explicit mode.
pub fn objective(problem: &Problem, state: &DlrrfState, config: &DlrrfConfig) -> Result<f64> {
    state.check_dims(problem)?;
    let h = data_term(problem, &state.l, &state.e, &state.dr, config.tau)?;
    Ok(match config.reg_mode {
        RegMode::Pnp => h,
        RegMode::ExplicitL2 => h + config.lambda * state.l.norm_sq(),
    })
}

/// Coefficient step of the `L` block:
/// `argmin ‖L ×₁P1 ×₂P2 ×₃D_L − Y1‖² + ξ1‖L − M1‖²` with
/// `Y1 = Y − E ×₁P1 ×₂P2 ×₃D_E`, `ξ1 = (η+2μ)/2`,
/// `M1 = (η L_anchor + μA + μB)/(η+2μ)`.
pub fn solve_l_step(
    problem: &Problem,
    l_anchor: &Tensor3,
    e: &Tensor3,
    a: &Tensor3,
    b: &Tensor3,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let (eta, mu) = (config.eta, config.mu);
    let e_part = mode_n_product(&problem.degrade_spatial(e)?, &problem.dict.d_e, 3)?;
    let y1 = problem.y.sub(&e_part)?;
    let xi = 0.5 * (eta + 2.0 * mu);
    let denom = eta + 2.0 * mu;
    let m1 = l_anchor
        .lincomb(eta / denom, a, mu / denom)?
        .lincomb(1.0, b, mu / denom)?;
    problem.ridge_l.solve(&y1, xi, &m1)
}

/// Auxiliary step shared by `A` and `C`:
/// `argmin_T τ‖T ×₃ G + other ×₃ G_other − Z‖² + (μ/2)‖T − anchor‖²`,
/// i.e. `(2τ GᵀG + μI) T = 2τ Gᵀ(Z − G_other·other) + μ·anchor` along mode 3.
fn solve_msi_aux(
    problem: &Problem,
    g: &Mat,
    other: &Tensor3,
    g_other: &Mat,
    anchor: &Tensor3,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let (tau, mu) = (config.tau, config.mu);
    let mut omega1 = g.gram().scale(2.0 * tau);
    omega1.add_diag(mu);
    let residual = problem.z.sub(&mode_n_product(other, g_other, 3)?)?;
    let omega2 = mode_n_product(&residual, &g.transpose().scale(2.0 * tau), 3)?.lincomb(1.0, anchor, mu)?;
    let inv = cholesky_solve(&omega1, &Mat::identity(omega1.rows()))?;
    mode_n_product(&omega2, &inv, 3)
}

/// Auxiliary `A`: multispectral fit of the low-rank coefficients.
pub fn solve_a_step(
    problem: &Problem,
    l: &Tensor3,
    e: &Tensor3,
    dr: &Mat,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let srf = problem.srf(dr);
    let g_l = srf.matmul(&problem.dict.d_l)?;
    let g_e = srf.matmul(&problem.dict.d_e)?;
    solve_msi_aux(problem, &g_l, e, &g_e, l, config)
}

/// Auxiliary `B`: denoiser output in PnP mode, `μL/(2λ+μ)` in explicit mode.
pub fn solve_b_step(l: &Tensor3, config: &DlrrfConfig) -> Result<Tensor3> {
    match config.reg_mode {
        RegMode::Pnp => denoise(l, config.denoiser, config.lambda / config.mu),
        RegMode::ExplicitL2 => Ok(l.scale(config.mu / (2.0 * config.lambda + config.mu))),
    }
}

/// Coefficient step of the `E` block:
/// `argmin ‖E ×₁P1 ×₂P2 ×₃D_E − Y2‖² + ξ2‖E − M2‖²` with
/// `Y2 = Y − L ×₁P1 ×₂P2 ×₃D_L`, `ξ2 = (η+μ)/2`, `M2 = (η E_anchor + μC)/(η+μ)`.
pub fn solve_e_step(
    problem: &Problem,
    e_anchor: &Tensor3,
    l: &Tensor3,
    c: &Tensor3,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let (eta, mu) = (config.eta, config.mu);
    let l_part = mode_n_product(&problem.degrade_spatial(l)?, &problem.dict.d_l, 3)?;
    let y2 = problem.y.sub(&l_part)?;
    let xi = 0.5 * (eta + mu);
    let m2 = e_anchor.lincomb(eta / (eta + mu), c, mu / (eta + mu))?;
    problem.ridge_e.solve(&y2, xi, &m2)
}

/// Auxiliary `C`: multispectral fit of the residual coefficients.
pub fn solve_c_step(
    problem: &Problem,
    l: &Tensor3,
    e: &Tensor3,
    dr: &Mat,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let srf = problem.srf(dr);
    let g_l = srf.matmul(&problem.dict.d_l)?;
    let g_e = srf.matmul(&problem.dict.d_e)?;
    solve_msi_aux(problem, &g_e, l, &g_l, e, config)
}

/// Closed-form minimizer of
/// `‖T ×₁P1 ×₂P2 ×₃D − Y_res‖² + τ‖T ×₃ G − Z_res‖² + c‖T‖² + (η/2)‖T − anchor‖²`
/// for orthonormal `D`. The normal operator
/// `I ⊗ P2ᵀP2 ⊗ P1ᵀP1 + τ GᵀG ⊗ I ⊗ I + (c + η/2) I` is diagonal in the joint
/// eigenbasis of `P1ᵀP1`, `P2ᵀP2` and `GᵀG`.
#[allow(clippy::too_many_arguments)]
fn solve_block_exact(
    problem: &Problem,
    d: &Mat,
    g: &Mat,
    y_res: &Tensor3,
    z_res: &Tensor3,
    c: f64,
    anchor: &Tensor3,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let (tau, eta) = (config.tau, config.eta);
    let rhs = mode_n_product(
        &spatial_product(y_res, &problem.p1.transpose(), &problem.p2.transpose())?,
        &d.transpose(),
        3,
    )?
    .add(&mode_n_product(z_res, &g.transpose().scale(tau), 3)?)?
    .lincomb(1.0, anchor, 0.5 * eta)?;
    let [e1, e2] = &problem.spatial_eig;
    let e3 = sym_eig(&g.gram())?;
    let mut t = mode_n_product(
        &spatial_product(&rhs, &e1.eigenvectors.transpose(), &e2.eigenvectors.transpose())?,
        &e3.eigenvectors.transpose(),
        3,
    )?;
    let shift = c + 0.5 * eta;
    let [n1, n2, n3] = t.dims();
    let data = t.as_mut_slice();
    let mut idx = 0;
    for k in 0..n3 {
        let gk = tau * e3.eigenvalues[k].max(0.0);
        for j in 0..n2 {
            let l2 = e2.eigenvalues[j].max(0.0);
            for i in 0..n1 {
                data[idx] /= e1.eigenvalues[i].max(0.0) * l2 + gk + shift;
                idx += 1;
            }
        }
    }
    mode_n_product(
        &spatial_product(&t, &e1.eigenvectors, &e2.eigenvectors)?,
        &e3.eigenvectors,
        3,
    )
}

/// Exact minimizer of the `L` subproblem in explicit mode:
/// `h(·, E, dR) + λ‖·‖² + (η/2)‖· − L_anchor‖²`.
pub fn solve_l_exact(
    problem: &Problem,
    l_anchor: &Tensor3,
    e: &Tensor3,
    dr: &Mat,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let srf = problem.srf(dr);
    let g_l = srf.matmul(&problem.dict.d_l)?;
    let g_e = srf.matmul(&problem.dict.d_e)?;
    let y_res = problem
        .y
        .sub(&mode_n_product(&problem.degrade_spatial(e)?, &problem.dict.d_e, 3)?)?;
    let z_res = problem.z.sub(&mode_n_product(e, &g_e, 3)?)?;
    solve_block_exact(problem, &problem.dict.d_l, &g_l, &y_res, &z_res, config.lambda, l_anchor, config)
}

/// Exact minimizer of the `E` subproblem: `h(L, ·, dR) + (η/2)‖· − E_anchor‖²`.
pub fn solve_e_exact(
    problem: &Problem,
    e_anchor: &Tensor3,
    l: &Tensor3,
    dr: &Mat,
    config: &DlrrfConfig,
) -> Result<Tensor3> {
    let srf = problem.srf(dr);
    let g_l = srf.matmul(&problem.dict.d_l)?;
    let g_e = srf.matmul(&problem.dict.d_e)?;
    let y_res = problem
        .y
        .sub(&mode_n_product(&problem.degrade_spatial(l)?, &problem.dict.d_l, 3)?)?;
    let z_res = problem.z.sub(&mode_n_product(l, &g_l, 3)?)?;
    solve_block_exact(problem, &problem.dict.d_e, &g_e, &y_res, &z_res, 0.0, e_anchor, config)
}

/// Result of one pass over the `L` block.
#[derive(Clone, Debug)]
pub struct LBlock {
    pub l: Tensor3,
    pub a: Tensor3,
    pub b: Tensor3,
}

#[derive(Clone, Debug)]
pub struct EBlock {
    pub e: Tensor3,
    pub c: Tensor3,
}

/// `inner_sweeps` rounds of `L`, `A`, `B` updates with `state.l` as the
/// proximal anchor.
pub fn update_l(problem: &Problem, state: &DlrrfState, config: &DlrrfConfig) -> Result<LBlock> {
    state.check_dims(problem)?;
    if config.exact_subproblems {
        let l = solve_l_exact(problem, &state.l, &state.e, &state.dr, config)?;
        return Ok(LBlock {
            a: l.clone(),
            b: l.clone(),
            l,
        });
    }
    let mut a = state.a.clone();
    let mut b = state.b.clone();
    let mut l = state.l.clone();
    for _ in 0..config.inner_sweeps {
        l = solve_l_step(problem, &state.l, &state.e, &a, &b, config)?;
        a = solve_a_step(problem, &l, &state.e, &state.dr, config)?;
        b = solve_b_step(&l, config)?;
    }
    Ok(LBlock { l, a, b })
}

/// `inner_sweeps` rounds of `E`, `C` updates with `state.e` as the proximal
/// anchor; `state.l` should already hold the new `L`.
pub fn update_e(problem: &Problem, state: &DlrrfState, config: &DlrrfConfig) -> Result<EBlock> {
    state.check_dims(problem)?;
    if config.exact_subproblems {
        let e = solve_e_exact(problem, &state.e, &state.l, &state.dr, config)?;
        return Ok(EBlock { c: e.clone(), e });
    }
    let mut c = state.c.clone();
    let mut e = state.e.clone();
    for _ in 0..config.inner_sweeps {
        e = solve_e_step(problem, &state.e, &state.l, &c, config)?;
        c = solve_c_step(problem, &state.l, &e, &state.dr, config)?;
    }
    Ok(EBlock { e, c })
}

/// Exact minimizer of `τ‖X ×₃ (R + dR) − Z‖² + (η/2)‖dR − dR_k‖²`:
/// `dR (2τ X₍₃₎X₍₃₎ᵀ + ηI) = 2τ (Z₍₃₎ − R X₍₃₎) X₍₃₎ᵀ + η dR_k`.
pub fn update_dr(problem: &Problem, state: &DlrrfState, config: &DlrrfConfig) -> Result<Mat> {
    state.check_dims(problem)?;
    let x = problem.reconstruct(&state.l, &state.e)?;
    let xm = unfold(&x, 3)?;
    let mut omega1 = xm.outer_gram().scale(2.0 * config.tau);
    omega1.add_diag(config.eta);
    let residual = unfold(&problem.z.sub(&mode_n_product(&x, &problem.r, 3)?)?, 3)?;
    let omega2 = residual
        .matmul(&xm.transpose())?
        .scale(2.0 * config.tau)
        .add(&state.dr.scale(config.eta))?;
    Ok(cholesky_solve(&omega1, &omega2.transpose())?.transpose())
}

/// Relative change `‖new − old‖ / ‖old‖`. A block that was zero counts as a
/// full change (1) if it moved and as no change if it stayed zero.
pub fn relative_change(diff_norm: f64, old_norm: f64) -> f64 {
    if old_norm > 0.0 {
        diff_norm / old_norm
    } else if diff_norm > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct FusionResult {
    pub x_hat: Tensor3,
    /// `R + dR` at the last iterate.
    pub srf_hat: Mat,
    /// `h` at the initial point followed by one entry per outer iteration.
    pub objective_trace: Vec<f64>,
    /// `h + λ‖L‖²` aligned with `objective_trace`; explicit mode only.
    pub explicit_trace: Option<Vec<f64>>,
    /// One entry per outer iteration.
    pub eta_trace: Vec<f64>,
    /// `‖W^{k+1} − W^k‖²` per outer iteration.
    pub step_sq_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Outer steps that violated the sufficient-descent inequality (explicit mode).
    pub descent_violations: usize,
    pub dictionaries: SubspacePair,
    pub state: DlrrfState,
}

/// Estimates the dictionaries from `y` and runs [`run_with_dictionaries`].
pub fn run(y: &Tensor3, z: &Tensor3, p1: &Mat, p2: &Mat, r: &Mat, config: &DlrrfConfig) -> Result<FusionResult> {
    config.validate()?;
    if y.dims()[2] != r.cols() || z.dims()[2] != r.rows() {
        return Err(Error::DimensionMismatch(format!(
            "HSI has {} bands and MSI {} bands, spectral response is {}x{}",
            y.dims()[2],
            z.dims()[2],
            r.rows(),
            r.cols()
        )));
    }
    let dict = estimate_dictionaries(y, config.s1, config.s2)?;
    let problem = Problem::new(y.clone(), z.clone(), p1.clone(), p2.clone(), r.clone(), dict)?;
    run_with_dictionaries(&problem, config)
}

/// Runs the outer loop until the relative change drops below `epsilon` or
/// `max_outer` iterations have been made.
pub fn run_with_dictionaries(problem: &Problem, config: &DlrrfConfig) -> Result<FusionResult> {
    config.validate()?;
    let mut state = DlrrfState::initialize(problem)?;
    let explicit = config.reg_mode == RegMode::ExplicitL2;

    let h0 = data_term(problem, &state.l, &state.e, &state.dr, config.tau)?;
    let f0 = h0 + config.lambda * state.l.norm_sq();
    let mut objective_trace = vec![h0];
    let mut explicit_trace = vec![f0];
    let mut eta_trace = Vec::new();
    let mut step_sq_trace = Vec::new();
    let mut converged = false;
    let mut descent_violations = 0;
    let mut f_prev = f0;

    for k in 0..config.max_outer {
        let prev = state.clone();

        let lb = update_l(problem, &state, config)?;
        state.l = lb.l;
        state.a = lb.a;
        state.b = lb.b;
        ensure_finite(k, "L", &state.l)?;

        let eb = update_e(problem, &state, config)?;
        state.e = eb.e;
        state.c = eb.c;
        ensure_finite(k, "E", &state.e)?;

        if config.estimate_dr {
            state.dr = update_dr(problem, &state, config)?;
            if !state.dr.is_finite() {
                return Err(Error::Diverged { iter: k, block: "dR" });
            }
        }
        state.iter = k + 1;

        let dl = state.l.dist_sq(&prev.l)?;
        let de = state.e.dist_sq(&prev.e)?;
        let ddr = state.dr.sub(&prev.dr)?.norm_sq();
        let eta_k = relative_change(dl.sqrt(), prev.l.frobenius_norm())
            .max(relative_change(de.sqrt(), prev.e.frobenius_norm()))
            .max(relative_change(ddr.sqrt(), prev.dr.frobenius_norm()));
        let step_sq = dl + de + ddr;

        let h = data_term(problem, &state.l, &state.e, &state.dr, config.tau)?;
        let f = h + config.lambda * state.l.norm_sq();
        if !h.is_finite() {
            return Err(Error::Diverged { iter: k, block: "objective" });
        }
        if explicit && f + 0.5 * config.eta * step_sq > f_prev + 1e-9 * f0 {
            descent_violations += 1;
            warn!(
                "sufficient descent violated at iteration {}: {:.6e} + {:.3e} > {:.6e}",
                k + 1,
                f,
                0.5 * config.eta * step_sq,
                f_prev
            );
        }
        debug!(
            "iter {:4}  h {:.6e}  eta_k {:.3e}  (L {:.2e}, E {:.2e}, dR {:.2e})",
            k + 1,
            h,
            eta_k,
            relative_change(dl.sqrt(), prev.l.frobenius_norm()),
            relative_change(de.sqrt(), prev.e.frobenius_norm()),
            relative_change(ddr.sqrt(), prev.dr.frobenius_norm())
        );
        f_prev = f;
        objective_trace.push(h);
        explicit_trace.push(f);
        eta_trace.push(eta_k);
        step_sq_trace.push(step_sq);

        if eta_k < config.epsilon {
            converged = true;
            break;
        }
    }

    let x_hat = problem.reconstruct(&state.l, &state.e)?;
    Ok(FusionResult {
        x_hat,
        srf_hat: problem.srf(&state.dr),
        objective_trace,
        explicit_trace: explicit.then_some(explicit_trace),
        iterations: eta_trace.len(),
        eta_trace,
        step_sq_trace,
        converged,
        descent_violations,
        dictionaries: problem.dict.clone(),
        state,
    })
}

fn ensure_finite(iter: usize, block: &'static str, t: &Tensor3) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged { iter, block })
    }
}
