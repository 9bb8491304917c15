//! Dense first-order optimality checks for the solver's block steps.
//!
//! Each check returns `‖∇‖ / Σ‖terms‖`, where the gradient of the step's
//! objective is assembled from explicitly formed Kronecker operators.

use dlrrf::solver::{
    solve_a_step, solve_b_step, solve_c_step, solve_e_exact, solve_e_step, solve_l_exact, solve_l_step, update_dr,
    DlrrfConfig, DlrrfState, Problem, RegMode,
};
use dlrrf::{Mat, Tensor3};

use super::{kron3, norm, rand_mat, rand_tensor, random_problem, rng, Dense};

pub struct Ops {
    pub k_l: Dense,
    pub k_e: Dense,
    pub m_l: Dense,
    pub m_e: Dense,
}

/// `K_*` map coefficients to the HSI, `M_*` to the MSI.
pub fn ops(p: &Problem, dr: &Mat) -> Ops {
    let (big_w, big_h) = p.hr_dims();
    let srf = p.r.add(dr).unwrap();
    let (iw, ih) = (Mat::identity(big_w), Mat::identity(big_h));
    Ops {
        k_l: kron3(&p.p1, &p.p2, &p.dict.d_l),
        k_e: kron3(&p.p1, &p.p2, &p.dict.d_e),
        m_l: kron3(&iw, &ih, &srf.matmul(&p.dict.d_l).unwrap()),
        m_e: kron3(&iw, &ih, &srf.matmul(&p.dict.d_e).unwrap()),
    }
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn relative_residual(parts: &[Vec<f64>]) -> f64 {
    let mut sum = vec![0.0; parts[0].len()];
    for p in parts {
        for (o, v) in sum.iter_mut().zip(p) {
            *o += v;
        }
    }
    let scale: f64 = parts.iter().map(|p| norm(p)).sum::<f64>().max(1.0);
    norm(&sum) / scale
}

pub struct Instance {
    pub p: Problem,
    pub l: Tensor3,
    pub e: Tensor3,
    pub a: Tensor3,
    pub b: Tensor3,
    pub c: Tensor3,
    pub dr: Mat,
    pub cfg: DlrrfConfig,
}

impl Instance {
    pub fn state(&self) -> DlrrfState {
        DlrrfState {
            l: self.l.clone(),
            e: self.e.clone(),
            dr: self.dr.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            iter: 0,
        }
    }
}

/// 4x4 high-resolution grid, 5 bands, 3 MS bands, `s1 = 2`, `s2 = 1`, random
/// operators, iterate and weights.
pub fn instance(seed: u64) -> Instance {
    let p = random_problem(seed, 4, 2, 5, 3, 2, 1);
    let mut g = rng(seed + 1000);
    let l = rand_tensor(&mut g, 4, 4, 2);
    let e = rand_tensor(&mut g, 4, 4, 1);
    let a = rand_tensor(&mut g, 4, 4, 2);
    let b = rand_tensor(&mut g, 4, 4, 2);
    let c = rand_tensor(&mut g, 4, 4, 1);
    let dr = rand_mat(&mut g, 3, 5).scale(0.05);
    let cfg = DlrrfConfig {
        tau: 0.05 + 0.1 * (seed % 4) as f64,
        eta: 0.01 * (1 + seed % 3) as f64,
        mu: 0.05 + 0.05 * (seed % 2) as f64,
        lambda: 0.01 * (1 + seed % 5) as f64,
        ..DlrrfConfig::default()
    };
    Instance { p, l, e, a, b, c, dr, cfg }
}

/// `‖K_L l + K_E e − y‖² + (η/2)‖l − anchor‖² + (μ/2)‖a − l‖² + (μ/2)‖b − l‖²`.
pub fn l_step(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let (eta, mu) = (s.cfg.eta, s.cfg.mu);
    let anchor = rand_tensor(&mut rng(seed + 2000), 4, 4, 2);
    let l = solve_l_step(&s.p, &anchor, &s.e, &s.a, &s.b, &s.cfg).unwrap();
    let kt = o.k_l.transpose();
    relative_residual(&[
        scaled(&kt.apply(&o.k_l.apply(l.as_slice())), 2.0),
        scaled(&kt.apply(&o.k_e.apply(s.e.as_slice())), 2.0),
        scaled(&kt.apply(s.p.y.as_slice()), -2.0),
        scaled(l.as_slice(), eta + 2.0 * mu),
        scaled(anchor.as_slice(), -eta),
        scaled(s.a.as_slice(), -mu),
        scaled(s.b.as_slice(), -mu),
    ])
}

/// `τ‖M_L a + M_E e − z‖² + (μ/2)‖a − l‖²`.
pub fn a_step(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let a = solve_a_step(&s.p, &s.l, &s.e, &s.dr, &s.cfg).unwrap();
    let mt = o.m_l.transpose();
    let tau = s.cfg.tau;
    relative_residual(&[
        scaled(&mt.apply(&o.m_l.apply(a.as_slice())), 2.0 * tau),
        scaled(&mt.apply(&o.m_e.apply(s.e.as_slice())), 2.0 * tau),
        scaled(&mt.apply(s.p.z.as_slice()), -2.0 * tau),
        scaled(a.as_slice(), s.cfg.mu),
        scaled(s.l.as_slice(), -s.cfg.mu),
    ])
}

/// Explicit mode: `λ‖b‖² + (μ/2)‖b − l‖²`.
pub fn b_step(seed: u64) -> f64 {
    let s = instance(seed);
    let cfg = DlrrfConfig {
        reg_mode: RegMode::ExplicitL2,
        ..s.cfg.clone()
    };
    let b = solve_b_step(&s.l, &cfg).unwrap();
    relative_residual(&[
        scaled(b.as_slice(), 2.0 * cfg.lambda + cfg.mu),
        scaled(s.l.as_slice(), -cfg.mu),
    ])
}

/// `‖K_L l + K_E e − y‖² + (η/2)‖e − anchor‖² + (μ/2)‖c − e‖²`.
pub fn e_step(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let (eta, mu) = (s.cfg.eta, s.cfg.mu);
    let anchor = rand_tensor(&mut rng(seed + 3000), 4, 4, 1);
    let e = solve_e_step(&s.p, &anchor, &s.l, &s.c, &s.cfg).unwrap();
    let kt = o.k_e.transpose();
    relative_residual(&[
        scaled(&kt.apply(&o.k_e.apply(e.as_slice())), 2.0),
        scaled(&kt.apply(&o.k_l.apply(s.l.as_slice())), 2.0),
        scaled(&kt.apply(s.p.y.as_slice()), -2.0),
        scaled(e.as_slice(), eta + mu),
        scaled(anchor.as_slice(), -eta),
        scaled(s.c.as_slice(), -mu),
    ])
}

/// `τ‖M_L l + M_E c − z‖² + (μ/2)‖c − e‖²`.
pub fn c_step(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let c = solve_c_step(&s.p, &s.l, &s.e, &s.dr, &s.cfg).unwrap();
    let mt = o.m_e.transpose();
    let tau = s.cfg.tau;
    relative_residual(&[
        scaled(&mt.apply(&o.m_e.apply(c.as_slice())), 2.0 * tau),
        scaled(&mt.apply(&o.m_l.apply(s.l.as_slice())), 2.0 * tau),
        scaled(&mt.apply(s.p.z.as_slice()), -2.0 * tau),
        scaled(c.as_slice(), s.cfg.mu),
        scaled(s.e.as_slice(), -s.cfg.mu),
    ])
}

/// `τ‖(R + dR) X₃ − Z₃‖² + (η/2)‖dR − dR_k‖²`, gradient by explicit loops.
pub fn dr_step(seed: u64) -> f64 {
    let s = instance(seed);
    let dr = update_dr(&s.p, &s.state(), &s.cfg).unwrap();
    let x = s.p.reconstruct(&s.l, &s.e).unwrap();
    let [w, h, bands] = x.dims();
    let ms = s.p.r.rows();
    let srf = s.p.r.add(&dr).unwrap();
    let n = ms * bands;
    let (mut fit, mut fit_z, mut pull, mut pull_k) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for q in 0..ms {
        for b in 0..bands {
            for j in 0..h {
                for i in 0..w {
                    let pred: f64 = (0..bands).map(|t| srf.get(q, t) * x.get(i, j, t)).sum();
                    fit[q * bands + b] += 2.0 * s.cfg.tau * pred * x.get(i, j, b);
                    fit_z[q * bands + b] -= 2.0 * s.cfg.tau * s.p.z.get(i, j, q) * x.get(i, j, b);
                }
            }
            pull[q * bands + b] = s.cfg.eta * dr.get(q, b);
            pull_k[q * bands + b] = -s.cfg.eta * s.dr.get(q, b);
        }
    }
    relative_residual(&[fit, fit_z, pull, pull_k])
}

/// Full block objective `h + c‖t‖² + (η/2)‖t − anchor‖²` of the exact solves.
fn exact_parts(s: &Instance, o: &Ops, t: &Tensor3, anchor: &Tensor3, for_l: bool, cfg: &DlrrfConfig) -> Vec<Vec<f64>> {
    let (k_self, k_other, m_self, m_other, other, c) = if for_l {
        (&o.k_l, &o.k_e, &o.m_l, &o.m_e, &s.e, cfg.lambda)
    } else {
        (&o.k_e, &o.k_l, &o.m_e, &o.m_l, &s.l, 0.0)
    };
    let kt = k_self.transpose();
    let mt = m_self.transpose();
    vec![
        kt.apply(&k_self.apply(t.as_slice())),
        kt.apply(&k_other.apply(other.as_slice())),
        scaled(&kt.apply(s.p.y.as_slice()), -1.0),
        scaled(&mt.apply(&m_self.apply(t.as_slice())), cfg.tau),
        scaled(&mt.apply(&m_other.apply(other.as_slice())), cfg.tau),
        scaled(&mt.apply(s.p.z.as_slice()), -cfg.tau),
        scaled(t.as_slice(), c + 0.5 * cfg.eta),
        scaled(anchor.as_slice(), -0.5 * cfg.eta),
    ]
}

fn exact_cfg(s: &Instance) -> DlrrfConfig {
    DlrrfConfig {
        reg_mode: RegMode::ExplicitL2,
        exact_subproblems: true,
        ..s.cfg.clone()
    }
}

pub fn exact_l(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let cfg = exact_cfg(&s);
    let anchor = rand_tensor(&mut rng(seed + 4000), 4, 4, 2);
    let l = solve_l_exact(&s.p, &anchor, &s.e, &s.dr, &cfg).unwrap();
    relative_residual(&exact_parts(&s, &o, &l, &anchor, true, &cfg))
}

pub fn exact_e(seed: u64) -> f64 {
    let s = instance(seed);
    let o = ops(&s.p, &s.dr);
    let cfg = exact_cfg(&s);
    let anchor = rand_tensor(&mut rng(seed + 5000), 4, 4, 1);
    let e = solve_e_exact(&s.p, &anchor, &s.l, &s.dr, &cfg).unwrap();
    relative_residual(&exact_parts(&s, &o, &e, &anchor, false, &cfg))
}

/// Every step check with its label.
pub const ALL: [(&str, fn(u64) -> f64); 8] = [
    ("L", l_step),
    ("A", a_step),
    ("B", b_step),
    ("E", e_step),
    ("C", c_step),
    ("dR", dr_step),
    ("exact L", exact_l),
    ("exact E", exact_e),
];
