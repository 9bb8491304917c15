#![allow(dead_code)]

pub mod metric_oracles;
pub mod step_oracles;

use dlrrf::degradation::{blur_downsample_matrix, DegradationModel};
use dlrrf::solver::Problem;
use dlrrf::subspace::estimate_dictionaries;
use dlrrf::synth::{generate_scene, make_variability_pair, SceneSpec, VariabilityPair};
use dlrrf::{Mat, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, d1: usize, d2: usize, d3: usize) -> Tensor3 {
    Tensor3::from_fn(d1, d2, d3, |_, _, _| rng.random_range(-1.0..1.0))
}

/// Plain row-major dense matrix for the oracles.
#[derive(Clone, Debug)]
pub struct Dense {
    pub n: usize,
    pub m: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self { n, m, a: vec![0.0; n * m] }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d.a[i * n + i] = 1.0;
        }
        d
    }

    pub fn from_mat(m: &Mat) -> Self {
        let mut d = Self::zeros(m.rows(), m.cols());
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                d.a[i * d.m + j] = m.get(i, j);
            }
        }
        d
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.m + j]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.m, self.n);
        for i in 0..self.n {
            for j in 0..self.m {
                t.a[j * self.n + i] = self.at(i, j);
            }
        }
        t
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        assert_eq!(self.m, o.n);
        let mut out = Dense::zeros(self.n, o.m);
        for i in 0..self.n {
            for k in 0..self.m {
                let v = self.at(i, k);
                for j in 0..o.m {
                    out.a[i * o.m + j] += v * o.at(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.m, x.len());
        (0..self.n)
            .map(|i| (0..self.m).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    pub fn kron(&self, o: &Dense) -> Dense {
        let mut out = Dense::zeros(self.n * o.n, self.m * o.m);
        for i in 0..self.n {
            for j in 0..self.m {
                for p in 0..o.n {
                    for q in 0..o.m {
                        out.a[(i * o.n + p) * out.m + j * o.m + q] = self.at(i, j) * o.at(p, q);
                    }
                }
            }
        }
        out
    }

    pub fn add_scaled(&self, o: &Dense, s: f64) -> Dense {
        assert_eq!((self.n, self.m), (o.n, o.m));
        Dense {
            n: self.n,
            m: self.m,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + s * y).collect(),
        }
    }

    /// Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, self.m);
        let n = self.n;
        let mut a = self.a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))
                .unwrap();
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                x.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f != 0.0 {
                    for j in col..n {
                        a[r * n + j] -= f * a[col * n + j];
                    }
                    x[r] -= f * x[col];
                }
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for j in col + 1..n {
                s -= a[col * n + j] * x[j];
            }
            x[col] = s / a[col * n + col];
        }
        x
    }
}

/// Matrix of `T -> T x1 a x2 b x3 c` acting on the first-index-fastest
/// vectorization: `c ⊗ b ⊗ a`.
pub fn kron3(a: &Mat, b: &Mat, c: &Mat) -> Dense {
    Dense::from_mat(c).kron(&Dense::from_mat(b)).kron(&Dense::from_mat(a))
}

pub fn vec_sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    norm(&vec_sub(a, b)) / norm(b).max(f64::MIN_POSITIVE)
}

/// Small random fusion problem with dictionaries estimated from a random HSI.
pub fn random_problem(seed: u64, big: usize, sf: usize, bands: usize, ms: usize, s1: usize, s2: usize) -> Problem {
    let mut g = rng(seed);
    let small = big / sf;
    let y = rand_tensor(&mut g, small, small, bands);
    let z = rand_tensor(&mut g, big, big, ms);
    let p1 = rand_mat(&mut g, small, big);
    let p2 = rand_mat(&mut g, small, big);
    let r = Mat::from_fn(ms, bands, |_, _| g.random_range(0.0..1.0));
    let dict = estimate_dictionaries(&y, s1, s2).unwrap();
    Problem::new(y, z, p1, p2, r, dict).unwrap()
}

/// Scene, degradation model and observation pair for a synthetic scenario.
pub struct Scenario {
    pub x: Tensor3,
    pub model: DegradationModel,
    pub pair: VariabilityPair,
}

#[allow(clippy::too_many_arguments)]
pub fn scenario(
    size: usize,
    bands: usize,
    sf: usize,
    ms_bands: usize,
    seed: u64,
    dr_magnitude: f64,
    change_fraction: f64,
) -> Scenario {
    let spec = SceneSpec {
        dr_magnitude,
        change_fraction,
        ..SceneSpec::new(size, size, bands, 4, seed)
    };
    let x = generate_scene(&spec).unwrap();
    let model = DegradationModel::new(size, size, bands, ms_bands, sf, 1.0, 30.0, 40.0).unwrap();
    let pair = make_variability_pair(&x, &spec, &model, seed).unwrap();
    Scenario { x, model, pair }
}

pub fn spatial_operators(size: usize, sf: usize) -> (Mat, Mat) {
    let p = blur_downsample_matrix(size, sf, 1.0).unwrap();
    (p.clone(), p)
}
