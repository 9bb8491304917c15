//! Scalar-loop reference implementations of the quality indices.

use dlrrf::Tensor3;

pub fn psnr(r: &Tensor3, e: &Tensor3) -> f64 {
    let [w, h, s] = r.dims();
    let mut total = 0.0;
    for k in 0..s {
        let mut peak = f64::MIN;
        let mut se = 0.0;
        for j in 0..h {
            for i in 0..w {
                peak = peak.max(r.get(i, j, k));
                let d = r.get(i, j, k) - e.get(i, j, k);
                se += d * d;
            }
        }
        let mse = se / (w * h) as f64;
        total += 10.0 * (peak * peak / mse).log10();
    }
    total / s as f64
}

pub fn rmse(r: &Tensor3, e: &Tensor3) -> f64 {
    let [w, h, s] = r.dims();
    let mut se = 0.0;
    for k in 0..s {
        for j in 0..h {
            for i in 0..w {
                se += (r.get(i, j, k) - e.get(i, j, k)).powi(2);
            }
        }
    }
    (se / (w * h * s) as f64).sqrt()
}

pub fn ergas(r: &Tensor3, e: &Tensor3, sf: usize) -> f64 {
    let [w, h, s] = r.dims();
    let mut acc = 0.0;
    for k in 0..s {
        let (mut mean, mut se) = (0.0, 0.0);
        for j in 0..h {
            for i in 0..w {
                mean += r.get(i, j, k);
                se += (r.get(i, j, k) - e.get(i, j, k)).powi(2);
            }
        }
        mean /= (w * h) as f64;
        acc += se / (mean * mean);
    }
    let low_pixels = (w / sf) * (h / sf);
    (w * h) as f64 / low_pixels as f64 * (10000.0 / s as f64 * acc).sqrt()
}

pub fn sam(r: &Tensor3, e: &Tensor3) -> f64 {
    let [w, h, s] = r.dims();
    let mut total = 0.0;
    for j in 0..h {
        for i in 0..w {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for k in 0..s {
                let (a, b) = (r.get(i, j, k), e.get(i, j, k));
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            total += (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0).acos();
        }
    }
    (total / (w * h) as f64) * 180.0 / std::f64::consts::PI
}

/// Population statistics over the window `[i0, i0+bw) x [j0, j0+bh)` of band `k`.
pub fn window_stats(r: &Tensor3, e: &Tensor3, k: usize, i0: usize, j0: usize, bw: usize, bh: usize) -> [f64; 5] {
    let n = (bw * bh) as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for j in j0..j0 + bh {
        for i in i0..i0 + bw {
            mx += r.get(i, j, k);
            my += e.get(i, j, k);
        }
    }
    mx /= n;
    my /= n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for j in j0..j0 + bh {
        for i in i0..i0 + bw {
            let (dx, dy) = (r.get(i, j, k) - mx, e.get(i, j, k) - my);
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    [mx, my, vx / n, vy / n, cxy / n]
}

pub fn ssim(r: &Tensor3, e: &Tensor3) -> f64 {
    let [w, h, s] = r.dims();
    let (lo, hi) = (r.min(), r.max());
    let rs = r.map(|v| (v - lo) / (hi - lo));
    let es = e.map(|v| (v - lo) / (hi - lo));
    let (c1, c2) = (1e-4, 9e-4);
    let (bw, bh) = (w.min(8), h.min(8));
    let mut total = 0.0;
    for k in 0..s {
        let mut acc = 0.0;
        let mut n = 0;
        for j0 in 0..=h - bh {
            for i0 in 0..=w - bw {
                let [mx, my, vx, vy, cxy] = window_stats(&rs, &es, k, i0, j0, bw, bh);
                acc += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                n += 1;
            }
        }
        total += acc / n as f64;
    }
    total / s as f64
}

pub fn uiqi(r: &Tensor3, e: &Tensor3) -> f64 {
    let [w, h, s] = r.dims();
    let mut total = 0.0;
    for k in 0..s {
        let mut acc = 0.0;
        let mut n = 0;
        let mut j0 = 0;
        while j0 < h {
            let mut i0 = 0;
            while i0 < w {
                let (bw, bh) = ((w - i0).min(32), (h - j0).min(32));
                let [mx, my, vx, vy, cxy] = window_stats(r, e, k, i0, j0, bw, bh);
                acc += 4.0 * cxy * mx * my / ((vx + vy) * (mx * mx + my * my));
                n += 1;
                i0 += 32;
            }
            j0 += 32;
        }
        total += acc / n as f64;
    }
    total / s as f64
}

