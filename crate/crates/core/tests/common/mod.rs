//! Brute-force reference implementations and fixture generators shared by
//! the integration tests. Nothing here calls into the library's metric code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use batchlens::imaging::{irregular_mask, regular_mask, GrayPlane, ImageTensor, MaskGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality covering zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// A single-channel image from one of several texture families.
pub fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ImageTensor {
    let kind = rng.random_range(0..4);
    let fx: f64 = rng.random_range(0.05..0.9);
    let fy: f64 = rng.random_range(0.05..0.9);
    let levels = rng.random_range(2..9) as f64;
    let data = (0..h * w)
        .map(|i| {
            let (y, x) = ((i / w) as f64, (i % w) as f64);
            match kind {
                0 => rng.random::<f64>(),
                1 => 0.5 + 0.5 * (fx * x).sin() * (fy * y).cos(),
                2 => (((fx * x + fy * y).sin() * 0.5 + 0.5) * levels).floor() / levels,
                _ => ((x + y) / (w + h) as f64 + 0.1 * rng.random::<f64>()).min(1.0),
            }
        })
        .collect();
    ImageTensor::new(h, w, 1, data).unwrap()
}

/// Regular, irregular, Bernoulli or rectangular masks. Always has at least
/// one missing pixel.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> MaskGrid {
    match rng.random_range(0..4) {
        0 => regular_mask(h, w).unwrap(),
        1 => {
            let ratio = rng.random_range(0.1..0.5);
            irregular_mask(h, w, ratio, rng.random()).unwrap()
        }
        2 => {
            let p = rng.random_range(0.05..0.6);
            let mut bits: Vec<u8> = (0..h * w).map(|_| u8::from(!rng.random_bool(p))).collect();
            bits[rng.random_range(0..h * w)] = 0;
            MaskGrid::new(h, w, bits).unwrap()
        }
        _ => {
            let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
            let (y1, x1) = (rng.random_range(y0..h), rng.random_range(x0..w));
            let mut m = MaskGrid::observed(h, w);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    m.set(y, x, false);
                }
            }
            m
        }
    }
}

/// Gray values and mask bits (`1` observed, `0` missing) as nested rows.
pub fn rows(gray: &GrayPlane, mask: &MaskGrid) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (h, w) = (gray.height(), gray.width());
    let g = (0..h).map(|y| (0..w).map(|x| gray.values()[y * w + x]).collect()).collect();
    let m = (0..h).map(|y| (0..w).map(|x| mask.bits()[y * w + x] as f64).collect()).collect();
    (g, m)
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

/// RMS Sobel magnitude over missing pixels, border replicated.
pub fn si_oracle(g: &[Vec<f64>], m: &[Vec<f64>]) -> Option<f64> {
    let (h, w) = (g.len() as i64, g[0].len() as i64);
    let at = |y: i64, x: i64| g[y.clamp(0, h - 1) as usize][x.clamp(0, w - 1) as usize];
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if m[y as usize][x as usize] != 0.0 {
                continue;
            }
            let (mut gx, mut gy) = (0.0, 0.0);
            for ky in 0..3 {
                for kx in 0..3 {
                    let v = at(y + ky as i64 - 1, x + kx as i64 - 1);
                    gx += SOBEL_X[ky][kx] * v;
                    gy += SOBEL_Y[ky][kx] * v;
                }
            }
            sum += gx * gx + gy * gy;
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Co-occurrence counts of missing/missing pairs at `(0, 1)`, else `(1, 0)`.
pub fn glcm_oracle(g: &[Vec<f64>], m: &[Vec<f64>]) -> Option<BTreeMap<(u8, u8), u64>> {
    let (h, w) = (g.len(), g[0].len());
    for (dy, dx) in [(0, 1), (1, 0)] {
        let mut counts = BTreeMap::new();
        for y in 0..h - dy {
            for x in 0..w - dx {
                if m[y][x] == 0.0 && m[y + dy][x + dx] == 0.0 {
                    *counts.entry((quantize(g[y][x]), quantize(g[y + dy][x + dx]))).or_insert(0) += 1;
                }
            }
        }
        if !counts.is_empty() {
            return Some(counts);
        }
    }
    None
}

pub fn entropy_oracle(counts: &BTreeMap<(u8, u8), u64>) -> f64 {
    let total: u64 = counts.values().sum();
    let mut h = 0.0;
    for &c in counts.values() {
        let p = c as f64 / total as f64;
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Right and down absolute differences gated by `1 - m` at the anchor.
pub fn tv_oracle(g: &[Vec<f64>], m: &[Vec<f64>]) -> f64 {
    let (h, w) = (g.len(), g[0].len());
    let mut tv = 0.0;
    for i in 0..h {
        for j in 0..w {
            let gate = 1.0 - m[i][j];
            if j + 1 < w {
                tv += (g[i][j + 1] - g[i][j]).abs() * gate;
            }
            if i + 1 < h {
                tv += (g[i + 1][j] - g[i][j]).abs() * gate;
            }
        }
    }
    tv
}

/// DBSCAN on the line via intervals: core points are chained into clusters
/// whenever consecutive cores are within `eps`; a non-core point within
/// `eps` of a cluster's core joins the leftmost such cluster. `None` marks
/// noise.
pub fn dbscan_oracle(values: &[f64], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = values.len();
    let is_core: Vec<bool> = values
        .iter()
        .map(|&v| values.iter().filter(|&&u| (u - v).abs() <= eps).count() >= min_pts)
        .collect();
    let mut cores: Vec<usize> = (0..n).filter(|&i| is_core[i]).collect();
    cores.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    // each cluster is a maximal run of sorted cores with gaps <= eps
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &c in &cores {
        match clusters.last_mut() {
            Some(run) if values[c] - values[*run.last().unwrap()] <= eps => run.push(c),
            _ => clusters.push(vec![c]),
        }
    }
    let mut labels = vec![None; n];
    for (id, run) in clusters.iter().enumerate() {
        for &c in run {
            labels[c] = Some(id);
        }
    }
    for i in (0..n).filter(|&i| !is_core[i]) {
        labels[i] = clusters
            .iter()
            .position(|run| run.iter().any(|&c| (values[c] - values[i]).abs() <= eps));
    }
    labels
}

/// Minimum of the largest oracle cluster (smaller minimum on ties), or the
/// median when everything is noise.
pub fn pivot_oracle(values: &[f64], labels: &[Option<usize>]) -> f64 {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if k == 0 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        return if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    }
    let mut best: Option<(usize, f64)> = None;
    for id in 0..k {
        let members: Vec<f64> = values.iter().zip(labels).filter(|(_, l)| **l == Some(id)).map(|(v, _)| *v).collect();
        let min = members.iter().copied().fold(f64::INFINITY, f64::min);
        let better = match best {
            None => true,
            Some((size, m)) => members.len() > size || (members.len() == size && min < m),
        };
        if better {
            best = Some((members.len(), min));
        }
    }
    best.unwrap().1
}

/// Values drawn from a few Gaussian blobs plus uniform background.
pub fn clustered_values(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..80);
    let blobs: Vec<(f64, f64)> = (0..rng.random_range(1..4))
        .map(|_| (rng.random::<f64>(), rng.random_range(0.002..0.05)))
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                rng.random::<f64>()
            } else {
                let (mu, sd) = blobs[rng.random_range(0..blobs.len())];
                // sum of uniforms is close enough to Gaussian here
                let z: f64 = (0..4).map(|_| rng.random::<f64>() - 0.5).sum::<f64>() * 1.7;
                mu + sd * z
            }
        })
        .collect()
}

/// SSIM straight from the definition: for every fully contained 11x11
/// window, Gaussian-weighted means, variances and covariance, then the
/// mean over windows and channels.
pub fn ssim_oracle(a: &ImageTensor, b: &ImageTensor) -> f64 {
    const WIN: usize = 11;
    let sigma = 1.5f64;
    let raw: Vec<f64> = (0..WIN).map(|i| (-((i as f64 - 5.0).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    let g: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let (h, w, ch) = a.shape();
    let mut per_channel = 0.0;
    for c in 0..ch {
        let mut total = 0.0;
        let mut windows = 0usize;
        for y0 in 0..=h - WIN {
            for x0 in 0..=w - WIN {
                let (mut mx, mut my) = (0.0, 0.0);
                for u in 0..WIN {
                    for v in 0..WIN {
                        let k = g[u] * g[v];
                        mx += k * a.get(y0 + u, x0 + v, c);
                        my += k * b.get(y0 + u, x0 + v, c);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for u in 0..WIN {
                    for v in 0..WIN {
                        let k = g[u] * g[v];
                        let dx = a.get(y0 + u, x0 + v, c) - mx;
                        let dy = b.get(y0 + u, x0 + v, c) - my;
                        vx += k * dx * dx;
                        vy += k * dy * dy;
                        cov += k * dx * dy;
                    }
                }
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                windows += 1;
            }
        }
        per_channel += total / windows as f64;
    }
    per_channel / ch as f64
}

/// Random multi-channel image in `[0, 1]`.
pub fn noise_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageTensor {
    ImageTensor::new(h, w, c, (0..h * w * c).map(|_| rng.random()).collect()).unwrap()
}
