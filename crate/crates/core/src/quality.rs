//! Full-reference quality metrics: PSNR and Gaussian-window SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// `+inf` for identical images.
    pub psnr: f64,
    pub ssim: f64,
}

fn check_shapes(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_shapes(a, b)?;
    // Neumaier summation: a uniform error then averages back to exactly its
    // square instead of drifting with the pixel count
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for (x, y) in a.data().iter().zip(b.data()) {
        let term = (x - y) * (x - y);
        let t = sum + term;
        carry += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
    }
    Ok((sum + carry) / a.data().len() as f64)
}

/// `10 log10(1 / MSE)` over all pixels and channels.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Mean SSIM over all fully-contained 11x11 windows, averaged over channels.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w, channels) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidDimensions {
            height: h,
            width: w,
            reason: "SSIM needs both dimensions >= 11",
        });
    }
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let total: f64 = (0..channels)
        .map(|c| {
            let x: Vec<f64> = (0..h * w).map(|i| a.get(i / w, i % w, c)).collect();
            let y: Vec<f64> = (0..h * w).map(|i| b.get(i / w, i % w, c)).collect();
            plane_ssim(&x, &y, h, w, &kernel)
        })
        .sum();
    Ok(total / channels as f64)
}

pub fn quality(a: &ImageTensor, b: &ImageTensor) -> Result<QualityReport> {
    Ok(QualityReport {
        psnr: psnr(a, b)?,
        ssim: ssim(a, b)?,
    })
}

fn plane_ssim(x: &[f64], y: &[f64], h: usize, w: usize, kernel: &[f64]) -> f64 {
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mu_x = filter_valid(x, h, w, kernel);
    let mu_y = filter_valid(y, h, w, kernel);
    let e_xx = filter_valid(&xx, h, w, kernel);
    let e_yy = filter_valid(&yy, h, w, kernel);
    let e_xy = filter_valid(&xy, h, w, kernel);
    let n = mu_x.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    sum / n as f64
}

/// Separable correlation keeping only fully-contained windows.
fn filter_valid(src: &[f64], h: usize, w: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, t)| t * src[y * w + x + i])
                .sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(h: usize, w: usize, c: usize, phase: f64) -> ImageTensor {
        ImageTensor::from_fn(h, w, c, |y, x, ch| {
            0.5 + 0.25 * ((y as f64 * 0.7 + x as f64 * 0.3 + ch as f64 + phase).sin())
        })
        .unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = ImageTensor::from_fn(4, 4, 1, |_, _, _| 0.3).unwrap();
        let b = ImageTensor::from_fn(4, 4, 1, |_, _, _| 0.4).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let x = pattern(16, 16, 3, 0.0);
        assert!((ssim(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let inv = ImageTensor::from_fn(16, 16, 3, |y, xx, c| 1.0 - x.get(y, xx, c)).unwrap();
        assert!(ssim(&x, &inv).unwrap() < 1.0);
        let y = pattern(16, 16, 3, 0.4);
        assert_eq!(ssim(&x, &y).unwrap(), ssim(&y, &x).unwrap());
    }

    #[test]
    fn ssim_rejects_small_or_mismatched() {
        let a = pattern(10, 16, 1, 0.0);
        assert!(ssim(&a, &a).is_err());
        assert!(ssim(&pattern(12, 12, 1, 0.0), &pattern(12, 13, 1, 0.0)).is_err());
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(11, 1.5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
        assert!(k[5] > k[4]);
    }
}
