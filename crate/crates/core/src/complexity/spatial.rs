use crate::error::Result;
use crate::imaging::{GrayPlane, MaskGrid};

use super::check_shape;

/// Root-mean-square Sobel gradient magnitude over the missing pixels.
///
/// The Sobel response is that of the full image (replicate-padded at the
/// border), so edges on the hole boundary contribute.
pub fn spatial_information(gray: &GrayPlane, mask: &MaskGrid) -> Result<f64> {
    check_shape(gray, mask)?;
    let missing = mask.require_missing()?;
    let (h, w) = (gray.height(), gray.width());
    let mut sum_sq = 0.0;
    for y in 0..h {
        let ys = [y.saturating_sub(1), y, (y + 1).min(h - 1)];
        for x in 0..w {
            if !mask.is_missing(y, x) {
                continue;
            }
            let xs = [x.saturating_sub(1), x, (x + 1).min(w - 1)];
            let p = |r: usize, c: usize| gray.get(ys[r], xs[c]);
            let horizontal = (p(0, 2) - p(0, 0)) + 2.0 * (p(1, 2) - p(1, 0)) + (p(2, 2) - p(2, 0));
            let vertical = (p(2, 0) - p(0, 0)) + 2.0 * (p(2, 1) - p(0, 1)) + (p(2, 2) - p(0, 2));
            sum_sq += horizontal * horizontal + vertical * vertical;
        }
    }
    Ok((sum_sq / missing as f64).sqrt())
}
