use crate::error::{Error, Result};
use crate::imaging::{ImageTensor, MaskGrid};

/// A single linear convolution stencil that predicts every missing pixel from
/// the observed (masked) neighbourhood. Each channel has its own `k x k`
/// weights; one bias is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyInpainter {
    kernel: usize,
    channels: usize,
    /// `[channel][dy][dx]`, then the bias as the last element.
    params: Vec<f64>,
    pub learning_rate: f64,
    pub step: u64,
}

/// Predictions at the missing pixels, in scan order with channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub values: Vec<f64>,
}

impl ToyInpainter {
    pub fn new(kernel: usize, channels: usize, learning_rate: f64) -> Result<Self> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::invalid("kernel", "must be odd and positive"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be finite and nonnegative"));
        }
        Ok(ToyInpainter {
            kernel,
            channels,
            params: vec![0.0; kernel * kernel * channels + 1],
            learning_rate,
            step: 0,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check(&self, img: &ImageTensor, mask: &MaskGrid) -> Result<usize> {
        if img.channels() != self.channels {
            return Err(Error::UnsupportedChannels(img.channels()));
        }
        if img.height() != mask.height() || img.width() != mask.width() {
            return Err(Error::ShapeMismatch {
                left: img.shape(),
                right: (mask.height(), mask.width(), img.channels()),
            });
        }
        mask.require_missing()
    }

    /// Zero-padded copy of `img * mask`, one `[y][x]` plane per channel with
    /// a border of `k/2`. Returns the buffer and the padded width.
    fn masked_padded(&self, img: &ImageTensor, mask: &MaskGrid) -> (Vec<f64>, usize) {
        let r = self.kernel / 2;
        let (h, w, c) = img.shape();
        let pw = w + 2 * r;
        let plane = (h + 2 * r) * pw;
        let mut buf = vec![0.0; plane * c];
        let data = img.data();
        for (y, bits) in mask.bits().chunks_exact(w).enumerate() {
            let src = &data[y * w * c..(y + 1) * w * c];
            for ch in 0..c {
                let start = ch * plane + (y + r) * pw + r;
                let dst = &mut buf[start..start + w];
                for ((d, &m), px) in dst.iter_mut().zip(bits).zip(src.chunks_exact(c)) {
                    *d = if m != 0 { px[ch] } else { 0.0 };
                }
            }
        }
        (buf, pw)
    }

    /// Visits every missing `(pixel, channel)` with the padded buffer offset
    /// of its window's top-left corner.
    fn for_each_missing(&self, mask: &MaskGrid, pw: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
        let plane = (mask.height() + self.kernel - 1) * pw;
        for (y, bits) in mask.bits().chunks_exact(mask.width()).enumerate() {
            for (x, _) in bits.iter().enumerate().filter(|(_, &m)| m == 0) {
                for ch in 0..self.channels {
                    f(y, x, ch, ch * plane + y * pw + x);
                }
            }
        }
    }

    /// Unclamped predictions at the missing pixels.
    pub fn forward(&self, img: &ImageTensor, mask: &MaskGrid) -> Result<Prediction> {
        let n = self.check(img, mask)?;
        let (buf, pw) = self.masked_padded(img, mask);
        let k = self.kernel;
        let c = self.channels;
        let bias = self.params[self.params.len() - 1];
        let mut values = Vec::with_capacity(n * c);
        self.for_each_missing(mask, pw, |_, _, ch, base| {
            let w = &self.params[ch * k * k..(ch + 1) * k * k];
            // one partial sum per stencil row keeps the add chains short
            let mut acc = bias;
            for (dy, wr) in w.chunks_exact(k).enumerate() {
                let row = &buf[base + dy * pw..base + dy * pw + k];
                acc += wr.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            }
            values.push(acc);
        });
        Ok(Prediction { values })
    }

    /// Masked L1 of a prediction against the ground truth.
    pub fn loss(&self, pred: &Prediction, truth: &ImageTensor, mask: &MaskGrid) -> f64 {
        let mut sum = 0.0;
        let mut i = 0;
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.is_missing(y, x) {
                    for ch in 0..self.channels {
                        sum += (pred.values[i] - truth.get(y, x, ch)).abs();
                        i += 1;
                    }
                }
            }
        }
        sum / pred.values.len() as f64
    }

    /// Gradient of the masked L1 with respect to the parameters, using the
    /// subgradient `sign(0) = 0`.
    pub fn gradient(&self, pred: &Prediction, truth: &ImageTensor, mask: &MaskGrid) -> Result<Vec<f64>> {
        self.check(truth, mask)?;
        let (buf, pw) = self.masked_padded(truth, mask);
        let k = self.kernel;
        let mut grad = vec![0.0; self.params.len()];
        let bias_slot = grad.len() - 1;
        let mut i = 0;
        self.for_each_missing(mask, pw, |y, x, ch, base| {
            let residual = pred.values[i] - truth.get(y, x, ch);
            i += 1;
            let s = if residual > 0.0 {
                1.0
            } else if residual < 0.0 {
                -1.0
            } else {
                return;
            };
            let g = &mut grad[ch * k * k..(ch + 1) * k * k];
            for (dy, gr) in g.chunks_exact_mut(k).enumerate() {
                let row = &buf[base + dy * pw..base + dy * pw + k];
                for (gv, v) in gr.iter_mut().zip(row) {
                    *gv += s * v;
                }
            }
            grad[bias_slot] += s;
        });
        let n = pred.values.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(grad)
    }

    /// `params -= learning_rate * grad`.
    pub fn apply(&mut self, grad: &[f64]) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= self.learning_rate * g;
        }
        self.step += 1;
    }

    /// Observed pixels copied through, missing pixels predicted and clamped.
    pub fn inpaint(&self, img: &ImageTensor, mask: &MaskGrid) -> Result<ImageTensor> {
        let pred = self.forward(img, mask)?;
        let mut data = img.data().to_vec();
        let c = self.channels;
        let mut i = 0;
        for y in 0..mask.height() {
            for x in 0..mask.width() {
                if mask.is_missing(y, x) {
                    for ch in 0..c {
                        data[(y * mask.width() + x) * c + ch] = pred.values[i].clamp(0.0, 1.0);
                        i += 1;
                    }
                }
            }
        }
        ImageTensor::new(img.height(), img.width(), c, data)
    }

    /// Masked L1 with predictions clamped to `[0, 1]`.
    pub fn eval_loss(&self, img: &ImageTensor, mask: &MaskGrid) -> Result<f64> {
        masked_l1_loss(&self.inpaint(img, mask)?, img, mask)
    }
}

/// Mean absolute error over missing pixels and channels.
pub fn masked_l1_loss(pred: &ImageTensor, truth: &ImageTensor, mask: &MaskGrid) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::ShapeMismatch {
            left: pred.shape(),
            right: truth.shape(),
        });
    }
    if mask.height() != truth.height() || mask.width() != truth.width() {
        return Err(Error::ShapeMismatch {
            left: truth.shape(),
            right: (mask.height(), mask.width(), truth.channels()),
        });
    }
    let n = mask.require_missing()?;
    let c = truth.channels();
    let mut sum = 0.0;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.is_missing(y, x) {
                for ch in 0..c {
                    sum += (pred.get(y, x, ch) - truth.get(y, x, ch)).abs();
                }
            }
        }
    }
    Ok(sum / (n * c) as f64)
}
