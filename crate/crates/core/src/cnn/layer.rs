//! Same-length 1-D convolution with zero padding.
//!
//! Activations travel between layers in channel-major layout
//! `(channels, batch·length)`, which turns a convolution over the whole batch
//! into one matrix product against the unfolded (im2col) input.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::real::{gemm, Operand, Real};
use super::tensor::Tensor3;
use crate::error::{Result, SefdmError};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T = f32> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel: usize,
    /// `(out, in, kernel)` row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Gradient of one layer's parameters, same shapes as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads<T = f32> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> LayerGrads<T> {
    pub fn zeros_like(layer: &ConvLayer<T>) -> Self {
        Self {
            weights: vec![T::zero(); layer.weights.len()],
            bias: vec![T::zero(); layer.bias.len()],
        }
    }

    pub(crate) fn add_assign(&mut self, other: &LayerGrads<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a = *a + *b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a = *a + *b;
        }
    }
}

impl<T: Real> ConvLayer<T> {
    pub fn new(out_channels: usize, in_channels: usize, kernel: usize, weights: Vec<T>, bias: Vec<T>) -> Result<Self> {
        if kernel.is_multiple_of(2) || kernel == 0 {
            return Err(SefdmError::param(format!("kernel size must be odd, got {kernel}")));
        }
        if out_channels == 0 || in_channels == 0 {
            return Err(SefdmError::param("channel counts must be positive"));
        }
        if weights.len() != out_channels * in_channels * kernel {
            return Err(SefdmError::dims(out_channels * in_channels * kernel, format!("{} weights", weights.len())));
        }
        if bias.len() != out_channels {
            return Err(SefdmError::dims(out_channels, format!("{} biases", bias.len())));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kernel,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kernel: usize) -> Result<Self> {
        Self::new(
            out_channels,
            in_channels,
            kernel,
            vec![T::zero(); out_channels * in_channels * kernel],
            vec![T::zero(); out_channels],
        )
    }

    /// He-normal weights (`sd = √(2/(k·in))`), zero bias.
    pub fn he_normal<R: Rng + ?Sized>(out_channels: usize, in_channels: usize, kernel: usize, rng: &mut R) -> Result<Self> {
        let sd = (2.0 / (kernel * in_channels) as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        let weights = (0..out_channels * in_channels * kernel)
            .map(|_| T::from_f64_lossy(normal.sample(rng)))
            .collect();
        Self::new(out_channels, in_channels, kernel, weights, vec![T::zero(); out_channels])
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn cast<U: Real>(&self) -> ConvLayer<U> {
        ConvLayer {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            kernel: self.kernel,
            weights: self.weights.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
            bias: self.bias.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }

    fn pad(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// Unfolds `x` `(in, batch·len)` into `(in·k, batch·len)`.
    pub(crate) fn im2col(&self, x: &[T], batch: usize, len: usize) -> Vec<T> {
        let cols = batch * len;
        let k = self.kernel;
        let pad = self.pad() as isize;
        let mut out = vec![T::zero(); self.in_channels * k * cols];
        for i in 0..self.in_channels {
            let src = &x[i * cols..(i + 1) * cols];
            for j in 0..k {
                let shift = j as isize - pad;
                let dst = &mut out[(i * k + j) * cols..(i * k + j + 1) * cols];
                for b in 0..batch {
                    let s = &src[b * len..(b + 1) * len];
                    let d = &mut dst[b * len..(b + 1) * len];
                    for t in 0..len {
                        let u = t as isize + shift;
                        if u >= 0 && (u as usize) < len {
                            d[t] = s[u as usize];
                        }
                    }
                }
            }
        }
        out
    }

    /// Adjoint of [`Self::im2col`].
    pub(crate) fn col2im(&self, dcols: &[T], batch: usize, len: usize) -> Vec<T> {
        let cols = batch * len;
        let k = self.kernel;
        let pad = self.pad() as isize;
        let mut dx = vec![T::zero(); self.in_channels * cols];
        for i in 0..self.in_channels {
            let dst = &mut dx[i * cols..(i + 1) * cols];
            for j in 0..k {
                let shift = j as isize - pad;
                let src = &dcols[(i * k + j) * cols..(i * k + j + 1) * cols];
                for b in 0..batch {
                    let s = &src[b * len..(b + 1) * len];
                    let d = &mut dst[b * len..(b + 1) * len];
                    for t in 0..len {
                        let u = t as isize + shift;
                        if u >= 0 && (u as usize) < len {
                            d[u as usize] = d[u as usize] + s[t];
                        }
                    }
                }
            }
        }
        dx
    }

    /// Channel-major forward. Returns `(unfolded input, output)`.
    pub(crate) fn forward_cm(&self, x: &[T], batch: usize, len: usize, relu: bool) -> (Vec<T>, Vec<T>) {
        let cols = batch * len;
        debug_assert_eq!(x.len(), self.in_channels * cols);
        let unfolded = self.im2col(x, batch, len);
        let mut out = vec![T::zero(); self.out_channels * cols];
        for (row, &b) in out.chunks_exact_mut(cols).zip(&self.bias) {
            row.fill(b);
        }
        gemm(
            Operand::plain(&self.weights, self.out_channels, self.in_channels * self.kernel),
            Operand::plain(&unfolded, self.in_channels * self.kernel, cols),
            T::one(),
            &mut out,
        );
        if relu {
            for v in out.iter_mut() {
                if !(*v > T::zero()) {
                    *v = T::zero();
                }
            }
        }
        (unfolded, out)
    }

    /// Channel-major backward from the gradient w.r.t. the pre-activation.
    /// Returns the parameter gradients and the gradient w.r.t. the input.
    pub(crate) fn backward_cm(&self, unfolded: &[T], dz: &[T], batch: usize, len: usize) -> (LayerGrads<T>, Vec<T>) {
        let cols = batch * len;
        let ik = self.in_channels * self.kernel;
        let mut dw = vec![T::zero(); self.out_channels * ik];
        gemm(
            Operand::plain(dz, self.out_channels, cols),
            Operand::transposed(unfolded, ik, cols),
            T::zero(),
            &mut dw,
        );
        let db = dz.chunks_exact(cols).map(|row| row.iter().copied().sum()).collect();
        let mut dcols = vec![T::zero(); ik * cols];
        gemm(
            Operand::transposed(&self.weights, self.out_channels, ik),
            Operand::plain(dz, self.out_channels, cols),
            T::zero(),
            &mut dcols,
        );
        let dx = self.col2im(&dcols, batch, len);
        (LayerGrads { weights: dw, bias: db }, dx)
    }
}

/// Cross-correlation with `(k−1)/2` zeros each side, plus bias, then ReLU
/// when `apply_relu` is set.
pub fn conv1d_forward<T: Real>(layer: &ConvLayer<T>, x: &Tensor3<T>, apply_relu: bool) -> Result<Tensor3<T>> {
    if x.channels != layer.in_channels {
        return Err(SefdmError::dims(
            format!("{} input channels", layer.in_channels),
            format!("{}", x.channels),
        ));
    }
    let (_, out) = layer.forward_cm(&x.to_channel_major(), x.batch, x.length, apply_relu);
    Ok(Tensor3::from_channel_major(&out, x.batch, layer.out_channels, x.length))
}

/// `relu(l2(relu(l1(x)))) + x`.
pub fn residual_block_forward<T: Real>(l1: &ConvLayer<T>, l2: &ConvLayer<T>, x: &Tensor3<T>) -> Result<Tensor3<T>> {
    if l1.in_channels != x.channels
        || l1.out_channels != x.channels
        || l2.in_channels != x.channels
        || l2.out_channels != x.channels
    {
        return Err(SefdmError::dims(
            format!("channel-preserving layers on {} channels", x.channels),
            format!(
                "{}→{} and {}→{}",
                l1.in_channels, l1.out_channels, l2.in_channels, l2.out_channels
            ),
        ));
    }
    let h1 = conv1d_forward(l1, x, true)?;
    let mut h2 = conv1d_forward(l2, &h1, true)?;
    for (o, i) in h2.values.iter_mut().zip(&x.values) {
        *o = *o + *i;
    }
    Ok(h2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1(values: Vec<f64>) -> Tensor3<f64> {
        let n = values.len();
        Tensor3::from_values(1, 1, n, values).unwrap()
    }

    #[test]
    fn pointwise_identity() {
        let layer = ConvLayer::new(2, 2, 1, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let x = Tensor3::from_values(2, 2, 3, (0..12).map(|v| v as f64 - 5.0).collect()).unwrap();
        assert_eq!(conv1d_forward(&layer, &x, false).unwrap(), x);
    }

    #[test]
    fn centred_delta_kernel_is_identity() {
        let layer = ConvLayer::new(1, 1, 3, vec![0.0, 1.0, 0.0], vec![0.0]).unwrap();
        let x = t1(vec![1.0, -2.0, 3.0, 0.5]);
        assert_eq!(conv1d_forward(&layer, &x, false).unwrap(), x);
    }

    #[test]
    fn box_kernel_with_zero_padding() {
        let layer = ConvLayer::new(1, 1, 3, vec![1.0, 1.0, 1.0], vec![0.0]).unwrap();
        let out = conv1d_forward(&layer, &t1(vec![1.0, 2.0, 3.0]), false).unwrap();
        assert_eq!(out.values, vec![3.0, 6.0, 5.0]);
    }

    #[test]
    fn relu_and_bias() {
        let layer = ConvLayer::new(1, 1, 1, vec![1.0], vec![-1.0]).unwrap();
        let x = t1(vec![0.5, 2.0]);
        assert_eq!(conv1d_forward(&layer, &x, true).unwrap().values, vec![0.0, 1.0]);
        assert_eq!(conv1d_forward(&layer, &x, false).unwrap().values, vec![-0.5, 1.0]);
    }

    #[test]
    fn asymmetric_kernel_orientation() {
        // Cross-correlation: out[t] = w0·x[t−1] + w1·x[t] + w2·x[t+1].
        let layer = ConvLayer::new(1, 1, 3, vec![1.0, 10.0, 100.0], vec![0.0]).unwrap();
        let out = conv1d_forward(&layer, &t1(vec![1.0, 2.0, 3.0]), false).unwrap();
        assert_eq!(out.values, vec![210.0, 321.0, 32.0]);
    }

    #[test]
    fn batches_do_not_leak_through_padding() {
        let layer = ConvLayer::new(1, 1, 3, vec![1.0, 1.0, 1.0], vec![0.0]).unwrap();
        let x = Tensor3::from_values(2, 1, 2, vec![1.0, 2.0, 10.0, 20.0]).unwrap();
        assert_eq!(conv1d_forward(&layer, &x, false).unwrap().values, vec![3.0, 3.0, 30.0, 30.0]);
    }

    #[test]
    fn shape_errors() {
        let layer = ConvLayer::<f64>::zeros(1, 2, 3).unwrap();
        assert!(conv1d_forward(&layer, &t1(vec![1.0]), false).is_err());
        assert!(ConvLayer::<f64>::zeros(1, 1, 2).is_err());
        assert!(ConvLayer::new(1, 1, 1, vec![1.0f64, 2.0], vec![0.0]).is_err());
    }

    #[test]
    fn residual_block_cases() {
        let z = ConvLayer::<f64>::zeros(1, 1, 3).unwrap();
        let x = t1(vec![1.0, -1.0, 0.25]);
        assert_eq!(residual_block_forward(&z, &z, &x).unwrap(), x);

        let w = ConvLayer::new(1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        assert_eq!(residual_block_forward(&w, &w, &t1(vec![0.0, 0.0])).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(residual_block_forward(&w, &w, &t1(vec![1.0, -1.0])).unwrap().values, vec![2.0, -1.0]);

        let widen = ConvLayer::<f64>::zeros(2, 1, 1).unwrap();
        assert!(residual_block_forward(&widen, &w, &x).is_err());
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        // ⟨im2col(x), c⟩ = ⟨x, col2im(c)⟩ for arbitrary x, c.
        let layer = ConvLayer::<f64>::zeros(1, 2, 5).unwrap();
        let (batch, len) = (3, 4);
        let x: Vec<f64> = (0..2 * batch * len).map(|v| ((v * 7) % 11) as f64 - 5.0).collect();
        let c: Vec<f64> = (0..2 * 5 * batch * len).map(|v| ((v * 3) % 13) as f64 - 6.0).collect();
        let lhs: f64 = layer.im2col(&x, batch, len).iter().zip(&c).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&layer.col2im(&c, batch, len)).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }
}
