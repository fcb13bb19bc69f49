use num_complex::Complex64;

use super::real::Real;
use crate::error::{Result, SefdmError};
use crate::signal::Observation;

/// Dense `(batch, channels, length)` array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T = f32> {
    pub batch: usize,
    pub channels: usize,
    pub length: usize,
    pub values: Vec<T>,
}

impl<T: Real> Tensor3<T> {
    pub fn zeros(batch: usize, channels: usize, length: usize) -> Self {
        Self {
            batch,
            channels,
            length,
            values: vec![T::zero(); batch * channels * length],
        }
    }

    pub fn from_values(batch: usize, channels: usize, length: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != batch * channels * length {
            return Err(SefdmError::dims(
                format!("{} values for shape ({batch}, {channels}, {length})", batch * channels * length),
                values.len(),
            ));
        }
        Ok(Self {
            batch,
            channels,
            length,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.length)
    }

    pub fn get(&self, b: usize, c: usize, t: usize) -> T {
        self.values[(b * self.channels + c) * self.length + t]
    }

    pub fn set(&mut self, b: usize, c: usize, t: usize, v: T) {
        self.values[(b * self.channels + c) * self.length + t] = v;
    }

    /// Channel-major `(channels, batch·length)` layout used by the layers.
    pub(crate) fn to_channel_major(&self) -> Vec<T> {
        let cols = self.batch * self.length;
        let mut out = vec![T::zero(); self.channels * cols];
        for b in 0..self.batch {
            for c in 0..self.channels {
                let src = &self.values[(b * self.channels + c) * self.length..][..self.length];
                out[c * cols + b * self.length..][..self.length].copy_from_slice(src);
            }
        }
        out
    }

    pub(crate) fn from_channel_major(data: &[T], batch: usize, channels: usize, length: usize) -> Self {
        let cols = batch * length;
        debug_assert_eq!(data.len(), channels * cols);
        let mut t = Self::zeros(batch, channels, length);
        for b in 0..batch {
            for c in 0..channels {
                let src = &data[c * cols + b * length..][..length];
                t.values[(b * channels + c) * length..][..length].copy_from_slice(src);
            }
        }
        t
    }

    pub fn cast<U: Real>(&self) -> Tensor3<U> {
        Tensor3 {
            batch: self.batch,
            channels: self.channels,
            length: self.length,
            values: self.values.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Packs a complex observation as a `(1, 2, N)` tensor: real parts then imaginary parts.
pub fn observation_to_tensor<T: Real>(y: &Observation) -> Tensor3<T> {
    observations_to_tensor(std::slice::from_ref(y))
}

/// Stacks observations of equal length along the batch axis.
pub fn observations_to_tensor<T: Real>(ys: &[Observation]) -> Tensor3<T> {
    let n = ys.first().map_or(0, |y| y.len());
    let mut t = Tensor3::zeros(ys.len(), 2, n);
    for (b, y) in ys.iter().enumerate() {
        assert_eq!(y.len(), n, "observations in a batch must share N");
        for (i, z) in y.y.iter().enumerate() {
            t.set(b, 0, i, T::from_f64_lossy(z.re));
            t.set(b, 1, i, T::from_f64_lossy(z.im));
        }
    }
    t
}

/// Inverse of [`observation_to_tensor`] for one batch entry.
pub fn tensor_to_complex<T: Real>(t: &Tensor3<T>, batch_index: usize) -> Result<Vec<Complex64>> {
    if t.channels != 2 || batch_index >= t.batch {
        return Err(SefdmError::dims("(batch, 2, N) tensor", format!("{:?}", t.shape())));
    }
    Ok((0..t.length)
        .map(|i| Complex64::new(t.get(batch_index, 0, i).to_f64_lossy(), t.get(batch_index, 1, i).to_f64_lossy()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SefdmConfig;

    fn obs(y: Vec<Complex64>) -> Observation {
        let cfg = SefdmConfig::qpsk(y.len(), 0.8, 1.0).unwrap();
        Observation::new(y, cfg).unwrap()
    }

    #[test]
    fn packs_real_then_imaginary() {
        let t: Tensor3<f64> = observation_to_tensor(&obs(vec![Complex64::new(1.0, 2.0)]));
        assert_eq!(t.shape(), (1, 2, 1));
        assert_eq!(t.values, vec![1.0, 2.0]);
        let z: Tensor3<f32> = observation_to_tensor(&obs(vec![Complex64::new(0.0, 0.0); 3]));
        assert!(z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_trip() {
        let y = vec![Complex64::new(0.5, -1.5), Complex64::new(-2.0, 0.25), Complex64::new(3.0, 4.0)];
        let t: Tensor3<f64> = observation_to_tensor(&obs(y.clone()));
        assert_eq!(tensor_to_complex(&t, 0).unwrap(), y);
    }

    #[test]
    fn channel_major_round_trip() {
        let t = Tensor3::from_values(2, 3, 4, (0..24).map(|v| v as f32).collect()).unwrap();
        let cm = t.to_channel_major();
        // Channel 1 of batch 1 lands after channel 1 of batch 0.
        assert_eq!(&cm[8..16], &[4.0, 5.0, 6.0, 7.0, 16.0, 17.0, 18.0, 19.0]);
        assert_eq!(Tensor3::from_channel_major(&cm, 2, 3, 4), t);
    }
}
