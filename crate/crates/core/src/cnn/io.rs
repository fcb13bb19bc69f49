//! Binary model files.
//!
//! Layout, little-endian:
//!
//! ```text
//! "SFDM" | version u8 = 1
//! N u32 | alpha f64 | classes u32 | kernel u32 | scales u32 | widths u32×scales
//! blocks_per_scale u32 | seed u64
//! per layer, in topological order: weights f32×(out·in·k), bias f32×out
//! ```

use std::fs;
use std::path::Path;

use super::layer::ConvLayer;
use super::model::{Architecture, Model};
use crate::error::{Result, SefdmError};

pub const MAGIC: &[u8; 4] = b"SFDM";
pub const VERSION: u8 = 1;

/// Upper bound on header counts, rejecting garbage before allocating.
const MAX_DIM: u32 = 1 << 20;

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(model.n as u32).to_le_bytes());
    out.extend_from_slice(&model.alpha.to_le_bytes());
    out.extend_from_slice(&(model.classes as u32).to_le_bytes());
    out.extend_from_slice(&(model.arch.kernel as u32).to_le_bytes());
    out.extend_from_slice(&(model.arch.widths.len() as u32).to_le_bytes());
    for &w in &model.arch.widths {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.arch.blocks_per_scale as u32).to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    for layer in &model.layers {
        for v in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(SefdmError::format(field, format!("truncated at byte {}", self.buf.len())));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn dim(&mut self, field: &str) -> Result<usize> {
        let v = self.u32(field)?;
        if v > MAX_DIM {
            return Err(SefdmError::format(field, format!("implausible value {v}")));
        }
        Ok(v as usize)
    }

    fn u64(&mut self, field: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn f64(&mut self, field: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }

    fn f32s(&mut self, count: usize, field: &str) -> Result<Vec<f32>> {
        let bytes = self.take(count * 4, field)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn model_from_bytes(buf: &[u8]) -> Result<Model> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(SefdmError::format("magic", "not a model file"));
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(SefdmError::format("version", format!("unsupported version {version}")));
    }
    let n = r.dim("n")?;
    let alpha = r.f64("alpha")?;
    let classes = r.dim("classes")?;
    let kernel = r.dim("kernel")?;
    let scales = r.dim("scale count")?;
    let widths = (0..scales).map(|i| r.dim(&format!("widths[{i}]"))).collect::<Result<Vec<_>>>()?;
    let blocks = r.dim("blocks_per_scale")?;
    let seed = r.u64("seed")?;

    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SefdmError::format("alpha", format!("{alpha} outside (0, 1]")));
    }
    let arch = Architecture::new(widths, blocks, kernel).map_err(|e| SefdmError::format("architecture", e.to_string()))?;

    let mut layers = Vec::with_capacity(arch.layer_count());
    let mut channels = 2;
    let mut shapes = Vec::new();
    for &w in &arch.widths {
        shapes.push((w, channels, arch.kernel));
        for _ in 0..2 * arch.blocks_per_scale {
            shapes.push((w, w, arch.kernel));
        }
        channels = w;
    }
    shapes.push((classes, channels, 1));
    for (i, (out_c, in_c, k)) in shapes.into_iter().enumerate() {
        let weights = r.f32s(out_c * in_c * k, &format!("layer {i} weights"))?;
        let bias = r.f32s(out_c, &format!("layer {i} bias"))?;
        layers.push(ConvLayer::new(out_c, in_c, k, weights, bias).map_err(|e| SefdmError::format(format!("layer {i}"), e.to_string()))?);
    }
    if r.pos != buf.len() {
        return Err(SefdmError::format("trailer", format!("{} unexpected trailing bytes", buf.len() - r.pos)));
    }
    Model::from_layers(n, alpha, arch, classes, seed, layers).map_err(|e| SefdmError::format("model", e.to_string()))
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    model_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::build_model;

    fn toy() -> Model {
        build_model(5, 0.85, &Architecture::new(vec![3, 6], 1, 3).unwrap(), 4, 77).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = toy();
        let back = model_from_bytes(&model_to_bytes(&m)).unwrap();
        assert_eq!(back, m);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.sfdm");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn header_layout() {
        let bytes = model_to_bytes(&toy());
        assert_eq!(&bytes[..4], b"SFDM");
        assert_eq!(bytes[4], 1);
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 5);
        assert_eq!(f64::from_le_bytes(bytes[9..17].try_into().unwrap()), 0.85);
    }

    #[test]
    fn truncation_names_the_field() {
        let bytes = model_to_bytes(&toy());
        for cut in [0, 3, 6, 20, bytes.len() - 1] {
            match model_from_bytes(&bytes[..cut]) {
                Err(SefdmError::Format { field, .. }) => assert!(!field.is_empty()),
                other => panic!("cut {cut}: expected format error, got {other:?}"),
            }
        }
        match model_from_bytes(&bytes[..bytes.len() - 1]) {
            Err(SefdmError::Format { field, .. }) => assert_eq!(field, "layer 6 bias"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let mut bytes = model_to_bytes(&toy());
        bytes[0] = b'X';
        assert!(matches!(model_from_bytes(&bytes), Err(SefdmError::Format { ref field, .. }) if field == "magic"));

        let mut bytes = model_to_bytes(&toy());
        bytes[4] = 2;
        assert!(matches!(model_from_bytes(&bytes), Err(SefdmError::Format { ref field, .. }) if field == "version"));

        let mut bytes = model_to_bytes(&toy());
        bytes.push(0);
        assert!(matches!(model_from_bytes(&bytes), Err(SefdmError::Format { ref field, .. }) if field == "trailer"));

        // Widths 3, 6 → 6, 3 violates the increasing-width rule.
        let mut bytes = model_to_bytes(&toy());
        bytes[29..33].copy_from_slice(&6u32.to_le_bytes());
        bytes[33..37].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(model_from_bytes(&bytes), Err(SefdmError::Format { ref field, .. }) if field == "architecture"));
    }
}
