//! Model checkpoint format.
//!
//! Binary layout: magic `PCAVNN1\0`, u32 layer count, u32 x3 input shape,
//! u64 init seed, then one descriptor per layer (u32 tag, u32 a, u32 b,
//! f64 extra), then the float64 parameter blocks in layer order (weights
//! before bias).

use crate::error::{Error, Result};
use crate::models::{Layer, LayerSpec, NetworkModel};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PCAVNN1\0";

const TAG_DENSE: u32 = 1;
const TAG_RELU: u32 = 2;
const TAG_CONV: u32 = 3;
const TAG_MAXPOOL: u32 = 4;
const TAG_DROPOUT: u32 = 5;
const TAG_FLATTEN: u32 = 6;

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    let (c, h, wd) = model.input_shape();
    for v in [c, h, wd] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&model.seed().to_le_bytes())?;
    for layer in model.layers() {
        let (tag, a, b, extra) = match layer {
            Layer::Dense { in_dim, out_dim, .. } => (TAG_DENSE, *in_dim, *out_dim, 0.0),
            Layer::Relu => (TAG_RELU, 0, 0, 0.0),
            Layer::Conv2d { in_ch, out_ch, .. } => (TAG_CONV, *in_ch, *out_ch, 0.0),
            Layer::MaxPool2x2 => (TAG_MAXPOOL, 0, 0, 0.0),
            Layer::Dropout { p } => (TAG_DROPOUT, 0, 0, *p),
            Layer::Flatten => (TAG_FLATTEN, 0, 0, 0.0),
        };
        w.write_all(&tag.to_le_bytes())?;
        w.write_all(&(a as u32).to_le_bytes())?;
        w.write_all(&(b as u32).to_le_bytes())?;
        w.write_all(&extra.to_le_bytes())?;
    }
    for layer in model.layers() {
        if let Some((weights, bias)) = layer.params() {
            for v in weights.iter().chain(bias) {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic in {}: {magic:?}",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32> {
        r.read_exact(&mut u32buf)?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let n_layers = read_u32(&mut r)? as usize;
    let c = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let wd = read_u32(&mut r)? as usize;
    r.read_exact(&mut u64buf)?;
    let seed = u64::from_le_bytes(u64buf);

    let mut specs = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let tag = read_u32(&mut r)?;
        let _a = read_u32(&mut r)? as usize;
        let b = read_u32(&mut r)? as usize;
        r.read_exact(&mut u64buf)?;
        let extra = f64::from_le_bytes(u64buf);
        specs.push(match tag {
            TAG_DENSE => LayerSpec::Dense(b),
            TAG_RELU => LayerSpec::Relu,
            TAG_CONV => LayerSpec::Conv2d(b),
            TAG_MAXPOOL => LayerSpec::MaxPool2x2,
            TAG_DROPOUT => LayerSpec::Dropout(extra),
            TAG_FLATTEN => LayerSpec::Flatten,
            other => return Err(Error::Format(format!("unknown layer tag {other}"))),
        });
    }
    let mut model = NetworkModel::build((c, h, wd), &specs, seed)?;
    for layer in model.layers_mut() {
        if let Some((weights, bias)) = layer.params_mut() {
            for v in weights.iter_mut().chain(bias.iter_mut()) {
                r.read_exact(&mut u64buf)?;
                *v = f64::from_le_bytes(u64buf);
            }
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_conv_model() {
        let model = NetworkModel::conv_classifier((1, 12, 12), 5, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn round_trip_mlp() {
        let model = NetworkModel::mlp(7, &[5], 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mlp.bin");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"WRONGMAGIC").unwrap();
        assert!(load_model(&path).is_err());
    }
}
