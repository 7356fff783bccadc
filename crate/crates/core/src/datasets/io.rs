//! Dataset container format and CSV export.
//!
//! Binary layout: magic `PCAVDS1\0`, five little-endian u32 header fields
//! (n, K, C, H, W), then the float64 sample block, the i32 class-label
//! block, and the i8 artifact-flag block.

use crate::datasets::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PCAVDS1\0";

pub fn save_binary(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    let (c, h, wd) = ds.channel_shape();
    for v in [ds.n(), ds.n_classes(), c, h, wd] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for &v in ds.samples().data() {
        w.write_all(&v.to_le_bytes())?;
    }
    for &l in ds.labels() {
        w.write_all(&l.to_le_bytes())?;
    }
    for &s in ds.artifact_flags() {
        w.write_all(&[s as u8])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a dataset container. The format does not carry the split tag;
/// the caller supplies it.
pub fn load_binary(path: &Path, split: Split) -> Result<LabeledDataset> {
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
    let mut header = [0usize; 5];
    for slot in &mut header {
        r.read_exact(&mut u32buf)?;
        *slot = u32::from_le_bytes(u32buf) as usize;
    }
    let [n, k, c, h, w] = header;
    let d = c * h * w;
    let mut data = vec![0.0f64; n * d];
    let mut f64buf = [0u8; 8];
    for v in &mut data {
        r.read_exact(&mut f64buf)?;
        *v = f64::from_le_bytes(f64buf);
    }
    let mut y_c = vec![0i32; n];
    for l in &mut y_c {
        r.read_exact(&mut u32buf)?;
        *l = i32::from_le_bytes(u32buf);
    }
    let mut flags = vec![0u8; n];
    r.read_exact(&mut flags)?;
    let y_s: Vec<i8> = flags.iter().map(|&b| b as i8).collect();

    let mut ds = LabeledDataset::new(Tensor::new(vec![n, d], data)?, (c, h, w), y_c, y_s, split)?;
    // Reconstruct the label alphabet: contiguous 0..K when the observed
    // labels fit it (a poisoned set may have lost classes), otherwise the
    // observed values.
    if ds.label_values().iter().all(|&l| l >= 0 && (l as usize) < k) {
        ds.set_label_values((0..k as i32).collect());
    }
    Ok(ds)
}

/// One row per sample: flattened pixels, then y_c and y_s.
pub fn export_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let d = ds.dim();
    for j in 0..d {
        write!(w, "x{j},")?;
    }
    writeln!(w, "y_c,y_s")?;
    for i in 0..ds.n() {
        for v in ds.sample(i) {
            write!(w, "{v},")?;
        }
        writeln!(w, "{},{}", ds.labels()[i], ds.artifact_flags()[i])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_pattern_classes, PatternClassesConfig};
    use crate::numerics::Rng;

    #[test]
    fn binary_round_trip() {
        let cfg = PatternClassesConfig {
            k: 3,
            shape: (1, 8, 8),
            n_per_class: 4,
            noise_sigma: 0.05,
        };
        let ds = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(21)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        save_binary(&ds, &path).unwrap();
        let back = load_binary(&path, Split::Train).unwrap();
        assert_eq!(back.samples(), ds.samples());
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.artifact_flags(), ds.artifact_flags());
        assert_eq!(back.channel_shape(), ds.channel_shape());
        assert_eq!(back.n_classes(), 3);
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTMAGIC rest").unwrap();
        assert!(load_binary(&path, Split::Train).is_err());
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let cfg = PatternClassesConfig {
            k: 2,
            shape: (1, 8, 8),
            n_per_class: 3,
            noise_sigma: 0.0,
        };
        let ds = gen_pattern_classes(&cfg, Split::Test, &mut Rng::from_seed(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        export_csv(&ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + ds.n());
        assert!(text.lines().next().unwrap().ends_with("y_c,y_s"));
    }
}
