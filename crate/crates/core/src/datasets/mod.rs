//! Synthetic image-like datasets, artifact injection, and poisoning.

mod artifact;
mod io;

pub use artifact::{apply_artifact, eight_template, ArtifactSpec, TINT_COLORS};
pub use io::{export_csv, load_binary, save_binary};

use crate::error::{Error, Result};
use crate::numerics::{Rng, Tensor};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One applied poisoning step, kept for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonRecord {
    pub op: String,
    pub target: Option<i32>,
    pub rate: f64,
    pub artifact: String,
    pub affected: usize,
}

/// Samples with class labels, artifact flags, and a split tag.
///
/// `y_s = +1` only for samples that actually received an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Tensor, // n x d, d = C*H*W
    channel_shape: (usize, usize, usize),
    y_c: Vec<i32>,
    y_s: Vec<i8>,
    split: Split,
    /// Label alphabet fixed at construction; stable under poisoning.
    label_values: Vec<i32>,
    provenance: Vec<PoisonRecord>,
}

impl LabeledDataset {
    pub fn new(
        samples: Tensor,
        channel_shape: (usize, usize, usize),
        y_c: Vec<i32>,
        y_s: Vec<i8>,
        split: Split,
    ) -> Result<Self> {
        let n = samples.n_rows();
        let (c, h, w) = channel_shape;
        if samples.row_len() != c * h * w {
            return Err(Error::ShapeMismatch(format!(
                "row length {} vs channel shape {channel_shape:?}",
                samples.row_len()
            )));
        }
        if y_c.len() != n || y_s.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{n} samples, {} class labels, {} artifact flags",
                y_c.len(),
                y_s.len()
            )));
        }
        if y_s.iter().any(|&s| s != -1 && s != 1) {
            return Err(Error::InvalidConfig("artifact flags must be -1/+1".into()));
        }
        let mut label_values = y_c.clone();
        label_values.sort_unstable();
        label_values.dedup();
        Ok(Self {
            samples,
            channel_shape,
            y_c,
            y_s,
            split,
            label_values,
            provenance: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.samples.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.samples.row_len()
    }

    pub fn channel_shape(&self) -> (usize, usize, usize) {
        self.channel_shape
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        self.samples.row(i)
    }

    pub fn labels(&self) -> &[i32] {
        &self.y_c
    }

    pub fn artifact_flags(&self) -> &[i8] {
        &self.y_s
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn provenance(&self) -> &[PoisonRecord] {
        &self.provenance
    }

    pub fn label_values(&self) -> &[i32] {
        &self.label_values
    }

    pub fn n_classes(&self) -> usize {
        self.label_values.len()
    }

    /// Dense class index of sample `i` within the label alphabet.
    pub fn class_index(&self, i: usize) -> usize {
        self.label_values
            .binary_search(&self.y_c[i])
            .expect("label in alphabet")
    }

    pub fn indices_of_class(&self, label: i32) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.y_c[i] == label).collect()
    }

    /// Artifact flags as +-1.0 floats, the label layout the estimators use.
    pub fn artifact_labels_f64(&self) -> Vec<f64> {
        self.y_s.iter().map(|&s| f64::from(s)).collect()
    }

    pub(crate) fn set_label_values(&mut self, values: Vec<i32>) {
        self.label_values = values;
    }
}

/// Class-template image generator config; the desk-scale stand-in for a
/// small labeled image benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternClassesConfig {
    pub k: usize,
    pub shape: (usize, usize, usize),
    pub n_per_class: usize,
    pub noise_sigma: f64,
}

impl PatternClassesConfig {
    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.shape;
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("need K >= 2, got {}", self.k)));
        }
        if c == 0 || h < 8 || w < 8 {
            return Err(Error::InvalidConfig(format!(
                "image dims must be >= 8x8, got {:?}",
                self.shape
            )));
        }
        if self.n_per_class == 0 {
            return Err(Error::InvalidConfig("n_per_class must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("negative noise sigma".into()));
        }
        Ok(())
    }
}

const TEMPLATE_STREAM: u64 = 0x7031;

/// Fixed per-class templates: sums of a few low-frequency cosine waves,
/// deterministic in the dataset seed and pairwise well separated.
pub fn class_templates(k: usize, shape: (usize, usize, usize), seed: u64) -> Vec<Tensor> {
    let (c, h, w) = shape;
    let mut rng = Rng::from_seed(seed).derive(TEMPLATE_STREAM);
    let mut templates: Vec<Tensor> = Vec::with_capacity(k);
    while templates.len() < k {
        let mut waves = Vec::new();
        for _ in 0..3 {
            let fh = rng.below(3) as f64;
            let fw = 1.0 + rng.below(2) as f64;
            let amp = rng.uniform_in(0.04, 0.08);
            let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
            let vertical = rng.uniform() < 0.5;
            waves.push((fh, fw, amp, phase, vertical));
        }
        let mut data = vec![0.0; c * h * w];
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let mut v = 0.35;
                    for &(fh, fw, amp, phase, vertical) in &waves {
                        let (a, b) = if vertical { (fw, fh) } else { (fh, fw) };
                        let arg = std::f64::consts::TAU
                            * (a * i as f64 / h as f64 + b * j as f64 / w as f64)
                            + phase
                            + ch as f64 * 0.7;
                        v += amp * arg.cos();
                    }
                    data[ch * h * w + i * w + j] = v.clamp(0.05, 0.65);
                }
            }
        }
        let cand = Tensor::new(vec![c, h, w], data).expect("template shape");
        // keep templates mutually distinct (linear separability) but inside
        // a narrow similarity shell so class margins stay uniformly modest
        let in_shell = templates.iter().all(|t| {
            let d2: f64 = t
                .data()
                .iter()
                .zip(cand.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let rms = (d2 / cand.len() as f64).sqrt();
            rms > 0.03 && rms < 0.09
        });
        if in_shell {
            templates.push(cand);
        }
    }
    templates
}

/// K-class dataset: per class, `n_per_class` copies of the class template
/// plus pixel Gaussian noise, clamped to [0, 1]; `y_s = -1` everywhere.
///
/// Templates depend only on the rng construction seed, so train/test splits
/// drawn from one generator share them.
pub fn gen_pattern_classes(
    cfg: &PatternClassesConfig,
    split: Split,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    cfg.validate()?;
    let (c, h, w) = cfg.shape;
    let d = c * h * w;
    let templates = class_templates(cfg.k, cfg.shape, rng.seed());
    let n = cfg.k * cfg.n_per_class;
    let mut data = Vec::with_capacity(n * d);
    let mut y_c = Vec::with_capacity(n);
    for (k, template) in templates.iter().enumerate() {
        for _ in 0..cfg.n_per_class {
            for &t in template.data() {
                let v = if cfg.noise_sigma == 0.0 {
                    t
                } else {
                    t + rng.gaussian(0.0, cfg.noise_sigma)
                };
                data.push(v.clamp(0.0, 1.0));
            }
            y_c.push(k as i32);
        }
    }
    LabeledDataset::new(
        Tensor::new(vec![n, d], data)?,
        cfg.shape,
        y_c,
        vec![-1; n],
        split,
    )
}

/// Convenience: train and test splits from one seed, sharing templates.
pub fn gen_split_pair(
    cfg: &PatternClassesConfig,
    n_test_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut rng = Rng::from_seed(seed);
    let train = gen_pattern_classes(cfg, Split::Train, &mut rng)?;
    let test_cfg = PatternClassesConfig {
        n_per_class: n_test_per_class,
        ..cfg.clone()
    };
    let test = gen_pattern_classes(&test_cfg, Split::Test, &mut rng)?;
    Ok((train, test))
}

fn poison_indices(
    ds: &mut LabeledDataset,
    indices: &[usize],
    spec: &ArtifactSpec,
) -> Result<()> {
    let shape = ds.channel_shape;
    for &i in indices {
        spec.apply_to_slice(ds.samples.row_mut(i), shape)?;
        ds.y_s[i] = 1;
    }
    Ok(())
}

/// Inserts the artifact into `floor(N_t * r_ch)` randomly selected samples
/// of class `t`; labels stay unchanged.
pub fn poison_clever_hans(
    ds: &LabeledDataset,
    target: i32,
    r_ch: f64,
    spec: &ArtifactSpec,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if ds.split != Split::Train {
        return Err(Error::InvalidConfig("clever hans poisons train splits".into()));
    }
    if !(0.0..=1.0).contains(&r_ch) || r_ch == 0.0 {
        return Err(Error::InvalidConfig(format!("rate {r_ch} outside (0,1]")));
    }
    let class = ds.indices_of_class(target);
    if class.is_empty() {
        return Err(Error::ClassAbsent(target));
    }
    let count = (class.len() as f64 * r_ch).floor() as usize;
    let picks: Vec<usize> = rng
        .sample_indices(class.len(), count)
        .into_iter()
        .map(|j| class[j])
        .collect();
    let mut out = ds.clone();
    poison_indices(&mut out, &picks, spec)?;
    out.provenance.push(PoisonRecord {
        op: "clever_hans".into(),
        target: Some(target),
        rate: r_ch,
        artifact: spec.tag(),
        affected: picks.len(),
    });
    Ok(out)
}

/// For every class `c`, inserts the artifact into `floor(N_c * r_bd)`
/// samples and flips their label to `t`.
pub fn poison_backdoor(
    ds: &LabeledDataset,
    target: i32,
    r_bd: f64,
    spec: &ArtifactSpec,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if ds.split != Split::Train {
        return Err(Error::InvalidConfig("backdoor poisons train splits".into()));
    }
    if !(0.0..=1.0).contains(&r_bd) || r_bd == 0.0 {
        return Err(Error::InvalidConfig(format!("rate {r_bd} outside (0,1]")));
    }
    if !ds.label_values.contains(&target) {
        return Err(Error::ClassAbsent(target));
    }
    let mut out = ds.clone();
    let mut affected = 0;
    for &label in &ds.label_values {
        let class = ds.indices_of_class(label);
        let count = (class.len() as f64 * r_bd).floor() as usize;
        let picks: Vec<usize> = rng
            .sample_indices(class.len(), count)
            .into_iter()
            .map(|j| class[j])
            .collect();
        poison_indices(&mut out, &picks, spec)?;
        for &i in &picks {
            out.y_c[i] = target;
        }
        affected += picks.len();
    }
    out.provenance.push(PoisonRecord {
        op: "backdoor".into(),
        target: Some(target),
        rate: r_bd,
        artifact: spec.tag(),
        affected,
    });
    Ok(out)
}

/// Per class, inserts the artifact into `floor(N_c * r_p)` test samples;
/// labels unchanged. `r_p = 0` is a no-op.
pub fn poison_test(
    ds: &LabeledDataset,
    r_p: f64,
    spec: &ArtifactSpec,
    rng: &mut Rng,
) -> Result<LabeledDataset> {
    if ds.split != Split::Test {
        return Err(Error::InvalidConfig("test poisoning wants a test split".into()));
    }
    if !(0.0..=1.0).contains(&r_p) {
        return Err(Error::InvalidConfig(format!("rate {r_p} outside [0,1]")));
    }
    let mut out = ds.clone();
    let mut affected = 0;
    for &label in &ds.label_values {
        let class = ds.indices_of_class(label);
        let count = (class.len() as f64 * r_p).floor() as usize;
        let picks: Vec<usize> = rng
            .sample_indices(class.len(), count)
            .into_iter()
            .map(|j| class[j])
            .collect();
        poison_indices(&mut out, &picks, spec)?;
        affected += picks.len();
    }
    out.provenance.push(PoisonRecord {
        op: "poison_test".into(),
        target: None,
        rate: r_p,
        artifact: spec.tag(),
        affected,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> PatternClassesConfig {
        PatternClassesConfig {
            k: 4,
            shape: (1, 8, 8),
            n_per_class: 10,
            noise_sigma: 0.1,
        }
    }

    #[test]
    fn zero_noise_makes_identical_samples() {
        let cfg = PatternClassesConfig {
            noise_sigma: 0.0,
            ..small_cfg()
        };
        let mut rng = Rng::from_seed(2);
        let ds = gen_pattern_classes(&cfg, Split::Train, &mut rng).unwrap();
        assert_eq!(ds.sample(0), ds.sample(9));
        assert_ne!(ds.sample(0), ds.sample(10));
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = small_cfg();
        let a = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(5)).unwrap();
        let b = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_pair_shares_templates() {
        let cfg = PatternClassesConfig {
            noise_sigma: 0.0,
            ..small_cfg()
        };
        let (train, test) = gen_split_pair(&cfg, 3, 7).unwrap();
        // with zero noise both splits collapse onto the shared templates
        assert_eq!(train.sample(0), test.sample(0));
        assert_eq!(train.split(), Split::Train);
        assert_eq!(test.split(), Split::Test);
    }

    #[test]
    fn clever_hans_counts_and_labels() {
        let cfg = small_cfg();
        let ds = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(1)).unwrap();
        let spec = ArtifactSpec::white_box(2);
        let out = poison_clever_hans(&ds, 1, 0.5, &spec, &mut Rng::from_seed(3)).unwrap();
        let flagged: Vec<usize> = (0..out.n()).filter(|&i| out.artifact_flags()[i] == 1).collect();
        assert_eq!(flagged.len(), 5); // floor(10 * 0.5)
        assert!(flagged.iter().all(|&i| out.labels()[i] == 1));
        assert_eq!(out.labels(), ds.labels()); // label histogram unchanged
        // unflagged samples bit-identical
        for i in 0..out.n() {
            if out.artifact_flags()[i] == -1 {
                assert_eq!(out.sample(i), ds.sample(i));
            }
        }
    }

    #[test]
    fn clever_hans_full_rate_flags_whole_class() {
        let ds = gen_pattern_classes(&small_cfg(), Split::Train, &mut Rng::from_seed(1)).unwrap();
        let out = poison_clever_hans(
            &ds,
            2,
            1.0,
            &ArtifactSpec::white_box(2),
            &mut Rng::from_seed(0),
        )
        .unwrap();
        for i in out.indices_of_class(2) {
            assert_eq!(out.artifact_flags()[i], 1);
        }
    }

    #[test]
    fn clever_hans_deterministic_selection() {
        let ds = gen_pattern_classes(&small_cfg(), Split::Train, &mut Rng::from_seed(1)).unwrap();
        let spec = ArtifactSpec::white_box(2);
        let a = poison_clever_hans(&ds, 0, 0.3, &spec, &mut Rng::from_seed(9)).unwrap();
        let b = poison_clever_hans(&ds, 0, 0.3, &spec, &mut Rng::from_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clever_hans_missing_class_errors() {
        let ds = gen_pattern_classes(&small_cfg(), Split::Train, &mut Rng::from_seed(1)).unwrap();
        assert!(matches!(
            poison_clever_hans(&ds, 99, 0.1, &ArtifactSpec::white_box(2), &mut Rng::from_seed(0)),
            Err(Error::ClassAbsent(99))
        ));
    }

    #[test]
    fn backdoor_flips_labels_to_target() {
        let cfg = PatternClassesConfig {
            n_per_class: 20,
            ..small_cfg()
        };
        let ds = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(1)).unwrap();
        let out = poison_backdoor(
            &ds,
            3,
            0.25,
            &ArtifactSpec::white_box(2),
            &mut Rng::from_seed(4),
        )
        .unwrap();
        let flagged: Vec<usize> = (0..out.n()).filter(|&i| out.artifact_flags()[i] == 1).collect();
        // floor(20 * 0.25) = 5 per class, 4 classes
        assert_eq!(flagged.len(), 20);
        assert!(flagged.iter().all(|&i| out.labels()[i] == 3));
        // label histogram changes by exactly the flipped counts
        let count_t = out.labels().iter().filter(|&&l| l == 3).count();
        assert_eq!(count_t, 20 + 15); // original 20 + 5 flipped from each other class
        assert_eq!(out.n(), ds.n());
        assert_eq!(out.n_classes(), 4); // alphabet preserved
    }

    #[test]
    fn poison_test_rates() {
        let ds = gen_pattern_classes(&small_cfg(), Split::Test, &mut Rng::from_seed(1)).unwrap();
        let spec = ArtifactSpec::white_box(2);
        let zero = poison_test(&ds, 0.0, &spec, &mut Rng::from_seed(0)).unwrap();
        assert_eq!(zero.samples(), ds.samples());
        assert_eq!(zero.artifact_flags(), ds.artifact_flags());

        let half = poison_test(&ds, 0.5, &spec, &mut Rng::from_seed(0)).unwrap();
        for label in 0..4 {
            let flagged = half
                .indices_of_class(label)
                .iter()
                .filter(|&&i| half.artifact_flags()[i] == 1)
                .count();
            assert_eq!(flagged, 5);
        }

        let full = poison_test(&ds, 1.0, &spec, &mut Rng::from_seed(0)).unwrap();
        assert!(full.artifact_flags().iter().all(|&s| s == 1));
    }

    #[test]
    fn poisoning_requires_matching_split() {
        let train = gen_pattern_classes(&small_cfg(), Split::Train, &mut Rng::from_seed(1)).unwrap();
        let test = gen_pattern_classes(&small_cfg(), Split::Test, &mut Rng::from_seed(1)).unwrap();
        let spec = ArtifactSpec::white_box(2);
        assert!(poison_test(&train, 0.5, &spec, &mut Rng::from_seed(0)).is_err());
        assert!(poison_clever_hans(&test, 0, 0.5, &spec, &mut Rng::from_seed(0)).is_err());
        assert!(poison_backdoor(&test, 0, 0.5, &spec, &mut Rng::from_seed(0)).is_err());
    }
}
