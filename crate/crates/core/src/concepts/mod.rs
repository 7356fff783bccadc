//! Concept directions in feature space: filter CAVs from a linear SVM and
//! pattern CAVs from the covariance estimate, plus retrieval and probing.

mod svm;

pub use svm::{fit_svm, objective as svm_objective, SvmConfig, SvmDiagnostics, SvmModel};

use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::jsonio;
use crate::models::{extract_features, NetworkModel};
use crate::numerics::{
    column_mean, cosine_similarity, covariance_with_target, norm, variance_of_target, Tensor,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

/// Where features are read from a model (and where correction maps attach).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HookPoint {
    Input,
    AfterLayer(usize),
}

impl std::fmt::Display for HookPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HookPoint::Input => write!(f, "input"),
            HookPoint::AfterLayer(k) => write!(f, "after_layer({k})"),
        }
    }
}

impl HookPoint {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "input" {
            return Ok(HookPoint::Input);
        }
        if let Some(rest) = s.strip_prefix("after_layer(").and_then(|r| r.strip_suffix(')')) {
            if let Ok(k) = rest.parse() {
                return Ok(HookPoint::AfterLayer(k));
            }
        }
        Err(Error::Format(format!("unknown hook point '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavKind {
    Filter,
    Pattern,
}

impl std::fmt::Display for CavKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CavKind::Filter => write!(f, "filter"),
            CavKind::Pattern => write!(f, "pattern"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    GroundTruth,
    Predicted,
}

/// Fitting metadata: where the artifact labels came from, and the SVM
/// diagnostics when the vector is filter-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub label_source: LabelSource,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub svm: Option<SvmDiagnostics>,
}

/// A unit concept direction with its unnormalized estimate and the
/// artifact/clean means of the fitting features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub v: Vec<f64>,
    pub raw: Vec<f64>,
    pub kind: CavKind,
    pub hook: HookPoint,
    pub z_plus: Vec<f64>,
    pub z_minus: Vec<f64>,
    pub fit_meta: FitMeta,
}

impl ConceptVector {
    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Default probe/augmentation magnitude: the artifact-to-clean mean gap.
    pub fn mean_gap_norm(&self) -> f64 {
        let diff: Vec<f64> = self
            .z_plus
            .iter()
            .zip(&self.z_minus)
            .map(|(p, m)| p - m)
            .collect();
        norm(&diff)
    }

    fn from_raw(
        raw: Vec<f64>,
        kind: CavKind,
        hook: HookPoint,
        z_plus: Vec<f64>,
        z_minus: Vec<f64>,
        fit_meta: FitMeta,
    ) -> Result<Self> {
        let len = norm(&raw);
        if len == 0.0 {
            return Err(Error::NoSignal);
        }
        let v = raw.iter().map(|r| r / len).collect();
        Ok(Self {
            v,
            raw,
            kind,
            hook,
            z_plus,
            z_minus,
            fit_meta,
        })
    }
}

/// File form of a concept vector (hook as a tag string, dim explicit).
#[derive(Debug, Serialize, Deserialize)]
struct ConceptVectorFile {
    kind: CavKind,
    hook: String,
    dim: usize,
    v: Vec<f64>,
    raw: Vec<f64>,
    z_plus: Vec<f64>,
    z_minus: Vec<f64>,
    fit_meta: FitMeta,
}

pub fn save_concept_vector(cv: &ConceptVector, path: &Path) -> Result<()> {
    let file = ConceptVectorFile {
        kind: cv.kind,
        hook: cv.hook.to_string(),
        dim: cv.dim(),
        v: cv.v.clone(),
        raw: cv.raw.clone(),
        z_plus: cv.z_plus.clone(),
        z_minus: cv.z_minus.clone(),
        fit_meta: cv.fit_meta.clone(),
    };
    std::fs::write(path, jsonio::to_json_string(&file)?)?;
    Ok(())
}

pub fn load_concept_vector(path: &Path) -> Result<ConceptVector> {
    let text = std::fs::read_to_string(path)?;
    let file: ConceptVectorFile = jsonio::from_json_str(&text)?;
    if file.v.len() != file.dim {
        return Err(Error::Format(format!(
            "dim field {} disagrees with vector length {}",
            file.dim,
            file.v.len()
        )));
    }
    Ok(ConceptVector {
        v: file.v,
        raw: file.raw,
        kind: file.kind,
        hook: HookPoint::parse(&file.hook)?,
        z_plus: file.z_plus,
        z_minus: file.z_minus,
        fit_meta: file.fit_meta,
    })
}

/// Class-conditional feature means: (mean over y_s = +1, mean over y_s = -1).
pub fn concept_means(x: &Tensor, y_s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.n_rows() != y_s.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} labels",
            x.n_rows(),
            y_s.len()
        )));
    }
    let split = |keep_positive: bool| -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = x
            .rows()
            .zip(y_s)
            .filter(|(_, &l)| (l > 0.0) == keep_positive)
            .map(|(r, _)| r.to_vec())
            .collect();
        if rows.is_empty() {
            return Err(Error::LabelAbsent(if keep_positive { 1 } else { -1 }));
        }
        column_mean(&Tensor::from_rows(&rows)?)
    };
    Ok((split(true)?, split(false)?))
}

/// Pattern concept direction: raw = cov[x, y_s] / var(y_s), normalized.
///
/// `y_s` may be ground-truth flags or an artifact detector's predictions;
/// the source is recorded in `fit_meta`.
pub fn fit_pattern_cav(
    x: &Tensor,
    y_s: &[f64],
    hook: HookPoint,
    source: LabelSource,
    variance_floor: f64,
) -> Result<ConceptVector> {
    if x.n_rows() < 2 {
        return Err(Error::DegenerateSample);
    }
    let var = variance_of_target(y_s)?;
    if var < variance_floor.max(f64::MIN_POSITIVE) {
        return Err(Error::ConstantLabels);
    }
    let cov = covariance_with_target(x, y_s)?;
    let raw: Vec<f64> = cov.into_iter().map(|c| c / var).collect();
    let (z_plus, z_minus) = concept_means(x, y_s)?;
    ConceptVector::from_raw(
        raw,
        CavKind::Pattern,
        hook,
        z_plus,
        z_minus,
        FitMeta {
            label_source: source,
            svm: None,
        },
    )
}

/// Filter concept direction: the weight vector of a linear SVM trained to
/// predict the artifact flags, normalized.
pub fn fit_filter_cav(
    x: &Tensor,
    y_s: &[f64],
    hook: HookPoint,
    cfg: &SvmConfig,
) -> Result<ConceptVector> {
    let (model, diag) = fit_svm(x, y_s, cfg)?;
    filter_cav_from_svm(model, diag, x, y_s, hook)
}

/// Builds the filter CAV from an already-fitted SVM (lets callers reuse the
/// SVM for predicted-label pattern fitting).
pub fn filter_cav_from_svm(
    model: SvmModel,
    diag: SvmDiagnostics,
    x: &Tensor,
    y_s: &[f64],
    hook: HookPoint,
) -> Result<ConceptVector> {
    let (z_plus, z_minus) = concept_means(x, y_s)?;
    ConceptVector::from_raw(
        model.w,
        CavKind::Filter,
        hook,
        z_plus,
        z_minus,
        FitMeta {
            label_source: LabelSource::GroundTruth,
            svm: Some(diag),
        },
    )
}

/// Cosine nearest-neighbor retrieval result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbors {
    pub indices: Vec<usize>,
    pub similarities: Vec<f64>,
    /// Zero-norm rows excluded from the ranking.
    pub skipped: Vec<usize>,
}

/// Indices of the k rows most cosine-similar to the concept direction,
/// descending; ties break toward the lower index.
pub fn nearest_neighbors(cv: &ConceptVector, x: &Tensor, k: usize) -> Result<Neighbors> {
    if k > x.n_rows() {
        return Err(Error::InvalidConfig(format!(
            "k={k} exceeds {} rows",
            x.n_rows()
        )));
    }
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(x.n_rows());
    let mut skipped = Vec::new();
    for (i, row) in x.rows().enumerate() {
        match cosine_similarity(&cv.v, row) {
            Ok(s) => scored.push((i, s)),
            Err(Error::ZeroVector) => skipped.push(i),
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then(a.0.cmp(&b.0)));
    scored.truncate(k.min(scored.len()));
    Ok(Neighbors {
        indices: scored.iter().map(|(i, _)| *i).collect(),
        similarities: scored.iter().map(|(_, s)| *s).collect(),
        skipped,
    })
}

/// Per-class softmax shift when the concept direction is added at its hook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLogitShift {
    pub label: i32,
    pub n: usize,
    pub target_before: f64,
    pub target_after: f64,
    pub true_before: f64,
    pub true_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitShiftReport {
    pub target: i32,
    pub scale: f64,
    pub mean_target_before: f64,
    pub mean_target_after: f64,
    pub mean_true_before: f64,
    pub mean_true_after: f64,
    /// Restricted to samples whose class differs from the target.
    pub nontarget_mean_target_before: f64,
    pub nontarget_mean_target_after: f64,
    pub per_class: Vec<ClassLogitShift>,
}

fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let k = out.row_len();
    for i in 0..out.n_rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        debug_assert_eq!(row.len(), k);
    }
    out
}

/// Adds `scale * v` to every sample's features at the concept's hook point
/// and reports the softmax-normalized output shift for the target class.
pub fn probe_logit_shift(
    model: &NetworkModel,
    ds: &LabeledDataset,
    cv: &ConceptVector,
    target: i32,
    scale: f64,
) -> Result<LogitShiftReport> {
    let dim = model.hook_dim(cv.hook)?;
    if dim != cv.dim() {
        return Err(Error::HookMismatch(format!(
            "concept dim {} vs model dim {dim} at {}",
            cv.dim(),
            cv.hook
        )));
    }
    let target_idx = ds
        .label_values()
        .binary_search(&target)
        .map_err(|_| Error::ClassAbsent(target))?;

    let features = extract_features(model, ds, cv.hook)?;
    let before = softmax_rows(&model.forward_from(cv.hook, &features)?);
    let mut shifted = features.clone();
    for i in 0..shifted.n_rows() {
        for (f, &vj) in shifted.row_mut(i).iter_mut().zip(&cv.v) {
            *f += scale * vj;
        }
    }
    let after = softmax_rows(&model.forward_from(cv.hook, &shifted)?);

    let n = ds.n();
    let mut report = LogitShiftReport {
        target,
        scale,
        mean_target_before: 0.0,
        mean_target_after: 0.0,
        mean_true_before: 0.0,
        mean_true_after: 0.0,
        nontarget_mean_target_before: 0.0,
        nontarget_mean_target_after: 0.0,
        per_class: Vec::new(),
    };
    let mut by_class: Vec<ClassLogitShift> = ds
        .label_values()
        .iter()
        .map(|&label| ClassLogitShift {
            label,
            n: 0,
            target_before: 0.0,
            target_after: 0.0,
            true_before: 0.0,
            true_after: 0.0,
        })
        .collect();
    let mut nontarget_n = 0usize;
    for i in 0..n {
        let ci = ds.class_index(i);
        let tb = before.row(i)[target_idx];
        let ta = after.row(i)[target_idx];
        report.mean_target_before += tb;
        report.mean_target_after += ta;
        report.mean_true_before += before.row(i)[ci];
        report.mean_true_after += after.row(i)[ci];
        let slot = &mut by_class[ci];
        slot.n += 1;
        slot.target_before += tb;
        slot.target_after += ta;
        slot.true_before += before.row(i)[ci];
        slot.true_after += after.row(i)[ci];
        if ci != target_idx {
            report.nontarget_mean_target_before += tb;
            report.nontarget_mean_target_after += ta;
            nontarget_n += 1;
        }
    }
    let nf = n as f64;
    report.mean_target_before /= nf;
    report.mean_target_after /= nf;
    report.mean_true_before /= nf;
    report.mean_true_after /= nf;
    if nontarget_n > 0 {
        report.nontarget_mean_target_before /= nontarget_n as f64;
        report.nontarget_mean_target_after /= nontarget_n as f64;
    }
    for slot in &mut by_class {
        if slot.n > 0 {
            let c = slot.n as f64;
            slot.target_before /= c;
            slot.target_after /= c;
            slot.true_before /= c;
            slot.true_after /= c;
        }
    }
    report.per_class = by_class;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn signed_rows(n: usize, seed: u64) -> (Tensor, Vec<f64>) {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(vec![
                2.0 * label + rng.gaussian(0.0, 0.2),
                rng.gaussian(0.0, 0.2),
                rng.gaussian(0.0, 0.2),
            ]);
            y.push(label);
        }
        (Tensor::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn noise_free_pattern_recovers_exact_direction() {
        let y = vec![1.0, -1.0, 1.0, -1.0];
        let rows: Vec<Vec<f64>> = y.iter().map(|&l| vec![2.0 * l, 0.0]).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let cv = fit_pattern_cav(
            &x,
            &y,
            HookPoint::Input,
            LabelSource::GroundTruth,
            DEFAULT_VARIANCE_FLOOR,
        )
        .unwrap();
        assert!((cv.raw[0] - 2.0).abs() < 1e-12);
        assert!(cv.raw[1].abs() < 1e-12);
        assert!((cv.v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pattern_raw_matches_ols_oracle() {
        let (x, y) = signed_rows(40, 5);
        let cv = fit_pattern_cav(
            &x,
            &y,
            HookPoint::Input,
            LabelSource::GroundTruth,
            DEFAULT_VARIANCE_FLOOR,
        )
        .unwrap();
        // per-feature OLS slope of x_j on y
        let ym = y.iter().sum::<f64>() / y.len() as f64;
        for j in 0..3 {
            let xm: f64 = x.rows().map(|r| r[j]).sum::<f64>() / y.len() as f64;
            let num: f64 = x.rows().zip(&y).map(|(r, yi)| (r[j] - xm) * (yi - ym)).sum();
            let den: f64 = y.iter().map(|yi| (yi - ym) * (yi - ym)).sum();
            assert!((cv.raw[j] - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_balanced_raw_is_half_mean_gap() {
        let (x, y) = signed_rows(60, 9);
        let cv = fit_pattern_cav(
            &x,
            &y,
            HookPoint::Input,
            LabelSource::GroundTruth,
            DEFAULT_VARIANCE_FLOOR,
        )
        .unwrap();
        for j in 0..3 {
            let half_gap = (cv.z_plus[j] - cv.z_minus[j]) / 2.0;
            assert!((cv.raw[j] - half_gap).abs() < 1e-12);
        }
    }

    #[test]
    fn pattern_scale_invariant_direction() {
        let (x, y) = signed_rows(30, 2);
        let cv1 = fit_pattern_cav(&x, &y, HookPoint::Input, LabelSource::GroundTruth, 1e-12).unwrap();
        let scaled_rows: Vec<Vec<f64>> = x.rows().map(|r| r.iter().map(|v| v * 7.5).collect()).collect();
        let xs = Tensor::from_rows(&scaled_rows).unwrap();
        let cv2 = fit_pattern_cav(&xs, &y, HookPoint::Input, LabelSource::GroundTruth, 1e-12).unwrap();
        for j in 0..3 {
            assert!((cv1.v[j] - cv2.v[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_labels_hit_the_floor() {
        let x = Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            fit_pattern_cav(&x, &[1.0, 1.0], HookPoint::Input, LabelSource::GroundTruth, 1e-12),
            Err(Error::ConstantLabels)
        ));
    }

    #[test]
    fn no_signal_when_covariance_vanishes() {
        let x = Tensor::from_rows(&[vec![3.0], vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert!(matches!(
            fit_pattern_cav(
                &x,
                &[1.0, -1.0, 1.0, -1.0],
                HookPoint::Input,
                LabelSource::GroundTruth,
                1e-12
            ),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn concept_means_basic_and_missing_label() {
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let (zp, zm) = concept_means(&x, &[1.0, -1.0]).unwrap();
        assert_eq!(zp, vec![1.0, 0.0]);
        assert_eq!(zm, vec![3.0, 0.0]);
        assert!(matches!(
            concept_means(&x, &[1.0, 1.0]),
            Err(Error::LabelAbsent(-1))
        ));
    }

    #[test]
    fn concept_means_matches_subset_oracle() {
        let (x, y) = signed_rows(50, 12);
        let (zp, zm) = concept_means(&x, &y).unwrap();
        let subset = |sign: f64| -> Vec<f64> {
            let rows: Vec<Vec<f64>> = x
                .rows()
                .zip(&y)
                .filter(|(_, &l)| l == sign)
                .map(|(r, _)| r.to_vec())
                .collect();
            column_mean(&Tensor::from_rows(&rows).unwrap()).unwrap()
        };
        for (a, b) in zp.iter().zip(subset(1.0)) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in zm.iter().zip(subset(-1.0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbors_rank_self_first_and_negation_last() {
        let v = vec![1.0, 0.5, -0.25];
        let len = norm(&v);
        let cv = ConceptVector {
            v: v.iter().map(|x| x / len).collect(),
            raw: v.clone(),
            kind: CavKind::Pattern,
            hook: HookPoint::Input,
            z_plus: vec![0.0; 3],
            z_minus: vec![0.0; 3],
            fit_meta: FitMeta {
                label_source: LabelSource::GroundTruth,
                svm: None,
            },
        };
        let mut rng = Rng::from_seed(8);
        let mut rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..3).map(|_| rng.gaussian(0.0, 1.0)).collect())
            .collect();
        rows.push(v.clone());
        rows.push(v.iter().map(|x| -x).collect());
        let x = Tensor::from_rows(&rows).unwrap();
        let nn = nearest_neighbors(&cv, &x, 5).unwrap();
        assert_eq!(nn.indices[0], 3);
        assert!((nn.similarities[0] - 1.0).abs() < 1e-12);
        assert_eq!(*nn.indices.last().unwrap(), 4);
    }

    #[test]
    fn neighbors_skip_zero_rows_and_match_full_sort() {
        let cv = ConceptVector {
            v: vec![1.0, 0.0],
            raw: vec![1.0, 0.0],
            kind: CavKind::Pattern,
            hook: HookPoint::Input,
            z_plus: vec![0.0; 2],
            z_minus: vec![0.0; 2],
            fit_meta: FitMeta {
                label_source: LabelSource::GroundTruth,
                svm: None,
            },
        };
        let mut rng = Rng::from_seed(4);
        let mut rows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.gaussian(0.0, 1.0)).collect())
            .collect();
        rows.insert(2, vec![0.0, 0.0]);
        let x = Tensor::from_rows(&rows).unwrap();
        let nn = nearest_neighbors(&cv, &x, 3).unwrap();
        assert_eq!(nn.skipped, vec![2]);
        // exhaustive oracle over nonzero rows
        let mut oracle: Vec<(usize, f64)> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2)
            .map(|(i, r)| (i, cosine_similarity(&cv.v, r).unwrap()))
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let expect: Vec<usize> = oracle.iter().take(3).map(|(i, _)| *i).collect();
        assert_eq!(nn.indices, expect);
    }

    #[test]
    fn file_round_trip() {
        let (x, y) = signed_rows(20, 3);
        let cv = fit_pattern_cav(
            &x,
            &y,
            HookPoint::AfterLayer(1),
            LabelSource::Predicted,
            1e-12,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cav.json");
        save_concept_vector(&cv, &path).unwrap();
        let back = load_concept_vector(&path).unwrap();
        assert_eq!(back, cv);
    }
}
