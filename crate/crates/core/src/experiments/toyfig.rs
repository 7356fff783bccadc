//! Toy-data geometry runs: fit both concept vector kinds on 2-D data, draw
//! the correction trajectories against a linear decision boundary.

use crate::clarc::pclarc_map;
use crate::concepts::{
    filter_cav_from_svm, fit_pattern_cav, fit_svm, HookPoint, LabelSource, SvmConfig,
};
use crate::datasets::LabeledDataset;
use crate::error::{Error, Result};
use crate::experiments::svg::SvgScene;
use crate::jsonio;
use crate::models::{train, NetworkModel, OptimKind, OptimizerConfig};
use crate::numerics::{angle_between_lines_degrees, Rng, Tensor};
use crate::toygen::{generate_toy, noise_pattern, ToyConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyFigureConfig {
    pub taus_degrees: Vec<f64>,
    pub sigma2: f64,
    pub n: usize,
    pub artifact_fraction: f64,
    pub seed: u64,
    pub svm: SvmConfig,
    pub variance_floor: f64,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
    pub classifier_batch: usize,
}

impl Default for ToyFigureConfig {
    fn default() -> Self {
        Self {
            taus_degrees: vec![0.0, 45.0, 135.0],
            sigma2: 0.15,
            n: 10_000,
            artifact_fraction: 0.5,
            seed: 0,
            svm: SvmConfig::default(),
            variance_floor: 1e-12,
            classifier_epochs: 30,
            classifier_lr: 0.1,
            classifier_batch: 64,
        }
    }
}

/// One tau panel: fitted directions, angles to the artifact axis, the probe
/// sample and both corrected versions with their classifier labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    pub tau_degrees: f64,
    pub v_pat: Vec<f64>,
    pub v_svm: Vec<f64>,
    pub angle_pat_degrees: f64,
    pub angle_svm_degrees: f64,
    /// Zero set of `boundary_w . x + boundary_b` separates the classes;
    /// positive side is class B (+1).
    pub boundary_w: Vec<f64>,
    pub boundary_b: f64,
    pub classifier_train_accuracy: f64,
    pub probe: Vec<f64>,
    pub probe_pattern_corrected: Vec<f64>,
    pub probe_filter_corrected: Vec<f64>,
    /// Classifier labels in {-1, +1} (the probe's true class is -1).
    pub probe_class_raw: i32,
    pub probe_class_pattern: i32,
    pub probe_class_filter: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub version: String,
    pub sigma2: f64,
    pub n: usize,
    pub seed: u64,
    pub runs: Vec<ToyRun>,
}

impl ToyReport {
    pub fn to_json(&self) -> Result<String> {
        jsonio::to_json_string(self)
    }
}

const STREAM_CLASSIFIER: u64 = 0x70;
const STREAM_SVM: u64 = 0x71;

/// Boundary of a 2-class linear model as (w, b) of the logit difference.
fn boundary_of(model: &NetworkModel) -> (Vec<f64>, f64) {
    let (w, b) = model.layers()[0].params().expect("dense layer");
    // class order: label -1 -> index 0, +1 -> index 1
    let wdiff = vec![w[2] - w[0], w[3] - w[1]];
    let bdiff = b[1] - b[0];
    (wdiff, bdiff)
}

fn classify(boundary: &(Vec<f64>, f64), p: &[f64]) -> i32 {
    let v = boundary.0[0] * p[0] + boundary.0[1] * p[1] + boundary.1;
    // argmax with ties toward the lower class index (-1)
    if v > 0.0 {
        1
    } else {
        -1
    }
}

fn first_artifact_index(ds: &LabeledDataset) -> Result<usize> {
    ds.artifact_flags()
        .iter()
        .position(|&s| s == 1)
        .ok_or(Error::LabelAbsent(1))
}

struct PanelOutcome {
    run: ToyRun,
    svg: String,
}

fn run_panel(cfg: &ToyFigureConfig, tau_degrees: f64) -> Result<PanelOutcome> {
    let toy_cfg = ToyConfig {
        tau: tau_degrees.to_radians(),
        sigma2: cfg.sigma2,
        n: cfg.n,
        artifact_fraction_in_a: cfg.artifact_fraction,
        rng_seed: cfg.seed,
    };
    let ds = generate_toy(&toy_cfg)?;

    // linear classifier on the raw data for the decision boundary
    let root = Rng::from_seed(cfg.seed);
    let mut classifier = NetworkModel::linear(2, 2, root.derive(STREAM_CLASSIFIER).seed())?;
    let opt = OptimizerConfig {
        kind: OptimKind::Sgd { lr: cfg.classifier_lr },
        epochs: cfg.classifier_epochs,
        batch_size: cfg.classifier_batch,
        rng_seed: root.derive(STREAM_CLASSIFIER + 1).seed(),
    };
    let history = train(&mut classifier, &ds, &opt, &[])?;
    let boundary = boundary_of(&classifier);

    // concept vectors from class-A samples only
    let class_a = ds.indices_of_class(-1);
    let rows: Vec<Vec<f64>> = class_a.iter().map(|&i| ds.sample(i).to_vec()).collect();
    let x_a = Tensor::from_rows(&rows)?;
    let y_a: Vec<f64> = class_a
        .iter()
        .map(|&i| f64::from(ds.artifact_flags()[i]))
        .collect();

    let v_pat = fit_pattern_cav(
        &x_a,
        &y_a,
        HookPoint::Input,
        LabelSource::GroundTruth,
        cfg.variance_floor,
    )?;
    let svm_cfg = SvmConfig {
        rng_seed: root.derive(STREAM_SVM).seed(),
        ..cfg.svm.clone()
    };
    let (svm, diag) = fit_svm(&x_a, &y_a, &svm_cfg)?;
    let v_svm = filter_cav_from_svm(svm, diag, &x_a, &y_a, HookPoint::Input)?;

    // fixed probe: first artifact sample under the seed
    let probe_idx = first_artifact_index(&ds)?;
    let probe = ds.sample(probe_idx).to_vec();
    let corrected_pat = pclarc_map(&probe, &v_pat.v, &v_pat.z_minus)?;
    let corrected_svm = pclarc_map(&probe, &v_svm.v, &v_svm.z_minus)?;

    let x_axis = [1.0, 0.0];
    let run = ToyRun {
        tau_degrees,
        angle_pat_degrees: angle_between_lines_degrees(&v_pat.v, &x_axis)?,
        angle_svm_degrees: angle_between_lines_degrees(&v_svm.v, &x_axis)?,
        boundary_w: boundary.0.clone(),
        boundary_b: boundary.1,
        classifier_train_accuracy: *history.train_accuracy.last().unwrap(),
        probe_class_raw: classify(&boundary, &probe),
        probe_class_pattern: classify(&boundary, &corrected_pat),
        probe_class_filter: classify(&boundary, &corrected_svm),
        probe: probe.clone(),
        probe_pattern_corrected: corrected_pat.clone(),
        probe_filter_corrected: corrected_svm.clone(),
        v_pat: v_pat.v.clone(),
        v_svm: v_svm.v.clone(),
    };
    let svg = render_panel(&ds, &run, tau_degrees);
    Ok(PanelOutcome { run, svg })
}

fn render_panel(ds: &LabeledDataset, run: &ToyRun, tau_degrees: f64) -> String {
    let mut scene = SvgScene::new(480.0, 480.0, (-3.2, 3.2), (-3.2, 3.2));
    scene.axes();

    // scatter, deterministically subsampled to keep files small
    let stride = (ds.n() / 2400).max(1);
    for i in (0..ds.n()).step_by(stride) {
        let p = ds.sample(i);
        let (fill, opacity) = if ds.artifact_flags()[i] == 1 {
            ("#ff7f0e", 0.5) // artifact subset of class A
        } else if ds.labels()[i] == -1 {
            ("#8c564b", 0.4) // clean class A
        } else {
            ("#1f77b4", 0.4) // class B
        };
        scene.circle(p[0], p[1], 2.0, fill, opacity);
    }

    scene.boundary((run.boundary_w[0], run.boundary_w[1]), run.boundary_b, "#888888");

    let a_n = noise_pattern(tau_degrees.to_radians());
    scene.arrow(0.0, 0.0, 1.6 * a_n[0], 1.6 * a_n[1], "#666666", 1.5);
    scene.arrow(0.0, 0.0, 1.6 * run.v_svm[0], 1.6 * run.v_svm[1], "#d62728", 2.0);
    scene.arrow(0.0, 0.0, 1.6 * run.v_pat[0], 1.6 * run.v_pat[1], "#2ca02c", 2.0);

    // correction trajectories
    scene.line(
        run.probe[0],
        run.probe[1],
        run.probe_pattern_corrected[0],
        run.probe_pattern_corrected[1],
        "#2ca02c",
        1.2,
        true,
    );
    scene.line(
        run.probe[0],
        run.probe[1],
        run.probe_filter_corrected[0],
        run.probe_filter_corrected[1],
        "#d62728",
        1.2,
        true,
    );
    scene.cross(run.probe[0], run.probe[1], 6.0, "#000000", 2.0);
    scene.cross(
        run.probe_pattern_corrected[0],
        run.probe_pattern_corrected[1],
        6.0,
        "#2ca02c",
        2.0,
    );
    scene.cross(
        run.probe_filter_corrected[0],
        run.probe_filter_corrected[1],
        6.0,
        "#d62728",
        2.0,
    );

    scene.text(
        44.0,
        24.0,
        13.0,
        "#000000",
        &format!("tau = {tau_degrees:.0} deg; svm (red), pattern (green), noise (gray)"),
    );
    scene.finish()
}

/// Runs the tau sweep; returns the report and one ("toy_<tau>.svg", svg)
/// pair per tau.
pub fn run_toy_figure(cfg: &ToyFigureConfig) -> Result<(ToyReport, Vec<(String, String)>)> {
    if cfg.taus_degrees.is_empty() {
        return Err(Error::InvalidConfig("tau sweep is empty".into()));
    }
    let mut runs = Vec::new();
    let mut svgs = Vec::new();
    for &tau in &cfg.taus_degrees {
        let panel = run_panel(cfg, tau)?;
        let name = if tau.fract() == 0.0 {
            format!("toy_{tau:.0}.svg")
        } else {
            format!("toy_{tau}.svg")
        };
        runs.push(panel.run);
        svgs.push((name, panel.svg));
    }
    Ok((
        ToyReport {
            version: "toy_v1".into(),
            sigma2: cfg.sigma2,
            n: cfg.n,
            seed: cfg.seed,
            runs,
        },
        svgs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ToyFigureConfig {
        ToyFigureConfig {
            taus_degrees: vec![0.0],
            n: 2000,
            classifier_epochs: 15,
            ..Default::default()
        }
    }

    #[test]
    fn boundary_separates_classes_well() {
        let (report, svgs) = run_toy_figure(&small_cfg()).unwrap();
        assert_eq!(svgs.len(), 1);
        assert_eq!(svgs[0].0, "toy_0.svg");
        let run = &report.runs[0];
        assert!(run.classifier_train_accuracy > 0.95);
        // probe is an artifact sample of class A: classified A raw
        assert_eq!(run.probe_class_raw, -1);
    }

    #[test]
    fn tau_zero_both_vectors_near_x_axis() {
        let (report, _) = run_toy_figure(&small_cfg()).unwrap();
        let run = &report.runs[0];
        assert!(run.angle_pat_degrees < 3.0, "pat {}", run.angle_pat_degrees);
        assert!(run.angle_svm_degrees < 3.0, "svm {}", run.angle_svm_degrees);
    }

    #[test]
    fn report_json_is_deterministic() {
        let a = run_toy_figure(&small_cfg()).unwrap();
        let b = run_toy_figure(&small_cfg()).unwrap();
        assert_eq!(a.0.to_json().unwrap(), b.0.to_json().unwrap());
        assert_eq!(a.1, b.1);
    }
}
