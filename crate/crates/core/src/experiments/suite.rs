//! Controlled Clever Hans / backdoor protocol: poison, train, fit concept
//! vectors, correct, evaluate.
//!
//! Every cell (target x seed) derives its own rng streams from the cell
//! coordinates alone, so cells can run in parallel in any order and the
//! assembled report is bit-identical across thread counts.

use crate::clarc::{ClarcHook, ClarcMode};
use crate::concepts::{
    filter_cav_from_svm, fit_pattern_cav, fit_svm, probe_logit_shift, ConceptVector, HookPoint,
    LabelSource, SvmConfig,
};
use crate::datasets::{
    gen_split_pair, poison_backdoor, poison_clever_hans, poison_test, ArtifactSpec,
    LabeledDataset, PatternClassesConfig,
};
use crate::error::{Error, Result};
use crate::experiments::report::{
    Cell, EpochCurve, ExperimentReport, OriginalAccuracy, ProbeResult, REPORT_VERSION,
};
use crate::models::{
    evaluate, finetune_subsequent, train, NetworkModel, OptimizerConfig,
};
use crate::numerics::{Rng, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    CleverHans { r_ch: f64 },
    Backdoor { r_bd: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub k: usize,
    pub shape: (usize, usize, usize),
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub noise_sigma: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            k: 10,
            shape: (1, 16, 16),
            n_train_per_class: 200,
            n_test_per_class: 40,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavKindSel {
    Filter,
    PatternGt,
    PatternPred,
}

impl CavKindSel {
    pub fn tag(&self) -> &'static str {
        match self {
            CavKindSel::Filter => "filter",
            CavKindSel::PatternGt => "pattern_gt",
            CavKindSel::PatternPred => "pattern_pred",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "filter" => Some(CavKindSel::Filter),
            "pattern_gt" | "pattern-gt" | "pattern" => Some(CavKindSel::PatternGt),
            "pattern_pred" | "pattern-pred" => Some(CavKindSel::PatternPred),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Baseline,
    AClarc,
    PClarc,
}

impl Correction {
    pub fn tag(&self) -> &'static str {
        match self {
            Correction::Baseline => "baseline",
            Correction::AClarc => "aclarc",
            Correction::PClarc => "pclarc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Correction::Baseline),
            "aclarc" => Some(Correction::AClarc),
            "pclarc" => Some(Correction::PClarc),
            _ => None,
        }
    }
}

/// Hook selector resolved against the model: raw input or after the first
/// convolutional layer's ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HookSel {
    Input,
    FirstConv,
}

impl HookSel {
    pub fn tag(&self) -> &'static str {
        match self {
            HookSel::Input => "input",
            HookSel::FirstConv => "layer1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "input" => Some(HookSel::Input),
            "layer1" | "first_conv" | "first-conv" => Some(HookSel::FirstConv),
            _ => None,
        }
    }

    pub fn resolve(&self, model: &NetworkModel) -> HookPoint {
        match self {
            HookSel::Input => HookPoint::Input,
            HookSel::FirstConv => model.first_conv_hook(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub subset_fraction: f64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            subset_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub conv1: usize,
    pub conv2: usize,
    pub hidden: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            conv1: 8,
            conv2: 16,
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub arch: ArchSpec,
    pub attack: Attack,
    pub artifact: ArtifactSpec,
    pub targets: Vec<i32>,
    /// Test-set poison rate.
    pub r_p: f64,
    pub cav_kinds: Vec<CavKindSel>,
    pub corrections: Vec<Correction>,
    pub hooks: Vec<HookSel>,
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerConfig,
    pub finetune: FinetuneConfig,
    pub svm: SvmConfig,
    pub variance_floor: f64,
    /// Probe magnitude; `None` uses |z+ - z-| of each fitted vector.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe_scale: Option<f64>,
    /// Rayon threads for the cell sweep; 0 keeps the global default.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = match self.attack {
            Attack::CleverHans { r_ch } => r_ch,
            Attack::Backdoor { r_bd } => r_bd,
        };
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::InvalidConfig(format!("attack rate {rate} outside (0,1]")));
        }
        if !(0.0..=1.0).contains(&self.r_p) {
            return Err(Error::InvalidConfig(format!("r_p {} outside [0,1]", self.r_p)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one seed".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidConfig("need at least one target class".into()));
        }
        if self.hooks.is_empty() || self.corrections.is_empty() {
            return Err(Error::InvalidConfig("need hooks and corrections".into()));
        }
        self.optimizer.validate()?;
        self.svm.validate()?;
        Ok(())
    }
}

// Stream tags for per-cell rng derivation.
const STREAM_POISON: u64 = 0xA000;
const STREAM_PTEST: u64 = 0xB000;
const STREAM_MODEL: u64 = 0xC000;
const STREAM_TRAIN: u64 = 0xD000;
const STREAM_FT_BASE: u64 = 0xE000;
const STREAM_FT_ACLARC: u64 = 0xF000;
const STREAM_SVM: u64 = 0x9000;

struct CellOutput {
    original: OriginalAccuracy,
    cells: Vec<Cell>,
    curves: Vec<EpochCurve>,
    probes: Vec<ProbeResult>,
}

fn features_for_indices(
    model: &NetworkModel,
    ds: &LabeledDataset,
    idxs: &[usize],
    point: HookPoint,
) -> Result<Tensor> {
    let dim = model.hook_dim(point)?;
    let mut data = Vec::with_capacity(idxs.len() * dim);
    for chunk in idxs.chunks(256) {
        let d = ds.dim();
        let mut block = Vec::with_capacity(chunk.len() * d);
        for &i in chunk {
            block.extend_from_slice(ds.sample(i));
        }
        let x = Tensor::new(vec![chunk.len(), d], block)?;
        let feats = model.forward_to(point, &x)?;
        data.extend_from_slice(feats.data());
    }
    Tensor::new(vec![idxs.len(), dim], data)
}

struct FittedCavs {
    /// (kind tag, hook tag, vector)
    entries: Vec<(CavKindSel, HookSel, ConceptVector)>,
}

fn fit_cavs(
    cfg: &ExperimentConfig,
    model: &NetworkModel,
    train_pois: &LabeledDataset,
    target: i32,
    seed_root: &Rng,
) -> Result<FittedCavs> {
    let target_idxs = train_pois.indices_of_class(target);
    if target_idxs.is_empty() {
        return Err(Error::ClassAbsent(target));
    }
    let y_gt: Vec<f64> = target_idxs
        .iter()
        .map(|&i| f64::from(train_pois.artifact_flags()[i]))
        .collect();
    let mut entries = Vec::new();
    for (hook_idx, hook_sel) in cfg.hooks.iter().enumerate() {
        let point = hook_sel.resolve(model);
        let x = features_for_indices(model, train_pois, &target_idxs, point)?;
        let needs_svm = cfg
            .cav_kinds
            .iter()
            .any(|k| matches!(k, CavKindSel::Filter | CavKindSel::PatternPred));
        let svm = if needs_svm {
            let svm_cfg = SvmConfig {
                rng_seed: seed_root.derive(STREAM_SVM + hook_idx as u64).seed(),
                ..cfg.svm.clone()
            };
            Some(fit_svm(&x, &y_gt, &svm_cfg)?)
        } else {
            None
        };
        for kind in &cfg.cav_kinds {
            let cv = match kind {
                CavKindSel::Filter => {
                    let (model_svm, diag) = svm.clone().expect("svm fitted");
                    filter_cav_from_svm(model_svm, diag, &x, &y_gt, point)?
                }
                CavKindSel::PatternGt => fit_pattern_cav(
                    &x,
                    &y_gt,
                    point,
                    LabelSource::GroundTruth,
                    cfg.variance_floor,
                )?,
                CavKindSel::PatternPred => {
                    let (model_svm, _) = svm.as_ref().expect("svm fitted");
                    let y_hat = model_svm.predict_batch(&x);
                    fit_pattern_cav(&x, &y_hat, point, LabelSource::Predicted, cfg.variance_floor)?
                }
            };
            entries.push((*kind, *hook_sel, cv));
        }
    }
    Ok(FittedCavs { entries })
}

fn run_cell(cfg: &ExperimentConfig, target: i32, seed: u64) -> Result<CellOutput> {
    let root = Rng::from_seed(seed);
    let t_stream = target as u64;

    let pattern_cfg = PatternClassesConfig {
        k: cfg.dataset.k,
        shape: cfg.dataset.shape,
        n_per_class: cfg.dataset.n_train_per_class,
        noise_sigma: cfg.dataset.noise_sigma,
    };
    let (train_clean, test_clean) =
        gen_split_pair(&pattern_cfg, cfg.dataset.n_test_per_class, seed)?;

    let mut poison_rng = root.derive(STREAM_POISON + t_stream);
    let train_pois = match cfg.attack {
        Attack::CleverHans { r_ch } => {
            poison_clever_hans(&train_clean, target, r_ch, &cfg.artifact, &mut poison_rng)?
        }
        Attack::Backdoor { r_bd } => {
            poison_backdoor(&train_clean, target, r_bd, &cfg.artifact, &mut poison_rng)?
        }
    };
    let mut ptest_rng = root.derive(STREAM_PTEST + t_stream);
    let test_pois = poison_test(&test_clean, cfg.r_p, &cfg.artifact, &mut ptest_rng)?;

    let mut model = NetworkModel::conv_classifier_custom(
        cfg.dataset.shape,
        cfg.arch.conv1,
        cfg.arch.conv2,
        cfg.arch.hidden,
        cfg.dataset.k,
        root.derive(STREAM_MODEL + t_stream).seed(),
    )?;
    let train_opt = OptimizerConfig {
        rng_seed: root.derive(STREAM_TRAIN + t_stream).seed(),
        ..cfg.optimizer.clone()
    };
    train(&mut model, &train_pois, &train_opt, &[])?;

    let original = OriginalAccuracy {
        target,
        seed,
        clean_accuracy: evaluate(&model, &test_clean, None)?,
        poisoned_accuracy: evaluate(&model, &test_pois, None)?,
    };

    let cavs = fit_cavs(cfg, &model, &train_pois, target, &root)?;

    let mut cells = Vec::new();
    let mut curves = Vec::new();
    let mut probes = Vec::new();

    for correction in &cfg.corrections {
        match correction {
            Correction::Baseline => {
                let mut base = model.clone();
                let opt = OptimizerConfig {
                    epochs: cfg.finetune.epochs,
                    rng_seed: root.derive(STREAM_FT_BASE + t_stream).seed(),
                    ..cfg.optimizer.clone()
                };
                train(&mut base, &train_pois, &opt, &[])?;
                cells.push(Cell {
                    target,
                    seed,
                    correction: correction.tag().into(),
                    cav: None,
                    hook: None,
                    clean_accuracy: evaluate(&base, &test_clean, None)?,
                    poisoned_accuracy: evaluate(&base, &test_pois, None)?,
                });
            }
            Correction::PClarc => {
                for (kind, hook_sel, cv) in &cavs.entries {
                    let hook = ClarcHook::new(ClarcMode::Projective, cv.clone())?;
                    cells.push(Cell {
                        target,
                        seed,
                        correction: correction.tag().into(),
                        cav: Some(kind.tag().into()),
                        hook: Some(hook_sel.tag().into()),
                        clean_accuracy: evaluate(&model, &test_clean, Some(&hook))?,
                        poisoned_accuracy: evaluate(&model, &test_pois, Some(&hook))?,
                    });
                }
            }
            Correction::AClarc => {
                for (idx, (kind, hook_sel, cv)) in cavs.entries.iter().enumerate() {
                    let hook = ClarcHook::new(ClarcMode::Augmentive, cv.clone())?;
                    let mut tuned = model.clone();
                    let opt = OptimizerConfig {
                        epochs: cfg.finetune.epochs,
                        rng_seed: root
                            .derive(STREAM_FT_ACLARC + t_stream * 64 + idx as u64)
                            .seed(),
                        ..cfg.optimizer.clone()
                    };
                    let history = finetune_subsequent(
                        &mut tuned,
                        &train_pois,
                        &hook,
                        cfg.finetune.subset_fraction,
                        &opt,
                        &[("clean", &test_clean), ("poisoned", &test_pois)],
                    )?;
                    let clean_series = &history.evals[0].accuracy;
                    let pois_series = &history.evals[1].accuracy;
                    cells.push(Cell {
                        target,
                        seed,
                        correction: correction.tag().into(),
                        cav: Some(kind.tag().into()),
                        hook: Some(hook_sel.tag().into()),
                        clean_accuracy: *clean_series.last().unwrap(),
                        poisoned_accuracy: *pois_series.last().unwrap(),
                    });
                    curves.push(EpochCurve {
                        target,
                        seed,
                        cav: kind.tag().into(),
                        hook: hook_sel.tag().into(),
                        clean_by_epoch: clean_series.clone(),
                        poisoned_by_epoch: pois_series.clone(),
                    });
                }
            }
        }
    }

    for (kind, hook_sel, cv) in &cavs.entries {
        let scale = cfg.probe_scale.unwrap_or_else(|| cv.mean_gap_norm());
        let shift = probe_logit_shift(&model, &test_clean, cv, target, scale)?;
        probes.push(ProbeResult {
            target,
            seed,
            cav: kind.tag().into(),
            hook: hook_sel.tag().into(),
            shift,
        });
    }

    Ok(CellOutput {
        original,
        cells,
        curves,
        probes,
    })
}

/// Runs the full (target x seed) sweep and assembles the report; any stage
/// error carries its cell coordinates.
pub fn run_controlled_suite(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let coords: Vec<(i32, u64)> = cfg
        .targets
        .iter()
        .flat_map(|&t| cfg.seeds.iter().map(move |&s| (t, s)))
        .collect();

    let run_all = || -> Vec<Result<CellOutput>> {
        coords
            .par_iter()
            .map(|&(t, s)| {
                run_cell(cfg, t, s).map_err(|e| e.in_cell(format!("target={t} seed={s}")))
            })
            .collect()
    };
    let outputs: Vec<Result<CellOutput>> = if cfg.jobs == 0 {
        run_all()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(run_all)
    };

    let mut originals = Vec::new();
    let mut cells = Vec::new();
    let mut curves = Vec::new();
    let mut probes = Vec::new();
    for out in outputs {
        let out = out?;
        originals.push(out.original);
        cells.extend(out.cells);
        curves.extend(out.curves);
        probes.extend(out.probes);
    }
    // deterministic order regardless of scheduling
    originals.sort_by_key(|o| (o.target, o.seed));
    cells.sort_by(|a, b| {
        (a.target, a.seed, &a.correction, &a.cav, &a.hook).cmp(&(
            b.target,
            b.seed,
            &b.correction,
            &b.cav,
            &b.hook,
        ))
    });
    curves.sort_by(|a, b| {
        (a.target, a.seed, &a.cav, &a.hook).cmp(&(b.target, b.seed, &b.cav, &b.hook))
    });
    probes.sort_by(|a, b| {
        (a.target, a.seed, &a.cav, &a.hook).cmp(&(b.target, b.seed, &b.cav, &b.hook))
    });

    Ok(ExperimentReport {
        version: REPORT_VERSION.into(),
        config: serde_json::to_value(cfg)
            .map_err(|e| Error::Format(format!("config serialization: {e}")))?,
        originals,
        aggregates: ExperimentReport::compute_aggregates(&cells),
        cells,
        aclarc_curves: curves,
        probes,
    })
}
