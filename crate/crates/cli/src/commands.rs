//! Command implementations.

use crate::resolver::Resolver;
use crate::{CliCommand, CmdError, CmdResult, CommonArgs};
use pcav::clarc::{ClarcHook, ClarcMode};
use pcav::concepts::{
    filter_cav_from_svm, fit_pattern_cav, fit_svm, load_concept_vector, nearest_neighbors,
    probe_logit_shift, save_concept_vector, HookPoint, LabelSource, SvmConfig,
};
use pcav::datasets::{
    eight_template, export_csv, gen_split_pair, load_binary, poison_backdoor, poison_clever_hans,
    poison_test, save_binary, ArtifactSpec, LabeledDataset, PatternClassesConfig, Split,
};
use pcav::experiments::{
    render_report, run_controlled_suite, run_toy_figure, ArchSpec, Attack, CavKindSel, Correction,
    DatasetSpec, ExperimentConfig, FinetuneConfig, HookSel, RenderFormat, ToyFigureConfig,
};
use pcav::jsonio;
use pcav::models::{
    evaluate, extract_features, finetune_subsequent, gradcheck_conv_model, gradcheck_dense_model,
    gradient_check, load_model, save_model, train, NetworkModel, OptimKind, OptimizerConfig,
};
use pcav::numerics::{Rng, Tensor};
use std::path::Path;

fn core(e: pcav::Error) -> CmdError {
    CmdError::from_core(e)
}

fn prepare(common: &CommonArgs) -> Result<Resolver, CmdError> {
    std::fs::create_dir_all(&common.out).map_err(CmdError::internal)?;
    Resolver::new(&common.out, common.config.as_deref())
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text).map_err(CmdError::internal)
}

fn resolve_hook(model: &NetworkModel, tag: &str) -> Result<HookPoint, CmdError> {
    match HookSel::parse(tag) {
        Some(sel) => Ok(sel.resolve(model)),
        None => HookPoint::parse(tag).map_err(core),
    }
}

/// Features of the target-class samples at a hook point, with their
/// artifact flags as +-1 floats.
fn target_features(
    model: &NetworkModel,
    ds: &LabeledDataset,
    target: i32,
    point: HookPoint,
) -> Result<(Tensor, Vec<f64>), CmdError> {
    let idxs = ds.indices_of_class(target);
    if idxs.is_empty() {
        return Err(CmdError::user(format!("class {target} absent from dataset")));
    }
    let rows: Vec<Vec<f64>> = idxs.iter().map(|&i| ds.sample(i).to_vec()).collect();
    let x = Tensor::from_rows(&rows).map_err(core)?;
    let feats = model.forward_to(point, &x).map_err(core)?;
    let y: Vec<f64> = idxs
        .iter()
        .map(|&i| f64::from(ds.artifact_flags()[i]))
        .collect();
    Ok((feats, y))
}

#[allow(clippy::too_many_arguments)]
fn artifact_from(
    resolver: &mut Resolver,
    kind: Option<String>,
    box_size: Option<usize>,
    box_value: Option<f64>,
    factor: Option<f64>,
    color_index: Option<usize>,
    template_path: Option<&Path>,
    shape: (usize, usize, usize),
) -> Result<ArtifactSpec, CmdError> {
    let kind = resolver.get("artifact", kind, "box".to_string())?;
    match kind.as_str() {
        "box" => {
            let size = resolver.get("box_size", box_size, 4)?;
            let value = resolver.get("box_value", box_value, 1.0)?;
            Ok(ArtifactSpec::BoxPatch { size, value })
        }
        "shift" => {
            let factor = resolver.get("factor", factor, 0.2)?;
            let template = match template_path {
                Some(path) => {
                    let ds = load_binary(path, Split::Train).map_err(core)?;
                    let (c, h, w) = ds.channel_shape();
                    Tensor::new(vec![c, h, w], ds.sample(0).to_vec()).map_err(core)?
                }
                None => eight_template(shape),
            };
            Ok(ArtifactSpec::AdditiveShift { template, factor })
        }
        "color" => {
            let color_index = resolver.get("color_index", color_index, 0)?;
            Ok(ArtifactSpec::ColorTint { color_index })
        }
        other => Err(CmdError::user(format!("unknown artifact kind '{other}'"))),
    }
}

pub fn execute(command: CliCommand) -> CmdResult {
    match command {
        CliCommand::Toy {
            common,
            taus,
            sigma2,
            n,
            artifact_fraction,
            seed,
        } => {
            let mut r = prepare(&common)?;
            let cfg = ToyFigureConfig {
                taus_degrees: r.get_list("tau", taus, vec![0.0, 45.0, 135.0])?,
                sigma2: r.get("sigma2", sigma2, 0.15)?,
                n: r.get("n", n, 10_000)?,
                artifact_fraction: r.get("artifact_fraction", artifact_fraction, 0.5)?,
                seed: r.seed(seed)?,
                ..Default::default()
            };
            let (report, svgs) = run_toy_figure(&cfg).map_err(core)?;
            for ((name, svg), run) in svgs.iter().zip(&report.runs) {
                write_text(&common.out.join(name), svg)?;
                let single = pcav::experiments::ToyReport {
                    runs: vec![run.clone()],
                    ..report.clone()
                };
                let json_name = name.replace(".svg", ".json");
                write_text(
                    &common.out.join(json_name),
                    &single.to_json().map_err(core)?,
                )?;
            }
            write_text(
                &common.out.join("toy_report.json"),
                &report.to_json().map_err(core)?,
            )?;
            println!("wrote {} panels to {}", report.runs.len(), common.out.display());
            r.finish("toy")
        }

        CliCommand::Gen {
            common,
            k,
            channels,
            height,
            width,
            n_train,
            n_test,
            noise,
            seed,
            csv,
        } => {
            let mut r = prepare(&common)?;
            let cfg = PatternClassesConfig {
                k: r.get("k", k, 10)?,
                shape: (
                    r.get("channels", channels, 1)?,
                    r.get("height", height, 16)?,
                    r.get("width", width, 16)?,
                ),
                n_per_class: r.get("n_train", n_train, 150)?,
                noise_sigma: r.get("noise", noise, 0.2)?,
            };
            let n_test = r.get("n_test", n_test, 40)?;
            let seed = r.seed(seed)?;
            let (train_ds, test_ds) = gen_split_pair(&cfg, n_test, seed).map_err(core)?;
            save_binary(&train_ds, &common.out.join("train.bin")).map_err(core)?;
            save_binary(&test_ds, &common.out.join("test.bin")).map_err(core)?;
            if csv {
                export_csv(&train_ds, &common.out.join("train.csv")).map_err(core)?;
                export_csv(&test_ds, &common.out.join("test.csv")).map_err(core)?;
            }
            println!(
                "wrote train ({} samples) and test ({}) to {}",
                train_ds.n(),
                test_ds.n(),
                common.out.display()
            );
            r.finish("gen")
        }

        CliCommand::Poison {
            common,
            mode,
            data,
            target,
            rate,
            artifact,
            box_size,
            box_value,
            factor,
            color_index,
            template,
            seed,
        } => {
            let mut r = prepare(&common)?;
            let split = match mode.as_str() {
                "clever-hans" | "backdoor" => Split::Train,
                "test" => Split::Test,
                other => return Err(CmdError::user(format!("unknown poison mode '{other}'"))),
            };
            let ds = load_binary(&data, split).map_err(core)?;
            let spec = artifact_from(
                &mut r,
                artifact,
                box_size,
                box_value,
                factor,
                color_index,
                template.as_deref(),
                ds.channel_shape(),
            )?;
            let seed = r.seed(seed)?;
            let mut rng = Rng::from_seed(seed);
            let poisoned = match mode.as_str() {
                "clever-hans" => {
                    let target = r.get("target", target, 0)?;
                    let rate = r.get("rate", rate, 0.1)?;
                    poison_clever_hans(&ds, target, rate, &spec, &mut rng).map_err(core)?
                }
                "backdoor" => {
                    let target = r.get("target", target, 0)?;
                    let rate = r.get("rate", rate, 0.01)?;
                    poison_backdoor(&ds, target, rate, &spec, &mut rng).map_err(core)?
                }
                _ => {
                    let rate = r.get("rate", rate, 1.0)?;
                    poison_test(&ds, rate, &spec, &mut rng).map_err(core)?
                }
            };
            let out = common.out.join("poisoned.bin");
            save_binary(&poisoned, &out).map_err(core)?;
            let flagged = poisoned.artifact_flags().iter().filter(|&&s| s == 1).count();
            println!("wrote {} ({flagged} artifact samples)", out.display());
            r.finish("poison")
        }

        CliCommand::Train {
            common,
            data,
            arch,
            c1,
            c2,
            dense,
            hidden,
            epochs,
            batch,
            optimizer,
            lr,
            seed,
            evals,
        } => {
            let mut r = prepare(&common)?;
            let ds = load_binary(&data, Split::Train).map_err(core)?;
            let arch = r.get("arch", arch, "conv".to_string())?;
            let seed = r.seed(seed)?;
            let mut model = match arch.as_str() {
                "conv" => NetworkModel::conv_classifier_custom(
                    ds.channel_shape(),
                    r.get("c1", c1, 8)?,
                    r.get("c2", c2, 16)?,
                    r.get("dense", dense, 64)?,
                    ds.n_classes(),
                    seed,
                )
                .map_err(core)?,
                "linear" => NetworkModel::linear(ds.dim(), ds.n_classes(), seed).map_err(core)?,
                "mlp" => {
                    let spec = r.get("hidden", hidden, "64".to_string())?;
                    let widths: Vec<usize> = spec
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| CmdError::user(format!("bad hidden spec '{spec}'")))?;
                    NetworkModel::mlp(ds.dim(), &widths, ds.n_classes(), seed).map_err(core)?
                }
                other => return Err(CmdError::user(format!("unknown arch '{other}'"))),
            };
            let kind = match r.get("optimizer", optimizer, "adadelta".to_string())?.as_str() {
                "adadelta" => {
                    let lr = r.get("lr", lr, 1.0)?;
                    OptimKind::AdaDelta {
                        lr,
                        rho: 0.9,
                        eps: 1e-6,
                        per_epoch_lr_factor: 0.7,
                    }
                }
                "sgd" => OptimKind::Sgd {
                    lr: r.get("lr", lr, 0.1)?,
                },
                other => return Err(CmdError::user(format!("unknown optimizer '{other}'"))),
            };
            let opt = OptimizerConfig {
                kind,
                epochs: r.get("epochs", epochs, 10)?,
                batch_size: r.get("batch", batch, 32)?,
                rng_seed: seed,
            };
            let eval_sets: Vec<(String, LabeledDataset)> = evals
                .iter()
                .map(|p| {
                    load_binary(p, Split::Test)
                        .map(|ds| (p.file_stem().unwrap().to_string_lossy().into_owned(), ds))
                })
                .collect::<Result<_, _>>()
                .map_err(core)?;
            let eval_refs: Vec<(&str, &LabeledDataset)> = eval_sets
                .iter()
                .map(|(name, ds)| (name.as_str(), ds))
                .collect();
            let history = train(&mut model, &ds, &opt, &eval_refs).map_err(core)?;
            save_model(&model, &common.out.join("model.bin")).map_err(core)?;
            write_text(
                &common.out.join("history.json"),
                &jsonio::to_json_string(&history).map_err(core)?,
            )?;
            println!(
                "trained {arch} for {} epochs, final train accuracy {:.3}",
                opt.epochs,
                history.train_accuracy.last().unwrap()
            );
            r.finish("train")
        }

        CliCommand::FitCav {
            common,
            model,
            data,
            kind,
            labels,
            hook,
            target,
            svm_lambda,
            svm_epochs,
            variance_floor,
            seed,
        } => {
            let mut r = prepare(&common)?;
            let model = load_model(&model).map_err(core)?;
            let ds = load_binary(&data, Split::Train).map_err(core)?;
            let kind = r.get("kind", kind, "pattern".to_string())?;
            let labels = r.get("labels", labels, "gt".to_string())?;
            let hook_tag = r.get("hook", hook, "input".to_string())?;
            let target = r.get("target", target, 0)?;
            let point = resolve_hook(&model, &hook_tag)?;
            let (x, y) = target_features(&model, &ds, target, point)?;
            let svm_cfg = SvmConfig {
                lambda: r.get("svm_lambda", svm_lambda, 1e-3)?,
                epochs: r.get("svm_epochs", svm_epochs, 200)?,
                step_scale: 1.0,
                rng_seed: r.seed(seed)?,
            };
            let floor = r.get("variance_floor", variance_floor, 1e-12)?;
            let cv = match (kind.as_str(), labels.as_str()) {
                ("filter", "gt") => {
                    let (svm, diag) = fit_svm(&x, &y, &svm_cfg).map_err(core)?;
                    filter_cav_from_svm(svm, diag, &x, &y, point).map_err(core)?
                }
                ("filter", other) => {
                    return Err(CmdError::user(format!(
                        "filter vectors use ground-truth labels, not '{other}'"
                    )))
                }
                ("pattern", "gt") => {
                    fit_pattern_cav(&x, &y, point, LabelSource::GroundTruth, floor).map_err(core)?
                }
                ("pattern", "predicted") => {
                    let (svm, _) = fit_svm(&x, &y, &svm_cfg).map_err(core)?;
                    let y_hat = svm.predict_batch(&x);
                    fit_pattern_cav(&x, &y_hat, point, LabelSource::Predicted, floor)
                        .map_err(core)?
                }
                (k, l) => {
                    return Err(CmdError::user(format!(
                        "unknown kind/labels combination '{k}'/'{l}'"
                    )))
                }
            };
            let out = common.out.join("cav.json");
            save_concept_vector(&cv, &out).map_err(core)?;
            println!(
                "wrote {} ({} {}-dim, |z+ - z-| = {:.4})",
                out.display(),
                kind,
                cv.dim(),
                cv.mean_gap_norm()
            );
            r.finish("fit-cav")
        }

        CliCommand::Correct {
            common,
            model,
            cav,
            mode,
            data,
            epochs,
            subset_fraction,
            batch,
            seed,
        } => {
            let mut r = prepare(&common)?;
            let mut net = load_model(&model).map_err(core)?;
            let cv = load_concept_vector(&cav).map_err(core)?;
            let mode = r.get("mode", mode, "pclarc".to_string())?;
            match mode.as_str() {
                "aclarc" => {
                    let data =
                        data.ok_or_else(|| CmdError::user("aclarc correction needs --data"))?;
                    let ds = load_binary(&data, Split::Train).map_err(core)?;
                    let hook = ClarcHook::new(ClarcMode::Augmentive, cv).map_err(core)?;
                    let opt = OptimizerConfig {
                        kind: OptimKind::adadelta_default(),
                        epochs: r.get("epochs", epochs, 5)?,
                        batch_size: r.get("batch", batch, 32)?,
                        rng_seed: r.seed(seed)?,
                    };
                    let fraction = r.get("subset_fraction", subset_fraction, 0.5)?;
                    let history =
                        finetune_subsequent(&mut net, &ds, &hook, fraction, &opt, &[])
                            .map_err(core)?;
                    save_model(&net, &common.out.join("corrected_model.bin")).map_err(core)?;
                    write_text(
                        &common.out.join("history.json"),
                        &jsonio::to_json_string(&history).map_err(core)?,
                    )?;
                    println!("fine-tuned {} epochs with the augmentive hook", opt.epochs);
                }
                "pclarc" => {
                    // projective correction is applied at evaluation time;
                    // bundle the model with the hook vector
                    let hook = ClarcHook::new(ClarcMode::Projective, cv).map_err(core)?;
                    save_model(&net, &common.out.join("corrected_model.bin")).map_err(core)?;
                    save_concept_vector(&hook.concept, &common.out.join("correction.json"))
                        .map_err(core)?;
                    println!(
                        "wrote model + correction vector; evaluate with --cav correction.json"
                    );
                }
                other => return Err(CmdError::user(format!("unknown mode '{other}'"))),
            }
            r.finish("correct")
        }

        CliCommand::Eval { common, model, data, cav } => {
            let r = prepare(&common)?;
            let net = load_model(&model).map_err(core)?;
            let ds = load_binary(&data, Split::Test).map_err(core)?;
            let hook = match cav {
                Some(path) => Some(
                    ClarcHook::new(
                        ClarcMode::Projective,
                        load_concept_vector(&path).map_err(core)?,
                    )
                    .map_err(core)?,
                ),
                None => None,
            };
            let accuracy = evaluate(&net, &ds, hook.as_ref()).map_err(core)?;
            write_text(
                &common.out.join("eval.json"),
                &jsonio::to_json_string(&serde_json::json!({ "accuracy": accuracy }))
                    .map_err(core)?,
            )?;
            println!("accuracy {accuracy:.4}");
            r.finish("eval")
        }

        CliCommand::Logits {
            common,
            model,
            data,
            cav,
            target,
            scale,
        } => {
            let mut r = prepare(&common)?;
            let net = load_model(&model).map_err(core)?;
            let ds = load_binary(&data, Split::Test).map_err(core)?;
            let cv = load_concept_vector(&cav).map_err(core)?;
            let target = r.get("target", target, 0)?;
            let scale = r.get("scale", scale, cv.mean_gap_norm())?;
            let report = probe_logit_shift(&net, &ds, &cv, target, scale).map_err(core)?;
            write_text(
                &common.out.join("logit_shift.json"),
                &jsonio::to_json_string(&report).map_err(core)?,
            )?;
            println!(
                "mean target softmax {:.4} -> {:.4} (non-target samples {:.4} -> {:.4})",
                report.mean_target_before,
                report.mean_target_after,
                report.nontarget_mean_target_before,
                report.nontarget_mean_target_after
            );
            r.finish("logits")
        }

        CliCommand::Neighbors {
            common,
            cav,
            data,
            model,
            k,
        } => {
            let mut r = prepare(&common)?;
            let cv = load_concept_vector(&cav).map_err(core)?;
            let ds = load_binary(&data, Split::Test).map_err(core)?;
            let k = r.get("k", k, 10)?;
            let features = match cv.hook {
                HookPoint::Input => ds.samples().clone(),
                point => {
                    let path = model.ok_or_else(|| {
                        CmdError::user("latent-hook vectors need --model for feature extraction")
                    })?;
                    let net = load_model(&path).map_err(core)?;
                    extract_features(&net, &ds, point).map_err(core)?
                }
            };
            let hits = nearest_neighbors(&cv, &features, k).map_err(core)?;
            if !hits.skipped.is_empty() {
                eprintln!("warning: skipped {} zero-norm rows", hits.skipped.len());
            }
            write_text(
                &common.out.join("neighbors.json"),
                &jsonio::to_json_string(&hits).map_err(core)?,
            )?;
            for (i, s) in hits.indices.iter().zip(&hits.similarities) {
                println!("{i}\t{s:.6}\tclass {}\ty_s {}", ds.labels()[*i], ds.artifact_flags()[*i]);
            }
            r.finish("neighbors")
        }

        CliCommand::Suite {
            common,
            attack,
            artifact,
            r_ch,
            r_bd,
            r_p,
            targets,
            seeds,
            kinds,
            corrections,
            hooks,
            k,
            channels,
            height,
            width,
            n_train,
            n_test,
            noise,
            epochs,
            batch,
            ft_epochs,
            subset_fraction,
            box_size,
            factor,
            color_index,
            jobs,
        } => {
            let mut r = prepare(&common)?;
            let attack_tag = r.get("attack", attack, "clever-hans".to_string())?;
            let attack = match attack_tag.as_str() {
                "clever-hans" => Attack::CleverHans {
                    r_ch: r.get("r_ch", r_ch, 0.1)?,
                },
                "backdoor" => Attack::Backdoor {
                    r_bd: r.get("r_bd", r_bd, 0.01)?,
                },
                other => return Err(CmdError::user(format!("unknown attack '{other}'"))),
            };
            let shape = (
                r.get("channels", channels, 1)?,
                r.get("height", height, 16)?,
                r.get("width", width, 16)?,
            );
            let artifact = artifact_from(
                &mut r, artifact, box_size, None, factor, color_index, None, shape,
            )?;
            let parse_tags = |raw: &str, what: &str| -> Result<Vec<String>, CmdError> {
                let tags: Vec<String> = raw
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                if tags.is_empty() {
                    return Err(CmdError::user(format!("empty {what} list")));
                }
                Ok(tags)
            };
            let targets: Vec<i32> = parse_tags(
                &r.get("targets", targets, "0,1,2".to_string())?,
                "targets",
            )?
            .iter()
            .map(|s| s.parse().map_err(|_| CmdError::user(format!("bad target '{s}'"))))
            .collect::<Result<_, _>>()?;
            let n_seeds = r.get("seeds", seeds, 3)?;
            let kinds = parse_tags(
                &r.get("kinds", kinds, "filter,pattern-gt,pattern-pred".to_string())?,
                "kinds",
            )?
            .iter()
            .map(|s| {
                CavKindSel::parse(s).ok_or_else(|| CmdError::user(format!("unknown cav kind '{s}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
            let corrections = parse_tags(
                &r.get("corrections", corrections, "baseline,pclarc,aclarc".to_string())?,
                "corrections",
            )?
            .iter()
            .map(|s| {
                Correction::parse(s)
                    .ok_or_else(|| CmdError::user(format!("unknown correction '{s}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
            let hooks = parse_tags(&r.get("hooks", hooks, "input,layer1".to_string())?, "hooks")?
                .iter()
                .map(|s| {
                    HookSel::parse(s).ok_or_else(|| CmdError::user(format!("unknown hook '{s}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = ExperimentConfig {
                dataset: DatasetSpec {
                    k: r.get("k", k, 10)?,
                    shape,
                    n_train_per_class: r.get("n_train", n_train, 150)?,
                    n_test_per_class: r.get("n_test", n_test, 40)?,
                    noise_sigma: r.get("noise", noise, 0.2)?,
                },
                arch: ArchSpec::default(),
                attack,
                artifact,
                targets,
                r_p: r.get("r_p", r_p, 1.0)?,
                cav_kinds: kinds,
                corrections,
                hooks,
                seeds: (0..n_seeds).collect(),
                optimizer: OptimizerConfig {
                    kind: OptimKind::adadelta_default(),
                    epochs: r.get("epochs", epochs, 8)?,
                    batch_size: r.get("batch", batch, 32)?,
                    rng_seed: 0,
                },
                finetune: FinetuneConfig {
                    epochs: r.get("ft_epochs", ft_epochs, 5)?,
                    subset_fraction: r.get("subset_fraction", subset_fraction, 0.5)?,
                },
                svm: SvmConfig::default(),
                variance_floor: 1e-12,
                probe_scale: None,
                jobs: r.get("jobs", jobs, 0)?,
            };
            let report = run_controlled_suite(&cfg).map_err(core)?;
            write_text(
                &common.out.join("report.json"),
                &render_report(&report, RenderFormat::Json).map_err(core)?,
            )?;
            write_text(
                &common.out.join("report.csv"),
                &render_report(&report, RenderFormat::Csv).map_err(core)?,
            )?;
            write_text(
                &common.out.join("report.md"),
                &render_report(&report, RenderFormat::MarkdownTable).map_err(core)?,
            )?;
            println!("suite complete: {} cells", report.cells.len());
            for a in &report.aggregates {
                println!(
                    "  {:<9} {:<13} {:<7} clean {:.3} poisoned {:.3}",
                    a.correction,
                    a.cav.as_deref().unwrap_or("-"),
                    a.hook.as_deref().unwrap_or("-"),
                    a.mean_clean,
                    a.mean_poisoned
                );
            }
            r.finish("suite")
        }

        CliCommand::Gradcheck {
            common,
            arch,
            epsilon,
            seed,
        } => {
            let mut r = prepare(&common)?;
            let arch = r.get("arch", arch, "conv".to_string())?;
            let epsilon = r.get("epsilon", epsilon, 1e-5)?;
            let seed = r.seed(seed)?;
            let (model, x, targets) = match arch.as_str() {
                "conv" => {
                    let model = gradcheck_conv_model(if seed == 0 { 8 } else { seed });
                    let mut rng = Rng::from_seed(1000 + model.seed());
                    let data: Vec<f64> =
                        (0..2 * 100).map(|_| rng.uniform_in(0.05, 0.95)).collect();
                    (model, Tensor::new(vec![2, 100], data).map_err(core)?, vec![0, 2])
                }
                "dense" => {
                    let model = gradcheck_dense_model(if seed == 0 { 2 } else { seed });
                    let mut rng = Rng::from_seed(2000 + model.seed());
                    let data: Vec<f64> = (0..2 * 12).map(|_| rng.gaussian(0.3, 1.0)).collect();
                    (model, Tensor::new(vec![2, 12], data).map_err(core)?, vec![1, 3])
                }
                other => return Err(CmdError::user(format!("unknown arch '{other}'"))),
            };
            let report = gradient_check(&model, &x, &targets, epsilon).map_err(core)?;
            write_text(
                &common.out.join("gradcheck.json"),
                &jsonio::to_json_string(&report).map_err(core)?,
            )?;
            println!(
                "max relative error {:.6e} over {} parameters (kink distance {:.3e})",
                report.max_rel_error, report.params_checked, report.kink_distance
            );
            r.finish("gradcheck")?;
            if report.max_rel_error < 1e-4 {
                Ok(())
            } else {
                Err(CmdError::user(format!(
                    "gradient check failed: {:.3e} >= 1e-4",
                    report.max_rel_error
                )))
            }
        }
    }
}
