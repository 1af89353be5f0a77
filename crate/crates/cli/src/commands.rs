use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tsgps_core::io::{
    default_class_names, generate_synthetic, load_checkpoint, read_expression, read_gmt,
    read_labels, read_panel, save_checkpoint, sha256_hex, stratified_split, write_atomic,
    write_expression, write_gmt, write_labels, write_panel, Checkpoint, Dataset, PlantedPair,
    SynthConfig,
};
use tsgps_core::metrics::{argmax_rows, evaluate, kfold_cv_parallel, pr_csv, roc_csv, EvalReport};
use tsgps_core::model::{compression_ratio, count_parameters, Mode, ModelKind, Preset};
use tsgps_core::screen::{featurize, screen, DgpPanel, FeatureMode, LabelVector, ScreenOptions};
use tsgps_core::train::{distill_student, train_teacher, TrainOutcome};
use tsgps_core::{Error, Result};

use crate::args::Command;
use crate::config::{require, RunConfig};

pub fn run(command: &Command, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| Error::io(format!("creating {}", cfg.out.display()), e))?;
    let echo = cfg.out.join(format!("{}.config.toml", command.name()));
    write_atomic(&echo, cfg.to_toml()?.as_bytes())?;
    match command {
        Command::Synth(_) => synth(cfg),
        Command::Screen(_) => screen_cmd(cfg),
        Command::TrainTeacher(_) => teacher(cfg),
        Command::Distill(_) => distill(cfg),
        Command::Evaluate(_) => evaluate_cmd(cfg),
        Command::Predict(_) => predict(cfg),
        Command::Report(_) => report(cfg),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn kind_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Teacher => "teacher",
        ModelKind::StudentTx => "student_tx",
        ModelKind::StudentMlp => "student_mlp",
    }
}

fn preset_name(preset: Preset) -> &'static str {
    match preset {
        Preset::Desk => "desk",
        Preset::PaperScale => "paper-scale",
    }
}

fn read_labels_for(cfg: &RunConfig) -> Result<LabelVector> {
    let labels = read_labels(require(&cfg.data.labels, "data.labels", "--labels")?)?;
    if !cfg.data.binary {
        return Ok(labels);
    }
    let collapsed = labels.labels.iter().map(|&l| (l > 0) as usize).collect();
    LabelVector::new(labels.sample_ids, collapsed, 2)
}

/// Features for the configured expression matrix and labels, with class
/// names taken from `class_names` or the defaults for the label count.
fn load_dataset(
    cfg: &RunConfig,
    panel: &DgpPanel,
    mode: FeatureMode,
    class_names: Option<&[String]>,
) -> Result<Dataset> {
    let expr = read_expression(require(&cfg.data.expression, "data.expression", "--expression")?)?;
    let labels = read_labels_for(cfg)?;
    let names = match class_names {
        Some(names) if names.len() != labels.num_classes => {
            return Err(Error::Data(format!(
                "labels define {} classes but the model predicts {} ({})",
                labels.num_classes,
                names.len(),
                names.join(", ")
            )))
        }
        Some(names) => names.to_vec(),
        None => default_class_names(labels.num_classes),
    };
    Dataset::from_expression(&expr, &labels, panel, mode, names)
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    config: &'a SynthConfig,
    planted: &'a [PlantedPair],
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let sc = cfg.synth_config();
    let data = generate_synthetic(&sc)?;
    write_expression(cfg.out.join("expression.csv"), &data.expr)?;
    write_labels(cfg.out.join("labels.csv"), &data.labels)?;
    write_gmt(cfg.out.join("pathways.gmt"), &data.catalog)?;
    write_json(
        &cfg.out.join("ground_truth.json"),
        &GroundTruth { config: &sc, planted: &data.planted },
    )?;
    println!(
        "synth: {} genes x {} samples, {} pathways, {} planted pairs -> {}",
        data.expr.n_genes(),
        data.expr.n_samples(),
        data.catalog.len(),
        data.planted.len(),
        cfg.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScreenSummary {
    k: usize,
    samples: usize,
    genes: usize,
    candidates_tested: usize,
    degenerate_tables: usize,
    panel: String,
}

fn screen_cmd(cfg: &RunConfig) -> Result<()> {
    let expr = read_expression(require(&cfg.data.expression, "data.expression", "--expression")?)?;
    let labels = read_labels_for(cfg)?;
    let catalog = read_gmt(require(&cfg.data.pathways, "data.pathways", "--pathways")?)?;
    let options = ScreenOptions { k: cfg.screen.k, threads: cfg.parallel };
    let report = screen(&expr, &labels, &catalog, options)?;
    write_panel(cfg.out.join("panel.csv"), &report.panel)?;
    write_json(
        &cfg.out.join("screen_report.json"),
        &ScreenSummary {
            k: cfg.screen.k,
            samples: expr.n_samples(),
            genes: expr.n_genes(),
            candidates_tested: report.candidates_tested,
            degenerate_tables: report.degenerate_tables,
            panel: "panel.csv".into(),
        },
    )?;
    println!(
        "screen: {} candidates tested ({} degenerate), kept {}",
        report.candidates_tested, report.degenerate_tables, cfg.screen.k
    );
    Ok(())
}

fn write_eval(out: &Path, stem: &str, report: &EvalReport, class_names: &[String]) -> Result<()> {
    write_json(&out.join(format!("{stem}.eval.json")), report)?;
    if report.num_classes == 2 {
        write_atomic(&out.join(format!("{stem}.roc.csv")), roc_csv(&report.roc).as_bytes())?;
        write_atomic(&out.join(format!("{stem}.pr.csv")), pr_csv(&report.pr).as_bytes())?;
    } else {
        for c in &report.per_class {
            let name = &class_names[c.class];
            write_atomic(&out.join(format!("{stem}.roc.{name}.csv")), roc_csv(&c.roc).as_bytes())?;
            write_atomic(&out.join(format!("{stem}.pr.{name}.csv")), pr_csv(&c.pr).as_bytes())?;
        }
    }
    Ok(())
}

/// Scores the trained model on `val`, then writes the checkpoint, the run
/// manifest and the evaluation files under `stem`.
fn finish_training(
    cfg: &RunConfig,
    stem: &str,
    outcome: TrainOutcome,
    panel: &DgpPanel,
    mode: FeatureMode,
    val: &Dataset,
) -> Result<EvalReport> {
    let TrainOutcome { mut model, mut run } = outcome;
    model.set_mode(Mode::Eval);
    let report = evaluate(&model.probabilities(val.features())?, val.labels(), cfg.evaluate.threshold)?;
    run.checkpoint = Some(format!("{stem}.json"));
    let digest = sha256_hex(&serde_json::to_vec(&run.without_timing())?);
    let ckpt = Checkpoint {
        model,
        panel: panel.clone(),
        feature_mode: mode,
        class_names: val.class_names().to_vec(),
        training_digest: Some(digest),
    };
    save_checkpoint(&ckpt, cfg.out.join(format!("{stem}.json")))?;
    write_json(&cfg.out.join(format!("{stem}.run.json")), &run)?;
    write_eval(&cfg.out, stem, &report, val.class_names())?;
    println!(
        "{stem}: {} parameters, {} epochs in {:.1}s; validation accuracy {:.4}, AUC {:.4}",
        ckpt.model.num_parameters(),
        run.epochs,
        run.wall_clock_secs,
        report.accuracy,
        report.auc
    );
    Ok(report)
}

fn split(cfg: &RunConfig, data: &Dataset) -> Result<(Dataset, Dataset)> {
    let s = stratified_split(data, cfg.train.train_fraction, cfg.seed)?;
    Ok((data.subset(&s.train), data.subset(&s.validation)))
}

fn teacher(cfg: &RunConfig) -> Result<()> {
    let panel = read_panel(require(&cfg.data.panel, "data.panel", "--panel")?)?;
    let mode = cfg.features.mode;
    let data = load_dataset(cfg, &panel, mode, None)?;
    let (train, val) = split(cfg, &data)?;
    let spec = cfg.model_spec(ModelKind::Teacher, panel.k(), data.num_classes());
    let outcome = train_teacher(&train, Some(&val), &spec, &cfg.train.hyper(), cfg.seed)?;
    finish_training(cfg, "teacher", outcome, &panel, mode, &val).map(drop)
}

#[derive(Serialize)]
struct Comparison {
    student: &'static str,
    distilled_auc: f64,
    vanilla_auc: f64,
    distilled_accuracy: f64,
    vanilla_accuracy: f64,
}

fn distill(cfg: &RunConfig) -> Result<()> {
    let mut teacher = load_checkpoint(require(&cfg.data.teacher, "data.teacher", "--teacher")?)?;
    teacher.model.set_mode(Mode::Eval);
    // A re-screened panel replaces the teacher's own for both models.
    let panel = match &cfg.data.panel {
        Some(path) => read_panel(path)?,
        None => teacher.panel.clone(),
    };
    if panel.k() != teacher.panel.k() {
        return Err(Error::Config(format!(
            "panel has {} pairs but the teacher reads {}",
            panel.k(),
            teacher.panel.k()
        )));
    }
    let data = load_dataset(cfg, &panel, teacher.feature_mode, None)?;
    let (train, val) = split(cfg, &data)?;
    let kind = cfg.distill.student;
    let spec = cfg.model_spec(kind, panel.k(), data.num_classes());
    let arms: &[bool] = match (cfg.distill.paired, cfg.distill.vanilla) {
        (true, _) => &[false, true],
        (false, vanilla) => std::slice::from_ref(if vanilla { &true } else { &false }),
    };
    let mut reports = Vec::new();
    for &vanilla in arms {
        let dc = cfg.distill.config(vanilla);
        let outcome = distill_student(&spec, &teacher.model, &train, Some(&val), &dc, &cfg.train.hyper(), cfg.seed)?;
        let stem = format!("{}{}", kind_name(kind), if vanilla { "_vanilla" } else { "" });
        let report = finish_training(cfg, &stem, outcome, &panel, teacher.feature_mode, &val)?;
        reports.push(report);
    }
    if let [d, v] = reports.as_slice() {
        let cmp = Comparison {
            student: kind_name(kind),
            distilled_auc: d.auc,
            vanilla_auc: v.auc,
            distilled_accuracy: d.accuracy,
            vanilla_accuracy: v.accuracy,
        };
        write_json(&cfg.out.join(format!("{}.comparison.json", kind_name(kind))), &cmp)?;
        println!(
            "distilled AUC {:.6} vs vanilla AUC {:.6} (difference {:+.6})",
            d.auc,
            v.auc,
            d.auc - v.auc
        );
    }
    Ok(())
}

fn evaluate_cmd(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint(require(&cfg.data.checkpoint, "data.checkpoint", "--checkpoint")?)?;
    let data = load_dataset(cfg, &ckpt.panel, ckpt.feature_mode, Some(&ckpt.class_names))?;
    let Some(k) = cfg.evaluate.kfold else {
        let report = evaluate(&ckpt.model.probabilities(data.features())?, data.labels(), cfg.evaluate.threshold)?;
        write_eval(&cfg.out, "evaluate", &report, &ckpt.class_names)?;
        println!(
            "evaluate: n={} accuracy {:.4} precision {:.4} recall {:.4} F1 {:.4} AUC {:.4} AUPRC {:.4}",
            report.n_samples, report.accuracy, report.precision, report.recall, report.f1, report.auc, report.auprc
        );
        return Ok(());
    };
    let spec = ckpt.model.spec().clone();
    let hyper = cfg.train.hyper();
    let cv = kfold_cv_parallel(&data, k, cfg.seed, cfg.parallel, |_, train, test| {
        let mut model = train_teacher(train, None, &spec, &hyper, cfg.seed)?.model;
        model.set_mode(Mode::Eval);
        model.probabilities(test.features())
    })?;
    write_json(&cfg.out.join("cv.json"), &cv)?;
    for f in &cv.folds {
        println!("fold {}: n={} accuracy {:.4} AUC {:.4}", f.fold, f.report.n_samples, f.report.accuracy, f.report.auc);
    }
    println!(
        "{k}-fold mean: accuracy {:.4}±{:.4} F1 {:.4}±{:.4} AUC {:.4}±{:.4} AUPRC {:.4}±{:.4}",
        cv.mean.accuracy, cv.stdev.accuracy, cv.mean.f1, cv.stdev.f1, cv.mean.auc, cv.stdev.auc, cv.mean.auprc, cv.stdev.auprc
    );
    Ok(())
}

fn predict(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_checkpoint(require(&cfg.data.checkpoint, "data.checkpoint", "--checkpoint")?)?;
    let expr = read_expression(require(&cfg.data.expression, "data.expression", "--expression")?)?;
    let probs = ckpt.model.probabilities(&featurize(&expr, &ckpt.panel, ckpt.feature_mode)?)?;
    let predicted = argmax_rows(&probs);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("sample_id".to_string())
        .chain(ckpt.class_names.iter().map(|c| format!("p_{c}")))
        .chain(std::iter::once("predicted".to_string()));
    let csv_err = |e: csv::Error| Error::Data(format!("writing predictions: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for (i, id) in expr.sample_ids().iter().enumerate() {
        let row = std::iter::once(id.clone())
            .chain(probs.row(i).iter().map(|p| p.to_string()))
            .chain(std::iter::once(ckpt.class_names[predicted[i]].clone()));
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("writing predictions: {e}")))?;
    write_atomic(&cfg.out.join("predictions.csv"), &bytes)?;
    println!("predict: {} samples scored", expr.n_samples());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct ReportRow {
    name: String,
    kind: Option<ModelKind>,
    source: String,
    parameters: usize,
    compression: Option<f64>,
    accuracy: Option<f64>,
    f1: Option<f64>,
    auc: Option<f64>,
}

fn row_from_checkpoint(path: &Path) -> Result<ReportRow> {
    let ckpt = load_checkpoint(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let eval_path: PathBuf = path.with_file_name(format!("{name}.eval.json"));
    let eval: Option<EvalReport> = match fs::read(&eval_path) {
        Ok(bytes) => Some(serde_json::from_slice(&bytes)?),
        Err(_) => None,
    };
    Ok(ReportRow {
        kind: Some(ckpt.model.spec().kind),
        source: path.display().to_string(),
        parameters: ckpt.model.num_parameters(),
        compression: None,
        accuracy: eval.as_ref().map(|e| e.accuracy),
        f1: eval.as_ref().map(|e| e.f1),
        auc: eval.as_ref().map(|e| e.auc),
        name,
    })
}

fn report(cfg: &RunConfig) -> Result<()> {
    let mut rows = Vec::new();
    for path in &cfg.report.checkpoints {
        rows.push(row_from_checkpoint(path)?);
    }
    if cfg.report.presets {
        for (kind, classes) in [(ModelKind::Teacher, 3), (ModelKind::StudentTx, 2), (ModelKind::StudentMlp, 2)] {
            let spec = cfg.model_spec(kind, cfg.screen.k, classes);
            rows.push(ReportRow {
                name: kind_name(kind).into(),
                kind: Some(kind),
                source: format!("preset {} (k = {}, {classes} classes)", preset_name(cfg.preset), cfg.screen.k),
                parameters: count_parameters(&spec),
                compression: None,
                accuracy: None,
                f1: None,
                auc: None,
            });
        }
    }
    for (name, &count) in &cfg.report.params {
        match rows.iter_mut().find(|r| &r.name == name) {
            Some(r) => {
                r.parameters = count;
                r.source = "override".into();
            }
            None => rows.push(ReportRow {
                name: name.clone(),
                kind: None,
                source: "override".into(),
                parameters: count,
                compression: None,
                accuracy: None,
                f1: None,
                auc: None,
            }),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(
            "nothing to report: pass --checkpoint, --params or --presets".into(),
        ));
    }
    let teacher = match &cfg.report.teacher {
        Some(name) => rows
            .iter()
            .position(|r| &r.name == name)
            .ok_or_else(|| Error::Config(format!("teacher row `{name}` not found")))?,
        None => rows
            .iter()
            .position(|r| r.kind == Some(ModelKind::Teacher))
            .or_else(|| rows.iter().position(|r| r.name == "teacher"))
            .unwrap_or(0),
    };
    let t = rows.remove(teacher);
    rows.insert(0, t);
    let teacher_params = rows[0].parameters;
    for r in rows.iter_mut().skip(1) {
        r.compression = Some(compression_ratio(r.parameters, teacher_params)?);
    }
    write_json(&cfg.out.join("report.json"), &rows)?;
    let opt = |v: Option<f64>, pct: bool| match v {
        Some(x) if pct => format!("{:.2}%", 100.0 * x),
        Some(x) => format!("{x:.4}"),
        None => "-".into(),
    };
    let mut table = String::from("model,parameters,compression,accuracy,f1,auc\n");
    println!(
        "{:<20} {:>12} {:>12} {:>9} {:>7} {:>7}",
        "model", "parameters", "compression", "accuracy", "f1", "auc"
    );
    for r in &rows {
        let cells = [opt(r.compression, true), opt(r.accuracy, false), opt(r.f1, false), opt(r.auc, false)];
        println!(
            "{:<20} {:>12} {:>12} {:>9} {:>7} {:>7}",
            r.name, r.parameters, cells[0], cells[1], cells[2], cells[3]
        );
        table.push_str(&format!("{},{},{}\n", r.name, r.parameters, cells.join(",")));
    }
    write_atomic(&cfg.out.join("report.csv"), table.as_bytes())?;
    println!("compression measured against `{}`", rows[0].name);
    Ok(())
}
