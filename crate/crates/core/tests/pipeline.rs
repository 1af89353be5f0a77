use tsgps_core::io::{
    default_class_names, generate_synthetic, load_checkpoint, save_checkpoint, stratified_split,
    Checkpoint, Dataset, SynthConfig,
};
use tsgps_core::metrics::{evaluate, kfold_cv};
use tsgps_core::model::{ModelKind, ModelSpec, Mode, Preset};
use tsgps_core::screen::{select_dgps, FeatureMode};
use tsgps_core::train::{distill_student, train_teacher, train_vanilla, DistillConfig, TrainHyper};

fn small_spec(kind: ModelKind, k: usize, classes: usize) -> ModelSpec {
    let mut spec = ModelSpec::preset(Preset::Desk, kind, k, classes);
    if kind != ModelKind::StudentMlp {
        spec.d_model_1 = 10;
        spec.encoder_layers_1 = 1;
    }
    if kind == ModelKind::Teacher {
        spec.d_model_2 = 20;
        spec.encoder_layers_2 = 1;
    }
    spec
}

#[test]
fn synthetic_cohort_to_distilled_student() {
    let cfg = SynthConfig {
        n_samples_per_class: vec![100, 100, 100],
        n_genes: 80,
        n_pathways: 8,
        pathway_size: 8,
        planted_pairs: 8,
        flip_noise: 0.05,
        seed: 21,
    };
    let data = generate_synthetic(&cfg).unwrap();
    let panel = select_dgps(&data.expr, &data.labels, &data.catalog, 8).unwrap();
    let planted: Vec<(String, String)> = data.planted.iter().map(|p| (p.g1.clone(), p.g2.clone())).collect();
    let hits = panel
        .pairs()
        .iter()
        .filter(|p| {
            planted.contains(&(p.g1.clone(), p.g2.clone())) || planted.contains(&(p.g2.clone(), p.g1.clone()))
        })
        .count();
    assert!(hits >= 6, "only {hits}/8 planted pairs recovered");

    let ds = Dataset::from_expression(&data.expr, &data.labels, &panel, FeatureMode::Binary, default_class_names(3)).unwrap();
    let split = stratified_split(&ds, 0.8, 21).unwrap();
    let (train, val) = (ds.subset(&split.train), ds.subset(&split.validation));
    let hyper = TrainHyper { epochs: 15, ..TrainHyper::teacher() };
    let outcome = train_teacher(&train, Some(&val), &small_spec(ModelKind::Teacher, 8, 3), &hyper, 21).unwrap();
    assert_eq!(outcome.run.trace.len(), 15);
    let mut teacher = outcome.model;
    teacher.set_mode(Mode::Eval);
    let report = evaluate(&teacher.probabilities(val.features()).unwrap(), val.labels(), 0.5).unwrap();
    assert!(report.auc > 0.8, "teacher AUC {}", report.auc);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("teacher.json");
    let ckpt = Checkpoint {
        model: teacher.clone(),
        panel: panel.clone(),
        feature_mode: FeatureMode::Binary,
        class_names: default_class_names(3),
        training_digest: None,
    };
    save_checkpoint(&ckpt, &path).unwrap();
    let reloaded = load_checkpoint(&path).unwrap();
    assert_eq!(reloaded.model.logits(val.features()).unwrap(), teacher.logits(val.features()).unwrap());

    let binary = |d: &Dataset| {
        d.relabel(d.labels().iter().map(|&l| (l > 0) as usize).collect(), default_class_names(2)).unwrap()
    };
    let (btrain, bval) = (binary(&train), binary(&val));
    let student = small_spec(ModelKind::StudentMlp, 8, 2);
    let shyper = TrainHyper { epochs: 10, ..TrainHyper::student() };
    let distilled = distill_student(&student, &teacher, &btrain, Some(&bval), &DistillConfig::default(), &shyper, 3).unwrap();
    let vanilla = train_vanilla(&student, &btrain, Some(&bval), 0.8, &shyper, 3).unwrap();
    let zero = DistillConfig { w_distill: 0.0, ..DistillConfig::default() };
    let zero_run = distill_student(&student, &teacher, &btrain, Some(&bval), &zero, &shyper, 3).unwrap();
    assert_eq!(zero_run.run.trace, vanilla.run.trace);
    assert_ne!(distilled.run.trace, vanilla.run.trace);
    assert_eq!(distilled.run.distill.as_ref().map(|d| d.temperature), Some(5.0));
}

#[test]
fn cross_validation_reports_every_fold() {
    let cfg = SynthConfig {
        n_samples_per_class: vec![20, 20],
        n_genes: 40,
        n_pathways: 4,
        pathway_size: 6,
        planted_pairs: 4,
        flip_noise: 0.1,
        seed: 5,
    };
    let data = generate_synthetic(&cfg).unwrap();
    let panel = select_dgps(&data.expr, &data.labels, &data.catalog, 4).unwrap();
    let ds = Dataset::from_expression(&data.expr, &data.labels, &panel, FeatureMode::Binary, default_class_names(2)).unwrap();
    let spec = small_spec(ModelKind::StudentMlp, 4, 2);
    let hyper = TrainHyper { epochs: 5, ..TrainHyper::student() };
    let cv = kfold_cv(&ds, 4, 5, |_, train, test| {
        let mut m = train_teacher(train, None, &spec, &hyper, 5)?.model;
        m.set_mode(Mode::Eval);
        m.probabilities(test.features())
    })
    .unwrap();
    assert_eq!(cv.folds.len(), 4);
    assert_eq!(cv.folds.iter().map(|f| f.report.n_samples).sum::<usize>(), 40);
    assert!(cv.mean.auc > 0.5 && cv.stdev.auc >= 0.0);
}
