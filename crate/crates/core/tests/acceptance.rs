//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng as _;

use tsgps_core::engine::{gradient_check, softmax_rows, Graph, NodeId, Tensor};
use tsgps_core::io::{
    default_class_names, generate_synthetic, load_checkpoint, panel_csv, save_checkpoint,
    sha256_hex, stratified_split, Checkpoint, Dataset, SynthConfig, SynthLayout,
};
use tsgps_core::metrics::{
    confusion, evaluate, roc_auc, scalar_metrics, stratified_folds, ConfusionCounts, ScoredSet,
    DEFAULT_THRESHOLD,
};
use tsgps_core::model::{
    compression_ratio, count_parameters, ModelInstance, ModelKind, ModelSpec, Preset,
};
use tsgps_core::rng::stream;
use tsgps_core::screen::{
    fisher_exact_two_sided, fisher_point_probability, select_dgps, ContingencyTable, DgpPanel,
    FeatureMode, LabelVector,
};
use tsgps_core::train::{
    cross_entropy, distill_loss, distill_loss_from_targets, distill_student, total_loss_value,
    train_teacher, train_vanilla, DistillConfig, KdForm, TrainHyper,
};
use tsgps_core::Result;

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration) -> bool {
    elapsed <= budget
}

// ---------------------------------------------------------------------------
// 1. Fisher exact test against an exact integer enumeration

fn factorials() -> Vec<u128> {
    let mut f = vec![1u128; 26];
    for i in 1..26 {
        f[i] = f[i - 1] * i as u128;
    }
    f
}

fn choose(f: &[u128], n: u64, k: u64) -> u128 {
    f[n as usize] / (f[k as usize] * f[(n - k) as usize])
}

/// Exact numerators `C(r1, a)·C(r2, c1 − a)` over the support of `a`.
fn support(f: &[u128], r1: u64, r2: u64, c1: u64) -> Vec<(u64, u128)> {
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    (lo..=hi).map(|a| (a, choose(f, r1, a) * choose(f, r2, c1 - a))).collect()
}

fn criterion_fisher() -> Outcome {
    let start = Instant::now();
    let f = factorials();
    let mut worst_point: f64 = 0.0;
    let mut worst_two: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut tables = 0u64;
    for n in 0..=25u64 {
        for r1 in 0..=n {
            let r2 = n - r1;
            for c1 in 0..=n {
                let sup = support(&f, r1, r2, c1);
                let denom = choose(&f, n, c1) as f64;
                let mut total = 0.0;
                for &(a, num) in &sup {
                    let t = ContingencyTable::new(a, r1 - a, c1 - a, r2 - (c1 - a));
                    let exact = num as f64 / denom;
                    let got = fisher_point_probability(&t);
                    total += got;
                    worst_point = worst_point.max((got - exact).abs());

                    let cutoff = num as f64 * (1.0 + 1e-7);
                    let tail: u128 = sup
                        .iter()
                        .filter(|(_, m)| (*m as f64) <= cutoff)
                        .map(|(_, m)| *m)
                        .sum();
                    let expected = (tail as f64 / denom).min(1.0);
                    let out = fisher_exact_two_sided(&t);
                    let expected = if out.degenerate { 1.0 } else { expected };
                    worst_two = worst_two.max((out.p_value - expected).abs());
                    tables += 1;
                }
                worst_sum = worst_sum.max((total - 1.0).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_point <= 1e-10
            && worst_two <= 1e-10
            && worst_sum <= 1e-10
            && within(elapsed, Duration::from_secs(60)),
        format!(
            "{tables} tables; max |Δ| point {worst_point:.1e}, two-sided {worst_two:.1e}, margin sum {worst_sum:.1e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. Gradient checks

struct Primitive {
    name: &'static str,
    shapes: Vec<(usize, usize)>,
    build: Box<dyn Fn(&mut Graph, &[NodeId], &Tensor) -> Result<NodeId>>,
    out_shape: (usize, usize),
}

/// Reduces a non-scalar output to a scalar with fixed random weights.
fn weighted_sum(g: &mut Graph, y: NodeId, w: &Tensor) -> Result<NodeId> {
    let w = g.constant(w.clone());
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn primitives() -> Vec<Primitive> {
    let labels = vec![2usize, 0, 1, 2];
    let mut q_rng = stream(99, "kd-targets");
    let targets = softmax_rows(&Tensor::normal(4, 3, 0.0, 2.0, &mut q_rng), 1.0);
    vec![
        Primitive {
            name: "matmul",
            shapes: vec![(3, 4), (4, 5)],
            out_shape: (3, 5),
            build: Box::new(|g, ids, w| {
                let y = g.matmul(ids[0], ids[1])?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "softmax",
            shapes: vec![(3, 5)],
            out_shape: (3, 5),
            build: Box::new(|g, ids, w| {
                let y = g.softmax_rows(ids[0], 1.7)?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "log-softmax",
            shapes: vec![(3, 5)],
            out_shape: (3, 5),
            build: Box::new(|g, ids, w| {
                let y = g.log_softmax_rows(ids[0], 0.8)?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "gelu",
            shapes: vec![(4, 4)],
            out_shape: (4, 4),
            build: Box::new(|g, ids, w| {
                let y = g.gelu(ids[0]);
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "layer-norm",
            shapes: vec![(3, 6), (1, 6), (1, 6)],
            out_shape: (3, 6),
            build: Box::new(|g, ids, w| {
                let y = g.layer_norm(ids[0], ids[1], ids[2], 1e-5)?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "attention",
            shapes: vec![(6, 4), (6, 4), (6, 4)],
            out_shape: (6, 4),
            build: Box::new(|g, ids, w| {
                let y = g.attention(ids[0], ids[1], ids[2], 3, 2)?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "linear",
            shapes: vec![(3, 4), (4, 2), (1, 2)],
            out_shape: (3, 2),
            build: Box::new(|g, ids, w| {
                let y = g.linear(ids[0], ids[1], ids[2])?;
                weighted_sum(g, y, w)
            }),
        },
        Primitive {
            name: "cross-entropy",
            shapes: vec![(4, 3)],
            out_shape: (1, 1),
            build: Box::new(move |g, ids, _| cross_entropy(g, ids[0], &labels)),
        },
        Primitive {
            name: "distill-kl",
            shapes: vec![(4, 3)],
            out_shape: (1, 1),
            build: Box::new(move |g, ids, _| {
                distill_loss_from_targets(g, &targets, ids[0], 5.0, KdForm::Kl)
            }),
        },
    ]
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(2, "gradient-points");
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut failed = Vec::new();
    for prim in primitives() {
        let mut prim_worst: f64 = 0.0;
        for _ in 0..20 {
            let params: Vec<Tensor> = prim
                .shapes
                .iter()
                .map(|&(r, c)| Tensor::normal(r, c, 0.0, 1.0, &mut rng))
                .collect();
            let w = Tensor::normal(prim.out_shape.0, prim.out_shape.1, 0.0, 1.0, &mut rng);
            let report = gradient_check(|g, ids| (prim.build)(g, ids, &w), &params, 1e-5, 1e-4)
                .map_err(|e| format!("{}: {e}", prim.name))?;
            prim_worst = prim_worst.max(report.max_rel_error);
        }
        if prim_worst > 1e-4 {
            failed.push(prim.name);
        }
        worst.push((prim.name, prim_worst));
    }
    let elapsed = start.elapsed();
    let summary: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(
        failed.is_empty() && within(elapsed, Duration::from_secs(120)),
        format!(
            "9 primitives x 20 points, max rel error: {}; {:.1}s",
            summary.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. ROC AUC against the Mann-Whitney statistic

fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut p, mut n) = (0.0, 0usize, 0usize);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            n += 1;
            continue;
        }
        p += 1;
        for (j, &lj) in labels.iter().enumerate() {
            if !lj {
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    num / (p * n) as f64
}

fn criterion_auc() -> Outcome {
    let mut rng = stream(3, "auc-sets");
    let mut worst: f64 = 0.0;
    let mut tie_sets = 0;
    for set in 0..100 {
        let n = rng.random_range(2..=200usize);
        let tie_heavy = set % 2 == 1;
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s: f64 = rng.random();
                if tie_heavy { (s * 5.0).floor() / 5.0 } else { s }
            })
            .collect();
        if tie_heavy {
            tie_sets += 1;
        }
        let auc = roc_auc(&ScoredSet::new(scores.clone(), labels.clone()).unwrap())
            .map_err(|e| e.to_string())?
            .auc;
        worst = worst.max((auc - mann_whitney(&scores, &labels)).abs());
    }
    check(
        worst <= 1e-9,
        format!("100 sets ({tie_sets} tie-heavy), max |AUC - MW| {worst:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// 4. Planted-pair recovery

fn unordered(a: &str, b: &str) -> (String, String) {
    if a < b { (a.into(), b.into()) } else { (b.into(), a.into()) }
}

fn criterion_recovery() -> Outcome {
    let cfg = SynthConfig {
        n_samples_per_class: vec![300, 300],
        n_genes: 300,
        planted_pairs: 15,
        flip_noise: 0.1,
        seed: 4,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let planted: HashSet<(String, String)> =
        data.planted.iter().map(|p| unordered(&p.g1, &p.g2)).collect();
    let hits = |panel: &DgpPanel| {
        panel
            .pairs()
            .iter()
            .filter(|p| planted.contains(&unordered(&p.g1, &p.g2)))
            .count()
    };
    let panel = select_dgps(&data.expr, &data.labels, &data.catalog, 15).map_err(|e| e.to_string())?;
    let recovered = hits(&panel);

    let mut rng = stream(cfg.seed, "label-permutations");
    let mut null_seeds_with_hit = 0;
    for _ in 0..20 {
        let mut labels = data.labels.labels.clone();
        labels.shuffle(&mut rng);
        let shuffled = LabelVector::new(data.labels.sample_ids.clone(), labels, 2).unwrap();
        let panel = select_dgps(&data.expr, &shuffled, &data.catalog, 15).map_err(|e| e.to_string())?;
        if hits(&panel) > 0 {
            null_seeds_with_hit += 1;
        }
    }
    check(
        recovered >= 13 && null_seeds_with_hit <= 2,
        format!(
            "recovered {recovered}/15 planted pairs; shuffled labels put a planted pair in the top 15 in {null_seeds_with_hit}/20 permutations"
        ),
    )
}

// ---------------------------------------------------------------------------
// Shared teacher fixture (criteria 5 and 7)

const TEACHER_EPOCHS: usize = 10;

struct TeacherFixture {
    layout: SynthLayout,
    panel: DgpPanel,
    teacher: ModelInstance,
    validation: Dataset,
    elapsed: Duration,
}

fn teacher_config() -> SynthConfig {
    SynthConfig {
        n_samples_per_class: vec![300, 300, 300],
        seed: 7,
        ..SynthConfig::default()
    }
}

fn teacher_fixture() -> &'static std::result::Result<TeacherFixture, String> {
    static FIXTURE: OnceLock<std::result::Result<TeacherFixture, String>> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let start = Instant::now();
        let cfg = teacher_config();
        let build = || -> Result<TeacherFixture> {
            let layout = SynthLayout::new(&cfg)?;
            let data = generate_synthetic(&cfg)?;
            let panel = select_dgps(&data.expr, &data.labels, &data.catalog, 35)?;
            let ds = Dataset::from_expression(
                &data.expr,
                &data.labels,
                &panel,
                FeatureMode::Binary,
                default_class_names(3),
            )?;
            let split = stratified_split(&ds, 0.8, cfg.seed)?;
            let (train, val) = (ds.subset(&split.train), ds.subset(&split.validation));
            let spec = ModelSpec::preset(Preset::Desk, ModelKind::Teacher, panel.k(), 3);
            let hyper = TrainHyper {
                epochs: TEACHER_EPOCHS,
                ..TrainHyper::teacher()
            };
            let out = train_teacher(&train, None, &spec, &hyper, cfg.seed)?;
            Ok(TeacherFixture {
                layout,
                panel,
                teacher: out.model,
                validation: val,
                elapsed: start.elapsed(),
            })
        };
        build().map_err(|e| e.to_string())
    })
}

fn criterion_teacher() -> Outcome {
    let fx = teacher_fixture().as_ref().map_err(Clone::clone)?;
    let probs = fx.teacher.probabilities(fx.validation.features()).map_err(|e| e.to_string())?;
    let report = evaluate(&probs, fx.validation.labels(), DEFAULT_THRESHOLD).map_err(|e| e.to_string())?;
    let auc_b = report.per_class[1].auc.unwrap_or(0.0);
    let auc_v = report.per_class[2].auc.unwrap_or(0.0);
    check(
        auc_b >= 0.95 && auc_v >= 0.95 && within(fx.elapsed, Duration::from_secs(300)),
        format!(
            "n=900, {TEACHER_EPOCHS} epochs, held-out one-vs-rest AUC bacterial {auc_b:.4}, viral {auc_v:.4} (accuracy {:.3}); {:.1}s",
            report.accuracy,
            fx.elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Distillation benefit

fn binary_cohort(fx: &TeacherFixture, counts: &[usize], seed: u64, name: &str) -> Result<Dataset> {
    let mut rng = stream(seed, name);
    let (expr, labels) = fx.layout.sample_cohort(counts, teacher_config().flip_noise, name, &mut rng)?;
    let ds = Dataset::from_expression(&expr, &labels, &fx.panel, FeatureMode::Binary, default_class_names(3))?;
    ds.relabel(ds.labels().to_vec(), vec!["health".into(), "bacterial".into()])
}

fn criterion_distillation() -> Outcome {
    let fx = teacher_fixture().as_ref().map_err(Clone::clone)?;
    let start = Instant::now();
    let spec = ModelSpec::preset(Preset::Desk, ModelKind::StudentMlp, fx.panel.k(), 2);
    let hyper = TrainHyper::student();
    let distilled_cfg = DistillConfig::default();
    let vanilla_cfg = DistillConfig { w_distill: 0.0, ..DistillConfig::default() };
    let (mut sum_d, mut sum_v, mut wins) = (0.0, 0.0, 0);
    for seed in 0..20u64 {
        let run = || -> Result<(f64, f64)> {
            let train = binary_cohort(fx, &[40, 40, 0], seed, "student-train")?;
            let val = binary_cohort(fx, &[200, 200, 0], seed, "student-val")?;
            let auc = |m: &ModelInstance| -> Result<f64> {
                Ok(evaluate(&m.probabilities(val.features())?, val.labels(), DEFAULT_THRESHOLD)?.auc)
            };
            let d = distill_student(&spec, &fx.teacher, &train, None, &distilled_cfg, &hyper, seed)?;
            let v = distill_student(&spec, &fx.teacher, &train, None, &vanilla_cfg, &hyper, seed)?;
            Ok((auc(&d.model)?, auc(&v.model)?))
        };
        let (d, v) = run().map_err(|e| e.to_string())?;
        sum_d += d;
        sum_v += v;
        if d >= v {
            wins += 1;
        }
    }
    let elapsed = start.elapsed() + fx.elapsed;
    let (mean_d, mean_v) = (sum_d / 20.0, sum_v / 20.0);
    check(
        mean_d >= mean_v && wins >= 13 && within(elapsed, Duration::from_secs(900)),
        format!(
            "20 paired seeds, 80 training samples: mean AUC distilled {mean_d:.5} vs vanilla {mean_v:.5}, distilled wins or ties {wins}/20; {:.1}s incl. teacher",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. Compression arithmetic

fn criterion_compression() -> Outcome {
    let teacher = 18_142_949;
    let r_tx = compression_ratio(8_178_842, teacher).map_err(|e| e.to_string())?;
    let r_mlp = compression_ratio(797_925, teacher).map_err(|e| e.to_string())?;
    let mut ok = (r_tx - 0.549).abs() <= 0.0005 && (r_mlp - 0.956).abs() <= 0.0005;
    let mut detail = vec![format!("published ratios {:.2}% / {:.2}%", 100.0 * r_tx, 100.0 * r_mlp)];
    for preset in [Preset::Desk, Preset::PaperScale] {
        let count = |kind, classes| count_parameters(&ModelSpec::preset(preset, kind, 35, classes));
        let (t, s_tx, s_mlp) = (
            count(ModelKind::Teacher, 3),
            count(ModelKind::StudentTx, 2),
            count(ModelKind::StudentMlp, 2),
        );
        ok &= s_mlp < s_tx && s_tx < t;
        detail.push(format!("{preset:?}: teacher {t}, student_tx {s_tx}, student_mlp {s_mlp}"));
    }
    check(ok, detail.join("; "))
}

// ---------------------------------------------------------------------------
// 8. Determinism and checkpoint round trip

fn criterion_determinism() -> Outcome {
    let run = || -> Result<(String, String, Vec<u8>, Vec<u8>, Checkpoint, Tensor)> {
        let cfg = SynthConfig {
            n_samples_per_class: vec![60, 60],
            seed: 8,
            ..SynthConfig::default()
        };
        let data = generate_synthetic(&cfg)?;
        let panel = select_dgps(&data.expr, &data.labels, &data.catalog, 35)?;
        let ds = Dataset::from_expression(&data.expr, &data.labels, &panel, FeatureMode::Binary, default_class_names(2))?;
        let spec = ModelSpec::preset(Preset::Desk, ModelKind::StudentTx, panel.k(), 2);
        let hyper = TrainHyper { epochs: 2, ..TrainHyper::student() };
        let out = train_teacher(&ds, Some(&ds), &spec, &hyper, 8)?;
        let trace = serde_json::to_string(&out.run.trace)?;
        let ckpt = Checkpoint {
            model: out.model,
            panel: panel.clone(),
            feature_mode: FeatureMode::Binary,
            class_names: default_class_names(2),
            training_digest: Some(sha256_hex(serde_json::to_string(&out.run.without_timing())?.as_bytes())),
        };
        let dir = tempfile::tempdir().map_err(|e| tsgps_core::Error::Data(e.to_string()))?;
        let path = dir.path().join("model.json");
        save_checkpoint(&ckpt, &path)?;
        let manifest = std::fs::read(&path).map_err(|e| tsgps_core::Error::Data(e.to_string()))?;
        let blob = std::fs::read(path.with_extension("bin")).map_err(|e| tsgps_core::Error::Data(e.to_string()))?;
        let loaded = load_checkpoint(&path)?;
        let logits = ckpt.model.logits(ds.features())?;
        let reloaded = loaded.model.logits(ds.features())?;
        if logits.data().iter().zip(reloaded.data()).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(tsgps_core::Error::Data("reloaded forward differs".into()));
        }
        Ok((panel_csv(&panel), trace, manifest, blob, loaded, logits))
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    let same_panel = a.0 == b.0;
    let same_trace = a.1 == b.1;
    let same_ckpt = a.2 == b.2 && a.3 == b.3;
    let same_forward = a.5.data().iter().zip(b.5.data()).all(|(x, y)| x.to_bits() == y.to_bits());
    check(
        same_panel && same_trace && same_ckpt && same_forward && a.4 == b.4,
        format!(
            "panels identical {same_panel}, traces identical {same_trace}, checkpoint bytes identical {same_ckpt}, reload forward bit-exact {same_forward}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Loss identities

fn criterion_losses() -> Outcome {
    let mut rng = stream(9, "loss-identities");
    let mut kl_self: f64 = 0.0;
    for _ in 0..20 {
        let z = Tensor::normal(8, 3, 0.0, 3.0, &mut rng);
        let mut g = Graph::new();
        let (t, s) = (g.constant(z.clone()), g.variable(z));
        let l = distill_loss(&mut g, t, s, 5.0, KdForm::Kl).map_err(|e| e.to_string())?;
        kl_self = kl_self.max(g.value(l).item().abs());
    }
    let mut ce_uniform: f64 = 0.0;
    for c in 2..=10usize {
        let mut g = Graph::new();
        let z = g.variable(Tensor::full(5, c, 0.37));
        let labels: Vec<usize> = (0..5).map(|i| i % c).collect();
        let l = cross_entropy(&mut g, z, &labels).map_err(|e| e.to_string())?;
        ce_uniform = ce_uniform.max((g.value(l).item() - (c as f64).ln()).abs());
    }
    let total = total_loss_value(1.0, 1.0, 0.2, 0.8);

    let vanilla_match = (|| -> Result<bool> {
        let mut rng = stream(9, "loss-data");
        let n = 48;
        let x = Tensor::normal(n, 6, 0.0, 1.0, &mut rng);
        let y3: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let three = Dataset::new(x.clone(), y3, ids.clone(), default_class_names(3))?;
        let teacher_spec = ModelSpec::preset(Preset::Desk, ModelKind::StudentMlp, 6, 3);
        let hyper = TrainHyper { epochs: 5, ..TrainHyper::student() };
        let teacher = train_teacher(&three, None, &teacher_spec, &hyper, 1)?.model;
        let y2: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let two = Dataset::new(x, y2, ids, default_class_names(2))?;
        let spec = ModelSpec::preset(Preset::Desk, ModelKind::StudentMlp, 6, 2);
        let cfg = DistillConfig { w_distill: 0.0, ..DistillConfig::default() };
        let d = distill_student(&spec, &teacher, &two, Some(&two), &cfg, &hyper, 2)?;
        let v = train_vanilla(&spec, &two, Some(&two), cfg.w_ce, &hyper, 2)?;
        Ok(d.run.trace == v.run.trace)
    })()
    .map_err(|e| e.to_string())?;

    check(
        kl_self <= 1e-9 && ce_uniform <= 1e-12 && total == 1.0 && vanilla_match,
        format!(
            "KL self-divergence {kl_self:.1e}, |CE(uniform) - ln C| {ce_uniform:.1e}, total_loss(1,1,0.2,0.8) = {total}, zero-weight trace equals vanilla {vanilla_match}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Metric hand cases

fn criterion_metrics() -> Outcome {
    let scores = vec![0.9, 0.8, 0.7, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01];
    let labels = vec![true, true, false, true, false, false, false, false, false, false];
    let c = confusion(&ScoredSet::new(scores, labels).unwrap(), 0.65);
    let m = scalar_metrics(&c);
    let counts_ok = c == ConfusionCounts { tp: 2, tn: 6, fp: 1, fn_: 1 };
    let metrics_ok = m.accuracy == 0.8
        && m.precision == 2.0 / 3.0
        && m.recall == 2.0 / 3.0
        && m.f1 == 2.0 * (2.0 / 3.0) * (2.0 / 3.0) / (4.0 / 3.0);

    let ids = (0..8).map(|i| format!("s{i}")).collect();
    let ds = Dataset::new(Tensor::zeros(8, 1), vec![0, 1, 0, 1, 0, 1, 0, 1], ids, default_class_names(2)).unwrap();
    let folds = stratified_folds(&ds, 4, 10).map_err(|e| e.to_string())?;
    let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
    all.sort_unstable();
    let covering = all == (0..8).collect::<Vec<_>>();
    let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    check(
        counts_ok && metrics_ok && covering && sizes == vec![2; 4],
        format!(
            "confusion {c:?}; acc {} precision {} recall {} f1 {}; 4 folds of sizes {sizes:?}, disjoint and covering {covering}",
            m.accuracy, m.precision, m.recall, m.f1
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Fisher oracle equivalence", criterion_fisher),
        ("Gradient fidelity", criterion_gradients),
        ("AUC oracle equivalence", criterion_auc),
        ("Planted-pair recovery", criterion_recovery),
        ("Distillation benefit", criterion_distillation),
        ("Compression arithmetic", criterion_compression),
        ("Teacher trainability", criterion_teacher),
        ("Determinism and round-trip", criterion_determinism),
        ("Loss identities", criterion_losses),
        ("Metric hand-cases", criterion_metrics),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2}. {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
