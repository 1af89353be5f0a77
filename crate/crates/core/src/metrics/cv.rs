use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{evaluate, EvalReport, DEFAULT_THRESHOLD};
use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::rng::stream;

/// Stratified, seeded assignment of sample indices to `k` folds. Each class
/// is shuffled and dealt round-robin, continuing where the previous class
/// stopped so fold sizes differ by at most one.
pub fn stratified_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    let groups = data.indices_by_class();
    let present = groups.iter().filter(|g| !g.is_empty()).count();
    if present < 2 {
        return Err(Error::Data("cross-validation needs at least two classes".into()));
    }
    for (class, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < k {
            return Err(Error::Data(format!(
                "class `{}` has {} samples, too few to stratify into {k} folds",
                data.class_names()[class],
                g.len()
            )));
        }
    }
    let mut rng = stream(seed, "kfold");
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub auprc: f64,
}

impl MetricSummary {
    fn of(r: &EvalReport) -> Self {
        Self {
            accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            auc: r.auc,
            auprc: r.auprc,
        }
    }

    fn map(items: &[MetricSummary], f: impl Fn(&[f64]) -> f64) -> Self {
        let pick = |g: fn(&MetricSummary) -> f64| f(&items.iter().map(g).collect::<Vec<_>>());
        Self {
            accuracy: pick(|m| m.accuracy),
            precision: pick(|m| m.precision),
            recall: pick(|m| m.recall),
            f1: pick(|m| m.f1),
            auc: pick(|m| m.auc),
            auprc: pick(|m| m.auprc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub mean: MetricSummary,
    /// Sample standard deviation across folds.
    pub stdev: MetricSummary,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn stdev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn train_test(data: &Dataset, folds: &[Vec<usize>], fold: usize) -> (Dataset, Dataset) {
    let train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fold)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let mut train = train;
    train.sort_unstable();
    (data.subset(&train), data.subset(&folds[fold]))
}

fn fold_report(fold: usize, test: &Dataset, idx: &[usize], probs: Tensor) -> Result<FoldReport> {
    if probs.shape() != (test.len(), test.num_classes()) {
        return Err(Error::Shape {
            op: "kfold_cv trainer output",
            left: probs.shape(),
            right: (test.len(), test.num_classes()),
        });
    }
    Ok(FoldReport {
        fold,
        test_indices: idx.to_vec(),
        report: evaluate(&probs, test.labels(), DEFAULT_THRESHOLD)?,
    })
}

fn summarize(k: usize, seed: u64, folds: Vec<FoldReport>) -> CvReport {
    let items: Vec<MetricSummary> = folds.iter().map(|f| MetricSummary::of(&f.report)).collect();
    CvReport {
        k,
        seed,
        mean: MetricSummary::map(&items, mean),
        stdev: MetricSummary::map(&items, stdev),
        folds,
    }
}

/// Runs `trainer(fold, train, test)` on each fold in order; the trainer
/// returns class probabilities for the held-out samples.
pub fn kfold_cv<F>(data: &Dataset, k: usize, seed: u64, mut trainer: F) -> Result<CvReport>
where
    F: FnMut(usize, &Dataset, &Dataset) -> Result<Tensor>,
{
    let folds = stratified_folds(data, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for f in 0..k {
        let (train, test) = train_test(data, &folds, f);
        let probs = trainer(f, &train, &test)?;
        reports.push(fold_report(f, &test, &folds[f], probs)?);
    }
    Ok(summarize(k, seed, reports))
}

/// As [`kfold_cv`], running folds on a pool of `threads` workers. Results are
/// ordered by fold index.
pub fn kfold_cv_parallel<F>(
    data: &Dataset,
    k: usize,
    seed: u64,
    threads: usize,
    trainer: F,
) -> Result<CvReport>
where
    F: Fn(usize, &Dataset, &Dataset) -> Result<Tensor> + Sync,
{
    if threads <= 1 {
        return kfold_cv(data, k, seed, trainer);
    }
    let folds = stratified_folds(data, k, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let reports: Result<Vec<FoldReport>> = pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|f| {
                let (train, test) = train_test(data, &folds, f);
                let probs = trainer(f, &train, &test)?;
                fold_report(f, &test, &folds[f], probs)
            })
            .collect()
    });
    Ok(summarize(k, seed, reports?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::default_class_names;

    fn toy(labels: Vec<usize>) -> Dataset {
        let n = labels.len();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        Dataset::new(Tensor::zeros(n, 1), labels, ids, default_class_names(2)).unwrap()
    }

    #[test]
    fn eight_samples_four_folds() {
        let d = toy(vec![0, 0, 0, 0, 1, 1, 1, 1]);
        let folds = stratified_folds(&d, 4, 11).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(d.subset(f).class_counts(), vec![1, 1]);
        }
        assert_eq!(folds, stratified_folds(&d, 4, 11).unwrap());
    }

    #[test]
    fn too_small_class_is_named() {
        let d = toy(vec![0, 0, 0, 0, 1, 1, 1]);
        let err = stratified_folds(&d, 4, 0).unwrap_err();
        assert!(err.to_string().contains("infected"), "{err}");
        assert!(stratified_folds(&d, 1, 0).is_err());
    }

    #[test]
    fn majority_trainer_accuracy_is_prevalence() {
        let labels: Vec<usize> = (0..40).map(|i| (i % 4 == 0) as usize).collect();
        let d = toy(labels);
        let cv = kfold_cv(&d, 4, 5, |_, _, test| {
            let mut p = Tensor::zeros(test.len(), 2);
            (0..test.len()).for_each(|r| p.set(r, 0, 1.0));
            Ok(p)
        })
        .unwrap();
        assert_eq!(cv.folds.len(), 4);
        assert!((cv.mean.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(cv.mean.auc, 0.5);
    }

    #[test]
    fn parallel_matches_sequential() {
        let labels: Vec<usize> = (0..24).map(|i| i % 2).collect();
        let d = toy(labels);
        let trainer = |f: usize, _: &Dataset, test: &Dataset| {
            let mut p = Tensor::zeros(test.len(), 2);
            for (r, &l) in test.labels().iter().enumerate() {
                let s = if (r + f).is_multiple_of(3) { 0.4 } else { 0.3 + 0.4 * l as f64 };
                p.set(r, 1, s);
                p.set(r, 0, 1.0 - s);
            }
            Ok(p)
        };
        let a = kfold_cv(&d, 3, 9, trainer).unwrap();
        let b = kfold_cv_parallel(&d, 3, 9, 3, trainer).unwrap();
        assert_eq!(a, b);
    }
}
