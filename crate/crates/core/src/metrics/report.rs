use serde::{Deserialize, Serialize};

use super::binary::{
    confusion, pr_auprc, roc_auc, scalar_metrics, ConfusionCounts, PrPoint, RocPoint, ScoredSet,
};
use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Positive-class probability cut-off for binary scalar metrics.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub auc: Option<f64>,
    pub auprc: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
}

/// Evaluation of predicted class probabilities. For two classes the scalar
/// metrics come from thresholding the class-1 probability; for more classes
/// accuracy is argmax-based and the rest are macro averages of one-vs-rest
/// results in `per_class`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub num_classes: usize,
    pub threshold: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    pub auc: f64,
    pub auprc: f64,
    pub confusion: Option<ConfusionCounts>,
    pub degenerate: Vec<String>,
    pub roc: Vec<RocPoint>,
    pub pr: Vec<PrPoint>,
    pub per_class: Vec<ClassReport>,
}

/// Argmax per row; ties go to the lowest class index.
pub fn argmax_rows(probs: &Tensor) -> Vec<usize> {
    (0..probs.rows())
        .map(|r| {
            let row = probs.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn column(probs: &Tensor, c: usize) -> Vec<f64> {
    (0..probs.rows()).map(|r| probs.get(r, c)).collect()
}

pub fn evaluate(probs: &Tensor, labels: &[usize], threshold: f64) -> Result<EvalReport> {
    if probs.rows() != labels.len() {
        return Err(Error::Shape {
            op: "evaluate",
            left: probs.shape(),
            right: (labels.len(), 1),
        });
    }
    if labels.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    let classes = probs.cols();
    if classes < 2 {
        return Err(Error::Parameter("evaluation needs at least two classes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
    }
    let present = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if present < 2 {
        return Err(Error::UndefinedMetric(
            "evaluation data contains a single class".into(),
        ));
    }
    if classes == 2 {
        binary_report(probs, labels, threshold)
    } else {
        multiclass_report(probs, labels, threshold)
    }
}

fn binary_report(probs: &Tensor, labels: &[usize], threshold: f64) -> Result<EvalReport> {
    let set = ScoredSet::from_indices(column(probs, 1), labels)?;
    let counts = confusion(&set, threshold);
    let m = scalar_metrics(&counts);
    let roc = roc_auc(&set)?;
    let pr = pr_auprc(&set)?;
    Ok(EvalReport {
        n_samples: labels.len(),
        num_classes: 2,
        threshold,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        fpr: m.fpr,
        auc: roc.auc,
        auprc: pr.auprc,
        confusion: Some(counts),
        degenerate: m.degenerate,
        roc: roc.points,
        pr: pr.points,
        per_class: Vec::new(),
    })
}

fn multiclass_report(probs: &Tensor, labels: &[usize], threshold: f64) -> Result<EvalReport> {
    let classes = probs.cols();
    let predicted = argmax_rows(probs);
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    let mut degenerate = Vec::new();
    let mut per_class = Vec::with_capacity(classes);
    for c in 0..classes {
        let truth: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        let hard = ScoredSet::new(
            predicted.iter().map(|&p| (p == c) as u8 as f64).collect(),
            truth.clone(),
        )?;
        let m = scalar_metrics(&confusion(&hard, 1.0));
        degenerate.extend(
            m.degenerate
                .iter()
                .filter(|d| *d != "accuracy")
                .map(|d| format!("{d}[class {c}]")),
        );
        let soft = ScoredSet::new(column(probs, c), truth)?;
        let support = soft.positives();
        let (auc, roc, auprc, pr) = if support > 0 && support < labels.len() {
            let roc = roc_auc(&soft)?;
            let pr = pr_auprc(&soft)?;
            (Some(roc.auc), roc.points, Some(pr.auprc), pr.points)
        } else {
            degenerate.push(format!("auc[class {c}]"));
            (None, Vec::new(), None, Vec::new())
        };
        per_class.push(ClassReport {
            class: c,
            support,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            fpr: m.fpr,
            auc,
            auprc,
            roc,
            pr,
        });
    }
    let mean = |f: &dyn Fn(&ClassReport) -> Option<f64>| {
        let vals: Vec<f64> = per_class.iter().filter_map(f).collect();
        vals.iter().sum::<f64>() / vals.len().max(1) as f64
    };
    Ok(EvalReport {
        n_samples: labels.len(),
        num_classes: classes,
        threshold,
        accuracy: correct as f64 / labels.len() as f64,
        precision: mean(&|r| Some(r.precision)),
        recall: mean(&|r| Some(r.recall)),
        f1: mean(&|r| Some(r.f1)),
        fpr: mean(&|r| Some(r.fpr)),
        auc: mean(&|r| r.auc),
        auprc: mean(&|r| r.auprc),
        confusion: None,
        degenerate,
        roc: Vec::new(),
        pr: Vec::new(),
        per_class,
    })
}

fn fmt_threshold(t: f64) -> String {
    if t.is_finite() {
        format!("{t}")
    } else if t > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `threshold,fpr,tpr` lines with a header.
pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", fmt_threshold(p.threshold), p.fpr, p.tpr));
    }
    out
}

/// `threshold,recall,precision` lines with a header.
pub fn pr_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,recall,precision\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_threshold(p.threshold),
            p.recall,
            p.precision
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn binary_report_matches_components() {
        let p = probs(&[&[0.1, 0.9], &[0.4, 0.6], &[0.7, 0.3], &[0.2, 0.8], &[0.9, 0.1]]);
        let labels = [1, 0, 0, 1, 0];
        let r = evaluate(&p, &labels, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(r.confusion, Some(ConfusionCounts { tp: 2, tn: 2, fp: 1, fn_: 0 }));
        assert_eq!(r.accuracy, 0.8);
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.auprc, 1.0);
        for v in [r.accuracy, r.precision, r.recall, r.f1, r.auc, r.auprc] {
            assert!((0.0..=1.0).contains(&v));
        }
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn multiclass_argmax_and_per_class() {
        let p = probs(&[
            &[0.8, 0.1, 0.1],
            &[0.1, 0.8, 0.1],
            &[0.1, 0.1, 0.8],
            &[0.4, 0.4, 0.2],
            &[0.3, 0.3, 0.4],
        ]);
        let labels = [0, 1, 2, 1, 2];
        let r = evaluate(&p, &labels, DEFAULT_THRESHOLD).unwrap();
        // row 3 ties classes 0 and 1 and resolves to 0
        assert_eq!(argmax_rows(&p)[3], 0);
        assert_eq!(r.accuracy, 0.8);
        assert_eq!(r.per_class.len(), 3);
        assert_eq!(r.per_class.iter().map(|c| c.support).sum::<usize>(), 5);
        assert!(r.per_class.iter().all(|c| c.auc.is_some()));
    }

    #[test]
    fn single_class_is_rejected() {
        let p = probs(&[&[0.1, 0.9], &[0.4, 0.6]]);
        assert!(matches!(
            evaluate(&p, &[1, 1], 0.5),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(evaluate(&p, &[1], 0.5).is_err());
    }

    #[test]
    fn curve_csv_layout() {
        let p = probs(&[&[0.1, 0.9], &[0.9, 0.1]]);
        let r = evaluate(&p, &[1, 0], 0.5).unwrap();
        let csv = roc_csv(&r.roc);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "threshold,fpr,tpr");
        assert_eq!(lines[1], "inf,0,0");
        assert_eq!(lines.last().copied(), Some("0.1,1,1"));
        assert!(pr_csv(&r.pr).starts_with("threshold,recall,precision\ninf,0,1\n"));
    }
}
