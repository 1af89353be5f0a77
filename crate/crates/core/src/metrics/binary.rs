use serde::{Deserialize, Serialize};

use crate::engine::{softmax_rows, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Scores with binary labels (`true` = positive class).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} scores but {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Data("no samples to evaluate".into()));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Data("scores contain NaN".into()));
        }
        Ok(Self { scores, labels })
    }

    /// From 0/1 class indices.
    pub fn from_indices(scores: Vec<f64>, labels: &[usize]) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("binary label expected, got {bad}")));
        }
        Self::new(scores, labels.iter().map(|&l| l == 1).collect())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn negatives(&self) -> usize {
        self.labels.len() - self.positives()
    }

    /// Indices sorted by descending score, grouped into runs of equal score.
    fn tie_groups(&self) -> Vec<(f64, usize, usize)> {
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut groups: Vec<(f64, usize, usize)> = Vec::new();
        for i in order {
            let s = self.scores[i];
            let (pos, neg) = (self.labels[i] as usize, !self.labels[i] as usize);
            match groups.last_mut() {
                Some(last) if last.0 == s => {
                    last.1 += pos;
                    last.2 += neg;
                }
                _ => groups.push((s, pos, neg)),
            }
        }
        groups
    }
}

/// Predicts positive iff `score >= threshold`.
pub fn confusion(set: &ScoredSet, threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&s, &l) in set.scores.iter().zip(&set.labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub fpr: f64,
    pub f1: f64,
    /// Metrics whose denominator was zero; they are reported as 0.
    pub degenerate: Vec<String>,
}

pub fn scalar_metrics(c: &ConfusionCounts) -> ScalarMetrics {
    let mut degenerate = Vec::new();
    let mut ratio = |name: &str, num: u64, den: u64| {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let accuracy = ratio("accuracy", c.tp + c.tn, c.total());
    let recall = ratio("recall", c.tp, c.tp + c.fn_);
    let fpr = ratio("fpr", c.fp, c.tn + c.fp);
    let precision = ratio("precision", c.tp, c.tp + c.fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate.push("f1".into());
        0.0
    };
    ScalarMetrics {
        accuracy,
        precision,
        recall,
        fpr,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "super::threshold_serde")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub auc: f64,
    /// From (0, 0) at threshold +inf to (1, 1).
    pub points: Vec<RocPoint>,
}

/// ROC sweep over every distinct score; AUC by the trapezoidal rule, which
/// counts tied positive/negative pairs as one half.
pub fn roc_auc(set: &ScoredSet) -> Result<RocCurve> {
    let (p, n) = (set.positives(), set.negatives());
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric(format!(
            "ROC AUC needs both classes (got {p} positives, {n} negatives)"
        )));
    }
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for (score, pos, neg) in set.tie_groups() {
        let prev = *points.last().expect("seeded with origin");
        tp += pos;
        fp += neg;
        let pt = RocPoint {
            threshold: score,
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
        };
        area += (pt.fpr - prev.fpr) * (pt.tpr + prev.tpr) / 2.0;
        points.push(pt);
    }
    Ok(RocCurve {
        auc: area.clamp(0.0, 1.0),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    #[serde(with = "super::threshold_serde")]
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub auprc: f64,
    /// Starts at recall 0 / precision 1 (threshold +inf), recall ascending.
    pub points: Vec<PrPoint>,
}

/// Precision-recall sweep; AUPRC is the step sum `Σ (R_i − R_{i−1})·P_i`.
pub fn pr_auprc(set: &ScoredSet) -> Result<PrCurve> {
    let p = set.positives();
    if p == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive".into()));
    }
    let mut points = vec![PrPoint {
        threshold: f64::INFINITY,
        recall: 0.0,
        precision: 1.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    for (score, pos, neg) in set.tie_groups() {
        let prev_recall = points.last().expect("seeded").recall;
        tp += pos;
        fp += neg;
        let pt = PrPoint {
            threshold: score,
            recall: tp as f64 / p as f64,
            precision: tp as f64 / (tp + fp) as f64,
        };
        area += (pt.recall - prev_recall) * pt.precision;
        points.push(pt);
    }
    Ok(PrCurve {
        auprc: area.clamp(0.0, 1.0),
        points,
    })
}

/// Scores each sample by its softmax probability of `class`.
pub fn one_vs_rest(logits: &Tensor, labels: &[usize], class: usize) -> Result<ScoredSet> {
    if class >= logits.cols() {
        return Err(Error::Parameter(format!(
            "class {class} out of range for {} classes",
            logits.cols()
        )));
    }
    if labels.len() != logits.rows() {
        return Err(Error::Shape {
            op: "one_vs_rest",
            left: logits.shape(),
            right: (labels.len(), 1),
        });
    }
    let probs = softmax_rows(logits, 1.0);
    let scores = (0..probs.rows()).map(|r| probs.get(r, class)).collect();
    ScoredSet::new(scores, labels.iter().map(|&l| l == class).collect())
}
