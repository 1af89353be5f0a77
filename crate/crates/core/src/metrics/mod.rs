//! Classification metrics: confusion counts, ROC and precision-recall curves,
//! one-vs-rest reduction for multi-class outputs, and stratified k-fold
//! cross-validation.

mod binary;
mod cv;
mod report;

pub use binary::{
    confusion, one_vs_rest, pr_auprc, roc_auc, scalar_metrics, ConfusionCounts, PrCurve, PrPoint,
    RocCurve, RocPoint, ScalarMetrics, ScoredSet,
};
pub use cv::{kfold_cv, kfold_cv_parallel, stratified_folds, CvReport, FoldReport, MetricSummary};
pub use report::{
    argmax_rows, evaluate, pr_csv, roc_csv, ClassReport, EvalReport, DEFAULT_THRESHOLD,
};

/// Curve thresholds include ±∞, which JSON cannot carry as numbers.
mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_f64(*t)
        } else if *t > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold `{t}`"))),
        }
    }
}
