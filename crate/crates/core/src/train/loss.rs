use serde::{Deserialize, Serialize};

use crate::engine::{softmax_rows, Graph, NodeId, Tensor};
use crate::error::{Error, Result};

/// Which divergence the distillation term uses. `Kl` is `Σ q(ln q − p)`;
/// `Verbatim` is `Σ q(q − p)`, with `p` the student log-probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdForm {
    #[default]
    Kl,
    Verbatim,
}

impl std::str::FromStr for KdForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(Self::Kl),
            "verbatim" => Ok(Self::Verbatim),
            other => Err(Error::Config(format!("unknown kd form `{other}` (kl|verbatim)"))),
        }
    }
}

/// How teacher class probabilities aggregate into student classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMap {
    Identity,
    /// Student class `j` receives the summed probability of `groups[j]`.
    Groups(Vec<Vec<usize>>),
}

impl ClassMap {
    /// health → negative; bacterial + viral → positive.
    pub fn infection_collapse() -> Self {
        Self::Groups(vec![vec![0], vec![1, 2]])
    }

    pub fn default_for(teacher_classes: usize, student_classes: usize) -> Result<Self> {
        match (teacher_classes, student_classes) {
            (t, s) if t == s => Ok(Self::Identity),
            (3, 2) => Ok(Self::infection_collapse()),
            (t, s) => Err(Error::Config(format!(
                "no default class map from {t} teacher classes to {s} student classes"
            ))),
        }
    }

    pub fn validate(&self, teacher_classes: usize, student_classes: usize) -> Result<()> {
        match self {
            Self::Identity if teacher_classes == student_classes => Ok(()),
            Self::Identity => Err(Error::Config(format!(
                "identity class map needs equal class counts, got teacher {teacher_classes} and student {student_classes}"
            ))),
            Self::Groups(groups) => {
                if groups.len() != student_classes {
                    return Err(Error::Config(format!(
                        "class map produces {} classes but the student has {student_classes}",
                        groups.len()
                    )));
                }
                let mut used = vec![false; teacher_classes];
                for &t in groups.iter().flatten() {
                    if t >= teacher_classes || used[t] {
                        return Err(Error::Config(format!(
                            "class map uses teacher class {t} out of range or twice"
                        )));
                    }
                    used[t] = true;
                }
                if used.iter().any(|u| !u) {
                    return Err(Error::Config("class map drops a teacher class".into()));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, probs: &Tensor) -> Tensor {
        match self {
            Self::Identity => probs.clone(),
            Self::Groups(groups) => {
                let mut out = Tensor::zeros(probs.rows(), groups.len());
                for r in 0..probs.rows() {
                    for (j, g) in groups.iter().enumerate() {
                        out.set(r, j, g.iter().map(|&t| probs.get(r, t)).sum());
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistillConfig {
    pub temperature: f64,
    pub w_distill: f64,
    pub w_ce: f64,
    pub kd_form: KdForm,
    /// `None` picks [`ClassMap::default_for`] from the class counts.
    pub class_map: Option<ClassMap>,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            temperature: 5.0,
            w_distill: 0.2,
            w_ce: 0.8,
            kd_form: KdForm::Kl,
            class_map: None,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.w_distill >= 0.0 && self.w_ce >= 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be non-negative, got {} and {}",
                self.w_distill, self.w_ce
            )));
        }
        Ok(())
    }

    pub fn resolved_class_map(&self, teacher_classes: usize, student_classes: usize) -> Result<ClassMap> {
        let map = match &self.class_map {
            Some(m) => m.clone(),
            None => ClassMap::default_for(teacher_classes, student_classes)?,
        };
        map.validate(teacher_classes, student_classes)?;
        Ok(map)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("temperature must be positive, got {t}")))
    }
}

/// Teacher probabilities softened at temperature `τ`.
pub fn soft_targets(teacher_logits: &Tensor, temperature: f64) -> Result<Tensor> {
    check_temperature(temperature)?;
    Ok(softmax_rows(teacher_logits, temperature))
}

/// Distillation loss against fixed targets `q`: per sample
/// `Σᵢ qᵢ(f(qᵢ) − pᵢ) / (n·τ²)` with `p = log softmax(student/τ)`, `n` the
/// class count and `f = ln` (KL) or identity (verbatim); averaged over rows.
pub fn distill_loss_from_targets(
    g: &mut Graph,
    targets: &Tensor,
    student_logits: NodeId,
    temperature: f64,
    form: KdForm,
) -> Result<NodeId> {
    check_temperature(temperature)?;
    let shape = g.value(student_logits).shape();
    if targets.shape() != shape {
        return Err(Error::Shape {
            op: "distill_loss",
            left: targets.shape(),
            right: shape,
        });
    }
    let (batch, classes) = shape;
    let norm = classes as f64 * temperature * temperature * batch as f64;
    let self_term: f64 = targets
        .data()
        .iter()
        .map(|&q| match form {
            KdForm::Kl if q > 0.0 => q * q.ln(),
            KdForm::Kl => 0.0,
            KdForm::Verbatim => q * q,
        })
        .sum();
    let log_p = g.log_softmax_rows(student_logits, temperature)?;
    let q = g.constant(targets.clone());
    let cross = g.mul(q, log_p)?;
    let cross = g.sum(cross);
    let cross = g.scale(cross, -1.0 / norm);
    let offset = g.constant(Tensor::scalar(self_term / norm));
    g.add(offset, cross)
}

/// As [`distill_loss_from_targets`] with `q = softmax(teacher/τ)`. The
/// teacher node is read by value only, so no gradient reaches it.
pub fn distill_loss(
    g: &mut Graph,
    teacher_logits: NodeId,
    student_logits: NodeId,
    temperature: f64,
    form: KdForm,
) -> Result<NodeId> {
    let q = soft_targets(g.value(teacher_logits), temperature)?;
    distill_loss_from_targets(g, &q, student_logits, temperature, form)
}

/// Batch-mean cross-entropy against class indices.
pub fn cross_entropy(g: &mut Graph, student_logits: NodeId, labels: &[usize]) -> Result<NodeId> {
    g.cross_entropy(student_logits, labels)
}

/// Class indices from one-hot rows.
pub fn labels_from_one_hot(one_hot: &Tensor) -> Result<Vec<usize>> {
    (0..one_hot.rows())
        .map(|r| {
            let row = one_hot.row(r);
            let hot: Vec<usize> = (0..row.len()).filter(|&c| row[c] == 1.0).collect();
            match (hot.as_slice(), row.iter().all(|&v| v == 0.0 || v == 1.0)) {
                ([c], true) => Ok(*c),
                _ => Err(Error::Parameter(format!("row {r} is not one-hot"))),
            }
        })
        .collect()
}

/// `w_distill·l_distill + w_ce·l_ce` on graph nodes.
pub fn total_loss(g: &mut Graph, l_distill: NodeId, l_ce: NodeId, w_distill: f64, w_ce: f64) -> Result<NodeId> {
    let a = g.scale(l_distill, w_distill);
    let b = g.scale(l_ce, w_ce);
    g.add(a, b)
}

/// Scalar form of [`total_loss`].
pub fn total_loss_value(l_distill: f64, l_ce: f64, w_distill: f64, w_ce: f64) -> f64 {
    w_distill * l_distill + w_ce * l_ce
}
