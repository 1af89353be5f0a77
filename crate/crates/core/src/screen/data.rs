use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Genes x samples table of non-negative expression values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    sample_ids: Vec<String>,
    values: Tensor,
    gene_index: HashMap<String, usize>,
}

impl ExpressionMatrix {
    pub fn new(gene_ids: Vec<String>, sample_ids: Vec<String>, values: Tensor) -> Result<Self> {
        if values.shape() != (gene_ids.len(), sample_ids.len()) {
            return Err(Error::Data(format!(
                "expression values have shape {:?} but there are {} genes and {} samples",
                values.shape(),
                gene_ids.len(),
                sample_ids.len()
            )));
        }
        let mut gene_index = HashMap::with_capacity(gene_ids.len());
        for (i, g) in gene_ids.iter().enumerate() {
            if gene_index.insert(g.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate gene id `{g}`")));
            }
        }
        let mut seen = HashSet::with_capacity(sample_ids.len());
        for s in &sample_ids {
            if !seen.insert(s.as_str()) {
                return Err(Error::Data(format!("duplicate sample id `{s}`")));
            }
        }
        if let Some(pos) = values.data().iter().position(|v| !v.is_finite() || *v < 0.0) {
            let (g, s) = (pos / sample_ids.len(), pos % sample_ids.len());
            return Err(Error::Data(format!(
                "expression of gene `{}` in sample `{}` is {}, expected a finite non-negative value",
                gene_ids[g],
                sample_ids[s],
                values.data()[pos]
            )));
        }
        Ok(Self {
            gene_ids,
            sample_ids,
            values,
            gene_index,
        })
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn gene_position(&self, gene: &str) -> Option<usize> {
        self.gene_index.get(gene).copied()
    }

    /// Expression of `gene` across all samples.
    pub fn gene_row(&self, gene: &str) -> Option<&[f64]> {
        self.gene_position(gene).map(|i| self.values.row(i))
    }

    pub(crate) fn require_gene(&self, gene: &str) -> Result<&[f64]> {
        self.gene_row(gene)
            .ok_or_else(|| Error::Data(format!("gene `{gene}` is not in the expression matrix")))
    }

    /// Restricts the matrix to the given samples, in the given order.
    pub fn select_samples(&self, sample_ids: &[String]) -> Result<Self> {
        let index: HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let cols = sample_ids
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("sample `{s}` is not in the expression matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.n_genes() * cols.len());
        for g in 0..self.n_genes() {
            let row = self.values.row(g);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        let values = Tensor::from_vec(self.n_genes(), cols.len(), data)?;
        Self::new(self.gene_ids.clone(), sample_ids.to_vec(), values)
    }
}

/// Per-sample class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    pub sample_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabelVector {
    pub fn new(sample_ids: Vec<String>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if sample_ids.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} sample ids but {} labels",
                sample_ids.len(),
                labels.len()
            )));
        }
        if let Some((s, l)) = sample_ids
            .iter()
            .zip(&labels)
            .find(|(_, &l)| l >= num_classes)
        {
            return Err(Error::Data(format!(
                "sample `{s}` has label {l}, outside the {num_classes} declared classes"
            )));
        }
        Ok(Self {
            sample_ids,
            labels,
            num_classes,
        })
    }

    /// Reorders the labels to follow the matrix's sample order.
    pub fn aligned_to(&self, expr: &ExpressionMatrix) -> Result<Self> {
        if self.sample_ids == expr.sample_ids() {
            return Ok(self.clone());
        }
        let index: HashMap<&str, usize> = self
            .sample_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let labels = expr
            .sample_ids()
            .iter()
            .map(|s| {
                index
                    .get(s.as_str())
                    .map(|&i| self.labels[i])
                    .ok_or_else(|| Error::Data(format!("no label for sample `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(expr.sample_ids().to_vec(), labels, self.num_classes)
    }

    /// Health (class 0) versus any infection (every other class).
    pub fn binary(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l > 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pathway {
    pub name: String,
    pub description: String,
    pub genes: Vec<String>,
}

/// Named gene sets, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathwayCatalog {
    pathways: Vec<Pathway>,
}

impl PathwayCatalog {
    pub fn new(pathways: Vec<Pathway>) -> Result<Self> {
        let mut names = HashSet::new();
        for p in &pathways {
            if !names.insert(p.name.as_str()) {
                return Err(Error::Data(format!("duplicate pathway `{}`", p.name)));
            }
            if p.genes.is_empty() {
                return Err(Error::Data(format!("pathway `{}` has no genes", p.name)));
            }
        }
        Ok(Self { pathways })
    }

    pub fn pathways(&self) -> &[Pathway] {
        &self.pathways
    }

    pub fn len(&self) -> usize {
        self.pathways.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pathways.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn rejects_duplicates_and_negative_values() {
        let v = Tensor::ones(2, 2);
        assert!(ExpressionMatrix::new(vec!["A".into(), "A".into()], ids("s", 2), v.clone()).is_err());
        assert!(ExpressionMatrix::new(ids("g", 2), vec!["s".into(), "s".into()], v.clone()).is_err());
        assert!(ExpressionMatrix::new(ids("g", 3), ids("s", 2), v).is_err());
        let neg = Tensor::from_rows(&[vec![1.0, -0.5]]).unwrap();
        assert!(ExpressionMatrix::new(ids("g", 1), ids("s", 2), neg).is_err());
    }

    #[test]
    fn labels_align_by_sample_id() {
        let m = ExpressionMatrix::new(ids("g", 1), ids("s", 3), Tensor::ones(1, 3)).unwrap();
        let l = LabelVector::new(vec!["s2".into(), "s0".into(), "s1".into()], vec![2, 0, 1], 3).unwrap();
        let a = l.aligned_to(&m).unwrap();
        assert_eq!(a.labels, vec![0, 1, 2]);
        assert_eq!(a.binary(), vec![false, true, true]);
        let missing = LabelVector::new(vec!["s0".into()], vec![0], 2).unwrap();
        assert!(missing.aligned_to(&m).is_err());
        assert!(LabelVector::new(ids("s", 1), vec![3], 3).is_err());
    }

    #[test]
    fn sample_selection_reorders_columns() {
        let v = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let m = ExpressionMatrix::new(ids("g", 1), ids("s", 3), v).unwrap();
        let sub = m.select_samples(&["s2".into(), "s0".into()]).unwrap();
        assert_eq!(sub.values().data(), &[3.0, 1.0]);
    }

    #[test]
    fn catalog_rejects_duplicate_names() {
        let p = Pathway {
            name: "P".into(),
            description: String::new(),
            genes: vec!["A".into()],
        };
        assert!(PathwayCatalog::new(vec![p.clone(), p]).is_err());
    }
}
