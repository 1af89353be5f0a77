use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::data::{ExpressionMatrix, LabelVector, PathwayCatalog};
use super::fisher::ContingencyTable;
use crate::error::{Error, Result};

/// Expression values below this are clamped before taking logs.
pub const EXPRESSION_FLOOR: f64 = 1e-8;

/// Log-expression difference `ln(max(g1, ε)) − ln(max(g2, ε))`.
pub fn r_dis(expr_g1: f64, expr_g2: f64) -> Result<f64> {
    if expr_g1 < 0.0 || expr_g2 < 0.0 || expr_g1.is_nan() || expr_g2.is_nan() {
        return Err(Error::Data(format!(
            "r_dis needs non-negative expression, got ({expr_g1}, {expr_g2})"
        )));
    }
    Ok(expr_g1.max(EXPRESSION_FLOOR).ln() - expr_g2.max(EXPRESSION_FLOOR).ln())
}

/// `r_dis > 0` without the logarithms.
#[inline]
pub(crate) fn r_dis_positive(e1: f64, e2: f64) -> bool {
    e1.max(EXPRESSION_FLOOR) > e2.max(EXPRESSION_FLOOR)
}

/// Cross-tabulates the sign of `r_dis(g1, g2)` against health (label 0)
/// versus infection (any other label).
pub fn build_contingency(
    g1: &str,
    g2: &str,
    expr: &ExpressionMatrix,
    labels: &LabelVector,
) -> Result<ContingencyTable> {
    let labels = labels.aligned_to(expr)?;
    let (x1, x2) = (expr.require_gene(g1)?, expr.require_gene(g2)?);
    Ok(contingency_from_rows(x1, x2, &labels.binary()))
}

pub(crate) fn contingency_from_rows(x1: &[f64], x2: &[f64], case: &[bool]) -> ContingencyTable {
    let mut t = ContingencyTable::new(0, 0, 0, 0);
    for ((&e1, &e2), &is_case) in x1.iter().zip(x2).zip(case) {
        match (r_dis_positive(e1, e2), is_case) {
            (true, false) => t.a += 1,
            (true, true) => t.b += 1,
            (false, false) => t.c += 1,
            (false, true) => t.d += 1,
        }
    }
    t
}

/// Fraction of the given samples with `expr(g1) > expr(g2)` (ties count as not).
pub fn page_ratio<S: AsRef<str>>(
    g1: &str,
    g2: &str,
    expr: &ExpressionMatrix,
    sample_subset: &[S],
) -> Result<f64> {
    if sample_subset.is_empty() {
        return Err(Error::Parameter("page ratio of an empty sample subset".into()));
    }
    let (x1, x2) = (expr.require_gene(g1)?, expr.require_gene(g2)?);
    let index: HashMap<&str, usize> = expr
        .sample_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut hits = 0usize;
    for s in sample_subset {
        let s = s.as_ref();
        let &i = index
            .get(s)
            .ok_or_else(|| Error::Data(format!("sample `{s}` is not in the expression matrix")))?;
        if x1[i] > x2[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / sample_subset.len() as f64)
}

/// An unordered gene pair sharing a pathway, with `g1 < g2` lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CandidatePair {
    pub g1: String,
    pub g2: String,
    /// First pathway (in catalog order) containing both genes.
    pub pathway: String,
}

/// Every gene pair that co-occurs in at least one pathway, restricted to genes
/// present in `expr`, each pair once and in lexicographic order.
pub fn enumerate_pairs(
    catalog: &PathwayCatalog,
    expr: &ExpressionMatrix,
) -> impl Iterator<Item = CandidatePair> {
    let mut seen: BTreeMap<(String, String), String> = BTreeMap::new();
    for pathway in catalog.pathways() {
        let genes: BTreeSet<&str> = pathway
            .genes
            .iter()
            .map(String::as_str)
            .filter(|g| expr.gene_position(g).is_some())
            .collect();
        let genes: Vec<&str> = genes.into_iter().collect();
        for (i, a) in genes.iter().enumerate() {
            for b in &genes[i + 1..] {
                seen.entry((a.to_string(), b.to_string()))
                    .or_insert_with(|| pathway.name.clone());
            }
        }
    }
    seen.into_iter()
        .map(|((g1, g2), pathway)| CandidatePair { g1, g2, pathway })
}
