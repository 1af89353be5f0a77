use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{ExpressionMatrix, LabelVector, PathwayCatalog};
use super::fisher::{ContingencyTable, LogFactorials};
use super::pairs::{contingency_from_rows, enumerate_pairs, r_dis, CandidatePair};
use crate::engine::Tensor;
use crate::error::{Error, Result};

/// Default panel size.
pub const DEFAULT_PANEL_SIZE: usize = 35;

/// A screened gene pair, oriented so the pattern `g1 > g2` is enriched in
/// infected samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenePair {
    pub g1: String,
    pub g2: String,
    pub pathway: String,
    pub p_value: f64,
    pub page_ratio_case: f64,
    pub page_ratio_control: f64,
}

impl GenePair {
    pub fn ratio_gap(&self) -> f64 {
        (self.page_ratio_case - self.page_ratio_control).abs()
    }

    fn rank_cmp(&self, other: &Self) -> Ordering {
        self.p_value
            .total_cmp(&other.p_value)
            .then_with(|| other.ratio_gap().total_cmp(&self.ratio_gap()))
            .then_with(|| self.g1.cmp(&other.g1))
            .then_with(|| self.g2.cmp(&other.g2))
    }
}

/// Ranked list of selected pairs; column `j` of the feature matrix is pair `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpPanel {
    pairs: Vec<GenePair>,
}

impl DgpPanel {
    /// Validates a ranked pair list (e.g. one read back from disk).
    pub fn new(pairs: Vec<GenePair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Data("a panel needs at least one pair".into()));
        }
        let mut seen = HashSet::new();
        for (i, p) in pairs.iter().enumerate() {
            if p.g1 == p.g2 {
                return Err(Error::Data(format!("pair {} pairs gene `{}` with itself", i + 1, p.g1)));
            }
            if !(0.0..=1.0).contains(&p.p_value) {
                return Err(Error::Data(format!(
                    "pair {} has p-value {} outside [0, 1]",
                    i + 1,
                    p.p_value
                )));
            }
            let key = if p.g1 < p.g2 { (&p.g1, &p.g2) } else { (&p.g2, &p.g1) };
            if !seen.insert(key) {
                return Err(Error::Data(format!(
                    "pair ({}, {}) appears twice in the panel",
                    p.g1, p.g2
                )));
            }
            if i > 0 && pairs[i - 1].p_value > p.p_value {
                return Err(Error::Data(format!(
                    "panel is not ranked by p-value at position {}",
                    i + 1
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[GenePair] {
        &self.pairs
    }

    pub fn k(&self) -> usize {
        self.pairs.len()
    }

    /// Distinct genes the panel reads, in first-use order.
    pub fn genes(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.pairs
            .iter()
            .flat_map(|p| [p.g1.as_str(), p.g2.as_str()])
            .filter(|g| seen.insert(*g))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScreenOptions {
    pub k: usize,
    /// Worker threads for candidate scoring; 0 or 1 runs inline.
    pub threads: usize,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_PANEL_SIZE,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScreenReport {
    pub panel: DgpPanel,
    pub candidates_tested: usize,
    /// Candidates whose table had an empty margin (p = 1 by convention).
    pub degenerate_tables: usize,
}

struct Scored {
    pair: GenePair,
    table: ContingencyTable,
    degenerate: bool,
}

fn score_candidate(
    candidate: &CandidatePair,
    expr: &ExpressionMatrix,
    case: &[bool],
    n_case: usize,
    n_control: usize,
    lf: &LogFactorials,
) -> Scored {
    let xa = expr.gene_row(&candidate.g1).expect("enumerated genes exist");
    let xb = expr.gene_row(&candidate.g2).expect("enumerated genes exist");
    let (mut ab_case, mut ab_ctrl, mut ba_case, mut ba_ctrl) = (0usize, 0usize, 0usize, 0usize);
    for ((&ea, &eb), &is_case) in xa.iter().zip(xb).zip(case) {
        let (ab, ba) = (ea > eb, eb > ea);
        if is_case {
            ab_case += ab as usize;
            ba_case += ba as usize;
        } else {
            ab_ctrl += ab as usize;
            ba_ctrl += ba as usize;
        }
    }
    let ratio = |hits: usize, n: usize| hits as f64 / n as f64;
    let forward = (ratio(ab_case, n_case), ratio(ab_ctrl, n_control));
    let reverse = (ratio(ba_case, n_case), ratio(ba_ctrl, n_control));
    // Keep the orientation whose pattern is more enriched in cases.
    let (g1, g2, (case_ratio, control_ratio), x1, x2) =
        if forward.0 - forward.1 >= reverse.0 - reverse.1 {
            (&candidate.g1, &candidate.g2, forward, xa, xb)
        } else {
            (&candidate.g2, &candidate.g1, reverse, xb, xa)
        };
    let table = contingency_from_rows(x1, x2, case);
    let outcome = lf.two_sided(&table);
    Scored {
        pair: GenePair {
            g1: g1.clone(),
            g2: g2.clone(),
            pathway: candidate.pathway.clone(),
            p_value: outcome.p_value,
            page_ratio_case: case_ratio,
            page_ratio_control: control_ratio,
        },
        table,
        degenerate: outcome.degenerate,
    }
}

/// Scores every intra-pathway candidate and keeps the `k` best.
///
/// Multi-class labels are collapsed to health (0) versus infection (> 0).
/// Pairs are ranked by ascending p-value, then by descending
/// `|case ratio − control ratio|`, then by `(g1, g2)`.
pub fn screen(
    expr: &ExpressionMatrix,
    labels: &LabelVector,
    catalog: &PathwayCatalog,
    options: ScreenOptions,
) -> Result<ScreenReport> {
    if options.k == 0 {
        return Err(Error::Parameter("panel size k must be at least 1".into()));
    }
    let labels = labels.aligned_to(expr)?;
    let case = labels.binary();
    let n_case = case.iter().filter(|&&c| c).count();
    let n_control = case.len() - n_case;
    if n_case == 0 || n_control == 0 {
        return Err(Error::Data(format!(
            "screening needs both health and infection samples (got {n_control} and {n_case})"
        )));
    }
    let candidates: Vec<CandidatePair> = enumerate_pairs(catalog, expr).collect();
    if candidates.len() < options.k {
        return Err(Error::InsufficientCandidates {
            requested: options.k,
            available: candidates.len(),
        });
    }
    let lf = LogFactorials::new(expr.n_samples());
    let score = |c: &CandidatePair| score_candidate(c, expr, &case, n_case, n_control, &lf);
    let mut scored: Vec<Scored> = if options.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| Error::Config(format!("cannot start screening workers: {e}")))?;
        pool.install(|| candidates.par_iter().map(score).collect())
    } else {
        candidates.iter().map(score).collect()
    };
    let degenerate_tables = scored.iter().filter(|s| s.degenerate).count();
    scored.sort_by(|x, y| x.pair.rank_cmp(&y.pair));
    scored.truncate(options.k);
    debug_assert!(scored.iter().all(|s| s.table.total() as usize == expr.n_samples()));
    Ok(ScreenReport {
        panel: DgpPanel {
            pairs: scored.into_iter().map(|s| s.pair).collect(),
        },
        candidates_tested: candidates.len(),
        degenerate_tables,
    })
}

pub fn select_dgps(
    expr: &ExpressionMatrix,
    labels: &LabelVector,
    catalog: &PathwayCatalog,
    k: usize,
) -> Result<DgpPanel> {
    screen(expr, labels, catalog, ScreenOptions { k, threads: 1 }).map(|r| r.panel)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// 1 when `expr(g1) > expr(g2)`, else 0.
    #[default]
    Binary,
    /// The `r_dis` value itself.
    Continuous,
}

/// Samples x k feature matrix, columns in panel order.
pub fn featurize(expr: &ExpressionMatrix, panel: &DgpPanel, mode: FeatureMode) -> Result<Tensor> {
    let missing: Vec<&str> = panel
        .genes()
        .into_iter()
        .filter(|g| expr.gene_position(g).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "panel genes missing from the expression matrix: {}",
            missing.join(", ")
        )));
    }
    let n = expr.n_samples();
    let mut out = Tensor::zeros(n, panel.k());
    for (j, pair) in panel.pairs().iter().enumerate() {
        let x1 = expr.require_gene(&pair.g1)?;
        let x2 = expr.require_gene(&pair.g2)?;
        for s in 0..n {
            let v = match mode {
                FeatureMode::Binary => f64::from(u8::from(x1[s] > x2[s])),
                FeatureMode::Continuous => r_dis(x1[s], x2[s])?,
            };
            out.set(s, j, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screen::data::Pathway;

    fn toy() -> (ExpressionMatrix, LabelVector, PathwayCatalog) {
        // A > B in cases only; C, D noise.
        let rows = vec![
            vec![5.0, 6.0, 1.0, 1.5, 7.0, 8.0],
            vec![2.0, 2.0, 3.0, 3.0, 2.0, 2.5],
            vec![1.0, 4.0, 2.0, 2.0, 3.0, 1.0],
            vec![2.0, 1.0, 3.0, 1.0, 1.0, 2.0],
        ];
        let expr = ExpressionMatrix::new(
            ["A", "B", "C", "D"].iter().map(|g| g.to_string()).collect(),
            (0..6).map(|i| format!("s{i}")).collect(),
            Tensor::from_rows(&rows).unwrap(),
        )
        .unwrap();
        let labels =
            LabelVector::new(expr.sample_ids().to_vec(), vec![1, 1, 0, 0, 2, 2], 3).unwrap();
        let catalog = PathwayCatalog::new(vec![Pathway {
            name: "P".into(),
            description: "toy".into(),
            genes: vec!["A".into(), "B".into(), "C".into(), "D".into()],
        }])
        .unwrap();
        (expr, labels, catalog)
    }

    #[test]
    fn full_panel_is_sorted_and_oriented() {
        let (expr, labels, catalog) = toy();
        let panel = select_dgps(&expr, &labels, &catalog, 6).unwrap();
        assert_eq!(panel.k(), 6);
        assert_eq!((panel.pairs()[0].g1.as_str(), panel.pairs()[0].g2.as_str()), ("A", "B"));
        for w in panel.pairs().windows(2) {
            assert!(w[0].rank_cmp(&w[1]) != Ordering::Greater);
        }
        for p in panel.pairs() {
            assert!(p.page_ratio_case >= p.page_ratio_control);
        }
    }

    #[test]
    fn too_few_candidates_reports_count() {
        let (expr, labels, catalog) = toy();
        match select_dgps(&expr, &labels, &catalog, 7) {
            Err(Error::InsufficientCandidates { requested, available }) => {
                assert_eq!((requested, available), (7, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parallel_scoring_matches_sequential() {
        let (expr, labels, catalog) = toy();
        let a = screen(&expr, &labels, &catalog, ScreenOptions { k: 6, threads: 1 }).unwrap();
        let b = screen(&expr, &labels, &catalog, ScreenOptions { k: 6, threads: 3 }).unwrap();
        assert_eq!(a.panel, b.panel);
    }

    #[test]
    fn featurize_modes() {
        let (expr, labels, catalog) = toy();
        let panel = select_dgps(&expr, &labels, &catalog, 3).unwrap();
        let bin = featurize(&expr, &panel, FeatureMode::Binary).unwrap();
        let cont = featurize(&expr, &panel, FeatureMode::Continuous).unwrap();
        assert_eq!(bin.shape(), (6, 3));
        for (j, p) in panel.pairs().iter().enumerate() {
            let (x1, x2) = (expr.gene_row(&p.g1).unwrap(), expr.gene_row(&p.g2).unwrap());
            for s in 0..6 {
                assert_eq!(cont.get(s, j), r_dis(x1[s], x2[s]).unwrap());
                assert_eq!(bin.get(s, j), if x1[s] > x2[s] { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn featurize_lists_missing_genes() {
        let (expr, labels, catalog) = toy();
        let mut pairs = select_dgps(&expr, &labels, &catalog, 2).unwrap().pairs;
        pairs[1].g2 = "ZZZ".into();
        pairs[1].g1 = "YYY".into();
        let panel = DgpPanel::new(pairs).unwrap();
        let err = featurize(&expr, &panel, FeatureMode::Binary).unwrap_err().to_string();
        assert!(err.contains("YYY") && err.contains("ZZZ"), "{err}");
    }

    #[test]
    fn panel_validation() {
        let p = GenePair {
            g1: "A".into(),
            g2: "B".into(),
            pathway: "P".into(),
            p_value: 0.5,
            page_ratio_case: 0.6,
            page_ratio_control: 0.4,
        };
        let mut dup = p.clone();
        std::mem::swap(&mut dup.g1, &mut dup.g2);
        assert!(DgpPanel::new(vec![p.clone(), dup]).is_err());
        let mut early = p.clone();
        early.g1 = "C".into();
        early.p_value = 0.1;
        assert!(DgpPanel::new(vec![p.clone(), early]).is_err());
        assert!(DgpPanel::new(vec![]).is_err());
    }
}
