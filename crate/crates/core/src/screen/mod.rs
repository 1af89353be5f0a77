//! Differential gene-pair screening.
//!
//! Candidate pairs are formed inside pathways, dichotomized per sample by the
//! sign of the log-expression difference, tested against the health/infection
//! split with Fisher's exact test and ranked into a [`DgpPanel`]. The panel
//! then defines the model's feature space via [`featurize`].

mod data;
mod fisher;
mod pairs;
mod panel;

pub use data::{ExpressionMatrix, LabelVector, Pathway, PathwayCatalog};
pub use fisher::{
    fisher_exact_two_sided, fisher_point_probability, ContingencyTable, FisherOutcome,
    LogFactorials, TIE_SLACK,
};
pub use pairs::{build_contingency, enumerate_pairs, page_ratio, r_dis, CandidatePair, EXPRESSION_FLOOR};
pub use panel::{
    featurize, screen, select_dgps, DgpPanel, FeatureMode, GenePair, ScreenOptions, ScreenReport,
    DEFAULT_PANEL_SIZE,
};
