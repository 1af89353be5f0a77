use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::rng::{stream, Rng};
use crate::screen::{ExpressionMatrix, LabelVector, Pathway, PathwayCatalog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Class 0 is health; the rest are infection classes.
    pub n_samples_per_class: Vec<usize>,
    pub n_genes: usize,
    pub n_pathways: usize,
    /// Decoy genes per pathway, on top of any planted genes.
    pub pathway_size: usize,
    pub planted_pairs: usize,
    pub flip_noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples_per_class: vec![300, 300],
            n_genes: 300,
            n_pathways: 20,
            pathway_size: 20,
            planted_pairs: 15,
            flip_noise: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn num_classes(&self) -> usize {
        self.n_samples_per_class.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_classes() < 2 {
            return fail("synthetic data needs at least two classes".into());
        }
        if !(0.0..0.5).contains(&self.flip_noise) {
            return fail(format!("flip_noise must lie in [0, 0.5), got {}", self.flip_noise));
        }
        if self.n_pathways == 0 {
            return fail("at least one pathway is required".into());
        }
        if 2 * self.planted_pairs > self.n_genes {
            return fail(format!(
                "{} planted pairs need {} distinct genes but only {} exist",
                self.planted_pairs,
                2 * self.planted_pairs,
                self.n_genes
            ));
        }
        let spare = self.n_genes - 2 * self.planted_pairs;
        if self.pathway_size > spare {
            return fail(format!(
                "pathway_size {} exceeds the {spare} genes left after planting",
                self.pathway_size
            ));
        }
        if self.pathway_size == 0 && self.planted_pairs < self.n_pathways {
            return fail("pathways without decoys or planted pairs would be empty".into());
        }
        Ok(())
    }
}

/// A pair whose ordering is planted. `up` is the gene that exceeds the other
/// in target-class samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub g1: String,
    pub g2: String,
    pub up: String,
    pub pathway: String,
    /// `None` means every infection class.
    pub target_class: Option<usize>,
}

/// Gene identities, pathway structure and planted pairs, independent of any
/// particular draw of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLayout {
    genes: Vec<String>,
    log_means: Vec<f64>,
    catalog: PathwayCatalog,
    planted: Vec<PlantedPair>,
    /// (up row, down row, target class) per planted pair.
    planted_rows: Vec<(usize, usize, Option<usize>)>,
    num_classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub expr: ExpressionMatrix,
    pub labels: LabelVector,
    pub catalog: PathwayCatalog,
    pub planted: Vec<PlantedPair>,
}

const LOG_SD: f64 = 1.0;

impl SynthLayout {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream(cfg.seed, "synth-layout");
        let width = cfg.n_genes.to_string().len();
        let genes: Vec<String> = (0..cfg.n_genes).map(|i| format!("G{:0width$}", i + 1)).collect();
        let mean_dist = Normal::new(5.0, 1.0).expect("valid normal");
        let log_means = (0..cfg.n_genes).map(|_| mean_dist.sample(&mut rng)).collect();

        let order = sample(&mut rng, cfg.n_genes, cfg.n_genes).into_vec();
        let (planted_genes, spare) = order.split_at(2 * cfg.planted_pairs);
        let classes = cfg.num_classes();
        let path_width = cfg.n_pathways.to_string().len();
        let pathway_name = |i: usize| format!("PATHWAY_{:0path_width$}", i + 1);

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_pathways];
        let mut planted = Vec::with_capacity(cfg.planted_pairs);
        let mut planted_rows = Vec::with_capacity(cfg.planted_pairs);
        for p in 0..cfg.planted_pairs {
            let (up, down) = (planted_genes[2 * p], planted_genes[2 * p + 1]);
            let target = match p % classes {
                0 => None,
                c => Some(c),
            };
            let pathway = p % cfg.n_pathways;
            members[pathway].extend([up, down]);
            let (g1, g2) = if genes[up] < genes[down] { (up, down) } else { (down, up) };
            planted.push(PlantedPair {
                g1: genes[g1].clone(),
                g2: genes[g2].clone(),
                up: genes[up].clone(),
                pathway: pathway_name(pathway),
                target_class: target,
            });
            planted_rows.push((up, down, target));
        }
        for m in &mut members {
            let decoys = sample(&mut rng, spare.len(), cfg.pathway_size);
            m.extend(decoys.iter().map(|i| spare[i]));
        }
        let pathways = members
            .into_iter()
            .enumerate()
            .map(|(i, mut m)| {
                m.sort_unstable();
                Pathway {
                    name: pathway_name(i),
                    description: "synthetic".into(),
                    genes: m.into_iter().map(|g| genes[g].clone()).collect(),
                }
            })
            .collect();
        Ok(Self {
            genes,
            log_means,
            catalog: PathwayCatalog::new(pathways)?,
            planted,
            planted_rows,
            num_classes: classes,
        })
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn catalog(&self) -> &PathwayCatalog {
        &self.catalog
    }

    pub fn planted(&self) -> &[PlantedPair] {
        &self.planted
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Draws a cohort with `counts[c]` samples of class `c`. Samples are laid
    /// out class by class and named `{prefix}{index}`.
    pub fn sample_cohort(
        &self,
        counts: &[usize],
        flip_noise: f64,
        prefix: &str,
        rng: &mut Rng,
    ) -> Result<(ExpressionMatrix, LabelVector)> {
        if counts.len() != self.num_classes {
            return Err(Error::Config(format!(
                "{} class counts for a {}-class layout",
                counts.len(),
                self.num_classes
            )));
        }
        if !(0.0..=0.5).contains(&flip_noise) {
            return Err(Error::Config(format!("flip_noise must lie in [0, 0.5], got {flip_noise}")));
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(Error::Config("cohort has no samples".into()));
        }
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &k)| std::iter::repeat_n(c, k))
            .collect();
        let width = n.to_string().len();
        let ids: Vec<String> = (0..n).map(|i| format!("{prefix}{:0width$}", i + 1)).collect();

        let g = self.genes.len();
        let mut values = Tensor::zeros(g, n);
        let noise = Normal::new(0.0, LOG_SD).expect("valid normal");
        for r in 0..g {
            let mu = self.log_means[r];
            for v in values.row_mut(r) {
                *v = (mu + noise.sample(rng)).exp();
            }
        }
        for &(up, down, target) in &self.planted_rows {
            for (s, &label) in labels.iter().enumerate() {
                let in_target = match target {
                    None => label > 0,
                    Some(c) => label == c,
                };
                let want_up = if in_target {
                    !rng.random_bool(flip_noise)
                } else {
                    rng.random_bool(flip_noise)
                };
                let (a, b) = (values.get(up, s), values.get(down, s));
                if (a > b) != want_up {
                    values.set(up, s, b);
                    values.set(down, s, a);
                }
            }
        }
        let expr = ExpressionMatrix::new(self.genes.clone(), ids.clone(), values)?;
        let labels = LabelVector::new(ids, labels, self.num_classes)?;
        Ok((expr, labels))
    }
}

/// Pure function of `cfg`: layout and samples come from separate streams
/// derived from `cfg.seed`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticData> {
    let layout = SynthLayout::new(cfg)?;
    let mut rng = stream(cfg.seed, "synth-samples");
    let (expr, labels) = layout.sample_cohort(&cfg.n_samples_per_class, cfg.flip_noise, "S", &mut rng)?;
    Ok(SyntheticData {
        expr,
        labels,
        catalog: layout.catalog.clone(),
        planted: layout.planted.clone(),
    })
}
