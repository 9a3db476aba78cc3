use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CategoryAssignment, NumericalFeatureTable};
use crate::error::{Error, Result};
use crate::selection::SelectionResult;
use crate::weighting::AssociationMatrix;

/// Negative pairs per positive pair.
pub const NEGATIVE_RATIO: usize = 10;
/// Upper bound on negative pairs per location.
pub const NEGATIVE_CAP: usize = 1000;

/// GloVe weighting `f(x) = min(1, (x / x_max)^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GloveWeighting {
    pub x_max: f64,
    pub exponent: f64,
}

impl Default for GloveWeighting {
    fn default() -> Self {
        GloveWeighting {
            x_max: 100.0,
            exponent: 0.75,
        }
    }
}

impl GloveWeighting {
    pub fn weight(&self, x: f64) -> f64 {
        if x >= self.x_max {
            1.0
        } else {
            (x / self.x_max).powf(self.exponent)
        }
    }
}

/// A `(location, tag)` squared-loss term with its regression target and
/// per-term weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagTerm {
    pub loc: usize,
    pub tag: usize,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureTerm {
    pub loc: usize,
    pub feature: usize,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryTerm {
    pub loc: usize,
    pub category: usize,
}

/// Everything the objective sums over.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPlan {
    pub location_ids: Vec<String>,
    pub tag_names: Vec<String>,
    pub feature_names: Vec<String>,
    /// `taxonomy/category` names.
    pub category_names: Vec<String>,
    pub positives: Vec<TagTerm>,
    pub negatives: Vec<TagTerm>,
    pub features: Vec<FeatureTerm>,
    pub categories: Vec<CategoryTerm>,
    /// GloVe objective: log-count targets, `f(x)` weights and location
    /// biases; no negative, feature or category terms.
    pub glove: bool,
}

impl TrainingPlan {
    pub fn n_locations(&self) -> usize {
        self.location_ids.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tag_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_categories(&self) -> usize {
        self.category_names.len()
    }

    /// Number of negative pairs per location.
    pub fn negatives_per_location(&self) -> Vec<usize> {
        let mut n = vec![0; self.n_locations()];
        for t in &self.negatives {
            n[t.loc] += 1;
        }
        n
    }

    pub fn positives_per_location(&self) -> Vec<usize> {
        let mut n = vec![0; self.n_locations()];
        for t in &self.positives {
            n[t.loc] += 1;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub negatives: bool,
    pub negative_ratio: usize,
    pub negative_cap: usize,
    /// Loss weight of each negative term.
    pub negative_weight: f64,
    /// `Some` switches to the GloVe objective.
    pub glove: Option<GloveWeighting>,
    pub seed: u64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            negatives: true,
            negative_ratio: NEGATIVE_RATIO,
            negative_cap: NEGATIVE_CAP,
            negative_weight: 1.0,
            glove: None,
            seed: 0,
        }
    }
}

/// Number of negatives for a location with `positives` positive pairs and
/// `available` candidate tags.
pub fn negative_count(positives: usize, available: usize, ratio: usize, cap: usize) -> usize {
    (ratio * positives).min(cap).min(available)
}

/// Draws `k` distinct tags uniformly from `0..n_tags` minus `positives`
/// (sorted ascending). Returns them sorted.
fn sample_complement(rng: &mut ChaCha8Rng, n_tags: usize, positives: &[usize], k: usize) -> Vec<usize> {
    let available = n_tags - positives.len();
    let mut picks: Vec<usize> = rand::seq::index::sample(rng, available, k).into_vec();
    picks.sort_unstable();
    let mut out = Vec::with_capacity(k);
    let mut skipped = 0;
    for j in picks {
        while skipped < positives.len() && positives[skipped] <= j + skipped {
            skipped += 1;
        }
        out.push(j + skipped);
    }
    out
}

/// Builds the term lists for one training run.
///
/// `selection` restricts the tag vocabulary; `features` and `categories`
/// should already exclude anything held out for evaluation. Feature targets
/// are the table's z-scored values.
pub fn build_training_plan(
    assoc: &AssociationMatrix,
    selection: Option<&SelectionResult>,
    features: Option<&NumericalFeatureTable>,
    categories: &[CategoryAssignment],
    config: &PlanConfig,
) -> Result<TrainingPlan> {
    if !(config.negative_weight >= 0.0 && config.negative_weight.is_finite()) {
        return Err(Error::Config(format!(
            "negative weight must be finite and non-negative, got {}",
            config.negative_weight
        )));
    }
    // Restricted vocabulary, in matrix order.
    let (tag_map, tag_names): (Vec<Option<usize>>, Vec<String>) = match selection {
        None => (
            (0..assoc.n_tags()).map(Some).collect(),
            assoc.tags().to_vec(),
        ),
        Some(sel) => {
            let keep = sel.selected_set();
            let mut map = vec![None; assoc.n_tags()];
            let mut names = Vec::new();
            for (t, name) in assoc.tags().iter().enumerate() {
                if keep.contains(name.as_str()) {
                    map[t] = Some(names.len());
                    names.push(name.clone());
                }
            }
            (map, names)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let mut starved = 0usize;
    for l in 0..assoc.n_locations() {
        let mut pos_tags = Vec::new();
        for e in assoc.row(l) {
            let Some(t) = tag_map[e.tag] else { continue };
            pos_tags.push(t);
            let term = match config.glove {
                None => TagTerm {
                    loc: l,
                    tag: t,
                    target: e.ppmi,
                    weight: 1.0,
                },
                Some(g) => {
                    if !(e.count > 0.0) {
                        return Err(Error::Invalid(format!(
                            "GloVe mode needs positive co-occurrence counts; ({}, {}) has {}",
                            assoc.locations()[l],
                            assoc.tags()[e.tag],
                            e.count
                        )));
                    }
                    TagTerm {
                        loc: l,
                        tag: t,
                        target: e.count.ln(),
                        weight: g.weight(e.count),
                    }
                }
            };
            positives.push(term);
        }
        if pos_tags.is_empty() {
            starved += 1;
            continue;
        }
        if config.negatives && config.glove.is_none() {
            let k = negative_count(
                pos_tags.len(),
                tag_names.len() - pos_tags.len(),
                config.negative_ratio,
                config.negative_cap,
            );
            for t in sample_complement(&mut rng, tag_names.len(), &pos_tags, k) {
                negatives.push(TagTerm {
                    loc: l,
                    tag: t,
                    target: 0.0,
                    weight: config.negative_weight,
                });
            }
        }
    }
    if starved > 0 {
        warn!("{starved} location(s) have no positive tags and no tag terms");
    }

    let glove = config.glove.is_some();
    let mut feature_names = Vec::new();
    let mut feature_terms = Vec::new();
    let mut category_names = Vec::new();
    let mut category_terms = Vec::new();
    if !glove {
        if let Some(nf) = features {
            if nf.values.len() != assoc.n_locations() {
                return Err(Error::Invalid("feature table does not match the location set".into()));
            }
            feature_names = nf.feature_names.clone();
            for (l, row) in nf.normalized.iter().enumerate() {
                if let Some(row) = row {
                    for (k, &z) in row.iter().enumerate() {
                        feature_terms.push(FeatureTerm {
                            loc: l,
                            feature: k,
                            target: z,
                        });
                    }
                }
            }
        }
        for (c, cat) in categories.iter().enumerate() {
            category_names.push(format!("{}/{}", cat.taxonomy_id, cat.category_id));
            for &l in &cat.members {
                if l >= assoc.n_locations() {
                    return Err(Error::Invalid("category member outside the location set".into()));
                }
                category_terms.push(CategoryTerm { loc: l, category: c });
            }
        }
        category_terms.sort_by_key(|t| (t.loc, t.category));
    }

    Ok(TrainingPlan {
        location_ids: assoc.locations().to_vec(),
        tag_names,
        feature_names,
        category_names,
        positives,
        negatives,
        features: feature_terms,
        categories: category_terms,
        glove,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn matrix(n_loc: usize, n_tags: usize, positives: &[(usize, usize)]) -> AssociationMatrix {
        AssociationMatrix::from_cells(
            (0..n_loc).map(|l| format!("l{l}")).collect(),
            (0..n_tags).map(|t| format!("t{t:05}")).collect(),
            positives.iter().map(|&(l, t)| (l, t, 1.0 + t as f64, 2.0)),
        )
        .unwrap()
    }

    #[test]
    fn three_positives_give_thirty_negatives() {
        let m = matrix(1, 1000, &[(0, 5), (0, 17), (0, 999)]);
        let plan = build_training_plan(&m, None, None, &[], &PlanConfig::default()).unwrap();
        assert_eq!(plan.positives.len(), 3);
        assert_eq!(plan.negatives.len(), 30);
        let pos: HashSet<usize> = plan.positives.iter().map(|t| t.tag).collect();
        let neg: HashSet<usize> = plan.negatives.iter().map(|t| t.tag).collect();
        assert_eq!(neg.len(), 30);
        assert!(pos.is_disjoint(&neg));
        assert!(plan.negatives.iter().all(|t| t.target == 0.0 && t.weight == 1.0));
    }

    #[test]
    fn negatives_are_capped() {
        let pos: Vec<(usize, usize)> = (0..200).map(|t| (0, t * 7)).collect();
        let m = matrix(1, 5000, &pos);
        let plan = build_training_plan(&m, None, None, &[], &PlanConfig::default()).unwrap();
        assert_eq!(plan.negatives.len(), 1000);
    }

    #[test]
    fn small_vocabulary_limits_negatives() {
        let m = matrix(1, 12, &[(0, 0), (0, 1)]);
        let plan = build_training_plan(&m, None, None, &[], &PlanConfig::default()).unwrap();
        assert_eq!(plan.negatives.len(), 10);
    }

    #[test]
    fn location_without_positives_gets_no_negatives() {
        let m = matrix(2, 100, &[(0, 3)]);
        let plan = build_training_plan(&m, None, None, &[], &PlanConfig::default()).unwrap();
        assert_eq!(plan.negatives_per_location(), vec![10, 0]);
    }

    #[test]
    fn same_seed_same_plan() {
        let pos: Vec<(usize, usize)> = (0..20).map(|i| (i % 4, i * 3)).collect();
        let m = matrix(4, 200, &pos);
        let cfg = PlanConfig { seed: 42, ..Default::default() };
        let a = build_training_plan(&m, None, None, &[], &cfg).unwrap();
        let b = build_training_plan(&m, None, None, &[], &cfg).unwrap();
        assert_eq!(a, b);
        let c = build_training_plan(&m, None, None, &[], &PlanConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.negatives, c.negatives);
    }

    #[test]
    fn complement_sampling_covers_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let positives = [0, 2, 3, 9];
        let all = sample_complement(&mut rng, 10, &positives, 6);
        assert_eq!(all, vec![1, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn selection_restricts_vocabulary() {
        let m = matrix(1, 5, &[(0, 0), (0, 1), (0, 4)]);
        let sel = SelectionResult {
            scored: vec![("t00004".into(), 1.0), ("t00001".into(), 0.5)],
            selected: vec!["t00004".into(), "t00001".into()],
            gamma: 10.0,
            classes: vec![],
        };
        let plan = build_training_plan(&m, Some(&sel), None, &[], &PlanConfig::default()).unwrap();
        assert_eq!(plan.tag_names, ["t00001", "t00004"]);
        assert_eq!(plan.positives.len(), 2);
        assert!(plan.negatives.is_empty());
    }

    #[test]
    fn glove_terms_use_log_counts() {
        let m = matrix(1, 3, &[(0, 1)]);
        let cfg = PlanConfig {
            glove: Some(GloveWeighting::default()),
            ..Default::default()
        };
        let plan = build_training_plan(&m, None, None, &[], &cfg).unwrap();
        assert!(plan.glove);
        assert!(plan.negatives.is_empty());
        assert_eq!(plan.positives[0].target, 2f64.ln());
        assert!((plan.positives[0].weight - 0.02f64.powf(0.75)).abs() < 1e-15);
    }

    #[test]
    fn glove_weighting_function() {
        let g = GloveWeighting::default();
        assert_eq!(g.weight(100.0), 1.0);
        assert_eq!(g.weight(250.0), 1.0);
        assert!((g.weight(50.0) - 0.5f64.powf(0.75)).abs() < 1e-15);
        assert!((g.weight(1.0) - 0.01f64.powf(0.75)).abs() < 1e-15);
    }
}
