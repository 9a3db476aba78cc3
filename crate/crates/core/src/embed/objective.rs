//! The joint objective and its analytic gradient.
//!
//! ```text
//! J_tags = sum over tag terms   weight * (v_l . w_t + b_t [+ b_l] - target)^2
//! J_nf   = sum over nf terms    (v_l . w_f + b_f - score)^2
//! J_cat  = sum over memberships ||v_l - w_cat||^2
//! J      = alpha J_tags + (1 - alpha) J_nf + beta J_cat
//! ```
//!
//! `b_l` only appears in GloVe mode, where `J = J_tags`.

use super::model::{dot, EmbeddingModel, Params};
use super::plan::{CategoryTerm, FeatureTerm, TagTerm, TrainingPlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub tags: f64,
    pub features: f64,
    pub categories: f64,
}

impl ObjectiveValue {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.tags.is_finite() && self.features.is_finite() && self.categories.is_finite()
    }
}

/// Multipliers applied to each component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ComponentWeights {
    pub tags: f64,
    pub features: f64,
    pub categories: f64,
}

impl ComponentWeights {
    pub fn new(alpha: f64, beta: f64, glove: bool) -> Self {
        if glove {
            ComponentWeights {
                tags: 1.0,
                features: 0.0,
                categories: 0.0,
            }
        } else {
            ComponentWeights {
                tags: alpha,
                features: 1.0 - alpha,
                categories: beta,
            }
        }
    }
}

pub(crate) fn tag_residual(p: &Params, t: &TagTerm, glove: bool) -> f64 {
    let mut pred = dot(p.locations.row(t.loc), p.tags.row(t.tag)) + p.tag_bias[t.tag];
    if glove {
        pred += p.location_bias[t.loc];
    }
    pred - t.target
}

pub(crate) fn feature_residual(p: &Params, t: &FeatureTerm) -> f64 {
    dot(p.locations.row(t.loc), p.features.row(t.feature)) + p.feature_bias[t.feature] - t.target
}

pub(crate) fn category_distance_sq(p: &Params, t: &CategoryTerm) -> f64 {
    p.locations
        .row(t.loc)
        .iter()
        .zip(p.categories.row(t.category))
        .map(|(v, w)| (v - w) * (v - w))
        .sum()
}

/// Evaluates `J` and its components for `params` under `plan`.
pub fn evaluate(params: &Params, alpha: f64, beta: f64, plan: &TrainingPlan) -> ObjectiveValue {
    // fold from +0.0: an empty f64 sum is -0.0
    let tags = plan
        .positives
        .iter()
        .chain(&plan.negatives)
        .map(|t| {
            let r = tag_residual(params, t, plan.glove);
            t.weight * r * r
        })
        .fold(0.0, |a, b| a + b);
    let features = plan
        .features
        .iter()
        .map(|t| feature_residual(params, t).powi(2))
        .fold(0.0, |a, b| a + b);
    let categories = plan
        .categories
        .iter()
        .map(|t| category_distance_sq(params, t))
        .fold(0.0, |a, b| a + b);
    let w = ComponentWeights::new(alpha, beta, plan.glove);
    let total = if plan.glove {
        tags
    } else {
        w.tags * tags + w.features * features + w.categories * categories
    };
    ObjectiveValue {
        total,
        tags,
        features,
        categories,
    }
}

pub fn objective(model: &EmbeddingModel, plan: &TrainingPlan) -> ObjectiveValue {
    evaluate(&model.params, model.alpha, model.beta, plan)
}

/// Exact gradient of [`objective`] with respect to every parameter.
pub fn gradients(model: &EmbeddingModel, plan: &TrainingPlan) -> Params {
    gradient_of(&model.params, model.alpha, model.beta, plan)
}

pub fn gradient_of(params: &Params, alpha: f64, beta: f64, plan: &TrainingPlan) -> Params {
    let w = ComponentWeights::new(alpha, beta, plan.glove);
    let mut g = Params::zeros(params.shape());
    let dim = params.shape().dim;

    for t in plan.positives.iter().chain(&plan.negatives) {
        let c = 2.0 * w.tags * t.weight * tag_residual(params, t, plan.glove);
        for k in 0..dim {
            g.locations.row_mut(t.loc)[k] += c * params.tags.row(t.tag)[k];
            g.tags.row_mut(t.tag)[k] += c * params.locations.row(t.loc)[k];
        }
        g.tag_bias[t.tag] += c;
        if plan.glove {
            g.location_bias[t.loc] += c;
        }
    }
    for t in &plan.features {
        let c = 2.0 * w.features * feature_residual(params, t);
        for k in 0..dim {
            g.locations.row_mut(t.loc)[k] += c * params.features.row(t.feature)[k];
            g.features.row_mut(t.feature)[k] += c * params.locations.row(t.loc)[k];
        }
        g.feature_bias[t.feature] += c;
    }
    for t in &plan.categories {
        for k in 0..dim {
            let diff = params.locations.row(t.loc)[k] - params.categories.row(t.category)[k];
            g.locations.row_mut(t.loc)[k] += 2.0 * w.categories * diff;
            g.categories.row_mut(t.category)[k] -= 2.0 * w.categories * diff;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::model::Shape;

    fn plan(positives: Vec<TagTerm>, categories: Vec<CategoryTerm>) -> TrainingPlan {
        TrainingPlan {
            location_ids: vec!["a".into(), "b".into()],
            tag_names: vec!["x".into(), "y".into()],
            feature_names: vec![],
            category_names: vec!["t/c".into()],
            positives,
            negatives: vec![],
            features: vec![],
            categories,
            glove: false,
        }
    }

    fn shape() -> Shape {
        Shape {
            dim: 2,
            locations: 2,
            tags: 2,
            features: 0,
            categories: 1,
        }
    }

    #[test]
    fn exact_fit_is_zero() {
        let p = Params::zeros(shape());
        let terms = vec![TagTerm { loc: 0, tag: 1, target: 0.0, weight: 1.0 }];
        let j = evaluate(&p, 0.5, 2.0, &plan(terms, vec![CategoryTerm { loc: 1, category: 0 }]));
        assert_eq!(j.total, 0.0);
        let g = gradient_of(&p, 0.5, 2.0, &plan(vec![], vec![]));
        assert!(g.iter().all(|x| x == 0.0));
    }

    #[test]
    fn unit_residual() {
        let mut p = Params::zeros(shape());
        p.locations.row_mut(0).copy_from_slice(&[1.0, 0.0]);
        p.tags.row_mut(0).copy_from_slice(&[0.5, 3.0]);
        p.tag_bias[0] = 0.5;
        let terms = vec![TagTerm { loc: 0, tag: 0, target: 0.0, weight: 1.0 }];
        let j = evaluate(&p, 1.0, 0.0, &plan(terms, vec![]));
        assert_eq!(j.tags, 1.0);
        assert_eq!(j.total, 1.0);
    }

    #[test]
    fn category_gradient_is_quadratic_form() {
        let mut p = Params::zeros(shape());
        p.locations.row_mut(1).copy_from_slice(&[1.0, -2.0]);
        p.categories.row_mut(0).copy_from_slice(&[0.5, 0.5]);
        let beta = 3.0;
        let pl = plan(vec![], vec![CategoryTerm { loc: 1, category: 0 }]);
        let g = gradient_of(&p, 0.3, beta, &pl);
        assert_eq!(g.locations.row(1), &[2.0 * beta * 0.5, 2.0 * beta * -2.5]);
        assert_eq!(g.categories.row(0), &[-2.0 * beta * 0.5, -2.0 * beta * -2.5]);
        assert!(g.tags.as_slice().iter().all(|&x| x == 0.0));
        let j = evaluate(&p, 0.3, beta, &pl);
        assert_eq!(j.categories, 0.25 + 6.25);
        assert_eq!(j.total, beta * j.categories);
    }
}
