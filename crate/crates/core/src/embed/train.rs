use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{dot, EmbeddingModel, Params, Shape};
use super::objective::{evaluate, ComponentWeights, ObjectiveValue};
use super::plan::TrainingPlan;
use crate::error::{Error, Result};

/// Adagrad denominator offset.
pub const ADAGRAD_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 10,
            alpha: 0.1,
            beta: 1.0,
            lr: 0.05,
            iterations: 30,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Objective before the first update.
    pub initial: ObjectiveValue,
    /// Objective after each iteration.
    pub history: Vec<ObjectiveValue>,
}

#[derive(Debug, Clone, Copy)]
enum Term {
    Positive(usize),
    Negative(usize),
    Feature(usize),
    Category(usize),
}

/// Creates a model with uniformly initialized parameters and zero
/// accumulators.
pub fn init_model(plan: &TrainingPlan, config: &TrainConfig, rng: &mut ChaCha8Rng) -> EmbeddingModel {
    let shape = Shape {
        dim: config.dim,
        locations: plan.n_locations(),
        tags: plan.n_tags(),
        features: plan.n_features(),
        categories: plan.n_categories(),
    };
    EmbeddingModel {
        dim: config.dim,
        alpha: config.alpha,
        beta: config.beta,
        seed: config.seed,
        params: Params::uniform(shape, rng),
        accumulators: Params::zeros(shape),
        location_ids: plan.location_ids.clone(),
        tag_names: plan.tag_names.clone(),
        feature_names: plan.feature_names.clone(),
        category_names: plan.category_names.clone(),
    }
}

/// Per-coordinate Adagrad update; accumulates `g^2` before stepping.
#[inline]
fn adagrad(theta: &mut f64, acc: &mut f64, g: f64, lr: f64) {
    *acc += g * g;
    *theta -= lr * g / (*acc + ADAGRAD_EPSILON).sqrt();
}

/// Applies one stochastic Adagrad step for a single term.
fn step(model: &mut EmbeddingModel, plan: &TrainingPlan, w: ComponentWeights, lr: f64, term: Term, scratch: &mut Vec<f64>) {
    let p = &mut model.params;
    let a = &mut model.accumulators;
    let dim = model.dim;
    match term {
        Term::Positive(i) | Term::Negative(i) => {
            let t = match term {
                Term::Positive(_) => &plan.positives[i],
                _ => &plan.negatives[i],
            };
            let mut pred = dot(p.locations.row(t.loc), p.tags.row(t.tag)) + p.tag_bias[t.tag];
            if plan.glove {
                pred += p.location_bias[t.loc];
            }
            let c = 2.0 * w.tags * t.weight * (pred - t.target);
            scratch.clear();
            scratch.extend_from_slice(p.locations.row(t.loc));
            for k in 0..dim {
                let wk = p.tags.row(t.tag)[k];
                adagrad(
                    &mut p.locations.row_mut(t.loc)[k],
                    &mut a.locations.row_mut(t.loc)[k],
                    c * wk,
                    lr,
                );
                adagrad(
                    &mut p.tags.row_mut(t.tag)[k],
                    &mut a.tags.row_mut(t.tag)[k],
                    c * scratch[k],
                    lr,
                );
            }
            adagrad(&mut p.tag_bias[t.tag], &mut a.tag_bias[t.tag], c, lr);
            if plan.glove {
                adagrad(&mut p.location_bias[t.loc], &mut a.location_bias[t.loc], c, lr);
            }
        }
        Term::Feature(i) => {
            let t = &plan.features[i];
            let pred = dot(p.locations.row(t.loc), p.features.row(t.feature)) + p.feature_bias[t.feature];
            let c = 2.0 * w.features * (pred - t.target);
            scratch.clear();
            scratch.extend_from_slice(p.locations.row(t.loc));
            for k in 0..dim {
                let fk = p.features.row(t.feature)[k];
                adagrad(
                    &mut p.locations.row_mut(t.loc)[k],
                    &mut a.locations.row_mut(t.loc)[k],
                    c * fk,
                    lr,
                );
                adagrad(
                    &mut p.features.row_mut(t.feature)[k],
                    &mut a.features.row_mut(t.feature)[k],
                    c * scratch[k],
                    lr,
                );
            }
            adagrad(&mut p.feature_bias[t.feature], &mut a.feature_bias[t.feature], c, lr);
        }
        Term::Category(i) => {
            let t = &plan.categories[i];
            for k in 0..dim {
                let diff = p.locations.row(t.loc)[k] - p.categories.row(t.category)[k];
                let g = 2.0 * w.categories * diff;
                adagrad(
                    &mut p.locations.row_mut(t.loc)[k],
                    &mut a.locations.row_mut(t.loc)[k],
                    g,
                    lr,
                );
                adagrad(
                    &mut p.categories.row_mut(t.category)[k],
                    &mut a.categories.row_mut(t.category)[k],
                    -g,
                    lr,
                );
            }
        }
    }
}

/// Runs `iterations` shuffled passes over every term of `model`'s plan,
/// updating `model` in place and returning the objective after each pass.
pub fn run_epochs(
    model: &mut EmbeddingModel,
    plan: &TrainingPlan,
    lr: f64,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ObjectiveValue>> {
    let w = ComponentWeights::new(model.alpha, model.beta, plan.glove);
    let mut terms: Vec<Term> = Vec::with_capacity(
        plan.positives.len() + plan.negatives.len() + plan.features.len() + plan.categories.len(),
    );
    terms.extend((0..plan.positives.len()).map(Term::Positive));
    terms.extend((0..plan.negatives.len()).map(Term::Negative));
    terms.extend((0..plan.features.len()).map(Term::Feature));
    terms.extend((0..plan.categories.len()).map(Term::Category));

    let mut scratch = Vec::with_capacity(model.dim);
    let mut history = Vec::with_capacity(iterations);
    for it in 1..=iterations {
        terms.shuffle(rng);
        for &term in &terms {
            step(model, plan, w, lr, term, &mut scratch);
        }
        let j = evaluate(&model.params, model.alpha, model.beta, plan);
        if !j.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                value: j.total,
            });
        }
        log::debug!("iteration {it}: J = {}", j.total);
        history.push(j);
    }
    Ok(history)
}

/// Trains an embedding model with per-parameter Adagrad.
///
/// Deterministic for a fixed plan and config.
pub fn train(plan: &TrainingPlan, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = init_model(plan, config, &mut rng);
    let initial = evaluate(&model.params, model.alpha, model.beta, plan);
    let history = run_epochs(&mut model, plan, config.lr, config.iterations, &mut rng)?;
    Ok(TrainOutcome {
        model,
        initial,
        history,
    })
}

/// Writes the objective log as CSV; row 0 is the initial value.
pub fn write_objective_csv<W: std::io::Write>(out: &mut W, outcome: &TrainOutcome) -> std::io::Result<()> {
    writeln!(out, "iteration,J,J_tags,J_nf,J_cat")?;
    for (i, j) in std::iter::once(&outcome.initial).chain(&outcome.history).enumerate() {
        writeln!(out, "{i},{},{},{},{}", j.total, j.tags, j.features, j.categories)?;
    }
    Ok(())
}
