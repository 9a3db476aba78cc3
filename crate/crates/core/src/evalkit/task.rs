//! Evaluation tasks: category membership (one binary task per category)
//! and numerical-feature regression.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::features::{Provenance, Representation};
use super::metrics::{macro_f1, mae, positive_class, spearman_rho, Prf};
use super::probe::{train_probe, ProbeKind, ProbeOptions};
use super::report::EvalReport;
use super::split::SplitSpec;
use crate::corpus::Taxonomy;
use crate::error::{Error, Result};

/// What a task predicts: `cat:<taxonomy>` or `num:<feature>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskTarget {
    Category(String),
    Numeric(String),
}

impl TaskTarget {
    /// The input a representation must not contain to be evaluated here.
    pub fn provenance(&self) -> Provenance {
        match self {
            TaskTarget::Category(t) => Provenance::Taxonomy(t.clone()),
            TaskTarget::Numeric(f) => Provenance::Feature(f.clone()),
        }
    }
}

impl fmt::Display for TaskTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskTarget::Category(t) => write!(f, "cat:{t}"),
            TaskTarget::Numeric(n) => write!(f, "num:{n}"),
        }
    }
}

impl FromStr for TaskTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().split_once(':') {
            Some(("cat", t)) if !t.is_empty() => Ok(TaskTarget::Category(t.to_string())),
            Some(("num", n)) if !n.is_empty() => Ok(TaskTarget::Numeric(n.to_string())),
            _ => Err(Error::Config(format!("task {s:?} must be cat:<taxonomy> or num:<feature>"))),
        }
    }
}

/// Labels indexed by location position.
#[derive(Debug, Clone, Copy)]
pub enum TaskData<'a> {
    Category(&'a Taxonomy),
    Numeric(&'a [Option<f64>]),
}

#[derive(Debug, Clone, Default)]
pub struct ProbeSettings {
    /// Regularization grid; `None` uses the probe kind's default.
    pub grid: Option<Vec<f64>>,
    pub options: ProbeOptions,
}

/// Tune-split score of the whole task and, if requested, test-split reports.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub tune_score: f64,
    pub reports: Vec<EvalReport>,
}

/// Fails if the representation was built from the task's target.
pub fn check_leakage(rep: &Representation, target: &TaskTarget) -> Result<()> {
    let p = target.provenance();
    if rep.provenance.contains(&p) {
        return Err(Error::Leakage(format!(
            "variant {} was trained with {p}, which is the target of task {target}",
            rep.variant
        )));
    }
    Ok(())
}

struct Subset {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn subset(rep: &Representation, idx: &[usize], label: impl Fn(usize) -> Option<f64>) -> Subset {
    let (x, y) = idx
        .iter()
        .filter_map(|&i| label(i).map(|y| (rep.rows[i].clone(), y)))
        .unzip();
    Subset { x, y }
}

struct Fitted {
    tune_score: f64,
    lambda: f64,
    test_pred: Vec<f64>,
    test_y: Vec<f64>,
}

fn fit_one(
    rep: &Representation,
    split: &SplitSpec,
    kind: ProbeKind,
    label: impl Fn(usize) -> Option<f64>,
    settings: &ProbeSettings,
    with_test: bool,
) -> Result<Fitted> {
    let train = subset(rep, &split.train, &label);
    let tune = subset(rep, &split.tune, &label);
    if train.x.is_empty() || tune.x.is_empty() {
        return Err(Error::Invalid("a task has no labelled locations in the train or tune split".into()));
    }
    let grid = settings.grid.as_deref().unwrap_or(kind.default_grid());
    let tuned = train_probe((&train.x, &train.y), (&tune.x, &tune.y), kind, grid, &settings.options)?;
    let (test_pred, test_y) = if with_test {
        let test = subset(rep, &split.test, &label);
        (test.x.iter().map(|r| tuned.probe.decision(r)).collect(), test.y)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(Fitted {
        tune_score: tuned.tune_score,
        lambda: tuned.probe.lambda,
        test_pred,
        test_y,
    })
}

fn hyper(rep: &Representation, lambda: f64) -> String {
    if rep.hyperparameters.is_empty() {
        format!("lambda={lambda}")
    } else {
        format!("{};lambda={lambda}", rep.hyperparameters)
    }
}

/// Fits probes on train, tunes on tune, and reports on test.
pub fn run_task(
    rep: &Representation,
    target: &TaskTarget,
    data: TaskData<'_>,
    split: &SplitSpec,
    settings: &ProbeSettings,
) -> Result<TaskOutcome> {
    evaluate_task(rep, target, data, split, settings, true)
}

/// As [`run_task`]; with `with_test = false` the test split is never read
/// and no reports are produced.
pub fn evaluate_task(
    rep: &Representation,
    target: &TaskTarget,
    data: TaskData<'_>,
    split: &SplitSpec,
    settings: &ProbeSettings,
    with_test: bool,
) -> Result<TaskOutcome> {
    check_leakage(rep, target)?;
    if rep.rows.len() != split.len() {
        return Err(Error::Invalid(format!(
            "representation has {} rows, split covers {} locations",
            rep.rows.len(),
            split.len()
        )));
    }
    match (target, data) {
        (TaskTarget::Category(tax_id), TaskData::Category(tax)) => {
            if &tax.taxonomy_id != tax_id {
                return Err(Error::Invalid(format!("task {target} given labels for {}", tax.taxonomy_id)));
            }
            let fitted: Vec<Fitted> = (0..tax.categories.len())
                .into_par_iter()
                .map(|c| {
                    let label = |i: usize| tax.assignment[i].map(|a| if a == c { 1.0 } else { 0.0 });
                    fit_one(rep, split, ProbeKind::Classifier, label, settings, with_test)
                })
                .collect::<Result<_>>()?;
            let tune_score = fitted.iter().map(|f| f.tune_score).sum::<f64>() / fitted.len() as f64;
            let mut reports = Vec::new();
            if with_test {
                let mut macros = Vec::new();
                let mut positives = Vec::new();
                for (c, f) in fitted.iter().enumerate() {
                    let pred: Vec<bool> = f.test_pred.iter().map(|&v| v > 0.0).collect();
                    let actual: Vec<bool> = f.test_y.iter().map(|&v| v > 0.5).collect();
                    let m = macro_f1(&pred, &actual);
                    macros.push(m);
                    positives.push(positive_class(&pred, &actual));
                    reports.push(EvalReport::classification(
                        &format!("{target}={}", tax.categories[c]),
                        &rep.variant,
                        m,
                        &hyper(rep, f.lambda),
                    ));
                }
                let summary = rep.hyperparameters.as_str();
                reports.push(EvalReport::classification(
                    &target.to_string(),
                    &rep.variant,
                    Prf::mean(&macros),
                    summary,
                ));
                reports.push(EvalReport::classification(
                    &format!("{target}[positive]"),
                    &rep.variant,
                    Prf::mean(&positives),
                    summary,
                ));
            }
            Ok(TaskOutcome { tune_score, reports })
        }
        (TaskTarget::Numeric(_), TaskData::Numeric(values)) => {
            if values.len() != rep.rows.len() {
                return Err(Error::Invalid("numeric labels do not cover every location".into()));
            }
            let f = fit_one(rep, split, ProbeKind::Regressor, |i| values[i], settings, with_test)?;
            let reports = if with_test {
                vec![EvalReport::regression(
                    &target.to_string(),
                    &rep.variant,
                    mae(&f.test_pred, &f.test_y),
                    spearman_rho(&f.test_pred, &f.test_y),
                    &hyper(rep, f.lambda),
                )]
            } else {
                Vec::new()
            };
            Ok(TaskOutcome {
                tune_score: f.tune_score,
                reports,
            })
        }
        _ => Err(Error::Invalid(format!("labels do not match the kind of task {target}"))),
    }
}
