//! Grid search selected on the tune split.
//!
//! For every task, each candidate is trained with that task's target held
//! out and scored on the tune split only. The test split is evaluated once,
//! for the winning candidate.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::artifacts::{self, write_with_header};
use super::config::{PipelineConfig, Variant};
use super::stages::{load_assoc, probe_settings, select_tags, train_representation, Inputs, Labels};
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_task, write_report_csv, EvalReport, Representation, TaskTarget};

/// One point of the grid. Fields the variant ignores keep the config value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Candidate {
    pub fn apply(&self, cfg: &PipelineConfig) -> PipelineConfig {
        let mut c = cfg.clone();
        c.train.dim = self.dim;
        c.train.alpha = self.alpha;
        c.train.beta = self.beta;
        c.gamma = self.gamma;
        c
    }

    fn label(&self, variant: Variant) -> String {
        let mut c = PipelineConfig::defaults(Path::new("."));
        c.variant = variant;
        super::stages::describe(&self.apply(&c))
    }
}

/// Grid points relevant to the configured variant, in grid order.
pub fn candidates(cfg: &PipelineConfig) -> Vec<Candidate> {
    let v = cfg.variant;
    let dims = if v.is_bow() { vec![cfg.train.dim] } else { cfg.grid_dim.clone() };
    let (alphas, betas) = if v == Variant::EgelAll {
        (cfg.grid_alpha.clone(), cfg.grid_beta.clone())
    } else {
        (vec![cfg.train.alpha], vec![cfg.train.beta])
    };
    let gammas = if v.uses_selection() { cfg.grid_gamma.clone() } else { vec![cfg.gamma] };
    let mut out = Vec::new();
    for &dim in &dims {
        for &alpha in &alphas {
            for &beta in &betas {
                for &gamma in &gammas {
                    out.push(Candidate { dim, alpha, beta, gamma });
                }
            }
        }
    }
    out
}

/// The tune score of one candidate on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepDecision {
    pub task: TaskTarget,
    pub candidate: String,
    pub tune_score: f64,
    pub selected: bool,
}

impl fmt::Display for SweepDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.task, self.candidate, self.tune_score, self.selected)
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub decisions: Vec<SweepDecision>,
    /// Test-split reports of the selected candidate of each task.
    pub reports: Vec<EvalReport>,
}

/// Runs the grid for every task and writes `sweep_log.csv` and
/// `sweep_report.csv`. Needs `assoc.tsv` from `build`.
pub fn cmd_sweep(cfg: &PipelineConfig, out: &Path) -> Result<SweepOutcome> {
    if cfg.tasks.is_empty() {
        return Err(Error::Config("no tasks configured".into()));
    }
    cfg.warn_ignored_keys();
    let inputs = Inputs::load(cfg)?;
    let assoc = load_assoc(cfg, out, &inputs.locations)?;
    let split = inputs.split(cfg);
    let settings = probe_settings(cfg);
    let grid = candidates(cfg);
    log::info!("sweeping {} candidate(s) for variant {}", grid.len(), cfg.variant);

    let mut decisions = Vec::new();
    let mut reports = Vec::new();
    for task in &cfg.tasks {
        let labels = Labels::for_target(task, &inputs)?;
        let held_out = std::slice::from_ref(task);
        let scored: Vec<(f64, Representation)> = grid
            .par_iter()
            .map(|cand| {
                let c = cand.apply(cfg);
                let selection = if c.variant.uses_selection() {
                    Some(select_tags(&c, &assoc, task, &inputs, &split)?)
                } else {
                    None
                };
                let trained = train_representation(&c, &assoc, selection.as_ref(), &inputs, &split, held_out)?;
                let outcome = evaluate_task(&trained.representation, task, labels.data(), &split, &settings, false)?;
                Ok((outcome.tune_score, trained.representation))
            })
            .collect::<Result<_>>()?;

        let mut best = 0;
        for (i, (score, _)) in scored.iter().enumerate() {
            if *score > scored[best].0 {
                best = i;
            }
        }
        for (i, (cand, (score, _))) in grid.iter().zip(&scored).enumerate() {
            decisions.push(SweepDecision {
                task: task.clone(),
                candidate: cand.label(cfg.variant),
                tune_score: *score,
                selected: i == best,
            });
        }
        log::info!(
            "{task}: selected {} (tune score {})",
            grid[best].label(cfg.variant),
            scored[best].0
        );
        let outcome = evaluate_task(&scored[best].1, task, labels.data(), &split, &settings, true)?;
        reports.extend(outcome.reports);
    }

    let (hash, seed) = (cfg.hash(), cfg.seed);
    write_with_header(&out.join(artifacts::SWEEP_LOG), "sweep_log", &hash, seed, |w| {
        writeln!(w, "task,candidate,tune_score,selected")?;
        for d in &decisions {
            writeln!(w, "{d}")?;
        }
        Ok(())
    })?;
    write_with_header(&out.join(artifacts::SWEEP_REPORT), "sweep_report", &hash, seed, |w| {
        write_report_csv(w, &reports)
    })?;
    Ok(SweepOutcome { decisions, reports })
}
