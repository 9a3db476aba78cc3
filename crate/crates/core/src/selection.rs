//! KL-divergence tag selection with Bayesian smoothing.
//!
//! Each tag is scored by how far its (smoothed) class distribution departs
//! from the class prior:
//!
//! ```text
//! Q(C_i)    = sum_{l in C_i} sum_t w(t,l) / sum_j sum_{l in C_j} sum_t w(t,l)
//! P(C_i|t)  = (sum_{l in C_i} w(t,l) + gamma Q(C_i)) / (N + gamma)
//! KL(t)     = sum_i P(C_i|t) ln(P(C_i|t) / Q(C_i))
//! ```
//!
//! By default `P(.|t)` is renormalized over the classes before the KL sum and
//! `N` is the mass over classed locations only; both are configurable.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use log::warn;

use crate::corpus::Taxonomy;
use crate::error::{Error, Result};
use crate::weighting::AssociationMatrix;

/// Default number of selected tags.
pub const DEFAULT_TOP_K: usize = 100_000;
/// Smoothing strengths searched during tuning.
pub const GAMMA_GRID: [f64; 3] = [10.0, 100.0, 1000.0];

/// Mutually exclusive location classes `C_1..C_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    pub names: Vec<String>,
    /// Class index per location position; `None` for unclassed locations.
    pub class_of: Vec<Option<usize>>,
}

impl ClassSet {
    pub fn new(names: Vec<String>, class_of: Vec<Option<usize>>) -> Self {
        ClassSet { names, class_of }
    }

    /// Classes from a taxonomy, keeping only locations in `restrict` when
    /// given.
    pub fn from_taxonomy(tax: &Taxonomy, restrict: Option<&[usize]>) -> Self {
        let class_of = restrict_to(&tax.assignment, restrict);
        ClassSet::new(tax.categories.clone(), class_of)
    }

    /// Classes from a numeric target discretized at ascending `cutoffs`:
    /// class `k` holds values with exactly `k` cutoffs `<=` the value.
    pub fn from_cutoffs(values: &[Option<f64>], cutoffs: &[f64], restrict: Option<&[usize]>) -> Result<Self> {
        if cutoffs.is_empty() || cutoffs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "cutoffs must be non-empty and strictly ascending: {cutoffs:?}"
            )));
        }
        let mut names = vec![format!("<{}", cutoffs[0])];
        for w in cutoffs.windows(2) {
            names.push(format!("[{},{})", w[0], w[1]));
        }
        names.push(format!(">={}", cutoffs[cutoffs.len() - 1]));
        let assignment: Vec<Option<usize>> = values
            .iter()
            .map(|v| v.map(|x| cutoffs.iter().filter(|&&c| c <= x).count()))
            .collect();
        Ok(ClassSet::new(names, restrict_to(&assignment, restrict)))
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }
}

fn restrict_to(assignment: &[Option<usize>], restrict: Option<&[usize]>) -> Vec<Option<usize>> {
    match restrict {
        None => assignment.to_vec(),
        Some(keep) => {
            let mut out = vec![None; assignment.len()];
            for &l in keep {
                out[l] = assignment[l];
            }
            out
        }
    }
}

/// Which mass the smoothing denominator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosteriorMass {
    /// Total weight over locations that belong to some class.
    Classed,
    /// Total weight over all locations.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    pub gamma: f64,
    pub k: usize,
    /// Renormalize `P(.|t)` over classes before computing KL.
    pub normalize: bool,
    pub mass: PosteriorMass,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions {
            gamma: GAMMA_GRID[0],
            k: DEFAULT_TOP_K,
            normalize: true,
            mass: PosteriorMass::Classed,
        }
    }
}

/// `sum_{l in C_i} w(t, l)` for every tag and class, as `[tag][class]`.
pub fn class_weight_sums(assoc: &AssociationMatrix, classes: &ClassSet) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; classes.n_classes()]; assoc.n_tags()];
    for l in 0..assoc.n_locations() {
        if let Some(c) = classes.class_of[l] {
            for e in assoc.row(l) {
                sums[e.tag][c] += e.weight;
            }
        }
    }
    sums
}

/// Maximum-likelihood class priors `Q(C_i)`. Classes without mass get 0.
pub fn class_priors(assoc: &AssociationMatrix, classes: &ClassSet) -> Vec<f64> {
    let mut mass = vec![0.0; classes.n_classes()];
    for l in 0..assoc.n_locations() {
        if let Some(c) = classes.class_of[l] {
            mass[c] += assoc.location_weight_sum(l);
        }
    }
    let total: f64 = mass.iter().sum();
    for (name, m) in classes.names.iter().zip(&mass) {
        if *m == 0.0 {
            warn!("class {name} has zero total weight; its prior is 0");
        }
    }
    if total == 0.0 {
        return mass;
    }
    mass.iter().map(|m| m / total).collect()
}

/// The smoothing mass `N` for the given convention.
pub fn posterior_mass(assoc: &AssociationMatrix, classes: &ClassSet, mass: PosteriorMass) -> f64 {
    match mass {
        PosteriorMass::All => assoc.total(),
        PosteriorMass::Classed => (0..assoc.n_locations())
            .filter(|&l| classes.class_of[l].is_some())
            .map(|l| assoc.location_weight_sum(l))
            .sum(),
    }
}

/// Raw smoothed `P(C_i | t)` (not renormalized).
pub fn smoothed_posterior(
    assoc: &AssociationMatrix,
    tag: usize,
    classes: &ClassSet,
    gamma: f64,
    n_sel: f64,
    priors: &[f64],
) -> Vec<f64> {
    let mut sums = vec![0.0; classes.n_classes()];
    for l in 0..assoc.n_locations() {
        if let Some(c) = classes.class_of[l] {
            sums[c] += assoc.weight(l, tag);
        }
    }
    posterior_from_sums(&sums, gamma, n_sel, priors)
}

fn posterior_from_sums(sums: &[f64], gamma: f64, n_sel: f64, priors: &[f64]) -> Vec<f64> {
    sums.iter()
        .zip(priors)
        .map(|(s, q)| (s + gamma * q) / (n_sel + gamma))
        .collect()
}

/// `sum_i P_i ln(P_i / Q_i)`, optionally after renormalizing `P`. Terms with
/// `P_i = 0` or `Q_i = 0` contribute nothing.
pub fn kl_divergence(posterior: &[f64], priors: &[f64], normalize: bool) -> f64 {
    let z: f64 = if normalize { posterior.iter().sum() } else { 1.0 };
    posterior
        .iter()
        .zip(priors)
        .filter(|(p, q)| **p > 0.0 && **q > 0.0)
        .map(|(p, q)| {
            let p = p / z;
            p * (p / q).ln()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Every vocabulary tag with its score, best first.
    pub scored: Vec<(String, f64)>,
    /// The top-K tags, best first.
    pub selected: Vec<String>,
    pub gamma: f64,
    pub classes: Vec<String>,
}

impl SelectionResult {
    pub fn selected_set(&self) -> HashSet<&str> {
        self.selected.iter().map(String::as_str).collect()
    }

    /// Writes `tag  kl_score` for the selected tags, best first.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (tag, score) in self.scored.iter().take(self.selected.len()) {
            writeln!(out, "{tag}\t{score}")?;
        }
        Ok(())
    }

    /// Reads a file written by [`SelectionResult::write_tsv`]. `#` lines are
    /// skipped. Gamma and classes are not stored in the file body.
    pub fn read_tsv<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut scored = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, score) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected tag<TAB>score"))?;
            let score: f64 = score
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad score {score}")))?;
            scored.push((tag.to_string(), score));
        }
        Ok(SelectionResult {
            selected: scored.iter().map(|(t, _)| t.clone()).collect(),
            scored,
            gamma: f64::NAN,
            classes: Vec::new(),
        })
    }
}

/// Scores every tag and keeps the top `opts.k`.
///
/// Ties are broken by total tag weight (descending), then by tag name.
pub fn kl_select(assoc: &AssociationMatrix, classes: &ClassSet, opts: &SelectionOptions) -> Result<SelectionResult> {
    if opts.k == 0 {
        return Err(Error::Config("number of selected tags K must be positive".into()));
    }
    if !(opts.gamma > 0.0) {
        return Err(Error::Config(format!("gamma must be positive, got {}", opts.gamma)));
    }
    if classes.class_of.len() != assoc.n_locations() {
        return Err(Error::Invalid("class assignment does not match the location set".into()));
    }
    let priors = class_priors(assoc, classes);
    if priors.iter().filter(|&&q| q > 0.0).count() < 2 {
        return Err(Error::Invalid(
            "KL selection needs at least two classes with positive mass".into(),
        ));
    }
    let n_sel = posterior_mass(assoc, classes, opts.mass);
    let sums = class_weight_sums(assoc, classes);
    let mut order: Vec<(usize, f64)> = sums
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let p = posterior_from_sums(s, opts.gamma, n_sel, &priors);
            (t, kl_divergence(&p, &priors, opts.normalize))
        })
        .collect();
    order.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| assoc.tag_weight_sum(b.0).total_cmp(&assoc.tag_weight_sum(a.0)))
            .then_with(|| assoc.tags()[a.0].cmp(&assoc.tags()[b.0]))
    });
    let scored: Vec<(String, f64)> = order
        .into_iter()
        .map(|(t, s)| (assoc.tags()[t].clone(), s))
        .collect();
    let selected = scored.iter().take(opts.k).map(|(t, _)| t.clone()).collect();
    Ok(SelectionResult {
        scored,
        selected,
        gamma: opts.gamma,
        classes: classes.names.clone(),
    })
}
