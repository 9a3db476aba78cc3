//! The pipeline stages, in memory and as resumable on-disk commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use super::artifacts::{self, require, require_exists, write_meta, write_with_header};
use super::config::{InputPath, PipelineConfig, Variant};
use crate::corpus::{
    load_categories, load_locations, load_numerical_features, load_tag_records, CategoryAssignment, LocationSet,
    NumericalFeatureTable, Taxonomy,
};
use crate::embed::{
    build_training_plan, load_vectors, save_vectors, train, write_objective_csv, PlanConfig, TrainOutcome,
    VectorFormat, Vectors,
};
use crate::error::{Error, Result};
use crate::evalkit::{
    bow_representation, format_provenance, make_split, parse_provenance, run_task, write_report_csv, EvalReport,
    ProbeOptions, ProbeSettings, Provenance, Representation, SplitSpec, TaskData, TaskTarget,
};
use crate::selection::{kl_select, ClassSet, SelectionOptions, SelectionResult};
use crate::synthgen::{generate, SynthPaths};
use crate::weighting::{build_association_matrix, AssociationMatrix, WeightingParams};

/// Location table plus the optional structured inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub locations: LocationSet,
    /// Raw values; z-scoring happens per training run.
    pub features: Option<NumericalFeatureTable>,
    pub categories: Vec<CategoryAssignment>,
}

/// Loads an optional input: a missing default path means "not provided".
fn load_optional<T>(p: &InputPath, load: impl FnOnce(&Path) -> Result<T>) -> Result<Option<T>> {
    if p.explicit || p.path.exists() {
        load(&p.path).map(Some)
    } else {
        Ok(None)
    }
}

impl Inputs {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let locations = load_locations(&cfg.locations.path)?;
        let features = load_optional(&cfg.features, |p| load_numerical_features(p, &locations))?;
        let categories = load_optional(&cfg.categories, |p| load_categories(p, &locations))?.unwrap_or_default();
        Ok(Inputs {
            locations,
            features,
            categories,
        })
    }

    pub fn split(&self, cfg: &PipelineConfig) -> SplitSpec {
        make_split(self.locations.len(), cfg.seed)
    }

    pub fn taxonomy(&self, id: &str) -> Result<Taxonomy> {
        Taxonomy::from_assignments(id, &self.categories, self.locations.len())
            .ok_or_else(|| Error::Config(format!("taxonomy {id:?} not found in the categories input")))
    }

    /// Raw values of one feature per location.
    pub fn feature_column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let table = self
            .features
            .as_ref()
            .ok_or_else(|| Error::Config(format!("feature {name:?} requested but no features input")))?;
        let k = table
            .feature_index(name)
            .ok_or_else(|| Error::Config(format!("feature {name:?} not found in the features input")))?;
        Ok(table.values.iter().map(|r| r.as_ref().map(|r| r[k])).collect())
    }
}

/// Task labels owned for the duration of an evaluation.
pub enum Labels {
    Category(Taxonomy),
    Numeric(Vec<Option<f64>>),
}

impl Labels {
    pub fn for_target(target: &TaskTarget, inputs: &Inputs) -> Result<Self> {
        match target {
            TaskTarget::Category(t) => inputs.taxonomy(t).map(Labels::Category),
            TaskTarget::Numeric(f) => inputs.feature_column(f).map(Labels::Numeric),
        }
    }

    pub fn data(&self) -> TaskData<'_> {
        match self {
            Labels::Category(t) => TaskData::Category(t),
            Labels::Numeric(v) => TaskData::Numeric(v),
        }
    }
}

pub fn weighting_params(cfg: &PipelineConfig) -> WeightingParams {
    WeightingParams {
        radius_km: cfg.radius_km,
        sigma_km: cfg.sigma_km,
        max_vocab: cfg.max_vocab,
    }
}

pub fn probe_settings(cfg: &PipelineConfig) -> ProbeSettings {
    ProbeSettings {
        grid: cfg.probe_grid.clone(),
        options: ProbeOptions {
            max_steps: cfg.probe_max_steps,
            ..ProbeOptions::default()
        },
    }
}

/// Training-split terciles, deduplicated.
fn tercile_cutoffs(values: &[Option<f64>], train: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = train.iter().filter_map(|&i| values[i]).collect();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Vec::new();
    }
    let mut cuts = vec![v[v.len() / 3], v[2 * v.len() / 3]];
    cuts.dedup();
    cuts
}

/// Classes used to score tags for `target`, restricted to training
/// locations.
pub fn selection_classes(
    cfg: &PipelineConfig,
    target: &TaskTarget,
    inputs: &Inputs,
    split: &SplitSpec,
) -> Result<ClassSet> {
    match target {
        TaskTarget::Category(t) => Ok(ClassSet::from_taxonomy(&inputs.taxonomy(t)?, Some(&split.train))),
        TaskTarget::Numeric(f) => {
            let values = inputs.feature_column(f)?;
            let cutoffs = match cfg.cutoffs.get(f) {
                Some(c) => c.clone(),
                None => tercile_cutoffs(&values, &split.train),
            };
            ClassSet::from_cutoffs(&values, &cutoffs, Some(&split.train))
        }
    }
}

/// The target that KL selection discriminates, if any is configured.
pub fn selection_target(cfg: &PipelineConfig) -> Result<TaskTarget> {
    cfg.selection_target
        .clone()
        .or_else(|| cfg.tasks.first().cloned())
        .ok_or_else(|| Error::Config("KL selection needs selection_target or at least one task".into()))
}

pub fn select_tags(
    cfg: &PipelineConfig,
    assoc: &AssociationMatrix,
    target: &TaskTarget,
    inputs: &Inputs,
    split: &SplitSpec,
) -> Result<SelectionResult> {
    let classes = selection_classes(cfg, target, inputs, split)?;
    let opts = SelectionOptions {
        gamma: cfg.gamma,
        k: cfg.top_k,
        normalize: cfg.normalize_posterior,
        mass: cfg.posterior_mass,
    };
    kl_select(assoc, &classes, &opts)
}

/// A representation and, for embedding variants, its training run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub representation: Representation,
    pub outcome: Option<TrainOutcome>,
}

/// Hyperparameters of `cfg` that matter for its variant.
pub fn describe(cfg: &PipelineConfig) -> String {
    let v = cfg.variant;
    let mut parts = vec![];
    if !v.is_bow() {
        parts.push(format!("dim={}", cfg.train.dim));
    }
    if v == Variant::EgelAll {
        parts.push(format!("alpha={}", cfg.train.alpha));
        parts.push(format!("beta={}", cfg.train.beta));
    }
    if v.uses_selection() {
        parts.push(format!("gamma={}", cfg.gamma));
    }
    parts.join(";")
}

/// Builds the variant's representation. Anything that is the target of one
/// of `held_out` is left out of the inputs.
pub fn train_representation(
    cfg: &PipelineConfig,
    assoc: &AssociationMatrix,
    selection: Option<&SelectionResult>,
    inputs: &Inputs,
    split: &SplitSpec,
    held_out: &[TaskTarget],
) -> Result<Trained> {
    let v = cfg.variant;
    if v.uses_selection() && selection.is_none() {
        return Err(Error::Config(format!("variant {v} needs a tag selection")));
    }
    let selection = if v.uses_selection() { selection } else { None };

    let mut provenance = BTreeSet::from([Provenance::Tags]);
    let mut features = None;
    let mut categories = Vec::new();
    if v.uses_structured() {
        let excluded_features: BTreeSet<String> = held_out
            .iter()
            .filter_map(|t| match t {
                TaskTarget::Numeric(f) => Some(f.clone()),
                _ => None,
            })
            .collect();
        if let Some(table) = &inputs.features {
            let mut kept = table.without(&excluded_features);
            if kept.n_features() > 0 {
                kept.normalize(&split.train);
                provenance.extend(kept.feature_names.iter().cloned().map(Provenance::Feature));
                features = Some(kept);
            }
        }
        categories = inputs
            .categories
            .iter()
            .filter(|c| !held_out.contains(&TaskTarget::Category(c.taxonomy_id.clone())))
            .cloned()
            .collect();
        provenance.extend(categories.iter().map(|c| Provenance::Taxonomy(c.taxonomy_id.clone())));
        if features.is_none() && categories.is_empty() {
            log::warn!("variant {v} has no numerical features or categories to use");
        }
    }

    if v.is_bow() {
        let mut rep = bow_representation(v.name(), assoc, selection, features.as_ref(), &categories);
        let d = describe(cfg);
        if !d.is_empty() {
            rep.hyperparameters = format!("{d};{}", rep.hyperparameters);
        }
        rep.provenance = provenance;
        return Ok(Trained {
            representation: rep,
            outcome: None,
        });
    }

    let plan_cfg = PlanConfig {
        negatives: v.uses_negatives(),
        negative_ratio: cfg.negative_ratio,
        negative_cap: cfg.negative_cap,
        negative_weight: cfg.negative_weight,
        glove: v.is_glove().then_some(cfg.glove),
        seed: cfg.seed,
    };
    let plan = build_training_plan(assoc, selection, features.as_ref(), &categories, &plan_cfg)?;
    let outcome = train(&plan, &cfg.train)?;
    let vectors = Vectors::from_model(&outcome.model);
    let representation = Representation::from_vectors(v.name(), &vectors, provenance, &describe(cfg));
    Ok(Trained {
        representation,
        outcome: Some(outcome),
    })
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn read_assoc(cfg: &PipelineConfig, out: &Path, locs: &LocationSet) -> Result<AssociationMatrix> {
    let path = require(&out.join(artifacts::ASSOC), "build", &cfg.hash())?;
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    AssociationMatrix::read_tsv(BufReader::new(file), locs, &path)
}

/// Builds the association matrix and writes `assoc.tsv` and `coverage.tsv`.
pub fn cmd_build(cfg: &PipelineConfig, out: &Path) -> Result<AssociationMatrix> {
    create_dir(out)?;
    let corpus = load_tag_records(&cfg.records.path)?;
    let locs = load_locations(&cfg.locations.path)?;
    let assoc = build_association_matrix(&corpus, &locs, &weighting_params(cfg))?;
    let (hash, seed) = (cfg.hash(), cfg.seed);
    write_with_header(&out.join(artifacts::ASSOC), "assoc", &hash, seed, |w| {
        writeln!(w, "# loc_id\ttag\tw\tppmi\tcount")?;
        assoc.write_tsv(w)
    })?;
    write_with_header(&out.join(artifacts::COVERAGE), "coverage", &hash, seed, |w| {
        for l in assoc.uncovered_locations() {
            writeln!(w, "{}", assoc.locations()[l])?;
        }
        Ok(())
    })?;
    log::info!(
        "association matrix: {} locations, {} tags, {} non-zero entries",
        assoc.n_locations(),
        assoc.n_tags(),
        assoc.nnz()
    );
    Ok(assoc)
}

/// Scores tags against the selection target and writes `selection.tsv`.
pub fn cmd_select(cfg: &PipelineConfig, out: &Path) -> Result<SelectionResult> {
    cfg.warn_ignored_keys();
    let inputs = Inputs::load(cfg)?;
    let assoc = read_assoc(cfg, out, &inputs.locations)?;
    let target = selection_target(cfg)?;
    let split = inputs.split(cfg);
    let sel = select_tags(cfg, &assoc, &target, &inputs, &split)?;
    write_with_header(&out.join(artifacts::SELECTION), "selection", &cfg.hash(), cfg.seed, |w| {
        writeln!(w, "# target={target} gamma={} classes={}", sel.gamma, sel.classes.join("|"))?;
        sel.write_tsv(w)
    })?;
    log::info!("selected {} of {} tags for {target}", sel.selected.len(), assoc.n_tags());
    Ok(sel)
}

/// Trains the configured variant with every task target held out and
/// writes vectors, `model.meta` and, for embeddings, `objective.csv`.
pub fn cmd_train(cfg: &PipelineConfig, out: &Path) -> Result<Trained> {
    cfg.warn_ignored_keys();
    let inputs = Inputs::load(cfg)?;
    let assoc = read_assoc(cfg, out, &inputs.locations)?;
    let selection = if cfg.variant.uses_selection() {
        let path = require(&out.join(artifacts::SELECTION), "select", &cfg.hash())?;
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Some(SelectionResult::read_tsv(BufReader::new(file), &path)?)
    } else {
        None
    };
    let split = inputs.split(cfg);
    let trained = train_representation(cfg, &assoc, selection.as_ref(), &inputs, &split, &cfg.tasks)?;
    let (hash, seed) = (cfg.hash(), cfg.seed);
    let vectors = trained.representation.to_vectors()?;
    save_vectors(&vectors, out.join(artifacts::VECTORS_TEXT), VectorFormat::Text)?;
    save_vectors(&vectors, out.join(artifacts::VECTORS_BIN), VectorFormat::Binary)?;
    if let Some(outcome) = &trained.outcome {
        write_with_header(&out.join(artifacts::OBJECTIVE), "objective", &hash, seed, |w| {
            write_objective_csv(w, outcome)
        })?;
        if let Some(last) = outcome.history.last() {
            log::info!("J: {} initially, {} after {} iterations", outcome.initial.total, last.total, outcome.history.len());
        }
    }
    let rep = &trained.representation;
    let meta = BTreeMap::from([
        ("variant".to_string(), cfg.variant.to_string()),
        ("provenance".to_string(), format_provenance(&rep.provenance)),
        ("hyperparameters".to_string(), rep.hyperparameters.clone()),
        ("vectors".to_string(), vectors.len().to_string()),
        ("dim".to_string(), vectors.dim.to_string()),
    ]);
    write_meta(&out.join(artifacts::MODEL_META), "model", &hash, seed, &meta)?;
    Ok(trained)
}

/// Reads the trained representation back from `out`.
pub fn load_representation(cfg: &PipelineConfig, out: &Path, locs: &LocationSet) -> Result<Representation> {
    let meta_path = require(&out.join(artifacts::MODEL_META), "train", &cfg.hash())?;
    let meta = artifacts::read_meta(&meta_path)?;
    let bin = require_exists(&out.join(artifacts::VECTORS_BIN), "train")?;
    let vectors = load_vectors(&bin, VectorFormat::Binary)?;
    let field = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| Error::parse(&meta_path, 0, format!("missing {k}")))
    };
    let rep = Representation::from_vectors(
        &field("variant")?,
        &vectors,
        parse_provenance(&field("provenance")?)?,
        &field("hyperparameters")?,
    );
    rep.aligned(&locs.ids())
}

/// Evaluates the trained representation on every task and writes
/// `report.csv`.
pub fn cmd_eval(cfg: &PipelineConfig, out: &Path) -> Result<Vec<EvalReport>> {
    if cfg.tasks.is_empty() {
        return Err(Error::Config("no tasks configured".into()));
    }
    let inputs = Inputs::load(cfg)?;
    let rep = load_representation(cfg, out, &inputs.locations)?;
    let split = inputs.split(cfg);
    let settings = probe_settings(cfg);
    let labels: Vec<Labels> = cfg
        .tasks
        .iter()
        .map(|t| Labels::for_target(t, &inputs))
        .collect::<Result<_>>()?;
    let per_task: Vec<Vec<EvalReport>> = cfg
        .tasks
        .par_iter()
        .zip(&labels)
        .map(|(t, l)| run_task(&rep, t, l.data(), &split, &settings).map(|o| o.reports))
        .collect::<Result<_>>()?;
    let reports: Vec<EvalReport> = per_task.into_iter().flatten().collect();
    write_with_header(&out.join(artifacts::REPORT), "report", &cfg.hash(), cfg.seed, |w| {
        write_report_csv(w, &reports)
    })?;
    Ok(reports)
}

/// Generates a synthetic corpus into `out`.
pub fn cmd_synth(cfg: &PipelineConfig, out: &Path) -> Result<SynthPaths> {
    let corpus = generate(&cfg.synth)?;
    let paths = corpus.write_files(out)?;
    write_meta(
        &out.join(artifacts::SYNTH_META),
        "synth",
        &cfg.hash(),
        cfg.seed,
        &BTreeMap::from([
            ("locations".to_string(), corpus.locations.len().to_string()),
            ("records".to_string(), corpus.records.len().to_string()),
            ("clusters".to_string(), corpus.centroids.len().to_string()),
        ]),
    )?;
    Ok(paths)
}

/// Loads the matrix written by [`cmd_build`].
pub fn load_assoc(cfg: &PipelineConfig, out: &Path, locs: &LocationSet) -> Result<AssociationMatrix> {
    read_assoc(cfg, out, locs)
}
