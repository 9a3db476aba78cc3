//! `key=value` pipeline configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the config file's directory; input paths that are not
//! given default to the synthetic-corpus file names inside the output
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::embed::{GloveWeighting, TrainConfig, ALPHA_GRID, BETA_GRID, DIM_GRID, NEGATIVE_CAP, NEGATIVE_RATIO};
use crate::error::{Error, Result};
use crate::evalkit::TaskTarget;
use crate::selection::{PosteriorMass, DEFAULT_TOP_K, GAMMA_GRID};
use crate::synthgen::SynthConfig;

/// The compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Glove,
    EgelTags,
    EgelTagsNs,
    EgelKlTagsNs,
    EgelAll,
    BowTags,
    BowKlTags,
    BowAll,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Glove,
        Variant::EgelTags,
        Variant::EgelTagsNs,
        Variant::EgelKlTagsNs,
        Variant::EgelAll,
        Variant::BowTags,
        Variant::BowKlTags,
        Variant::BowAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Glove => "glove",
            Variant::EgelTags => "egel-tags",
            Variant::EgelTagsNs => "egel-tags-ns",
            Variant::EgelKlTagsNs => "egel-kl-tags-ns",
            Variant::EgelAll => "egel-all",
            Variant::BowTags => "bow-tags",
            Variant::BowKlTags => "bow-kl-tags",
            Variant::BowAll => "bow-all",
        }
    }

    pub fn is_bow(self) -> bool {
        matches!(self, Variant::BowTags | Variant::BowKlTags | Variant::BowAll)
    }

    pub fn is_glove(self) -> bool {
        self == Variant::Glove
    }

    pub fn uses_selection(self) -> bool {
        matches!(self, Variant::EgelKlTagsNs | Variant::EgelAll | Variant::BowKlTags)
    }

    pub fn uses_negatives(self) -> bool {
        matches!(self, Variant::EgelTagsNs | Variant::EgelKlTagsNs | Variant::EgelAll)
    }

    /// Numerical features and categories join the representation.
    pub fn uses_structured(self) -> bool {
        matches!(self, Variant::EgelAll | Variant::BowAll)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// An input path and whether the user set it.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPath {
    pub path: PathBuf,
    /// As written in the config, or the default file name.
    pub raw: String,
    pub explicit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub records: InputPath,
    pub locations: InputPath,
    pub features: InputPath,
    pub categories: InputPath,
    pub radius_km: f64,
    pub sigma_km: f64,
    pub max_vocab: Option<usize>,
    pub variant: Variant,
    /// Dimension, alpha, beta, learning rate, iterations; its seed mirrors
    /// [`PipelineConfig::seed`].
    pub train: TrainConfig,
    pub negative_ratio: usize,
    pub negative_cap: usize,
    pub negative_weight: f64,
    pub glove: GloveWeighting,
    pub gamma: f64,
    pub top_k: usize,
    pub normalize_posterior: bool,
    pub posterior_mass: PosteriorMass,
    /// Classes for KL selection; defaults to the first task.
    pub selection_target: Option<TaskTarget>,
    /// Class boundaries per numerical feature, for selection on a numeric
    /// target. Features without cutoffs use training-split terciles.
    pub cutoffs: BTreeMap<String, Vec<f64>>,
    pub tasks: Vec<TaskTarget>,
    pub probe_grid: Option<Vec<f64>>,
    pub probe_max_steps: usize,
    pub grid_dim: Vec<usize>,
    pub grid_alpha: Vec<f64>,
    pub grid_beta: Vec<f64>,
    pub grid_gamma: Vec<f64>,
    pub synth: SynthConfig,
    /// Seeds the split, negative sampling, initialization and synthesis.
    pub seed: u64,
    /// Keys present in the config file.
    pub explicit_keys: BTreeSet<String>,
}

fn default_input(out: &Path, name: &str) -> InputPath {
    InputPath {
        path: out.join(name),
        raw: name.to_string(),
        explicit: false,
    }
}

impl PipelineConfig {
    /// All defaults, with inputs expected in `out`.
    pub fn defaults(out: &Path) -> Self {
        let train = TrainConfig::default();
        PipelineConfig {
            records: default_input(out, "records.tsv"),
            locations: default_input(out, "locations.tsv"),
            features: default_input(out, "features.tsv"),
            categories: default_input(out, "categories.tsv"),
            radius_km: 1.0,
            sigma_km: 1.0 / 3.0,
            max_vocab: None,
            variant: Variant::EgelAll,
            train,
            negative_ratio: NEGATIVE_RATIO,
            negative_cap: NEGATIVE_CAP,
            negative_weight: 1.0,
            glove: GloveWeighting::default(),
            gamma: 10.0,
            top_k: DEFAULT_TOP_K,
            normalize_posterior: true,
            posterior_mass: PosteriorMass::Classed,
            selection_target: None,
            cutoffs: BTreeMap::new(),
            tasks: Vec::new(),
            probe_grid: None,
            probe_max_steps: 10_000,
            grid_dim: DIM_GRID.to_vec(),
            grid_alpha: ALPHA_GRID.to_vec(),
            grid_beta: BETA_GRID.to_vec(),
            grid_gamma: GAMMA_GRID.to_vec(),
            synth: SynthConfig::default(),
            seed: 0,
            explicit_keys: BTreeSet::new(),
        }
    }

    pub fn load(path: &Path, out: &Path, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, out, seed)
    }

    /// Parses config text. `seed` overrides the file's `seed`.
    pub fn parse(text: &str, base: &Path, out: &Path, seed: Option<u64>) -> Result<Self> {
        let mut cfg = PipelineConfig::defaults(out);
        let mut sigma_set = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !cfg.explicit_keys.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: {key} set twice", lineno + 1)));
            }
            let ctx = |e: Error| match e {
                Error::Config(m) => Error::Config(format!("line {}: {key}: {m}", lineno + 1)),
                other => other,
            };
            if key == "sigma_km" {
                sigma_set = true;
            }
            cfg.set(key, value, base).map_err(ctx)?;
        }
        if !sigma_set {
            cfg.sigma_km = cfg.radius_km / 3.0;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.train.seed = cfg.seed;
        cfg.synth.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || InputPath {
            path: base.join(value),
            raw: value.to_string(),
            explicit: true,
        };
        match key {
            "records" => self.records = path(),
            "locations" => self.locations = path(),
            "features" => self.features = path(),
            "categories" => self.categories = path(),
            "radius_km" => self.radius_km = num(value)?,
            "sigma_km" => self.sigma_km = num(value)?,
            "max_vocab" => self.max_vocab = Some(num(value)?),
            "variant" => self.variant = value.parse()?,
            "dim" => self.train.dim = num(value)?,
            "alpha" => self.train.alpha = num(value)?,
            "beta" => self.train.beta = num(value)?,
            "lr" => self.train.lr = num(value)?,
            "iterations" => self.train.iterations = num(value)?,
            "seed" => self.seed = num(value)?,
            "negative_ratio" => self.negative_ratio = num(value)?,
            "negative_cap" => self.negative_cap = num(value)?,
            "negative_weight" => self.negative_weight = num(value)?,
            "glove_x_max" => self.glove.x_max = num(value)?,
            "glove_exponent" => self.glove.exponent = num(value)?,
            "gamma" => self.gamma = num(value)?,
            "top_k" => self.top_k = num(value)?,
            "normalize_posterior" => self.normalize_posterior = num(value)?,
            "posterior_mass" => {
                self.posterior_mass = match value {
                    "classed" => PosteriorMass::Classed,
                    "all" => PosteriorMass::All,
                    _ => return Err(Error::Config("expected classed or all".into())),
                }
            }
            "selection_target" => self.selection_target = Some(value.parse()?),
            "tasks" => self.tasks = list(value)?,
            "probe_grid" => self.probe_grid = Some(list(value)?),
            "probe_max_steps" => self.probe_max_steps = num(value)?,
            "grid.dim" => self.grid_dim = list(value)?,
            "grid.alpha" => self.grid_alpha = list(value)?,
            "grid.beta" => self.grid_beta = list(value)?,
            "grid.gamma" => self.grid_gamma = list(value)?,
            "synth.n_locations" => self.synth.n_locations = num(value)?,
            "synth.n_clusters" => self.synth.n_clusters = num(value)?,
            "synth.tags_per_cluster" => self.synth.tags_per_cluster = num(value)?,
            "synth.noise_tags" => self.synth.noise_tags = num(value)?,
            "synth.records_per_location" => self.synth.records_per_location = num(value)?,
            "synth.max_tags_per_record" => self.synth.max_tags_per_record = num(value)?,
            "synth.n_users" => self.synth.n_users = num(value)?,
            "synth.lat_range" => self.synth.lat_range = pair(value)?,
            "synth.lon_range" => self.synth.lon_range = pair(value)?,
            "synth.cluster_spread_km" => self.synth.cluster_spread_km = num(value)?,
            "synth.jitter_km" => self.synth.jitter_km = num(value)?,
            "synth.signal_fraction" => self.synth.signal_fraction = num(value)?,
            _ => match key.strip_prefix("cutoffs.") {
                Some(feature) if !feature.is_empty() => {
                    self.cutoffs.insert(feature.to_string(), list(value)?);
                }
                _ => {
                    log::warn!("unknown config key {key:?} ignored");
                    self.explicit_keys.remove(key);
                }
            },
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius_km > 0.0 && self.radius_km.is_finite()) {
            return Err(Error::Config(format!("radius_km must be positive, got {}", self.radius_km)));
        }
        if !(self.sigma_km > 0.0 && self.sigma_km.is_finite()) {
            return Err(Error::Config(format!("sigma_km must be positive, got {}", self.sigma_km)));
        }
        if self.max_vocab == Some(0) {
            return Err(Error::Config("max_vocab must be positive".into()));
        }
        if self.top_k == 0 {
            return Err(Error::Config("top_k must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.grid_dim.is_empty() || self.grid_alpha.is_empty() || self.grid_beta.is_empty() || self.grid_gamma.is_empty()
        {
            return Err(Error::Config("sweep grids must not be empty".into()));
        }
        if !self.variant.is_bow() {
            self.train.validate()?;
        }
        Ok(())
    }

    /// Logs a warning for each explicitly set key the variant ignores.
    pub fn warn_ignored_keys(&self) {
        for key in &self.explicit_keys {
            if !self.key_applies(key) {
                log::warn!("{key} is ignored by variant {}", self.variant);
            }
        }
    }

    fn key_applies(&self, key: &str) -> bool {
        let v = self.variant;
        match key {
            "dim" | "lr" | "iterations" | "grid.dim" => !v.is_bow(),
            "alpha" | "beta" | "grid.alpha" | "grid.beta" => v == Variant::EgelAll,
            "negative_ratio" | "negative_cap" | "negative_weight" => v.uses_negatives(),
            "glove_x_max" | "glove_exponent" => v.is_glove(),
            "gamma" | "top_k" | "normalize_posterior" | "posterior_mass" | "selection_target" | "grid.gamma" => {
                v.uses_selection()
            }
            k if k.starts_with("cutoffs.") => v.uses_selection(),
            _ => true,
        }
    }

    /// Every setting in a fixed order; the basis of [`PipelineConfig::hash`].
    /// Paths appear as written, so moving a run directory keeps its hash.
    pub fn canonical(&self) -> String {
        let mut kv: Vec<(String, String)> = vec![
            ("records".into(), self.records.raw.clone()),
            ("locations".into(), self.locations.raw.clone()),
            ("features".into(), self.features.raw.clone()),
            ("categories".into(), self.categories.raw.clone()),
            ("radius_km".into(), self.radius_km.to_string()),
            ("sigma_km".into(), self.sigma_km.to_string()),
            ("max_vocab".into(), format!("{:?}", self.max_vocab)),
            ("variant".into(), self.variant.to_string()),
            ("dim".into(), self.train.dim.to_string()),
            ("alpha".into(), self.train.alpha.to_string()),
            ("beta".into(), self.train.beta.to_string()),
            ("lr".into(), self.train.lr.to_string()),
            ("iterations".into(), self.train.iterations.to_string()),
            ("negative_ratio".into(), self.negative_ratio.to_string()),
            ("negative_cap".into(), self.negative_cap.to_string()),
            ("negative_weight".into(), self.negative_weight.to_string()),
            ("glove_x_max".into(), self.glove.x_max.to_string()),
            ("glove_exponent".into(), self.glove.exponent.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("top_k".into(), self.top_k.to_string()),
            ("normalize_posterior".into(), self.normalize_posterior.to_string()),
            ("posterior_mass".into(), format!("{:?}", self.posterior_mass)),
            (
                "selection_target".into(),
                self.selection_target.as_ref().map(ToString::to_string).unwrap_or_default(),
            ),
            ("cutoffs".into(), format!("{:?}", self.cutoffs)),
            ("tasks".into(), join(&self.tasks)),
            ("probe_grid".into(), format!("{:?}", self.probe_grid)),
            ("probe_max_steps".into(), self.probe_max_steps.to_string()),
            ("grid.dim".into(), join(&self.grid_dim)),
            ("grid.alpha".into(), join(&self.grid_alpha)),
            ("grid.beta".into(), join(&self.grid_beta)),
            ("grid.gamma".into(), join(&self.grid_gamma)),
            ("synth".into(), format!("{:?}", self.synth)),
            ("seed".into(), self.seed.to_string()),
        ];
        kv.sort();
        kv.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`PipelineConfig::canonical`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn num<T: FromStr>(value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {value:?}")))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("cannot parse list item {s:?}"))))
        .collect()
}

fn pair(value: &str) -> Result<(f64, f64)> {
    match list::<f64>(value)?.as_slice() {
        &[a, b] => Ok((a, b)),
        _ => Err(Error::Config(format!("expected two comma-separated numbers, got {value:?}"))),
    }
}
