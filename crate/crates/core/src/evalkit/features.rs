//! Per-location feature vectors handed to the probes, tagged with the
//! inputs they were derived from.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use crate::corpus::{CategoryAssignment, NumericalFeatureTable};
use crate::embed::Vectors;
use crate::error::{Error, Result};
use crate::selection::SelectionResult;
use crate::weighting::AssociationMatrix;

/// An input a representation was built from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    Tags,
    Feature(String),
    Taxonomy(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Tags => write!(f, "tags"),
            Provenance::Feature(n) => write!(f, "feature:{n}"),
            Provenance::Taxonomy(t) => write!(f, "taxonomy:{t}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "tags" => Ok(Provenance::Tags),
            Some(("feature", n)) if !n.is_empty() => Ok(Provenance::Feature(n.to_string())),
            Some(("taxonomy", t)) if !t.is_empty() => Ok(Provenance::Taxonomy(t.to_string())),
            _ => Err(Error::Invalid(format!("unknown provenance {s:?}"))),
        }
    }
}

/// Formats a provenance set as a `;`-separated list.
pub fn format_provenance(p: &BTreeSet<Provenance>) -> String {
    p.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

pub fn parse_provenance(s: &str) -> Result<BTreeSet<Provenance>> {
    s.split(';').filter(|x| !x.is_empty()).map(str::parse).collect()
}

/// Row `i` describes location `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub variant: String,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub provenance: BTreeSet<Provenance>,
    /// Settings that produced the rows, reported alongside probe results.
    pub hyperparameters: String,
}

impl Representation {
    pub fn from_vectors(
        variant: &str,
        vectors: &Vectors,
        provenance: BTreeSet<Provenance>,
        hyperparameters: &str,
    ) -> Self {
        Representation {
            variant: variant.to_string(),
            ids: vectors.ids.clone(),
            rows: vectors
                .rows
                .iter()
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .collect(),
            provenance,
            hyperparameters: hyperparameters.to_string(),
        }
    }

    pub fn to_vectors(&self) -> Result<Vectors> {
        let dim = self.rows.first().map_or(0, Vec::len);
        Vectors::new(
            self.ids.clone(),
            dim,
            self.rows.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect(),
        )
    }

    /// Reorders rows to follow `ids`. Every id must be present.
    pub fn aligned(&self, ids: &[String]) -> Result<Representation> {
        let pos: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str())
                    .map(|&i| self.rows[i].clone())
                    .ok_or_else(|| Error::Invalid(format!("no vector for location {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Representation {
            ids: ids.to_vec(),
            rows,
            ..self.clone()
        })
    }
}

/// PPMI-weighted bag of words, optionally restricted to a selected
/// vocabulary and extended with z-scored features and category one-hots.
///
/// Locations without a feature row get zeros, the training mean.
pub fn bow_representation(
    variant: &str,
    assoc: &AssociationMatrix,
    selection: Option<&SelectionResult>,
    features: Option<&NumericalFeatureTable>,
    categories: &[CategoryAssignment],
) -> Representation {
    let mut column = vec![None; assoc.n_tags()];
    let mut width = 0;
    let keep = selection.map(SelectionResult::selected_set);
    for (t, name) in assoc.tags().iter().enumerate() {
        if keep.as_ref().is_none_or(|k| k.contains(name.as_str())) {
            column[t] = Some(width);
            width += 1;
        }
    }
    let n_feat = features.map_or(0, NumericalFeatureTable::n_features);
    let mut provenance = BTreeSet::from([Provenance::Tags]);
    if let Some(f) = features {
        provenance.extend(f.feature_names.iter().cloned().map(Provenance::Feature));
    }
    provenance.extend(categories.iter().map(|c| Provenance::Taxonomy(c.taxonomy_id.clone())));

    let rows = (0..assoc.n_locations())
        .map(|l| {
            let mut row = vec![0.0; width + n_feat + categories.len()];
            for e in assoc.row(l) {
                if let Some(c) = column[e.tag] {
                    row[c] = e.ppmi;
                }
            }
            if let Some(Some(z)) = features.map(|f| &f.normalized[l]) {
                row[width..width + n_feat].copy_from_slice(z);
            }
            for (k, c) in categories.iter().enumerate() {
                if c.members.contains(&l) {
                    row[width + n_feat + k] = 1.0;
                }
            }
            row
        })
        .collect();
    Representation {
        variant: variant.to_string(),
        ids: assoc.locations().to_vec(),
        rows,
        provenance,
        hyperparameters: format!("vocab={width}"),
    }
}
