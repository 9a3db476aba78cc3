//! Loading and validation of the tag corpus and per-location tables.
//!
//! File formats (all tab separated, UTF-8):
//!
//! - `records.tsv`: `record_id  user_id  lat  lon  tag1,tag2,...`
//! - `locations.tsv`: `loc_id  lat  lon`
//! - `features.tsv`: a header row of feature names, then `loc_id  v1  v2 ...`
//! - `categories.tsv`: `taxonomy_id  category_id  loc_id`

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::geoindex::LatLon;

/// One geotagged tag occurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct TagRecord {
    pub record_id: String,
    pub user_id: String,
    pub tag: String,
    pub lat: f64,
    pub lon: f64,
}

impl TagRecord {
    pub fn coord(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

/// Counters collected while reading a record file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub lines: usize,
    pub malformed: usize,
    pub duplicates: usize,
    pub first_problem: Option<String>,
}

/// Deduplicated tag records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TagCorpus {
    pub records: Vec<TagRecord>,
    pub stats: LoadStats,
}

impl TagCorpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Lowercases and trims a raw tag. Returns `None` for tags that are empty
/// after normalization.
pub fn normalize_tag(raw: &str) -> Option<String> {
    let tag = raw.trim().to_lowercase();
    (!tag.is_empty()).then_some(tag)
}

/// Parses a coordinate, accepting U+2212 as a minus sign.
fn parse_coord(raw: &str) -> Option<f64> {
    let s = raw.trim().replace('\u{2212}', "-");
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Dedup key: identical user, tag and exact coordinates.
type DedupKey = (String, String, u64, u64);

/// Reads `records.tsv` from any buffered reader. `path` is used for
/// diagnostics only.
pub fn read_tag_records<R: BufRead>(reader: R, path: &Path) -> Result<TagCorpus> {
    let mut stats = LoadStats::default();
    let mut seen: HashSet<DedupKey> = HashSet::new();
    let mut records = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let problem = if fields.len() < 4 {
            Some(format!("line {}: expected at least 4 fields", lineno + 1))
        } else {
            match (parse_coord(fields[2]), parse_coord(fields[3])) {
                (Some(lat), Some(lon)) if LatLon::new(lat, lon).is_valid() => {
                    let record_id = fields[0].trim();
                    let user_id = fields[1].trim();
                    if record_id.is_empty() || user_id.is_empty() {
                        Some(format!("line {}: empty record or user id", lineno + 1))
                    } else {
                        let tags = fields.get(4).copied().unwrap_or("");
                        for tag in tags.split(',').filter_map(normalize_tag) {
                            let key = (user_id.to_string(), tag.clone(), lat.to_bits(), lon.to_bits());
                            if seen.insert(key) {
                                records.push(TagRecord {
                                    record_id: record_id.to_string(),
                                    user_id: user_id.to_string(),
                                    tag,
                                    lat,
                                    lon,
                                });
                            } else {
                                stats.duplicates += 1;
                            }
                        }
                        None
                    }
                }
                _ => Some(format!(
                    "line {}: invalid coordinates ({}, {})",
                    lineno + 1,
                    fields[2],
                    fields[3]
                )),
            }
        };
        if let Some(p) = problem {
            stats.malformed += 1;
            stats.first_problem.get_or_insert(p);
        }
    }

    if stats.malformed * 2 > stats.lines {
        return Err(Error::TooManyMalformed {
            path: path.to_path_buf(),
            malformed: stats.malformed,
            total: stats.lines,
            first: stats.first_problem.clone().unwrap_or_default(),
        });
    }
    if stats.malformed > 0 {
        warn!(
            "{}: skipped {} malformed line(s) of {}",
            path.display(),
            stats.malformed,
            stats.lines
        );
    }
    Ok(TagCorpus { records, stats })
}

pub fn load_tag_records(path: impl AsRef<Path>) -> Result<TagCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tag_records(BufReader::new(file), path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub loc_id: String,
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn coord(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

/// The target locations, in file order, with id lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationSet {
    locations: Vec<Location>,
    by_id: HashMap<String, usize>,
}

impl LocationSet {
    pub fn new(locations: Vec<Location>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(locations.len());
        for (i, loc) in locations.iter().enumerate() {
            if !loc.coord().is_valid() {
                return Err(Error::Invalid(format!(
                    "location {} out of bounds: ({}, {})",
                    loc.loc_id, loc.lat, loc.lon
                )));
            }
            if by_id.insert(loc.loc_id.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate location id {}", loc.loc_id)));
            }
        }
        Ok(LocationSet { locations, by_id })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn get(&self, i: usize) -> &Location {
        &self.locations[i]
    }

    pub fn index_of(&self, loc_id: &str) -> Option<usize> {
        self.by_id.get(loc_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Location> {
        self.locations.iter()
    }

    pub fn ids(&self) -> Vec<String> {
        self.locations.iter().map(|l| l.loc_id.clone()).collect()
    }
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn load_locations(path: impl AsRef<Path>) -> Result<LocationSet> {
    let path = path.as_ref();
    let mut locations = Vec::new();
    for (lineno, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, lineno, "expected loc_id, lat, lon"));
        }
        let (Some(lat), Some(lon)) = (parse_coord(fields[1]), parse_coord(fields[2])) else {
            return Err(Error::parse(path, lineno, "unparseable coordinates"));
        };
        let loc_id = fields[0].trim();
        if loc_id.is_empty() {
            return Err(Error::parse(path, lineno, "empty location id"));
        }
        let loc = Location {
            loc_id: loc_id.to_string(),
            lat,
            lon,
        };
        if !loc.coord().is_valid() {
            return Err(Error::parse(path, lineno, "coordinates out of bounds"));
        }
        locations.push(loc);
    }
    LocationSet::new(locations)
}

/// Collects unknown ids and fails with the first ten if there are any.
struct UnknownIds {
    ids: Vec<String>,
    total: usize,
}

impl UnknownIds {
    fn new() -> Self {
        UnknownIds { ids: Vec::new(), total: 0 }
    }

    fn push(&mut self, id: &str) {
        self.total += 1;
        if self.ids.len() < 10 {
            self.ids.push(id.to_string());
        }
    }

    fn check(self, path: &Path) -> Result<()> {
        if self.total == 0 {
            Ok(())
        } else {
            Err(Error::UnknownLocations {
                path: path.to_path_buf(),
                ids: self.ids,
                total: self.total,
            })
        }
    }
}

/// Raw and z-scored numerical features for the locations of a
/// [`LocationSet`].
///
/// Rows are indexed by location position; locations without a row in the
/// features file have `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericalFeatureTable {
    pub feature_names: Vec<String>,
    pub values: Vec<Option<Vec<f64>>>,
    pub normalized: Vec<Option<Vec<f64>>>,
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl NumericalFeatureTable {
    /// Builds a table and normalizes it over all rows.
    pub fn new(feature_names: Vec<String>, values: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if let Some(row) = values.iter().flatten().find(|r| r.len() != feature_names.len()) {
            return Err(Error::Invalid(format!(
                "feature row has {} values, expected {}",
                row.len(),
                feature_names.len()
            )));
        }
        let mut table = NumericalFeatureTable {
            normalized: values.clone(),
            means: vec![0.0; feature_names.len()],
            stddevs: vec![0.0; feature_names.len()],
            feature_names,
            values,
        };
        let all: Vec<usize> = (0..table.values.len()).collect();
        table.normalize(&all);
        Ok(table)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Recomputes z-score statistics over the rows in `train` (location
    /// positions; rows that are `None` are skipped) and applies them to every
    /// row. Population standard deviation; zero-variance columns map to 0.
    pub fn normalize(&mut self, train: &[usize]) {
        let rows: Vec<&Vec<f64>> = train.iter().filter_map(|&i| self.values[i].as_ref()).collect();
        for k in 0..self.feature_names.len() {
            let n = rows.len() as f64;
            let (mean, sd) = if rows.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
                let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            self.means[k] = mean;
            self.stddevs[k] = sd;
        }
        self.normalized = self
            .values
            .iter()
            .map(|row| {
                row.as_ref().map(|r| {
                    r.iter()
                        .enumerate()
                        .map(|(k, &x)| {
                            if self.stddevs[k] > 0.0 {
                                (x - self.means[k]) / self.stddevs[k]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
            })
            .collect();
    }

    /// A copy without the named features.
    pub fn without(&self, excluded: &BTreeSet<String>) -> NumericalFeatureTable {
        let keep: Vec<usize> = (0..self.n_features())
            .filter(|&k| !excluded.contains(&self.feature_names[k]))
            .collect();
        let pick = |rows: &Vec<Option<Vec<f64>>>| -> Vec<Option<Vec<f64>>> {
            rows.iter()
                .map(|r| r.as_ref().map(|r| keep.iter().map(|&k| r[k]).collect()))
                .collect()
        };
        NumericalFeatureTable {
            feature_names: keep.iter().map(|&k| self.feature_names[k].clone()).collect(),
            values: pick(&self.values),
            normalized: pick(&self.normalized),
            means: keep.iter().map(|&k| self.means[k]).collect(),
            stddevs: keep.iter().map(|&k| self.stddevs[k]).collect(),
        }
    }
}

/// Loads `features.tsv` against `locs`. Statistics are computed over all
/// rows; call [`NumericalFeatureTable::normalize`] with the training split to
/// restrict them.
pub fn load_numerical_features(
    path: impl AsRef<Path>,
    locs: &LocationSet,
) -> Result<NumericalFeatureTable> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let Some(((_, header), body)) = lines.split_first() else {
        return Err(Error::parse(path, 1, "missing header row"));
    };
    let names: Vec<String> = header.split('\t').skip(1).map(|s| s.trim().to_string()).collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err(Error::parse(path, 1, "header must be loc_id followed by feature names"));
    }
    let mut values: Vec<Option<Vec<f64>>> = vec![None; locs.len()];
    let mut unknown = UnknownIds::new();
    for (lineno, line) in body {
        let fields: Vec<&str> = line.split('\t').collect();
        let loc_id = fields[0].trim();
        let Some(i) = locs.index_of(loc_id) else {
            unknown.push(loc_id);
            continue;
        };
        if fields.len() != names.len() + 1 {
            return Err(Error::parse(
                path,
                *lineno,
                format!("missing feature value for {loc_id}: expected {} values", names.len()),
            ));
        }
        let mut row = Vec::with_capacity(names.len());
        for (k, raw) in fields[1..].iter().enumerate() {
            match parse_coord(raw) {
                Some(v) => row.push(v),
                None => {
                    return Err(Error::parse(
                        path,
                        *lineno,
                        format!("missing or invalid value for feature {} of {loc_id}", names[k]),
                    ))
                }
            }
        }
        if values[i].replace(row).is_some() {
            return Err(Error::parse(path, *lineno, format!("duplicate row for {loc_id}")));
        }
    }
    unknown.check(path)?;
    NumericalFeatureTable::new(names, values)
}

/// One category of one taxonomy and its member locations (by position).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryAssignment {
    pub taxonomy_id: String,
    pub category_id: String,
    pub members: BTreeSet<usize>,
}

/// Builds assignments from `(taxonomy, category, location)` triples,
/// enforcing that categories of one taxonomy are mutually exclusive.
///
/// The result is sorted by `(taxonomy_id, category_id)`.
pub fn build_categories(
    triples: impl IntoIterator<Item = (String, String, usize)>,
) -> Result<Vec<CategoryAssignment>> {
    group_categories(triples, |l| format!("#{l}"))
}

fn group_categories(
    triples: impl IntoIterator<Item = (String, String, usize)>,
    label: impl Fn(usize) -> String,
) -> Result<Vec<CategoryAssignment>> {
    let mut by_cat: BTreeMap<(String, String), BTreeSet<usize>> = BTreeMap::new();
    let mut owner: HashMap<(String, usize), String> = HashMap::new();
    for (tax, cat, loc) in triples {
        if let Some(prev) = owner.insert((tax.clone(), loc), cat.clone()) {
            if prev != cat {
                return Err(Error::Invalid(format!(
                    "location {} is assigned to both {prev} and {cat} in taxonomy {tax}",
                    label(loc)
                )));
            }
        }
        by_cat.entry((tax, cat)).or_default().insert(loc);
    }
    Ok(by_cat
        .into_iter()
        .map(|((taxonomy_id, category_id), members)| CategoryAssignment {
            taxonomy_id,
            category_id,
            members,
        })
        .collect())
}

pub fn load_categories(
    path: impl AsRef<Path>,
    locs: &LocationSet,
) -> Result<Vec<CategoryAssignment>> {
    let path = path.as_ref();
    let mut triples = Vec::new();
    let mut unknown = UnknownIds::new();
    for (lineno, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < 3 || fields[..3].iter().any(|f| f.is_empty()) {
            return Err(Error::parse(path, lineno, "expected taxonomy_id, category_id, loc_id"));
        }
        match locs.index_of(fields[2]) {
            Some(i) => triples.push((fields[0].to_string(), fields[1].to_string(), i)),
            None => unknown.push(fields[2]),
        }
    }
    unknown.check(path)?;
    group_categories(triples, |l| locs.get(l).loc_id.clone()).map_err(|e| match e {
        Error::Invalid(msg) => Error::parse(path, 0, msg),
        other => other,
    })
}

/// Per-location category lookup for one taxonomy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    pub taxonomy_id: String,
    pub categories: Vec<String>,
    /// Category index per location position.
    pub assignment: Vec<Option<usize>>,
}

impl Taxonomy {
    pub fn from_assignments(
        taxonomy_id: &str,
        assignments: &[CategoryAssignment],
        n_locations: usize,
    ) -> Option<Self> {
        let mut categories = Vec::new();
        let mut assignment = vec![None; n_locations];
        for a in assignments.iter().filter(|a| a.taxonomy_id == taxonomy_id) {
            let c = categories.len();
            categories.push(a.category_id.clone());
            for &l in &a.members {
                assignment[l] = Some(c);
            }
        }
        (!categories.is_empty()).then(|| Taxonomy {
            taxonomy_id: taxonomy_id.to_string(),
            categories,
            assignment,
        })
    }
}

/// Distinct taxonomy ids in first-seen order.
pub fn taxonomy_ids(assignments: &[CategoryAssignment]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in assignments {
        if !out.contains(&a.taxonomy_id) {
            out.push(a.taxonomy_id.clone());
        }
    }
    out
}
