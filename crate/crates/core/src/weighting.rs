//! Gaussian-kernel tag weights `w(t, l)` and the PPMI association matrix.
//!
//! For a location `l` and tag `t`,
//!
//! ```text
//! w(t, l) = sum over photo points r with d(l, r) <= D of |U(t, r)| * exp(-d(l, r)^2 / (2 sigma^2))
//! ```
//!
//! where `U(t, r)` is the set of distinct users who used `t` at point `r`.
//! PPMI is computed from the `w` values rather than raw frequencies:
//! `PPMI(t, l) = max(0, ln(p(t,l) / (p(t) p(l))))` with all probabilities
//! normalized by the total mass `N`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::corpus::{LocationSet, TagCorpus};
use crate::error::{Error, Result};
use crate::geoindex::{GridIndex, LatLon};

/// Smallest weight kept in the matrix.
pub const MIN_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightingParams {
    pub radius_km: f64,
    pub sigma_km: f64,
    /// Keep only the `max_vocab` tags with the largest total weight.
    pub max_vocab: Option<usize>,
}

impl WeightingParams {
    /// Radius `D` with the default bandwidth `sigma = D / 3`.
    pub fn with_radius(radius_km: f64) -> Self {
        WeightingParams {
            radius_km,
            sigma_km: radius_km / 3.0,
            max_vocab: None,
        }
    }
}

impl Default for WeightingParams {
    fn default() -> Self {
        WeightingParams::with_radius(1.0)
    }
}

pub fn gaussian_kernel(distance_km: f64, sigma_km: f64) -> f64 {
    (-(distance_km * distance_km) / (2.0 * sigma_km * sigma_km)).exp()
}

/// `w(t, l)` from the photo points near `l` at which `t` was used, given as
/// `(distinct user count, distance in km)` pairs already restricted to the
/// radius.
pub fn tag_weight(neighbours: impl IntoIterator<Item = (usize, f64)>, sigma_km: f64) -> f64 {
    neighbours
        .into_iter()
        .map(|(users, d)| users as f64 * gaussian_kernel(d, sigma_km))
        .sum()
}

/// One stored cell of the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub tag: usize,
    pub weight: f64,
    pub ppmi: f64,
    /// Distinct-user co-occurrence count within the radius, without the
    /// kernel factor.
    pub count: f64,
}

/// Sparse location x tag matrix of `w(t, l)` and `PPMI(t, l)`.
///
/// Rows are locations in [`LocationSet`] order; tags are sorted
/// lexicographically. Only cells with `w > 0` are stored, so a stored PPMI
/// can be 0 where the association is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix {
    locations: Vec<String>,
    tags: Vec<String>,
    row_ptr: Vec<usize>,
    entries: Vec<Entry>,
    tag_sums: Vec<f64>,
    loc_sums: Vec<f64>,
    total: f64,
}

impl AssociationMatrix {
    /// Builds a matrix from `(location, tag, weight, count)` cells.
    ///
    /// Cells must be unique; weights must be finite and positive. Marginals
    /// and PPMI are computed here.
    pub fn from_cells(
        locations: Vec<String>,
        tags: Vec<String>,
        cells: impl IntoIterator<Item = (usize, usize, f64, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); locations.len()];
        for (l, t, w, count) in cells {
            if l >= locations.len() || t >= tags.len() {
                return Err(Error::Invalid(format!("cell ({l}, {t}) outside matrix shape")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Invalid(format!("cell ({l}, {t}) has non-positive weight {w}")));
            }
            rows[l].push(Entry {
                tag: t,
                weight: w,
                ppmi: 0.0,
                count,
            });
        }
        let mut row_ptr = Vec::with_capacity(locations.len() + 1);
        let mut entries = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.tag);
            if row.windows(2).any(|p| p[0].tag == p[1].tag) {
                return Err(Error::Invalid("duplicate cell in association matrix".into()));
            }
            entries.extend(row);
            row_ptr.push(entries.len());
        }

        let mut tag_sums = vec![0.0; tags.len()];
        let mut loc_sums = vec![0.0; locations.len()];
        for l in 0..locations.len() {
            for e in &entries[row_ptr[l]..row_ptr[l + 1]] {
                tag_sums[e.tag] += e.weight;
                loc_sums[l] += e.weight;
            }
        }
        let total: f64 = loc_sums.iter().sum();

        for l in 0..locations.len() {
            let p_l = loc_sums[l] / total;
            for e in &mut entries[row_ptr[l]..row_ptr[l + 1]] {
                let p_tl = e.weight / total;
                let p_t = tag_sums[e.tag] / total;
                e.ppmi = (p_tl / (p_t * p_l)).ln().max(0.0);
            }
        }

        Ok(AssociationMatrix {
            locations,
            tags,
            row_ptr,
            entries,
            tag_sums,
            loc_sums,
            total,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).ok()
    }

    pub fn row(&self, loc: usize) -> &[Entry] {
        &self.entries[self.row_ptr[loc]..self.row_ptr[loc + 1]]
    }

    pub fn get(&self, loc: usize, tag: usize) -> Option<&Entry> {
        let row = self.row(loc);
        row.binary_search_by_key(&tag, |e| e.tag).ok().map(|i| &row[i])
    }

    pub fn weight(&self, loc: usize, tag: usize) -> f64 {
        self.get(loc, tag).map_or(0.0, |e| e.weight)
    }

    pub fn ppmi(&self, loc: usize, tag: usize) -> f64 {
        self.get(loc, tag).map_or(0.0, |e| e.ppmi)
    }

    /// Total mass `N`.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// `sum_l w(t, l)`.
    pub fn tag_weight_sum(&self, tag: usize) -> f64 {
        self.tag_sums[tag]
    }

    /// `sum_t w(t, l)`.
    pub fn location_weight_sum(&self, loc: usize) -> f64 {
        self.loc_sums[loc]
    }

    pub fn p_tag(&self, tag: usize) -> f64 {
        self.tag_sums[tag] / self.total
    }

    pub fn p_location(&self, loc: usize) -> f64 {
        self.loc_sums[loc] / self.total
    }

    /// Locations with no tag within the radius.
    pub fn uncovered_locations(&self) -> Vec<usize> {
        (0..self.n_locations()).filter(|&l| self.row(l).is_empty()).collect()
    }

    /// Same matrix with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let cells = (0..self.n_locations()).flat_map(|l| {
            self.row(l)
                .iter()
                .map(move |e| (l, e.tag, e.weight * factor, e.count))
        });
        AssociationMatrix::from_cells(self.locations.clone(), self.tags.clone(), cells.collect::<Vec<_>>())
    }

    /// Writes `loc_id  tag  w  ppmi  count` lines sorted by `(loc_id, tag)`.
    pub fn write_tsv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut order: Vec<usize> = (0..self.n_locations()).collect();
        order.sort_by(|&a, &b| self.locations[a].cmp(&self.locations[b]));
        for l in order {
            for e in self.row(l) {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    self.locations[l], self.tags[e.tag], e.weight, e.ppmi, e.count
                )?;
            }
        }
        Ok(())
    }

    /// Reads a dump written by [`AssociationMatrix::write_tsv`]. Lines
    /// starting with `#` are ignored. Marginals and PPMI are recomputed.
    pub fn read_tsv<R: BufRead>(reader: R, locs: &LocationSet, path: &Path) -> Result<Self> {
        let mut tag_ids: BTreeMap<String, usize> = BTreeMap::new();
        let mut raw = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 4 {
                return Err(Error::parse(path, i + 1, "expected loc_id, tag, w, ppmi[, count]"));
            }
            let l = locs
                .index_of(f[0])
                .ok_or_else(|| Error::parse(path, i + 1, format!("unknown location {}", f[0])))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad number {s}")))
            };
            let w = num(f[2])?;
            let count = match f.get(4) {
                Some(c) => num(c)?,
                None => 0.0,
            };
            let n = tag_ids.len();
            tag_ids.entry(f[1].to_string()).or_insert(n);
            raw.push((l, f[1].to_string(), w, count));
        }
        let tags: Vec<String> = tag_ids.keys().cloned().collect();
        let index: HashMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let cells: Vec<_> = raw
            .iter()
            .map(|(l, t, w, c)| (*l, index[t.as_str()], *w, *c))
            .collect();
        AssociationMatrix::from_cells(locs.ids(), tags, cells)
    }
}

/// Distinct photo coordinates with per-tag distinct-user counts.
struct PhotoPoints {
    coords: Vec<LatLon>,
    tag_users: Vec<Vec<(usize, usize)>>,
    tag_names: Vec<String>,
}

fn aggregate_points(corpus: &TagCorpus) -> PhotoPoints {
    let mut point_ids: HashMap<(u64, u64), usize> = HashMap::new();
    let mut tag_ids: HashMap<&str, usize> = HashMap::new();
    let mut tag_names = Vec::new();
    let mut coords = Vec::new();
    let mut per_point: Vec<BTreeMap<usize, usize>> = Vec::new();
    for r in &corpus.records {
        let p = *point_ids.entry((r.lat.to_bits(), r.lon.to_bits())).or_insert_with(|| {
            coords.push(r.coord());
            per_point.push(BTreeMap::new());
            coords.len() - 1
        });
        let t = *tag_ids.entry(r.tag.as_str()).or_insert_with(|| {
            tag_names.push(r.tag.clone());
            tag_names.len() - 1
        });
        // Records are unique per (user, tag, coordinates), so each one is a
        // distinct user.
        *per_point[p].entry(t).or_insert(0) += 1;
    }
    PhotoPoints {
        coords,
        tag_users: per_point.into_iter().map(|m| m.into_iter().collect()).collect(),
        tag_names,
    }
}

/// Builds the association matrix for `locs` from a deduplicated corpus.
pub fn build_association_matrix(
    corpus: &TagCorpus,
    locs: &LocationSet,
    params: &WeightingParams,
) -> Result<AssociationMatrix> {
    if corpus.is_empty() {
        return Err(Error::Invalid("empty tag corpus".into()));
    }
    if locs.is_empty() {
        return Err(Error::Invalid("empty location set".into()));
    }
    if !(params.sigma_km > 0.0) {
        return Err(Error::Invalid(format!("sigma must be positive, got {}", params.sigma_km)));
    }
    let points = aggregate_points(corpus);
    crate::geoindex::check_longitude_span(
        points.coords.iter().copied().chain(locs.iter().map(|l| l.coord())),
    )?;
    let index = GridIndex::build(points.coords.clone(), params.radius_km)?;

    let rows: Vec<BTreeMap<usize, (f64, f64)>> = (0..locs.len())
        .into_par_iter()
        .map(|l| {
            let mut row: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
            for (p, d) in index.records_within(locs.get(l).coord(), params.radius_km) {
                let k = gaussian_kernel(d, params.sigma_km);
                for &(t, users) in &points.tag_users[p] {
                    let cell = row.entry(t).or_insert((0.0, 0.0));
                    cell.0 += users as f64 * k;
                    cell.1 += users as f64;
                }
            }
            row.retain(|_, (w, _)| *w >= MIN_WEIGHT);
            row
        })
        .collect();

    let mut totals = vec![0.0; points.tag_names.len()];
    for row in &rows {
        for (&t, &(w, _)) in row {
            totals[t] += w;
        }
    }
    let mut vocab: Vec<usize> = (0..totals.len()).filter(|&t| totals[t] > 0.0).collect();
    if let Some(v) = params.max_vocab {
        vocab.sort_by(|&a, &b| {
            totals[b]
                .total_cmp(&totals[a])
                .then_with(|| points.tag_names[a].cmp(&points.tag_names[b]))
        });
        vocab.truncate(v);
    }
    vocab.sort_by(|&a, &b| points.tag_names[a].cmp(&points.tag_names[b]));
    let mut remap = vec![usize::MAX; points.tag_names.len()];
    for (new, &old) in vocab.iter().enumerate() {
        remap[old] = new;
    }
    let tags: Vec<String> = vocab.iter().map(|&t| points.tag_names[t].clone()).collect();
    let cells: Vec<(usize, usize, f64, f64)> = rows
        .iter()
        .enumerate()
        .flat_map(|(l, row)| {
            let remap = &remap;
            row.iter()
                .filter(move |(t, _)| remap[**t] != usize::MAX)
                .map(move |(&t, &(w, c))| (l, remap[t], w, c))
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::Invalid("no tag occurs within the radius of any location".into()));
    }
    let m = AssociationMatrix::from_cells(locs.ids(), tags, cells)?;
    let uncovered = m.uncovered_locations();
    if !uncovered.is_empty() {
        log::warn!("{} location(s) have no tags within {} km", uncovered.len(), params.radius_km);
    }
    Ok(m)
}
