//! Seeded synthetic corpora with planted structure.
//!
//! Locations are scattered around cluster centroids. Each record near a
//! location draws its tags from the location's cluster vocabulary with
//! probability `signal_fraction`, otherwise from a shared noise vocabulary.
//! The planted numerical feature is a linear function of the cluster
//! centroid, and the planted taxonomy `cluster` has one category per
//! cluster.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{build_categories, CategoryAssignment, Location, LocationSet, TagCorpus, TagRecord};
use crate::error::{Error, Result};
use crate::geoindex::{km_per_degree, LatLon};

/// Name of the planted taxonomy.
pub const CLUSTER_TAXONOMY: &str = "cluster";
/// Name of the planted numerical feature.
pub const PLANTED_FEATURE: &str = "planted";

/// Coefficients of the planted feature: `a * lat + b * lon + c` of the
/// cluster centroid.
pub const PLANTED_COEFFICIENTS: [f64; 3] = [2.0, -1.5, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_locations: usize,
    pub n_clusters: usize,
    pub tags_per_cluster: usize,
    pub noise_tags: usize,
    pub records_per_location: usize,
    pub max_tags_per_record: usize,
    pub n_users: usize,
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    /// Typical distance of a location from its centroid.
    pub cluster_spread_km: f64,
    /// Records fall uniformly within this distance of their location.
    pub jitter_km: f64,
    pub signal_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_locations: 200,
            n_clusters: 4,
            tags_per_cluster: 60,
            noise_tags: 120,
            records_per_location: 15,
            max_tags_per_record: 3,
            n_users: 60,
            lat_range: (45.0, 55.0),
            lon_range: (0.0, 10.0),
            cluster_spread_km: 25.0,
            jitter_km: 0.3,
            signal_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_clusters == 0 {
            return bad("n_clusters must be at least 1");
        }
        if self.n_locations == 0 {
            return bad("n_locations must be at least 1");
        }
        if self.tags_per_cluster == 0 {
            return bad("tags_per_cluster must be at least 1");
        }
        if self.records_per_location == 0 || self.max_tags_per_record == 0 {
            return bad("records_per_location and max_tags_per_record must be at least 1");
        }
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.signal_fraction) {
            return bad("signal_fraction must lie in [0, 1]");
        }
        if self.signal_fraction < 1.0 && self.noise_tags == 0 {
            return bad("noise_tags must be at least 1 when signal_fraction < 1");
        }
        let (la, lb) = self.lat_range;
        let (oa, ob) = self.lon_range;
        if !(la < lb && la >= -80.0 && lb <= 80.0) {
            return bad("lat_range must be increasing within [-80, 80]");
        }
        if !(oa < ob && oa >= -180.0 && ob <= 180.0 && ob - oa <= 180.0) {
            return bad("lon_range must be increasing within [-180, 180] and span at most 180 degrees");
        }
        if !(self.cluster_spread_km >= 0.0 && self.jitter_km >= 0.0) {
            return bad("cluster_spread_km and jitter_km must be non-negative");
        }
        Ok(())
    }
}

/// One generated photo with its tag set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub record_id: String,
    pub user_id: String,
    pub lat: f64,
    pub lon: f64,
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub records: Vec<SynthRecord>,
    pub locations: Vec<Location>,
    /// Cluster index per location.
    pub clusters: Vec<usize>,
    pub centroids: Vec<LatLon>,
    pub feature_names: Vec<String>,
    /// Feature rows per location, columns in `feature_names` order.
    pub features: Vec<Vec<f64>>,
    pub cluster_vocab: Vec<Vec<String>>,
    pub noise_vocab: Vec<String>,
}

/// Files written by [`SynthCorpus::write_files`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPaths {
    pub records: PathBuf,
    pub locations: PathBuf,
    pub features: PathBuf,
    pub categories: PathBuf,
    pub truth: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SynthPaths {
            records: dir.join("records.tsv"),
            locations: dir.join("locations.tsv"),
            features: dir.join("features.tsv"),
            categories: dir.join("categories.tsv"),
            truth: dir.join("truth.tsv"),
        }
    }
}

pub fn cluster_tag(cluster: usize, i: usize) -> String {
    format!("c{cluster}t{i}")
}

pub fn noise_tag(i: usize) -> String {
    format!("noise{i}")
}

pub fn category_name(cluster: usize) -> String {
    format!("c{cluster}")
}

/// The planted feature value for a centroid.
pub fn planted_value(centroid: LatLon) -> f64 {
    let [a, b, c] = PLANTED_COEFFICIENTS;
    a * centroid.lat + b * centroid.lon + c
}

/// A point at `distance_km` and `bearing` (radians) from `origin`, using a
/// local flat approximation.
fn offset(origin: LatLon, distance_km: f64, bearing: f64) -> LatLon {
    let kpd = km_per_degree();
    let dlat = distance_km * bearing.cos() / kpd;
    let dlon = distance_km * bearing.sin() / (kpd * origin.lat.to_radians().cos());
    LatLon::new(origin.lat + dlat, origin.lon + dlon)
}

fn random_offset(rng: &mut ChaCha8Rng, origin: LatLon, max_km: f64) -> LatLon {
    // uniform over the disc
    let r = max_km * rng.random::<f64>().sqrt();
    let bearing = rng.random_range(0.0..std::f64::consts::TAU);
    offset(origin, r, bearing)
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cfg = config;

    // Centroids, kept apart when the extent allows it.
    let min_sep = 4.0 * cfg.cluster_spread_km;
    let mut centroids: Vec<LatLon> = Vec::with_capacity(cfg.n_clusters);
    for _ in 0..cfg.n_clusters {
        let mut candidate = LatLon::new(0.0, 0.0);
        for _ in 0..1000 {
            candidate = LatLon::new(
                rng.random_range(cfg.lat_range.0..cfg.lat_range.1),
                rng.random_range(cfg.lon_range.0..cfg.lon_range.1),
            );
            if centroids.iter().all(|c| crate::geoindex::haversine(*c, candidate) >= min_sep) {
                break;
            }
        }
        centroids.push(candidate);
    }

    let cluster_vocab: Vec<Vec<String>> = (0..cfg.n_clusters)
        .map(|c| (0..cfg.tags_per_cluster).map(|i| cluster_tag(c, i)).collect())
        .collect();
    let noise_vocab: Vec<String> = (0..cfg.noise_tags).map(noise_tag).collect();

    let width = cfg.n_locations.to_string().len();
    let mut locations = Vec::with_capacity(cfg.n_locations);
    let mut clusters = Vec::with_capacity(cfg.n_locations);
    for i in 0..cfg.n_locations {
        let c = i % cfg.n_clusters;
        let centroid = centroids[c];
        let r = cfg.cluster_spread_km * rng.random::<f64>().sqrt() * 2.0;
        let p = offset(centroid, r, rng.random_range(0.0..std::f64::consts::TAU));
        locations.push(Location {
            loc_id: format!("L{i:0width$}"),
            lat: p.lat,
            lon: p.lon,
        });
        clusters.push(c);
    }

    let mut records = Vec::with_capacity(cfg.n_locations * cfg.records_per_location);
    for (l, loc) in locations.iter().enumerate() {
        for r in 0..cfg.records_per_location {
            let p = random_offset(&mut rng, loc.coord(), cfg.jitter_km);
            let n_tags = rng.random_range(1..=cfg.max_tags_per_record);
            let mut tags: Vec<String> = Vec::with_capacity(n_tags);
            for _ in 0..n_tags {
                let tag = if rng.random::<f64>() < cfg.signal_fraction {
                    &cluster_vocab[clusters[l]][rng.random_range(0..cfg.tags_per_cluster)]
                } else {
                    &noise_vocab[rng.random_range(0..cfg.noise_tags)]
                };
                if !tags.contains(tag) {
                    tags.push(tag.clone());
                }
            }
            records.push(SynthRecord {
                record_id: format!("{}-{r}", loc.loc_id),
                user_id: format!("u{}", rng.random_range(0..cfg.n_users)),
                lat: p.lat,
                lon: p.lon,
                tags,
            });
        }
    }

    let feature_names = vec![PLANTED_FEATURE.to_string(), "lat".to_string(), "lon".to_string()];
    let features = locations
        .iter()
        .zip(&clusters)
        .map(|(loc, &c)| vec![planted_value(centroids[c]), loc.lat, loc.lon])
        .collect();

    Ok(SynthCorpus {
        config: config.clone(),
        records,
        locations,
        clusters,
        centroids,
        feature_names,
        features,
        cluster_vocab,
        noise_vocab,
    })
}

impl SynthCorpus {
    /// One [`TagRecord`] per (record, tag), as the corpus loader would
    /// produce before deduplication.
    pub fn tag_corpus(&self) -> TagCorpus {
        let mut text = Vec::new();
        self.write_records(&mut text).expect("writing to memory");
        crate::corpus::read_tag_records(std::io::Cursor::new(text), Path::new("<synthetic>"))
            .expect("generated records are well formed")
    }

    pub fn tag_records(&self) -> Vec<TagRecord> {
        self.tag_corpus().records
    }

    pub fn location_set(&self) -> LocationSet {
        LocationSet::new(self.locations.clone()).expect("generated ids are unique")
    }

    pub fn categories(&self) -> Vec<CategoryAssignment> {
        build_categories(
            self.clusters
                .iter()
                .enumerate()
                .map(|(l, &c)| (CLUSTER_TAXONOMY.to_string(), category_name(c), l)),
        )
        .expect("one category per location")
    }

    pub fn is_noise_tag(&self, tag: &str) -> bool {
        tag.starts_with("noise")
    }

    pub fn write_records<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for r in &self.records {
            writeln!(out, "{}\t{}\t{}\t{}\t{}", r.record_id, r.user_id, r.lat, r.lon, r.tags.join(","))?;
        }
        Ok(())
    }

    pub fn write_locations<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for l in &self.locations {
            writeln!(out, "{}\t{}\t{}", l.loc_id, l.lat, l.lon)?;
        }
        Ok(())
    }

    pub fn write_features<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "loc_id\t{}", self.feature_names.join("\t"))?;
        for (l, row) in self.locations.iter().zip(&self.features) {
            write!(out, "{}", l.loc_id)?;
            for v in row {
                write!(out, "\t{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn write_categories<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (l, &c) in self.locations.iter().zip(&self.clusters) {
            writeln!(out, "{CLUSTER_TAXONOMY}\t{}\t{}", category_name(c), l.loc_id)?;
        }
        Ok(())
    }

    pub fn write_truth<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for (l, &c) in self.locations.iter().zip(&self.clusters) {
            writeln!(out, "{}\t{c}", l.loc_id)?;
        }
        Ok(())
    }

    /// Writes the five files into `dir`, creating it if needed.
    pub fn write_files(&self, dir: &Path) -> Result<SynthPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = SynthPaths::in_dir(dir);
        type Writer = fn(&SynthCorpus, &mut BufWriter<File>) -> std::io::Result<()>;
        let jobs: [(&PathBuf, Writer); 5] = [
            (&paths.records, |s, w| s.write_records(w)),
            (&paths.locations, |s, w| s.write_locations(w)),
            (&paths.features, |s, w| s.write_features(w)),
            (&paths.categories, |s, w| s.write_categories(w)),
            (&paths.truth, |s, w| s.write_truth(w)),
        ];
        for (path, write) in jobs {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut out = BufWriter::new(file);
            write(self, &mut out)
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small() -> SynthConfig {
        SynthConfig {
            n_locations: 40,
            tags_per_cluster: 20,
            noise_tags: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let render = |c: &SynthCorpus| {
            let mut buf = Vec::new();
            c.write_records(&mut buf).unwrap();
            c.write_features(&mut buf).unwrap();
            buf
        };
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(render(&a), render(&b));
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(render(&a), render(&c));
    }

    #[test]
    fn vocabularies_are_disjoint() {
        let s = generate(&small()).unwrap();
        let mut seen = HashSet::new();
        for t in s.cluster_vocab.iter().flatten().chain(&s.noise_vocab) {
            assert!(seen.insert(t.clone()), "{t} appears twice");
        }
    }

    #[test]
    fn planted_feature_is_exact() {
        let s = generate(&small()).unwrap();
        for (l, row) in s.features.iter().enumerate() {
            let c = s.centroids[s.clusters[l]];
            assert_eq!(row[0], 2.0 * c.lat - 1.5 * c.lon + 10.0);
        }
    }

    #[test]
    fn records_parse_cleanly() {
        let s = generate(&small()).unwrap();
        let corpus = s.tag_corpus();
        assert_eq!(corpus.stats.malformed, 0);
        assert_eq!(corpus.stats.lines, s.records.len());
    }

    #[test]
    fn tags_come_from_own_cluster_or_noise() {
        let s = generate(&small()).unwrap();
        for r in &s.records {
            let loc = r.record_id.split('-').next().unwrap();
            let l = s.locations.iter().position(|x| x.loc_id == loc).unwrap();
            for t in &r.tags {
                assert!(s.cluster_vocab[s.clusters[l]].contains(t) || s.noise_vocab.contains(t));
            }
        }
    }

    #[test]
    fn inconsistent_configs_rejected() {
        for bad in [
            SynthConfig { n_clusters: 0, ..small() },
            SynthConfig { signal_fraction: 1.5, ..small() },
            SynthConfig { lat_range: (10.0, 5.0), ..small() },
            SynthConfig { noise_tags: 0, ..small() },
        ] {
            assert!(matches!(generate(&bad), Err(Error::Config(_))));
        }
    }
}
