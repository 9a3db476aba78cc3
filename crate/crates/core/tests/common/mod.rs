//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the crate's numerics: the oracles recompute
//! everything from first principles with dense loops.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use geoembed::corpus::{Location, TagRecord};
use geoembed::embed::{CategoryTerm, FeatureTerm, Params, Shape, TagTerm, TrainingPlan};
use rand::Rng;

const R_KM: f64 = 6371.0;

/// Great-circle distance, written out independently of the crate.
pub fn distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let a = ((p2 - p1) / 2.0).sin().powi(2)
        + p1.cos() * p2.cos() * ((lon2 - lon1).to_radians() / 2.0).sin().powi(2);
    2.0 * R_KM * a.min(1.0).sqrt().asin()
}

/// Dense `w[loc][tag]` over the sorted distinct tags of `records`.
pub struct DenseWeights {
    pub tags: Vec<String>,
    pub w: Vec<Vec<f64>>,
}

/// `w(t, l) = sum over photo points p within radius of l of
/// |distinct users of t at p| * exp(-d^2 / 2 sigma^2)`, by scanning every
/// record for every location.
pub fn brute_force_weights(records: &[TagRecord], locs: &[Location], radius_km: f64, sigma_km: f64) -> DenseWeights {
    let tags: Vec<String> = records
        .iter()
        .map(|r| r.tag.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tag_ix: HashMap<&str, usize> = tags.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    // (lat bits, lon bits, tag) -> users
    let mut users: BTreeMap<(u64, u64, usize), BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        users
            .entry((r.lat.to_bits(), r.lon.to_bits(), tag_ix[r.tag.as_str()]))
            .or_default()
            .insert(&r.user_id);
    }
    let mut w = vec![vec![0.0; tags.len()]; locs.len()];
    for (l, loc) in locs.iter().enumerate() {
        for (&(lat, lon, t), u) in &users {
            let d = distance_km(loc.lat, loc.lon, f64::from_bits(lat), f64::from_bits(lon));
            if d <= radius_km {
                w[l][t] += u.len() as f64 * (-d * d / (2.0 * sigma_km * sigma_km)).exp();
            }
        }
    }
    DenseWeights { tags, w }
}

/// `max(0, ln(p(t, l) / (p(t) p(l))))` for every cell with `w > 0`, else 0.
pub fn brute_force_ppmi(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_tags = w.first().map_or(0, Vec::len);
    let mut total = 0.0;
    let mut tag_sum = vec![0.0; n_tags];
    let mut loc_sum = vec![0.0; w.len()];
    for (l, row) in w.iter().enumerate() {
        for (t, &x) in row.iter().enumerate() {
            total += x;
            tag_sum[t] += x;
            loc_sum[l] += x;
        }
    }
    w.iter()
        .enumerate()
        .map(|(l, row)| {
            row.iter()
                .enumerate()
                .map(|(t, &x)| {
                    if x <= 0.0 {
                        return 0.0;
                    }
                    let pmi = ((x / total) / ((tag_sum[t] / total) * (loc_sum[l] / total))).ln();
                    pmi.max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Smoothed-posterior KL score of every tag, from dense weights.
///
/// `Q_i` is the share of all weight on class-`i` locations, `N` the weight
/// on classed locations, `P_i = (sum_{l in C_i} w + gamma Q_i) / (N + gamma)`
/// renormalized over classes.
pub fn naive_kl_scores(w: &[Vec<f64>], class_of: &[Option<usize>], n_classes: usize, gamma: f64) -> Vec<f64> {
    let n_tags = w.first().map_or(0, Vec::len);
    let mut mass = vec![0.0; n_classes];
    for (l, row) in w.iter().enumerate() {
        if let Some(c) = class_of[l] {
            mass[c] += row.iter().sum::<f64>();
        }
    }
    let n: f64 = mass.iter().sum();
    let q: Vec<f64> = mass.iter().map(|m| m / n).collect();
    (0..n_tags)
        .map(|t| {
            let mut s = vec![0.0; n_classes];
            for (l, row) in w.iter().enumerate() {
                if let Some(c) = class_of[l] {
                    s[c] += row[t];
                }
            }
            let raw: Vec<f64> = (0..n_classes).map(|i| (s[i] + gamma * q[i]) / (n + gamma)).collect();
            let z: f64 = raw.iter().sum();
            (0..n_classes)
                .filter(|&i| raw[i] > 0.0 && q[i] > 0.0)
                .map(|i| {
                    let p = raw[i] / z;
                    p * (p / q[i]).ln()
                })
                .sum()
        })
        .collect()
}

/// A random plan exercising every objective component.
pub fn random_plan<R: Rng>(rng: &mut R, n_loc: usize, n_tag: usize, n_feat: usize, n_cat: usize) -> TrainingPlan {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for loc in 0..n_loc {
        for tag in 0..n_tag {
            match rng.random_range(0..3) {
                0 => positives.push(TagTerm {
                    loc,
                    tag,
                    target: rng.random_range(0.0..3.0),
                    weight: 1.0,
                }),
                1 => negatives.push(TagTerm {
                    loc,
                    tag,
                    target: 0.0,
                    weight: 1.0,
                }),
                _ => {}
            }
        }
    }
    let features = (0..n_loc)
        .flat_map(|loc| (0..n_feat).map(move |feature| (loc, feature)))
        .map(|(loc, feature)| FeatureTerm {
            loc,
            feature,
            target: rng.random_range(-2.0..2.0),
        })
        .collect();
    let categories = (0..n_loc)
        .map(|loc| CategoryTerm {
            loc,
            category: rng.random_range(0..n_cat),
        })
        .collect();
    TrainingPlan {
        location_ids: (0..n_loc).map(|l| format!("l{l}")).collect(),
        tag_names: (0..n_tag).map(|t| format!("t{t}")).collect(),
        feature_names: (0..n_feat).map(|f| format!("f{f}")).collect(),
        category_names: (0..n_cat).map(|c| format!("tax/c{c}")).collect(),
        positives,
        negatives,
        features,
        categories,
        glove: false,
    }
}

/// Parameters with entries uniform in `[-scale, scale]`.
pub fn random_params<R: Rng>(rng: &mut R, shape: Shape, scale: f64) -> Params {
    let mut p = Params::zeros(shape);
    for i in 0..p.len() {
        p.set(i, rng.random_range(-scale..=scale));
    }
    p
}

/// Central difference `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn central_difference(params: &Params, i: usize, h: f64, f: impl Fn(&Params) -> f64) -> f64 {
    let mut p = params.clone();
    let x = p.get(i);
    p.set(i, x + h);
    let up = f(&p);
    p.set(i, x - h);
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// `n` records scattered within `spread_km` of random centres around
/// `(lat0, lon0)`, with tags drawn from `n_tags` and users from `n_users`.
pub fn random_records<R: Rng>(
    rng: &mut R,
    n: usize,
    (lat0, lon0): (f64, f64),
    spread_deg: f64,
    n_tags: usize,
    n_users: usize,
) -> Vec<TagRecord> {
    // Few distinct coordinates, so points carry several tags and users.
    let sites: Vec<(f64, f64)> = (0..(n / 3).max(1))
        .map(|_| {
            (
                lat0 + rng.random_range(-spread_deg..spread_deg),
                lon0 + rng.random_range(-spread_deg..spread_deg),
            )
        })
        .collect();
    (0..n)
        .map(|i| {
            let (lat, lon) = sites[rng.random_range(0..sites.len())];
            TagRecord {
                record_id: format!("r{i}"),
                user_id: format!("u{}", rng.random_range(0..n_users)),
                tag: format!("t{}", rng.random_range(0..n_tags)),
                lat,
                lon,
            }
        })
        .collect()
}

/// Deduplicates `(user, tag, lat, lon)` as the loader does.
pub fn dedup(records: Vec<TagRecord>) -> Vec<TagRecord> {
    let mut seen = BTreeSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert((r.user_id.clone(), r.tag.clone(), r.lat.to_bits(), r.lon.to_bits())))
        .collect()
}
