//! Generated worked example.
//!
//! [`worked_example`] pushes a three-location, six-tag corpus through tag
//! weighting, PPMI, KL selection and a single Adagrad update, renders every
//! intermediate number as markdown, and recomputes each number with direct
//! formulas. The rendered file lives in `docs/worked_example.md` and is
//! checked against a fresh rendering by the test suite.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{read_tag_records, Location, LocationSet};
use crate::embed::{init_model, run_epochs, evaluate, TagTerm, TrainConfig, TrainingPlan, ADAGRAD_EPSILON};
use crate::error::{Error, Result};
use crate::geoindex::{haversine, km_per_degree, LatLon};
use crate::selection::{class_priors, kl_divergence, kl_select, smoothed_posterior, ClassSet, SelectionOptions};
use crate::weighting::{build_association_matrix, gaussian_kernel, WeightingParams};

/// A documented number and its independent recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub expected: f64,
}

impl Check {
    pub fn passes(&self) -> bool {
        (self.value - self.expected).abs() <= 1e-12 * self.expected.abs().max(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub markdown: String,
    pub checks: Vec<Check>,
}

const LOCATIONS: [(&str, f64); 3] = [("A", 50.0), ("B", 50.1), ("C", 50.2)];
const LON: f64 = 4.0;

/// `(record, user, location, km north of it, tags)`.
const RECORDS: [(&str, &str, usize, f64, &str); 10] = [
    ("r1", "u1", 0, 0.0, "beach,dune"),
    ("r2", "u2", 0, 0.3, "beach,harbor"),
    ("r3", "u1", 0, 0.6, "beach"),
    ("r4", "u3", 1, 0.0, "beach,church"),
    ("r5", "u3", 1, 0.0, "harbor"),
    ("r6", "u4", 1, 0.9, "dune,church"),
    ("r7", "u5", 2, 0.0, "forest,hill"),
    ("r8", "u6", 2, 0.3, "forest,church"),
    ("r9", "u5", 2, 1.2, "hill"),
    ("r10", "u7", 2, 0.0, "forest"),
];

/// Class of each location for KL selection.
const CLASSES: [&str; 2] = ["coast", "inland"];
const CLASS_OF: [usize; 3] = [0, 0, 1];
const GAMMA: f64 = 10.0;

struct Doc {
    md: String,
    checks: Vec<Check>,
}

impl Doc {
    fn check(&mut self, label: String, value: f64, expected: f64) -> f64 {
        self.checks.push(Check { label, value, expected });
        value
    }

    fn line(&mut self, s: &str) {
        self.md.push_str(s);
        self.md.push('\n');
    }
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

fn record_coord(loc: usize, km_north: f64) -> LatLon {
    LatLon::new(LOCATIONS[loc].1 + km_north / km_per_degree(), LON)
}

/// Builds the document and its checks. Fails if any check fails.
pub fn worked_example() -> Result<WorkedExample> {
    let mut doc = Doc {
        md: String::new(),
        checks: Vec::new(),
    };
    let params = WeightingParams::with_radius(1.0);
    let sigma = params.sigma_km;

    doc.line("# Worked example");
    doc.line("");
    doc.line("Generated by `geoembed::docs::worked_example`; do not edit by hand.");
    doc.line("Regenerate with `UPDATE_DOCS=1 cargo test -p geoembed --test docs`.");
    doc.line("");
    doc.line("## Corpus");
    doc.line("");
    doc.line(&format!(
        "Three locations on the meridian {LON}E, about 11 km apart, so no record is within D = {} km of two of them.",
        params.radius_km
    ));
    doc.line("Records are placed a given distance due north of a location.");
    doc.line("");
    doc.line("| location | lat | lon |");
    doc.line("|---|---|---|");
    for (id, lat) in LOCATIONS {
        doc.line(&format!("| {id} | {lat} | {LON} |"));
    }
    doc.line("");
    doc.line("| record | user | near | distance (km) | tags |");
    doc.line("|---|---|---|---|---|");
    let mut tsv = String::new();
    for (rid, user, loc, km, tags) in RECORDS {
        let p = record_coord(loc, km);
        let d = haversine(p, LatLon::new(LOCATIONS[loc].1, LON));
        doc.check(format!("distance {rid}"), d, km);
        doc.line(&format!("| {rid} | {user} | {} | {} | {tags} |", LOCATIONS[loc].0, f(d)));
        writeln!(tsv, "{rid}\t{user}\t{}\t{}\t{tags}", p.lat, p.lon).expect("string write");
    }
    let corpus = read_tag_records(std::io::Cursor::new(tsv), Path::new("<worked example>"))?;
    let locs = LocationSet::new(
        LOCATIONS
            .iter()
            .map(|(id, lat)| Location {
                loc_id: id.to_string(),
                lat: *lat,
                lon: LON,
            })
            .collect(),
    )?;

    // Tag weights
    doc.line("");
    doc.line("## Tag weights");
    doc.line("");
    doc.line(&format!(
        "w(t, l) sums, over photo coordinates within D of l, the number of distinct users who used t there times \
         exp(-d^2 / (2 sigma^2)), with sigma = D/3 = {}.",
        f(sigma)
    ));
    doc.line("");
    doc.line("| distance (km) | kernel |");
    doc.line("|---|---|");
    let distances: BTreeSet<u64> = RECORDS.iter().map(|r| r.3.to_bits()).collect();
    for bits in distances {
        let d = f64::from_bits(bits);
        let k = gaussian_kernel(d, sigma);
        let note = if d > params.radius_km { " (outside D)" } else { "" };
        doc.check(format!("kernel {d}"), k, (-(d * d) / (2.0 * sigma * sigma)).exp());
        doc.line(&format!("| {d}{note} | {} |", f(k)));
    }

    let assoc = build_association_matrix(&corpus, &locs, &params)?;
    let tags: Vec<String> = assoc.tags().to_vec();
    doc.line("");
    let header: Vec<&str> = tags.iter().map(String::as_str).collect();
    doc.line(&format!("| w | {} |", header.join(" | ")));
    doc.line(&format!("|---|{}", "---|".repeat(tags.len())));
    for l in 0..locs.len() {
        let mut cells = Vec::new();
        for (t, tag) in tags.iter().enumerate() {
            // brute force over raw records, one count per (user, coordinate)
            let mut seen = BTreeSet::new();
            let mut expected = 0.0;
            for (_, user, loc, km, rtags) in RECORDS {
                if rtags.split(',').any(|x| x == tag) && seen.insert((user, loc, km.to_bits())) {
                    let d = haversine(record_coord(loc, km), locs.get(l).coord());
                    if d <= params.radius_km {
                        expected += (-(d * d) / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            let w = doc.check(format!("w({tag}, {})", locs.get(l).loc_id), assoc.weight(l, t), expected);
            cells.push(f(w));
        }
        doc.line(&format!("| {} | {} |", locs.get(l).loc_id, cells.join(" | ")));
    }

    // PPMI
    let total: f64 = (0..locs.len())
        .flat_map(|l| (0..tags.len()).map(move |t| (l, t)))
        .map(|(l, t)| assoc.weight(l, t))
        .sum();
    let n = doc.check("N".into(), assoc.total(), total);
    doc.line("");
    doc.line("## PPMI");
    doc.line("");
    doc.line(&format!(
        "N = sum of all weights = {}. p(t, l) = w / N, p(t) and p(l) are its marginals, and \
         PPMI = max(0, ln(p(t, l) / (p(t) p(l)))).",
        f(n)
    ));
    doc.line("");
    doc.line("| tag | p(t) |");
    doc.line("|---|---|");
    for (t, tag) in tags.iter().enumerate() {
        let expected = (0..locs.len()).map(|l| assoc.weight(l, t)).sum::<f64>() / total;
        let p = doc.check(format!("p({tag})"), assoc.p_tag(t), expected);
        doc.line(&format!("| {tag} | {} |", f(p)));
    }
    doc.line("");
    doc.line("| location | p(l) |");
    doc.line("|---|---|");
    for l in 0..locs.len() {
        let expected = (0..tags.len()).map(|t| assoc.weight(l, t)).sum::<f64>() / total;
        let p = doc.check(format!("p({})", locs.get(l).loc_id), assoc.p_location(l), expected);
        doc.line(&format!("| {} | {} |", locs.get(l).loc_id, f(p)));
    }
    doc.line("");
    doc.line(&format!("| PPMI | {} |", header.join(" | ")));
    doc.line(&format!("|---|{}", "---|".repeat(tags.len())));
    for l in 0..locs.len() {
        let mut cells = Vec::new();
        for (t, tag) in tags.iter().enumerate() {
            let w = assoc.weight(l, t);
            let pt = (0..locs.len()).map(|m| assoc.weight(m, t)).sum::<f64>() / total;
            let pl = (0..tags.len()).map(|s| assoc.weight(l, s)).sum::<f64>() / total;
            let expected = if w > 0.0 { ((w / total) / (pt * pl)).ln().max(0.0) } else { 0.0 };
            let v = doc.check(format!("ppmi({tag}, {})", locs.get(l).loc_id), assoc.ppmi(l, t), expected);
            cells.push(f(v));
        }
        doc.line(&format!("| {} | {} |", locs.get(l).loc_id, cells.join(" | ")));
    }

    // KL selection
    let classes = ClassSet::new(
        CLASSES.iter().map(ToString::to_string).collect(),
        CLASS_OF.iter().map(|&c| Some(c)).collect(),
    );
    let priors = class_priors(&assoc, &classes);
    doc.line("");
    doc.line("## KL tag selection");
    doc.line("");
    doc.line(&format!(
        "Classes: A and B are `{}`, C is `{}`. The prior Q(C) is the share of all weight in the class. \
         With gamma = {GAMMA}, P(C | t) = (sum of w(t, l) over l in C + gamma Q(C)) / (N + gamma), renormalized \
         over classes, and the score is KL(P || Q).",
        CLASSES[0], CLASSES[1]
    ));
    doc.line("");
    doc.line("| class | Q |");
    doc.line("|---|---|");
    let mass: Vec<f64> = (0..CLASSES.len())
        .map(|c| {
            (0..locs.len())
                .filter(|&l| CLASS_OF[l] == c)
                .flat_map(|l| (0..tags.len()).map(move |t| (l, t)))
                .map(|(l, t)| assoc.weight(l, t))
                .sum()
        })
        .collect();
    for (c, name) in CLASSES.iter().enumerate() {
        let q = doc.check(format!("Q({name})"), priors[c], mass[c] / total);
        doc.line(&format!("| {name} | {} |", f(q)));
    }
    let sel = kl_select(
        &assoc,
        &classes,
        &SelectionOptions {
            gamma: GAMMA,
            k: 3,
            ..SelectionOptions::default()
        },
    )?;
    doc.line("");
    doc.line(&format!("| tag | P({}) | P({}) | KL |", CLASSES[0], CLASSES[1]));
    doc.line("|---|---|---|---|");
    for (tag, score) in &sel.scored {
        let t = assoc.tag_index(tag).expect("scored tags are in the vocabulary");
        let raw = smoothed_posterior(&assoc, t, &classes, GAMMA, total, &priors);
        let z: f64 = raw.iter().sum();
        let mut p_expected = Vec::new();
        let mut kl = 0.0;
        for c in 0..CLASSES.len() {
            let s: f64 = (0..locs.len()).filter(|&l| CLASS_OF[l] == c).map(|l| assoc.weight(l, t)).sum();
            p_expected.push((s + GAMMA * mass[c] / total) / (total + GAMMA));
        }
        let z_expected: f64 = p_expected.iter().sum();
        let mut cells = Vec::new();
        for c in 0..CLASSES.len() {
            let p = doc.check(format!("P({} | {tag})", CLASSES[c]), raw[c] / z, p_expected[c] / z_expected);
            let q = mass[c] / total;
            kl += (p_expected[c] / z_expected) * ((p_expected[c] / z_expected) / q).ln();
            cells.push(f(p));
        }
        doc.check(format!("kl_divergence({tag})"), kl_divergence(&raw, &priors, true), kl);
        let s = doc.check(format!("KL({tag})"), *score, kl);
        doc.line(&format!("| {tag} | {} | {} |", cells.join(" | "), f(s)));
    }
    doc.line("");
    doc.line(&format!(
        "Ranked by score, ties by total weight then name. With K = 3 the selection is: {}.",
        sel.selected.join(", ")
    ));

    // One Adagrad update
    let (l, t) = (0, assoc.tag_index("beach").expect("beach is in the vocabulary"));
    let target = assoc.ppmi(l, t);
    let plan = TrainingPlan {
        location_ids: assoc.locations().to_vec(),
        tag_names: tags.clone(),
        feature_names: vec![],
        category_names: vec![],
        positives: vec![TagTerm {
            loc: l,
            tag: t,
            target,
            weight: 1.0,
        }],
        negatives: vec![],
        features: vec![],
        categories: vec![],
        glove: false,
    };
    let cfg = TrainConfig {
        dim: 2,
        alpha: 0.1,
        seed: 7,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(&plan, &cfg, &mut rng);
    let before = model.params.clone();
    let j_before = evaluate(&before, cfg.alpha, cfg.beta, &plan).total;
    run_epochs(&mut model, &plan, cfg.lr, 1, &mut rng)?;
    let j_after = evaluate(&model.params, cfg.alpha, cfg.beta, &plan).total;

    let v0 = before.locations.row(l).to_vec();
    let w0 = before.tags.row(t).to_vec();
    let b0 = before.tag_bias[t];
    let pred = v0[0] * w0[0] + v0[1] * w0[1] + b0;
    let c = 2.0 * cfg.alpha * (pred - target);
    let step = |x: f64, g: f64| x - cfg.lr * g / (g * g + ADAGRAD_EPSILON).sqrt();

    doc.line("");
    doc.line("## One Adagrad update");
    doc.line("");
    doc.line(&format!(
        "A single tag term (A, beach) with target PPMI = {}, dimension 2, alpha = {}, learning rate {}, \
         parameters drawn uniformly from [-0.25, 0.25] with seed {}. The term's loss is \
         alpha (v . w + b - target)^2; its gradient is c w for v, c v for w and c for b, with \
         c = 2 alpha (v . w + b - target). Adagrad adds g^2 to the accumulator (starting at 0) and \
         subtracts lr g / sqrt(G + {ADAGRAD_EPSILON:e}).",
        f(target),
        cfg.alpha,
        cfg.lr,
        cfg.seed
    ));
    doc.line("");
    doc.line(&format!("prediction v . w + b = {}, c = {}", f(pred), f(c)));
    doc.line("");
    doc.line("| parameter | before | gradient | after |");
    doc.line("|---|---|---|---|");
    for k in 0..2 {
        let g = c * w0[k];
        let after = doc.check(format!("v_A[{k}]"), model.params.locations.row(l)[k], step(v0[k], g));
        doc.line(&format!("| v_A[{k}] | {} | {} | {} |", f(v0[k]), f(g), f(after)));
    }
    for k in 0..2 {
        let g = c * v0[k];
        let after = doc.check(format!("w_beach[{k}]"), model.params.tags.row(t)[k], step(w0[k], g));
        doc.line(&format!("| w_beach[{k}] | {} | {} | {} |", f(w0[k]), f(g), f(after)));
    }
    let b_after = doc.check("b_beach".into(), model.params.tag_bias[t], step(b0, c));
    doc.line(&format!("| b_beach | {} | {} | {} |", f(b0), f(c), f(b_after)));
    doc.line("");
    let jb = doc.check("J before".into(), j_before, cfg.alpha * (pred - target).powi(2));
    let v1 = model.params.locations.row(l);
    let w1 = model.params.tags.row(t);
    let pred1 = v1[0] * w1[0] + v1[1] * w1[1] + model.params.tag_bias[t];
    let ja = doc.check("J after".into(), j_after, cfg.alpha * (pred1 - target).powi(2));
    doc.line(&format!("J = {} before the update and {} after it.", f(jb), f(ja)));

    if let Some(bad) = doc.checks.iter().find(|c| !c.passes()) {
        return Err(Error::Invalid(format!(
            "worked example check {} failed: {} vs {}",
            bad.label, bad.value, bad.expected
        )));
    }
    Ok(WorkedExample {
        markdown: doc.md,
        checks: doc.checks,
    })
}
