//! Great-circle distances and a flat lat/lon grid for radius queries.
//!
//! The grid is sized for a nominal query radius, but queries with any radius
//! are exact: a query inspects every cell that intersects the bounding box of
//! its spherical cap and then filters candidates by haversine distance.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Mean earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Padding added to query bounding boxes, in degrees, so rounding in the box
/// computation can never exclude a point the haversine filter would accept.
const BOX_SLACK_DEG: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Haversine distance in kilometres.
pub fn haversine(a: LatLon, b: LatLon) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlambda / 2.0).sin();
    let h = s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2;
    2.0 * EARTH_RADIUS_KM * h.clamp(0.0, 1.0).sqrt().asin()
}

/// Kilometres per degree of latitude on the spherical earth.
pub fn km_per_degree() -> f64 {
    EARTH_RADIUS_KM * std::f64::consts::PI / 180.0
}

/// Uniform lat/lon grid over a fixed set of points.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<LatLon>,
    cell_lat: f64,
    cell_lon: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl GridIndex {
    /// Builds an index with cells at least `radius_km` wide at the most
    /// poleward latitude of `points`.
    ///
    /// Fails if a point is out of bounds or the points span more than 180
    /// degrees of longitude (date-line wraparound is not handled).
    pub fn build(points: Vec<LatLon>, radius_km: f64) -> Result<Self> {
        if !(radius_km > 0.0 && radius_km.is_finite()) {
            return Err(Error::Invalid(format!(
                "index radius must be positive, got {radius_km}"
            )));
        }
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| !p.is_valid()) {
            return Err(Error::Invalid(format!(
                "point {i} out of bounds: ({}, {})",
                p.lat, p.lon
            )));
        }
        check_longitude_span(points.iter().copied())?;

        let cell_lat = (radius_km / km_per_degree()).min(180.0);
        let max_abs_lat = points.iter().map(|p| p.lat.abs()).fold(0.0, f64::max);
        let edge_lat = (max_abs_lat + cell_lat).min(90.0);
        let cos_edge = edge_lat.to_radians().cos();
        let cell_lon = if cos_edge > 1e-6 {
            (cell_lat / cos_edge).min(360.0)
        } else {
            360.0
        };

        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets
                .entry(cell_key(*p, cell_lat, cell_lon))
                .or_default()
                .push(i);
        }
        Ok(GridIndex {
            points,
            cell_lat,
            cell_lon,
            buckets,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> LatLon {
        self.points[i]
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    /// All indexed points with haversine distance `<= radius_km` from
    /// `center`, sorted by point index.
    pub fn records_within(&self, center: LatLon, radius_km: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if radius_km < 0.0 || self.points.is_empty() {
            return out;
        }
        let delta_deg = (radius_km / EARTH_RADIUS_KM).to_degrees();
        let lat_lo = center.lat - delta_deg - BOX_SLACK_DEG;
        let lat_hi = center.lat + delta_deg + BOX_SLACK_DEG;
        let lon_half = lon_half_width(center.lat, radius_km);

        let mut consider = |i: usize| {
            let d = haversine(center, self.points[i]);
            if d <= radius_km {
                out.push((i, d));
            }
        };

        match lon_half {
            Some(half) => {
                let half = half + BOX_SLACK_DEG;
                let r0 = ((lat_lo.max(-90.0) + 90.0) / self.cell_lat).floor() as i64;
                let r1 = ((lat_hi.min(90.0) + 90.0) / self.cell_lat).floor() as i64;
                let c0 = ((center.lon - half + 180.0) / self.cell_lon).floor() as i64;
                let c1 = ((center.lon + half + 180.0) / self.cell_lon).floor() as i64;
                let cells = (r1 - r0 + 1).saturating_mul(c1 - c0 + 1);
                if cells as usize > self.buckets.len() {
                    for (&(r, c), members) in &self.buckets {
                        if (r0..=r1).contains(&r) && (c0..=c1).contains(&c) {
                            members.iter().for_each(|&i| consider(i));
                        }
                    }
                } else {
                    for r in r0..=r1 {
                        for c in c0..=c1 {
                            if let Some(members) = self.buckets.get(&(r, c)) {
                                members.iter().for_each(|&i| consider(i));
                            }
                        }
                    }
                }
            }
            // The cap reaches a pole: every longitude is a candidate.
            None => {
                let r0 = ((lat_lo.max(-90.0) + 90.0) / self.cell_lat).floor() as i64;
                let r1 = ((lat_hi.min(90.0) + 90.0) / self.cell_lat).floor() as i64;
                for (&(r, _), members) in &self.buckets {
                    if (r0..=r1).contains(&r) {
                        members.iter().for_each(|&i| consider(i));
                    }
                }
            }
        }
        out.sort_by_key(|&(i, _)| i);
        out
    }
}

/// Linear scan over all points; reference behaviour for [`GridIndex::records_within`].
pub fn brute_force_within(points: &[LatLon], center: LatLon, radius_km: f64) -> Vec<(usize, f64)> {
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let d = haversine(center, *p);
            (d <= radius_km).then_some((i, d))
        })
        .collect()
}

/// Rejects coordinate sets spanning more than half the globe in longitude.
pub fn check_longitude_span(points: impl IntoIterator<Item = LatLon>) -> Result<()> {
    let (lo, hi) = points
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.lon), hi.max(p.lon))
        });
    if hi - lo > 180.0 {
        return Err(Error::Invalid(format!(
            "coordinates span {:.3} degrees of longitude ({lo} to {hi}); data crossing the date line is not supported",
            hi - lo
        )));
    }
    Ok(())
}

fn cell_key(p: LatLon, cell_lat: f64, cell_lon: f64) -> (i64, i64) {
    (
        ((p.lat + 90.0) / cell_lat).floor() as i64,
        ((p.lon + 180.0) / cell_lon).floor() as i64,
    )
}

/// Half-width in degrees of longitude of the smallest box containing the cap
/// of angular radius `radius_km / R` around a point at `lat`, or `None` if the
/// cap contains a pole.
fn lon_half_width(lat: f64, radius_km: f64) -> Option<f64> {
    let delta = radius_km / EARTH_RADIUS_KM;
    let phi = lat.to_radians();
    if delta >= std::f64::consts::FRAC_PI_2 - phi.abs() {
        return None;
    }
    let s = delta.sin() / phi.cos();
    if s >= 1.0 {
        return None;
    }
    Some(s.asin().to_degrees())
}
