//! Great-circle distance and nearest-city lookup.

use thiserror::Error;

use crate::model::City;

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

/// Haversine great-circle distance in meters on a sphere of `earth_radius` meters.
///
/// The haversine of the central angle and of its supplement are both sums
/// of non-negative terms, so the `atan2` form stays accurate from
/// coincident points all the way to antipodes. Differences are taken in
/// degrees, where they are exact for nearby points.
pub fn haversine(p1: LatLon, p2: LatLon, earth_radius: f64) -> f64 {
    let half_dphi = (p2.lat - p1.lat).to_radians() / 2.0;
    let half_sphi = (p1.lat + p2.lat).to_radians() / 2.0;
    let half_dlambda = (p2.lon - p1.lon).to_radians() / 2.0;
    let cos_prod = cos_lat(p1.lat) * cos_lat(p2.lat);

    let hav = half_dphi.sin().powi(2) + cos_prod * half_dlambda.sin().powi(2);
    let hav_supplement = half_sphi.sin().powi(2) + cos_prod * half_dlambda.cos().powi(2);

    2.0 * earth_radius * hav.max(0.0).sqrt().atan2(hav_supplement.max(0.0).sqrt())
}

/// Cosine of a latitude in degrees, via the colatitude near the poles.
fn cos_lat(lat: f64) -> f64 {
    if lat.abs() > 45.0 {
        (90.0 - lat.abs()).to_radians().sin()
    } else {
        lat.to_radians().cos()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("cannot build a spatial index over an empty gazetteer")]
    Empty,
}

// Slack on the pruning bound. The chord bound and the haversine distances
// are computed through different trig paths; 1 µm dwarfs their disagreement.
const PRUNE_SLACK_M: f64 = 1e-6;

/// Static k-d tree over city positions on the unit sphere.
///
/// Candidates are ranked by [`haversine`] itself, so answers are exactly
/// the linear-scan argmin with ties going to the smallest GeoNames id.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cities: Vec<City>,
    // implicit tree: node for range [lo, hi) sits at (lo + hi) / 2
    order: Vec<u32>,
    points: Vec<[f64; 3]>,
    earth_radius: f64,
}

impl SpatialIndex {
    pub fn build(cities: Vec<City>, earth_radius: f64) -> Result<Self, IndexError> {
        if cities.is_empty() {
            return Err(IndexError::Empty);
        }
        let points: Vec<[f64; 3]> = cities
            .iter()
            .map(|c| LatLon::new(c.latitude, c.longitude).unit_vector())
            .collect();
        let mut order: Vec<u32> = (0..cities.len() as u32).collect();
        split(&mut order, &points, 0);
        Ok(Self {
            cities,
            order,
            points,
            earth_radius,
        })
    }

    pub fn len(&self) -> usize {
        self.cities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cities.is_empty()
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    /// Index into [`SpatialIndex::cities`] of the nearest city.
    pub fn nearest(&self, query: LatLon) -> usize {
        let mut search = Search {
            index: self,
            query,
            query_point: query.unit_vector(),
            best: usize::MAX,
            best_dist: f64::INFINITY,
        };
        search.visit(0, self.order.len(), 0);
        search.best
    }

    pub fn reverse_geocode(&self, lat: f64, lon: f64) -> &City {
        &self.cities[self.nearest(LatLon::new(lat, lon))]
    }
}

fn split(order: &mut [u32], points: &[[f64; 3]], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    split(left, points, depth + 1);
    split(&mut right[1..], points, depth + 1);
}

struct Search<'a> {
    index: &'a SpatialIndex,
    query: LatLon,
    query_point: [f64; 3],
    best: usize,
    best_dist: f64,
}

impl Search<'_> {
    fn offer(&mut self, candidate: usize) {
        let city = &self.index.cities[candidate];
        let dist = haversine(
            self.query,
            LatLon::new(city.latitude, city.longitude),
            self.index.earth_radius,
        );
        let better = dist < self.best_dist
            || (dist == self.best_dist
                && city.geonames_id < self.index.cities[self.best].geonames_id);
        if better {
            self.best = candidate;
            self.best_dist = dist;
        }
    }

    fn visit(&mut self, lo: usize, hi: usize, depth: usize) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let node = self.index.order[mid] as usize;
        self.offer(node);
        if hi - lo == 1 {
            return;
        }
        let axis = depth % 3;
        let diff = self.query_point[axis] - self.index.points[node][axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.visit(near.0, near.1, depth + 1);
        // every point across the plane is at least |diff| away in chord length
        let bound = 2.0 * self.index.earth_radius * (diff.abs() / 2.0).min(1.0).asin();
        if bound <= self.best_dist + PRUNE_SLACK_M {
            self.visit(far.0, far.1, depth + 1);
        }
    }
}
