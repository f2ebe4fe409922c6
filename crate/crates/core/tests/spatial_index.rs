use semtrails::enrich::{haversine, LatLon, SpatialIndex};
use semtrails::model::City;
use semtrails::synthgen::{synthetic_cities, CounterRng};

const R: f64 = 6_371_000.0;

fn linear_nearest(cities: &[City], q: LatLon) -> u64 {
    let mut best = (f64::INFINITY, u64::MAX);
    for c in cities {
        let d = haversine(q, LatLon::new(c.latitude, c.longitude), R);
        if d < best.0 || (d == best.0 && c.geonames_id < best.1) {
            best = (d, c.geonames_id);
        }
    }
    best.1
}

fn queries(seed: u64, n: usize, cities: &[City]) -> Vec<LatLon> {
    let mut rng = CounterRng::new(seed, 77);
    (0..n)
        .map(|i| match i % 4 {
            // exactly on a city, right next to one, anywhere, near the poles or the antimeridian
            0 => {
                let c = &cities[rng.below(cities.len() as u64) as usize];
                LatLon::new(c.latitude, c.longitude)
            }
            1 => {
                let c = &cities[rng.below(cities.len() as u64) as usize];
                LatLon::new(
                    (c.latitude + 1e-4 * (rng.uniform() - 0.5)).clamp(-90.0, 90.0),
                    (c.longitude + 1e-4 * (rng.uniform() - 0.5)).clamp(-180.0, 180.0),
                )
            }
            2 => LatLon::new(-90.0 + 180.0 * rng.uniform(), -180.0 + 360.0 * rng.uniform()),
            _ => LatLon::new(
                if rng.uniform() < 0.5 { 89.0 + rng.uniform() } else { -90.0 + rng.uniform() },
                if rng.uniform() < 0.5 { 180.0 } else { -179.9 - 0.1 * rng.uniform() },
            ),
        })
        .collect()
}

#[test]
fn index_agrees_with_linear_scan() {
    let cities: Vec<City> = synthetic_cities(5, 20_000).into_iter().map(|(c, _)| c).collect();
    let index = SpatialIndex::build(cities.clone(), R).unwrap();
    for q in queries(5, 500, &cities) {
        let got = index.reverse_geocode(q.lat, q.lon).geonames_id;
        assert_eq!(got, linear_nearest(&cities, q), "query {q:?}");
    }
}

#[test]
fn ties_on_a_grid_resolve_to_the_smallest_id() {
    // cities on a regular grid, ids scrambled, queries at cell centres
    let mut cities = Vec::new();
    let mut id = 1_000u64;
    for i in 0..40 {
        for j in 0..40 {
            id = (id * 7919) % 1_000_003;
            cities.push(City {
                geonames_id: id,
                name: format!("g{i}-{j}"),
                country_code: "XX".into(),
                latitude: -40.0 + 2.0 * i as f64,
                longitude: -40.0 + 2.0 * j as f64,
                population: Some(1000),
                wikidata_id: None,
            });
        }
    }
    let index = SpatialIndex::build(cities.clone(), R).unwrap();
    for i in 0..39 {
        for j in 0..39 {
            let q = LatLon::new(-39.0 + 2.0 * i as f64, -39.0 + 2.0 * j as f64);
            assert_eq!(index.reverse_geocode(q.lat, q.lon).geonames_id, linear_nearest(&cities, q));
            let q = LatLon::new(-40.0 + 2.0 * i as f64, -39.0 + 2.0 * j as f64);
            assert_eq!(index.reverse_geocode(q.lat, q.lon).geonames_id, linear_nearest(&cities, q));
        }
    }
}
