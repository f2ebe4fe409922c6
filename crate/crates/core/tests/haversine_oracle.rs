//! Haversine against 50-digit reference distances (`data/gen_haversine_oracle.py`).

use semtrails::enrich::{haversine, LatLon};

const R: f64 = 6_371_000.0;

fn oracle() -> Vec<(LatLon, LatLon, f64)> {
    include_str!("data/haversine_oracle.csv")
        .lines()
        .skip(1)
        .map(|line| {
            let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            (LatLon::new(f[0], f[1]), LatLon::new(f[2], f[3]), f[4])
        })
        .collect()
}

#[test]
fn relative_error_within_1e9() {
    let pairs = oracle();
    assert_eq!(pairs.len(), 10_000);
    let mut worst = 0.0f64;
    for (a, b, expected) in pairs {
        let got = haversine(a, b, R);
        // coincident points (the same pole under two longitudes) have no relative error
        let err = if expected < 1e-6 { got } else { (got - expected).abs() / expected };
        assert!(err <= 1e-9, "{a:?} {b:?}: got {got}, expected {expected}");
        worst = worst.max(err);
    }
    eprintln!("worst relative error {worst:e}");
}

#[test]
fn symmetric_on_the_oracle_pairs() {
    for (a, b, _) in oracle() {
        assert_eq!(haversine(a, b, R), haversine(b, a, R));
    }
}
