use std::collections::HashMap;

use semtrails::ingest::{CheckinFormat, Delimiter};
use semtrails::model::PipelineConfig;
use semtrails::pipeline::{run, Inputs, Output};
use semtrails::synthgen::{generate, parse_ground_truth, GenSpec, GeneratedCorpus};

fn build(corpus: &GeneratedCorpus) -> Output {
    let inputs = Inputs::from_texts(
        &corpus.checkins,
        CheckinFormat::default(),
        &corpus.venues,
        Delimiter::Comma,
        &corpus.gazetteer,
        &corpus.mapping,
        &corpus.taxonomy,
        &corpus.wikidata,
    )
    .expect("generated inputs parse");
    assert!(inputs.checkins.errors.is_empty());
    run(inputs, &PipelineConfig::default()).expect("pipeline runs")
}

fn assert_matches_truth(corpus: &GeneratedCorpus) {
    let out = build(corpus);
    let truth = parse_ground_truth(&corpus.ground_truth);
    assert_eq!(out.trails.len(), truth.len());
    let mut users: HashMap<&str, u64> = HashMap::new();
    for (trail, expected) in out.trails.iter().zip(&truth) {
        assert_eq!(trail.id(), expected.trail_id);
        let next = users.len() as u64 + 1;
        assert_eq!(*users.entry(&expected.user_id).or_insert(next), trail.user());
        let venues: Vec<&str> = trail.checkins().iter().map(|c| c.venue_id.as_str()).collect();
        assert_eq!(venues, expected.venue_ids, "trail {}", trail.id());
        let minutes: Vec<i64> = trail
            .checkins()
            .iter()
            .map(|c| c.timestamp.unix_seconds() / 60)
            .collect();
        assert_eq!(minutes, expected.minutes, "trail {}", trail.id());
    }
}

#[test]
fn pipeline_reproduces_ground_truth_across_seeds() {
    for seed in 0..40 {
        let spec = GenSpec {
            seed,
            n_users: 1 + (seed as usize % 7),
            n_checkins: 50 + 37 * seed as usize,
            n_cities: 5 + seed as usize,
            n_venues: 2 + 13 * seed as usize,
            repeat_rate: 0.15,
            dwell_rate: 0.15,
            speed_rate: 0.1,
            split_rate: 0.2,
            ..GenSpec::default()
        };
        assert_matches_truth(&generate(&spec).unwrap());
    }
}

#[test]
fn anomaly_heavy_corpora() {
    for (repeat, dwell, speed) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.5, 0.5, 0.5)] {
        let spec = GenSpec {
            seed: 9,
            n_users: 4,
            n_checkins: 400,
            repeat_rate: repeat,
            dwell_rate: dwell,
            speed_rate: speed,
            ..GenSpec::default()
        };
        assert_matches_truth(&generate(&spec).unwrap());
    }
}

#[test]
fn clean_corpus_keeps_every_checkin() {
    let spec = GenSpec {
        n_users: 5,
        n_checkins: 500,
        split_rate: 0.0,
        repeat_rate: 0.0,
        dwell_rate: 0.0,
        speed_rate: 0.0,
        ..GenSpec::default()
    };
    let out = build(&generate(&spec).unwrap());
    assert_eq!(out.trails.len(), 5);
    assert_eq!(out.emitted_checkins(), 500);
    assert_eq!(out.report.removed_total, 0);
}
