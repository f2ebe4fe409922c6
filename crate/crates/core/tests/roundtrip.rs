use std::collections::BTreeMap;

use oxrdf::Term;
use oxttl::TurtleParser;
use proptest::prelude::*;
use semtrails::emit::{
    anonymize, read_csv, trails_from_rows, write_csv, write_turtle, NS_CHECKIN, NS_GEONAMES,
    NS_SCHEMA, NS_VENUE, NS_VOCAB, NS_WIKIDATA,
};
use semtrails::enrich::{SemanticCheckIn, SemanticTrail};
use semtrails::model::{CityRef, Timestamp, Trail};

const GAP: i64 = 8 * 3600;

fn nasty() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z0-9]{1,24}",
        Just("Saint-Jean, \"le Vieux\"".to_owned()),
        Just("Zürich\nline two".to_owned()),
        Just("İstanbul #1 / 2%".to_owned()),
        Just("東京 \t tab".to_owned()),
        Just("back\\slash 'q' ;.".to_owned()),
        "\\PC{1,12}",
    ]
}

prop_compose! {
    fn stop(minute: i64)(
        venue in nasty(),
        category in nasty(),
        term in prop_oneof![Just("schema:Place".to_owned()), Just("schema:BarOrPub".to_owned()), Just("dbo:Thing".to_owned())],
        geonames in 1u64..10_000_000,
        name in nasty(),
        country in "[A-Z]{2}",
        wikidata in prop::option::of("Q[1-9][0-9]{0,8}"),
        offset in prop::sample::select(vec![-720, -240, 0, 330, 840]),
    ) -> SemanticCheckIn {
        SemanticCheckIn {
            venue_id: venue,
            category_id: category,
            schema_term: term,
            city: CityRef { geonames_id: geonames, name, country_code: country, wikidata_id: wikidata },
            timestamp: Timestamp::from_unix(1_333_238_400 + minute * 60, offset).unwrap(),
        }
    }
}

fn trail() -> impl Strategy<Value = SemanticTrail> {
    (prop::collection::vec(1i64..400, 1..6), "[a-c]")
        .prop_flat_map(|(steps, user)| {
            let mut minute = 0;
            let stops: Vec<_> = std::iter::once(0)
                .chain(steps)
                .map(|s| {
                    minute += s;
                    stop(minute)
                })
                .collect();
            (stops, Just(user))
        })
        .prop_map(|(mut checkins, user_id): (Vec<SemanticCheckIn>, String)| {
            // make neighbours differ
            for i in 1..checkins.len() {
                if checkins[i].venue_id == checkins[i - 1].venue_id {
                    checkins[i].venue_id.push('x');
                }
            }
            SemanticTrail { user_id, checkins }
        })
}

fn percent_decode(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            out.push(u8::from_str_radix(&text[i + 1..i + 3], 16).unwrap());
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).unwrap()
}

/// Rebuilds `(trail, position) -> predicate -> value` from Turtle.
fn turtle_fields(text: &[u8]) -> BTreeMap<(u64, usize), BTreeMap<String, String>> {
    let mut out: BTreeMap<(u64, usize), BTreeMap<String, String>> = BTreeMap::new();
    for triple in TurtleParser::new().for_slice(text) {
        let triple = triple.expect("valid Turtle");
        let subject = triple.subject.to_string();
        let key = subject
            .trim_start_matches('<')
            .trim_end_matches('>')
            .strip_prefix(NS_CHECKIN)
            .expect("subject namespace")
            .to_owned();
        let (t, p) = key.split_once('/').unwrap();
        let predicate = triple
            .predicate
            .as_str()
            .strip_prefix(NS_VOCAB)
            .expect("vocabulary namespace")
            .to_owned();
        let value = match triple.object {
            Term::NamedNode(n) => format!("<{}>", n.as_str()),
            Term::Literal(l) => l.value().to_owned(),
            other => panic!("unexpected object {other}"),
        };
        let fields = out.entry((t.parse().unwrap(), p.parse().unwrap())).or_default();
        assert!(fields.insert(predicate, value).is_none(), "duplicate predicate");
    }
    out
}

fn check_turtle(trails: &[Trail]) {
    let mut buf = Vec::new();
    write_turtle(trails, &mut buf).unwrap();
    let fields = turtle_fields(&buf);
    let expected: usize = trails.iter().map(Trail::len).sum();
    assert_eq!(fields.len(), expected);
    for trail in trails {
        for (i, c) in trail.checkins().iter().enumerate() {
            let f = &fields[&(trail.id(), i + 1)];
            assert_eq!(f.len(), if c.city.wikidata_id.is_some() { 10 } else { 9 });
            assert_eq!(f["trail"], c.trail_id.to_string());
            assert_eq!(f["user"], c.anon_user_id.to_string());
            let venue = f["venue"].trim_matches(|x| x == '<' || x == '>');
            assert_eq!(percent_decode(venue.strip_prefix(NS_VENUE).unwrap()), c.venue_id);
            assert_eq!(f["category"], c.category_id);
            let schema = match c.schema_term.strip_prefix("schema:") {
                Some(local) => format!("<{NS_SCHEMA}{local}>"),
                None => c.schema_term.clone(),
            };
            assert_eq!(f["schemaCategory"], schema);
            assert_eq!(f["geonames"], format!("<{NS_GEONAMES}{}/>", c.city.geonames_id));
            if let Some(q) = &c.city.wikidata_id {
                assert_eq!(f["wikidata"], format!("<{NS_WIKIDATA}{q}>"));
            }
            assert_eq!(f["cityName"], c.city.name);
            assert_eq!(f["country"], c.city.country_code);
            assert_eq!(f["timestamp"], c.timestamp.to_string());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csv_round_trip(trails in prop::collection::vec(trail(), 0..6)) {
        let (trails, _) = anonymize(trails, GAP).unwrap();
        let mut first = Vec::new();
        write_csv(&trails, &mut first).unwrap();
        let rows = read_csv(first.as_slice()).unwrap();
        let back = trails_from_rows(&rows, GAP).unwrap();
        prop_assert_eq!(&back, &trails);
        // offsets survive too, not just instants
        for (a, b) in back.iter().zip(&trails) {
            for (x, y) in a.checkins().iter().zip(b.checkins()) {
                prop_assert!(x.timestamp.identical(&y.timestamp));
            }
        }
        let mut second = Vec::new();
        write_csv(&back, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn turtle_round_trip(trails in prop::collection::vec(trail(), 0..6)) {
        let (trails, _) = anonymize(trails, GAP).unwrap();
        check_turtle(&trails);
    }
}

#[test]
fn user_identifiers_never_reach_the_output() {
    let secret = "user \"7\",\tsecret@example.org";
    let stops = |m: i64| SemanticCheckIn {
        venue_id: format!("v{m}"),
        category_id: "c".into(),
        schema_term: "schema:Place".into(),
        city: CityRef {
            geonames_id: 1,
            name: "X".into(),
            country_code: "US".into(),
            wikidata_id: None,
        },
        timestamp: Timestamp::from_unix(1_333_238_400 + m * 60, 0).unwrap(),
    };
    let input = vec![SemanticTrail {
        user_id: secret.into(),
        checkins: vec![stops(1), stops(2)],
    }];
    let (trails, _) = anonymize(input, GAP).unwrap();
    let mut csv = Vec::new();
    write_csv(&trails, &mut csv).unwrap();
    let mut ttl = Vec::new();
    write_turtle(&trails, &mut ttl).unwrap();
    for out in [csv, ttl] {
        let text = String::from_utf8(out).unwrap();
        assert!(!text.contains("secret"));
        assert!(!text.contains("user \""));
    }
}
