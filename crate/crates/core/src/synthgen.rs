//! Deterministic synthetic corpora with ground truth.
//!
//! # Random numbers
//!
//! Every draw comes from a counter-based SplitMix64 stream, so any language
//! can reproduce a corpus bit for bit:
//!
//! ```text
//! mix(z):  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!          z ^ (z >> 31)                              (wrapping u64 arithmetic)
//! key(seed, stream) = mix(seed ^ mix(stream + 0x9E3779B97F4A7C15))
//! draw n of a stream = mix(key + (n + 1) * 0x9E3779B97F4A7C15)
//! uniform  = (draw >> 11) * 2^-53
//! below(m) = draw % m
//! ```
//!
//! Stream 1 drives the gazetteer, stream 2 the venues, stream 3 the Wikidata
//! candidates and stream `1_000_000 + i` user `i`.
//!
//! # Ground truth
//!
//! `ground_truth.tsv` is computed by a small reference implementation kept
//! in this module, separate from the pipeline code: minute truncation, the
//! repeat/dwell/speed filters as straightforward list edits, then
//! segmentation as an enumeration of maximal runs of short gaps.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{City, Timestamp};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One counter-based random stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix(seed ^ mix(stream.wrapping_add(GOLDEN))),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    fn between(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GenSpec {
    pub seed: u64,
    pub n_users: usize,
    pub n_venues: usize,
    pub n_cities: usize,
    pub n_checkins: usize,
    /// Ordinary gaps are uniform in `[min_gap_secs, max_gap_secs]`.
    pub min_gap_secs: i64,
    pub max_gap_secs: i64,
    /// Probability that an ordinary step is a break of eight hours or more.
    pub split_rate: f64,
    /// Probability of revisiting the current venue.
    pub repeat_rate: f64,
    /// Probability of a check-in less than a minute after the previous one.
    pub dwell_rate: f64,
    /// Probability of a jump to a far city within a few minutes.
    pub speed_rate: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            n_users: 10,
            n_venues: 200,
            n_cities: 20,
            n_checkins: 100,
            min_gap_secs: 600,
            max_gap_secs: 4 * 3600,
            split_rate: 0.1,
            repeat_rate: 0.05,
            dwell_rate: 0.05,
            speed_rate: 0.02,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("`{0}` must be positive")]
    NonPositive(&'static str),
    #[error("rate `{0}` = {1} is outside [0, 1]")]
    RateOutOfRange(&'static str, f64),
    #[error("at least two venues are needed to generate check-ins")]
    TooFewVenues,
    #[error("ordinary gaps must satisfy 60 <= min_gap_secs <= max_gap_secs < 28800")]
    BadGaps,
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        for (name, value) in [
            ("n_users", self.n_users),
            ("n_venues", self.n_venues),
            ("n_cities", self.n_cities),
            ("n_checkins", self.n_checkins),
        ] {
            if value == 0 {
                return Err(GenError::NonPositive(name));
            }
        }
        for (name, rate) in [
            ("split_rate", self.split_rate),
            ("repeat_rate", self.repeat_rate),
            ("dwell_rate", self.dwell_rate),
            ("speed_rate", self.speed_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(GenError::RateOutOfRange(name, rate));
            }
        }
        if self.n_venues < 2 {
            return Err(GenError::TooFewVenues);
        }
        if !(60 <= self.min_gap_secs
            && self.min_gap_secs <= self.max_gap_secs
            && self.max_gap_secs < 8 * 3600)
        {
            return Err(GenError::BadGaps);
        }
        Ok(())
    }
}

/// `(id, name, parent, mapped term)` of the synthetic taxonomy.
const TAXONOMY: &[(&str, &str, Option<&str>, Option<&str>)] = &[
    ("4d4b7105d754a06374d81259", "Food", None, Some("schema:FoodEstablishment")),
    ("4bf58dd8d48988d1c4941735", "Restaurant", Some("4d4b7105d754a06374d81259"), Some("schema:Restaurant")),
    ("4bf58dd8d48988d1e0931735", "Coffee Shop", Some("4d4b7105d754a06374d81259"), Some("schema:CafeOrCoffeeShop")),
    ("4bf58dd8d48988d16d941735", "Café", Some("4d4b7105d754a06374d81259"), None),
    ("4d4b7105d754a06378d81259", "Shop & Service", None, Some("schema:Store")),
    ("4bf58dd8d48988d101951735", "Pet Store", Some("4d4b7105d754a06378d81259"), None),
    ("4bf58dd8d48988d1f6941735", "Department Store", Some("4d4b7105d754a06378d81259"), Some("schema:DepartmentStore")),
    ("4d4b7105d754a06379d81259", "Travel & Transport", None, None),
    ("4bf58dd8d48988d129951735", "Train Station", Some("4d4b7105d754a06379d81259"), Some("schema:TrainStation")),
    ("4bf58dd8d48988d1ed931735", "Airport", Some("4d4b7105d754a06379d81259"), None),
    ("4d4b7104d754a06370d81259", "Arts & Entertainment", None, None),
    ("4bf58dd8d48988d134941735", "Theater", Some("4d4b7104d754a06370d81259"), Some("schema:PerformingArtsTheater")),
    ("4bf58dd8d48988d162941735", "Other Great Outdoors", Some("4d4b7104d754a06370d81259"), Some("schema:Place")),
];

/// Category id that is deliberately absent from the taxonomy.
pub const UNKNOWN_CATEGORY: &str = "ffffffffffffffffffffffff";

const COUNTRIES: &[&str] = &["US", "TR", "JP", "BR", "MY", "KW", "IT", "FR"];
const OFFSETS_MIN: &[i32] = &[-480, -300, -240, 0, 60, 180, 330, 540];
const EPOCH_2012_04_01: i64 = 1_333_238_400;
const GAP_LIMIT: i64 = 8 * 3600;

/// Synthetic GeoNames-like cities. Roughly one in ten falls below the
/// population cut and one in twenty is a fourth-order seat with no population.
pub fn synthetic_cities(seed: u64, n: usize) -> Vec<(City, &'static str)> {
    let mut rng = CounterRng::new(seed, 1);
    (0..n)
        .map(|i| {
            let lat = -60.0 + 130.0 * rng.uniform();
            let lon = -180.0 + 360.0 * rng.uniform();
            let roll = rng.uniform();
            let (population, code) = if i > 0 && roll < 0.10 {
                (100 + rng.below(401), "PPL")
            } else if i > 0 && roll < 0.15 {
                (0, "PPLA4")
            } else {
                let p = 501.0 * (rng.uniform() * (5_000_000.0f64 / 501.0).ln()).exp();
                (p as u64, "PPL")
            };
            let city = City {
                geonames_id: 1_000_001 + i as u64,
                name: format!("Synthville {i}"),
                country_code: COUNTRIES[i % COUNTRIES.len()].to_owned(),
                latitude: round6(lat),
                longitude: round6(lon),
                population: Some(population),
                wikidata_id: None,
            };
            (city, code)
        })
        .collect()
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn retained(population: Option<u64>, code: &str) -> bool {
    code == "PPLA4" || population.is_some_and(|p| p > 500)
}

/// Renders cities as a 19-field GeoNames dump.
pub fn gazetteer_text(cities: &[(City, &str)]) -> String {
    let mut out = String::new();
    for (c, code) in cities {
        let _ = writeln!(
            out,
            "{id}\t{name}\t{name}\t\t{lat}\t{lon}\tP\t{code}\t{cc}\t\t\t\t\t\t{pop}\t\t0\tEtc/UTC\t2020-01-01",
            id = c.geonames_id,
            name = c.name,
            lat = c.latitude,
            lon = c.longitude,
            cc = c.country_code,
            pop = c.population.unwrap_or(0),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
struct SynthVenue {
    id: String,
    lat: f64,
    lon: f64,
}

/// Files making up a generated corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCorpus {
    pub checkins: String,
    pub venues: String,
    pub gazetteer: String,
    pub mapping: String,
    pub taxonomy: String,
    pub wikidata: String,
    pub ground_truth: String,
    pub anomalies: String,
}

impl GeneratedCorpus {
    /// File name and content of every part.
    pub fn files(&self) -> [(&'static str, &str); 8] {
        [
            ("checkins.tsv", &self.checkins),
            ("venues.csv", &self.venues),
            ("cities.txt", &self.gazetteer),
            ("mapping.csv", &self.mapping),
            ("taxonomy.csv", &self.taxonomy),
            ("wikidata.csv", &self.wikidata),
            ("ground_truth.tsv", &self.ground_truth),
            ("anomalies.tsv", &self.anomalies),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Injected {
    Repeat,
    Dwell,
    Speed,
}

impl Injected {
    fn label(self) -> &'static str {
        match self {
            Self::Repeat => "repeat",
            Self::Dwell => "dwell",
            Self::Speed => "speed",
        }
    }
}

struct Event {
    unix: i64,
    user: usize,
    step: usize,
    venue: usize,
    offset_min: i32,
    injected: Option<Injected>,
}

pub fn generate(spec: &GenSpec) -> Result<GeneratedCorpus, GenError> {
    spec.validate()?;

    let cities = synthetic_cities(spec.seed, spec.n_cities);
    let active: Vec<&City> = cities
        .iter()
        .filter(|(c, code)| retained(c.population, code))
        .map(|(c, _)| c)
        .take((spec.n_venues / 4).max(1))
        .collect();

    // venues
    let mut rng = CounterRng::new(spec.seed, 2);
    let leaves: Vec<&str> = TAXONOMY
        .iter()
        .filter(|t| t.2.is_some())
        .map(|t| t.0)
        .collect();
    let mut venues = Vec::with_capacity(spec.n_venues);
    let mut venues_text = String::new();
    let mut by_city: Vec<Vec<usize>> = vec![Vec::new(); active.len()];
    for j in 0..spec.n_venues {
        let home = j % active.len();
        let city = active[home];
        let lat = round6((city.latitude + 0.1 * (rng.uniform() - 0.5)).clamp(-90.0, 90.0));
        let lon = round6((city.longitude + 0.1 * (rng.uniform() - 0.5)).clamp(-180.0, 180.0));
        let id = format!("{:08x}{:016x}", j, rng.next_u64());
        let category = if rng.uniform() < 0.005 {
            UNKNOWN_CATEGORY
        } else {
            leaves[rng.below(leaves.len() as u64) as usize]
        };
        let _ = writeln!(venues_text, "{id},{lat},{lon},{category}");
        by_city[home].push(j);
        venues.push(SynthVenue { id, lat, lon });
    }

    // users
    let mut events = Vec::with_capacity(spec.n_checkins);
    let per_user = spec.n_checkins / spec.n_users;
    let extra = spec.n_checkins % spec.n_users;
    for user in 0..spec.n_users {
        let mut rng = CounterRng::new(spec.seed, 1_000_000 + user as u64);
        let count = per_user + usize::from(user < extra);
        if count == 0 {
            continue;
        }
        let home = user % active.len();
        let local = &by_city[home];
        let offset_min = OFFSETS_MIN[rng.below(OFFSETS_MIN.len() as u64) as usize];
        let mut unix = EPOCH_2012_04_01 + rng.below(30 * 86_400) as i64;
        let mut venue = pick_other(&mut rng, local, usize::MAX, spec.n_venues);
        events.push(Event {
            unix,
            user,
            step: 0,
            venue,
            offset_min,
            injected: None,
        });
        for step in 1..count {
            let (next, gap, injected) = if rng.uniform() < spec.repeat_rate {
                (venue, ordinary_gap(&mut rng, spec), Some(Injected::Repeat))
            } else if rng.uniform() < spec.dwell_rate {
                let v = pick_other(&mut rng, local, venue, spec.n_venues);
                (v, rng.between(0, 59), Some(Injected::Dwell))
            } else if rng.uniform() < spec.speed_rate {
                let v = if active.len() > 1 {
                    let mut far = rng.below(active.len() as u64 - 1) as usize;
                    if far >= home {
                        far += 1;
                    }
                    pick_other(&mut rng, &by_city[far], venue, spec.n_venues)
                } else {
                    pick_other(&mut rng, local, venue, spec.n_venues)
                };
                (v, rng.between(60, 600), Some(Injected::Speed))
            } else {
                let v = pick_other(&mut rng, local, venue, spec.n_venues);
                let gap = if rng.uniform() < spec.split_rate {
                    match rng.below(4) {
                        0 => GAP_LIMIT,
                        1 => GAP_LIMIT - rng.between(1, 59),
                        _ => rng.between(GAP_LIMIT, 72 * 3600),
                    }
                } else {
                    ordinary_gap(&mut rng, spec)
                };
                (v, gap, None)
            };
            venue = next;
            unix += gap;
            events.push(Event {
                unix,
                user,
                step,
                venue,
                offset_min,
                injected,
            });
        }
    }
    events.sort_by_key(|e| (e.unix, e.user, e.step));

    let mut checkins = String::new();
    let mut anomalies = String::from("line\tuser_id\tvenue_id\tinjected\n");
    for (line, e) in (1..).zip(&events) {
        let ts = Timestamp::from_unix(e.unix, e.offset_min).expect("synthetic offsets are valid");
        let _ = writeln!(checkins, "{}\t{}\t{ts}", user_name(e.user), venues[e.venue].id);
        if let Some(kind) = e.injected {
            let _ = writeln!(
                anomalies,
                "{line}\t{}\t{}\t{}",
                user_name(e.user),
                venues[e.venue].id,
                kind.label()
            );
        }
    }

    let mut mapping = String::from("category_id,term\n");
    let mut taxonomy = String::from("category_id,name,parent_id\n");
    for (id, name, parent, term) in TAXONOMY {
        let name = if name.contains(',') || name.contains('"') {
            format!("\"{}\"", name.replace('"', "\"\""))
        } else {
            (*name).to_owned()
        };
        let _ = writeln!(taxonomy, "{id},{name},{}", parent.unwrap_or(""));
        if let Some(term) = term {
            let _ = writeln!(mapping, "{id},{term}");
        }
    }

    let mut rng = CounterRng::new(spec.seed, 3);
    let mut wikidata = String::from("name,latitude,longitude,qid\n");
    for (c, _) in &cities {
        let roll = rng.uniform();
        let (dlat, dlon) = (0.02 * (rng.uniform() - 0.5), 0.02 * (rng.uniform() - 0.5));
        if roll < 0.8 {
            let _ = writeln!(
                wikidata,
                "{},{},{},Q{}",
                c.name,
                round6((c.latitude + dlat).clamp(-90.0, 90.0)),
                round6((c.longitude + dlon).clamp(-180.0, 180.0)),
                c.geonames_id + 5_000_000
            );
        }
        if roll > 0.9 {
            // namesake far away
            let _ = writeln!(
                wikidata,
                "{},{},{},Q{}",
                c.name,
                round6((c.latitude + 1.0).clamp(-90.0, 90.0)),
                c.longitude,
                c.geonames_id + 9_000_000
            );
        }
    }

    let ground_truth = reference_trails(&events, &venues);

    Ok(GeneratedCorpus {
        checkins,
        venues: venues_text,
        gazetteer: gazetteer_text(&cities),
        mapping,
        taxonomy,
        wikidata,
        ground_truth,
        anomalies,
    })
}

fn user_name(user: usize) -> String {
    format!("usr-{user:06}")
}

fn ordinary_gap(rng: &mut CounterRng, spec: &GenSpec) -> i64 {
    rng.between(spec.min_gap_secs, spec.max_gap_secs)
}

/// A venue from `pool` other than `current`, or any other venue when the
/// pool has nothing else to offer.
fn pick_other(rng: &mut CounterRng, pool: &[usize], current: usize, n_venues: usize) -> usize {
    let candidates = pool.iter().filter(|&&v| v != current).count();
    if candidates > 0 {
        let k = rng.below(candidates as u64) as usize;
        return *pool.iter().filter(|&&v| v != current).nth(k).expect("k < candidates");
    }
    let mut v = rng.below(n_venues as u64 - 1) as usize;
    if v >= current {
        v += 1;
    }
    v
}

// ---- reference implementation -------------------------------------------

fn reference_distance(a: &SynthVenue, b: &SynthVenue) -> f64 {
    const R: f64 = 6_371_000.0;
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().min(1.0).asin()
}

#[derive(Clone, Copy)]
struct Stop {
    venue: usize,
    minute: i64,
}

fn reference_user(mut stops: Vec<Stop>, venues: &[SynthVenue]) -> Vec<Vec<Stop>> {
    let dedupe = |stops: &mut Vec<Stop>| {
        let mut i = 0;
        while i + 1 < stops.len() {
            if stops[i].venue == stops[i + 1].venue {
                stops.remove(i);
            } else {
                i += 1;
            }
        }
    };
    dedupe(&mut stops);

    let mut i = 1;
    while i < stops.len() {
        if stops[i].minute - stops[i - 1].minute < 1 {
            stops.remove(i - 1);
            i = i.max(2) - 1;
        } else {
            i += 1;
        }
    }

    let mut kept: Vec<Stop> = Vec::new();
    for stop in stops {
        if let Some(last) = kept.last() {
            let secs = (stop.minute - last.minute) * 60;
            let meters = reference_distance(&venues[last.venue], &venues[stop.venue]);
            let too_fast = if meters == 0.0 {
                false
            } else {
                secs <= 0 || meters / secs as f64 > 343.0
            };
            if too_fast {
                continue;
            }
        }
        kept.push(stop);
    }
    dedupe(&mut kept);

    // maximal runs of consecutive gaps shorter than the limit
    let mut runs = Vec::new();
    let mut start = 0;
    while start < kept.len() {
        let mut end = start + 1;
        while end < kept.len() && (kept[end].minute - kept[end - 1].minute) * 60 < GAP_LIMIT {
            end += 1;
        }
        if end - start >= 2 {
            runs.push(kept[start..end].to_vec());
        }
        start = end;
    }
    runs
}

fn reference_trails(events: &[Event], venues: &[SynthVenue]) -> String {
    let mut order = Vec::new();
    let mut per_user: HashMap<usize, Vec<Stop>> = HashMap::new();
    for e in events {
        let list = per_user.entry(e.user).or_insert_with(|| {
            order.push(e.user);
            Vec::new()
        });
        list.push(Stop {
            venue: e.venue,
            minute: e.unix.div_euclid(60),
        });
    }
    let mut out = String::from("trail_id\tuser_id\tvenue_ids\tminutes\n");
    let mut trail_id = 0;
    for user in order {
        let stops = per_user.remove(&user).unwrap_or_default();
        for run in reference_user(stops, venues) {
            trail_id += 1;
            let ids: Vec<&str> = run.iter().map(|s| venues[s.venue].id.as_str()).collect();
            let minutes: Vec<String> = run.iter().map(|s| s.minute.to_string()).collect();
            let _ = writeln!(
                out,
                "{trail_id}\t{}\t{}\t{}",
                user_name(user),
                ids.join(","),
                minutes.join(",")
            );
        }
    }
    out
}

/// One line of `ground_truth.tsv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthTrail {
    pub trail_id: u64,
    pub user_id: String,
    pub venue_ids: Vec<String>,
    /// Unix time of each check-in divided by 60.
    pub minutes: Vec<i64>,
}

pub fn parse_ground_truth(text: &str) -> Vec<TruthTrail> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split('\t').collect();
            TruthTrail {
                trail_id: f[0].parse().expect("trail id"),
                user_id: f[1].to_owned(),
                venue_ids: f[2].split(',').map(str::to_owned).collect(),
                minutes: f[3].split(',').map(|m| m.parse().expect("minute")).collect(),
            }
        })
        .collect()
}
