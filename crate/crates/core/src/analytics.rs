//! Descriptive statistics over published trails, rendered as plain CSV
//! tables ready for any plotting tool.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::model::{EnrichedCheckIn, Trail};

/// Counts per bucket. The sum of the buckets always equals `total`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Histogram {
    buckets: BTreeMap<u64, u64>,
    total: u64,
}

impl Histogram {
    pub fn add(&mut self, key: u64) {
        *self.buckets.entry(key).or_default() += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, key: u64) -> u64 {
        self.buckets.get(&key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.buckets.iter().map(|(k, v)| (*k, *v))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Buckets with `key < limit`.
    pub fn truncated(&self, limit: u64) -> Histogram {
        let mut view = Histogram::default();
        for (k, v) in self.buckets.range(..limit) {
            view.buckets.insert(*k, *v);
            view.total += v;
        }
        view
    }
}

impl FromIterator<u64> for Histogram {
    fn from_iter<I: IntoIterator<Item = u64>>(iter: I) -> Self {
        let mut h = Histogram::default();
        for key in iter {
            h.add(key);
        }
        h
    }
}

/// Trails shorter than this are shown in the length plot.
pub const LENGTH_PLOT_LIMIT: u64 = 10;
/// Trails lasting less than this many seconds are shown in the duration plot.
pub const DURATION_PLOT_LIMIT_SECS: u64 = 24 * 3600;
/// Cities with fewer check-ins than this are shown in the city plot.
pub const CITY_PLOT_LIMIT: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub histogram: Histogram,
}

impl LengthStats {
    pub fn plotted(&self) -> Histogram {
        self.histogram.truncated(LENGTH_PLOT_LIMIT)
    }
}

pub fn trail_length_stats(trails: &[Trail]) -> LengthStats {
    let histogram: Histogram = trails.iter().map(|t| t.len() as u64).collect();
    if trails.is_empty() {
        return LengthStats {
            mean: 0.0,
            stddev: 0.0,
            histogram,
        };
    }
    // Integer sums keep the result independent of trail order.
    let n = trails.len() as u128;
    let sum: u128 = trails.iter().map(|t| t.len() as u128).sum();
    let squares: u128 = trails.iter().map(|t| (t.len() as u128).pow(2)).sum();
    let mean = sum as f64 / n as f64;
    let variance = (n * squares - sum * sum) as f64 / (n * n) as f64;
    LengthStats {
        mean,
        stddev: variance.sqrt(),
        histogram,
    }
}

/// Power-of-two bucket of a duration: `k` covers `[2^k, 2^(k+1))` seconds.
/// Zero-length durations cannot occur on a valid trail.
pub fn duration_bucket(secs: u64) -> u64 {
    u64::from(63 - secs.max(1).leading_zeros())
}

/// Lower and upper bound, in seconds, of a duration bucket.
pub fn duration_bucket_bounds(bucket: u64) -> (u64, u64) {
    (1 << bucket, 1 << (bucket + 1))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DurationStats {
    /// Every trail, by power-of-two bucket.
    pub histogram: Histogram,
    /// Trails lasting less than a day only.
    pub plotted: Histogram,
}

pub fn duration_histogram(trails: &[Trail]) -> DurationStats {
    let mut out = DurationStats::default();
    for trail in trails {
        let secs = trail.duration_secs().max(0) as u64;
        let bucket = duration_bucket(secs);
        out.histogram.add(bucket);
        if secs < DURATION_PLOT_LIMIT_SECS {
            out.plotted.add(bucket);
        }
    }
    out
}

/// Histogram of cities keyed by how many check-ins each received.
pub fn city_checkin_distribution<'a>(
    checkins: impl IntoIterator<Item = &'a EnrichedCheckIn>,
) -> Histogram {
    let mut per_city: HashMap<u64, u64> = HashMap::new();
    for c in checkins {
        *per_city.entry(c.city.geonames_id).or_default() += 1;
    }
    per_city.into_values().collect()
}

fn ranked(counts: HashMap<String, u64>, n: usize) -> Vec<(String, u64)> {
    let mut list: Vec<(String, u64)> = counts.into_iter().collect();
    list.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    list.truncate(n);
    list
}

/// Countries by check-in count, descending, ties by country code.
pub fn top_countries<'a>(
    checkins: impl IntoIterator<Item = &'a EnrichedCheckIn>,
    n: usize,
) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for c in checkins {
        *counts.entry(c.city.country_code.clone()).or_default() += 1;
    }
    ranked(counts, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizeClass {
    Small,
    Big,
}

impl SizeClass {
    pub fn label(self) -> &'static str {
        match self {
            Self::Small => "small",
            Self::Big => "big",
        }
    }
}

/// Population per GeoNames id, used to split cities by size.
#[derive(Debug, Clone, Default)]
pub struct Populations {
    by_city: HashMap<u64, u64>,
    threshold: u64,
}

impl Populations {
    pub fn new(by_city: HashMap<u64, u64>, threshold: u64) -> Self {
        Self { by_city, threshold }
    }

    /// Big means strictly more than the threshold; unknown cities are small.
    pub fn class_of(&self, geonames_id: u64) -> SizeClass {
        match self.by_city.get(&geonames_id) {
            Some(&p) if p > self.threshold => SizeClass::Big,
            _ => SizeClass::Small,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CategoryScope<'a> {
    All,
    Country(&'a str),
    Size(SizeClass),
}

/// Terms by check-in count within a scope, descending, ties by term.
pub fn top_categories<'a>(
    checkins: impl IntoIterator<Item = &'a EnrichedCheckIn>,
    n: usize,
    scope: CategoryScope<'_>,
    populations: &Populations,
) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for c in checkins {
        let keep = match scope {
            CategoryScope::All => true,
            CategoryScope::Country(code) => c.city.country_code == code,
            CategoryScope::Size(class) => populations.class_of(c.city.geonames_id) == class,
        };
        if keep {
            *counts.entry(c.schema_term.clone()).or_default() += 1;
        }
    }
    ranked(counts, n)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub trails: u64,
    pub checkins: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SizeSplit {
    pub small: ClassCounts,
    pub big: ClassCounts,
}

/// Check-ins count in their own city's class; a trail counts once in every
/// class it touches.
pub fn size_split_counts(trails: &[Trail], populations: &Populations) -> SizeSplit {
    let mut out = SizeSplit::default();
    for trail in trails {
        let mut touched = (false, false);
        for c in trail.checkins() {
            match populations.class_of(c.city.geonames_id) {
                SizeClass::Small => {
                    out.small.checkins += 1;
                    touched.0 = true;
                }
                SizeClass::Big => {
                    out.big.checkins += 1;
                    touched.1 = true;
                }
            }
        }
        out.small.trails += u64::from(touched.0);
        out.big.trails += u64::from(touched.1);
    }
    out
}

/// A rendered report: written to `stats_<name>.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub name: &'static str,
    pub body: String,
}

impl Report {
    pub fn file_name(&self) -> String {
        format!("stats_{}.csv", self.name)
    }
}

/// Renders every report over a set of trails.
pub fn build_reports(trails: &[Trail], populations: &Populations, top: usize) -> Vec<Report> {
    let checkins = || trails.iter().flat_map(|t| t.checkins().iter());
    let mut reports = Vec::new();

    let lengths = trail_length_stats(trails);
    let users: HashSet<u64> = trails.iter().map(Trail::user).collect();
    let venues: HashSet<&str> = checkins().map(|c| c.venue_id.as_str()).collect();
    let cities: HashSet<u64> = checkins().map(|c| c.city.geonames_id).collect();
    let countries: HashSet<&str> = checkins().map(|c| c.city.country_code.as_str()).collect();
    let mut body = String::from("metric,value\n");
    let _ = writeln!(body, "trails,{}", trails.len());
    let _ = writeln!(body, "checkins,{}", checkins().count());
    let _ = writeln!(body, "users,{}", users.len());
    let _ = writeln!(body, "venues,{}", venues.len());
    let _ = writeln!(body, "cities,{}", cities.len());
    let _ = writeln!(body, "countries,{}", countries.len());
    let _ = writeln!(body, "mean_trail_length,{}", lengths.mean);
    let _ = writeln!(body, "stddev_trail_length_population,{}", lengths.stddev);
    reports.push(Report {
        name: "summary",
        body,
    });

    let mut body = String::from("length,trails,in_plot\n");
    for (length, count) in lengths.histogram.iter() {
        let _ = writeln!(body, "{length},{count},{}", length < LENGTH_PLOT_LIMIT);
    }
    reports.push(Report {
        name: "trail_length",
        body,
    });

    let durations = duration_histogram(trails);
    let mut body = String::from("bucket,lower_secs,upper_secs,trails,plotted_trails\n");
    for (bucket, count) in durations.histogram.iter() {
        let (lo, hi) = duration_bucket_bounds(bucket);
        let _ = writeln!(body, "{bucket},{lo},{hi},{count},{}", durations.plotted.get(bucket));
    }
    reports.push(Report {
        name: "trail_duration",
        body,
    });

    let per_city = city_checkin_distribution(checkins());
    let mut body = String::from("checkins,cities,in_plot\n");
    for (n, cities) in per_city.iter() {
        let _ = writeln!(body, "{n},{cities},{}", n < CITY_PLOT_LIMIT);
    }
    reports.push(Report {
        name: "city_checkins",
        body,
    });

    let ranked_countries = top_countries(checkins(), top);
    let mut body = String::from("rank,country,checkins\n");
    for (rank, (country, count)) in ranked_countries.iter().enumerate() {
        let _ = writeln!(body, "{},{country},{count}", rank + 1);
    }
    reports.push(Report {
        name: "top_countries",
        body,
    });

    let mut body = String::from("scope,rank,term,checkins\n");
    let mut scopes = vec![("all".to_owned(), CategoryScope::All)];
    scopes.extend(
        ranked_countries
            .iter()
            .map(|(code, _)| (format!("country:{code}"), CategoryScope::Country(code))),
    );
    scopes.push(("size:small".into(), CategoryScope::Size(SizeClass::Small)));
    scopes.push(("size:big".into(), CategoryScope::Size(SizeClass::Big)));
    for (label, scope) in scopes {
        for (rank, (term, count)) in top_categories(checkins(), top, scope, populations)
            .iter()
            .enumerate()
        {
            let _ = writeln!(body, "{label},{},{term},{count}", rank + 1);
        }
    }
    reports.push(Report {
        name: "top_categories",
        body,
    });

    let split = size_split_counts(trails, populations);
    let mut body = String::from("class,trails,checkins\n");
    let _ = writeln!(body, "small,{},{}", split.small.trails, split.small.checkins);
    let _ = writeln!(body, "big,{},{}", split.big.trails, split.big.checkins);
    reports.push(Report {
        name: "size_split",
        body,
    });

    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CityRef, Timestamp};

    fn row(trail: u64, pos: i64, geonames: u64, country: &str, term: &str) -> EnrichedCheckIn {
        EnrichedCheckIn {
            trail_id: trail,
            anon_user_id: 1,
            venue_id: format!("v{pos}"),
            category_id: "k".into(),
            schema_term: term.into(),
            city: CityRef {
                geonames_id: geonames,
                name: format!("c{geonames}"),
                country_code: country.into(),
                wikidata_id: None,
            },
            timestamp: Timestamp::from_unix(1_333_000_020 + pos * 600, 0).unwrap(),
        }
    }

    fn trail_of(id: u64, len: i64) -> Trail {
        Trail::new((0..len).map(|p| row(id, p, 1, "US", "schema:Place")).collect(), 8 * 3600)
            .unwrap()
    }

    #[test]
    fn length_stats_examples() {
        let stats = trail_length_stats(&[trail_of(1, 2), trail_of(2, 3), trail_of(3, 4)]);
        assert_eq!(stats.mean, 3.0);
        assert!((stats.stddev - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let flat = trail_length_stats(&[trail_of(1, 2), trail_of(2, 2)]);
        assert_eq!((flat.mean, flat.stddev), (2.0, 0.0));
        assert_eq!(flat.histogram.get(2), 2);
        let empty = trail_length_stats(&[]);
        assert_eq!((empty.mean, empty.stddev), (0.0, 0.0));
        assert!(empty.histogram.is_empty());
    }

    #[test]
    fn length_plot_view_drops_long_trails() {
        let stats = trail_length_stats(&[trail_of(1, 2), trail_of(2, 12)]);
        let plotted = stats.plotted();
        assert_eq!(plotted.total(), 1);
        assert_eq!(stats.histogram.total(), 2);
    }

    #[test]
    fn duration_buckets() {
        let t = Trail::new(
            vec![row(1, 0, 1, "US", "x"), {
                let mut r = row(1, 1, 1, "US", "x");
                r.timestamp = Timestamp::from_unix(1_333_000_020 + 3600, 0).unwrap();
                r
            }],
            8 * 3600,
        )
        .unwrap();
        assert_eq!(t.duration_secs(), 3600);
        let d = duration_histogram(&[t]);
        assert_eq!(d.histogram.get(duration_bucket(3600)), 1);
        assert_eq!(duration_bucket_bounds(duration_bucket(3600)), (2048, 4096));
        assert_eq!(duration_bucket(1), 0);
        assert_eq!(duration_bucket(2), 1);
        assert_eq!(duration_bucket(86_399), 16);
        assert!(duration_histogram(&[]).histogram.is_empty());
    }

    #[test]
    fn city_distribution() {
        let rows = [
            row(1, 0, 10, "US", "x"),
            row(1, 1, 10, "US", "x"),
            row(1, 2, 10, "US", "x"),
            row(2, 0, 20, "US", "x"),
        ];
        let h = city_checkin_distribution(&rows);
        assert_eq!((h.get(3), h.get(1), h.total()), (1, 1, 2));
        let single = city_checkin_distribution(&rows[..3]);
        assert_eq!(single.iter().collect::<Vec<_>>(), vec![(3, 1)]);
        assert!(city_checkin_distribution(&[]).is_empty());
    }

    #[test]
    fn country_ranking() {
        let rows: Vec<_> = ["TR", "US", "TR", "US", "TR"]
            .iter()
            .enumerate()
            .map(|(i, c)| row(1, i as i64, 1, c, "x"))
            .collect();
        assert_eq!(
            top_countries(&rows, 5),
            vec![("TR".to_owned(), 3), ("US".to_owned(), 2)]
        );
        assert_eq!(top_countries(&rows, 1).len(), 1);
        let tied = [row(1, 0, 1, "US", "x"), row(1, 1, 1, "AR", "x")];
        assert_eq!(top_countries(&tied, 5)[0].0, "AR");
    }

    #[test]
    fn category_ranking_by_scope() {
        let rows = [
            row(1, 0, 1, "JP", "schema:Restaurant"),
            row(1, 1, 1, "JP", "schema:Store"),
            row(1, 2, 2, "JP", "schema:Restaurant"),
            row(1, 3, 2, "TR", "schema:CafeOrCoffeeShop"),
        ];
        let pops = Populations::new(HashMap::from([(1, 100_000), (2, 100_001)]), 100_000);
        assert_eq!(
            top_categories(&rows[..3], 5, CategoryScope::Country("JP"), &pops),
            vec![("schema:Restaurant".to_owned(), 2), ("schema:Store".to_owned(), 1)]
        );
        assert!(top_categories(&rows, 5, CategoryScope::Country("ZZ"), &pops).is_empty());
        // exactly 100 000 inhabitants is small
        assert_eq!(pops.class_of(1), SizeClass::Small);
        assert_eq!(pops.class_of(2), SizeClass::Big);
        assert_eq!(pops.class_of(3), SizeClass::Small);
        let big = top_categories(&rows, 5, CategoryScope::Size(SizeClass::Big), &pops);
        assert_eq!(big.iter().map(|x| x.1).sum::<u64>(), 2);
    }

    #[test]
    fn size_split_attribution() {
        let pops = Populations::new(HashMap::from([(2, 1_000_000)]), 100_000);
        let big_trail = Trail::new(
            (0..3).map(|p| row(1, p, 2, "US", "x")).collect(),
            8 * 3600,
        )
        .unwrap();
        let split = size_split_counts(std::slice::from_ref(&big_trail), &pops);
        assert_eq!(split.small, ClassCounts::default());
        assert_eq!(split.big, ClassCounts { trails: 1, checkins: 3 });

        let mixed = Trail::new(vec![row(2, 0, 1, "US", "x"), row(2, 1, 2, "US", "x")], 8 * 3600)
            .unwrap();
        let split = size_split_counts(&[mixed], &pops);
        assert_eq!(split.small, ClassCounts { trails: 1, checkins: 1 });
        assert_eq!(split.big, ClassCounts { trails: 1, checkins: 1 });
        assert_eq!(size_split_counts(&[], &pops), SizeSplit::default());
    }

    #[test]
    fn empty_reports_are_all_zero() {
        let reports = build_reports(&[], &Populations::default(), 5);
        let names: Vec<_> = reports.iter().map(Report::file_name).collect();
        assert!(names.contains(&"stats_trail_length.csv".to_owned()));
        let split = reports.iter().find(|r| r.name == "size_split").unwrap();
        assert_eq!(split.body, "class,trails,checkins\nsmall,0,0\nbig,0,0\n");
        let lengths = reports.iter().find(|r| r.name == "trail_length").unwrap();
        assert_eq!(lengths.body, "length,trails,in_plot\n");
    }
}
