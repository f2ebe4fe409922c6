//! Domain types shared by every pipeline stage.
//!
//! Everything here is immutable once built and carries no I/O.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, FixedOffset, SecondsFormat, TimeZone, Timelike};
use thiserror::Error;

/// Largest accepted UTC offset magnitude, in minutes.
pub const MAX_OFFSET_MINUTES: i32 = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimestampError {
    #[error("timestamp `{0}` is not ISO 8601 with an explicit UTC offset")]
    Malformed(String),
    #[error("UTC offset of {0} minutes is out of range")]
    OffsetOutOfRange(i32),
}

/// A point in time with second precision together with the local UTC offset
/// it was recorded in.
///
/// Equality and ordering look only at the absolute instant: two timestamps
/// rendered in different offsets compare equal when they denote the same
/// moment. Use [`Timestamp::offset_minutes`] or the rendered form when the
/// offset matters.
#[derive(Debug, Clone, Copy)]
pub struct Timestamp(DateTime<FixedOffset>);

impl Timestamp {
    /// Parses ISO 8601 / RFC 3339 text. An offset (`Z` or `±hh:mm`) is
    /// mandatory; fractional seconds are discarded.
    pub fn parse(text: &str) -> Result<Self, TimestampError> {
        let text = text.trim();
        let parsed = DateTime::parse_from_rfc3339(text)
            .map_err(|_| TimestampError::Malformed(text.to_owned()))?;
        let parsed = parsed
            .with_nanosecond(0)
            .ok_or_else(|| TimestampError::Malformed(text.to_owned()))?;
        Ok(Self(parsed))
    }

    /// Builds a timestamp from Unix seconds and an offset in minutes.
    pub fn from_unix(seconds: i64, offset_minutes: i32) -> Result<Self, TimestampError> {
        if offset_minutes.abs() > MAX_OFFSET_MINUTES {
            return Err(TimestampError::OffsetOutOfRange(offset_minutes));
        }
        // chrono caps offsets strictly below one day
        let offset = FixedOffset::east_opt(offset_minutes * 60)
            .ok_or(TimestampError::OffsetOutOfRange(offset_minutes))?;
        offset
            .timestamp_opt(seconds, 0)
            .single()
            .map(Self)
            .ok_or_else(|| TimestampError::Malformed(seconds.to_string()))
    }

    pub fn unix_seconds(&self) -> i64 {
        self.0.timestamp()
    }

    pub fn offset_minutes(&self) -> i32 {
        self.0.offset().local_minus_utc() / 60
    }

    /// Seconds component of the local wall-clock time.
    pub fn second(&self) -> u32 {
        self.0.second()
    }

    /// Drops the seconds, keeping the offset. Never rounds up.
    pub fn truncate_minute(&self) -> Self {
        let secs = self.unix_seconds();
        let offset_secs = i64::from(self.0.offset().local_minus_utc());
        // offsets may carry seconds in principle; truncate in local time
        let local = secs + offset_secs;
        let truncated = local - local.rem_euclid(60) - offset_secs;
        Self(
            self.0
                .offset()
                .timestamp_opt(truncated, 0)
                .single()
                .expect("truncation stays in range"),
        )
    }

    /// Signed number of seconds from `self` to `later`.
    pub fn seconds_until(&self, later: &Timestamp) -> i64 {
        later.unix_seconds() - self.unix_seconds()
    }

    /// True when both the instant and the offset coincide.
    pub fn identical(&self, other: &Timestamp) -> bool {
        self.0 == other.0 && self.offset_minutes() == other.offset_minutes()
    }
}

impl PartialEq for Timestamp {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Timestamp {}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

/// Total order by absolute instant.
pub fn compare(a: &Timestamp, b: &Timestamp) -> Ordering {
    a.0.timestamp().cmp(&b.0.timestamp())
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `+00:00` rather than `Z`, matching the published datasets
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Secs, false))
    }
}

impl FromStr for Timestamp {
    type Err = TimestampError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty {0} identifier")]
    EmptyId(&'static str),
    #[error("coordinate ({lat}, {lon}) out of range")]
    BadCoordinate { lat: f64, lon: f64 },
    #[error("configuration value `{0}` must be strictly positive")]
    NonPositiveConfig(&'static str),
}

pub fn valid_coordinate(lat: f64, lon: f64) -> bool {
    lat.is_finite()
        && lon.is_finite()
        && (-90.0..=90.0).contains(&lat)
        && (-180.0..=180.0).contains(&lon)
}

/// A user/venue/timestamp event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckIn {
    pub venue_id: String,
    pub user_id: String,
    pub timestamp: Timestamp,
}

impl CheckIn {
    pub fn new(
        venue_id: impl Into<String>,
        user_id: impl Into<String>,
        timestamp: Timestamp,
    ) -> Result<Self, ModelError> {
        let venue_id = venue_id.into();
        let user_id = user_id.into();
        if venue_id.is_empty() {
            return Err(ModelError::EmptyId("venue"));
        }
        if user_id.is_empty() {
            return Err(ModelError::EmptyId("user"));
        }
        Ok(Self {
            venue_id,
            user_id,
            timestamp,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Venue {
    pub id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub category_id: String,
}

impl Venue {
    pub fn new(
        id: impl Into<String>,
        latitude: f64,
        longitude: f64,
        category_id: impl Into<String>,
    ) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ModelError::EmptyId("venue"));
        }
        if !valid_coordinate(latitude, longitude) {
            return Err(ModelError::BadCoordinate {
                lat: latitude,
                lon: longitude,
            });
        }
        Ok(Self {
            id,
            latitude,
            longitude,
            category_id: category_id.into(),
        })
    }
}

/// Gazetteer record.
#[derive(Debug, Clone, PartialEq)]
pub struct City {
    pub geonames_id: u64,
    pub name: String,
    pub country_code: String,
    pub latitude: f64,
    pub longitude: f64,
    pub population: Option<u64>,
    pub wikidata_id: Option<String>,
}

impl City {
    /// Strictly more than `threshold` inhabitants. Unknown population is small.
    pub fn is_big(&self, threshold: u64) -> bool {
        self.population.is_some_and(|p| p > threshold)
    }
}

/// The parts of a [`City`] that travel with every published check-in.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CityRef {
    pub geonames_id: u64,
    pub name: String,
    pub country_code: String,
    pub wikidata_id: Option<String>,
}

impl From<&City> for CityRef {
    fn from(city: &City) -> Self {
        Self {
            geonames_id: city.geonames_id,
            name: city.name.clone(),
            country_code: city.country_code.clone(),
            wikidata_id: city.wikidata_id.clone(),
        }
    }
}

/// One published row: a check-in after anonymization, enrichment and
/// minute truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichedCheckIn {
    pub trail_id: u64,
    pub anon_user_id: u64,
    pub venue_id: String,
    pub category_id: String,
    pub schema_term: String,
    pub city: CityRef,
    pub timestamp: Timestamp,
}

/// Anything that sits on a trail: it happened at a venue at some time.
pub trait Visit {
    fn venue_id(&self) -> &str;
    fn timestamp(&self) -> &Timestamp;
}

impl Visit for CheckIn {
    fn venue_id(&self) -> &str {
        &self.venue_id
    }
    fn timestamp(&self) -> &Timestamp {
        &self.timestamp
    }
}

impl Visit for EnrichedCheckIn {
    fn venue_id(&self) -> &str {
        &self.venue_id
    }
    fn timestamp(&self) -> &Timestamp {
        &self.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrailError {
    #[error("a trail needs at least 2 check-ins, got {0}")]
    TooShort(usize),
    #[error("check-in {0} is not strictly later than its predecessor")]
    NotIncreasing(usize),
    #[error("check-in {0} repeats the venue of its predecessor")]
    RepeatedVenue(usize),
    #[error("gap before check-in {index} is {gap_secs} s, limit is {limit_secs} s")]
    GapTooLong {
        index: usize,
        gap_secs: i64,
        limit_secs: i64,
    },
    #[error("check-in {0} belongs to a different trail or user")]
    MixedMembership(usize),
}

/// Checks the structural trail invariants over an ordered sequence.
pub fn check_trail<V: Visit>(visits: &[V], gap_limit_secs: i64) -> Result<(), TrailError> {
    if visits.len() < 2 {
        return Err(TrailError::TooShort(visits.len()));
    }
    for (index, pair) in visits.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        let gap = prev.timestamp().seconds_until(next.timestamp());
        if gap <= 0 {
            return Err(TrailError::NotIncreasing(index + 1));
        }
        if prev.venue_id() == next.venue_id() {
            return Err(TrailError::RepeatedVenue(index + 1));
        }
        if gap >= gap_limit_secs {
            return Err(TrailError::GapTooLong {
                index: index + 1,
                gap_secs: gap,
                limit_secs: gap_limit_secs,
            });
        }
    }
    Ok(())
}

/// A trail before enrichment, still keyed by the original user identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTrail {
    user_id: String,
    checkins: Vec<CheckIn>,
}

impl RawTrail {
    pub fn new(checkins: Vec<CheckIn>, gap_limit_secs: i64) -> Result<Self, TrailError> {
        check_trail(&checkins, gap_limit_secs)?;
        let user_id = checkins[0].user_id.clone();
        if let Some(i) = checkins.iter().position(|c| c.user_id != user_id) {
            return Err(TrailError::MixedMembership(i));
        }
        Ok(Self { user_id, checkins })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn checkins(&self) -> &[CheckIn] {
        &self.checkins
    }

    pub fn len(&self) -> usize {
        self.checkins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkins.is_empty()
    }

    pub fn into_checkins(self) -> Vec<CheckIn> {
        self.checkins
    }
}

/// A published semantic trail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trail {
    id: u64,
    user: u64,
    checkins: Vec<EnrichedCheckIn>,
}

impl Trail {
    pub fn new(checkins: Vec<EnrichedCheckIn>, gap_limit_secs: i64) -> Result<Self, TrailError> {
        check_trail(&checkins, gap_limit_secs)?;
        let (id, user) = (checkins[0].trail_id, checkins[0].anon_user_id);
        if let Some(i) = checkins
            .iter()
            .position(|c| c.trail_id != id || c.anon_user_id != user)
        {
            return Err(TrailError::MixedMembership(i));
        }
        Ok(Self { id, user, checkins })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn user(&self) -> u64 {
        self.user
    }

    pub fn checkins(&self) -> &[EnrichedCheckIn] {
        &self.checkins
    }

    pub fn len(&self) -> usize {
        self.checkins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkins.is_empty()
    }

    /// Seconds between the first and the last check-in.
    pub fn duration_secs(&self) -> i64 {
        let first = self.checkins.first().map(|c| c.timestamp);
        let last = self.checkins.last().map(|c| c.timestamp);
        match (first, last) {
            (Some(a), Some(b)) => a.seconds_until(&b),
            _ => 0,
        }
    }
}

/// Thresholds for every stage. Defaults follow the published datasets.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PipelineConfig {
    /// Consecutive check-ins must be strictly closer than this to share a trail.
    pub gap_limit_secs: i64,
    /// Check-ins strictly closer than this to the next one are dropped.
    pub min_dwell_secs: i64,
    /// Implied speeds strictly above this are dropped (Mach 1).
    pub max_speed_mps: f64,
    /// Wikidata candidates must be strictly closer than this.
    pub link_radius_m: f64,
    /// Cities with strictly more inhabitants are "big".
    pub big_city_threshold: u64,
    pub earth_radius_m: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gap_limit_secs: 8 * 3600,
            min_dwell_secs: 60,
            max_speed_mps: 343.0,
            link_radius_m: 10_000.0,
            big_city_threshold: 100_000,
            earth_radius_m: 6_371_000.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.gap_limit_secs <= 0 {
            return Err(ModelError::NonPositiveConfig("gap_limit_secs"));
        }
        if self.min_dwell_secs <= 0 {
            return Err(ModelError::NonPositiveConfig("min_dwell_secs"));
        }
        if !(self.max_speed_mps > 0.0) {
            return Err(ModelError::NonPositiveConfig("max_speed_mps"));
        }
        if !(self.link_radius_m > 0.0) {
            return Err(ModelError::NonPositiveConfig("link_radius_m"));
        }
        if self.big_city_threshold == 0 {
            return Err(ModelError::NonPositiveConfig("big_city_threshold"));
        }
        if !(self.earth_radius_m > 0.0) {
            return Err(ModelError::NonPositiveConfig("earth_radius_m"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn same_instant_in_different_offsets_is_equal() {
        let a = ts("2012-04-03T18:19:00-04:00");
        let b = ts("2012-04-03T22:19:00+00:00");
        assert_eq!(compare(&a, &b), Ordering::Equal);
        assert!(!a.identical(&b));
    }

    #[test]
    fn listing_rows_are_ordered() {
        let a = ts("2012-04-03T18:19:00-04:00");
        let b = ts("2012-04-04T00:15:00-04:00");
        assert_eq!(compare(&a, &b), Ordering::Less);
        assert_eq!(compare(&a, &a), Ordering::Equal);
    }

    #[test]
    fn offset_is_mandatory() {
        assert!(Timestamp::parse("2012-04-03T18:19:00").is_err());
        assert!(Timestamp::parse("not-a-date").is_err());
        assert_eq!(ts("2012-04-03T18:19:00Z").offset_minutes(), 0);
    }

    #[test]
    fn rendering_keeps_offset() {
        let t = ts("2012-04-03T18:19:32-04:00");
        assert_eq!(t.offset_minutes(), -240);
        assert_eq!(t.to_string(), "2012-04-03T18:19:32-04:00");
        assert_eq!(ts("2012-04-03T18:19:32Z").to_string(), "2012-04-03T18:19:32+00:00");
    }

    #[test]
    fn truncation_zeroes_seconds_without_rounding() {
        let t = ts("2012-04-03T18:19:32-04:00").truncate_minute();
        assert_eq!(t.to_string(), "2012-04-03T18:19:00-04:00");
        let t = ts("2012-04-03T23:59:59+00:00").truncate_minute();
        assert_eq!(t.to_string(), "2012-04-03T23:59:00+00:00");
        let t = ts("1969-12-31T23:59:59+05:30").truncate_minute();
        assert_eq!(t.to_string(), "1969-12-31T23:59:00+05:30");
    }

    #[test]
    fn offset_range_is_enforced() {
        assert!(Timestamp::from_unix(0, 1441).is_err());
        assert!(Timestamp::from_unix(0, -1441).is_err());
        assert!(Timestamp::from_unix(0, 1439).is_ok());
    }

    fn checkin(venue: &str, at: i64) -> CheckIn {
        CheckIn::new(venue, "u", Timestamp::from_unix(at, 0).unwrap()).unwrap()
    }

    #[test]
    fn trail_invariants_are_enforced() {
        let gap = 8 * 3600;
        assert_eq!(
            RawTrail::new(vec![checkin("a", 0)], gap),
            Err(TrailError::TooShort(1))
        );
        assert_eq!(
            RawTrail::new(vec![checkin("a", 10), checkin("b", 10)], gap),
            Err(TrailError::NotIncreasing(1))
        );
        assert_eq!(
            RawTrail::new(vec![checkin("a", 0), checkin("a", 100)], gap),
            Err(TrailError::RepeatedVenue(1))
        );
        assert!(matches!(
            RawTrail::new(vec![checkin("a", 0), checkin("b", gap)], gap),
            Err(TrailError::GapTooLong { .. })
        ));
        assert!(RawTrail::new(vec![checkin("a", 0), checkin("b", gap - 1)], gap).is_ok());
        let mut other = checkin("c", 200);
        other.user_id = "v".into();
        assert_eq!(
            RawTrail::new(vec![checkin("a", 0), other], gap),
            Err(TrailError::MixedMembership(1))
        );
    }

    #[test]
    fn empty_ids_are_rejected() {
        let t = Timestamp::from_unix(0, 0).unwrap();
        assert!(CheckIn::new("", "u", t).is_err());
        assert!(CheckIn::new("v", "", t).is_err());
        assert!(Venue::new("v", 91.0, 0.0, "k").is_err());
        assert!(Venue::new("v", 0.0, -180.5, "k").is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        let bad = PipelineConfig {
            max_speed_mps: 0.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn ordering_ignores_offsets(
            a in -2_000_000_000i64..2_000_000_000,
            b in -2_000_000_000i64..2_000_000_000,
            c in -2_000_000_000i64..2_000_000_000,
            oa in -1439i32..1440, ob in -1439i32..1440, oc in -1439i32..1440,
        ) {
            let ta = Timestamp::from_unix(a, oa).unwrap();
            let tb = Timestamp::from_unix(b, ob).unwrap();
            let tc = Timestamp::from_unix(c, oc).unwrap();
            prop_assert_eq!(compare(&ta, &tb), a.cmp(&b));
            if ta < tb && tb < tc {
                prop_assert!(ta < tc);
            }
            if a != b {
                prop_assert_ne!(compare(&ta, &tb), compare(&tb, &ta));
            }
            let reparsed = Timestamp::parse(&ta.to_string()).unwrap();
            prop_assert!(reparsed.identical(&ta));
        }
    }
}
