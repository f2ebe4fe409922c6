//! Structural checks on a published dataset file.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::emit::{group_rows, StdRow};
use crate::enrich::LatLon;
use crate::model::{PipelineConfig, Venue};
use crate::trailbuild::implied_speed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    TrailIdNotDense,
    TrailNotContiguous,
    UserIdNotDense,
    MixedUsers,
    TooShort,
    NotIncreasing,
    RepeatedVenue,
    GapTooLong,
    DwellTooShort,
    SpeedTooHigh,
    UnknownVenue,
    SecondsNotTruncated,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TrailIdNotDense => "trail id not dense",
            Self::TrailNotContiguous => "trail rows not contiguous",
            Self::UserIdNotDense => "user id not dense",
            Self::MixedUsers => "trail mixes users",
            Self::TooShort => "trail shorter than 2",
            Self::NotIncreasing => "timestamps not strictly increasing",
            Self::RepeatedVenue => "consecutive duplicate venue",
            Self::GapTooLong => "gap not below the gap limit",
            Self::DwellTooShort => "check-ins closer than the minimum dwell",
            Self::SpeedTooHigh => "implied speed above the limit",
            Self::UnknownVenue => "venue missing from venue table",
            Self::SecondsNotTruncated => "timestamp has nonzero seconds",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub line: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Every invariant of a published dataset. Speeds are only checked when a
/// venue table is given.
pub fn validate_rows(
    rows: &[StdRow],
    config: &PipelineConfig,
    venues: Option<&HashMap<String, Venue>>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |line, kind, detail: String| out.push(Violation { line, kind, detail });

    for row in rows {
        if row.record.timestamp.second() != 0 {
            push(row.line, ViolationKind::SecondsNotTruncated, row.record.timestamp.to_string());
        }
    }

    let mut seen_trails = HashSet::new();
    let mut next_user = 1;
    let mut users = HashSet::new();
    for (expected, group) in (1u64..).zip(group_rows(rows)) {
        let head = &group[0];
        let trail_id = head.record.trail_id;
        if !seen_trails.insert(trail_id) {
            push(head.line, ViolationKind::TrailNotContiguous, format!("trail {trail_id}"));
        } else if trail_id != expected {
            push(
                head.line,
                ViolationKind::TrailIdNotDense,
                format!("expected {expected}, found {trail_id}"),
            );
        }
        let user = head.record.anon_user_id;
        if users.insert(user) {
            if user != next_user {
                push(
                    head.line,
                    ViolationKind::UserIdNotDense,
                    format!("expected {next_user}, found {user}"),
                );
            }
            next_user += 1;
        }
        if group.len() < 2 {
            push(head.line, ViolationKind::TooShort, format!("trail {trail_id}"));
        }
        for pair in group.windows(2) {
            let (prev, next) = (&pair[0].record, &pair[1].record);
            let line = pair[1].line;
            if next.anon_user_id != prev.anon_user_id {
                push(line, ViolationKind::MixedUsers, String::new());
            }
            let gap = prev.timestamp.seconds_until(&next.timestamp);
            if gap <= 0 {
                push(line, ViolationKind::NotIncreasing, format!("{gap} s"));
            }
            if prev.venue_id == next.venue_id {
                push(line, ViolationKind::RepeatedVenue, next.venue_id.clone());
            }
            if gap >= config.gap_limit_secs {
                push(line, ViolationKind::GapTooLong, format!("{gap} s"));
            }
            if gap < config.min_dwell_secs {
                push(line, ViolationKind::DwellTooShort, format!("{gap} s"));
            }
            if let Some(venues) = venues {
                match (venues.get(&prev.venue_id), venues.get(&next.venue_id)) {
                    (Some(a), Some(b)) => {
                        let speed = implied_speed(
                            LatLon::new(a.latitude, a.longitude),
                            LatLon::new(b.latitude, b.longitude),
                            gap,
                            config.earth_radius_m,
                        );
                        if speed > config.max_speed_mps {
                            push(line, ViolationKind::SpeedTooHigh, format!("{speed:.1} m/s"));
                        }
                    }
                    (None, _) => push(pair[0].line, ViolationKind::UnknownVenue, prev.venue_id.clone()),
                    (_, None) => push(line, ViolationKind::UnknownVenue, next.venue_id.clone()),
                }
            }
        }
    }
    out.sort_by_key(|v| v.line);
    out
}
