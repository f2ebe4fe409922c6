//! Anti-spoofing filters and trail segmentation.
//!
//! Per user, check-ins are sorted by time and then pass through, in order:
//! the repetition filter (keep the last of a run at the same venue), the
//! dwell filter (drop the earlier check-in of a pair closer than the minimum
//! dwell), the speed filter (drop the later check-in of a pair implying a
//! speed above the limit) and a final repetition sweep for runs that the
//! two previous drops brought together. Segmentation then cuts the survivors
//! at every gap of at least the gap limit.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::enrich::{haversine, LatLon};
use crate::model::{CheckIn, PipelineConfig, RawTrail, Venue, Visit};

/// Check-ins removed per filter.
///
/// A check-in is counted under every filter that removes it, either in the
/// chained pass or when that filter alone is run on the sorted input, so the
/// per-filter sets overlap and `removed_total` counts distinct check-ins.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct FilterReport {
    pub removed_repeat: u64,
    pub removed_dwell: u64,
    pub removed_speed: u64,
    pub removed_total: u64,
    /// Dropped by the speed stage because their venue has no coordinates.
    /// Also counted in `removed_speed`.
    pub removed_unresolved: u64,
}

impl FilterReport {
    fn merge(self, other: Self) -> Self {
        Self {
            removed_repeat: self.removed_repeat + other.removed_repeat,
            removed_dwell: self.removed_dwell + other.removed_dwell,
            removed_speed: self.removed_speed + other.removed_speed,
            removed_total: self.removed_total + other.removed_total,
            removed_unresolved: self.removed_unresolved + other.removed_unresolved,
        }
    }
}

/// Check-ins of one user, sorted by time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSequence {
    pub user_id: String,
    pub checkins: Vec<CheckIn>,
}

/// Groups check-ins by user (users in order of first appearance) and sorts
/// each group by instant. The sort is stable, so ties keep input order.
pub fn group_and_sort(checkins: impl IntoIterator<Item = CheckIn>) -> Vec<UserSequence> {
    let mut slots: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<UserSequence> = Vec::new();
    for checkin in checkins {
        let slot = match slots.get(&checkin.user_id) {
            Some(&slot) => slot,
            None => {
                slots.insert(checkin.user_id.clone(), groups.len());
                groups.push(UserSequence {
                    user_id: checkin.user_id.clone(),
                    checkins: Vec::new(),
                });
                groups.len() - 1
            }
        };
        groups[slot].checkins.push(checkin);
    }
    for group in &mut groups {
        group.checkins.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
    }
    groups
}

// The filters below work on index lists into the user's sorted sequence so
// the report can tell which original check-in each filter removed.

fn repeat_pass<V: Visit>(seq: &[V], alive: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut kept = Vec::with_capacity(alive.len());
    let mut dropped = Vec::new();
    for (pos, &i) in alive.iter().enumerate() {
        let next_same = alive
            .get(pos + 1)
            .is_some_and(|&j| seq[j].venue_id() == seq[i].venue_id());
        if next_same {
            dropped.push(i);
        } else {
            kept.push(i);
        }
    }
    (kept, dropped)
}

fn dwell_pass<V: Visit>(seq: &[V], alive: &[usize], min_dwell_secs: i64) -> (Vec<usize>, Vec<usize>) {
    let mut kept: Vec<usize> = Vec::with_capacity(alive.len());
    let mut dropped = Vec::new();
    for &i in alive {
        if let Some(&last) = kept.last() {
            if seq[last].timestamp().seconds_until(seq[i].timestamp()) < min_dwell_secs {
                kept.pop();
                dropped.push(last);
            }
        }
        kept.push(i);
    }
    (kept, dropped)
}

struct SpeedOutcome {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    unresolved: Vec<usize>,
}

fn speed_pass<V: Visit>(
    seq: &[V],
    alive: &[usize],
    venues: &HashMap<String, Venue>,
    max_speed: f64,
    earth_radius: f64,
) -> SpeedOutcome {
    let mut out = SpeedOutcome {
        kept: Vec::with_capacity(alive.len()),
        dropped: Vec::new(),
        unresolved: Vec::new(),
    };
    let mut survivor: Option<(usize, LatLon)> = None;
    for &i in alive {
        let Some(venue) = venues.get(seq[i].venue_id()) else {
            out.unresolved.push(i);
            continue;
        };
        let here = LatLon::new(venue.latitude, venue.longitude);
        if let Some((s, there)) = survivor {
            let speed = implied_speed(
                there,
                here,
                seq[s].timestamp().seconds_until(seq[i].timestamp()),
                earth_radius,
            );
            if speed > max_speed {
                out.dropped.push(i);
                continue;
            }
        }
        survivor = Some((i, here));
        out.kept.push(i);
    }
    out
}

/// Meters per second; a zero time gap over a nonzero distance is infinite.
pub fn implied_speed(from: LatLon, to: LatLon, elapsed_secs: i64, earth_radius: f64) -> f64 {
    let distance = haversine(from, to, earth_radius);
    if distance == 0.0 {
        0.0
    } else if elapsed_secs <= 0 {
        f64::INFINITY
    } else {
        distance / elapsed_secs as f64
    }
}

fn pick<V: Clone>(seq: &[V], indices: &[usize]) -> Vec<V> {
    indices.iter().map(|&i| seq[i].clone()).collect()
}

/// Keeps only the last check-in of every run at the same venue.
pub fn collapse_repeats<V: Visit + Clone>(seq: &[V]) -> Vec<V> {
    let all: Vec<usize> = (0..seq.len()).collect();
    pick(seq, &repeat_pass(seq, &all).0)
}

/// Single left-to-right pass dropping the earlier check-in of every pair
/// closer than `min_dwell_secs`.
pub fn filter_dwell<V: Visit + Clone>(seq: &[V], min_dwell_secs: i64) -> Vec<V> {
    let all: Vec<usize> = (0..seq.len()).collect();
    pick(seq, &dwell_pass(seq, &all, min_dwell_secs).0)
}

/// Single left-to-right pass dropping the later check-in of every pair whose
/// implied speed exceeds `max_speed` m/s, comparing each check-in against the
/// last survivor. Check-ins at unknown venues are dropped with a warning.
pub fn filter_speed<V: Visit + Clone>(
    seq: &[V],
    venues: &HashMap<String, Venue>,
    max_speed: f64,
    earth_radius: f64,
) -> Vec<V> {
    let all: Vec<usize> = (0..seq.len()).collect();
    let outcome = speed_pass(seq, &all, venues, max_speed, earth_radius);
    for &i in &outcome.unresolved {
        tracing::warn!(venue = seq[i].venue_id(), "venue has no coordinates, check-in dropped");
    }
    pick(seq, &outcome.kept)
}

/// Splits a filtered sequence into trails: a check-in joins the current trail
/// when it is strictly later than its predecessor and strictly closer than
/// `gap_limit_secs`; a trail left open at the end is kept.
pub fn segment<V: Visit + Clone>(seq: &[V], gap_limit_secs: i64) -> Vec<Vec<V>> {
    let mut trails = Vec::new();
    let mut current: Vec<V> = Vec::new();
    for pair in seq.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let gap = prev.timestamp().seconds_until(next.timestamp());
        if gap <= 0 {
            // equal instants are not a step forward; the pair is skipped
            continue;
        }
        if gap < gap_limit_secs {
            if current.is_empty() {
                current.push(prev.clone());
            }
            current.push(next.clone());
        } else if !current.is_empty() {
            trails.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        trails.push(current);
    }
    trails
}

fn filter_user(
    seq: &[CheckIn],
    venues: &HashMap<String, Venue>,
    config: &PipelineConfig,
) -> (Vec<CheckIn>, FilterReport) {
    let n = seq.len();
    let all: Vec<usize> = (0..n).collect();

    let (after_repeat, mut repeat_dropped) = repeat_pass(seq, &all);
    let (after_dwell, dwell_dropped) = dwell_pass(seq, &after_repeat, config.min_dwell_secs);
    let speed = speed_pass(
        seq,
        &after_dwell,
        venues,
        config.max_speed_mps,
        config.earth_radius_m,
    );
    let (survivors, rejoined) = repeat_pass(seq, &speed.kept);
    repeat_dropped.extend(rejoined);

    let mut flags = vec![[false; 3]; n];
    let mut mark = |indices: &[usize], filter: usize| {
        for &i in indices {
            flags[i][filter] = true;
        }
    };
    mark(&repeat_dropped, 0);
    mark(&dwell_dropped, 1);
    mark(&speed.dropped, 2);
    mark(&speed.unresolved, 2);
    // standalone runs on the sorted input
    mark(&repeat_pass(seq, &all).1, 0);
    mark(&dwell_pass(seq, &all, config.min_dwell_secs).1, 1);
    let alone = speed_pass(seq, &all, venues, config.max_speed_mps, config.earth_radius_m);
    mark(&alone.dropped, 2);
    mark(&alone.unresolved, 2);

    let count = |filter: usize| flags.iter().filter(|f| f[filter]).count() as u64;
    let report = FilterReport {
        removed_repeat: count(0),
        removed_dwell: count(1),
        removed_speed: count(2),
        removed_total: (n - survivors.len()) as u64,
        removed_unresolved: speed.unresolved.len() as u64,
    };
    for &i in &speed.unresolved {
        tracing::warn!(venue = %seq[i].venue_id, "venue has no coordinates, check-in dropped");
    }
    (pick(seq, &survivors), report)
}

/// Result of [`build_trails`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildOutput {
    /// Users in order of first appearance, each user's trails in time order.
    pub trails: Vec<RawTrail>,
    pub report: FilterReport,
    /// Check-ins that survived filtering but ended up in no trail.
    pub unsegmented: u64,
    pub users: u64,
}

/// Runs grouping, the filters and segmentation over a whole check-in log.
///
/// Timestamps are truncated to the minute first, so every decision is taken
/// on the precision that ends up published. Users are processed in parallel
/// on the current rayon pool; the output does not depend on the pool size.
pub fn build_trails(
    checkins: impl IntoIterator<Item = CheckIn>,
    venues: &HashMap<String, Venue>,
    config: &PipelineConfig,
) -> BuildOutput {
    let truncated = checkins.into_iter().map(|mut c| {
        c.timestamp = c.timestamp.truncate_minute();
        c
    });
    let groups = group_and_sort(truncated);
    let users = groups.len() as u64;

    let per_user: Vec<(Vec<RawTrail>, FilterReport, u64)> = groups
        .par_iter()
        .map(|group| {
            let (filtered, report) = filter_user(&group.checkins, venues, config);
            let trails: Vec<RawTrail> = segment(&filtered, config.gap_limit_secs)
                .into_iter()
                .map(|t| {
                    RawTrail::new(t, config.gap_limit_secs)
                        .expect("filtered and segmented check-ins satisfy the trail invariants")
                })
                .collect();
            let placed: usize = trails.iter().map(RawTrail::len).sum();
            (trails, report, (filtered.len() - placed) as u64)
        })
        .collect();

    let mut out = BuildOutput {
        users,
        ..BuildOutput::default()
    };
    for (trails, report, unsegmented) in per_user {
        out.trails.extend(trails);
        out.report = out.report.merge(report);
        out.unsegmented += unsegmented;
    }
    out
}
