//! Semantic enrichment: nearest city, knowledge-base link and vocabulary term
//! for every venue on a trail.

mod geo;
mod taxonomy;

use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub use geo::{haversine, IndexError, LatLon, SpatialIndex};
pub use taxonomy::{
    map_category, Category, CategoryMapping, Resolution, Taxonomy, TaxonomyError, DEFAULT_TERM,
};

use crate::model::{City, CityRef, RawTrail, Timestamp, Venue, Visit};

/// A city entity from the knowledge base, identified by its Q-number.
#[derive(Debug, Clone, PartialEq)]
pub struct WikidataCandidate {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub qid: String,
}

/// Case-folded, NFC-normalized, trimmed. Diacritics are kept.
pub fn normalize_name(name: &str) -> String {
    name.trim().nfc().collect::<String>().to_lowercase()
}

/// Candidates bucketed by normalized English label.
#[derive(Debug, Clone, Default)]
pub struct WikidataIndex {
    by_name: HashMap<String, Vec<WikidataCandidate>>,
}

impl WikidataIndex {
    pub fn new(candidates: impl IntoIterator<Item = WikidataCandidate>) -> Self {
        let mut by_name: HashMap<String, Vec<WikidataCandidate>> = HashMap::new();
        for candidate in candidates {
            by_name
                .entry(normalize_name(&candidate.name))
                .or_default()
                .push(candidate);
        }
        Self { by_name }
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    /// Q-id of the nearest same-name candidate strictly within `link_radius`
    /// meters. Equal distances go to the lexicographically smallest Q-id.
    pub fn link(&self, city: &City, link_radius: f64, earth_radius: f64) -> Option<&str> {
        let here = LatLon::new(city.latitude, city.longitude);
        self.by_name
            .get(&normalize_name(&city.name))?
            .iter()
            .map(|c| {
                let d = haversine(here, LatLon::new(c.latitude, c.longitude), earth_radius);
                (d, c.qid.as_str())
            })
            .filter(|(d, _)| *d < link_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
            .map(|(_, qid)| qid)
    }
}

/// Links one city. See [`WikidataIndex::link`].
pub fn link_wikidata(
    city: &City,
    candidates: &WikidataIndex,
    link_radius: f64,
    earth_radius: f64,
) -> Option<String> {
    candidates
        .link(city, link_radius, earth_radius)
        .map(str::to_owned)
}

/// Fills `wikidata_id` on every city that has a match. Returns the number linked.
pub fn link_gazetteer(
    cities: &mut [City],
    candidates: &WikidataIndex,
    link_radius: f64,
    earth_radius: f64,
) -> usize {
    cities
        .par_iter_mut()
        .map(|city| {
            city.wikidata_id = link_wikidata(city, candidates, link_radius, earth_radius);
            usize::from(city.wikidata_id.is_some())
        })
        .sum()
}

/// A check-in with its semantic annotations, before anonymization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticCheckIn {
    pub venue_id: String,
    pub category_id: String,
    pub schema_term: String,
    pub city: CityRef,
    pub timestamp: Timestamp,
}

impl Visit for SemanticCheckIn {
    fn venue_id(&self) -> &str {
        &self.venue_id
    }
    fn timestamp(&self) -> &Timestamp {
        &self.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticTrail {
    pub user_id: String,
    pub checkins: Vec<SemanticCheckIn>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnrichError {
    #[error("venue `{0}` is on a trail but missing from the venue table")]
    UnknownVenue(String),
}

/// Read-only reference data used by [`enrich_trails`].
pub struct References<'a> {
    pub venues: &'a HashMap<String, Venue>,
    /// Built over cities whose `wikidata_id` is already linked.
    pub index: &'a SpatialIndex,
    pub mapping: &'a CategoryMapping,
    pub taxonomy: &'a Taxonomy,
}

struct VenueAnnotation {
    category_id: String,
    schema_term: String,
    city: CityRef,
}

/// Annotates every check-in; trail membership, order and timestamps are untouched.
pub fn enrich_trails(
    trails: &[RawTrail],
    refs: &References<'_>,
) -> Result<Vec<SemanticTrail>, EnrichError> {
    let mut distinct: Vec<&str> = trails
        .iter()
        .flat_map(|t| t.checkins().iter().map(|c| c.venue_id.as_str()))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();

    let annotations: HashMap<&str, VenueAnnotation> = distinct
        .par_iter()
        .map(|&id| {
            let venue = refs
                .venues
                .get(id)
                .ok_or_else(|| EnrichError::UnknownVenue(id.to_owned()))?;
            let city = refs.index.reverse_geocode(venue.latitude, venue.longitude);
            let (term, _) = map_category(&venue.category_id, refs.mapping, refs.taxonomy);
            Ok((
                id,
                VenueAnnotation {
                    category_id: venue.category_id.clone(),
                    schema_term: term.to_owned(),
                    city: CityRef::from(city),
                },
            ))
        })
        .collect::<Result<_, EnrichError>>()?;

    Ok(trails
        .iter()
        .map(|trail| SemanticTrail {
            user_id: trail.user_id().to_owned(),
            checkins: trail
                .checkins()
                .iter()
                .map(|c| {
                    let a = &annotations[c.venue_id.as_str()];
                    SemanticCheckIn {
                        venue_id: c.venue_id.clone(),
                        category_id: a.category_id.clone(),
                        schema_term: a.schema_term.clone(),
                        city: a.city.clone(),
                        timestamp: c.timestamp,
                    }
                })
                .collect(),
        })
        .collect())
}
