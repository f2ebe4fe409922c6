//! The whole build: parsed inputs in, anonymized trails out.

use std::collections::HashMap;
use std::io::Read;
use std::time::Instant;

use thiserror::Error;

use crate::emit::anonymize;
use crate::enrich::{
    enrich_trails, link_gazetteer, CategoryMapping, EnrichError, IndexError, References,
    SpatialIndex, Taxonomy, WikidataCandidate, WikidataIndex,
};
use crate::ingest::{
    parse_checkins, parse_gazetteer, parse_mapping, parse_taxonomy, parse_venues,
    parse_wikidata_cities, CheckinFormat, Delimiter, IngestError, Parsed,
};
use crate::model::{CheckIn, City, ModelError, PipelineConfig, Trail, TrailError, Venue};
use crate::trailbuild::{build_trails, FilterReport};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("gazetteer: {0}")]
    Index(#[from] IndexError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
    #[error("internal invariant broken: {0}")]
    Trail(#[from] TrailError),
}

/// Every input, parsed.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub checkins: Parsed<Vec<CheckIn>>,
    pub venues: Parsed<HashMap<String, Venue>>,
    pub cities: Parsed<Vec<City>>,
    pub mapping: Parsed<CategoryMapping>,
    pub taxonomy: Parsed<Taxonomy>,
    pub wikidata: Parsed<Vec<WikidataCandidate>>,
}

impl Inputs {
    /// Parses in-memory copies of the six inputs.
    #[allow(clippy::too_many_arguments)]
    pub fn from_texts(
        checkins: &str,
        checkin_format: CheckinFormat,
        venues: &str,
        venue_delimiter: Delimiter,
        cities: &str,
        mapping: &str,
        taxonomy: &str,
        wikidata: &str,
    ) -> Result<Self, IngestError> {
        Self::from_readers(
            checkins.as_bytes(),
            checkin_format,
            venues.as_bytes(),
            venue_delimiter,
            cities.as_bytes(),
            mapping.as_bytes(),
            taxonomy.as_bytes(),
            wikidata.as_bytes(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_readers(
        checkins: impl Read,
        checkin_format: CheckinFormat,
        venues: impl Read,
        venue_delimiter: Delimiter,
        cities: impl Read,
        mapping: impl Read,
        taxonomy: impl Read,
        wikidata: impl Read,
    ) -> Result<Self, IngestError> {
        Ok(Self {
            checkins: parse_checkins(checkins, checkin_format)?,
            venues: parse_venues(venues, venue_delimiter)?,
            cities: parse_gazetteer(cities)?,
            mapping: parse_mapping(mapping)?,
            taxonomy: parse_taxonomy(taxonomy)?,
            wikidata: parse_wikidata_cities(wikidata)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct Output {
    pub trails: Vec<Trail>,
    pub report: FilterReport,
    pub unsegmented: u64,
    pub users: u64,
    pub cities_linked: usize,
    pub timings: Vec<StageTiming>,
}

impl Output {
    pub fn emitted_checkins(&self) -> u64 {
        self.trails.iter().map(|t| t.len() as u64).sum()
    }
}

/// Filters, segments, enriches and anonymizes.
pub fn run(inputs: Inputs, config: &PipelineConfig) -> Result<Output, PipelineError> {
    config.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &'static str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage,
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
    };

    let Inputs {
        checkins,
        venues,
        cities,
        mapping,
        taxonomy,
        wikidata,
    } = inputs;
    let built = build_trails(checkins.records, &venues.records, config);
    lap("trailbuild", &mut timings);

    let mut cities = cities.records;
    let candidates = WikidataIndex::new(wikidata.records);
    let cities_linked = link_gazetteer(
        &mut cities,
        &candidates,
        config.link_radius_m,
        config.earth_radius_m,
    );
    let index = SpatialIndex::build(cities, config.earth_radius_m)?;
    lap("index", &mut timings);

    let refs = References {
        venues: &venues.records,
        index: &index,
        mapping: &mapping.records,
        taxonomy: &taxonomy.records,
    };
    let semantic = enrich_trails(&built.trails, &refs)?;
    lap("enrich", &mut timings);

    let (trails, _) = anonymize(semantic, config.gap_limit_secs)?;
    lap("anonymize", &mut timings);

    Ok(Output {
        trails,
        report: built.report,
        unsegmented: built.unsegmented,
        users: built.users,
        cities_linked,
        timings,
    })
}
