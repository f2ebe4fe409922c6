//! Readers for the pipeline inputs: check-in log, venue table, GeoNames
//! cities dump, category mapping, category taxonomy and Wikidata city
//! candidates.
//!
//! Row-level problems never abort a parse. They are collected as
//! [`RawRecordError`]s next to the records so that
//! `rows == records + errors + skipped + header_lines` holds for every file.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;

use csv::{ReaderBuilder, StringRecord};
use thiserror::Error;

use crate::enrich::{Category, CategoryMapping, Taxonomy, TaxonomyError, WikidataCandidate};
use crate::model::{valid_coordinate, CheckIn, City, Timestamp, Venue};

/// Vocabulary prefixes the emitters know how to expand.
pub const KNOWN_PREFIXES: &[&str] = &["schema:"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    MalformedTimestamp,
    BadCoordinate,
    UnknownColumnCount,
    EmptyId,
    /// A numeric field other than a coordinate failed to parse.
    MalformedNumber,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MalformedTimestamp => "malformed timestamp",
            Self::BadCoordinate => "bad coordinate",
            Self::UnknownColumnCount => "unknown column count",
            Self::EmptyId => "empty id",
            Self::MalformedNumber => "malformed number",
        })
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line_number}: {reason}")]
pub struct RawRecordError {
    pub line_number: u64,
    pub reason: RejectReason,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed delimited text: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: category `{key}` is mapped twice")]
    DuplicateKey { key: String, line: u64 },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(#[from] TaxonomyError),
}

/// Records plus everything that did not make it in.
#[derive(Debug, Clone, Default)]
pub struct Parsed<T> {
    pub records: T,
    pub errors: Vec<RawRecordError>,
    pub warnings: Vec<String>,
    /// Well-formed rows deliberately left out (filters, duplicates, gaps).
    pub skipped: usize,
    pub header_lines: usize,
    /// Non-empty lines read, header included.
    pub rows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Tab,
    Comma,
}

impl Delimiter {
    pub fn byte(self) -> u8 {
        match self {
            Self::Tab => b'\t',
            Self::Comma => b',',
        }
    }
}

/// Column layout of a check-in log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckinFormat {
    pub delimiter: Delimiter,
    pub has_header: bool,
    pub user_column: usize,
    pub venue_column: usize,
    pub timestamp_column: usize,
}

impl Default for CheckinFormat {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Tab,
            has_header: false,
            user_column: 0,
            venue_column: 1,
            timestamp_column: 2,
        }
    }
}

impl CheckinFormat {
    fn width(&self) -> usize {
        self.user_column
            .max(self.venue_column)
            .max(self.timestamp_column)
            + 1
    }
}

fn reader<R: Read>(input: R, delimiter: Delimiter) -> csv::Reader<R> {
    let mut builder = ReaderBuilder::new();
    builder
        .delimiter(delimiter.byte())
        .has_headers(false)
        .flexible(true);
    // tab-separated dumps use bare quotes inside names
    if delimiter == Delimiter::Tab {
        builder.quoting(false);
    }
    builder.from_reader(input)
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

/// One parsed row or the reason it was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum Row<T> {
    Record(T),
    Rejected(RawRecordError),
    Header,
}

/// Streaming check-in reader. Yields rows in input order; only unreadable
/// input is an `Err`.
pub struct CheckinReader<R: Read> {
    inner: csv::Reader<R>,
    format: CheckinFormat,
    record: StringRecord,
    first: bool,
}

impl<R: Read> CheckinReader<R> {
    pub fn new(input: R, format: CheckinFormat) -> Self {
        Self {
            inner: reader(input, format.delimiter),
            format,
            record: StringRecord::new(),
            first: true,
        }
    }

    fn convert(&self) -> Row<CheckIn> {
        let line_number = line_of(&self.record);
        let reject = |reason| Row::Rejected(RawRecordError {
            line_number,
            reason,
        });
        if self.record.len() < self.format.width() {
            return reject(RejectReason::UnknownColumnCount);
        }
        let user = self.record[self.format.user_column].trim();
        let venue = self.record[self.format.venue_column].trim();
        if user.is_empty() || venue.is_empty() {
            return reject(RejectReason::EmptyId);
        }
        match Timestamp::parse(&self.record[self.format.timestamp_column]) {
            Ok(timestamp) => Row::Record(CheckIn {
                venue_id: venue.to_owned(),
                user_id: user.to_owned(),
                timestamp,
            }),
            Err(_) => reject(RejectReason::MalformedTimestamp),
        }
    }
}

impl<R: Read> Iterator for CheckinReader<R> {
    type Item = Result<Row<CheckIn>, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.inner.read_record(&mut self.record) {
            Err(e) => Some(Err(e.into())),
            Ok(false) => None,
            Ok(true) => {
                let first = std::mem::replace(&mut self.first, false);
                if first && self.format.has_header {
                    return Some(Ok(Row::Header));
                }
                Some(Ok(self.convert()))
            }
        }
    }
}

/// Reads a whole check-in log. See [`CheckinReader`] for the streaming form.
pub fn parse_checkins<R: Read>(
    input: R,
    format: CheckinFormat,
) -> Result<Parsed<Vec<CheckIn>>, IngestError> {
    let mut out = Parsed::<Vec<CheckIn>>::default();
    for row in CheckinReader::new(input, format) {
        out.rows += 1;
        match row? {
            Row::Record(c) => out.records.push(c),
            Row::Rejected(e) => out.errors.push(e),
            Row::Header => out.header_lines += 1,
        }
    }
    Ok(out)
}

fn is_header(record: &StringRecord, names: &[&str]) -> bool {
    record
        .get(0)
        .is_some_and(|f| names.iter().any(|n| f.trim().eq_ignore_ascii_case(n)))
}

fn parse_coordinate_pair(lat: &str, lon: &str) -> Option<(f64, f64)> {
    let lat: f64 = lat.trim().parse().ok()?;
    let lon: f64 = lon.trim().parse().ok()?;
    valid_coordinate(lat, lon).then_some((lat, lon))
}

/// Venue table: `id, latitude, longitude, category_id`. A later row with an
/// already-seen id replaces the earlier one.
pub fn parse_venues<R: Read>(
    input: R,
    delimiter: Delimiter,
) -> Result<Parsed<HashMap<String, Venue>>, IngestError> {
    let mut out = Parsed::<HashMap<String, Venue>>::default();
    let mut csv = reader(input, delimiter);
    let mut record = StringRecord::new();
    while csv.read_record(&mut record)? {
        out.rows += 1;
        let line_number = line_of(&record);
        if out.rows == 1 && is_header(&record, &["id", "venue_id"]) {
            out.header_lines += 1;
            continue;
        }
        let reject = |reason| RawRecordError {
            line_number,
            reason,
        };
        if record.len() != 4 {
            out.errors.push(reject(RejectReason::UnknownColumnCount));
            continue;
        }
        let id = record[0].trim();
        if id.is_empty() {
            out.errors.push(reject(RejectReason::EmptyId));
            continue;
        }
        let Some((lat, lon)) = parse_coordinate_pair(&record[1], &record[2]) else {
            out.errors.push(reject(RejectReason::BadCoordinate));
            continue;
        };
        let venue = Venue {
            id: id.to_owned(),
            latitude: lat,
            longitude: lon,
            category_id: record[3].trim().to_owned(),
        };
        if out.records.insert(id.to_owned(), venue).is_some() {
            out.skipped += 1;
            let warning = format!("line {line_number}: duplicate venue `{id}`, keeping the last row");
            tracing::warn!("{warning}");
            out.warnings.push(warning);
        }
    }
    Ok(out)
}

/// GeoNames feature code of a fourth-order administrative seat.
pub const ADM4_SEAT: &str = "PPLA4";
/// Cities need strictly more inhabitants than this unless they are an ADM4 seat.
pub const MIN_POPULATION: u64 = 500;

const GEONAMES_FIELDS: usize = 19;

/// GeoNames `cities*.txt` dump (19 tab-separated fields). Keeps places with
/// more than 500 inhabitants or that seat a fourth-order division.
pub fn parse_gazetteer<R: Read>(input: R) -> Result<Parsed<Vec<City>>, IngestError> {
    let mut out = Parsed::<Vec<City>>::default();
    let mut seen = std::collections::HashSet::new();
    let mut csv = reader(input, Delimiter::Tab);
    let mut record = StringRecord::new();
    while csv.read_record(&mut record)? {
        out.rows += 1;
        let line_number = line_of(&record);
        let reject = |reason| RawRecordError {
            line_number,
            reason,
        };
        if record.len() != GEONAMES_FIELDS {
            out.errors.push(reject(RejectReason::UnknownColumnCount));
            continue;
        }
        let Ok(geonames_id) = record[0].trim().parse::<u64>() else {
            let reason = if record[0].trim().is_empty() {
                RejectReason::EmptyId
            } else {
                RejectReason::MalformedNumber
            };
            out.errors.push(reject(reason));
            continue;
        };
        let Some((lat, lon)) = parse_coordinate_pair(&record[4], &record[5]) else {
            out.errors.push(reject(RejectReason::BadCoordinate));
            continue;
        };
        let population = match record[14].trim() {
            "" => None,
            p => match p.parse::<u64>() {
                Ok(p) => Some(p),
                Err(_) => {
                    out.errors.push(reject(RejectReason::MalformedNumber));
                    continue;
                }
            },
        };
        let seat = record[7].trim() == ADM4_SEAT;
        if !(seat || population.is_some_and(|p| p > MIN_POPULATION)) {
            out.skipped += 1;
            continue;
        }
        if !seen.insert(geonames_id) {
            out.skipped += 1;
            out.warnings
                .push(format!("line {line_number}: duplicate geonameid {geonames_id} ignored"));
            continue;
        }
        out.records.push(City {
            geonames_id,
            name: record[1].trim().to_owned(),
            country_code: record[8].trim().to_owned(),
            latitude: lat,
            longitude: lon,
            population,
            wikidata_id: None,
        });
    }
    Ok(out)
}

/// Two-column `category_id,term` file. Listing an id twice is fatal.
pub fn parse_mapping<R: Read>(input: R) -> Result<Parsed<CategoryMapping>, IngestError> {
    let mut out = Parsed::<CategoryMapping>::default();
    let mut terms = HashMap::new();
    let mut csv = reader(input, Delimiter::Comma);
    let mut record = StringRecord::new();
    while csv.read_record(&mut record)? {
        out.rows += 1;
        let line_number = line_of(&record);
        if out.rows == 1 && is_header(&record, &["category_id", "category", "id", "foursquare"]) {
            out.header_lines += 1;
            continue;
        }
        if record.len() != 2 {
            out.errors.push(RawRecordError {
                line_number,
                reason: RejectReason::UnknownColumnCount,
            });
            continue;
        }
        let (key, term) = (record[0].trim(), record[1].trim());
        if key.is_empty() || term.is_empty() {
            out.errors.push(RawRecordError {
                line_number,
                reason: RejectReason::EmptyId,
            });
            continue;
        }
        if !KNOWN_PREFIXES.iter().any(|p| term.starts_with(p)) {
            let warning = format!("line {line_number}: term `{term}` has an unknown prefix");
            tracing::warn!("{warning}");
            out.warnings.push(warning);
        }
        if terms.insert(key.to_owned(), term.to_owned()).is_some() {
            return Err(IngestError::DuplicateKey {
                key: key.to_owned(),
                line: line_number,
            });
        }
    }
    out.records = CategoryMapping::new(terms);
    Ok(out)
}

/// Three-column `category_id,name,parent_id` file; roots leave the parent empty.
pub fn parse_taxonomy<R: Read>(input: R) -> Result<Parsed<Taxonomy>, IngestError> {
    let mut rows = Vec::new();
    let mut out = Parsed::<Taxonomy>::default();
    let mut csv = reader(input, Delimiter::Comma);
    let mut record = StringRecord::new();
    while csv.read_record(&mut record)? {
        out.rows += 1;
        let line_number = line_of(&record);
        if out.rows == 1 && is_header(&record, &["category_id", "id"]) {
            out.header_lines += 1;
            continue;
        }
        if record.len() != 3 {
            out.errors.push(RawRecordError {
                line_number,
                reason: RejectReason::UnknownColumnCount,
            });
            continue;
        }
        let id = record[0].trim();
        if id.is_empty() {
            out.errors.push(RawRecordError {
                line_number,
                reason: RejectReason::EmptyId,
            });
            continue;
        }
        let parent = Some(record[2].trim())
            .filter(|p| !p.is_empty())
            .map(str::to_owned);
        rows.push((
            id.to_owned(),
            Category {
                name: record[1].trim().to_owned(),
                parent,
            },
        ));
    }
    out.records = Taxonomy::new(rows)?;
    Ok(out)
}

/// `name,latitude,longitude,qid` rows. Incomplete rows are skipped with a warning.
pub fn parse_wikidata_cities<R: Read>(
    input: R,
) -> Result<Parsed<Vec<WikidataCandidate>>, IngestError> {
    let mut out = Parsed::<Vec<WikidataCandidate>>::default();
    let mut csv = reader(input, Delimiter::Comma);
    let mut record = StringRecord::new();
    while csv.read_record(&mut record)? {
        out.rows += 1;
        let line_number = line_of(&record);
        if out.rows == 1 && is_header(&record, &["name", "label", "city"]) {
            out.header_lines += 1;
            continue;
        }
        if record.len() != 4 {
            out.errors.push(RawRecordError {
                line_number,
                reason: RejectReason::UnknownColumnCount,
            });
            continue;
        }
        let name = record[0].trim();
        let qid = record[3].trim();
        let coords = parse_coordinate_pair(&record[1], &record[2]);
        match coords {
            Some((latitude, longitude)) if !name.is_empty() && !qid.is_empty() => {
                out.records.push(WikidataCandidate {
                    name: name.to_owned(),
                    latitude,
                    longitude,
                    qid: qid.to_owned(),
                });
            }
            _ => {
                out.skipped += 1;
                let warning = format!("line {line_number}: incomplete Wikidata candidate skipped");
                tracing::warn!("{warning}");
                out.warnings.push(warning);
            }
        }
    }
    Ok(out)
}
