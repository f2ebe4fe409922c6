//! Public identifiers, privacy truncation and the two dataset encodings.
//!
//! # CSV
//!
//! One row per check-in under [`CSV_HEADER`], LF line endings, standard
//! quoting only where a field needs it.
//!
//! # Turtle
//!
//! One subject per check-in, `<https://w3id.org/semantic-trails/checkin/{trail}/{position}>`,
//! with one triple per CSV column:
//!
//! | column            | predicate          | object                                      |
//! |-------------------|--------------------|---------------------------------------------|
//! | `trail_id`        | `st:trail`         | integer                                     |
//! | `user_id`         | `st:user`          | integer                                     |
//! | `venue_id`        | `st:venue`         | `<https://foursquare.com/v/{id}>`           |
//! | `venue_category`  | `st:category`      | string                                      |
//! | `venue_schema`    | `st:schemaCategory`| `schema:` IRI, or a string for other CURIEs |
//! | `venue_geonames`  | `st:geonames`      | `<https://sws.geonames.org/{id}/>`          |
//! | `venue_wikidata`  | `st:wikidata`      | `wd:` IRI, omitted when unlinked            |
//! | `venue_city_name` | `st:cityName`      | string                                      |
//! | `venue_country`   | `st:country`       | string                                      |
//! | `timestamp`       | `st:timestamp`     | `xsd:dateTime`                              |

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Read, Write};

use csv::{QuoteStyle, ReaderBuilder, StringRecord, Terminator, WriterBuilder};
use thiserror::Error;

use crate::enrich::SemanticTrail;
use crate::model::{CityRef, EnrichedCheckIn, Timestamp, Trail, TrailError};

pub const CSV_HEADER: &str = "trail_id,user_id,venue_id,venue_category,venue_schema,venue_geonames,venue_wikidata,venue_city_name,venue_country,timestamp";
pub const CSV_COLUMNS: usize = 10;

pub const NS_VOCAB: &str = "https://w3id.org/semantic-trails/ns#";
pub const NS_CHECKIN: &str = "https://w3id.org/semantic-trails/checkin/";
pub const NS_VENUE: &str = "https://foursquare.com/v/";
pub const NS_GEONAMES: &str = "https://sws.geonames.org/";
pub const NS_WIKIDATA: &str = "http://www.wikidata.org/entity/";
pub const NS_SCHEMA: &str = "http://schema.org/";
pub const NS_XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// Dense user numbering and the trail counter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdAssignment {
    user_map: HashMap<String, u64>,
    next_trail_id: u64,
}

impl IdAssignment {
    pub fn new() -> Self {
        Self {
            user_map: HashMap::new(),
            next_trail_id: 1,
        }
    }

    /// Number for `user`, allocating the next one on first sight.
    pub fn user(&mut self, user: &str) -> u64 {
        if let Some(&id) = self.user_map.get(user) {
            return id;
        }
        let id = self.user_map.len() as u64 + 1;
        self.user_map.insert(user.to_owned(), id);
        id
    }

    pub fn next_trail(&mut self) -> u64 {
        let id = self.next_trail_id;
        self.next_trail_id += 1;
        id
    }

    pub fn users(&self) -> usize {
        self.user_map.len()
    }

    pub fn lookup(&self, user: &str) -> Option<u64> {
        self.user_map.get(user).copied()
    }
}

/// Same as [`Timestamp::truncate_minute`].
pub fn truncate_minute(timestamp: &Timestamp) -> Timestamp {
    timestamp.truncate_minute()
}

/// Replaces user identifiers with numbers in order of first appearance,
/// numbers trails 1..N in input order and truncates every timestamp.
pub fn anonymize(
    trails: Vec<SemanticTrail>,
    gap_limit_secs: i64,
) -> Result<(Vec<Trail>, IdAssignment), TrailError> {
    let mut ids = IdAssignment::new();
    let mut out = Vec::with_capacity(trails.len());
    for trail in trails {
        let user = ids.user(&trail.user_id);
        let trail_id = ids.next_trail();
        let checkins = trail
            .checkins
            .into_iter()
            .map(|c| EnrichedCheckIn {
                trail_id,
                anon_user_id: user,
                venue_id: c.venue_id,
                category_id: c.category_id,
                schema_term: c.schema_term,
                city: c.city,
                timestamp: c.timestamp.truncate_minute(),
            })
            .collect();
        out.push(Trail::new(checkins, gap_limit_secs)?);
    }
    Ok((out, ids))
}

/// Counts bytes passed through to the inner writer.
struct Counting<W> {
    inner: W,
    bytes: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Streaming CSV writer for published rows.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<Counting<W>>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(sink: W) -> io::Result<Self> {
        let mut counting = Counting {
            inner: sink,
            bytes: 0,
        };
        counting.write_all(CSV_HEADER.as_bytes())?;
        counting.write_all(b"\n")?;
        let writer = WriterBuilder::new()
            .terminator(Terminator::Any(b'\n'))
            .quote_style(QuoteStyle::Necessary)
            .from_writer(counting);
        Ok(Self { writer })
    }

    pub fn write_trail(&mut self, trail: &Trail) -> io::Result<()> {
        for c in trail.checkins() {
            self.writer.write_record(csv_fields(c)).map_err(csv_error)?;
        }
        Ok(())
    }

    /// Flushes and returns the byte count.
    pub fn finish(self) -> io::Result<u64> {
        let counting = self
            .writer
            .into_inner()
            .map_err(|e| io::Error::other(e.to_string()))?;
        Ok(counting.bytes)
    }
}

fn csv_fields(c: &EnrichedCheckIn) -> [String; CSV_COLUMNS] {
    [
        c.trail_id.to_string(),
        c.anon_user_id.to_string(),
        c.venue_id.clone(),
        c.category_id.clone(),
        c.schema_term.clone(),
        format!("geonames:{}", c.city.geonames_id),
        c.city
            .wikidata_id
            .as_ref()
            .map(|q| format!("wd:{q}"))
            .unwrap_or_default(),
        c.city.name.clone(),
        c.city.country_code.clone(),
        c.timestamp.to_string(),
    ]
}

/// Writes the header and one row per check-in. Returns bytes written.
pub fn write_csv<W: Write>(trails: &[Trail], sink: W) -> io::Result<u64> {
    let mut csv = CsvSink::new(sink)?;
    for trail in trails {
        csv.write_trail(trail)?;
    }
    csv.finish()
}

#[derive(Debug, Error)]
pub enum StdReadError {
    #[error("unreadable input: {0}")]
    Io(#[from] io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("header is not the dataset header")]
    Header,
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
}

/// One row of a dataset file with its line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StdRow {
    pub line: u64,
    pub record: EnrichedCheckIn,
}

fn parse_row(record: &StringRecord) -> Result<EnrichedCheckIn, String> {
    if record.len() != CSV_COLUMNS {
        return Err(format!("expected {CSV_COLUMNS} fields, found {}", record.len()));
    }
    let number = |i: usize, what: &str| -> Result<u64, String> {
        record[i]
            .parse::<u64>()
            .map_err(|_| format!("{what} `{}` is not a number", &record[i]))
    };
    let trail_id = number(0, "trail_id")?;
    let anon_user_id = number(1, "user_id")?;
    let geonames_id = record[5]
        .strip_prefix("geonames:")
        .and_then(|g| g.parse::<u64>().ok())
        .ok_or_else(|| format!("venue_geonames `{}` is not geonames:<id>", &record[5]))?;
    let wikidata_id = match &record[6] {
        "" => None,
        w => Some(
            w.strip_prefix("wd:")
                .filter(|q| !q.is_empty())
                .ok_or_else(|| format!("venue_wikidata `{w}` is not wd:<id>"))?
                .to_owned(),
        ),
    };
    let timestamp = Timestamp::parse(&record[9]).map_err(|e| e.to_string())?;
    if record[2].is_empty() {
        return Err("empty venue_id".into());
    }
    Ok(EnrichedCheckIn {
        trail_id,
        anon_user_id,
        venue_id: record[2].to_owned(),
        category_id: record[3].to_owned(),
        schema_term: record[4].to_owned(),
        city: CityRef {
            geonames_id,
            name: record[7].to_owned(),
            country_code: record[8].to_owned(),
            wikidata_id,
        },
        timestamp,
    })
}

/// Reads a dataset CSV back into rows. Any malformed row is an error.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<StdRow>, StdReadError> {
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut record = StringRecord::new();
    if !reader.read_record(&mut record)? {
        return Err(StdReadError::Header);
    }
    if record.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(StdReadError::Header);
    }
    let mut rows = Vec::new();
    while reader.read_record(&mut record)? {
        let line = record.position().map_or(0, |p| p.line());
        let parsed = parse_row(&record).map_err(|reason| StdReadError::Row { line, reason })?;
        rows.push(StdRow {
            line,
            record: parsed,
        });
    }
    Ok(rows)
}

/// Groups consecutive rows with the same trail id.
pub fn group_rows(rows: &[StdRow]) -> Vec<&[StdRow]> {
    rows.chunk_by(|a, b| a.record.trail_id == b.record.trail_id)
        .collect()
}

/// Rebuilds validated trails from dataset rows.
pub fn trails_from_rows(rows: &[StdRow], gap_limit_secs: i64) -> Result<Vec<Trail>, StdReadError> {
    group_rows(rows)
        .into_iter()
        .map(|group| {
            Trail::new(group.iter().map(|r| r.record.clone()).collect(), gap_limit_secs).map_err(
                |e| StdReadError::Row {
                    line: group[0].line,
                    reason: e.to_string(),
                },
            )
        })
        .collect()
}

fn escape_literal(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for ch in text.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Percent-encodes everything outside the RFC 3986 unreserved set.
pub fn encode_path_segment(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for byte in text.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(byte as char)
            }
            b => {
                let _ = write!(out, "%{b:02X}");
            }
        }
    }
    out
}

/// `schema:` terms become IRIs; terms with any other prefix stay strings.
fn schema_object(term: &str) -> String {
    match term.strip_prefix("schema:") {
        Some(local) => format!("<{NS_SCHEMA}{}>", encode_path_segment(local)),
        None => escape_literal(term),
    }
}

fn turtle_prefixes() -> String {
    format!(
        "@prefix st: <{NS_VOCAB}> .\n\
         @prefix schema: <{NS_SCHEMA}> .\n\
         @prefix wd: <{NS_WIKIDATA}> .\n\
         @prefix xsd: <{NS_XSD}> .\n"
    )
}

/// Writes the Turtle encoding. Subjects follow trail order, then position.
pub fn write_turtle<W: Write>(trails: &[Trail], sink: W) -> io::Result<u64> {
    let mut out = Counting {
        inner: io::BufWriter::new(sink),
        bytes: 0,
    };
    out.write_all(turtle_prefixes().as_bytes())?;
    let mut block = String::new();
    for trail in trails {
        for (position, c) in trail.checkins().iter().enumerate() {
            block.clear();
            let _ = write!(
                block,
                "\n<{NS_CHECKIN}{}/{}>\n    st:trail {} ;\n    st:user {} ;\n    st:venue <{NS_VENUE}{}> ;\n    st:category {} ;\n    st:schemaCategory {} ;\n    st:geonames <{NS_GEONAMES}{}/> ;\n",
                c.trail_id,
                position + 1,
                c.trail_id,
                c.anon_user_id,
                encode_path_segment(&c.venue_id),
                escape_literal(&c.category_id),
                schema_object(&c.schema_term),
                c.city.geonames_id,
            );
            if let Some(q) = &c.city.wikidata_id {
                let _ = writeln!(block, "    st:wikidata <{NS_WIKIDATA}{}> ;", encode_path_segment(q));
            }
            let _ = write!(
                block,
                "    st:cityName {} ;\n    st:country {} ;\n    st:timestamp \"{}\"^^xsd:dateTime .\n",
                escape_literal(&c.city.name),
                escape_literal(&c.city.country_code),
                c.timestamp,
            );
            out.write_all(block.as_bytes())?;
        }
    }
    out.flush()?;
    Ok(out.bytes)
}
