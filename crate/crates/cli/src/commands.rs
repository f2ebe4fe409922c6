use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use semtrails::analytics::{build_reports, Populations};
use semtrails::emit::{read_csv, trails_from_rows, write_csv, write_turtle, StdReadError, StdRow};
use semtrails::ingest::{
    parse_checkins, parse_gazetteer, parse_mapping, parse_taxonomy, parse_venues,
    parse_wikidata_cities, CheckinFormat, IngestError, Parsed,
};
use semtrails::model::Trail;
use semtrails::pipeline::{self, Inputs, PipelineError, StageTiming};
use semtrails::synthgen::{generate, GenError, GenSpec};
use semtrails::validate::validate_rows;
use sha2::{Digest, Sha256};

use crate::manifest::{peak_rss_kib, write_json, BuildManifest, Counts, FileDigest, GenManifest};
use crate::{open_input, BuildArgs, CliError, GenArgs, Hashing, StatsArgs, ValidateArgs};

const SHOWN_REJECTS: usize = 5;

fn digest(path: &Path, hashing: Hashing<BufReader<File>>) -> FileDigest {
    let (sha256, bytes) = hashing.finish();
    FileDigest {
        path: path.display().to_string(),
        sha256,
        bytes,
    }
}

/// Parses one input file, recording its digest. Rejected rows are logged.
fn parse_file<T>(
    path: &Path,
    flag: &'static str,
    digests: &mut BTreeMap<&'static str, FileDigest>,
    parse: impl FnOnce(&mut Hashing<BufReader<File>>) -> Result<Parsed<T>, IngestError>,
) -> Result<Parsed<T>, CliError> {
    let mut reader = open_input(path, flag)?;
    let parsed = parse(&mut reader).map_err(|e| CliError::ingest(&format!("ingest {flag}"), e))?;
    // anything a parser left unread still belongs in the digest
    io::copy(&mut reader, &mut io::sink()).map_err(|e| CliError::io(flag, e))?;
    for e in parsed.errors.iter().take(SHOWN_REJECTS) {
        tracing::warn!("{flag}: rejected {e}");
    }
    if parsed.errors.len() > SHOWN_REJECTS {
        tracing::warn!("{flag}: {} rows rejected in total", parsed.errors.len());
    }
    digests.insert(flag.trim_start_matches("--"), digest(path, reader));
    Ok(parsed)
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Config(e) => CliError::Usage(format!("config: {e}")),
        PipelineError::Ingest(e) => CliError::ingest("ingest", e),
        PipelineError::Index(e) => CliError::Parse(format!("enrich: {e}")),
        PipelineError::Enrich(e) => CliError::Parse(format!("enrich: {e}")),
        PipelineError::Trail(e) => CliError::Failed(format!("emit: {e}")),
    }
}

fn require_file(path: &Path, flag: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{flag}: no such file `{}`", path.display())))
    }
}

fn create_output(path: &Path, what: &str) -> Result<Hashing<File>, CliError> {
    File::create(path)
        .map(Hashing::new)
        .map_err(|e| CliError::io(format!("{what} `{}`", path.display()), e))
}

fn output_digest(path: &Path, hashing: Hashing<File>) -> FileDigest {
    let (sha256, bytes) = hashing.finish();
    FileDigest {
        path: path.display().to_string(),
        sha256,
        bytes,
    }
}

pub fn build(args: &BuildArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    if args.out_csv.is_none() && args.out_ttl.is_none() {
        return Err(CliError::Usage(
            "nothing to write: give --out-csv, --out-ttl or both".into(),
        ));
    }
    for (path, flag) in [
        (&args.checkins, "--checkins"),
        (&args.venues, "--venues"),
        (&args.cities, "--cities"),
        (&args.mapping, "--mapping"),
        (&args.taxonomy, "--taxonomy"),
    ] {
        require_file(path, flag)?;
    }
    if let Some(path) = &args.wikidata {
        require_file(path, "--wikidata")?;
    }
    let threads = args.threads.map(usize::from).unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Failed(format!("thread pool: {e}")))?;
    pool.install(|| build_with(args, config, threads))
}

fn build_with(
    args: &BuildArgs,
    config: semtrails::model::PipelineConfig,
    threads: usize,
) -> Result<(), CliError> {
    let started = Instant::now();
    let mut inputs_digest = BTreeMap::new();
    let format = CheckinFormat {
        delimiter: args.checkins_delimiter.into(),
        has_header: args.checkins_header,
        ..CheckinFormat::default()
    };
    let checkins = parse_file(&args.checkins, "--checkins", &mut inputs_digest, |r| {
        parse_checkins(r, format)
    })?;
    let venues = parse_file(&args.venues, "--venues", &mut inputs_digest, |r| {
        parse_venues(r, args.venues_delimiter.into())
    })?;
    let cities = parse_file(&args.cities, "--cities", &mut inputs_digest, |r| parse_gazetteer(r))?;
    let mapping = parse_file(&args.mapping, "--mapping", &mut inputs_digest, |r| parse_mapping(r))?;
    let taxonomy =
        parse_file(&args.taxonomy, "--taxonomy", &mut inputs_digest, |r| parse_taxonomy(r))?;
    let wikidata = match &args.wikidata {
        Some(path) => parse_file(path, "--wikidata", &mut inputs_digest, |r| {
            parse_wikidata_cities(r)
        })?,
        None => Parsed::default(),
    };
    let mut timings = vec![StageTiming {
        stage: "ingest",
        seconds: started.elapsed().as_secs_f64(),
    }];

    let mut counts = Counts {
        lines_read: checkins.rows as u64,
        header_lines: checkins.header_lines as u64,
        rejected: checkins.errors.len() as u64,
        parsed: checkins.records.len() as u64,
        venues: venues.records.len() as u64,
        cities: cities.records.len() as u64,
        ..Counts::default()
    };
    let inputs = Inputs {
        checkins,
        venues,
        cities,
        mapping,
        taxonomy,
        wikidata,
    };
    let output = pipeline::run(inputs, &config).map_err(pipeline_error)?;
    timings.extend(output.timings.iter().cloned());

    let emit_started = Instant::now();
    let mut outputs = BTreeMap::new();
    if let Some(path) = &args.out_csv {
        let mut sink = create_output(path, "--out-csv")?;
        write_csv(&output.trails, &mut sink)
            .and_then(|_| sink.flush())
            .map_err(|e| CliError::io(format!("emit --out-csv `{}`", path.display()), e))?;
        outputs.insert("csv", output_digest(path, sink));
    }
    if let Some(path) = &args.out_ttl {
        let mut sink = create_output(path, "--out-ttl")?;
        write_turtle(&output.trails, &mut sink)
            .and_then(|_| sink.flush())
            .map_err(|e| CliError::io(format!("emit --out-ttl `{}`", path.display()), e))?;
        outputs.insert("ttl", output_digest(path, sink));
    }
    timings.push(StageTiming {
        stage: "emit",
        seconds: emit_started.elapsed().as_secs_f64(),
    });

    let report = output.report;
    let emitted = output.emitted_checkins();
    counts.users = output.users;
    counts.removed_repeat = report.removed_repeat;
    counts.removed_dwell = report.removed_dwell;
    counts.removed_speed = report.removed_speed;
    counts.removed_unresolved = report.removed_unresolved;
    counts.removed_total = report.removed_total;
    counts.unsegmented = output.unsegmented;
    counts.trails = output.trails.len() as u64;
    counts.enriched = emitted;
    counts.emitted = emitted;
    counts.cities_linked = output.cities_linked as u64;
    if counts.parsed - counts.removed_total - counts.unsegmented != counts.emitted {
        return Err(CliError::Failed(format!(
            "stage counts do not reconcile: {counts:?}"
        )));
    }

    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let first = args.out_csv.as_ref().or(args.out_ttl.as_ref()).expect("an output");
        let mut name = first.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    });
    let manifest = BuildManifest {
        command: "build",
        version: env!("CARGO_PKG_VERSION"),
        threads,
        config,
        inputs: inputs_digest,
        outputs,
        counts,
        timings,
        peak_rss_kib: peak_rss_kib(),
    };
    write_json(&manifest_path, &manifest)?;
    eprintln!(
        "built {} trails with {} check-ins from {} parsed ({} rejected) in {:.2} s",
        manifest.counts.trails,
        manifest.counts.emitted,
        manifest.counts.parsed,
        manifest.counts.rejected,
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn dataset_error(path: &Path, e: StdReadError) -> CliError {
    match e {
        StdReadError::Io(e) => CliError::io(format!("--input `{}`", path.display()), e),
        StdReadError::Csv(e) if e.is_io_error() => {
            CliError::Io(format!("--input `{}`: {e}", path.display()))
        }
        other => CliError::Parse(format!("--input `{}`: {other}", path.display())),
    }
}

fn read_dataset(path: &Path) -> Result<Vec<StdRow>, CliError> {
    let reader = open_input(path, "--input")?;
    read_csv(reader).map_err(|e| dataset_error(path, e))
}

pub fn stats(args: &StatsArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    require_file(&args.gazetteer, "--gazetteer")?;
    let rows = read_dataset(&args.input)?;
    let trails: Vec<Trail> =
        trails_from_rows(&rows, config.gap_limit_secs).map_err(|e| dataset_error(&args.input, e))?;

    let cities = parse_gazetteer(open_input(&args.gazetteer, "--gazetteer")?)
        .map_err(|e| CliError::ingest("--gazetteer", e))?;
    let by_city: HashMap<u64, u64> = cities
        .records
        .iter()
        .filter_map(|c| c.population.map(|p| (c.geonames_id, p)))
        .collect();
    let populations = Populations::new(by_city, config.big_city_threshold);

    let reports = build_reports(&trails, &populations, args.top);
    fs::create_dir_all(&args.report_dir)
        .map_err(|e| CliError::io(format!("--report-dir `{}`", args.report_dir.display()), e))?;
    for report in &reports {
        let path = args.report_dir.join(report.file_name());
        fs::write(&path, &report.body)
            .map_err(|e| CliError::io(format!("report `{}`", path.display()), e))?;
    }
    eprintln!(
        "wrote {} reports for {} trails to {}",
        reports.len(),
        trails.len(),
        args.report_dir.display()
    );
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let config = args.config.resolve()?;
    let venues = match &args.venues {
        Some(path) => {
            let reader = open_input(path, "--venues")?;
            let parsed = parse_venues(reader, args.venues_delimiter.into())
                .map_err(|e| CliError::ingest("--venues", e))?;
            Some(parsed.records)
        }
        None => None,
    };
    let rows = read_dataset(&args.input)?;
    let violations = validate_rows(&rows, &config, venues.as_ref());
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for v in &violations {
        writeln!(out, "{v}").map_err(|e| CliError::io("stdout", e))?;
    }
    if violations.is_empty() {
        eprintln!("{} rows, no violations", rows.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{} violations in {} rows",
            violations.len(),
            rows.len()
        )))
    }
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let spec = GenSpec {
        seed: args.seed,
        n_users: args.users,
        n_venues: args.venues,
        n_cities: args.cities,
        n_checkins: args.checkins,
        min_gap_secs: args.min_gap_secs,
        max_gap_secs: args.max_gap_secs,
        split_rate: args.split_rate,
        repeat_rate: args.repeat_rate,
        dwell_rate: args.dwell_rate,
        speed_rate: args.speed_rate,
    };
    let corpus = generate(&spec).map_err(|e: GenError| CliError::Usage(format!("gen: {e}")))?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::io(format!("--out-dir `{}`", args.out_dir.display()), e))?;
    let mut files = BTreeMap::new();
    for (name, content) in corpus.files() {
        let path = args.out_dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(format!("`{}`", path.display()), e))?;
        files.insert(
            name,
            FileDigest {
                path: name.to_owned(),
                sha256: format!("{:x}", Sha256::digest(content.as_bytes())),
                bytes: content.len() as u64,
            },
        );
    }
    let manifest = GenManifest {
        command: "gen",
        version: env!("CARGO_PKG_VERSION"),
        spec,
        files,
    };
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    eprintln!(
        "generated {} check-ins for {} users in {}",
        args.checkins,
        args.users,
        args.out_dir.display()
    );
    Ok(())
}
