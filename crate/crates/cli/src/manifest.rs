//! JSON run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use semtrails::model::PipelineConfig;
use semtrails::pipeline::StageTiming;
use semtrails::synthgen::GenSpec;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Stage counts. `parsed - removed_total - unsegmented == emitted`, and the
/// CSV output has `emitted + 1` lines.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Counts {
    /// Non-empty check-in lines, header included.
    pub lines_read: u64,
    pub header_lines: u64,
    pub rejected: u64,
    pub parsed: u64,
    pub users: u64,
    pub removed_repeat: u64,
    pub removed_dwell: u64,
    pub removed_speed: u64,
    pub removed_unresolved: u64,
    pub removed_total: u64,
    pub unsegmented: u64,
    pub trails: u64,
    pub enriched: u64,
    pub emitted: u64,
    pub venues: u64,
    pub cities: u64,
    pub cities_linked: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub threads: usize,
    pub config: PipelineConfig,
    pub inputs: BTreeMap<&'static str, FileDigest>,
    pub outputs: BTreeMap<&'static str, FileDigest>,
    pub counts: Counts,
    pub timings: Vec<StageTiming>,
    /// High-water mark of resident memory, where the OS reports it.
    pub peak_rss_kib: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenManifest {
    pub command: &'static str,
    pub version: &'static str,
    pub spec: GenSpec,
    pub files: BTreeMap<&'static str, FileDigest>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(format!("manifest `{}`", path.display()), e))
}

/// `VmHWM` from `/proc/self/status`; `None` off Linux.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}
