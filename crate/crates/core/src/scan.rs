//! Wireless scan text parsing, SSID filtering and resample aggregation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::geometry::Point;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("scan text is not valid UTF-8")]
    InvalidUtf8,
    #[error("line {line}: malformed cell: {reason}")]
    MalformedCell { line: usize, reason: String },
    #[error("line {line}: duplicate MAC {mac} in one scan")]
    DuplicateMac { line: usize, mac: String },
    #[error("line {line}: signal level not expressed in dBm: {text:?}")]
    BadSignalUnit { line: usize, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("no snapshots to aggregate")]
    EmptyInput,
    #[error("snapshots carry different location labels")]
    MixedLocations,
    #[error("snapshot {index} lists MAC {mac} twice")]
    DuplicateMac { index: usize, mac: String },
}

/// Uppercases and validates a colon-separated 6-octet MAC address.
pub fn canonical_mac(raw: &str) -> Option<String> {
    let mac = raw.trim().to_ascii_uppercase();
    let octets: Vec<&str> = mac.split(':').collect();
    let ok = octets.len() == 6
        && octets
            .iter()
            .all(|o| o.len() == 2 && o.bytes().all(|b| b.is_ascii_hexdigit()));
    ok.then_some(mac)
}

/// One access point as seen in one scan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScanEntry {
    pub mac: String,
    pub ssid: String,
    /// Signal level in dBm, always <= 0.
    pub rssi: i32,
}

impl ScanEntry {
    pub fn new(mac: &str, ssid: &str, rssi: i32) -> Option<Self> {
        let mac = canonical_mac(mac)?;
        (rssi <= 0).then(|| Self {
            mac,
            ssid: ssid.to_string(),
            rssi,
        })
    }
}

/// All entries from one scan, optionally labeled with the ground-truth location.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanSnapshot<T> {
    pub entries: Vec<ScanEntry>,
    pub location: Option<Point<T>>,
}

impl<T: Scalar> ScanSnapshot<T> {
    pub fn new(entries: Vec<ScanEntry>, location: Option<Point<T>>) -> Self {
        Self { entries, location }
    }

    pub fn rssi_of(&self, mac: &str) -> Option<i32> {
        self.entries.iter().find(|e| e.mac == mac).map(|e| e.rssi)
    }

    /// Returns the first MAC that appears more than once, if any.
    pub fn duplicate_mac(&self) -> Option<&str> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .find(|e| !seen.insert(e.mac.as_str()))
            .map(|e| e.mac.as_str())
    }
}

fn cell_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*Cell\s+\d+\s+-\s+Address:\s*(\S*)\s*$").unwrap())
}

fn essid_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^\s*ESSID:"(.*)"\s*$"#).unwrap())
}

fn signal_dbm() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Signal level=(-?\d+)\s*dBm\b").unwrap())
}

struct PendingCell {
    line: usize,
    mac: String,
    ssid: Option<String>,
    rssi: Option<i32>,
}

impl PendingCell {
    fn finish(self) -> Result<ScanEntry, ScanError> {
        let missing = |field: &str| ScanError::MalformedCell {
            line: self.line,
            reason: format!("missing {field}"),
        };
        let ssid = self.ssid.clone().ok_or_else(|| missing("ESSID"))?;
        let rssi = self.rssi.ok_or_else(|| missing("Signal level"))?;
        Ok(ScanEntry {
            mac: self.mac,
            ssid,
            rssi,
        })
    }
}

/// Parses `iwlist <iface> scan` style output into entries, in document order.
///
/// A cell starts at `Cell NN - Address: <MAC>`; inside it only the
/// `ESSID:"..."` and `Signal level=<int> dBm` lines are read. Everything else
/// (including text before the first cell) is ignored.
pub fn parse_scan_text(text: &str) -> Result<Vec<ScanEntry>, ScanError> {
    let mut entries: Vec<ScanEntry> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut pending: Option<PendingCell> = None;

    let mut push = |cell: PendingCell, entries: &mut Vec<ScanEntry>| -> Result<(), ScanError> {
        let line = cell.line;
        let entry = cell.finish()?;
        if !seen.insert(entry.mac.clone()) {
            return Err(ScanError::DuplicateMac {
                line,
                mac: entry.mac,
            });
        }
        entries.push(entry);
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(caps) = cell_header().captures(raw) {
            if let Some(cell) = pending.take() {
                push(cell, &mut entries)?;
            }
            let mac = canonical_mac(&caps[1]).ok_or_else(|| ScanError::MalformedCell {
                line,
                reason: format!("invalid MAC address {:?}", &caps[1]),
            })?;
            pending = Some(PendingCell {
                line,
                mac,
                ssid: None,
                rssi: None,
            });
            continue;
        }
        let Some(cell) = pending.as_mut() else {
            continue;
        };
        if let Some(caps) = essid_line().captures(raw) {
            cell.ssid.get_or_insert_with(|| caps[1].to_string());
        } else if raw.contains("Signal level=") {
            let caps = signal_dbm()
                .captures(raw)
                .ok_or_else(|| ScanError::BadSignalUnit {
                    line,
                    text: raw.trim().to_string(),
                })?;
            let rssi: i32 = caps[1].parse().map_err(|_| ScanError::MalformedCell {
                line,
                reason: format!("signal level out of range: {}", &caps[1]),
            })?;
            if rssi > 0 {
                return Err(ScanError::MalformedCell {
                    line,
                    reason: format!("positive signal level {rssi} dBm"),
                });
            }
            cell.rssi.get_or_insert(rssi);
        }
    }
    if let Some(cell) = pending.take() {
        push(cell, &mut entries)?;
    }
    Ok(entries)
}

pub fn parse_scan_bytes(bytes: &[u8]) -> Result<Vec<ScanEntry>, ScanError> {
    let text = std::str::from_utf8(bytes).map_err(|_| ScanError::InvalidUtf8)?;
    parse_scan_text(text)
}

/// Renders entries in the same layout the parser reads.
pub fn render_scan_text(interface: &str, entries: &[ScanEntry]) -> String {
    let mut out = format!("{interface}     Scan completed :\n");
    for (i, e) in entries.iter().enumerate() {
        let quality = (e.rssi + 110).clamp(0, 70);
        let _ = writeln!(out, "          Cell {:02} - Address: {}", i + 1, e.mac);
        let _ = writeln!(out, "                    Channel:6");
        let _ = writeln!(
            out,
            "                    Quality={quality}/70  Signal level={} dBm",
            e.rssi
        );
        let _ = writeln!(out, "                    Encryption key:on");
        let _ = writeln!(out, "                    ESSID:\"{}\"", e.ssid);
    }
    out
}

pub fn filter_by_ssid(entries: &[ScanEntry], allowlist: &BTreeSet<String>) -> Vec<ScanEntry> {
    entries
        .iter()
        .filter(|e| allowlist.contains(&e.ssid))
        .cloned()
        .collect()
}

/// Merges repeated scans taken at one location.
///
/// Each MAC's RSSI becomes the median of the scans where it appeared (the
/// lower middle value for even counts). Output entries are sorted by MAC so
/// the result does not depend on snapshot order.
pub fn aggregate_resamples<T: Scalar>(
    snapshots: &[ScanSnapshot<T>],
) -> Result<ScanSnapshot<T>, AggregateError> {
    let first = snapshots.first().ok_or(AggregateError::EmptyInput)?;
    if snapshots.iter().any(|s| s.location != first.location) {
        return Err(AggregateError::MixedLocations);
    }
    let mut per_mac: BTreeMap<&str, (Vec<i32>, &str)> = BTreeMap::new();
    for (index, snap) in snapshots.iter().enumerate() {
        if let Some(mac) = snap.duplicate_mac() {
            return Err(AggregateError::DuplicateMac {
                index,
                mac: mac.to_string(),
            });
        }
        for e in &snap.entries {
            let slot = per_mac.entry(&e.mac).or_insert((Vec::new(), &e.ssid));
            slot.0.push(e.rssi);
            if e.ssid.as_str() < slot.1 {
                slot.1 = &e.ssid;
            }
        }
    }
    let entries = per_mac
        .into_iter()
        .map(|(mac, (mut values, ssid))| {
            values.sort_unstable();
            ScanEntry {
                mac: mac.to_string(),
                ssid: ssid.to_string(),
                rssi: values[(values.len() - 1) / 2],
            }
        })
        .collect();
    Ok(ScanSnapshot {
        entries,
        location: first.location,
    })
}

/// A producer of raw scan text. Live radio access would implement this; the
/// crate ships a file-replay source and the simulator's scan renderer.
pub trait ScanTextSource {
    type Error: std::error::Error + Send + Sync + 'static;

    /// Next scan's text, or `None` when the source is exhausted.
    fn next_scan(&mut self) -> Result<Option<String>, Self::Error>;
}

/// Replays previously captured scan files in a fixed order.
#[derive(Debug, Clone)]
pub struct FileReplaySource {
    files: Vec<PathBuf>,
    cursor: usize,
}

impl FileReplaySource {
    pub fn new(files: Vec<PathBuf>) -> Self {
        Self { files, cursor: 0 }
    }

    /// All regular files in `dir`, sorted by name.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                files.push(entry.path());
            }
        }
        files.sort();
        Ok(Self::new(files))
    }

    pub fn current_path(&self) -> Option<&Path> {
        self.cursor
            .checked_sub(1)
            .and_then(|i| self.files.get(i))
            .map(PathBuf::as_path)
    }
}

impl ScanTextSource for FileReplaySource {
    type Error = std::io::Error;

    fn next_scan(&mut self) -> Result<Option<String>, Self::Error> {
        let Some(path) = self.files.get(self.cursor) else {
            return Ok(None);
        };
        self.cursor += 1;
        std::fs::read_to_string(path).map(Some)
    }
}
