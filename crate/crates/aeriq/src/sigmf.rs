//! SigMF recordings of segmented I/Q captures and GPS tracks.
//!
//! A recording is the usual SigMF pair: a JSON metadata file
//! (`.sigmf-meta`) and a raw little-endian data file (`.sigmf-data`).
//! I/Q captures use the `cf64_le` datatype with one SigMF capture per
//! recorded segment, so a duty-cycled recording (short segments on a
//! fixed period) stays in one file pair with per-segment timestamps.
//! GPS tracks ride in the same container as `rf64_le` rows of
//! `(time_utc, latitude_deg, longitude_deg, altitude_m)`, convertible
//! to and from the plain CSV the logger produces.
//!
//! Keys outside the SigMF core namespace use the `aeriq:` extension
//! prefix; unknown keys are preserved across a read/write round trip.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GpsFix;

/// SigMF datatype of I/Q recordings: interleaved little-endian f64 I/Q.
pub const DATATYPE_IQ: &str = "cf64_le";

/// SigMF datatype of GPS tracks: little-endian f64 rows.
pub const DATATYPE_GPS: &str = "rf64_le";

/// `core:version` written into new recordings.
pub const SIGMF_VERSION: &str = "1.0.0";

/// Header line of the GPS logger CSV schema.
pub const GPS_CSV_HEADER: &str = "time_utc,latitude_deg,longitude_deg,altitude_m";

/// Column names stored in the `aeriq:gps_fields` extension of GPS
/// recordings.
pub const GPS_FIELDS: [&str; 4] = ["time_utc", "latitude_deg", "longitude_deg", "altitude_m"];

/// Errors from recording and track I/O.
#[derive(Debug, Error)]
pub enum SigmfError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: metadata is not valid JSON at line {line}, column {column} (byte {offset}): {detail}")]
    MetaParse {
        path: PathBuf,
        line: usize,
        column: usize,
        offset: usize,
        detail: String,
    },
    #[error("unsupported datatype {got:?}, expected {expected:?}")]
    UnsupportedDatatype { got: String, expected: &'static str },
    #[error("metadata has no core:sample_rate")]
    MissingSampleRate,
    #[error("capture {capture} has no core:datetime")]
    MissingDatetime { capture: usize },
    #[error("no center frequency for capture {capture}: neither core:frequency nor aeriq:center_frequency is set")]
    MissingFrequency { capture: usize },
    #[error("capture {capture} datetime {value:?} is not ISO 8601")]
    BadDatetime { capture: usize, value: String },
    #[error("timestamp {t} is outside the representable datetime range")]
    TimestampRange { t: f64 },
    #[error("metadata lists no captures")]
    NoCaptures,
    #[error("capture {index} starts at sample {start}, not after the previous capture at {prev}")]
    CaptureOrder { index: usize, start: u64, prev: u64 },
    #[error("capture {index} starts at sample {start} but the data file holds {total} samples")]
    CaptureBounds {
        index: usize,
        start: u64,
        total: u64,
    },
    #[error("data file holds {bytes} bytes, not a multiple of the {item_bytes}-byte item size")]
    DataSize { bytes: u64, item_bytes: u64 },
    #[error("nothing to write: the segment list is empty")]
    NoSegments,
    #[error("segments are inconsistent: {detail}")]
    InconsistentSegments { detail: String },
    #[error("{path}:{line}: {detail}")]
    CsvSchema {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{path}:{line}: time_utc does not increase")]
    CsvOrder { path: PathBuf, line: usize },
    #[error("GPS recording declares fields {got:?}, expected {expected:?}")]
    GpsFields {
        got: Vec<String>,
        expected: Vec<String>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SigmfError + '_ {
    move |source| SigmfError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// The `global` object of a SigMF metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfGlobal {
    #[serde(rename = "core:datatype")]
    pub datatype: String,
    #[serde(
        rename = "core:sample_rate",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub sample_rate: Option<f64>,
    #[serde(rename = "core:version")]
    pub version: String,
    #[serde(
        rename = "core:description",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub description: Option<String>,
    /// Center frequency of the capture in Hz (extension key, applies to
    /// every capture unless one carries its own `core:frequency`).
    #[serde(
        rename = "aeriq:center_frequency",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub center_frequency: Option<f64>,
    /// Column names of GPS rows when the datatype is [`DATATYPE_GPS`].
    #[serde(
        rename = "aeriq:gps_fields",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub gps_fields: Option<Vec<String>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// One entry of the `captures` array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfCapture {
    #[serde(rename = "core:sample_start")]
    pub sample_start: u64,
    #[serde(
        rename = "core:frequency",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub frequency: Option<f64>,
    #[serde(
        rename = "core:datetime",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub datetime: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// A parsed SigMF metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmfMeta {
    pub global: SigmfGlobal,
    pub captures: Vec<SigmfCapture>,
    #[serde(default)]
    pub annotations: Vec<serde_json::Value>,
}

/// One recorded I/Q segment at a known time and tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct IqSegment {
    /// Position of the segment within the recording, 0-based.
    pub segment_index: usize,
    /// UTC seconds at the segment's first sample.
    pub capture_time: f64,
    pub sample_rate: f64,
    pub center_frequency: f64,
    pub samples: Vec<Complex64>,
}

/// Derives the `.sigmf-meta`/`.sigmf-data` pair for a base path; a base
/// that already carries one of the two extensions is normalized first.
pub fn recording_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stripped = match base.extension().and_then(|e| e.to_str()) {
        Some("sigmf-meta") | Some("sigmf-data") => base.with_extension(""),
        _ => base.to_path_buf(),
    };
    let mut meta = stripped.clone().into_os_string();
    meta.push(".sigmf-meta");
    let mut data = stripped.into_os_string();
    data.push(".sigmf-data");
    (PathBuf::from(meta), PathBuf::from(data))
}

/// Formats UTC seconds as ISO 8601 with microsecond precision.
pub fn unix_seconds_to_iso8601(t: f64) -> Result<String, SigmfError> {
    let micros = (t * 1e6).round();
    if !micros.is_finite() || micros.abs() > 9.2e18 {
        return Err(SigmfError::TimestampRange { t });
    }
    let dt = DateTime::<Utc>::from_timestamp_micros(micros as i64)
        .ok_or(SigmfError::TimestampRange { t })?;
    Ok(dt.format("%Y-%m-%dT%H:%M:%S%.6fZ").to_string())
}

/// Parses an ISO 8601 timestamp back to UTC seconds (microsecond
/// resolution).
pub fn iso8601_to_unix_seconds(s: &str) -> Option<f64> {
    let dt = DateTime::parse_from_rfc3339(s).ok()?;
    Some(dt.timestamp_micros() as f64 * 1e-6)
}

fn parse_meta(path: &Path, text: &str) -> Result<SigmfMeta, SigmfError> {
    serde_json::from_str(text).map_err(|e| {
        let (line, column) = (e.line(), e.column());
        let offset = text
            .split_inclusive('\n')
            .take(line.saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + column.saturating_sub(1);
        SigmfError::MetaParse {
            path: path.to_path_buf(),
            line,
            column,
            offset,
            detail: e.to_string(),
        }
    })
}

/// Reads a SigMF metadata file.
pub fn read_meta(meta_path: &Path) -> Result<SigmfMeta, SigmfError> {
    let text = fs::read_to_string(meta_path).map_err(io_err(meta_path))?;
    parse_meta(meta_path, &text)
}

/// Writes a SigMF metadata file (pretty-printed, trailing newline).
pub fn write_meta(meta_path: &Path, meta: &SigmfMeta) -> Result<(), SigmfError> {
    let mut text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    text.push('\n');
    fs::write(meta_path, text).map_err(io_err(meta_path))
}

fn decode_iq(bytes: &[u8]) -> Vec<Complex64> {
    bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect()
}

fn decode_f64(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Reads an I/Q recording into per-capture segments.
///
/// The metadata must declare [`DATATYPE_IQ`], a sample rate, and one
/// capture per segment with `core:datetime` set; the center frequency
/// comes from each capture's `core:frequency` or the global
/// `aeriq:center_frequency`.
pub fn read_recording(
    meta_path: &Path,
    data_path: &Path,
) -> Result<(SigmfMeta, Vec<IqSegment>), SigmfError> {
    let meta = read_meta(meta_path)?;
    if meta.global.datatype != DATATYPE_IQ {
        return Err(SigmfError::UnsupportedDatatype {
            got: meta.global.datatype.clone(),
            expected: DATATYPE_IQ,
        });
    }
    let sample_rate = meta
        .global
        .sample_rate
        .ok_or(SigmfError::MissingSampleRate)?;
    if meta.captures.is_empty() {
        return Err(SigmfError::NoCaptures);
    }

    let bytes = fs::read(data_path).map_err(io_err(data_path))?;
    if bytes.len() % 16 != 0 {
        return Err(SigmfError::DataSize {
            bytes: bytes.len() as u64,
            item_bytes: 16,
        });
    }
    let total = (bytes.len() / 16) as u64;

    let mut segments = Vec::with_capacity(meta.captures.len());
    for (index, capture) in meta.captures.iter().enumerate() {
        if index > 0 {
            let prev = meta.captures[index - 1].sample_start;
            if capture.sample_start <= prev {
                return Err(SigmfError::CaptureOrder {
                    index,
                    start: capture.sample_start,
                    prev,
                });
            }
        }
        if capture.sample_start >= total {
            return Err(SigmfError::CaptureBounds {
                index,
                start: capture.sample_start,
                total,
            });
        }
        let end = meta
            .captures
            .get(index + 1)
            .map(|next| next.sample_start.min(total))
            .unwrap_or(total);
        let datetime = capture
            .datetime
            .as_deref()
            .ok_or(SigmfError::MissingDatetime { capture: index })?;
        let capture_time =
            iso8601_to_unix_seconds(datetime).ok_or_else(|| SigmfError::BadDatetime {
                capture: index,
                value: datetime.to_string(),
            })?;
        let center_frequency = capture
            .frequency
            .or(meta.global.center_frequency)
            .ok_or(SigmfError::MissingFrequency { capture: index })?;
        segments.push(IqSegment {
            segment_index: index,
            capture_time,
            sample_rate,
            center_frequency,
            samples: decode_iq(&bytes[capture.sample_start as usize * 16..end as usize * 16]),
        });
    }
    Ok((meta, segments))
}

/// Writes segments as one SigMF recording under `base`, returning the
/// `(meta, data)` paths.
///
/// All segments must share a sample rate and center frequency and have
/// strictly increasing capture times.
pub fn write_recording(
    base: &Path,
    segments: &[IqSegment],
    description: Option<&str>,
) -> Result<(PathBuf, PathBuf), SigmfError> {
    if segments.is_empty() {
        return Err(SigmfError::NoSegments);
    }
    let rate = segments[0].sample_rate;
    let freq = segments[0].center_frequency;
    for (i, seg) in segments.iter().enumerate() {
        if seg.samples.is_empty() {
            return Err(SigmfError::InconsistentSegments {
                detail: format!("segment {i} is empty"),
            });
        }
        if seg.sample_rate != rate {
            return Err(SigmfError::InconsistentSegments {
                detail: format!(
                    "segment {i} sample rate {} differs from {}",
                    seg.sample_rate, rate
                ),
            });
        }
        if seg.center_frequency != freq {
            return Err(SigmfError::InconsistentSegments {
                detail: format!(
                    "segment {i} center frequency {} differs from {}",
                    seg.center_frequency, freq
                ),
            });
        }
        if i > 0 && seg.capture_time <= segments[i - 1].capture_time {
            return Err(SigmfError::InconsistentSegments {
                detail: format!("segment {i} capture time does not increase"),
            });
        }
    }

    let mut captures = Vec::with_capacity(segments.len());
    let mut data = Vec::new();
    let mut sample_start = 0u64;
    for seg in segments {
        captures.push(SigmfCapture {
            sample_start,
            frequency: Some(freq),
            datetime: Some(unix_seconds_to_iso8601(seg.capture_time)?),
            extra: BTreeMap::new(),
        });
        for s in &seg.samples {
            data.extend_from_slice(&s.re.to_le_bytes());
            data.extend_from_slice(&s.im.to_le_bytes());
        }
        sample_start += seg.samples.len() as u64;
    }
    let meta = SigmfMeta {
        global: SigmfGlobal {
            datatype: DATATYPE_IQ.to_string(),
            sample_rate: Some(rate),
            version: SIGMF_VERSION.to_string(),
            description: description.map(str::to_string),
            center_frequency: Some(freq),
            gps_fields: None,
            extra: BTreeMap::new(),
        },
        captures,
        annotations: Vec::new(),
    };

    let (meta_path, data_path) = recording_paths(base);
    write_meta(&meta_path, &meta)?;
    fs::write(&data_path, data).map_err(io_err(&data_path))?;
    Ok((meta_path, data_path))
}

/// Reads the GPS logger CSV (`time_utc,latitude_deg,longitude_deg,altitude_m`).
pub fn read_gps_csv(path: &Path) -> Result<Vec<GpsFix>, SigmfError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| SigmfError::CsvSchema {
            path: path.to_path_buf(),
            line: 1,
            detail: "empty file, expected a header row".to_string(),
        })?
        .1;
    if header.trim() != GPS_CSV_HEADER {
        return Err(SigmfError::CsvSchema {
            path: path.to_path_buf(),
            line: 1,
            detail: format!("header {header:?}, expected {GPS_CSV_HEADER:?}"),
        });
    }
    let mut fixes = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(SigmfError::CsvSchema {
                path: path.to_path_buf(),
                line: line_no,
                detail: format!("{} fields, expected 4", fields.len()),
            });
        }
        let mut values = [0.0f64; 4];
        for (v, (field, name)) in values.iter_mut().zip(fields.iter().zip(GPS_FIELDS.iter())) {
            *v = field.trim().parse().map_err(|_| SigmfError::CsvSchema {
                path: path.to_path_buf(),
                line: line_no,
                detail: format!("{name} value {field:?} is not a number"),
            })?;
        }
        if let Some(prev) = fixes.last() {
            let prev: &GpsFix = prev;
            if values[0] <= prev.time_utc {
                return Err(SigmfError::CsvOrder {
                    path: path.to_path_buf(),
                    line: line_no,
                });
            }
        }
        fixes.push(GpsFix {
            time_utc: values[0],
            latitude_deg: values[1],
            longitude_deg: values[2],
            altitude_m: values[3],
        });
    }
    Ok(fixes)
}

/// Writes GPS fixes as the logger CSV schema.
///
/// Floats are printed in shortest round-trip form, so a read/write
/// cycle preserves every value exactly.
pub fn write_gps_csv(path: &Path, fixes: &[GpsFix]) -> Result<(), SigmfError> {
    let mut out = Vec::new();
    writeln!(out, "{GPS_CSV_HEADER}").unwrap();
    for fix in fixes {
        writeln!(
            out,
            "{},{},{},{}",
            fix.time_utc, fix.latitude_deg, fix.longitude_deg, fix.altitude_m
        )
        .unwrap();
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Converts a GPS CSV file into a SigMF recording under `base`,
/// returning the `(meta, data)` paths.
pub fn gps_csv_to_sigmf(csv_path: &Path, base: &Path) -> Result<(PathBuf, PathBuf), SigmfError> {
    gps_fixes_to_sigmf(&read_gps_csv(csv_path)?, base)
}

/// Writes GPS fixes as a SigMF pair: a real float64 stream in field
/// order (time, lat, lon, alt) repeated per fix.
pub fn gps_fixes_to_sigmf(fixes: &[GpsFix], base: &Path) -> Result<(PathBuf, PathBuf), SigmfError> {
    let mut data = Vec::with_capacity(fixes.len() * 32);
    for fix in fixes {
        for v in [
            fix.time_utc,
            fix.latitude_deg,
            fix.longitude_deg,
            fix.altitude_m,
        ] {
            data.extend_from_slice(&v.to_le_bytes());
        }
    }
    let meta = SigmfMeta {
        global: SigmfGlobal {
            datatype: DATATYPE_GPS.to_string(),
            sample_rate: None,
            version: SIGMF_VERSION.to_string(),
            description: Some("GPS track".to_string()),
            center_frequency: None,
            gps_fields: Some(GPS_FIELDS.iter().map(|s| s.to_string()).collect()),
            extra: BTreeMap::new(),
        },
        captures: vec![SigmfCapture {
            sample_start: 0,
            frequency: None,
            datetime: fixes
                .first()
                .map(|f| unix_seconds_to_iso8601(f.time_utc))
                .transpose()?,
            extra: BTreeMap::new(),
        }],
        annotations: Vec::new(),
    };
    let (meta_path, data_path) = recording_paths(base);
    write_meta(&meta_path, &meta)?;
    fs::write(&data_path, data).map_err(io_err(&data_path))?;
    Ok((meta_path, data_path))
}

/// Converts a GPS SigMF recording back to the logger CSV schema.
pub fn sigmf_to_gps_csv(
    meta_path: &Path,
    data_path: &Path,
    csv_path: &Path,
) -> Result<(), SigmfError> {
    let meta = read_meta(meta_path)?;
    if meta.global.datatype != DATATYPE_GPS {
        return Err(SigmfError::UnsupportedDatatype {
            got: meta.global.datatype.clone(),
            expected: DATATYPE_GPS,
        });
    }
    if let Some(fields) = &meta.global.gps_fields {
        let expected: Vec<String> = GPS_FIELDS.iter().map(|s| s.to_string()).collect();
        if *fields != expected {
            return Err(SigmfError::GpsFields {
                got: fields.clone(),
                expected,
            });
        }
    }
    let bytes = fs::read(data_path).map_err(io_err(data_path))?;
    if bytes.len() % 32 != 0 {
        return Err(SigmfError::DataSize {
            bytes: bytes.len() as u64,
            item_bytes: 32,
        });
    }
    let values = decode_f64(&bytes);
    let fixes: Vec<GpsFix> = values
        .chunks_exact(4)
        .map(|row| GpsFix {
            time_utc: row[0],
            latitude_deg: row[1],
            longitude_deg: row[2],
            altitude_m: row[3],
        })
        .collect();
    write_gps_csv(csv_path, &fixes)
}

/// One rule outcome from [`validate_recording`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCheck {
    pub rule: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of every validation rule run against a recording.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    fn push(&mut self, rule: &'static str, passed: bool, detail: impl Into<String>) {
        self.checks.push(ValidationCheck {
            rule,
            passed,
            detail: detail.into(),
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks a recording pair against the format rules without decoding
/// the sample payload.
///
/// I/O failures are errors; everything structural lands in the report,
/// one entry per rule, so a broken recording reports all of its
/// problems at once.
pub fn validate_recording(
    meta_path: &Path,
    data_path: &Path,
) -> Result<ValidationReport, SigmfError> {
    let mut report = ValidationReport::default();
    let text = fs::read_to_string(meta_path).map_err(io_err(meta_path))?;
    let meta = match parse_meta(meta_path, &text) {
        Ok(meta) => {
            report.push("meta-parse", true, "metadata parses as SigMF JSON");
            meta
        }
        Err(e) => {
            report.push("meta-parse", false, e.to_string());
            return Ok(report);
        }
    };

    let item_bytes: u64 = match meta.global.datatype.as_str() {
        DATATYPE_IQ => {
            report.push("datatype", true, format!("datatype {DATATYPE_IQ}"));
            16
        }
        DATATYPE_GPS => {
            report.push("datatype", true, format!("datatype {DATATYPE_GPS}"));
            32
        }
        other => {
            report.push("datatype", false, format!("unsupported datatype {other:?}"));
            return Ok(report);
        }
    };
    let is_iq = meta.global.datatype == DATATYPE_IQ;

    match meta.global.sample_rate {
        Some(rate) if rate > 0.0 => report.push("sample-rate", true, format!("{rate} Hz")),
        Some(rate) => report.push("sample-rate", false, format!("non-positive rate {rate}")),
        None if is_iq => report.push("sample-rate", false, "core:sample_rate missing"),
        None => report.push("sample-rate", true, "not required for GPS recordings"),
    }

    let bytes = fs::metadata(data_path).map_err(io_err(data_path))?.len();
    if bytes % item_bytes == 0 {
        report.push(
            "data-size",
            true,
            format!("{bytes} bytes = {} items", bytes / item_bytes),
        );
    } else {
        report.push(
            "data-size",
            false,
            format!("{bytes} bytes is not a multiple of {item_bytes}"),
        );
    }
    let total = bytes / item_bytes;

    if meta.captures.is_empty() {
        report.push("captures", false, "no captures listed");
        return Ok(report);
    }
    report.push(
        "captures",
        true,
        format!("{} captures", meta.captures.len()),
    );

    let mut order_ok = true;
    let mut bounds_ok = true;
    for (i, capture) in meta.captures.iter().enumerate() {
        if i > 0 && capture.sample_start <= meta.captures[i - 1].sample_start {
            order_ok = false;
            report.push(
                "capture-order",
                false,
                format!("capture {i} does not start after capture {}", i - 1),
            );
        }
        if capture.sample_start >= total {
            bounds_ok = false;
            report.push(
                "capture-bounds",
                false,
                format!(
                    "capture {i} starts at sample {} beyond the {total}-sample data file",
                    capture.sample_start
                ),
            );
        }
    }
    if order_ok {
        report.push("capture-order", true, "sample starts strictly increase");
    }
    if bounds_ok {
        report.push("capture-bounds", true, "all captures inside the data file");
    }

    let mut times = Vec::new();
    let mut datetimes_ok = true;
    for (i, capture) in meta.captures.iter().enumerate() {
        match capture.datetime.as_deref() {
            Some(s) => match iso8601_to_unix_seconds(s) {
                Some(t) => times.push(t),
                None => {
                    datetimes_ok = false;
                    report.push(
                        "datetimes",
                        false,
                        format!("capture {i} datetime {s:?} is not ISO 8601"),
                    );
                }
            },
            None if is_iq => {
                datetimes_ok = false;
                report.push("datetimes", false, format!("capture {i} has no datetime"));
            }
            None => {}
        }
    }
    if datetimes_ok && times.windows(2).any(|w| w[1] <= w[0]) {
        datetimes_ok = false;
        report.push("datetimes", false, "capture datetimes do not increase");
    }
    if datetimes_ok {
        report.push("datetimes", true, "present, parseable, increasing");
    }

    if is_iq {
        let missing: Vec<usize> = meta
            .captures
            .iter()
            .enumerate()
            .filter(|(_, c)| c.frequency.or(meta.global.center_frequency).is_none())
            .map(|(i, _)| i)
            .collect();
        if missing.is_empty() {
            report.push("center-frequency", true, "known for every capture");
        } else {
            report.push(
                "center-frequency",
                false,
                format!("missing for captures {missing:?}"),
            );
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("aeriq-sigmf-{name}-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn segment(index: usize, t: f64, n: usize, rng: &mut ChaCha8Rng) -> IqSegment {
        IqSegment {
            segment_index: index,
            capture_time: t,
            sample_rate: 2e6,
            center_frequency: 3.51e9,
            samples: (0..n)
                .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        }
    }

    #[test]
    fn recording_round_trip_is_exact() {
        let dir = test_dir("roundtrip");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segments = vec![
            segment(0, 1.660e9 + 0.123456, 100, &mut rng),
            segment(1, 1.660e9 + 0.223456, 80, &mut rng),
            segment(2, 1.660e9 + 0.323456, 120, &mut rng),
        ];
        let (meta_path, data_path) =
            write_recording(&dir.join("cap"), &segments, Some("bench capture")).unwrap();
        assert!(meta_path.ends_with("cap.sigmf-meta"));
        assert!(data_path.ends_with("cap.sigmf-data"));

        let (meta, back) = read_recording(&meta_path, &data_path).unwrap();
        assert_eq!(meta.global.datatype, DATATYPE_IQ);
        assert_eq!(meta.global.description.as_deref(), Some("bench capture"));
        assert_eq!(back.len(), 3);
        for (a, b) in segments.iter().zip(&back) {
            assert_eq!(a.segment_index, b.segment_index);
            assert_eq!(a.samples, b.samples);
            assert_eq!(a.sample_rate, b.sample_rate);
            assert_eq!(a.center_frequency, b.center_frequency);
            assert!((a.capture_time - b.capture_time).abs() < 1e-6);
        }
    }

    #[test]
    fn meta_json_uses_core_and_extension_keys() {
        let dir = test_dir("keys");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let segments = vec![
            segment(0, 1.7e9, 10, &mut rng),
            segment(1, 1.7e9 + 0.1, 10, &mut rng),
        ];
        let (meta_path, _) = write_recording(&dir.join("keys"), &segments, None).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&meta_path).unwrap()).unwrap();
        let global = &value["global"];
        assert_eq!(global["core:datatype"], "cf64_le");
        assert_eq!(global["core:sample_rate"], 2e6);
        assert_eq!(global["aeriq:center_frequency"], 3.51e9);
        let captures = value["captures"].as_array().unwrap();
        assert_eq!(captures[0]["core:sample_start"], 0);
        assert_eq!(captures[1]["core:sample_start"], 10);
        let datetime = captures[0]["core:datetime"].as_str().unwrap();
        assert!(datetime.ends_with('Z') && datetime.contains('T'));
        assert_eq!(datetime, "2023-11-14T22:13:20.000000Z");
    }

    #[test]
    fn unknown_meta_keys_survive_a_round_trip() {
        let dir = test_dir("extra");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (meta_path, data_path) =
            write_recording(&dir.join("extra"), &[segment(0, 1.7e9, 4, &mut rng)], None).unwrap();
        let mut meta = read_meta(&meta_path).unwrap();
        meta.global
            .extra
            .insert("core:author".to_string(), serde_json::json!("someone"));
        write_meta(&meta_path, &meta).unwrap();
        let (meta2, _) = read_recording(&meta_path, &data_path).unwrap();
        assert_eq!(meta2.global.extra["core:author"], "someone");
    }

    #[test]
    fn timestamps_round_trip_at_microsecond_precision() {
        for t in [0.0, 1.66e9 + 0.123456, 1.66e9 + 0.999999, -1.5] {
            let iso = unix_seconds_to_iso8601(t).unwrap();
            let back = iso8601_to_unix_seconds(&iso).unwrap();
            assert!((back - t).abs() < 5e-7, "{t} -> {iso} -> {back}");
        }
        assert!(iso8601_to_unix_seconds("not a date").is_none());
        assert!(matches!(
            unix_seconds_to_iso8601(f64::NAN),
            Err(SigmfError::TimestampRange { .. })
        ));
    }

    #[test]
    fn read_rejects_wrong_datatype() {
        let dir = test_dir("datatype");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (meta_path, data_path) =
            write_recording(&dir.join("dt"), &[segment(0, 1.7e9, 4, &mut rng)], None).unwrap();
        let mut meta = read_meta(&meta_path).unwrap();
        meta.global.datatype = "ci16_le".to_string();
        write_meta(&meta_path, &meta).unwrap();
        assert!(matches!(
            read_recording(&meta_path, &data_path),
            Err(SigmfError::UnsupportedDatatype { got, .. }) if got == "ci16_le"
        ));
    }

    #[test]
    fn read_rejects_out_of_bounds_and_disordered_captures() {
        let dir = test_dir("bounds");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let segments = vec![
            segment(0, 1.7e9, 8, &mut rng),
            segment(1, 1.7e9 + 0.1, 8, &mut rng),
        ];
        let (meta_path, data_path) = write_recording(&dir.join("b"), &segments, None).unwrap();

        let mut meta = read_meta(&meta_path).unwrap();
        meta.captures[1].sample_start = 99;
        write_meta(&meta_path, &meta).unwrap();
        assert!(matches!(
            read_recording(&meta_path, &data_path),
            Err(SigmfError::CaptureBounds {
                index: 1,
                start: 99,
                total: 16
            })
        ));

        meta.captures[1].sample_start = 0;
        write_meta(&meta_path, &meta).unwrap();
        assert!(matches!(
            read_recording(&meta_path, &data_path),
            Err(SigmfError::CaptureOrder { index: 1, .. })
        ));
    }

    #[test]
    fn read_rejects_ragged_data_file() {
        let dir = test_dir("ragged");
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (meta_path, data_path) =
            write_recording(&dir.join("r"), &[segment(0, 1.7e9, 4, &mut rng)], None).unwrap();
        let mut bytes = fs::read(&data_path).unwrap();
        bytes.truncate(bytes.len() - 7);
        fs::write(&data_path, bytes).unwrap();
        assert!(matches!(
            read_recording(&meta_path, &data_path),
            Err(SigmfError::DataSize { .. })
        ));
    }

    #[test]
    fn parse_errors_carry_position() {
        let dir = test_dir("parse");
        let meta_path = dir.join("bad.sigmf-meta");
        fs::write(&meta_path, "{\n  \"global\": {\n").unwrap();
        match read_meta(&meta_path) {
            Err(SigmfError::MetaParse { line, offset, .. }) => {
                assert!(line >= 2);
                assert!(offset > 0);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn write_rejects_inconsistent_segments() {
        let dir = test_dir("inconsistent");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(matches!(
            write_recording(&dir.join("x"), &[], None),
            Err(SigmfError::NoSegments)
        ));
        let mut segments = vec![
            segment(0, 1.7e9, 4, &mut rng),
            segment(1, 1.7e9 + 0.1, 4, &mut rng),
        ];
        segments[1].sample_rate = 1.92e6;
        assert!(matches!(
            write_recording(&dir.join("x"), &segments, None),
            Err(SigmfError::InconsistentSegments { .. })
        ));
        segments[1].sample_rate = 2e6;
        segments[1].capture_time = segments[0].capture_time;
        assert!(matches!(
            write_recording(&dir.join("x"), &segments, None),
            Err(SigmfError::InconsistentSegments { .. })
        ));
    }

    #[test]
    fn gps_csv_round_trip_is_value_exact() {
        let dir = test_dir("gpscsv");
        let path = dir.join("track.csv");
        let fixes = vec![
            GpsFix {
                time_utc: 1.66e9 + 0.1,
                latitude_deg: 35.123456789012345,
                longitude_deg: -78.0000000001,
                altitude_m: 0.1,
            },
            GpsFix {
                time_utc: 1.66e9 + 1.1,
                latitude_deg: -0.25,
                longitude_deg: 179.999999,
                altitude_m: 1.5e3,
            },
        ];
        write_gps_csv(&path, &fixes).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(GPS_CSV_HEADER));
        assert!(text.contains(&format!("{}", fixes[0].latitude_deg)));
        let back = read_gps_csv(&path).unwrap();
        assert_eq!(back, fixes);
    }

    #[test]
    fn gps_csv_schema_violations_are_reported_with_lines() {
        let dir = test_dir("gpsbad");
        let path = dir.join("bad.csv");

        fs::write(&path, "time,lat\n").unwrap();
        assert!(matches!(
            read_gps_csv(&path),
            Err(SigmfError::CsvSchema { line: 1, .. })
        ));

        fs::write(&path, format!("{GPS_CSV_HEADER}\n1.0,2.0,3.0\n")).unwrap();
        assert!(matches!(
            read_gps_csv(&path),
            Err(SigmfError::CsvSchema { line: 2, .. })
        ));

        fs::write(&path, format!("{GPS_CSV_HEADER}\n1.0,2.0,3.0,abc\n")).unwrap();
        assert!(matches!(
            read_gps_csv(&path),
            Err(SigmfError::CsvSchema { line: 2, .. })
        ));

        fs::write(
            &path,
            format!("{GPS_CSV_HEADER}\n2.0,0.0,0.0,0.0\n1.0,0.0,0.0,0.0\n"),
        )
        .unwrap();
        assert!(matches!(
            read_gps_csv(&path),
            Err(SigmfError::CsvOrder { line: 3, .. })
        ));
    }

    #[test]
    fn gps_sigmf_round_trip_is_value_exact() {
        let dir = test_dir("gpssigmf");
        let csv = dir.join("track.csv");
        let fixes = vec![
            GpsFix {
                time_utc: 1.66e9,
                latitude_deg: 35.72,
                longitude_deg: -78.7,
                altitude_m: 100.0,
            },
            GpsFix {
                time_utc: 1.66e9 + 0.2,
                latitude_deg: 35.7201,
                longitude_deg: -78.70004,
                altitude_m: 101.25,
            },
        ];
        write_gps_csv(&csv, &fixes).unwrap();
        let (meta_path, data_path) = gps_csv_to_sigmf(&csv, &dir.join("track")).unwrap();

        let meta = read_meta(&meta_path).unwrap();
        assert_eq!(meta.global.datatype, DATATYPE_GPS);
        assert_eq!(
            meta.global.gps_fields.as_deref().unwrap(),
            &GPS_FIELDS.map(str::to_string)
        );

        let csv2 = dir.join("track2.csv");
        sigmf_to_gps_csv(&meta_path, &data_path, &csv2).unwrap();
        assert_eq!(read_gps_csv(&csv2).unwrap(), fixes);
    }

    #[test]
    fn validation_passes_a_written_recording() {
        let dir = test_dir("validate-ok");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let segments = vec![
            segment(0, 1.7e9, 6, &mut rng),
            segment(1, 1.7e9 + 0.1, 6, &mut rng),
        ];
        let (meta_path, data_path) = write_recording(&dir.join("v"), &segments, None).unwrap();
        let report = validate_recording(&meta_path, &data_path).unwrap();
        assert!(report.all_passed(), "{:?}", report.checks);
        assert!(report.checks.len() >= 7);
    }

    #[test]
    fn validation_reports_specific_failures() {
        let dir = test_dir("validate-bad");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let segments = vec![
            segment(0, 1.7e9, 6, &mut rng),
            segment(1, 1.7e9 + 0.1, 6, &mut rng),
        ];
        let (meta_path, data_path) = write_recording(&dir.join("v"), &segments, None).unwrap();

        let mut meta = read_meta(&meta_path).unwrap();
        meta.global.sample_rate = Some(-1.0);
        meta.captures[1].sample_start = 400;
        meta.captures[1].datetime = Some("yesterday".to_string());
        write_meta(&meta_path, &meta).unwrap();

        let report = validate_recording(&meta_path, &data_path).unwrap();
        assert!(!report.all_passed());
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.rule)
            .collect();
        assert!(failed.contains(&"sample-rate"));
        assert!(failed.contains(&"capture-bounds"));
        assert!(failed.contains(&"datetimes"));
    }
}
