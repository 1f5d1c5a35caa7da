//! Batch orchestration for the command-line stages.
//!
//! The executable face of the toolkit is a set of file-shaped stages:
//! decode a recording into a segments CSV, fuse that with a GPS log
//! into geolocated samples, fit propagation models into a JSON report,
//! and synthesize a flight-shaped recording to drive the whole chain
//! closed-loop. This module owns the configuration format, the CSV and
//! JSON schemas, and the per-segment fan-out; the binary adds only
//! argument parsing and exit codes.
//!
//! Outputs are deterministic: segments are processed independently and
//! collected in order, every float is printed in its shortest
//! round-trip form, and synthesis seeds each segment from the base
//! seed and the segment index — so reruns and worker counts never
//! change a byte.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

use crate::chanest::{estimate_channel, ChanestError};
use crate::geo::{
    ecef_to_geodetic, enu_to_ecef, fuse_track, geodetic_to_ecef, link_geometry, FuseOptions,
    GeoError, GpsFix, GpsTrack, LinkGeometry, TxAnchor, DEFAULT_MAX_EXTRAPOLATION_S,
};
use crate::lte::{ofdm_demodulate, CellIdentity, LteError, LtePhyConfig};
use crate::propmodel::{
    extract_shadowing, fit_path_loss, fit_shadowing, path_loss_db, two_ray_amplitude, wavelength_m,
    AntennaPattern, GaussianFit, PathLossModel, PathLossSample, PropError, PropagationFit,
    Reflection, SkewNormalFit, TwoRayConfig, MIN_FIT_SAMPLES, MIN_SHADOWING_SAMPLES,
};
use crate::resample::{RationalResampler, ResampleError};
use crate::sigmf::{
    read_recording, recording_paths, write_gps_csv, write_recording, IqSegment, SigmfError,
};
use crate::sync::{
    cell_search_at_base_rate, compensate_cfo, estimate_cfo_cp, SearchConfig, SyncError,
    DEFAULT_DETECTION_THRESHOLD,
};
use crate::synth::{
    apply_impairments, synthesize_stream, ChannelScales, ChannelSpec, ImpairmentSpec, SynthError,
};
use num_complex::Complex64;

/// Column order of the per-segment decode CSV.
pub const SEGMENTS_CSV_HEADER: &str =
    "segment_index,capture_time,detected,pci,timing_offset,cfo_hz,pss_metric,sss_metric,subframe_phase,rsrp_dbfs";

/// Column order of the geolocated sample CSV.
pub const GEOSAMPLES_CSV_HEADER: &str =
    "segment_index,capture_time,latitude,longitude,altitude_m,ground_distance_m,distance_3d_m,elevation_deg,pci,cfo_hz,rsrp_dbfs,pss_metric,detected";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {detail}", path.display())]
    Config { path: PathBuf, detail: String },
    #[error("configuration invalid: {detail}")]
    InvalidConfig { detail: String },
    #[error("{}:{line}: {detail}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("{got} detected samples with geometry are too few, the fit needs {needed}")]
    TooFewDetections { got: usize, needed: usize },
    #[error("building the worker pool failed: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Sigmf(#[from] SigmfError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Lte(#[from] LteError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Prop(#[from] PropError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Chanest(#[from] ChanestError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Capture geometry of the recording being processed or produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    pub sample_rate_hz: f64,
    pub center_frequency_hz: f64,
    pub segment_duration_s: f64,
    pub segment_period_s: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            sample_rate_hz: 2.0e6,
            center_frequency_hz: 3.51e9,
            segment_duration_s: 0.020,
            segment_period_s: 0.100,
        }
    }
}

/// Where the transmitter stands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchorConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub ground_alt_m: f64,
    pub antenna_height_m: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            latitude_deg: 35.7274,
            longitude_deg: -78.6962,
            ground_alt_m: 0.0,
            antenna_height_m: 10.0,
        }
    }
}

impl AnchorConfig {
    pub fn to_anchor(&self) -> TxAnchor {
        TxAnchor {
            latitude_deg: self.latitude_deg,
            longitude_deg: self.longitude_deg,
            ground_alt_m: self.ground_alt_m,
            antenna_height_m: self.antenna_height_m,
        }
    }
}

/// Receiver-side processing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessingConfig {
    pub detection_threshold: f64,
    /// Constant added to every reported RSRP, for comparison against
    /// absolutely calibrated data.
    pub calibration_offset_db: f64,
    /// Seconds added to capture times before GPS lookup.
    pub clock_offset_s: f64,
    pub max_extrapolation_s: f64,
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        ProcessingConfig {
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            calibration_offset_db: 0.0,
            clock_offset_s: 0.0,
            max_extrapolation_s: DEFAULT_MAX_EXTRAPOLATION_S,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionKind {
    Fixed,
    Fresnel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Isotropic,
    HalfWaveDipole,
}

impl PatternKind {
    fn to_pattern(self) -> AntennaPattern {
        match self {
            PatternKind::Isotropic => AntennaPattern::Isotropic,
            PatternKind::HalfWaveDipole => AntennaPattern::HalfWaveDipole,
        }
    }
}

/// Two-ray model choices; the wavelength comes from the capture's
/// center frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub reflection: ReflectionKind,
    /// Ground relative permittivity, used when `reflection = "fresnel"`.
    pub epsilon_r: f64,
    /// Fixed reflection coefficient, used when `reflection = "fixed"`.
    pub gamma_re: f64,
    pub gamma_im: f64,
    pub tx_pattern: PatternKind,
    pub rx_pattern: PatternKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            reflection: ReflectionKind::Fresnel,
            epsilon_r: 15.0,
            gamma_re: -1.0,
            gamma_im: 0.0,
            tx_pattern: PatternKind::HalfWaveDipole,
            rx_pattern: PatternKind::HalfWaveDipole,
        }
    }
}

impl ModelConfig {
    pub fn to_two_ray(&self, center_frequency_hz: f64) -> TwoRayConfig {
        TwoRayConfig {
            wavelength_m: wavelength_m(center_frequency_hz),
            reflection: match self.reflection {
                ReflectionKind::Fixed => {
                    Reflection::Fixed(Complex64::new(self.gamma_re, self.gamma_im))
                }
                ReflectionKind::Fresnel => Reflection::Fresnel {
                    epsilon_r: self.epsilon_r,
                },
            },
            tx_pattern: self.tx_pattern.to_pattern(),
            rx_pattern: self.rx_pattern.to_pattern(),
        }
    }
}

/// The full pipeline configuration; every field has a default and a
/// TOML file overrides only what it names. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub capture: CaptureConfig,
    pub tx_anchor: AnchorConfig,
    pub processing: ProcessingConfig,
    pub models: ModelConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |detail: String| Err(PipelineError::InvalidConfig { detail });
        let rate = self.capture.sample_rate_hz;
        if rate <= 0.0 || rate.is_nan() {
            return bad(format!(
                "capture.sample_rate_hz = {} must be positive",
                self.capture.sample_rate_hz
            ));
        }
        let freq = self.capture.center_frequency_hz;
        if freq <= 0.0 || freq.is_nan() {
            return bad(format!(
                "capture.center_frequency_hz = {} must be positive",
                self.capture.center_frequency_hz
            ));
        }
        let (duration, period) = (
            self.capture.segment_duration_s,
            self.capture.segment_period_s,
        );
        if duration <= 0.0 || duration.is_nan() || period <= 0.0 || period.is_nan() {
            return bad("capture durations must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.processing.detection_threshold) {
            return bad(format!(
                "processing.detection_threshold = {} must be within [0, 1]",
                self.processing.detection_threshold
            ));
        }
        self.models
            .to_two_ray(self.capture.center_frequency_hz)
            .validate()
            .map_err(|e| PipelineError::InvalidConfig {
                detail: e.to_string(),
            })
    }

    pub fn two_ray(&self) -> TwoRayConfig {
        self.models.to_two_ray(self.capture.center_frequency_hz)
    }
}

/// Loads the configuration: defaults, overridden by a TOML file when
/// one is given. Validation runs either way.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, PipelineError> {
    let config: PipelineConfig = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| PipelineError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            toml::from_str(&text).map_err(|e| PipelineError::Config {
                path: p.to_path_buf(),
                detail: e.to_string(),
            })?
        }
    };
    config.validate()?;
    Ok(config)
}

/// One decoded segment — one CSV row. Undetected segments keep their
/// coarse CFO and best correlation metric when those were measurable.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRow {
    pub segment_index: usize,
    pub capture_time: f64,
    pub detected: bool,
    pub pci: Option<u16>,
    pub timing_offset: Option<usize>,
    pub cfo_hz: Option<f64>,
    pub pss_metric: Option<f64>,
    pub sss_metric: Option<f64>,
    /// 0 or 5: which subframe the first half-frame boundary starts.
    pub subframe: Option<u8>,
    pub rsrp_dbfs: Option<f64>,
}

/// Decode knobs resolved from config plus command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub detection_threshold: f64,
    pub calibration_offset_db: f64,
}

impl DecodeOptions {
    pub fn from_config(config: &PipelineConfig, workers: usize) -> Self {
        DecodeOptions {
            workers,
            detection_threshold: config.processing.detection_threshold,
            calibration_offset_db: config.processing.calibration_offset_db,
        }
    }
}

/// Runs cell search and channel estimation on one segment.
pub fn decode_segment(
    segment: &IqSegment,
    search: &SearchConfig,
    calibration_offset_db: f64,
) -> SegmentRow {
    let phy = &search.phy;
    let base_rate = phy.sample_rate_hz();
    let base: Vec<Complex64> = match RationalResampler::new(segment.sample_rate, base_rate) {
        Ok(resampler) => resampler.resample(&segment.samples),
        Err(_) => {
            return undetected_row(segment, None, None);
        }
    };
    let result = match cell_search_at_base_rate(&base, search) {
        Ok(result) => result,
        Err(SyncError::NoCellFound { best_metric, .. }) => {
            let coarse = estimate_cfo_cp(&base, phy).ok();
            return undetected_row(segment, coarse, Some(best_metric));
        }
        Err(_) => {
            let coarse = estimate_cfo_cp(&base, phy).ok();
            return undetected_row(segment, coarse, None);
        }
    };
    let compensated = compensate_cfo(&base, result.cfo_hz, base_rate);
    let rsrp_dbfs = ofdm_demodulate(&compensated, result.timing_offset, phy)
        .ok()
        .and_then(|grid| {
            estimate_channel(&grid, &result.cell, result.subframe_phase.first_slot(), phy).ok()
        })
        .map(|estimate| estimate.rsrp_dbfs + calibration_offset_db);
    SegmentRow {
        segment_index: segment.segment_index,
        capture_time: segment.capture_time,
        detected: true,
        pci: Some(result.cell.pci()),
        timing_offset: Some(result.timing_offset),
        cfo_hz: Some(result.cfo_hz),
        pss_metric: Some(result.pss_metric),
        sss_metric: Some(result.sss_metric),
        subframe: Some(result.subframe_phase.subframe()),
        rsrp_dbfs,
    }
}

fn undetected_row(segment: &IqSegment, cfo_hz: Option<f64>, pss_metric: Option<f64>) -> SegmentRow {
    SegmentRow {
        segment_index: segment.segment_index,
        capture_time: segment.capture_time,
        detected: false,
        pci: None,
        timing_offset: None,
        cfo_hz,
        pss_metric,
        sss_metric: None,
        subframe: None,
        rsrp_dbfs: None,
    }
}

/// Decodes every segment of a recording, in parallel, in order.
pub fn decode_recording(
    base: &Path,
    options: &DecodeOptions,
) -> Result<Vec<SegmentRow>, PipelineError> {
    let (meta_path, data_path) = recording_paths(base);
    let (_, segments) = read_recording(&meta_path, &data_path)?;
    let search = SearchConfig {
        phy: LtePhyConfig::default(),
        detection_threshold: options.detection_threshold,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()?;
    Ok(pool.install(|| {
        segments
            .par_iter()
            .map(|segment| decode_segment(segment, &search, options.calibration_offset_db))
            .collect()
    }))
}

fn push_opt<T: std::fmt::Display>(line: &mut String, value: &Option<T>) {
    line.push(',');
    if let Some(v) = value {
        let _ = write!(line, "{v}");
    }
}

pub fn write_segments_csv(path: &Path, rows: &[SegmentRow]) -> Result<(), PipelineError> {
    let mut text = String::from(SEGMENTS_CSV_HEADER);
    text.push('\n');
    for r in rows {
        let _ = write!(
            text,
            "{},{},{}",
            r.segment_index, r.capture_time, r.detected
        );
        push_opt(&mut text, &r.pci);
        push_opt(&mut text, &r.timing_offset);
        push_opt(&mut text, &r.cfo_hz);
        push_opt(&mut text, &r.pss_metric);
        push_opt(&mut text, &r.sss_metric);
        push_opt(&mut text, &r.subframe);
        push_opt(&mut text, &r.rsrp_dbfs);
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_error(path: &Path, line: usize, detail: impl Into<String>) -> PipelineError {
    PipelineError::Csv {
        path: path.to_path_buf(),
        line,
        detail: detail.into(),
    }
}

fn parse_cell<T: FromStr>(
    field: &str,
    name: &str,
    path: &Path,
    line: usize,
) -> Result<T, PipelineError>
where
    T::Err: std::fmt::Display,
{
    field
        .parse()
        .map_err(|e| csv_error(path, line, format!("bad {name} {field:?}: {e}")))
}

fn parse_opt_cell<T: FromStr>(
    field: &str,
    name: &str,
    path: &Path,
    line: usize,
) -> Result<Option<T>, PipelineError>
where
    T::Err: std::fmt::Display,
{
    if field.is_empty() {
        Ok(None)
    } else {
        parse_cell(field, name, path, line).map(Some)
    }
}

fn read_csv_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let columns = header.split(',').count();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == header => {}
        Some((_, first)) => {
            return Err(csv_error(
                path,
                1,
                format!("header {first:?} does not match {header:?}"),
            ))
        }
        None => return Err(csv_error(path, 1, "empty file")),
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_owned).collect();
        if fields.len() != columns {
            return Err(csv_error(
                path,
                index + 1,
                format!("{} fields, expected {columns}", fields.len()),
            ));
        }
        rows.push((index + 1, fields));
    }
    Ok(rows)
}

pub fn read_segments_csv(path: &Path) -> Result<Vec<SegmentRow>, PipelineError> {
    read_csv_rows(path, SEGMENTS_CSV_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(SegmentRow {
                segment_index: parse_cell(&f[0], "segment_index", path, line)?,
                capture_time: parse_cell(&f[1], "capture_time", path, line)?,
                detected: parse_cell(&f[2], "detected", path, line)?,
                pci: parse_opt_cell(&f[3], "pci", path, line)?,
                timing_offset: parse_opt_cell(&f[4], "timing_offset", path, line)?,
                cfo_hz: parse_opt_cell(&f[5], "cfo_hz", path, line)?,
                pss_metric: parse_opt_cell(&f[6], "pss_metric", path, line)?,
                sss_metric: parse_opt_cell(&f[7], "sss_metric", path, line)?,
                subframe: parse_opt_cell(&f[8], "subframe_phase", path, line)?,
                rsrp_dbfs: parse_opt_cell(&f[9], "rsrp_dbfs", path, line)?,
            })
        })
        .collect()
}

/// Names of the four GPS columns as they appear in a foreign log, for
/// ingesting logs that do not use the standard schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GpsColumnMap {
    pub time: String,
    pub latitude: String,
    pub longitude: String,
    pub altitude: String,
}

impl Default for GpsColumnMap {
    fn default() -> Self {
        GpsColumnMap {
            time: "time_utc".into(),
            latitude: "latitude_deg".into(),
            longitude: "longitude_deg".into(),
            altitude: "altitude_m".into(),
        }
    }
}

impl FromStr for GpsColumnMap {
    type Err = String;

    /// Parses `time,latitude,longitude,altitude` column names.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 || parts.iter().any(|p| p.is_empty()) {
            return Err(format!(
                "expected four comma-separated column names (time,latitude,longitude,altitude), got {s:?}"
            ));
        }
        Ok(GpsColumnMap {
            time: parts[0].into(),
            latitude: parts[1].into(),
            longitude: parts[2].into(),
            altitude: parts[3].into(),
        })
    }
}

/// Reads a GPS log through a column map: the named columns may sit in
/// any order, and extra columns are ignored.
pub fn read_gps_csv_mapped(path: &Path, map: &GpsColumnMap) -> Result<Vec<GpsFix>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| csv_error(path, 1, "empty file"))?;
    let names: Vec<&str> = header.trim_end().split(',').map(str::trim).collect();
    let index_of = |name: &str| {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| csv_error(path, 1, format!("no column {name:?} in header {header:?}")))
    };
    let time = index_of(&map.time)?;
    let latitude = index_of(&map.latitude)?;
    let longitude = index_of(&map.longitude)?;
    let altitude = index_of(&map.altitude)?;
    let mut fixes = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(csv_error(
                path,
                index + 1,
                format!("{} fields, expected {}", fields.len(), names.len()),
            ));
        }
        fixes.push(GpsFix {
            time_utc: parse_cell(fields[time].trim(), "time", path, index + 1)?,
            latitude_deg: parse_cell(fields[latitude].trim(), "latitude", path, index + 1)?,
            longitude_deg: parse_cell(fields[longitude].trim(), "longitude", path, index + 1)?,
            altitude_m: parse_cell(fields[altitude].trim(), "altitude", path, index + 1)?,
        });
    }
    Ok(fixes)
}

/// One geolocated sample — one row of the fused CSV. Geometry fields
/// are empty when the GPS track did not cover the capture time.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRow {
    pub segment_index: usize,
    pub capture_time: f64,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub altitude_m: Option<f64>,
    pub ground_distance_m: Option<f64>,
    pub distance_3d_m: Option<f64>,
    pub elevation_deg: Option<f64>,
    pub pci: Option<u16>,
    pub cfo_hz: Option<f64>,
    pub rsrp_dbfs: Option<f64>,
    pub pss_metric: Option<f64>,
    pub detected: bool,
}

/// Attaches a GPS position and link geometry to every segment row.
/// Fails when not a single capture time lands on the track.
pub fn fuse_segments(
    segments: &[SegmentRow],
    fixes: Vec<GpsFix>,
    config: &PipelineConfig,
) -> Result<Vec<GeoRow>, PipelineError> {
    let track = GpsTrack::new(fixes)?;
    let times: Vec<f64> = segments.iter().map(|s| s.capture_time).collect();
    let options = FuseOptions {
        clock_offset_s: config.processing.clock_offset_s,
        max_extrapolation_s: config.processing.max_extrapolation_s,
    };
    let fused = fuse_track(&times, &track, &config.tx_anchor.to_anchor(), &options)?;
    Ok(segments
        .iter()
        .zip(fused)
        .map(|(segment, hit)| {
            let (fix, geometry) = match hit {
                Some((fix, geometry)) => (Some(fix), Some(geometry)),
                None => (None, None),
            };
            GeoRow {
                segment_index: segment.segment_index,
                capture_time: segment.capture_time,
                latitude: fix.map(|f| f.latitude_deg),
                longitude: fix.map(|f| f.longitude_deg),
                altitude_m: fix.map(|f| f.altitude_m),
                ground_distance_m: geometry.map(|g| g.ground_distance_m),
                distance_3d_m: geometry.map(|g| g.distance_3d_m),
                elevation_deg: geometry.map(|g| g.elevation_deg),
                pci: segment.pci,
                cfo_hz: segment.cfo_hz,
                rsrp_dbfs: segment.rsrp_dbfs,
                pss_metric: segment.pss_metric,
                detected: segment.detected,
            }
        })
        .collect())
}

pub fn write_geosamples_csv(path: &Path, rows: &[GeoRow]) -> Result<(), PipelineError> {
    let mut text = String::from(GEOSAMPLES_CSV_HEADER);
    text.push('\n');
    for r in rows {
        let _ = write!(text, "{},{}", r.segment_index, r.capture_time);
        push_opt(&mut text, &r.latitude);
        push_opt(&mut text, &r.longitude);
        push_opt(&mut text, &r.altitude_m);
        push_opt(&mut text, &r.ground_distance_m);
        push_opt(&mut text, &r.distance_3d_m);
        push_opt(&mut text, &r.elevation_deg);
        push_opt(&mut text, &r.pci);
        push_opt(&mut text, &r.cfo_hz);
        push_opt(&mut text, &r.rsrp_dbfs);
        push_opt(&mut text, &r.pss_metric);
        let _ = write!(text, ",{}", r.detected);
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_geosamples_csv(path: &Path) -> Result<Vec<GeoRow>, PipelineError> {
    read_csv_rows(path, GEOSAMPLES_CSV_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            Ok(GeoRow {
                segment_index: parse_cell(&f[0], "segment_index", path, line)?,
                capture_time: parse_cell(&f[1], "capture_time", path, line)?,
                latitude: parse_opt_cell(&f[2], "latitude", path, line)?,
                longitude: parse_opt_cell(&f[3], "longitude", path, line)?,
                altitude_m: parse_opt_cell(&f[4], "altitude_m", path, line)?,
                ground_distance_m: parse_opt_cell(&f[5], "ground_distance_m", path, line)?,
                distance_3d_m: parse_opt_cell(&f[6], "distance_3d_m", path, line)?,
                elevation_deg: parse_opt_cell(&f[7], "elevation_deg", path, line)?,
                pci: parse_opt_cell(&f[8], "pci", path, line)?,
                cfo_hz: parse_opt_cell(&f[9], "cfo_hz", path, line)?,
                rsrp_dbfs: parse_opt_cell(&f[10], "rsrp_dbfs", path, line)?,
                pss_metric: parse_opt_cell(&f[11], "pss_metric", path, line)?,
                detected: parse_cell(&f[12], "detected", path, line)?,
            })
        })
        .collect()
}

/// Shadowing residuals and both distribution fits, as reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowingReport {
    pub samples_db: Vec<f64>,
    pub gaussian: GaussianFit,
    pub skew_normal: SkewNormalFit,
}

/// Model-predicted RSRP beside the measurement, one row per fitted
/// sample, for external plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub segment_index: usize,
    pub capture_time: f64,
    pub ground_distance_m: f64,
    pub distance_3d_m: f64,
    pub rsrp_dbfs: f64,
    pub fspl_rsrp_db: f64,
    pub two_ray_rsrp_db: f64,
}

/// The complete fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_samples: usize,
    pub wavelength_m: f64,
    pub fspl: PropagationFit,
    pub two_ray: PropagationFit,
    /// Present when enough samples survived for a distribution fit.
    pub shadowing: Option<ShadowingReport>,
    pub predictions: Vec<Prediction>,
}

/// Reconstructs the link geometry of a fused row; the heights come
/// from the configured antenna height and the elevation angle.
fn row_geometry(row: &GeoRow, antenna_height_m: f64) -> Option<LinkGeometry> {
    let ground = row.ground_distance_m?;
    let slant = row.distance_3d_m?;
    let elevation = row.elevation_deg?;
    let dh = slant * elevation.to_radians().sin();
    Some(LinkGeometry {
        ground_distance_m: ground,
        distance_3d_m: slant,
        elevation_deg: elevation,
        tx_height_m: antenna_height_m,
        rx_height_m: antenna_height_m + dh,
    })
}

/// Fits both path-loss models and the shadowing distributions to the
/// detected, geolocated samples.
pub fn fit_geosamples(
    rows: &[GeoRow],
    config: &PipelineConfig,
) -> Result<FitReport, PipelineError> {
    let two_ray_cfg = config.two_ray();
    let antenna_height = config.tx_anchor.antenna_height_m;
    let mut samples = Vec::new();
    let mut kept: Vec<&GeoRow> = Vec::new();
    for row in rows {
        if !row.detected {
            continue;
        }
        let (Some(geometry), Some(rsrp_db)) = (row_geometry(row, antenna_height), row.rsrp_dbfs)
        else {
            continue;
        };
        samples.push(PathLossSample { geometry, rsrp_db });
        kept.push(row);
    }
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(PipelineError::TooFewDetections {
            got: samples.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }

    let fspl = fit_path_loss(&samples, PathLossModel::Fspl, &two_ray_cfg)?;
    let two_ray = fit_path_loss(&samples, PathLossModel::TwoRay, &two_ray_cfg)?;
    let residuals = extract_shadowing(&samples, &two_ray, &two_ray_cfg);
    let shadowing = if residuals.len() >= MIN_SHADOWING_SAMPLES {
        match fit_shadowing(&residuals) {
            Ok(fit) => Some(ShadowingReport {
                samples_db: residuals,
                gaussian: fit.gaussian,
                skew_normal: fit.skew_normal,
            }),
            // A perfectly explained signal has no spread to fit.
            Err(PropError::DegenerateSamples) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };

    let mut predictions = Vec::with_capacity(samples.len());
    for (row, sample) in kept.iter().zip(&samples) {
        let (Ok(fspl_pl), Ok(two_ray_pl)) = (
            path_loss_db(PathLossModel::Fspl, &sample.geometry, &two_ray_cfg),
            path_loss_db(PathLossModel::TwoRay, &sample.geometry, &two_ray_cfg),
        ) else {
            continue;
        };
        predictions.push(Prediction {
            segment_index: row.segment_index,
            capture_time: row.capture_time,
            ground_distance_m: sample.geometry.ground_distance_m,
            distance_3d_m: sample.geometry.distance_3d_m,
            rsrp_dbfs: sample.rsrp_db,
            fspl_rsrp_db: fspl.p0_db - fspl_pl,
            two_ray_rsrp_db: two_ray.p0_db - two_ray_pl,
        });
    }

    Ok(FitReport {
        n_samples: samples.len(),
        wavelength_m: two_ray_cfg.wavelength_m,
        fspl,
        two_ray,
        shadowing,
        predictions,
    })
}

pub fn write_report(path: &Path, report: &FitReport) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<FitReport, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Synthesis parameters beyond what the pipeline config carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub pci: u16,
    pub n_segments: usize,
    pub snr_db: Option<f64>,
    pub cfo_hz: f64,
    /// Base-rate samples of dead time before the signal in every
    /// segment; shows up as the decoded timing offset.
    pub delay_samples: usize,
    pub seed: u64,
    pub start_time: f64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            pci: 301,
            n_segments: 50,
            snr_db: Some(20.0),
            cfo_hz: 0.0,
            delay_samples: 0,
            seed: 0,
            start_time: 1.6e9,
        }
    }
}

/// Synthesizes a flight capture: one segment per period, each run
/// through the two-ray channel at the trajectory position of its
/// capture time, and writes the SigMF recording plus the GPS log.
/// The trajectory must cover the capture times, which start at
/// `options.start_time`.
pub fn synth_flight(
    options: &SynthOptions,
    trajectory: &[GpsFix],
    config: &PipelineConfig,
    out_base: &Path,
    gps_out: &Path,
) -> Result<(PathBuf, PathBuf), PipelineError> {
    let cell = CellIdentity::new(options.pci)?;
    let phy = LtePhyConfig::default();
    let base_rate = phy.sample_rate_hz();
    let out_rate = config.capture.sample_rate_hz;
    let out_samples = (config.capture.segment_duration_s * out_rate).round() as usize;
    let base_samples = (config.capture.segment_duration_s * base_rate).round() as usize;
    let period_samples = (config.capture.segment_period_s * base_rate).round() as u64;
    let frame = phy.frame_samples() as u64;
    let track = GpsTrack::new(trajectory.to_vec())?;
    let anchor = config.tx_anchor.to_anchor();
    let two_ray_cfg = config.two_ray();
    let scales = ChannelScales::default();

    let mut segments = Vec::with_capacity(options.n_segments);
    for k in 0..options.n_segments {
        let t = options.start_time + k as f64 * config.capture.segment_period_s;
        let (fix, _) = track.position_at(t)?;
        let geometry = link_geometry(&anchor, &fix);
        let gain = two_ray_amplitude(&geometry, &two_ray_cfg)?;
        let frame_phase = ((k as u64 * period_samples) % frame) as usize;
        let clean = synthesize_stream(&cell, frame_phase, base_samples, &scales, &phy)?;
        let spec = ImpairmentSpec {
            delay_samples: options.delay_samples,
            channel: ChannelSpec::Flat(gain),
            cfo_hz: options.cfo_hz,
            snr_db: options.snr_db,
            input_rate: base_rate,
            output_rate: out_rate,
        };
        let mut samples = apply_impairments(&clean, &spec, options.seed ^ k as u64)?;
        samples.truncate(out_samples);
        segments.push(IqSegment {
            segment_index: k,
            capture_time: t,
            sample_rate: out_rate,
            center_frequency: config.capture.center_frequency_hz,
            samples,
        });
    }
    let written = write_recording(out_base, &segments, Some("synthetic downlink flight"))?;
    write_gps_csv(gps_out, trajectory)?;
    Ok(written)
}

/// Parameters of the generated sweep-and-return trajectory: legs
/// alternate due south and due north, stepping east between legs.
#[derive(Debug, Clone, PartialEq)]
pub struct ZigzagParams {
    pub start_time: f64,
    /// East offset of the first leg from the anchor.
    pub start_east_m: f64,
    pub n_legs: usize,
    pub leg_length_m: f64,
    pub east_step_m: f64,
    pub speed_m_s: f64,
    /// Flight altitude above the anchor's ground.
    pub altitude_m: f64,
    pub fix_interval_s: f64,
}

impl Default for ZigzagParams {
    fn default() -> Self {
        ZigzagParams {
            start_time: 1.6e9,
            start_east_m: 100.0,
            n_legs: 4,
            leg_length_m: 300.0,
            east_step_m: 50.0,
            speed_m_s: 10.0,
            altitude_m: 50.0,
            fix_interval_s: 1.0,
        }
    }
}

/// Generates GPS fixes along a zigzag flight around the anchor.
pub fn zigzag_track(anchor: &TxAnchor, params: &ZigzagParams) -> Vec<GpsFix> {
    let mut waypoints = vec![[params.start_east_m, 0.0]];
    let mut east = params.start_east_m;
    for leg in 0..params.n_legs {
        let north = if leg % 2 == 0 {
            -params.leg_length_m
        } else {
            0.0
        };
        waypoints.push([east, north]);
        if leg + 1 < params.n_legs {
            east += params.east_step_m;
            waypoints.push([east, north]);
        }
    }
    let mut cumulative = vec![0.0];
    for pair in waypoints.windows(2) {
        let d = (pair[1][0] - pair[0][0]).hypot(pair[1][1] - pair[0][1]);
        cumulative.push(cumulative.last().unwrap() + d);
    }
    let total = *cumulative.last().unwrap();
    let duration = total / params.speed_m_s;
    let n_intervals = (duration / params.fix_interval_s).ceil() as usize;

    let ref_ecef = geodetic_to_ecef(
        anchor.latitude_deg,
        anchor.longitude_deg,
        anchor.ground_alt_m,
    );
    (0..=n_intervals)
        .map(|i| {
            let t = i as f64 * params.fix_interval_s;
            let s = (t * params.speed_m_s).min(total);
            let j = cumulative[..cumulative.len() - 1]
                .iter()
                .rposition(|&c| c <= s)
                .unwrap_or(0);
            let span = cumulative[j + 1] - cumulative[j];
            let frac = if span > 0.0 {
                (s - cumulative[j]) / span
            } else {
                0.0
            };
            let e = waypoints[j][0] + frac * (waypoints[j + 1][0] - waypoints[j][0]);
            let n = waypoints[j][1] + frac * (waypoints[j + 1][1] - waypoints[j][1]);
            let ecef = enu_to_ecef(
                [e, n, params.altitude_m],
                ref_ecef,
                anchor.latitude_deg,
                anchor.longitude_deg,
            );
            let (latitude_deg, longitude_deg, altitude_m) = ecef_to_geodetic(ecef);
            GpsFix {
                time_utc: params.start_time + t,
                latitude_deg,
                longitude_deg,
                altitude_m,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propmodel::fspl_db;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("aeriq-pipeline-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn default_config_is_valid_and_capture_shaped() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.capture.sample_rate_hz, 2.0e6);
        assert_eq!(config.capture.center_frequency_hz, 3.51e9);
        assert_eq!(config.capture.segment_duration_s, 0.020);
        assert_eq!(config.capture.segment_period_s, 0.100);
        assert_eq!(config.tx_anchor.antenna_height_m, 10.0);
        assert_eq!(config.processing.detection_threshold, 0.15);
    }

    #[test]
    fn config_file_overrides_only_named_keys() {
        let path = tmp("override.toml");
        fs::write(
            &path,
            "[processing]\ndetection_threshold = 0.3\n\n[tx_anchor]\nantenna_height_m = 25.0\n",
        )
        .unwrap();
        let config = load_config(Some(&path)).unwrap();
        assert_eq!(config.processing.detection_threshold, 0.3);
        assert_eq!(config.tx_anchor.antenna_height_m, 25.0);
        assert_eq!(config.capture.sample_rate_hz, 2.0e6);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let path = tmp("unknown.toml");
        fs::write(&path, "[capture]\nsample_rate = 2e6\n").unwrap();
        assert!(matches!(
            load_config(Some(&path)),
            Err(PipelineError::Config { .. })
        ));
    }

    #[test]
    fn invalid_config_values_are_rejected() {
        let path = tmp("invalid.toml");
        fs::write(&path, "[capture]\nsample_rate_hz = -1.0\n").unwrap();
        assert!(matches!(
            load_config(Some(&path)),
            Err(PipelineError::InvalidConfig { .. })
        ));
        let path2 = tmp("invalid2.toml");
        fs::write(&path2, "[models]\nepsilon_r = 0.5\n").unwrap();
        assert!(matches!(
            load_config(Some(&path2)),
            Err(PipelineError::InvalidConfig { .. })
        ));
    }

    fn sample_rows() -> Vec<SegmentRow> {
        vec![
            SegmentRow {
                segment_index: 0,
                capture_time: 1.6e9,
                detected: true,
                pci: Some(301),
                timing_offset: Some(1234),
                cfo_hz: Some(-271.25),
                pss_metric: Some(0.93),
                sss_metric: Some(0.88),
                subframe: Some(0),
                rsrp_dbfs: Some(-43.21098765),
            },
            SegmentRow {
                segment_index: 1,
                capture_time: 1.6e9 + 0.1,
                detected: false,
                pci: None,
                timing_offset: None,
                cfo_hz: Some(13.5),
                pss_metric: Some(0.07),
                sss_metric: None,
                subframe: None,
                rsrp_dbfs: None,
            },
        ]
    }

    #[test]
    fn segments_csv_round_trips_exactly() {
        let path = tmp("segments.csv");
        let rows = sample_rows();
        write_segments_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(SEGMENTS_CSV_HEADER));
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .contains(",false,,,13.5,0.07,,,"));
        assert_eq!(read_segments_csv(&path).unwrap(), rows);
    }

    #[test]
    fn geosamples_csv_round_trips_exactly() {
        let path = tmp("geosamples.csv");
        let rows = vec![
            GeoRow {
                segment_index: 0,
                capture_time: 1.6e9,
                latitude: Some(35.7261234),
                longitude: Some(-78.6951),
                altitude_m: Some(52.5),
                ground_distance_m: Some(141.42),
                distance_3d_m: Some(148.0),
                elevation_deg: Some(16.1),
                pci: Some(301),
                cfo_hz: Some(-270.0),
                rsrp_dbfs: Some(-44.0),
                pss_metric: Some(0.9),
                detected: true,
            },
            GeoRow {
                segment_index: 1,
                capture_time: 1.6e9 + 0.1,
                latitude: None,
                longitude: None,
                altitude_m: None,
                ground_distance_m: None,
                distance_3d_m: None,
                elevation_deg: None,
                pci: None,
                cfo_hz: None,
                rsrp_dbfs: None,
                pss_metric: None,
                detected: false,
            },
        ];
        write_geosamples_csv(&path, &rows).unwrap();
        assert_eq!(read_geosamples_csv(&path).unwrap(), rows);
    }

    #[test]
    fn csv_schema_violations_are_reported_with_position() {
        let path = tmp("bad.csv");
        fs::write(&path, "wrong,header\n").unwrap();
        match read_segments_csv(&path) {
            Err(PipelineError::Csv { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        fs::write(
            &path,
            format!("{SEGMENTS_CSV_HEADER}\n0,1.0,true,301,8,1.0,0.9,0.8,0\n"),
        )
        .unwrap();
        match read_segments_csv(&path) {
            Err(PipelineError::Csv { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foreign_gps_logs_read_through_a_column_map() {
        let path = tmp("foreign_gps.csv");
        fs::write(
            &path,
            "lat,seq,lon,ts,alt\n35.7,0,-78.7,100.5,30.25\n35.71,1,-78.69,101.5,31.0\n",
        )
        .unwrap();
        let map: GpsColumnMap = "ts,lat,lon,alt".parse().unwrap();
        let fixes = read_gps_csv_mapped(&path, &map).unwrap();
        assert_eq!(fixes.len(), 2);
        assert_eq!(fixes[0].time_utc, 100.5);
        assert_eq!(fixes[0].latitude_deg, 35.7);
        assert_eq!(fixes[1].longitude_deg, -78.69);
        assert_eq!(fixes[1].altitude_m, 31.0);
        // The standard schema reads through the default map too.
        let std_path = tmp("std_gps.csv");
        crate::sigmf::write_gps_csv(&std_path, &fixes).unwrap();
        assert_eq!(
            read_gps_csv_mapped(&std_path, &GpsColumnMap::default()).unwrap(),
            fixes
        );
        // A name missing from the header is a schema error.
        let bad: GpsColumnMap = "ts,lat,lon,height".parse().unwrap();
        assert!(matches!(
            read_gps_csv_mapped(&path, &bad),
            Err(PipelineError::Csv { line: 1, .. })
        ));
        assert!("a,b,c".parse::<GpsColumnMap>().is_err());
    }

    #[test]
    fn fuse_places_segments_on_the_track() {
        let anchor = AnchorConfig::default();
        let mut config = PipelineConfig::default();
        config.processing.clock_offset_s = 0.5;
        let params = ZigzagParams {
            start_time: 1000.0,
            ..ZigzagParams::default()
        };
        let fixes = zigzag_track(&anchor.to_anchor(), &params);
        let segments: Vec<SegmentRow> = (0..3)
            .map(|i| SegmentRow {
                segment_index: i,
                // minus the clock offset so lookup lands on fix i.
                capture_time: 1000.0 + i as f64 - 0.5,
                detected: true,
                pci: Some(7),
                timing_offset: Some(0),
                cfo_hz: Some(0.0),
                pss_metric: Some(1.0),
                sss_metric: Some(1.0),
                subframe: Some(0),
                rsrp_dbfs: Some(-30.0),
            })
            .collect();
        let rows = fuse_segments(&segments, fixes.clone(), &config).unwrap();
        assert_eq!(rows.len(), 3);
        for (i, row) in rows.iter().enumerate() {
            assert!((row.latitude.unwrap() - fixes[i].latitude_deg).abs() < 1e-12);
            assert!((row.longitude.unwrap() - fixes[i].longitude_deg).abs() < 1e-12);
            assert!(row.ground_distance_m.unwrap() > 0.0);
        }
    }

    #[test]
    fn fuse_with_disjoint_spans_fails() {
        let anchor = AnchorConfig::default().to_anchor();
        let params = ZigzagParams {
            start_time: 0.0,
            ..ZigzagParams::default()
        };
        let fixes = zigzag_track(&anchor, &params);
        let segments = vec![SegmentRow {
            segment_index: 0,
            capture_time: 1.0e6,
            detected: false,
            pci: None,
            timing_offset: None,
            cfo_hz: None,
            pss_metric: None,
            sss_metric: None,
            subframe: None,
            rsrp_dbfs: None,
        }];
        assert!(matches!(
            fuse_segments(&segments, fixes, &PipelineConfig::default()),
            Err(PipelineError::Geo(GeoError::NoOverlap))
        ));
    }

    #[test]
    fn fit_recovers_a_noiseless_free_space_intercept() {
        let config = PipelineConfig {
            models: ModelConfig {
                reflection: ReflectionKind::Fixed,
                gamma_re: 0.0,
                gamma_im: 0.0,
                tx_pattern: PatternKind::Isotropic,
                rx_pattern: PatternKind::Isotropic,
                ..ModelConfig::default()
            },
            ..PipelineConfig::default()
        };
        let lambda = wavelength_m(config.capture.center_frequency_hz);
        let h = config.tx_anchor.antenna_height_m;
        let rows: Vec<GeoRow> = (0..40)
            .map(|i| {
                let geometry = LinkGeometry::from_heights(80.0 + 30.0 * i as f64, h, h + 40.0);
                GeoRow {
                    segment_index: i,
                    capture_time: i as f64,
                    latitude: Some(35.7),
                    longitude: Some(-78.7),
                    altitude_m: Some(50.0),
                    ground_distance_m: Some(geometry.ground_distance_m),
                    distance_3d_m: Some(geometry.distance_3d_m),
                    elevation_deg: Some(geometry.elevation_deg),
                    pci: Some(301),
                    cfo_hz: Some(0.0),
                    rsrp_dbfs: Some(-12.0 - fspl_db(geometry.distance_3d_m, lambda).unwrap()),
                    pss_metric: Some(1.0),
                    detected: true,
                }
            })
            .collect();
        let report = fit_geosamples(&rows, &config).unwrap();
        assert!((report.fspl.p0_db - -12.0).abs() < 1e-9);
        assert!(report.fspl.rmse_db < 1e-9);
        assert_eq!(report.n_samples, 40);
        assert_eq!(report.predictions.len(), 40);
        // With Gamma = 0 the two-ray model is free space too.
        assert!((report.two_ray.p0_db - report.fspl.p0_db).abs() < 1e-9);
        // Residuals are numerically zero: no distribution to fit.
        assert!(report.shadowing.is_none());
    }

    #[test]
    fn fit_requires_detections() {
        let rows = vec![GeoRow {
            segment_index: 0,
            capture_time: 0.0,
            latitude: None,
            longitude: None,
            altitude_m: None,
            ground_distance_m: None,
            distance_3d_m: None,
            elevation_deg: None,
            pci: None,
            cfo_hz: None,
            rsrp_dbfs: None,
            pss_metric: None,
            detected: false,
        }];
        assert!(matches!(
            fit_geosamples(&rows, &PipelineConfig::default()),
            Err(PipelineError::TooFewDetections { got: 0, .. })
        ));
    }

    #[test]
    fn report_round_trips_through_its_reader() {
        let mut config = PipelineConfig::default();
        config.models.reflection = ReflectionKind::Fixed;
        config.models.gamma_re = -0.9;
        config.models.tx_pattern = PatternKind::Isotropic;
        config.models.rx_pattern = PatternKind::Isotropic;
        let lambda = wavelength_m(config.capture.center_frequency_hz);
        let h = config.tx_anchor.antenna_height_m;
        let rows: Vec<GeoRow> = (0..35)
            .map(|i| {
                let geometry = LinkGeometry::from_heights(100.0 + 20.0 * i as f64, h, h + 50.0);
                GeoRow {
                    segment_index: i,
                    capture_time: i as f64 * 0.1,
                    latitude: Some(35.7),
                    longitude: Some(-78.7),
                    altitude_m: Some(60.0),
                    ground_distance_m: Some(geometry.ground_distance_m),
                    distance_3d_m: Some(geometry.distance_3d_m),
                    elevation_deg: Some(geometry.elevation_deg),
                    pci: Some(77),
                    cfo_hz: Some(10.0),
                    rsrp_dbfs: Some(
                        -20.0 - fspl_db(geometry.distance_3d_m, lambda).unwrap()
                            + ((i * 37) % 11) as f64 * 0.3,
                    ),
                    pss_metric: Some(0.95),
                    detected: true,
                }
            })
            .collect();
        let report = fit_geosamples(&rows, &config).unwrap();
        let path = tmp("report.json");
        write_report(&path, &report).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
    }

    #[test]
    fn zigzag_sweeps_south_and_north() {
        let anchor = AnchorConfig::default().to_anchor();
        let params = ZigzagParams::default();
        let fixes = zigzag_track(&anchor, &params);
        assert!(fixes.len() > 100);
        // Times are uniform; the path stays south of the anchor's
        // latitude and inside one leg length.
        let ref_lat = anchor.latitude_deg;
        for fix in &fixes {
            assert!(fix.latitude_deg <= ref_lat + 1e-9);
        }
        let min_lat = fixes
            .iter()
            .map(|f| f.latitude_deg)
            .fold(f64::INFINITY, f64::min);
        // Full leg reached: about leg_length_m south.
        let south_m = (ref_lat - min_lat).to_radians() * 6.37e6;
        assert!((south_m - params.leg_length_m).abs() < 5.0, "{south_m}");
        // Longitude drifts monotonically east overall.
        assert!(fixes.last().unwrap().longitude_deg > fixes[0].longitude_deg);
        // Altitude above the anchor ground.
        for fix in &fixes {
            assert!((fix.altitude_m - params.altitude_m).abs() < 0.1);
        }
    }

    #[test]
    fn decode_recovers_synthesized_segments() {
        let config = PipelineConfig::default();
        let fixes = zigzag_track(&config.tx_anchor.to_anchor(), &ZigzagParams::default());
        let options = SynthOptions {
            pci: 172,
            n_segments: 3,
            snr_db: Some(15.0),
            cfo_hz: -800.0,
            delay_samples: 500,
            ..SynthOptions::default()
        };
        let base = tmp("decodeflight");
        let gps = tmp("decodeflight_gps.csv");
        synth_flight(&options, &fixes, &config, &base, &gps).unwrap();
        let rows = decode_recording(&base, &DecodeOptions::from_config(&config, 1)).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows {
            assert!(row.detected, "{row:?}");
            assert_eq!(row.pci, Some(172));
            let timing = row.timing_offset.unwrap() as i64;
            assert!((timing - 500).abs() <= 1, "{timing}");
            assert!((row.cfo_hz.unwrap() + 800.0).abs() < 50.0);
            assert!(row.rsrp_dbfs.is_some());
        }
        let rows4 = decode_recording(&base, &DecodeOptions::from_config(&config, 4)).unwrap();
        assert_eq!(rows, rows4);
    }

    #[test]
    fn synth_emits_capture_shaped_segments() {
        let config = PipelineConfig::default();
        let params = ZigzagParams::default();
        let fixes = zigzag_track(&config.tx_anchor.to_anchor(), &params);
        let options = SynthOptions {
            n_segments: 3,
            snr_db: None,
            ..SynthOptions::default()
        };
        let base = tmp("synthflight");
        let gps = tmp("synthflight_gps.csv");
        let (meta, data) = synth_flight(&options, &fixes, &config, &base, &gps).unwrap();
        let (_, segments) = read_recording(&meta, &data).unwrap();
        assert_eq!(segments.len(), 3);
        for (k, segment) in segments.iter().enumerate() {
            assert_eq!(segment.samples.len(), 40_000);
            assert_eq!(segment.sample_rate, 2.0e6);
            assert_eq!(segment.center_frequency, 3.51e9);
            assert!((segment.capture_time - (options.start_time + 0.1 * k as f64)).abs() < 1e-6);
        }
        let gps_read = crate::sigmf::read_gps_csv(&gps).unwrap();
        assert_eq!(gps_read.len(), fixes.len());
        assert!((gps_read[0].time_utc - options.start_time).abs() < 1e-6);
    }
}
