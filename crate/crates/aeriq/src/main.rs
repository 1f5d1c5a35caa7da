use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use aeriq::pipeline::{
    decode_recording, fit_geosamples, fuse_segments, load_config, read_geosamples_csv,
    read_gps_csv_mapped, read_segments_csv, synth_flight, write_geosamples_csv, write_report,
    write_segments_csv, zigzag_track, DecodeOptions, GpsColumnMap, SynthOptions, ZigzagParams,
};
use aeriq::sigmf::{
    gps_fixes_to_sigmf, read_recording, recording_paths, sigmf_to_gps_csv, validate_recording,
    write_recording, IqSegment,
};

#[derive(Parser)]
#[command(
    name = "aeriq",
    version,
    about = "LTE downlink decoding, GPS fusion, and air-to-ground propagation fitting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode a SigMF recording into per-segment sync and RSRP rows.
    Decode(DecodeArgs),
    /// Attach GPS positions and link geometry to decoded segments.
    Fuse(FuseArgs),
    /// Fit path-loss and shadowing models to geolocated samples.
    Fit(FitArgs),
    /// Synthesize a flight recording and its GPS log.
    Synth(SynthArgs),
    /// Convert between SigMF recordings and raw or CSV files.
    Convert(ConvertArgs),
    /// Check a recording's structural invariants.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct DecodeArgs {
    /// Recording base path, or either file of the SigMF pair.
    #[arg(long)]
    recording: PathBuf,
    /// Output segments CSV.
    #[arg(long, default_value = "segments.csv")]
    out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; 0 means one per available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Override the configured detection threshold.
    #[arg(long, allow_negative_numbers = true)]
    detection_threshold: Option<f64>,
    /// Override the configured RSRP calibration offset.
    #[arg(long, allow_negative_numbers = true)]
    calibration_offset_db: Option<f64>,
}

#[derive(Args)]
struct FuseArgs {
    /// Segments CSV from `decode`.
    #[arg(long)]
    segments: PathBuf,
    /// GPS log CSV.
    #[arg(long)]
    gps: PathBuf,
    /// Column names of a foreign GPS log, as time,latitude,longitude,altitude.
    #[arg(long)]
    gps_columns: Option<GpsColumnMap>,
    /// Output geolocated samples CSV.
    #[arg(long, default_value = "geosamples.csv")]
    out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured receiver clock offset, in seconds.
    #[arg(long, allow_negative_numbers = true)]
    clock_offset_s: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    /// Geolocated samples CSV from `fuse`.
    #[arg(long)]
    geosamples: PathBuf,
    /// Output report JSON.
    #[arg(long, default_value = "fit_report.json")]
    out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Physical cell identity to transmit.
    #[arg(long)]
    pci: u16,
    /// Number of capture segments.
    #[arg(long, default_value_t = 50)]
    segments: usize,
    /// Output recording base path.
    #[arg(long)]
    out_base: PathBuf,
    /// Output GPS CSV; defaults to <out-base>_gps.csv.
    #[arg(long)]
    gps_out: Option<PathBuf>,
    /// Trajectory CSV (time_utc,latitude_deg,longitude_deg,altitude_m);
    /// a zigzag sweep is generated when omitted.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Signal-to-noise ratio; noiseless when omitted.
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Carrier frequency offset to inject.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    cfo_hz: f64,
    /// Dead samples before the signal, at the 1.92 MHz base rate.
    #[arg(long, default_value_t = 0)]
    delay_samples: usize,
    /// Noise seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First capture time (UTC seconds); defaults to the trajectory start.
    #[arg(long, allow_negative_numbers = true)]
    start_time: Option<f64>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Zigzag legs.
    #[arg(long, default_value_t = 4)]
    legs: usize,
    /// Zigzag leg length, metres.
    #[arg(long, default_value_t = 300.0)]
    leg_length_m: f64,
    /// Zigzag eastward step between legs, metres.
    #[arg(long, default_value_t = 50.0)]
    east_step_m: f64,
    /// Zigzag speed, metres per second.
    #[arg(long, default_value_t = 10.0)]
    speed_m_s: f64,
    /// Zigzag flight altitude above the anchor ground, metres.
    #[arg(long, default_value_t = 50.0, allow_negative_numbers = true)]
    altitude_m: f64,
    /// Zigzag east offset of the first leg, metres.
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    start_east_m: f64,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(subcommand)]
    direction: ConvertCommand,
}

#[derive(Subcommand)]
enum ConvertCommand {
    /// GPS CSV to a SigMF recording pair.
    GpsToSigmf {
        /// Input GPS CSV.
        #[arg(long)]
        csv: PathBuf,
        /// Output recording base path.
        #[arg(long)]
        out_base: PathBuf,
        /// Column names of a foreign log, as time,latitude,longitude,altitude.
        #[arg(long)]
        columns: Option<GpsColumnMap>,
    },
    /// GPS SigMF recording back to CSV.
    SigmfToGps {
        /// Recording base path, or either file of the pair.
        #[arg(long)]
        recording: PathBuf,
        /// Output GPS CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Raw interleaved complex float64 I/Q to a SigMF recording.
    IqToSigmf {
        /// Input raw file.
        #[arg(long)]
        raw: PathBuf,
        /// Output recording base path.
        #[arg(long)]
        out_base: PathBuf,
        /// Sample rate of the raw stream, Hz.
        #[arg(long)]
        sample_rate: f64,
        /// Center frequency tag, Hz.
        #[arg(long)]
        center_frequency: f64,
        /// Capture time tag (UTC seconds).
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        start_time: f64,
    },
    /// SigMF recording to raw interleaved complex float64 I/Q.
    SigmfToIq {
        /// Recording base path, or either file of the pair.
        #[arg(long)]
        recording: PathBuf,
        /// Output raw file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ValidateArgs {
    /// Recording base path, or either file of the pair.
    #[arg(long)]
    recording: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let usage_ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Decode(args) => cmd_decode(args),
        Command::Fuse(args) => cmd_fuse(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Convert(args) => cmd_convert(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_decode(args: DecodeArgs) -> Result<ExitCode> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(t) = args.detection_threshold {
        config.processing.detection_threshold = t;
    }
    if let Some(c) = args.calibration_offset_db {
        config.processing.calibration_offset_db = c;
    }
    config.validate()?;
    let options = DecodeOptions::from_config(&config, args.workers);
    let rows = decode_recording(&args.recording, &options)?;
    write_segments_csv(&args.out, &rows)?;
    let detected = rows.iter().filter(|r| r.detected).count();
    eprintln!(
        "decoded {} segments ({} detected) -> {}",
        rows.len(),
        detected,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fuse(args: FuseArgs) -> Result<ExitCode> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(o) = args.clock_offset_s {
        config.processing.clock_offset_s = o;
    }
    let segments = read_segments_csv(&args.segments)?;
    let map = args.gps_columns.unwrap_or_default();
    let fixes = read_gps_csv_mapped(&args.gps, &map)?;
    let rows = fuse_segments(&segments, fixes, &config)?;
    write_geosamples_csv(&args.out, &rows)?;
    let placed = rows.iter().filter(|r| r.latitude.is_some()).count();
    eprintln!(
        "fused {} segments ({} with GPS) -> {}",
        rows.len(),
        placed,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(args: FitArgs) -> Result<ExitCode> {
    let config = load_config(args.config.as_deref())?;
    let rows = read_geosamples_csv(&args.geosamples)?;
    let report = fit_geosamples(&rows, &config)?;
    write_report(&args.out, &report)?;
    eprintln!(
        "fitted {} samples: fspl p0 {:.2} dB rmse {:.2} dB, two-ray p0 {:.2} dB rmse {:.2} dB -> {}",
        report.n_samples,
        report.fspl.p0_db,
        report.fspl.rmse_db,
        report.two_ray.p0_db,
        report.two_ray.rmse_db,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let config = load_config(args.config.as_deref())?;
    let trajectory = match &args.trajectory {
        Some(path) => read_gps_csv_mapped(path, &GpsColumnMap::default())?,
        None => zigzag_track(
            &config.tx_anchor.to_anchor(),
            &ZigzagParams {
                start_time: args.start_time.unwrap_or(1.6e9),
                start_east_m: args.start_east_m,
                n_legs: args.legs,
                leg_length_m: args.leg_length_m,
                east_step_m: args.east_step_m,
                speed_m_s: args.speed_m_s,
                altitude_m: args.altitude_m,
                fix_interval_s: 1.0,
            },
        ),
    };
    let Some(first) = trajectory.first() else {
        bail!(
            "trajectory {} has no fixes",
            args.trajectory
                .as_deref()
                .unwrap_or(Path::new("<generated>"))
                .display()
        );
    };
    let options = SynthOptions {
        pci: args.pci,
        n_segments: args.segments,
        snr_db: args.snr_db,
        cfo_hz: args.cfo_hz,
        delay_samples: args.delay_samples,
        seed: args.seed,
        start_time: args.start_time.unwrap_or(first.time_utc),
    };
    let gps_out = args
        .gps_out
        .clone()
        .unwrap_or_else(|| default_gps_out(&args.out_base));
    let (meta, data) = synth_flight(&options, &trajectory, &config, &args.out_base, &gps_out)?;
    eprintln!(
        "synthesized {} segments, pci {} -> {}, {}, {}",
        options.n_segments,
        options.pci,
        meta.display(),
        data.display(),
        gps_out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn default_gps_out(out_base: &Path) -> PathBuf {
    let (meta, _) = recording_paths(out_base);
    let stem = meta
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_suffix(".sigmf-meta"))
        .unwrap_or("recording");
    meta.with_file_name(format!("{stem}_gps.csv"))
}

fn cmd_convert(args: ConvertArgs) -> Result<ExitCode> {
    match args.direction {
        ConvertCommand::GpsToSigmf {
            csv,
            out_base,
            columns,
        } => {
            let map = columns.unwrap_or_default();
            let fixes = read_gps_csv_mapped(&csv, &map)?;
            let (meta, data) = gps_fixes_to_sigmf(&fixes, &out_base)?;
            eprintln!(
                "converted {} fixes -> {}, {}",
                fixes.len(),
                meta.display(),
                data.display()
            );
        }
        ConvertCommand::SigmfToGps { recording, out } => {
            let (meta, data) = recording_paths(&recording);
            sigmf_to_gps_csv(&meta, &data, &out)?;
            eprintln!("converted {} -> {}", meta.display(), out.display());
        }
        ConvertCommand::IqToSigmf {
            raw,
            out_base,
            sample_rate,
            center_frequency,
            start_time,
        } => {
            let bytes =
                std::fs::read(&raw).with_context(|| format!("reading {}", raw.display()))?;
            if bytes.len() % 16 != 0 {
                bail!(
                    "{}: {} bytes is not a whole number of complex float64 samples",
                    raw.display(),
                    bytes.len()
                );
            }
            let samples: Vec<Complex64> = bytes
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect();
            let n = samples.len();
            let segment = IqSegment {
                segment_index: 0,
                capture_time: start_time,
                sample_rate,
                center_frequency,
                samples,
            };
            let (meta, data) = write_recording(&out_base, &[segment], None)?;
            eprintln!(
                "converted {n} samples -> {}, {}",
                meta.display(),
                data.display()
            );
        }
        ConvertCommand::SigmfToIq { recording, out } => {
            let (meta_path, data_path) = recording_paths(&recording);
            let (_, segments) = read_recording(&meta_path, &data_path)?;
            let mut bytes = Vec::new();
            for segment in &segments {
                for s in &segment.samples {
                    bytes.extend_from_slice(&s.re.to_le_bytes());
                    bytes.extend_from_slice(&s.im.to_le_bytes());
                }
            }
            std::fs::write(&out, bytes).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("converted {} -> {}", meta_path.display(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode> {
    let (meta, data) = recording_paths(&args.recording);
    let report = validate_recording(&meta, &data)?;
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.rule, check.detail);
    }
    if report.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}
