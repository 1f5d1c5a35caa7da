//! Synthesis of downlink frames and channel impairments for closed-loop
//! testing.
//!
//! A synthesized cell transmits what a low-bandwidth eNodeB radiates
//! even with no users attached: PSS and SSS in subframes 0 and 5, the
//! port-0 CRS in every slot, and a broadcast channel in subframe 0. The
//! broadcast region is filled with placeholder QPSK (pseudorandom but
//! fixed per cell), which keeps the stream exactly one radio frame
//! periodic; the receive chain only ever decodes the synchronization
//! signals and pilots around it.
//!
//! [`apply_impairments`] degrades a clean stream the way a real capture
//! would be: an unknown start delay, a (possibly per-segment) complex
//! channel gain, carrier frequency offset, additive white Gaussian
//! noise at a target SNR, and resampling to the recorder's rate — in
//! that order.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::lte::{
    crs_pilots, crs_subcarriers, ofdm_modulate, pss_sequence, sss_sequence, CellIdentity, LteError,
    LtePhyConfig, ResourceGrid, SubframePhase, SYNC_SEQUENCE_LEN,
};
use crate::resample::{RationalResampler, ResampleError};

/// Amplitude applied to each physical channel of a synthesized frame.
///
/// Resource elements default to unit power; scaling one channel up or
/// down models a transmitter that boosts its synchronization signals or
/// pilots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScales {
    pub pss: f64,
    pub sss: f64,
    pub crs: f64,
    pub pbch: f64,
}

impl Default for ChannelScales {
    fn default() -> Self {
        ChannelScales {
            pss: 1.0,
            sss: 1.0,
            crs: 1.0,
            pbch: 1.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Lte(#[from] LteError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error("gain series covers {got} segments but the signal spans {needed}")]
    SegmentGains { needed: usize, got: usize },
    #[error("cannot set an SNR against an all-zero signal")]
    ZeroPower,
}

/// Builds the resource grid of one 10 ms radio frame.
pub fn frame_grid(
    cell: &CellIdentity,
    scales: &ChannelScales,
    cfg: &LtePhyConfig,
) -> Result<ResourceGrid, LteError> {
    let per_slot = cfg.symbols_per_slot();
    let mut grid = ResourceGrid::new(cfg.n_subcarriers(), 20 * per_slot);

    let pss = pss_sequence(cell.n_id_2())?;
    for (slot, phase) in [(0, SubframePhase::Zero), (10, SubframePhase::Five)] {
        let sss = sss_sequence(cell.n_id_1(), cell.n_id_2(), phase)?;
        for (i, k) in cfg.centered_rows(SYNC_SEQUENCE_LEN).enumerate() {
            *grid.at_mut(k, slot * per_slot + per_slot - 1) = pss[i] * scales.pss;
            *grid.at_mut(k, slot * per_slot + per_slot - 2) =
                Complex64::new(sss[i] * scales.sss, 0.0);
        }
    }

    for slot in 0..20 {
        for symbol in [0, 4] {
            for (k, value) in crs_pilots(cell, slot, symbol, cfg)? {
                *grid.at_mut(k, slot * per_slot + symbol) = value * scales.crs;
            }
        }
    }

    // Broadcast placeholder: subframe 0, slot 1, first four symbols,
    // leaving the CRS rows of symbol 0 untouched. The QPSK filler is
    // seeded from the PCI alone so the frame is deterministic.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5042_4348 ^ u64::from(cell.pci()));
    let crs_rows = crs_subcarriers(cell, 0, cfg)?;
    let amplitude = scales.pbch * 0.5_f64.sqrt();
    for symbol in 0..4 {
        for k in 0..cfg.n_subcarriers() {
            if symbol == 0 && crs_rows.contains(&k) {
                continue;
            }
            let bits: u8 = rng.random();
            *grid.at_mut(k, per_slot + symbol) = Complex64::new(
                if bits & 1 == 0 { amplitude } else { -amplitude },
                if bits & 2 == 0 { amplitude } else { -amplitude },
            );
        }
    }
    Ok(grid)
}

/// Synthesizes one radio frame of time-domain samples at the base rate.
pub fn synthesize_frame(
    cell: &CellIdentity,
    scales: &ChannelScales,
    cfg: &LtePhyConfig,
) -> Result<Vec<Complex64>, LteError> {
    ofdm_modulate(&frame_grid(cell, scales, cfg)?, cfg)
}

/// Synthesizes `n_frames` contiguous radio frames.
pub fn synthesize_downlink(
    cell: &CellIdentity,
    n_frames: usize,
    scales: &ChannelScales,
    cfg: &LtePhyConfig,
) -> Result<Vec<Complex64>, LteError> {
    let frame = synthesize_frame(cell, scales, cfg)?;
    let mut out = Vec::with_capacity(frame.len() * n_frames);
    for _ in 0..n_frames {
        out.extend_from_slice(&frame);
    }
    Ok(out)
}

/// Cuts `len` samples out of the cell's continuous transmission,
/// starting `start_offset` samples into a radio frame.
///
/// The downlink stream is exactly frame-periodic, so a capture that
/// opens mid-frame is a rotated view of the same samples.
pub fn synthesize_stream(
    cell: &CellIdentity,
    start_offset: usize,
    len: usize,
    scales: &ChannelScales,
    cfg: &LtePhyConfig,
) -> Result<Vec<Complex64>, LteError> {
    let frame = synthesize_frame(cell, scales, cfg)?;
    Ok((0..len)
        .map(|i| frame[(start_offset + i) % frame.len()])
        .collect())
}

/// Complex channel gain applied to the (delayed) signal.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// One gain for the whole signal.
    Flat(Complex64),
    /// One gain per `segment_len`-sample stretch of signal, counted
    /// from the end of the start delay — how a slowly moving receiver
    /// sees a different link gain on every capture segment.
    PerSegment {
        gains: Vec<Complex64>,
        segment_len: usize,
    },
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec::Flat(Complex64::new(1.0, 0.0))
    }
}

/// The impairment chain applied to a clean downlink stream, in the
/// order the stages run: start delay, channel gain, carrier frequency
/// offset, additive noise, resampling to the output rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpairmentSpec {
    /// Zero samples prepended before the signal starts.
    pub delay_samples: usize,
    pub channel: ChannelSpec,
    /// Carrier frequency offset in Hz, applied as
    /// `exp(+j 2 pi cfo n / input_rate)`.
    pub cfo_hz: f64,
    /// Signal-to-noise ratio of added white Gaussian noise; `None`
    /// leaves the signal noiseless.
    pub snr_db: Option<f64>,
    /// Rate of the input samples.
    pub input_rate: f64,
    /// Rate to resample to after all other stages.
    pub output_rate: f64,
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        let base = LtePhyConfig::default().sample_rate_hz();
        ImpairmentSpec {
            delay_samples: 0,
            channel: ChannelSpec::default(),
            cfo_hz: 0.0,
            snr_db: None,
            input_rate: base,
            output_rate: base,
        }
    }
}

impl ImpairmentSpec {
    /// Non-fatal oddities worth surfacing: the spec is still applied
    /// as given.
    pub fn warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        let half_spacing = crate::lte::SUBCARRIER_SPACING_HZ / 2.0;
        if self.cfo_hz.abs() >= half_spacing {
            warnings.push(format!(
                "CFO {} Hz is at or beyond ±{} Hz and will alias modulo the \
                 {} Hz subcarrier spacing under CP-based estimation",
                self.cfo_hz,
                half_spacing,
                crate::lte::SUBCARRIER_SPACING_HZ,
            ));
        }
        warnings
    }
}

/// Applies the impairment chain to a signal.
///
/// The SNR is defined against the post-channel signal power (the delay
/// padding excluded), and the noise covers the whole output including
/// the padding. The same `seed` always produces the same output.
pub fn apply_impairments(
    signal: &[Complex64],
    spec: &ImpairmentSpec,
    seed: u64,
) -> Result<Vec<Complex64>, SynthError> {
    let delay = spec.delay_samples;
    let mut out = vec![Complex64::ZERO; delay + signal.len()];
    out[delay..].copy_from_slice(signal);

    match &spec.channel {
        ChannelSpec::Flat(gain) => {
            for v in &mut out[delay..] {
                *v *= gain;
            }
        }
        ChannelSpec::PerSegment { gains, segment_len } => {
            let needed = signal.len().div_ceil(*segment_len);
            if gains.len() < needed {
                return Err(SynthError::SegmentGains {
                    needed,
                    got: gains.len(),
                });
            }
            for (n, v) in out[delay..].iter_mut().enumerate() {
                *v *= gains[n / segment_len];
            }
        }
    }

    if spec.cfo_hz != 0.0 {
        let step = TAU * spec.cfo_hz / spec.input_rate;
        for (n, v) in out.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, step * n as f64);
        }
    }

    if let Some(snr_db) = spec.snr_db {
        let signal_power = out[delay..].iter().map(|v| v.norm_sqr()).sum::<f64>()
            / out[delay..].len().max(1) as f64;
        if signal_power <= 0.0 {
            return Err(SynthError::ZeroPower);
        }
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let sigma = (noise_power / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut out {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(sigma * re, sigma * im);
        }
    }

    if spec.output_rate != spec.input_rate {
        let resampler = RationalResampler::new(spec.input_rate, spec.output_rate)?;
        out = resampler.resample(&out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lte::ofdm_demodulate;

    fn cfg() -> LtePhyConfig {
        LtePhyConfig::default()
    }

    fn cell(pci: u16) -> CellIdentity {
        CellIdentity::new(pci).unwrap()
    }

    fn assert_cclose(got: Complex64, want: Complex64, tol: f64) {
        assert!(
            (got - want).norm() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn frames_are_periodic_and_sized() {
        let cfg = cfg();
        let two = synthesize_downlink(&cell(301), 2, &ChannelScales::default(), &cfg).unwrap();
        assert_eq!(two.len(), 2 * cfg.frame_samples());
        assert_eq!(two[..19200], two[19200..]);

        let stream =
            synthesize_stream(&cell(301), 500, 30_000, &ChannelScales::default(), &cfg).unwrap();
        assert_eq!(stream.len(), 30_000);
        assert_eq!(stream[..1000], two[500..1500]);
    }

    #[test]
    fn sync_signals_sit_in_their_symbols() {
        let cfg = cfg();
        let c = cell(301);
        let frame = synthesize_frame(&c, &ChannelScales::default(), &cfg).unwrap();
        let grid = ofdm_demodulate(&frame, 0, &cfg).unwrap();

        let pss = pss_sequence(c.n_id_2()).unwrap();
        let sss0 = sss_sequence(c.n_id_1(), c.n_id_2(), SubframePhase::Zero).unwrap();
        let sss5 = sss_sequence(c.n_id_1(), c.n_id_2(), SubframePhase::Five).unwrap();
        for (slot, sss) in [(0usize, &sss0), (10, &sss5)] {
            for (i, k) in cfg.centered_rows(SYNC_SEQUENCE_LEN).enumerate() {
                assert_cclose(grid.at(k, slot * 7 + 6), pss[i], 1e-9);
                assert_cclose(grid.at(k, slot * 7 + 5), Complex64::new(sss[i], 0.0), 1e-9);
            }
        }
        // Guard rows outside the central 62 subcarriers stay empty.
        for k in [0, 1, 2, 3, 4, 67, 68, 69, 70, 71] {
            assert_cclose(grid.at(k, 6), Complex64::ZERO, 1e-9);
            assert_cclose(grid.at(k, 5), Complex64::ZERO, 1e-9);
        }
    }

    #[test]
    fn crs_pilots_land_on_their_rows() {
        let cfg = cfg();
        let c = cell(301);
        let frame = synthesize_frame(&c, &ChannelScales::default(), &cfg).unwrap();
        let grid = ofdm_demodulate(&frame, 0, &cfg).unwrap();
        for slot in [0usize, 3, 19] {
            for symbol in [0usize, 4] {
                for (k, want) in crs_pilots(&c, slot, symbol, &cfg).unwrap() {
                    assert_cclose(grid.at(k, slot * 7 + symbol), want, 1e-9);
                }
            }
        }
    }

    #[test]
    fn broadcast_placeholder_is_deterministic_per_cell() {
        let cfg = cfg();
        let scales = ChannelScales::default();
        let a = frame_grid(&cell(77), &scales, &cfg).unwrap();
        let b = frame_grid(&cell(77), &scales, &cfg).unwrap();
        assert_eq!(a, b);
        let other = frame_grid(&cell(78), &scales, &cfg).unwrap();
        assert_ne!(a, other);

        // Slot 1, symbols 0..4 hold the filler; symbol 0 keeps its CRS
        // pilots, the rest of the column is QPSK at +-sqrt(1/2).
        let amplitude = 0.5_f64.sqrt();
        for (k, want) in crs_pilots(&cell(77), 1, 0, &cfg).unwrap() {
            assert_cclose(a.at(k, 7), want, 1e-12);
        }
        let crs_rows = crs_subcarriers(&cell(77), 0, &cfg).unwrap();
        for k in (0..72).filter(|k| !crs_rows.contains(k)) {
            let v = a.at(k, 7);
            assert!((v.re.abs() - amplitude).abs() < 1e-12);
            assert!((v.im.abs() - amplitude).abs() < 1e-12);
        }
        let filled = |l: usize| (0..72).filter(|&k| a.at(k, 7 + l).norm() > 0.0).count();
        assert_eq!(filled(1), 72);
        assert_eq!(filled(3), 72);
    }

    #[test]
    fn channel_scales_are_applied() {
        let cfg = cfg();
        let c = cell(0);
        let scales = ChannelScales {
            pss: 2.0,
            sss: 0.5,
            crs: 3.0,
            pbch: 0.0,
        };
        let grid = frame_grid(&c, &scales, &cfg).unwrap();
        let pss = pss_sequence(0).unwrap();
        let first_row = cfg.centered_rows(SYNC_SEQUENCE_LEN).next().unwrap();
        assert_cclose(grid.at(first_row, 6), pss[0] * 2.0, 1e-12);
        let (k, v) = crs_pilots(&c, 0, 0, &cfg).unwrap()[0];
        assert_cclose(grid.at(k, 0), v * 3.0, 1e-12);
        // pbch scale 0 empties slot 1 symbol 1 entirely.
        assert_eq!((0..72).filter(|&k| grid.at(k, 8).norm() > 0.0).count(), 0);
    }

    #[test]
    fn delay_prepends_zeros_and_shifts_the_signal() {
        let signal = vec![Complex64::new(1.0, -1.0); 50];
        let spec = ImpairmentSpec {
            delay_samples: 7,
            channel: ChannelSpec::Flat(Complex64::new(0.0, 2.0)),
            ..ImpairmentSpec::default()
        };
        let out = apply_impairments(&signal, &spec, 0).unwrap();
        assert_eq!(out.len(), 57);
        for v in &out[..7] {
            assert_eq!(*v, Complex64::ZERO);
        }
        assert_cclose(out[7], Complex64::new(2.0, 2.0), 1e-12);
    }

    #[test]
    fn cfo_rotates_at_the_requested_rate() {
        let signal = vec![Complex64::new(1.0, 0.0); 1920];
        let spec = ImpairmentSpec {
            cfo_hz: 1500.0,
            ..ImpairmentSpec::default()
        };
        let out = apply_impairments(&signal, &spec, 0).unwrap();
        // 1500 Hz at 1.92 Msps advances 1/1280 of a turn per sample.
        let per_sample = TAU * 1500.0 / 1.92e6;
        assert_cclose(out[1], Complex64::from_polar(1.0, per_sample), 1e-12);
        assert_cclose(out[1280], Complex64::from_polar(1.0, TAU), 1e-9);
    }

    #[test]
    fn per_segment_gains_cover_the_signal() {
        let signal = vec![Complex64::new(1.0, 0.0); 25];
        let gains = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(5.0, 0.0),
        ];
        let spec = ImpairmentSpec {
            delay_samples: 5,
            channel: ChannelSpec::PerSegment {
                gains: gains.clone(),
                segment_len: 10,
            },
            ..ImpairmentSpec::default()
        };
        let out = apply_impairments(&signal, &spec, 0).unwrap();
        assert_cclose(out[5], Complex64::new(1.0, 0.0), 1e-12);
        assert_cclose(out[14], Complex64::new(1.0, 0.0), 1e-12);
        assert_cclose(out[15], Complex64::new(3.0, 0.0), 1e-12);
        assert_cclose(out[25], Complex64::new(5.0, 0.0), 1e-12);

        let short = ImpairmentSpec {
            channel: ChannelSpec::PerSegment {
                gains: gains[..2].to_vec(),
                segment_len: 10,
            },
            ..ImpairmentSpec::default()
        };
        assert!(matches!(
            apply_impairments(&signal, &short, 0),
            Err(SynthError::SegmentGains { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn noise_hits_the_requested_snr() {
        let signal = vec![Complex64::new(1.0, 0.0); 100_000];
        let spec = ImpairmentSpec {
            snr_db: Some(10.0),
            ..ImpairmentSpec::default()
        };
        let out = apply_impairments(&signal, &spec, 42).unwrap();
        let noise_power: f64 = out
            .iter()
            .zip(&signal)
            .map(|(y, x)| (y - x).norm_sqr())
            .sum::<f64>()
            / out.len() as f64;
        let measured_snr = 10.0 * (1.0 / noise_power).log10();
        assert!(
            (measured_snr - 10.0).abs() < 0.2,
            "measured {measured_snr} dB"
        );

        let again = apply_impairments(&signal, &spec, 42).unwrap();
        assert_eq!(out, again);
        let different = apply_impairments(&signal, &spec, 43).unwrap();
        assert_ne!(out, different);

        assert!(matches!(
            apply_impairments(&[Complex64::ZERO; 4], &spec, 0),
            Err(SynthError::ZeroPower)
        ));
    }

    #[test]
    fn resampling_runs_last_and_changes_the_length() {
        let cfg = cfg();
        let signal =
            synthesize_stream(&cell(1), 0, 38_400, &ChannelScales::default(), &cfg).unwrap();
        let spec = ImpairmentSpec {
            delay_samples: 0,
            output_rate: 2e6,
            ..ImpairmentSpec::default()
        };
        let out = apply_impairments(&signal, &spec, 0).unwrap();
        assert_eq!(out.len(), 40_000);
    }

    #[test]
    fn large_cfo_is_flagged_but_applied() {
        let spec = ImpairmentSpec {
            cfo_hz: 15_300.0,
            ..ImpairmentSpec::default()
        };
        assert_eq!(spec.warnings().len(), 1);
        assert!(spec.warnings()[0].contains("alias"));
        let mild = ImpairmentSpec {
            cfo_hz: 300.0,
            ..ImpairmentSpec::default()
        };
        assert!(mild.warnings().is_empty());
        let out = apply_impairments(&[Complex64::new(1.0, 0.0); 8], &spec, 0).unwrap();
        assert_eq!(out.len(), 8);
    }
}
