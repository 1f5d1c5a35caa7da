//! Carrier-frequency-offset estimation and PSS/SSS cell search.
//!
//! The search runs blind on one captured segment, in receive order:
//!
//! 1. A coarse CFO estimate from cyclic-prefix correlation, maximized
//!    over every possible slot phase — no timing needed. Each CP is a
//!    copy of its symbol's tail one FFT length later, so the angle of
//!    the correlation measures the frequency offset unambiguously up to
//!    half the subcarrier spacing (±7.5 kHz); larger offsets alias.
//! 2. PSS detection by normalized cross-correlation against the three
//!    sector replicas, combined noncoherently across the half-frame
//!    repetitions inside the segment. The peak fixes the sector
//!    identity and the timing modulo 5 ms.
//! 3. SSS detection on the symbol before the PSS. The PSS doubles as a
//!    channel probe: its frequency response equalizes the SSS bins, and
//!    the group identity plus half-frame (subframe 0 or 5) follow from
//!    a correlation over all 336 candidate sequences.
//! 4. A refined CFO pass over the now-known slot grid.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::lte::{
    pss_sequence, sss_sequence, CellIdentity, LteError, LtePhyConfig, SubframePhase, N_ID_1_COUNT,
    SYNC_SEQUENCE_LEN,
};
use crate::resample::{RationalResampler, ResampleError};
use crate::sigmf::IqSegment;

/// Default PSS detection threshold on the normalized correlation
/// metric.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.15;

#[derive(Debug, Error)]
pub enum SyncError {
    #[error("{got} samples are too few, the operation needs {needed}")]
    TooShort { got: usize, needed: usize },
    #[error(
        "no PSS above the detection threshold {threshold}: best metric {best_metric:.4} \
         (sector {best_n_id_2}, offset {best_offset})"
    )]
    NoCellFound {
        threshold: f64,
        best_metric: f64,
        best_n_id_2: u8,
        best_offset: usize,
    },
    #[error(
        "SSS group decision is ambiguous: best metric {best:.6} is not separated \
         from the runner-up {runner_up:.6}"
    )]
    GroupAmbiguous { best: f64, runner_up: f64 },
    #[error(transparent)]
    Lte(#[from] LteError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

/// Parameters of a cell search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub phy: LtePhyConfig,
    /// Minimum normalized PSS correlation to declare a detection.
    pub detection_threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            phy: LtePhyConfig::default(),
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
        }
    }
}

/// Everything a successful cell search pins down about a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSearchResult {
    pub cell: CellIdentity,
    /// Offset of the first half-frame boundary in the segment, in
    /// base-rate samples (always less than the 5 ms half-frame).
    pub timing_offset: usize,
    /// Which half-frame that boundary starts.
    pub subframe_phase: SubframePhase,
    /// Total carrier frequency offset (coarse plus refined) in Hz.
    pub cfo_hz: f64,
    /// Normalized PSS correlation metric in [0, 1].
    pub pss_metric: f64,
    /// Normalized SSS correlation metric in [0, 1].
    pub sss_metric: f64,
}

/// Multiplies the samples by `exp(-j 2 pi cfo_hz t)`, undoing a
/// carrier frequency offset.
pub fn compensate_cfo(samples: &[Complex64], cfo_hz: f64, sample_rate: f64) -> Vec<Complex64> {
    let step = -TAU * cfo_hz / sample_rate;
    samples
        .iter()
        .enumerate()
        .map(|(n, x)| x * Complex64::from_polar(1.0, step * n as f64))
        .collect()
}

/// Delayed conjugate products `conj(x[i]) * x[i + lag]` as prefix sums,
/// so any window sum is two lookups.
fn product_prefix(samples: &[Complex64], lag: usize) -> Vec<Complex64> {
    let count = samples.len().saturating_sub(lag);
    let mut prefix = Vec::with_capacity(count + 1);
    prefix.push(Complex64::ZERO);
    let mut acc = Complex64::ZERO;
    for i in 0..count {
        acc += samples[i].conj() * samples[i + lag];
        prefix.push(acc);
    }
    prefix
}

/// Sum of CP correlation windows for slots starting at `slot_phase`,
/// `slot_phase + slot`, ... within the product range.
fn cp_window_sum(prefix: &[Complex64], slot_phase: usize, phy: &LtePhyConfig) -> Complex64 {
    let products = prefix.len() - 1;
    let slot = phy.slot_samples();
    let mut sum = Complex64::ZERO;
    let mut base = slot_phase;
    while base < products {
        for l in 0..phy.symbols_per_slot() {
            let w0 = base + phy.symbol_offset(l);
            let w1 = w0 + phy.cp_lengths[l];
            if w1 > products {
                break;
            }
            sum += prefix[w1] - prefix[w0];
        }
        base += slot;
    }
    sum
}

fn cfo_from_sum(sum: Complex64, phy: &LtePhyConfig) -> f64 {
    sum.arg() / TAU * phy.sample_rate_hz() / phy.fft_size as f64
}

/// Blind CP-based CFO estimate: the slot phase is unknown, so every
/// phase is tried and the one with the strongest correlation wins.
///
/// The estimate is unambiguous within ±half the subcarrier spacing
/// (±7.5 kHz); true offsets beyond that alias modulo 15 kHz.
pub fn estimate_cfo_cp(samples: &[Complex64], phy: &LtePhyConfig) -> Result<f64, SyncError> {
    let needed = phy.slot_samples() + phy.fft_size;
    if samples.len() < needed {
        return Err(SyncError::TooShort {
            got: samples.len(),
            needed,
        });
    }
    let prefix = product_prefix(samples, phy.fft_size);
    let mut best = Complex64::ZERO;
    for slot_phase in 0..phy.slot_samples() {
        let sum = cp_window_sum(&prefix, slot_phase, phy);
        if sum.norm_sqr() > best.norm_sqr() {
            best = sum;
        }
    }
    Ok(cfo_from_sum(best, phy))
}

/// CP-based CFO estimate over a known slot grid, for refinement after
/// timing is established.
pub fn estimate_cfo_cp_at(
    samples: &[Complex64],
    slot_phase: usize,
    phy: &LtePhyConfig,
) -> Result<f64, SyncError> {
    let needed = phy.slot_samples() + phy.fft_size;
    if samples.len() < needed {
        return Err(SyncError::TooShort {
            got: samples.len(),
            needed,
        });
    }
    let prefix = product_prefix(samples, phy.fft_size);
    let sum = cp_window_sum(&prefix, slot_phase % phy.slot_samples(), phy);
    Ok(cfo_from_sum(sum, phy))
}

/// Time-domain replica of one PSS: the sequence on its subcarriers,
/// transformed by the unitary inverse FFT (no cyclic prefix).
fn pss_time_replica(n_id_2: u8, phy: &LtePhyConfig) -> Result<Vec<Complex64>, LteError> {
    let d = pss_sequence(n_id_2)?;
    let n = phy.fft_size;
    let mut buf = vec![Complex64::ZERO; n];
    for (i, k) in phy.centered_rows(SYNC_SEQUENCE_LEN).enumerate() {
        buf[phy.bin_for_subcarrier(k)] = d[i];
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    Ok(buf)
}

/// A PSS detection: sector identity, the offset of the PSS symbol's
/// useful part modulo one half-frame, and the combined metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PssDetection {
    pub n_id_2: u8,
    pub offset: usize,
    pub metric: f64,
}

/// Searches a segment for the strongest PSS.
///
/// The metric at lag `d` is `|c|^2 / (E_replica * E_window)` — the
/// normalized cross-correlation squared, which is 1 for a perfect
/// noiseless match — summed over all half-frame repetitions of the lag
/// before normalizing. Ties prefer the earliest offset, then the lowest
/// sector.
pub fn detect_pss(samples: &[Complex64], cfg: &SearchConfig) -> Result<PssDetection, SyncError> {
    let phy = &cfg.phy;
    let n = phy.fft_size;
    let period = phy.half_frame_samples();
    let needed = period + n;
    if samples.len() < needed {
        return Err(SyncError::TooShort {
            got: samples.len(),
            needed,
        });
    }

    let mut energy_prefix = Vec::with_capacity(samples.len() + 1);
    energy_prefix.push(0.0);
    let mut acc = 0.0;
    for x in samples {
        acc += x.norm_sqr();
        energy_prefix.push(acc);
    }

    let n_lags = samples.len() - n + 1;
    let mut folded: Vec<[(f64, f64); 3]> = vec![[(0.0, 0.0); 3]; period];
    for sector in 0..3u8 {
        let replica = pss_time_replica(sector, phy)?;
        let replica_energy: f64 = replica.iter().map(|v| v.norm_sqr()).sum();
        for d in 0..n_lags {
            let mut c = Complex64::ZERO;
            for (k, r) in replica.iter().enumerate() {
                c += r.conj() * samples[d + k];
            }
            let window_energy = energy_prefix[d + n] - energy_prefix[d];
            let slot = &mut folded[d % period][sector as usize];
            slot.0 += c.norm_sqr();
            slot.1 += replica_energy * window_energy;
        }
    }

    let mut best = PssDetection {
        n_id_2: 0,
        offset: 0,
        metric: -1.0,
    };
    for (offset, accs) in folded.iter().enumerate() {
        for sector in 0..3u8 {
            let (num, den) = accs[sector as usize];
            if den <= 0.0 {
                continue;
            }
            let metric = num / den;
            if metric > best.metric {
                best = PssDetection {
                    n_id_2: sector,
                    offset,
                    metric,
                };
            }
        }
    }

    if best.metric < cfg.detection_threshold {
        return Err(SyncError::NoCellFound {
            threshold: cfg.detection_threshold,
            best_metric: best.metric,
            best_n_id_2: best.n_id_2,
            best_offset: best.offset,
        });
    }
    Ok(best)
}

/// An SSS decision for a given PSS detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SssDetection {
    pub n_id_1: u16,
    /// Half-frame of the occurrence at the PSS offset itself (later
    /// occurrences alternate).
    pub phase: SubframePhase,
    pub metric: f64,
}

/// Demodulated 62-bin view of the symbol whose useful part starts at
/// `start`.
fn sync_bins(
    samples: &[Complex64],
    start: usize,
    phy: &LtePhyConfig,
    fft: &std::sync::Arc<dyn rustfft::Fft<f64>>,
) -> Vec<Complex64> {
    let n = phy.fft_size;
    let mut buf = samples[start..start + n].to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    phy.centered_rows(SYNC_SEQUENCE_LEN)
        .map(|k| buf[phy.bin_for_subcarrier(k)] * scale)
        .collect()
}

/// Identifies the cell group and half-frame from the SSS, given the
/// sector and PSS timing.
///
/// Each usable PSS occurrence equalizes its neighboring SSS symbol
/// (the PSS bins measure the channel), the equalized bins are
/// correlated against all 168 group sequences in both subframe
/// variants, and the per-occurrence metrics are averaged — occurrences
/// 5 ms apart alternate variants, which is what pins the half-frame.
pub fn detect_sss(
    samples: &[Complex64],
    n_id_2: u8,
    pss_offset: usize,
    phy: &LtePhyConfig,
) -> Result<SssDetection, SyncError> {
    let n = phy.fft_size;
    let period = phy.half_frame_samples();
    let gap = phy.pss_useful_offset() - phy.sss_useful_offset();
    let pss_freq = pss_sequence(n_id_2)?;

    let mut sequences = Vec::with_capacity(N_ID_1_COUNT as usize);
    for n_id_1 in 0..N_ID_1_COUNT {
        sequences.push((
            sss_sequence(n_id_1, n_id_2, SubframePhase::Zero)?,
            sss_sequence(n_id_1, n_id_2, SubframePhase::Five)?,
        ));
    }

    let fft = FftPlanner::new().plan_fft_forward(n);
    // scores[g] = (metric sum for phase Zero at j=0, for phase Five at j=0)
    let mut scores = vec![(0.0f64, 0.0f64); N_ID_1_COUNT as usize];
    let mut occurrences = 0usize;
    let mut position = pss_offset;
    let mut parity_even = true;
    while position + n <= samples.len() {
        if position >= gap {
            let pss_bins = sync_bins(samples, position, phy, &fft);
            let sss_bins = sync_bins(samples, position - gap, phy, &fft);
            // Equalize: z = Y_sss * conj(H), H = Y_pss * conj(P).
            let z: Vec<Complex64> = sss_bins
                .iter()
                .zip(pss_bins.iter())
                .zip(pss_freq.iter())
                .map(|((s, p), d)| s * p.conj() * d)
                .collect();
            let z_energy: f64 = z.iter().map(|v| v.norm_sqr()).sum();
            if z_energy > 0.0 {
                occurrences += 1;
                let norm = z_energy * SYNC_SEQUENCE_LEN as f64;
                for (g, (zero_seq, five_seq)) in sequences.iter().enumerate() {
                    let (first, second) = if parity_even {
                        (zero_seq, five_seq)
                    } else {
                        (five_seq, zero_seq)
                    };
                    let corr_first: Complex64 =
                        z.iter().zip(first.iter()).map(|(zi, &di)| zi * di).sum();
                    let corr_second: Complex64 =
                        z.iter().zip(second.iter()).map(|(zi, &di)| zi * di).sum();
                    scores[g].0 += corr_first.norm_sqr() / norm;
                    scores[g].1 += corr_second.norm_sqr() / norm;
                }
            }
        }
        position += period;
        parity_even = !parity_even;
    }
    if occurrences == 0 {
        return Err(SyncError::TooShort {
            got: samples.len(),
            needed: pss_offset.max(gap) + n,
        });
    }

    let mut best = SssDetection {
        n_id_1: 0,
        phase: SubframePhase::Zero,
        metric: -1.0,
    };
    let mut runner_up = -1.0f64;
    for (g, (zero_score, five_score)) in scores.iter().enumerate() {
        for (score, phase) in [
            (zero_score, SubframePhase::Zero),
            (five_score, SubframePhase::Five),
        ] {
            let metric = score / occurrences as f64;
            if metric > best.metric {
                runner_up = best.metric;
                best = SssDetection {
                    n_id_1: g as u16,
                    phase,
                    metric,
                };
            } else if metric > runner_up {
                runner_up = metric;
            }
        }
    }
    if !best.metric.is_finite() || best.metric - runner_up < 1e-12 {
        return Err(SyncError::GroupAmbiguous {
            best: best.metric,
            runner_up,
        });
    }
    Ok(best)
}

/// Runs the full search on samples already at the base rate.
pub fn cell_search_at_base_rate(
    samples: &[Complex64],
    cfg: &SearchConfig,
) -> Result<CellSearchResult, SyncError> {
    let phy = &cfg.phy;
    let coarse_cfo = estimate_cfo_cp(samples, phy)?;
    let compensated = compensate_cfo(samples, coarse_cfo, phy.sample_rate_hz());

    let pss = detect_pss(&compensated, cfg)?;
    let sss = detect_sss(&compensated, pss.n_id_2, pss.offset, phy)?;

    let slot_phase = (pss.offset + phy.slot_samples()
        - phy.pss_useful_offset() % phy.slot_samples())
        % phy.slot_samples();
    let residual_cfo = estimate_cfo_cp_at(&compensated, slot_phase, phy)?;

    let pss_to_boundary = phy.pss_useful_offset();
    let timing_offset =
        (pss.offset + phy.half_frame_samples() - pss_to_boundary) % phy.half_frame_samples();
    // The boundary at `timing_offset` opens the half-frame of the first
    // PSS occurrence only when it precedes that PSS in the buffer;
    // otherwise it opens the next half-frame.
    let subframe_phase = if pss.offset >= pss_to_boundary {
        sss.phase
    } else {
        sss.phase.toggled()
    };

    let cell = CellIdentity::from_components(sss.n_id_1, pss.n_id_2)?;
    Ok(CellSearchResult {
        cell,
        timing_offset,
        subframe_phase,
        cfo_hz: coarse_cfo + residual_cfo,
        pss_metric: pss.metric,
        sss_metric: sss.metric,
    })
}

/// Runs the full search on a recorded segment, resampling to the base
/// rate first when the capture rate differs.
pub fn cell_search(segment: &IqSegment, cfg: &SearchConfig) -> Result<CellSearchResult, SyncError> {
    let base_rate = cfg.phy.sample_rate_hz();
    let resampler = RationalResampler::new(segment.sample_rate, base_rate)?;
    let samples = resampler.resample(&segment.samples);
    cell_search_at_base_rate(&samples, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{
        apply_impairments, synthesize_downlink, synthesize_stream, ChannelScales, ChannelSpec,
        ImpairmentSpec,
    };
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SearchConfig {
        SearchConfig::default()
    }

    fn clean_frames(pci: u16, n_frames: usize) -> Vec<Complex64> {
        let cell = CellIdentity::new(pci).unwrap();
        synthesize_downlink(&cell, n_frames, &ChannelScales::default(), &cfg().phy).unwrap()
    }

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn cfo_estimate_recovers_injected_offsets() {
        let signal = clean_frames(301, 2);
        let phy = cfg().phy;
        for cfo in [0.0, 1200.0, -3200.5, 7000.0] {
            let spec = ImpairmentSpec {
                cfo_hz: cfo,
                ..ImpairmentSpec::default()
            };
            let impaired = apply_impairments(&signal, &spec, 0).unwrap();
            let estimate = estimate_cfo_cp(&impaired, &phy).unwrap();
            assert_close(estimate, cfo, 2.0);
        }
    }

    #[test]
    fn cfo_beyond_half_spacing_aliases() {
        let signal = clean_frames(301, 2);
        let spec = ImpairmentSpec {
            cfo_hz: 15_300.0,
            ..ImpairmentSpec::default()
        };
        let impaired = apply_impairments(&signal, &spec, 0).unwrap();
        let estimate = estimate_cfo_cp(&impaired, &cfg().phy).unwrap();
        assert_close(estimate, 300.0, 2.0);
    }

    #[test]
    fn cfo_needs_a_slot_of_samples() {
        let signal = clean_frames(0, 1);
        assert!(matches!(
            estimate_cfo_cp(&signal[..1000], &cfg().phy),
            Err(SyncError::TooShort { .. })
        ));
    }

    #[test]
    fn compensation_undoes_the_offset() {
        let signal = clean_frames(7, 1);
        let spec = ImpairmentSpec {
            cfo_hz: 2_345.0,
            ..ImpairmentSpec::default()
        };
        let impaired = apply_impairments(&signal, &spec, 0).unwrap();
        let restored = compensate_cfo(&impaired, 2_345.0, 1.92e6);
        for (a, b) in restored.iter().zip(&signal) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn pss_is_found_at_the_right_offset_and_sector() {
        let phy = cfg().phy;
        for pci in [0u16, 301, 503] {
            let cell = CellIdentity::new(pci).unwrap();
            let frame_phase = 2_711;
            let stream =
                synthesize_stream(&cell, frame_phase, 38_400, &ChannelScales::default(), &phy)
                    .unwrap();
            let detection = detect_pss(&stream, &cfg()).unwrap();
            let expected =
                (phy.pss_useful_offset() + phy.half_frame_samples() - frame_phase % 9_600) % 9_600;
            assert_eq!(detection.n_id_2, cell.n_id_2(), "pci {pci}");
            assert_eq!(detection.offset, expected, "pci {pci}");
            assert!(detection.metric > 0.9, "pci {pci}: {}", detection.metric);
        }
    }

    #[test]
    fn noise_alone_stays_under_the_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise: Vec<Complex64> = (0..38_400)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        match detect_pss(&noise, &cfg()) {
            Err(SyncError::NoCellFound {
                best_metric,
                threshold,
                ..
            }) => {
                assert!(best_metric < threshold);
            }
            other => panic!("expected NoCellFound, got {other:?}"),
        }
    }

    #[test]
    fn sss_resolves_group_and_half_frame() {
        let phy = cfg().phy;
        let cell = CellIdentity::new(301).unwrap();
        // A capture opening at frame sample 2000 meets the subframe-5
        // PSS (frame sample 10432) before the subframe-0 one.
        let stream =
            synthesize_stream(&cell, 2_000, 38_400, &ChannelScales::default(), &phy).unwrap();
        let pss = detect_pss(&stream, &cfg()).unwrap();
        assert_eq!(pss.offset, 8_432);
        let sss = detect_sss(&stream, pss.n_id_2, pss.offset, &phy).unwrap();
        assert_eq!(sss.n_id_1, cell.n_id_1());
        assert_eq!(sss.phase, SubframePhase::Five);
        assert!(sss.metric > 0.9, "metric {}", sss.metric);
    }

    #[test]
    fn sss_is_ambiguous_on_empty_input() {
        let zeros = vec![Complex64::ZERO; 38_400];
        let err = detect_sss(&zeros, 0, 832, &cfg().phy);
        assert!(
            matches!(
                err,
                Err(SyncError::TooShort { .. }) | Err(SyncError::GroupAmbiguous { .. })
            ),
            "{err:?}"
        );
    }

    #[test]
    fn full_search_on_an_impaired_capture() {
        let phy = cfg().phy;
        let cell = CellIdentity::new(172).unwrap();
        let clean = synthesize_stream(&cell, 0, 48_000, &ChannelScales::default(), &phy).unwrap();
        let spec = ImpairmentSpec {
            delay_samples: 3_000,
            channel: ChannelSpec::Flat(Complex64::from_polar(0.7, 0.3)),
            cfo_hz: -2_700.0,
            snr_db: Some(10.0),
            input_rate: 1.92e6,
            output_rate: 2e6,
        };
        let captured = apply_impairments(&clean, &spec, 7).unwrap();
        let segment = IqSegment {
            segment_index: 0,
            capture_time: 0.0,
            sample_rate: 2e6,
            center_frequency: 3.51e9,
            samples: captured,
        };
        let result = cell_search(&segment, &cfg()).unwrap();
        assert_eq!(result.cell.pci(), 172);
        assert_eq!(result.subframe_phase, SubframePhase::Zero);
        assert!((result.timing_offset as i64 - 3_000).unsigned_abs() <= 1);
        assert_close(result.cfo_hz, -2_700.0, 30.0);
        assert!(result.pss_metric > 0.5, "pss {}", result.pss_metric);
        assert!(result.sss_metric > 0.5, "sss {}", result.sss_metric);
        assert!(result.pss_metric <= 1.0 && result.sss_metric <= 1.0);
        assert!(result.timing_offset < phy.half_frame_samples());
    }

    #[test]
    fn search_reports_subframe_five_when_the_capture_opens_there() {
        let phy = cfg().phy;
        let cell = CellIdentity::new(33).unwrap();
        // Open the capture 2.5 ms into the frame: the first half-frame
        // boundary inside it is the subframe-5 one at 9600 - 4800.
        let stream =
            synthesize_stream(&cell, 4_800, 38_400, &ChannelScales::default(), &phy).unwrap();
        let result = cell_search_at_base_rate(&stream, &cfg()).unwrap();
        assert_eq!(result.cell.pci(), 33);
        assert_eq!(result.timing_offset, 4_800);
        assert_eq!(result.subframe_phase, SubframePhase::Five);
        assert!(result.cfo_hz.abs() < 5.0);
    }
}
