//! LTE downlink physical-layer numerology and signals for the 1.4 MHz
//! (6 resource block) configuration.
//!
//! The definitions follow the 3GPP 36.211 downlink with normal cyclic
//! prefix and 15 kHz subcarrier spacing, restricted to what a cell-search
//! and RSRP measurement chain needs: the primary and secondary
//! synchronization sequences, the port-0 cell-specific reference signal
//! (CRS), and OFDM modulation between resource grids and time-domain
//! samples.
//!
//! # Grid convention
//!
//! A resource grid holds `n_subcarriers` rows by `n_symbols` OFDM symbol
//! columns. The DC subcarrier is not part of the grid: row `k` of an
//! `n`-subcarrier grid maps to FFT frequency offset `k - n/2` for
//! `k < n/2` and `k - n/2 + 1` otherwise, so rows 35 and 36 of a
//! 72-subcarrier grid straddle DC. OFDM modulation is unitary in both
//! directions (scaling by `1/sqrt(fft_size)`), which makes per-symbol
//! time-domain energy (cyclic prefix excluded) equal to the energy of the
//! corresponding grid column.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

/// Downlink subcarrier spacing in Hz.
pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;

/// Zadoff-Chu root indices used by the PSS, indexed by `N_ID_2`.
pub const PSS_ROOTS: [u32; 3] = [25, 29, 34];

/// Length of the PSS and SSS sequences in subcarriers.
pub const SYNC_SEQUENCE_LEN: usize = 62;

/// Number of physical-layer cell identity groups (`N_ID_1` range).
pub const N_ID_1_COUNT: u16 = 168;

/// Errors from physical-layer sequence generation and OFDM processing.
#[derive(Debug, Error)]
pub enum LteError {
    #[error("physical cell identity {pci} out of range 0..=503")]
    InvalidPci { pci: u16 },
    #[error("cell identity group {n_id_1} out of range 0..=167")]
    InvalidGroup { n_id_1: u16 },
    #[error("sector identity {n_id_2} out of range 0..=2")]
    InvalidSector { n_id_2: u8 },
    #[error("slot index {slot} out of range 0..=19")]
    InvalidSlot { slot: usize },
    #[error("no port-0 CRS in OFDM symbol {symbol}; pilots occupy symbols 0 and 4")]
    NoCrsInSymbol { symbol: usize },
    #[error("grid has {got} subcarriers but the configuration expects {expected}")]
    GridWidth { got: usize, expected: usize },
    #[error("grid has {n_symbols} symbols, not a whole number of {per_slot}-symbol slots")]
    PartialSlot { n_symbols: usize, per_slot: usize },
    #[error("{got} samples from offset {offset} do not cover one {needed}-sample slot")]
    TooFewSamples {
        got: usize,
        offset: usize,
        needed: usize,
    },
}

/// Sample-level numerology for one downlink bandwidth configuration.
///
/// The default is the 1.4 MHz downlink: 6 resource blocks, a 128-point
/// FFT, and normal cyclic prefix, giving the canonical 1.92 Msps base
/// rate with 960-sample slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtePhyConfig {
    /// Number of downlink resource blocks.
    pub n_rb: usize,
    /// FFT size; the base sample rate is `fft_size * 15 kHz`.
    pub fft_size: usize,
    /// Cyclic prefix length of each of the seven symbols in a slot.
    pub cp_lengths: [usize; 7],
}

impl Default for LtePhyConfig {
    fn default() -> Self {
        LtePhyConfig {
            n_rb: 6,
            fft_size: 128,
            cp_lengths: [10, 9, 9, 9, 9, 9, 9],
        }
    }
}

impl LtePhyConfig {
    /// Number of occupied subcarriers (12 per resource block).
    pub fn n_subcarriers(&self) -> usize {
        12 * self.n_rb
    }

    /// OFDM symbols per slot (normal cyclic prefix).
    pub fn symbols_per_slot(&self) -> usize {
        self.cp_lengths.len()
    }

    /// Base sample rate in Hz implied by the FFT size.
    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * SUBCARRIER_SPACING_HZ
    }

    /// Samples per 0.5 ms slot.
    pub fn slot_samples(&self) -> usize {
        self.cp_lengths.iter().sum::<usize>() + self.symbols_per_slot() * self.fft_size
    }

    /// Samples per 1 ms subframe.
    pub fn subframe_samples(&self) -> usize {
        2 * self.slot_samples()
    }

    /// Samples per 5 ms half-frame, the repetition period of the PSS.
    pub fn half_frame_samples(&self) -> usize {
        10 * self.slot_samples()
    }

    /// Samples per 10 ms radio frame.
    pub fn frame_samples(&self) -> usize {
        20 * self.slot_samples()
    }

    /// Offset of symbol `l`'s cyclic prefix from the start of its slot.
    pub fn symbol_offset(&self, l: usize) -> usize {
        self.cp_lengths[..l]
            .iter()
            .map(|cp| cp + self.fft_size)
            .sum()
    }

    /// Offset of symbol `l`'s useful part from the start of its slot.
    pub fn useful_offset(&self, l: usize) -> usize {
        self.symbol_offset(l) + self.cp_lengths[l]
    }

    /// Offset of the PSS useful part within a half-frame (last symbol of
    /// the half-frame's first slot).
    pub fn pss_useful_offset(&self) -> usize {
        self.useful_offset(self.symbols_per_slot() - 1)
    }

    /// Offset of the SSS useful part within a half-frame (the symbol
    /// immediately before the PSS).
    pub fn sss_useful_offset(&self) -> usize {
        self.useful_offset(self.symbols_per_slot() - 2)
    }

    /// Signed FFT frequency offset of grid row `k`, skipping DC.
    pub fn subcarrier_frequency_offset(&self, k: usize) -> isize {
        let half = (self.n_subcarriers() / 2) as isize;
        let off = k as isize - half;
        if off >= 0 {
            off + 1
        } else {
            off
        }
    }

    /// FFT bin index of grid row `k`.
    pub fn bin_for_subcarrier(&self, k: usize) -> usize {
        let n = self.fft_size as isize;
        let f = self.subcarrier_frequency_offset(k);
        f.rem_euclid(n) as usize
    }

    /// Grid rows occupied by a centered sequence of `len` subcarriers,
    /// such as the 62-subcarrier PSS and SSS.
    pub fn centered_rows(&self, len: usize) -> std::ops::Range<usize> {
        let first = (self.n_subcarriers() - len) / 2;
        first..first + len
    }
}

/// A physical-layer cell identity, `PCI = 3 * N_ID_1 + N_ID_2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellIdentity {
    pci: u16,
}

impl CellIdentity {
    /// Largest valid physical cell identity.
    pub const MAX_PCI: u16 = 503;

    /// Builds a cell identity from a physical cell identity in 0..=503.
    pub fn new(pci: u16) -> Result<Self, LteError> {
        if pci > Self::MAX_PCI {
            return Err(LteError::InvalidPci { pci });
        }
        Ok(CellIdentity { pci })
    }

    /// Builds a cell identity from its group (`0..=167`) and sector
    /// (`0..=2`) components.
    pub fn from_components(n_id_1: u16, n_id_2: u8) -> Result<Self, LteError> {
        if n_id_1 >= N_ID_1_COUNT {
            return Err(LteError::InvalidGroup { n_id_1 });
        }
        if n_id_2 > 2 {
            return Err(LteError::InvalidSector { n_id_2 });
        }
        Ok(CellIdentity {
            pci: 3 * n_id_1 + n_id_2 as u16,
        })
    }

    /// The physical cell identity.
    pub fn pci(&self) -> u16 {
        self.pci
    }

    /// The cell identity group `N_ID_1`, carried by the SSS.
    pub fn n_id_1(&self) -> u16 {
        self.pci / 3
    }

    /// The sector identity `N_ID_2`, carried by the PSS.
    pub fn n_id_2(&self) -> u8 {
        (self.pci % 3) as u8
    }

    /// CRS frequency shift `v_shift = PCI mod 6`.
    pub fn crs_shift(&self) -> usize {
        (self.pci % 6) as usize
    }
}

impl fmt::Display for CellIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "PCI {} (group {}, sector {})",
            self.pci,
            self.n_id_1(),
            self.n_id_2()
        )
    }
}

/// Half-frame position of a synchronization occasion: the SSS sequence
/// differs between subframe 0 and subframe 5, which is what resolves
/// frame timing from a 5 ms-periodic PSS detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubframePhase {
    /// First half-frame (subframe 0, slots 0..10).
    Zero,
    /// Second half-frame (subframe 5, slots 10..20).
    Five,
}

impl SubframePhase {
    /// Subframe number of the half-frame boundary, 0 or 5.
    pub fn subframe(self) -> u8 {
        match self {
            SubframePhase::Zero => 0,
            SubframePhase::Five => 5,
        }
    }

    /// Slot number of the half-frame's first slot, 0 or 10.
    pub fn first_slot(self) -> usize {
        match self {
            SubframePhase::Zero => 0,
            SubframePhase::Five => 10,
        }
    }

    /// The other half-frame.
    pub fn toggled(self) -> Self {
        match self {
            SubframePhase::Zero => SubframePhase::Five,
            SubframePhase::Five => SubframePhase::Zero,
        }
    }
}

impl fmt::Display for SubframePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.subframe())
    }
}

/// Primary synchronization sequence for sector identity `n_id_2`.
///
/// The PSS is a length-63 Zadoff-Chu sequence with the middle (DC)
/// element punctured, leaving 62 unit-modulus values that are centrally
/// symmetric: `d[n] == d[61 - n]`.
pub fn pss_sequence(n_id_2: u8) -> Result<[Complex64; SYNC_SEQUENCE_LEN], LteError> {
    let root = *PSS_ROOTS
        .get(n_id_2 as usize)
        .ok_or(LteError::InvalidSector { n_id_2 })?;
    let u = root as f64;
    let mut d = [Complex64::ZERO; SYNC_SEQUENCE_LEN];
    for (n, value) in d.iter_mut().enumerate() {
        let m = if n < 31 { n } else { n + 1 } as f64;
        *value = Complex64::from_polar(1.0, -PI * u * m * (m + 1.0) / 63.0);
    }
    Ok(d)
}

/// One of the three length-31 m-sequences the SSS is built from.
fn msequence(taps: &[usize]) -> [f64; 31] {
    let mut x = [0u8; 31];
    x[4] = 1;
    for i in 0..26 {
        x[i + 5] = taps.iter().fold(0, |acc, &t| acc ^ x[i + t]);
    }
    let mut s = [0.0; 31];
    for (si, xi) in s.iter_mut().zip(x.iter()) {
        *si = 1.0 - 2.0 * f64::from(*xi);
    }
    s
}

/// Cyclic-shift indices `(m0, m1)` encoding the cell identity group.
fn sss_m0_m1(n_id_1: u16) -> (usize, usize) {
    let n1 = n_id_1 as usize;
    let q_prime = n1 / 30;
    let q = (n1 + q_prime * (q_prime + 1) / 2) / 30;
    let m_prime = n1 + q * (q + 1) / 2;
    let m0 = m_prime % 31;
    let m1 = (m0 + m_prime / 31 + 1) % 31;
    (m0, m1)
}

/// Secondary synchronization sequence for a cell identity group and
/// sector, as transmitted in the given half-frame.
///
/// The 62 values are ±1: two interleaved 31-chip m-sequences whose
/// cyclic shifts encode `n_id_1`, scrambled by sequences selected by
/// `n_id_2`. Subframes 0 and 5 swap the shift pair, which is how a
/// receiver resolves which half-frame it locked onto.
pub fn sss_sequence(
    n_id_1: u16,
    n_id_2: u8,
    phase: SubframePhase,
) -> Result<[f64; SYNC_SEQUENCE_LEN], LteError> {
    if n_id_1 >= N_ID_1_COUNT {
        return Err(LteError::InvalidGroup { n_id_1 });
    }
    if n_id_2 > 2 {
        return Err(LteError::InvalidSector { n_id_2 });
    }
    let s = msequence(&[0, 2]);
    let c = msequence(&[0, 3]);
    let z = msequence(&[0, 1, 2, 4]);
    let (m0, m1) = sss_m0_m1(n_id_1);
    let n2 = n_id_2 as usize;

    let mut d = [0.0; SYNC_SEQUENCE_LEN];
    for n in 0..31 {
        let s_m0 = s[(n + m0) % 31];
        let s_m1 = s[(n + m1) % 31];
        let c0 = c[(n + n2) % 31];
        let c1 = c[(n + n2 + 3) % 31];
        let z_m0 = z[(n + (m0 % 8)) % 31];
        let z_m1 = z[(n + (m1 % 8)) % 31];
        match phase {
            SubframePhase::Zero => {
                d[2 * n] = s_m0 * c0;
                d[2 * n + 1] = s_m1 * c1 * z_m0;
            }
            SubframePhase::Five => {
                d[2 * n] = s_m1 * c0;
                d[2 * n + 1] = s_m0 * c1 * z_m1;
            }
        }
    }
    Ok(d)
}

/// Length-31 Gold sequence generator output `c(n)` as bits.
///
/// Both constituent shift registers are advanced `Nc = 1600` steps
/// before the first output bit; `c_init` seeds the second register.
pub fn pseudo_random_sequence(c_init: u32, len: usize) -> Vec<u8> {
    const NC: usize = 1600;
    let total = NC + len;
    let mut x1 = vec![0u8; total + 31];
    let mut x2 = vec![0u8; total + 31];
    x1[0] = 1;
    for (i, bit) in x2.iter_mut().take(31).enumerate() {
        *bit = ((c_init >> i) & 1) as u8;
    }
    for n in 0..total {
        x1[n + 31] = x1[n + 3] ^ x1[n];
        x2[n + 31] = x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n];
    }
    (0..len).map(|n| x1[n + NC] ^ x2[n + NC]).collect()
}

/// The largest downlink bandwidth in resource blocks; CRS sequences are
/// defined relative to it so that narrower grids use a centered slice.
const N_RB_MAX: usize = 110;

fn crs_c_init(cell: &CellIdentity, slot: usize, symbol: usize) -> u32 {
    let pci = u32::from(cell.pci());
    let ns = slot as u32;
    let l = symbol as u32;
    (1 << 10) * (7 * (ns + 1) + l + 1) * (2 * pci + 1) + 2 * pci + 1
}

fn check_crs_position(slot: usize, symbol: usize) -> Result<usize, LteError> {
    if slot >= 20 {
        return Err(LteError::InvalidSlot { slot });
    }
    match symbol {
        0 => Ok(0),
        4 => Ok(3),
        _ => Err(LteError::NoCrsInSymbol { symbol }),
    }
}

/// Port-0 CRS QPSK values for one OFDM symbol of one slot.
///
/// Returns `2 * n_rb` values with components `±1/sqrt(2)`, drawn from the
/// Gold sequence reinitialized per symbol, sliced for a grid of
/// `cfg.n_rb` resource blocks centered in the maximum bandwidth.
pub fn crs_sequence(
    cell: &CellIdentity,
    slot: usize,
    symbol: usize,
    cfg: &LtePhyConfig,
) -> Result<Vec<Complex64>, LteError> {
    check_crs_position(slot, symbol)?;
    let c = pseudo_random_sequence(crs_c_init(cell, slot, symbol), 4 * N_RB_MAX);
    let scale = 0.5_f64.sqrt();
    Ok((0..2 * cfg.n_rb)
        .map(|m| {
            let mp = m + N_RB_MAX - cfg.n_rb;
            Complex64::new(
                scale * (1.0 - 2.0 * f64::from(c[2 * mp])),
                scale * (1.0 - 2.0 * f64::from(c[2 * mp + 1])),
            )
        })
        .collect())
}

/// Grid rows carrying port-0 CRS pilots in the given OFDM symbol.
///
/// Pilots sit every sixth subcarrier at `6*m + (v + v_shift) mod 6`,
/// where `v` is 0 in symbol 0 and 3 in symbol 4 and `v_shift` is
/// `PCI mod 6`.
pub fn crs_subcarriers(
    cell: &CellIdentity,
    symbol: usize,
    cfg: &LtePhyConfig,
) -> Result<Vec<usize>, LteError> {
    let v = check_crs_position(0, symbol)?;
    let shift = (v + cell.crs_shift()) % 6;
    Ok((0..2 * cfg.n_rb).map(|m| 6 * m + shift).collect())
}

/// Port-0 CRS pilots of one symbol as `(subcarrier row, value)` pairs.
pub fn crs_pilots(
    cell: &CellIdentity,
    slot: usize,
    symbol: usize,
    cfg: &LtePhyConfig,
) -> Result<Vec<(usize, Complex64)>, LteError> {
    let rows = crs_subcarriers(cell, symbol, cfg)?;
    let values = crs_sequence(cell, slot, symbol, cfg)?;
    Ok(rows.into_iter().zip(values).collect())
}

/// A subcarrier-by-symbol grid of complex resource elements.
///
/// Storage is symbol-major: each OFDM symbol's subcarriers form one
/// contiguous column, retrievable with [`ResourceGrid::symbol`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    n_subcarriers: usize,
    n_symbols: usize,
    data: Vec<Complex64>,
}

impl ResourceGrid {
    /// An all-zero grid of the given dimensions.
    pub fn new(n_subcarriers: usize, n_symbols: usize) -> Self {
        ResourceGrid {
            n_subcarriers,
            n_symbols,
            data: vec![Complex64::ZERO; n_subcarriers * n_symbols],
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    /// Value at subcarrier row `k`, symbol column `l`.
    ///
    /// Panics if either index is out of range.
    pub fn at(&self, k: usize, l: usize) -> Complex64 {
        assert!(k < self.n_subcarriers && l < self.n_symbols);
        self.data[l * self.n_subcarriers + k]
    }

    /// Mutable access to the value at `(k, l)`.
    pub fn at_mut(&mut self, k: usize, l: usize) -> &mut Complex64 {
        assert!(k < self.n_subcarriers && l < self.n_symbols);
        &mut self.data[l * self.n_subcarriers + k]
    }

    /// All subcarriers of symbol `l`.
    pub fn symbol(&self, l: usize) -> &[Complex64] {
        &self.data[l * self.n_subcarriers..(l + 1) * self.n_subcarriers]
    }

    /// Sum of `|x|^2` over symbol `l`'s subcarriers.
    pub fn symbol_energy(&self, l: usize) -> f64 {
        self.symbol(l).iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Modulates a resource grid into time-domain samples at the base rate.
///
/// The grid must span whole slots; each symbol is synthesized with a
/// unitary inverse FFT and prefixed with its cyclic prefix, so a
/// `7 * n`-symbol grid yields `n * slot_samples()` samples.
pub fn ofdm_modulate(grid: &ResourceGrid, cfg: &LtePhyConfig) -> Result<Vec<Complex64>, LteError> {
    if grid.n_subcarriers() != cfg.n_subcarriers() {
        return Err(LteError::GridWidth {
            got: grid.n_subcarriers(),
            expected: cfg.n_subcarriers(),
        });
    }
    let per_slot = cfg.symbols_per_slot();
    if !grid.n_symbols().is_multiple_of(per_slot) {
        return Err(LteError::PartialSlot {
            n_symbols: grid.n_symbols(),
            per_slot,
        });
    }
    let n = cfg.fft_size;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let scale = 1.0 / (n as f64).sqrt();
    let n_slots = grid.n_symbols() / per_slot;
    let mut out = Vec::with_capacity(n_slots * cfg.slot_samples());
    let mut buf = vec![Complex64::ZERO; n];
    for l in 0..grid.n_symbols() {
        buf.fill(Complex64::ZERO);
        for (k, value) in grid.symbol(l).iter().enumerate() {
            buf[cfg.bin_for_subcarrier(k)] = *value;
        }
        ifft.process(&mut buf);
        for v in &mut buf {
            *v *= scale;
        }
        let cp = cfg.cp_lengths[l % per_slot];
        out.extend_from_slice(&buf[n - cp..]);
        out.extend_from_slice(&buf);
    }
    Ok(out)
}

/// Demodulates as many whole slots as fit in `samples[offset..]` back
/// into a resource grid.
///
/// `offset` must point at a slot boundary (the start of a cyclic
/// prefix); at least one full slot must be available.
pub fn ofdm_demodulate(
    samples: &[Complex64],
    offset: usize,
    cfg: &LtePhyConfig,
) -> Result<ResourceGrid, LteError> {
    let slot = cfg.slot_samples();
    let avail = samples.len().saturating_sub(offset);
    let n_slots = avail / slot;
    if n_slots == 0 {
        return Err(LteError::TooFewSamples {
            got: samples.len(),
            offset,
            needed: slot,
        });
    }
    let n = cfg.fft_size;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let scale = 1.0 / (n as f64).sqrt();
    let per_slot = cfg.symbols_per_slot();
    let mut grid = ResourceGrid::new(cfg.n_subcarriers(), n_slots * per_slot);
    let mut buf = vec![Complex64::ZERO; n];
    for s in 0..n_slots {
        for l in 0..per_slot {
            let start = offset + s * slot + cfg.useful_offset(l);
            buf.copy_from_slice(&samples[start..start + n]);
            fft.process(&mut buf);
            let col = s * per_slot + l;
            for k in 0..cfg.n_subcarriers() {
                *grid.at_mut(k, col) = buf[cfg.bin_for_subcarrier(k)] * scale;
            }
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    fn assert_cclose(got: Complex64, want: Complex64, tol: f64) {
        assert!(
            (got - want).norm() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    fn sign_string(values: &[f64]) -> String {
        values
            .iter()
            .map(|&v| if v > 0.0 { '+' } else { '-' })
            .collect()
    }

    fn crs_sign_string(values: &[Complex64]) -> String {
        values
            .iter()
            .flat_map(|v| {
                [
                    if v.re > 0.0 { 'p' } else { 'm' },
                    if v.im > 0.0 { 'p' } else { 'm' },
                ]
            })
            .collect()
    }

    #[test]
    fn numerology_sample_counts() {
        let cfg = LtePhyConfig::default();
        assert_eq!(cfg.n_subcarriers(), 72);
        assert_eq!(cfg.sample_rate_hz(), 1.92e6);
        assert_eq!(cfg.slot_samples(), 960);
        assert_eq!(cfg.subframe_samples(), 1920);
        assert_eq!(cfg.half_frame_samples(), 9600);
        assert_eq!(cfg.frame_samples(), 19200);
        let offsets: Vec<usize> = (0..7).map(|l| cfg.symbol_offset(l)).collect();
        assert_eq!(offsets, [0, 138, 275, 412, 549, 686, 823]);
        assert_eq!(cfg.pss_useful_offset(), 832);
        assert_eq!(cfg.sss_useful_offset(), 695);
    }

    #[test]
    fn subcarrier_mapping_skips_dc() {
        let cfg = LtePhyConfig::default();
        assert_eq!(cfg.subcarrier_frequency_offset(0), -36);
        assert_eq!(cfg.subcarrier_frequency_offset(35), -1);
        assert_eq!(cfg.subcarrier_frequency_offset(36), 1);
        assert_eq!(cfg.subcarrier_frequency_offset(71), 36);
        assert_eq!(cfg.bin_for_subcarrier(0), 128 - 36);
        assert_eq!(cfg.bin_for_subcarrier(36), 1);
        assert_eq!(cfg.centered_rows(SYNC_SEQUENCE_LEN), 5..67);
    }

    #[test]
    fn cell_identity_components_round_trip() {
        for pci in 0..=CellIdentity::MAX_PCI {
            let cell = CellIdentity::new(pci).unwrap();
            assert_eq!(cell.pci(), 3 * cell.n_id_1() + u16::from(cell.n_id_2()));
            let again = CellIdentity::from_components(cell.n_id_1(), cell.n_id_2()).unwrap();
            assert_eq!(again, cell);
        }
        assert!(matches!(
            CellIdentity::new(504),
            Err(LteError::InvalidPci { pci: 504 })
        ));
        assert!(matches!(
            CellIdentity::from_components(168, 0),
            Err(LteError::InvalidGroup { n_id_1: 168 })
        ));
        assert!(matches!(
            CellIdentity::from_components(0, 3),
            Err(LteError::InvalidSector { n_id_2: 3 })
        ));
    }

    #[test]
    fn pss_root_25_frozen_values() {
        let d = pss_sequence(0).unwrap();
        assert_cclose(d[0], Complex64::new(1.0, 0.0), 1e-12);
        assert_cclose(
            d[1],
            Complex64::new(-0.797132507222923, -0.603804410325477),
            1e-12,
        );
        assert_cclose(
            d[30],
            Complex64::new(-0.988830826225118, 0.149042266176245),
            1e-12,
        );
        let sum: Complex64 = d.iter().sum();
        assert_cclose(sum, Complex64::new(6.606927857175, -4.510931643253), 1e-9);
    }

    #[test]
    fn pss_roots_29_and_34_frozen_values() {
        let d29 = pss_sequence(1).unwrap();
        assert_cclose(
            d29[1],
            Complex64::new(-0.969077286229078, -0.246757397690294),
            1e-12,
        );
        let sum29: Complex64 = d29.iter().sum();
        assert_cclose(sum29, Complex64::new(-6.823566308258, 4.175996029307), 1e-9);

        let d34 = pss_sequence(2).unwrap();
        assert_cclose(
            d34[1],
            Complex64::new(-0.969077286229078, 0.246757397690294),
            1e-12,
        );
        let sum34: Complex64 = d34.iter().sum();
        assert_cclose(
            sum34,
            Complex64::new(-6.823566308259, -4.175996029308),
            1e-9,
        );
    }

    #[test]
    fn pss_unit_modulus_and_central_symmetry() {
        for n_id_2 in 0..3 {
            let d = pss_sequence(n_id_2).unwrap();
            for n in 0..SYNC_SEQUENCE_LEN {
                assert_close(d[n].norm(), 1.0, 1e-12);
                assert_cclose(d[n], d[61 - n], 1e-9);
            }
        }
        assert!(matches!(
            pss_sequence(3),
            Err(LteError::InvalidSector { n_id_2: 3 })
        ));
    }

    /// Maximum cyclic cross-correlation over 62 shifts, normalized by the
    /// zero-shift autocorrelation (62).
    fn max_cyclic_xcorr(a: &[Complex64], b: &[Complex64]) -> f64 {
        let len = a.len();
        let mut peak: f64 = 0.0;
        for shift in 0..len {
            let c: Complex64 = (0..len).map(|n| a[n] * b[(n + shift) % len].conj()).sum();
            peak = peak.max(c.norm());
        }
        peak / len as f64
    }

    #[test]
    fn pss_cross_correlation_frozen_peaks() {
        let d = [
            pss_sequence(0).unwrap(),
            pss_sequence(1).unwrap(),
            pss_sequence(2).unwrap(),
        ];
        assert_close(max_cyclic_xcorr(&d[0], &d[0]), 1.0, 1e-12);
        // The roots differ by 4, 9, and 5; the pair differing by 9 shares
        // a factor with 63, which floors its cross-correlation near
        // sqrt(9/63) = 0.378. All pairs stay safely below 0.39.
        assert_close(max_cyclic_xcorr(&d[0], &d[1]), 0.2092, 5e-4);
        assert_close(max_cyclic_xcorr(&d[0], &d[2]), 0.3844, 5e-4);
        assert_close(max_cyclic_xcorr(&d[1], &d[2]), 0.2693, 5e-4);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert!(max_cyclic_xcorr(&d[a], &d[b]) < 0.39);
        }
    }

    #[test]
    fn sss_shift_indices_frozen() {
        assert_eq!(sss_m0_m1(0), (0, 1));
        assert_eq!(sss_m0_m1(29), (29, 30));
        assert_eq!(sss_m0_m1(30), (0, 2));
        assert_eq!(sss_m0_m1(100), (13, 17));
        assert_eq!(sss_m0_m1(167), (2, 9));
    }

    #[test]
    fn sss_frozen_sign_patterns() {
        let cases: [(u16, u8, SubframePhase, &str, f64); 4] = [
            (
                0,
                0,
                SubframePhase::Zero,
                "+++-+++++-++------+-++++-+++------+--+-+--++-++-++++-+---++++-",
                6.0,
            ),
            (
                100,
                1,
                SubframePhase::Zero,
                "------++----+--++-+-+-++++--+-----++---+-+++---+-+----------++",
                -18.0,
            ),
            (
                100,
                1,
                SubframePhase::Five,
                "-++-++-+--+++-+++-+-++++-+--+++-----++-+---++-+-+-+--+---++--+",
                2.0,
            ),
            (
                167,
                2,
                SubframePhase::Five,
                "-+----++++--+++++-+--+-+----+-+-+-+--+++++---+--++---+++-+--+-",
                -2.0,
            ),
        ];
        for (n_id_1, n_id_2, phase, pattern, sum) in cases {
            let d = sss_sequence(n_id_1, n_id_2, phase).unwrap();
            assert_eq!(
                sign_string(&d),
                pattern,
                "pattern mismatch for group {n_id_1} sector {n_id_2} subframe {phase}"
            );
            assert_close(d.iter().sum::<f64>(), sum, 1e-12);
            for v in d {
                assert!(v == 1.0 || v == -1.0);
            }
        }
    }

    #[test]
    fn sss_rejects_out_of_range_identities() {
        assert!(matches!(
            sss_sequence(168, 0, SubframePhase::Zero),
            Err(LteError::InvalidGroup { n_id_1: 168 })
        ));
        assert!(matches!(
            sss_sequence(0, 3, SubframePhase::Zero),
            Err(LteError::InvalidSector { n_id_2: 3 })
        ));
    }

    #[test]
    fn sss_subframe_variants_differ() {
        for n_id_1 in [0, 42, 167] {
            let a = sss_sequence(n_id_1, 0, SubframePhase::Zero).unwrap();
            let b = sss_sequence(n_id_1, 0, SubframePhase::Five).unwrap();
            assert_ne!(a, b);
        }
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn crs_frozen_values() {
        let cfg = LtePhyConfig::default();
        let inv_sqrt2 = 0.5_f64.sqrt();
        let cases: [(u16, usize, usize, &str, Complex64); 4] = [
            (
                0,
                0,
                0,
                "mpmpmppppmmpmppmmpmmmmpm",
                Complex64::new(-2.8284271247, 1.4142135624),
            ),
            (
                301,
                0,
                0,
                "mppppmmmpmpmmppmmpmppmpm",
                Complex64::new(1.4142135624, -1.4142135624),
            ),
            (
                301,
                3,
                4,
                "pmmpppppmmmppmmmmppmpmpp",
                Complex64::new(1.4142135624, 0.0),
            ),
            (
                503,
                19,
                4,
                "ppmppppmpmpmpppppppmpmmm",
                Complex64::new(5.6568542495, 0.0),
            ),
        ];
        for (pci, slot, symbol, signs, sum) in cases {
            let cell = CellIdentity::new(pci).unwrap();
            let values = crs_sequence(&cell, slot, symbol, &cfg).unwrap();
            assert_eq!(values.len(), 12);
            assert_eq!(
                crs_sign_string(&values),
                signs,
                "sign mismatch for pci {pci} slot {slot} symbol {symbol}"
            );
            let got_sum: Complex64 = values.iter().sum();
            assert_cclose(got_sum, sum, 1e-9);
            for v in values {
                assert_close(v.re.abs(), inv_sqrt2, 1e-12);
                assert_close(v.im.abs(), inv_sqrt2, 1e-12);
            }
        }
    }

    #[test]
    fn crs_position_validation() {
        let cfg = LtePhyConfig::default();
        let cell = CellIdentity::new(0).unwrap();
        assert!(matches!(
            crs_sequence(&cell, 20, 0, &cfg),
            Err(LteError::InvalidSlot { slot: 20 })
        ));
        assert!(matches!(
            crs_sequence(&cell, 0, 1, &cfg),
            Err(LteError::NoCrsInSymbol { symbol: 1 })
        ));
    }

    #[test]
    fn crs_subcarrier_positions_follow_shift() {
        let cfg = LtePhyConfig::default();
        let cases: [(u16, usize, usize); 4] = [(0, 0, 0), (301, 0, 1), (301, 4, 4), (503, 4, 2)];
        for (pci, symbol, first) in cases {
            let cell = CellIdentity::new(pci).unwrap();
            let rows = crs_subcarriers(&cell, symbol, &cfg).unwrap();
            let expected: Vec<usize> = (0..12).map(|m| 6 * m + first).collect();
            assert_eq!(
                rows, expected,
                "rows mismatch for pci {pci} symbol {symbol}"
            );
            assert!(rows.iter().all(|&k| k < cfg.n_subcarriers()));
        }
    }

    #[test]
    fn crs_pilots_pair_rows_with_values() {
        let cfg = LtePhyConfig::default();
        let cell = CellIdentity::new(301).unwrap();
        let pilots = crs_pilots(&cell, 3, 4, &cfg).unwrap();
        let rows = crs_subcarriers(&cell, 4, &cfg).unwrap();
        let values = crs_sequence(&cell, 3, 4, &cfg).unwrap();
        assert_eq!(pilots.len(), 12);
        for (i, (row, value)) in pilots.iter().enumerate() {
            assert_eq!(*row, rows[i]);
            assert_eq!(*value, values[i]);
        }
    }

    fn random_grid(rng: &mut ChaCha8Rng, cfg: &LtePhyConfig, n_symbols: usize) -> ResourceGrid {
        let mut grid = ResourceGrid::new(cfg.n_subcarriers(), n_symbols);
        for l in 0..n_symbols {
            for k in 0..cfg.n_subcarriers() {
                *grid.at_mut(k, l) =
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
        }
        grid
    }

    #[test]
    fn ofdm_round_trip_reproduces_grid() {
        let cfg = LtePhyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = random_grid(&mut rng, &cfg, 14);
        let samples = ofdm_modulate(&grid, &cfg).unwrap();
        assert_eq!(samples.len(), 2 * cfg.slot_samples());

        let back = ofdm_demodulate(&samples, 0, &cfg).unwrap();
        assert_eq!(back.n_symbols(), 14);
        for l in 0..14 {
            for k in 0..cfg.n_subcarriers() {
                assert_cclose(back.at(k, l), grid.at(k, l), 1e-12);
            }
        }
    }

    #[test]
    fn ofdm_round_trip_with_leading_offset() {
        let cfg = LtePhyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = random_grid(&mut rng, &cfg, 7);
        let samples = ofdm_modulate(&grid, &cfg).unwrap();
        let mut padded = vec![Complex64::new(0.25, -0.5); 333];
        padded.extend_from_slice(&samples);
        let back = ofdm_demodulate(&padded, 333, &cfg).unwrap();
        for l in 0..7 {
            for k in 0..cfg.n_subcarriers() {
                assert_cclose(back.at(k, l), grid.at(k, l), 1e-12);
            }
        }
    }

    #[test]
    fn ofdm_per_symbol_energy_is_unitary() {
        let cfg = LtePhyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let grid = random_grid(&mut rng, &cfg, 7);
        let samples = ofdm_modulate(&grid, &cfg).unwrap();
        for l in 0..7 {
            let start = cfg.useful_offset(l);
            let body = &samples[start..start + cfg.fft_size];
            let time_energy: f64 = body.iter().map(|v| v.norm_sqr()).sum();
            let grid_energy = grid.symbol_energy(l);
            assert!(
                (time_energy - grid_energy).abs() <= 1e-9 * grid_energy,
                "symbol {l}: time {time_energy} vs grid {grid_energy}"
            );
        }
    }

    #[test]
    fn cyclic_prefix_copies_symbol_tail() {
        let cfg = LtePhyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let grid = random_grid(&mut rng, &cfg, 7);
        let samples = ofdm_modulate(&grid, &cfg).unwrap();
        for l in 0..7 {
            let cp = cfg.cp_lengths[l];
            let start = cfg.symbol_offset(l);
            let body = &samples[start + cp..start + cp + cfg.fft_size];
            for i in 0..cp {
                assert_cclose(samples[start + i], body[cfg.fft_size - cp + i], 1e-12);
            }
        }
    }

    #[test]
    fn ofdm_shape_errors() {
        let cfg = LtePhyConfig::default();
        let narrow = ResourceGrid::new(60, 7);
        assert!(matches!(
            ofdm_modulate(&narrow, &cfg),
            Err(LteError::GridWidth { got: 60, .. })
        ));
        let ragged = ResourceGrid::new(72, 10);
        assert!(matches!(
            ofdm_modulate(&ragged, &cfg),
            Err(LteError::PartialSlot { n_symbols: 10, .. })
        ));
        let short = vec![Complex64::ZERO; 500];
        assert!(matches!(
            ofdm_demodulate(&short, 0, &cfg),
            Err(LteError::TooFewSamples { .. })
        ));
    }
}
