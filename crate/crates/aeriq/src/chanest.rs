//! CRS-based channel estimation and RSRP.
//!
//! Once sync has pinned the cell identity and subframe timing, the
//! cell-specific reference signals are known at every pilot resource
//! element. Dividing the received value by the known pilot (unit
//! modulus, so division is multiplication by the conjugate) gives the
//! least-squares channel estimate there; a separable piecewise-cubic
//! interpolation — frequency within each pilot-bearing symbol, then
//! time per subcarrier — extends it over the whole grid. RSRP is the
//! average power of the raw pilot estimates, in dB relative to digital
//! full scale.

use num_complex::Complex64;
use thiserror::Error;

use crate::lte::{crs_pilots, CellIdentity, LteError, LtePhyConfig, ResourceGrid};

/// Minimum number of knots for the cubic path; interpolation over
/// fewer falls back to linear and flags it.
pub const MIN_CUBIC_KNOTS: usize = 4;

#[derive(Debug, Error)]
pub enum ChanestError {
    #[error("grid of {n_symbols} symbols is not aligned to whole slots of {per_slot}")]
    NotSlotAligned { n_symbols: usize, per_slot: usize },
    #[error("no pilot estimates to work from")]
    NoPilots,
    #[error(transparent)]
    Lte(#[from] LteError),
}

/// One least-squares channel estimate at a pilot resource element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrsEstimate {
    pub subcarrier: usize,
    /// Absolute symbol index within the grid.
    pub symbol: usize,
    pub value: Complex64,
}

/// The complete channel picture for one demodulated grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Interpolated channel over every resource element.
    pub h_grid: ResourceGrid,
    /// Raw least-squares estimates at the pilot positions.
    pub h_crs: Vec<CrsEstimate>,
    /// `10 log10(mean |h_crs|^2)` — average pilot power in dBfs.
    pub rsrp_dbfs: f64,
    /// Noise variance estimated from adjacent-pilot differences.
    pub noise_var_est: f64,
    /// True when any interpolation axis had too few knots for cubic
    /// and dropped to linear.
    pub linear_fallback: bool,
}

/// Extracts the least-squares channel estimate at every CRS resource
/// element of a slot-aligned grid.
///
/// `first_slot` is the in-frame slot number of the grid's first slot
/// (0 or 10 from the detected subframe phase); the pilot sequence
/// depends on it.
pub fn extract_crs_ls(
    grid: &ResourceGrid,
    cell: &CellIdentity,
    first_slot: usize,
    cfg: &LtePhyConfig,
) -> Result<Vec<CrsEstimate>, ChanestError> {
    let per_slot = cfg.symbols_per_slot();
    let n_symbols = grid.n_symbols();
    if n_symbols == 0 || !n_symbols.is_multiple_of(per_slot) {
        return Err(ChanestError::NotSlotAligned {
            n_symbols,
            per_slot,
        });
    }
    let slots_per_frame = cfg.frame_samples() / cfg.slot_samples();
    let mut estimates = Vec::new();
    for slot_index in 0..n_symbols / per_slot {
        let slot = (first_slot + slot_index) % slots_per_frame;
        for l in [0, 4] {
            let symbol = slot_index * per_slot + l;
            for (k, pilot) in crs_pilots(cell, slot, l, cfg)? {
                estimates.push(CrsEstimate {
                    subcarrier: k,
                    symbol,
                    value: grid.at(k, symbol) * pilot.conj(),
                });
            }
        }
    }
    Ok(estimates)
}

/// Average pilot power in dB relative to digital full scale.
pub fn compute_rsrp(estimates: &[CrsEstimate]) -> Result<f64, ChanestError> {
    if estimates.is_empty() {
        return Err(ChanestError::NoPilots);
    }
    let mean_power: f64 =
        estimates.iter().map(|e| e.value.norm_sqr()).sum::<f64>() / estimates.len() as f64;
    Ok(10.0 * mean_power.log10())
}

/// Noise variance from half the mean squared difference of adjacent
/// same-symbol pilots (the channel cancels to first order, the two
/// independent noise terms add).
pub fn noise_variance(estimates: &[CrsEstimate]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for window in estimates.windows(2) {
        if window[0].symbol == window[1].symbol {
            sum += (window[1].value - window[0].value).norm_sqr();
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / (2.0 * pairs as f64)
    }
}

/// A one-dimensional not-a-knot cubic spline with complex values.
///
/// Outside the knot range it extrapolates linearly with the endpoint
/// derivative (clamped extrapolation).
struct Spline1d {
    xs: Vec<f64>,
    ys: Vec<Complex64>,
    /// Second derivatives at the knots.
    m: Vec<Complex64>,
}

impl Spline1d {
    /// Requires at least [`MIN_CUBIC_KNOTS`] strictly increasing knots.
    fn not_a_knot(xs: &[f64], ys: &[Complex64]) -> Spline1d {
        let n = xs.len();
        assert!(n >= MIN_CUBIC_KNOTS && n == ys.len());
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<Complex64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        // Unknowns m[1..=n-2]; m[0] and m[n-1] follow from the
        // not-a-knot conditions (third-derivative continuity at the
        // first and last interior knots).
        let k = n - 2;
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![Complex64::ZERO; k];
        for i in 1..=k {
            sub[i - 1] = h[i - 1];
            diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
            sup[i - 1] = h[i];
            rhs[i - 1] = 6.0 * (d[i] - d[i - 1]);
        }
        // Fold m[0] = ((h0+h1) m1 - h0 m2) / h1 into the first row.
        diag[0] += h[0] * (h[0] + h[1]) / h[1];
        sup[0] -= h[0] * h[0] / h[1];
        // Fold m[n-1] = ((h[n-3]+h[n-2]) m[n-2] - h[n-2] m[n-3]) / h[n-3]
        // into the last row.
        diag[k - 1] += h[n - 2] * (h[n - 3] + h[n - 2]) / h[n - 3];
        sub[k - 1] -= h[n - 2] * h[n - 2] / h[n - 3];

        // Thomas algorithm.
        for i in 1..k {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] = rhs[i] - rhs[i - 1] * w;
        }
        let mut interior = vec![Complex64::ZERO; k];
        interior[k - 1] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            interior[i] = (rhs[i] - interior[i + 1] * sup[i]) / diag[i];
        }

        let mut m = vec![Complex64::ZERO; n];
        m[1..=k].copy_from_slice(&interior);
        m[0] = (m[1] * (h[0] + h[1]) - m[2] * h[0]) / h[1];
        m[n - 1] = (m[n - 2] * (h[n - 3] + h[n - 2]) - m[n - 3] * h[n - 2]) / h[n - 3];

        Spline1d {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            m,
        }
    }

    fn derivative_at(&self, knot: usize) -> Complex64 {
        let n = self.xs.len();
        if knot == 0 {
            let h = self.xs[1] - self.xs[0];
            (self.ys[1] - self.ys[0]) / h - self.m[0] * (h / 3.0) - self.m[1] * (h / 6.0)
        } else {
            debug_assert_eq!(knot, n - 1);
            let h = self.xs[n - 1] - self.xs[n - 2];
            (self.ys[n - 1] - self.ys[n - 2]) / h
                + self.m[n - 1] * (h / 3.0)
                + self.m[n - 2] * (h / 6.0)
        }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.derivative_at(0) * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.derivative_at(n - 1) * (x - self.xs[n - 1]);
        }
        let i = match self
            .xs
            .binary_search_by(|probe| probe.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = self.xs[i + 1] - x;
        let b = x - self.xs[i];
        self.m[i] * (a * a * a / (6.0 * h))
            + self.m[i + 1] * (b * b * b / (6.0 * h))
            + (self.ys[i] / h - self.m[i] * (h / 6.0)) * a
            + (self.ys[i + 1] / h - self.m[i + 1] * (h / 6.0)) * b
    }
}

/// Interpolates scattered knots onto integer query points 0..count.
/// Returns true when too few knots forced the linear fallback.
fn interpolate_axis(xs: &[f64], ys: &[Complex64], count: usize, out: &mut [Complex64]) -> bool {
    debug_assert_eq!(out.len(), count);
    match xs.len() {
        0 => unreachable!("caller guarantees at least one knot"),
        1 => {
            out.fill(ys[0]);
            true
        }
        n if n < MIN_CUBIC_KNOTS => {
            for (q, slot) in out.iter_mut().enumerate() {
                *slot = linear_eval(xs, ys, q as f64);
            }
            true
        }
        _ => {
            let spline = Spline1d::not_a_knot(xs, ys);
            for (q, slot) in out.iter_mut().enumerate() {
                *slot = spline.eval(q as f64);
            }
            false
        }
    }
}

/// Piecewise-linear interpolation with end-slope extrapolation.
fn linear_eval(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let n = xs.len();
    let i = if x <= xs[0] {
        0
    } else if x >= xs[n - 1] {
        n - 2
    } else {
        match xs.binary_search_by(|probe| probe.partial_cmp(&x).unwrap()) {
            Ok(i) => return ys[i],
            Err(i) => i - 1,
        }
    };
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - t) + ys[i + 1] * t
}

/// Interpolates pilot estimates over a full `n_subcarriers` by
/// `n_symbols` grid: cubic along frequency within each pilot-bearing
/// symbol, then cubic along time per subcarrier. Returns the grid and
/// whether any axis fell back to linear.
pub fn interpolate_grid(
    estimates: &[CrsEstimate],
    n_subcarriers: usize,
    n_symbols: usize,
) -> Result<(ResourceGrid, bool), ChanestError> {
    if estimates.is_empty() {
        return Err(ChanestError::NoPilots);
    }
    let mut by_symbol: std::collections::BTreeMap<usize, Vec<(usize, Complex64)>> =
        std::collections::BTreeMap::new();
    for e in estimates {
        by_symbol
            .entry(e.symbol)
            .or_default()
            .push((e.subcarrier, e.value));
    }

    let mut fallback = false;
    let mut pilot_symbols = Vec::with_capacity(by_symbol.len());
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(by_symbol.len());
    for (&symbol, knots) in &mut by_symbol {
        knots.sort_by_key(|&(k, _)| k);
        let xs: Vec<f64> = knots.iter().map(|&(k, _)| k as f64).collect();
        let ys: Vec<Complex64> = knots.iter().map(|&(_, v)| v).collect();
        let mut column = vec![Complex64::ZERO; n_subcarriers];
        fallback |= interpolate_axis(&xs, &ys, n_subcarriers, &mut column);
        pilot_symbols.push(symbol as f64);
        columns.push(column);
    }

    let mut grid = ResourceGrid::new(n_subcarriers, n_symbols);
    let mut row_out = vec![Complex64::ZERO; n_symbols];
    let mut row_knots = vec![Complex64::ZERO; columns.len()];
    for k in 0..n_subcarriers {
        for (c, column) in columns.iter().enumerate() {
            row_knots[c] = column[k];
        }
        fallback |= interpolate_axis(&pilot_symbols, &row_knots, n_symbols, &mut row_out);
        for (l, &value) in row_out.iter().enumerate() {
            *grid.at_mut(k, l) = value;
        }
    }
    Ok((grid, fallback))
}

/// Runs the full chain on one slot-aligned grid: pilot extraction,
/// interpolation, RSRP, and the noise diagnostic.
pub fn estimate_channel(
    grid: &ResourceGrid,
    cell: &CellIdentity,
    first_slot: usize,
    cfg: &LtePhyConfig,
) -> Result<ChannelEstimate, ChanestError> {
    let h_crs = extract_crs_ls(grid, cell, first_slot, cfg)?;
    let rsrp_dbfs = compute_rsrp(&h_crs)?;
    let noise_var_est = noise_variance(&h_crs);
    let (h_grid, linear_fallback) =
        interpolate_grid(&h_crs, grid.n_subcarriers(), grid.n_symbols())?;
    Ok(ChannelEstimate {
        h_grid,
        h_crs,
        rsrp_dbfs,
        noise_var_est,
        linear_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lte::ofdm_demodulate;
    use crate::synth::{
        apply_impairments, synthesize_frame, ChannelScales, ChannelSpec, ImpairmentSpec,
    };

    fn phy() -> LtePhyConfig {
        LtePhyConfig::default()
    }

    fn pilot_grid(cell: &CellIdentity, gain: Complex64, n_slots: usize) -> ResourceGrid {
        let cfg = phy();
        let mut grid = ResourceGrid::new(cfg.n_subcarriers(), n_slots * cfg.symbols_per_slot());
        for slot_index in 0..n_slots {
            for l in [0, 4] {
                for (k, pilot) in crs_pilots(cell, slot_index % 20, l, &cfg).unwrap() {
                    *grid.at_mut(k, slot_index * cfg.symbols_per_slot() + l) = gain * pilot;
                }
            }
        }
        grid
    }

    #[test]
    fn ls_identity_on_scaled_pilots() {
        let cell = CellIdentity::new(301).unwrap();
        let grid = pilot_grid(&cell, Complex64::new(2.0, 0.0), 2);
        let estimates = extract_crs_ls(&grid, &cell, 0, &phy()).unwrap();
        assert_eq!(estimates.len(), 48);
        for e in &estimates {
            assert!((e.value - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_slot_grid_is_rejected() {
        let cell = CellIdentity::new(0).unwrap();
        let grid = ResourceGrid::new(72, 9);
        assert!(matches!(
            extract_crs_ls(&grid, &cell, 0, &phy()),
            Err(ChanestError::NotSlotAligned { .. })
        ));
    }

    #[test]
    fn flat_gain_round_trip_recovers_the_gain() {
        let cfg = phy();
        let cell = CellIdentity::new(172).unwrap();
        let gain = Complex64::new(0.3, -0.4);
        let samples = synthesize_frame(&cell, &ChannelScales::default(), &cfg).unwrap();
        let spec = ImpairmentSpec {
            channel: ChannelSpec::Flat(gain),
            ..ImpairmentSpec::default()
        };
        let received = apply_impairments(&samples, &spec, 0).unwrap();
        let grid = ofdm_demodulate(&received, 0, &cfg).unwrap();
        let estimates = extract_crs_ls(&grid, &cell, 0, &cfg).unwrap();
        assert_eq!(estimates.len(), 480);
        for e in &estimates {
            assert!((e.value - gain).norm() < 1e-6, "estimate {}", e.value);
        }
        let full = estimate_channel(&grid, &cell, 0, &cfg).unwrap();
        assert!((full.rsrp_dbfs - 10.0 * gain.norm_sqr().log10()).abs() < 1e-6);
        assert!(!full.linear_fallback);
        assert!(full.noise_var_est < 1e-12);
    }

    #[test]
    fn wrong_pci_lands_on_dead_resource_elements() {
        let cfg = phy();
        let cell = CellIdentity::new(100).unwrap();
        let wrong = CellIdentity::new(101).unwrap();
        assert_ne!(cell.crs_shift(), wrong.crs_shift());
        let samples = synthesize_frame(&cell, &ChannelScales::default(), &cfg).unwrap();
        let grid = ofdm_demodulate(&samples, 0, &cfg).unwrap();
        let right = compute_rsrp(&extract_crs_ls(&grid, &cell, 0, &cfg).unwrap()).unwrap();
        let off = compute_rsrp(&extract_crs_ls(&grid, &wrong, 0, &cfg).unwrap()).unwrap();
        assert!(right - off > 10.0, "right {right} dB, wrong {off} dB");
    }

    #[test]
    fn rsrp_of_unit_pilots_is_zero_dbfs() {
        let estimates = vec![
            CrsEstimate {
                subcarrier: 0,
                symbol: 0,
                value: Complex64::new(1.0, 0.0),
            };
            24
        ];
        assert!(compute_rsrp(&estimates).unwrap().abs() < 1e-12);
        assert!(matches!(compute_rsrp(&[]), Err(ChanestError::NoPilots)));
    }

    #[test]
    fn rsrp_scales_by_twenty_db_per_decade() {
        let cell = CellIdentity::new(77).unwrap();
        let base = pilot_grid(&cell, Complex64::new(0.6, 0.2), 2);
        let reference = compute_rsrp(&extract_crs_ls(&base, &cell, 0, &phy()).unwrap()).unwrap();
        for alpha in [0.1, 1.0, 10.0, 3.7] {
            let scaled = pilot_grid(&cell, Complex64::new(0.6 * alpha, 0.2 * alpha), 2);
            let rsrp = compute_rsrp(&extract_crs_ls(&scaled, &cell, 0, &phy()).unwrap()).unwrap();
            assert!(
                (rsrp - reference - 20.0 * alpha.log10()).abs() < 1e-6,
                "alpha {alpha}: {rsrp} vs {reference}"
            );
        }
    }

    #[test]
    fn spline_matches_reference_values() {
        let xs = [0.0, 4.0, 7.0, 11.0, 14.0, 18.0];
        let ys: Vec<Complex64> = [1.0, -2.0, 0.5, 3.0, 2.5, -1.0]
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let spline = Spline1d::not_a_knot(&xs, &ys);
        for (x, want) in [
            (2.0, -1.955435301607512),
            (9.5, 2.417595186699939),
            (16.0, 1.090681203246856),
            (-2.0, 5.85140932069151),
            (20.0, -3.380097845281674),
        ] {
            let got = spline.eval(x);
            assert!(
                (got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12,
                "f({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn spline_reproduces_cubics() {
        let xs = [0.0, 4.0, 7.0, 11.0, 14.0, 18.0];
        let p = |t: f64| 0.002 * t * t * t - 0.03 * t * t + 0.4 * t + 2.0;
        let ys: Vec<Complex64> = xs.iter().map(|&t| Complex64::new(p(t), 0.0)).collect();
        let spline = Spline1d::not_a_knot(&xs, &ys);
        for i in 0..=180 {
            let t = i as f64 * 0.1;
            assert!((spline.eval(t).re - p(t)).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn constant_pilots_fill_a_constant_grid() {
        let cell = CellIdentity::new(3).unwrap();
        let c = Complex64::new(-0.7, 1.1);
        let grid = pilot_grid(&cell, c, 4);
        let estimates = extract_crs_ls(&grid, &cell, 0, &phy()).unwrap();
        let (h, fallback) = interpolate_grid(&estimates, 72, 28).unwrap();
        assert!(!fallback);
        for k in 0..72 {
            for l in 0..28 {
                assert!((h.at(k, l) - c).norm() < 1e-12, "({k},{l})");
            }
        }
    }

    #[test]
    fn linear_channel_interpolates_exactly_inside() {
        let cell = CellIdentity::new(42).unwrap();
        let cfg = phy();
        let truth = |k: usize, l: usize| {
            Complex64::new(0.1 * k as f64 - 2.0, 0.05 * k as f64 + 0.02 * l as f64)
        };
        let mut grid = ResourceGrid::new(72, 28);
        for slot_index in 0..4 {
            for l_rel in [0, 4] {
                let l = slot_index * 7 + l_rel;
                for (k, pilot) in crs_pilots(&cell, slot_index, l_rel, &cfg).unwrap() {
                    *grid.at_mut(k, l) = truth(k, l) * pilot;
                }
            }
        }
        let estimates = extract_crs_ls(&grid, &cell, 0, &cfg).unwrap();
        let (h, _) = interpolate_grid(&estimates, 72, 28).unwrap();
        for k in 0..72 {
            for l in 0..28 {
                assert!(
                    (h.at(k, l) - truth(k, l)).norm() < 1e-9,
                    "({k},{l}): {} vs {}",
                    h.at(k, l),
                    truth(k, l)
                );
            }
        }
    }

    #[test]
    fn pilot_positions_are_reproduced_exactly() {
        let cell = CellIdentity::new(250).unwrap();
        let cfg = phy();
        let mut grid = ResourceGrid::new(72, 14);
        for slot_index in 0..2 {
            for l_rel in [0, 4] {
                for (k, pilot) in crs_pilots(&cell, slot_index, l_rel, &cfg).unwrap() {
                    let smooth = Complex64::new(
                        (0.05 * k as f64).sin() + 1.5,
                        (0.03 * k as f64 + slot_index as f64 * 0.2).cos(),
                    );
                    *grid.at_mut(k, slot_index * 7 + l_rel) = smooth * pilot;
                }
            }
        }
        let estimates = extract_crs_ls(&grid, &cell, 0, &cfg).unwrap();
        let (h, _) = interpolate_grid(&estimates, 72, 14).unwrap();
        for e in &estimates {
            assert!(
                (h.at(e.subcarrier, e.symbol) - e.value).norm() < 1e-9,
                "pilot at ({}, {})",
                e.subcarrier,
                e.symbol
            );
        }
    }

    #[test]
    fn single_slot_falls_back_to_linear_in_time() {
        let cell = CellIdentity::new(9).unwrap();
        let grid = pilot_grid(&cell, Complex64::new(1.0, 0.0), 1);
        let estimates = extract_crs_ls(&grid, &cell, 0, &phy()).unwrap();
        let (_, fallback) = interpolate_grid(&estimates, 72, 7).unwrap();
        assert!(fallback);
    }

    #[test]
    fn noise_variance_tracks_alternating_perturbation() {
        let delta = 0.05;
        let estimates: Vec<CrsEstimate> = (0..12)
            .map(|m| CrsEstimate {
                subcarrier: 6 * m,
                symbol: 0,
                value: Complex64::new(1.0 + if m % 2 == 0 { delta } else { -delta }, 0.0),
            })
            .collect();
        let expected = (2.0 * delta) * (2.0 * delta) / 2.0;
        assert!((noise_variance(&estimates) - expected).abs() < 1e-12);
        assert_eq!(noise_variance(&estimates[..1]), 0.0);
    }
}
