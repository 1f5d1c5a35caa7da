//! Rational-ratio polyphase resampling between capture and baseband
//! rates.
//!
//! Captures arrive at the recorder's rate (2 Msps in the reference
//! setup) while the LTE numerology wants 1.92 Msps, a ratio of 24/25.
//! The resampler interpolates with a Kaiser-windowed sinc kernel
//! evaluated on a polyphase grid: output sample `j` is the kernel dotted
//! with the input around time `j * down / up`, so the result is
//! zero-phase (no group delay to compensate) with unit DC gain.

use num_complex::Complex64;
use thiserror::Error;

/// Largest denominator considered when turning a rate ratio into a
/// rational factor.
const MAX_DENOMINATOR: u64 = 4096;

/// Relative error allowed between the requested ratio and its rational
/// approximation.
const RATIO_TOLERANCE: f64 = 1e-9;

/// Kernel half-width in input samples.
const HALF_WIDTH: usize = 24;

/// Kaiser shape parameter for roughly 80 dB of stopband attenuation.
const KAISER_BETA: f64 = 7.857;

/// Fraction of the limiting Nyquist rate kept in the passband.
const CUTOFF_RELAX: f64 = 0.91;

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("sample rate {rate} is not a positive finite number")]
    InvalidRate { rate: f64 },
    #[error(
        "ratio {ratio} has no rational approximation p/q with q <= {MAX_DENOMINATOR} \
         within a relative error of {RATIO_TOLERANCE:e}"
    )]
    UnrepresentableRatio { ratio: f64 },
}

/// Best continued-fraction convergent of `x` with denominator at most
/// `max_den`, if it is close enough to be treated as exact.
fn rational_approx(x: f64, max_den: u64) -> Option<(u64, u64)> {
    let (mut p0, mut q0) = (0u64, 1u64);
    let (mut p1, mut q1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if !(0.0..=1e18).contains(&a) {
            return None;
        }
        let a = a as u64;
        let p2 = a.checked_mul(p1)?.checked_add(p0)?;
        let q2 = a.checked_mul(q1)?.checked_add(q0)?;
        if q2 > max_den {
            break;
        }
        (p0, q0) = (p1, q1);
        (p1, q1) = (p2, q2);
        let frac = r - a as f64;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    if q1 == 0 {
        return None;
    }
    ((p1 as f64 / q1 as f64 - x).abs() <= RATIO_TOLERANCE * x).then_some((p1, q1))
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// A polyphase resampler for one fixed rational rate ratio.
#[derive(Debug, Clone)]
pub struct RationalResampler {
    up: u64,
    down: u64,
    /// `up` rows of `2 * HALF_WIDTH + 1` taps, row `p` interpolating at
    /// fractional position `p / up` between input samples.
    taps: Vec<f64>,
}

impl RationalResampler {
    /// Builds a resampler from `input_rate` to `output_rate`.
    ///
    /// The ratio must reduce to a rational factor with a denominator of
    /// at most [`MAX_DENOMINATOR`]; equal rates yield a pass-through.
    pub fn new(input_rate: f64, output_rate: f64) -> Result<Self, ResampleError> {
        for rate in [input_rate, output_rate] {
            if !rate.is_finite() || rate <= 0.0 {
                return Err(ResampleError::InvalidRate { rate });
            }
        }
        let ratio = output_rate / input_rate;
        let (up, down) = rational_approx(ratio, MAX_DENOMINATOR)
            .ok_or(ResampleError::UnrepresentableRatio { ratio })?;
        let mut resampler = RationalResampler {
            up,
            down,
            taps: Vec::new(),
        };
        if !resampler.is_identity() {
            resampler.build_taps();
        }
        Ok(resampler)
    }

    fn build_taps(&mut self) {
        let width = 2 * HALF_WIDTH + 1;
        let k = HALF_WIDTH as f64;
        let cutoff = CUTOFF_RELAX * 0.5 * (self.up as f64 / self.down as f64).min(1.0);
        let i0_beta = bessel_i0(KAISER_BETA);
        self.taps = vec![0.0; self.up as usize * width];
        for phase in 0..self.up as usize {
            let frac = phase as f64 / self.up as f64;
            let row = &mut self.taps[phase * width..(phase + 1) * width];
            let mut sum = 0.0;
            for (ti, tap) in row.iter_mut().enumerate() {
                let offset = ti as f64 - k;
                let arg = frac - offset;
                if arg.abs() <= k {
                    let window =
                        bessel_i0(KAISER_BETA * (1.0 - (arg / k).powi(2)).sqrt()) / i0_beta;
                    *tap = 2.0 * cutoff * sinc(2.0 * cutoff * arg) * window;
                    sum += *tap;
                }
            }
            for tap in row.iter_mut() {
                *tap /= sum;
            }
        }
    }

    /// The reduced `(up, down)` factor pair.
    pub fn ratio(&self) -> (u64, u64) {
        (self.up, self.down)
    }

    /// True when input and output rates are equal.
    pub fn is_identity(&self) -> bool {
        self.up == self.down
    }

    /// Output length for an input of `input_len` samples:
    /// `ceil(input_len * up / down)`, preserving the span's duration.
    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as u64 * self.up).div_ceil(self.down)) as usize
    }

    /// Resamples one block, treating samples outside it as zero.
    pub fn resample(&self, input: &[Complex64]) -> Vec<Complex64> {
        if self.is_identity() {
            return input.to_vec();
        }
        let width = 2 * HALF_WIDTH + 1;
        let n_out = self.output_len(input.len());
        let mut output = Vec::with_capacity(n_out);
        for j in 0..n_out as u64 {
            let num = j * self.down;
            let n0 = (num / self.up) as isize;
            let phase = (num % self.up) as usize;
            let row = &self.taps[phase * width..(phase + 1) * width];
            let first = n0 - HALF_WIDTH as isize;
            let mut acc = Complex64::ZERO;
            for (ti, tap) in row.iter().enumerate() {
                let i = first + ti as isize;
                if i >= 0 && (i as usize) < input.len() {
                    acc += input[i as usize] * *tap;
                }
            }
            output.push(acc);
        }
        output
    }
}

/// One-shot convenience over [`RationalResampler`].
pub fn resample(
    input: &[Complex64],
    input_rate: f64,
    output_rate: f64,
) -> Result<Vec<Complex64>, ResampleError> {
    Ok(RationalResampler::new(input_rate, output_rate)?.resample(input))
}
