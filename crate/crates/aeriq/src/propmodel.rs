//! Air-to-ground propagation models and their fits.
//!
//! Two path-loss models: free-space, and a two-ray model that adds a
//! single ground reflection with a configurable reflection coefficient
//! (fixed or Fresnel) and elevation-dependent antenna patterns. A
//! single intercept — effective transmit power plus all system gains —
//! is fitted to measured RSRP by least squares; the residual is the
//! shadowing, which gets both a Gaussian and a skew-normal maximum-
//! likelihood fit so their likelihoods can be compared.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2, TAU};
use thiserror::Error;

use crate::geo::LinkGeometry;

/// Propagation speed used to convert carrier frequency to wavelength.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Minimum number of usable samples for a path-loss fit.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Minimum number of samples for a shadowing distribution fit.
pub const MIN_SHADOWING_SAMPLES: usize = 30;

#[derive(Debug, Error)]
pub enum PropError {
    #[error("distance {distance_m} m is not positive")]
    NonPositiveDistance { distance_m: f64 },
    #[error("wavelength {wavelength_m} m is not positive")]
    BadWavelength { wavelength_m: f64 },
    #[error("transmit and receive antennas coincide")]
    CoincidentAntennas,
    #[error("fixed reflection coefficient has magnitude {magnitude} > 1")]
    GammaTooLarge { magnitude: f64 },
    #[error("relative permittivity {epsilon_r} must exceed 1")]
    BadPermittivity { epsilon_r: f64 },
    #[error("{got} usable samples are too few, the fit needs {needed}")]
    TooFewSamples { got: usize, needed: usize },
    #[error("samples have no spread; a distribution fit is meaningless")]
    DegenerateSamples,
}

/// Wavelength in meters for a carrier frequency in Hz.
pub fn wavelength_m(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT_M_S / frequency_hz
}

/// Free-space path loss `20 log10(4 pi d / lambda)` in dB.
pub fn fspl_db(distance_m: f64, wavelength_m: f64) -> Result<f64, PropError> {
    if distance_m <= 0.0 || distance_m.is_nan() {
        return Err(PropError::NonPositiveDistance { distance_m });
    }
    if wavelength_m <= 0.0 || wavelength_m.is_nan() {
        return Err(PropError::BadWavelength { wavelength_m });
    }
    Ok(20.0 * (4.0 * PI * distance_m / wavelength_m).log10())
}

/// Linear power gain of a vertical half-wave dipole toward an
/// elevation angle in degrees from the horizontal. Unity broadside,
/// zero along the axis.
pub fn dipole_gain(elevation_deg: f64) -> f64 {
    let theta = elevation_deg.to_radians();
    let cos_theta = theta.cos();
    if cos_theta.abs() < 1e-12 {
        return 0.0;
    }
    let ratio = (PI / 2.0 * theta.sin()).cos() / cos_theta;
    ratio * ratio
}

/// How the ground reflection coefficient is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reflection {
    /// A fixed complex coefficient (|value| must not exceed 1).
    Fixed(Complex64),
    /// Fresnel coefficient for vertical polarization over a ground of
    /// the given relative permittivity, evaluated at the grazing angle.
    Fresnel { epsilon_r: f64 },
}

/// Antenna radiation pattern as a function of elevation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaPattern {
    Isotropic,
    HalfWaveDipole,
}

impl AntennaPattern {
    /// Linear power gain toward an elevation angle in degrees.
    pub fn gain(&self, elevation_deg: f64) -> f64 {
        match self {
            AntennaPattern::Isotropic => 1.0,
            AntennaPattern::HalfWaveDipole => dipole_gain(elevation_deg),
        }
    }
}

/// Everything the two-ray model needs beyond the link geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRayConfig {
    pub wavelength_m: f64,
    pub reflection: Reflection,
    pub tx_pattern: AntennaPattern,
    pub rx_pattern: AntennaPattern,
}

impl TwoRayConfig {
    /// Isotropic antennas over a perfect reflector — the textbook
    /// two-ray setup.
    pub fn ideal(wavelength_m: f64) -> Self {
        TwoRayConfig {
            wavelength_m,
            reflection: Reflection::Fixed(Complex64::new(-1.0, 0.0)),
            tx_pattern: AntennaPattern::Isotropic,
            rx_pattern: AntennaPattern::Isotropic,
        }
    }

    pub fn validate(&self) -> Result<(), PropError> {
        if self.wavelength_m <= 0.0 || self.wavelength_m.is_nan() {
            return Err(PropError::BadWavelength {
                wavelength_m: self.wavelength_m,
            });
        }
        match self.reflection {
            Reflection::Fixed(gamma) => {
                if gamma.norm() > 1.0 + 1e-12 {
                    return Err(PropError::GammaTooLarge {
                        magnitude: gamma.norm(),
                    });
                }
            }
            Reflection::Fresnel { epsilon_r } => {
                if epsilon_r <= 1.0 || epsilon_r.is_nan() {
                    return Err(PropError::BadPermittivity { epsilon_r });
                }
            }
        }
        Ok(())
    }
}

/// Fresnel reflection coefficient for vertical polarization at a
/// grazing angle in radians. Tends to -1 as the angle tends to zero.
pub fn fresnel_gamma_vertical(epsilon_r: f64, grazing_rad: f64) -> f64 {
    let sin_psi = grazing_rad.sin();
    let cos_psi = grazing_rad.cos();
    let root = (epsilon_r - cos_psi * cos_psi).sqrt();
    (epsilon_r * sin_psi - root) / (epsilon_r * sin_psi + root)
}

/// Complex two-ray channel amplitude: the line-of-sight ray plus one
/// ground reflection, each weighted by the antenna gains along its
/// direction and carrying its full propagation phase. The magnitude is
/// the inverse of the two-ray path loss, so a synthesizer can drive a
/// channel with this exact gain and a fit will see the model's loss.
pub fn two_ray_amplitude(
    geometry: &LinkGeometry,
    cfg: &TwoRayConfig,
) -> Result<Complex64, PropError> {
    cfg.validate()?;
    let dg = geometry.ground_distance_m;
    let ht = geometry.tx_height_m;
    let hr = geometry.rx_height_m;
    let d_los = dg.hypot(ht - hr);
    if d_los <= 0.0 || d_los.is_nan() {
        return Err(PropError::CoincidentAntennas);
    }
    let d_ref = dg.hypot(ht + hr);

    let los_elevation = (hr - ht).atan2(dg).to_degrees();
    let grazing = (ht + hr).atan2(dg);
    let reflected_elevation = -grazing.to_degrees();

    let gamma = match cfg.reflection {
        Reflection::Fixed(g) => g,
        Reflection::Fresnel { epsilon_r } => {
            Complex64::new(fresnel_gamma_vertical(epsilon_r, grazing), 0.0)
        }
    };

    let g_los = (cfg.tx_pattern.gain(los_elevation) * cfg.rx_pattern.gain(los_elevation)).sqrt();
    let g_ref = (cfg.tx_pattern.gain(reflected_elevation)
        * cfg.rx_pattern.gain(reflected_elevation))
    .sqrt();

    let k = TAU / cfg.wavelength_m;
    let field = Complex64::from_polar(g_los / d_los, -k * d_los)
        + gamma * g_ref / d_ref * Complex64::from_polar(1.0, -k * d_ref);
    Ok(field * cfg.wavelength_m / (4.0 * PI))
}

/// Two-ray path loss in dB: the magnitude of [`two_ray_amplitude`]
/// expressed as a loss.
pub fn two_ray_pl_db(geometry: &LinkGeometry, cfg: &TwoRayConfig) -> Result<f64, PropError> {
    Ok(-20.0 * two_ray_amplitude(geometry, cfg)?.norm().log10())
}

/// Which path-loss model a fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLossModel {
    Fspl,
    TwoRay,
}

impl std::fmt::Display for PathLossModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PathLossModel::Fspl => write!(f, "fspl"),
            PathLossModel::TwoRay => write!(f, "two_ray"),
        }
    }
}

/// Model path loss for one geometry.
pub fn path_loss_db(
    model: PathLossModel,
    geometry: &LinkGeometry,
    cfg: &TwoRayConfig,
) -> Result<f64, PropError> {
    match model {
        PathLossModel::Fspl => fspl_db(geometry.distance_3d_m, cfg.wavelength_m),
        PathLossModel::TwoRay => two_ray_pl_db(geometry, cfg),
    }
}

/// One measured point for a path-loss fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossSample {
    pub geometry: LinkGeometry,
    pub rsrp_db: f64,
}

/// A fitted intercept for one path-loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationFit {
    pub model: PathLossModel,
    /// Effective transmit power plus all system gains, in dB: the
    /// least-squares intercept of `rsrp = p0 - path_loss`.
    pub p0_db: f64,
    pub rmse_db: f64,
    pub n_points: usize,
}

fn usable_pairs(
    samples: &[PathLossSample],
    model: PathLossModel,
    cfg: &TwoRayConfig,
) -> Vec<(f64, f64)> {
    samples
        .iter()
        .filter_map(|s| {
            let pl = path_loss_db(model, &s.geometry, cfg).ok()?;
            (pl.is_finite() && s.rsrp_db.is_finite()).then_some((s.rsrp_db, pl))
        })
        .collect()
}

/// Fits the single intercept of `rsrp = p0 - path_loss` by least
/// squares: `p0` is the mean of `rsrp + path_loss` over all usable
/// samples. Samples with invalid geometry or non-finite values are
/// skipped.
pub fn fit_path_loss(
    samples: &[PathLossSample],
    model: PathLossModel,
    cfg: &TwoRayConfig,
) -> Result<PropagationFit, PropError> {
    let pairs = usable_pairs(samples, model, cfg);
    if pairs.len() < MIN_FIT_SAMPLES {
        return Err(PropError::TooFewSamples {
            got: pairs.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let n = pairs.len() as f64;
    let p0_db = pairs.iter().map(|(rsrp, pl)| rsrp + pl).sum::<f64>() / n;
    let mse = pairs
        .iter()
        .map(|(rsrp, pl)| {
            let r = rsrp - (p0_db - pl);
            r * r
        })
        .sum::<f64>()
        / n;
    Ok(PropagationFit {
        model,
        p0_db,
        rmse_db: mse.sqrt(),
        n_points: pairs.len(),
    })
}

/// Shadowing residuals `w = rsrp - p0 + path_loss`, over the same
/// usable samples the fit saw (mean is zero by construction).
pub fn extract_shadowing(
    samples: &[PathLossSample],
    fit: &PropagationFit,
    cfg: &TwoRayConfig,
) -> Vec<f64> {
    usable_pairs(samples, fit.model, cfg)
        .into_iter()
        .map(|(rsrp, pl)| rsrp - fit.p0_db + pl)
        .collect()
}

/// Gaussian maximum-likelihood fit of a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean_db: f64,
    pub std_db: f64,
    pub loglik: f64,
}

/// Skew-normal maximum-likelihood fit: density
/// `(2/omega) phi(z) Phi(alpha z)` with `z = (x - location) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewNormalFit {
    pub location_db: f64,
    pub scale_db: f64,
    pub shape: f64,
    pub loglik: f64,
}

/// Both shadowing distribution fits side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowingFit {
    pub gaussian: GaussianFit,
    pub skew_normal: SkewNormalFit,
}

/// Log of the standard normal CDF, stable far into the left tail.
fn ln_std_normal_cdf(t: f64) -> f64 {
    if t > -20.0 {
        (0.5 * erfc(-t / SQRT_2)).ln()
    } else {
        let t2 = t * t;
        -0.5 * t2 - (TAU.sqrt() * -t).ln()
            + (-1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2)).ln_1p()
    }
}

/// Log density of the skew-normal distribution.
pub fn skew_normal_log_pdf(x: f64, location: f64, scale: f64, shape: f64) -> f64 {
    let z = (x - location) / scale;
    2f64.ln() - scale.ln() - 0.5 * (TAU.ln() + z * z) + ln_std_normal_cdf(shape * z)
}

fn skew_normal_loglik(samples: &[f64], location: f64, scale: f64, shape: f64) -> f64 {
    samples
        .iter()
        .map(|&x| skew_normal_log_pdf(x, location, scale, shape))
        .sum()
}

/// Derivative-free Nelder-Mead minimization, returning the best vertex.
fn nelder_mead<F: FnMut(&[f64; 3]) -> f64>(
    mut f: F,
    start: [f64; 3],
    steps: [f64; 3],
    max_evals: usize,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    let mut evals = 0usize;
    let mut eval = |x: &[f64; 3], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    simplex.push((start, eval(&start, &mut evals)));
    for i in 0..3 {
        let mut v = start;
        v[i] += steps[i];
        simplex.push((v, eval(&v, &mut evals)));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(v, _)| {
                (0..3)
                    .map(|i| (v[i] - simplex[0].0[i]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < 1e-8 {
            break;
        }

        let worst = simplex[3];
        let mut centroid = [0.0; 3];
        for (v, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += v[i] / 3.0;
            }
        }
        let shifted = |t: f64| {
            let mut x = [0.0; 3];
            for i in 0..3 {
                x[i] = centroid[i] + t * (worst.0[i] - centroid[i]);
            }
            x
        };

        let reflected = shifted(-1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = shifted(-2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[3] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                shifted(-0.5)
            } else {
                shifted(0.5)
            };
            let fc = eval(&contracted, &mut evals);
            if fc < worst.1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for (p, b) in entry.0.iter_mut().zip(best) {
                        *p = b + 0.5 * (*p - b);
                    }
                    entry.1 = eval(&entry.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Fits both shadowing models to the residuals by maximum likelihood.
///
/// The Gaussian fit is closed form. The skew-normal fit runs a simplex
/// search in normalized parameters from six starts: moment matching
/// with the sample skewness, and moment matching at shapes
/// {-5, -1, 0, 1, 5}; the zero-shape start coincides with the Gaussian
/// optimum, so the skew-normal likelihood can never fall below it.
pub fn fit_shadowing(samples: &[f64]) -> Result<ShadowingFit, PropError> {
    if samples.len() < MIN_SHADOWING_SAMPLES {
        return Err(PropError::TooFewSamples {
            got: samples.len(),
            needed: MIN_SHADOWING_SAMPLES,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if variance < 1e-18 {
        return Err(PropError::DegenerateSamples);
    }
    let std = variance.sqrt();
    let gaussian = GaussianFit {
        mean_db: mean,
        std_db: std,
        loglik: -0.5 * n * ((TAU * variance).ln() + 1.0),
    };

    // Optimize over u = ((location - mean)/std, ln(scale/std), shape).
    let objective = |u: &[f64; 3]| {
        let location = mean + u[0] * std;
        let scale = std * u[1].exp();
        -skew_normal_loglik(samples, location, scale, u[2])
    };

    let moment_start = |alpha: f64| -> [f64; 3] {
        let delta = alpha / (1.0 + alpha * alpha).sqrt();
        let scale = std / (1.0 - 2.0 * delta * delta / PI).sqrt();
        let location = mean - scale * delta * (2.0 / PI).sqrt();
        [(location - mean) / std, (scale / std).ln(), alpha]
    };
    let skewness = samples
        .iter()
        .map(|x| {
            let z = (x - mean) / std;
            z * z * z
        })
        .sum::<f64>()
        / n;
    let c = (2.0 * skewness / (4.0 - PI)).cbrt();
    let delta_mom = (PI / 2.0 * c * c / (1.0 + c * c)).sqrt().min(0.995) * skewness.signum();
    let alpha_mom = delta_mom / (1.0 - delta_mom * delta_mom).sqrt();

    let mut starts = vec![moment_start(alpha_mom)];
    for alpha in [-5.0, -1.0, 0.0, 1.0, 5.0] {
        starts.push(moment_start(alpha));
    }

    let mut best: ([f64; 3], f64) = ([0.0; 3], f64::INFINITY);
    for start in starts {
        let (point, value) = nelder_mead(objective, start, [0.25, 0.25, 0.5], 10_000);
        if value < best.1 {
            best = (point, value);
        }
    }
    let skew_normal = SkewNormalFit {
        location_db: mean + best.0[0] * std,
        scale_db: std * best.0[1].exp(),
        shape: best.0[2],
        loglik: -best.1,
    };
    Ok(ShadowingFit {
        gaussian,
        skew_normal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const LAMBDA: f64 = 0.0854109567;

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    #[test]
    fn fspl_reference_points() {
        assert_close(fspl_db(LAMBDA / (4.0 * PI), LAMBDA).unwrap(), 0.0, 1e-12);
        assert_close(fspl_db(1.0, LAMBDA).unwrap(), 43.353926, 1e-5);
        let d1 = fspl_db(250.0, LAMBDA).unwrap();
        let d2 = fspl_db(500.0, LAMBDA).unwrap();
        assert_close(d2 - d1, 6.020600, 1e-5);
        assert!(matches!(
            fspl_db(0.0, LAMBDA),
            Err(PropError::NonPositiveDistance { .. })
        ));
    }

    #[test]
    fn wavelength_of_the_capture_band() {
        assert_close(wavelength_m(3.51e9), LAMBDA, 1e-9);
    }

    #[test]
    fn dipole_pattern_reference_points() {
        assert_close(dipole_gain(0.0), 1.0, 1e-15);
        assert_eq!(dipole_gain(90.0), 0.0);
        assert_eq!(dipole_gain(-90.0), 0.0);
        assert_close(dipole_gain(45.0), 0.3943001329, 1e-9);
        assert_close(dipole_gain(-45.0), dipole_gain(45.0), 1e-15);
    }

    #[test]
    fn two_ray_without_reflection_is_free_space() {
        let cfg = TwoRayConfig {
            wavelength_m: LAMBDA,
            reflection: Reflection::Fixed(Complex64::ZERO),
            tx_pattern: AntennaPattern::Isotropic,
            rx_pattern: AntennaPattern::Isotropic,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let dg = 10.0 + 2000.0 * rng.random::<f64>();
            let ht = 1.0 + 30.0 * rng.random::<f64>();
            let hr = 1.0 + 150.0 * rng.random::<f64>();
            let geom = LinkGeometry::from_heights(dg, ht, hr);
            let two_ray = two_ray_pl_db(&geom, &cfg).unwrap();
            let fspl = fspl_db(dg.hypot(ht - hr), LAMBDA).unwrap();
            assert_close(two_ray, fspl, 1e-9);
        }
    }

    #[test]
    fn two_ray_reference_points() {
        let cfg = TwoRayConfig::ideal(wavelength_m(3.51e9));
        let pl_far = two_ray_pl_db(&LinkGeometry::from_heights(1000.0, 10.0, 50.0), &cfg).unwrap();
        assert_close(pl_far, 99.04814536096228, 1e-9);
        let pl_near = two_ray_pl_db(&LinkGeometry::from_heights(100.0, 10.0, 50.0), &cfg).unwrap();
        assert_close(pl_near, 78.8808585133549, 1e-9);
        assert!(matches!(
            two_ray_pl_db(&LinkGeometry::from_heights(0.0, 10.0, 10.0), &cfg),
            Err(PropError::CoincidentAntennas)
        ));
    }

    #[test]
    fn two_ray_nulls_sit_where_the_rays_align() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        let scan: Vec<(f64, f64)> = (0..7200)
            .map(|i| {
                let dg = 200.0 + i as f64 * 0.25;
                let pl = two_ray_pl_db(&LinkGeometry::from_heights(dg, 10.0, 50.0), &cfg).unwrap();
                (dg, pl)
            })
            .collect();
        let mut nulls = 0;
        for w in scan.windows(3) {
            if w[1].1 > w[0].1 && w[1].1 > w[2].1 {
                nulls += 1;
                let dg = w[1].0;
                let d_los = dg.hypot(40.0);
                let d_ref = dg.hypot(60.0);
                // The unequal ray amplitudes pull each null slightly
                // off the pure phase-alignment point.
                let cycles = (d_ref - d_los) / LAMBDA;
                assert_close(cycles, cycles.round(), 0.05);
            }
        }
        assert!(nulls > 3, "only {nulls} nulls in the scan");
    }

    #[test]
    fn two_ray_oscillation_slows_down_with_distance() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        for hr in [30.0, 50.0, 70.0, 90.0, 110.0] {
            let extrema = |lo: f64, hi: f64| -> usize {
                let n = 6000;
                let pls: Vec<f64> = (0..=n)
                    .map(|i| {
                        let dg = lo + (hi - lo) * i as f64 / n as f64;
                        two_ray_pl_db(&LinkGeometry::from_heights(dg, 10.0, hr), &cfg).unwrap()
                    })
                    .collect();
                pls.windows(3)
                    .filter(|w| (w[1] > w[0]) != (w[2] > w[1]))
                    .count()
            };
            let near = extrema(100.0, 400.0);
            let far = extrema(700.0, 1000.0);
            assert!(near > far, "h_r {hr}: near {near} <= far {far}");
        }
    }

    #[test]
    fn fresnel_tends_to_minus_one_at_grazing() {
        for epsilon_r in [2.0, 15.0, 81.0] {
            let gamma = fresnel_gamma_vertical(epsilon_r, 1e-6);
            assert_close(gamma, -1.0, 1e-3);
        }
    }

    fn fspl_samples(intercept: f64) -> Vec<PathLossSample> {
        (0..40)
            .map(|i| {
                let geometry = LinkGeometry::from_heights(50.0 + 25.0 * i as f64, 10.0, 50.0);
                let rsrp_db = intercept - fspl_db(geometry.distance_3d_m, LAMBDA).unwrap();
                PathLossSample { geometry, rsrp_db }
            })
            .collect()
    }

    #[test]
    fn noiseless_fit_recovers_the_intercept_exactly() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        let samples = fspl_samples(20.0);
        let fit = fit_path_loss(&samples, PathLossModel::Fspl, &cfg).unwrap();
        assert_close(fit.p0_db, 20.0, 1e-9);
        assert!(fit.rmse_db < 1e-9);
        assert_eq!(fit.n_points, samples.len());
        let w = extract_shadowing(&samples, &fit, &cfg);
        assert!(w.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn fit_is_translation_equivariant() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut samples = fspl_samples(20.0);
        for s in &mut samples {
            s.rsrp_db += 2.0 * rng.random::<f64>() - 1.0;
        }
        let base = fit_path_loss(&samples, PathLossModel::TwoRay, &cfg).unwrap();
        let w_base = extract_shadowing(&samples, &base, &cfg);
        let mut shifted = samples.clone();
        for s in &mut shifted {
            s.rsrp_db += 13.5;
        }
        let moved = fit_path_loss(&shifted, PathLossModel::TwoRay, &cfg).unwrap();
        assert_close(moved.p0_db, base.p0_db + 13.5, 1e-9);
        assert_close(moved.rmse_db, base.rmse_db, 1e-9);
        let w_moved = extract_shadowing(&shifted, &moved, &cfg);
        for (a, b) in w_base.iter().zip(&w_moved) {
            assert_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn gaussian_shadowing_survives_the_fit() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sigma = 3.0;
        let samples: Vec<PathLossSample> = (0..2000)
            .map(|i| {
                let geometry = LinkGeometry::from_heights(50.0 + 0.5 * i as f64, 10.0, 50.0);
                let noise: f64 = rng.sample(StandardNormal);
                let rsrp_db =
                    17.0 - fspl_db(geometry.distance_3d_m, LAMBDA).unwrap() + sigma * noise;
                PathLossSample { geometry, rsrp_db }
            })
            .collect();
        let fit = fit_path_loss(&samples, PathLossModel::Fspl, &cfg).unwrap();
        assert_close(fit.p0_db, 17.0, 0.2);
        assert_close(fit.rmse_db, sigma, 0.3);
        let w = extract_shadowing(&samples, &fit, &cfg);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert!(mean.abs() < 1e-9);
        let std = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
        assert_close(std, sigma, 0.3);
    }

    #[test]
    fn too_few_samples_are_rejected() {
        let cfg = TwoRayConfig::ideal(LAMBDA);
        let samples = fspl_samples(20.0);
        assert!(matches!(
            fit_path_loss(&samples[..5], PathLossModel::Fspl, &cfg),
            Err(PropError::TooFewSamples { got: 5, needed: 10 })
        ));
    }

    #[test]
    fn zero_shape_skew_normal_is_the_gaussian_density() {
        for x in [-4.0, -1.0, 0.0, 0.3, 2.5] {
            let skew = skew_normal_log_pdf(x, 0.5, 1.7, 0.0);
            let z = (x - 0.5) / 1.7;
            let gauss = -0.5 * (TAU.ln() + z * z) - 1.7f64.ln();
            assert_close(skew, gauss, 1e-12);
        }
    }

    #[test]
    fn log_normal_cdf_is_stable_in_the_tail() {
        // Continuity across the asymptotic switchover.
        let a = ln_std_normal_cdf(-20.0 + 1e-5);
        let b = ln_std_normal_cdf(-20.0 - 1e-5);
        assert!((a - b).abs() < 0.01, "{a} vs {b}");
        assert!(ln_std_normal_cdf(-40.0).is_finite());
        assert_close(ln_std_normal_cdf(0.0), 0.5f64.ln(), 1e-12);
    }

    fn draw_skew_normal(
        rng: &mut ChaCha8Rng,
        location: f64,
        scale: f64,
        shape: f64,
        n: usize,
    ) -> Vec<f64> {
        let delta = shape / (1.0 + shape * shape).sqrt();
        (0..n)
            .map(|_| {
                let z0: f64 = rng.sample(StandardNormal);
                let z1: f64 = rng.sample(StandardNormal);
                let x = delta * z0.abs() + (1.0 - delta * delta).sqrt() * z1;
                location + scale * x
            })
            .collect()
    }

    #[test]
    fn gaussian_data_keeps_the_shape_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let samples: Vec<f64> = (0..5000)
            .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = fit_shadowing(&samples).unwrap();
        assert_close(fit.gaussian.mean_db, 0.0, 0.15);
        assert_close(fit.gaussian.std_db, 3.0, 0.15);
        assert!(
            fit.skew_normal.shape.abs() < 0.5,
            "{}",
            fit.skew_normal.shape
        );
        assert!(fit.skew_normal.loglik - fit.gaussian.loglik < 2.0);
        assert!(fit.skew_normal.loglik >= fit.gaussian.loglik - 1e-9);
    }

    #[test]
    fn skewed_data_recovers_its_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let samples = draw_skew_normal(&mut rng, 2.0, 3.0, -4.0, 5000);
        let fit = fit_shadowing(&samples).unwrap();
        assert_close(fit.skew_normal.location_db, 2.0, 0.3);
        assert_close(fit.skew_normal.scale_db, 3.0, 0.45);
        assert_close(fit.skew_normal.shape, -4.0, 0.6);
        assert!(
            fit.skew_normal.loglik - fit.gaussian.loglik > 20.0,
            "gain {}",
            fit.skew_normal.loglik - fit.gaussian.loglik
        );
    }

    #[test]
    fn skew_fit_never_loses_to_the_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let samples: Vec<f64> = (0..200)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0 + rng.random::<f64>())
                .collect();
            let fit = fit_shadowing(&samples).unwrap();
            assert!(fit.skew_normal.loglik >= fit.gaussian.loglik - 1e-9);
            assert!(fit.gaussian.std_db > 0.0 && fit.skew_normal.scale_db > 0.0);
        }
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        assert!(matches!(
            fit_shadowing(&vec![1.5; 100]),
            Err(PropError::DegenerateSamples)
        ));
        assert!(matches!(
            fit_shadowing(&[0.0; 10]),
            Err(PropError::TooFewSamples { .. })
        ));
    }
}
