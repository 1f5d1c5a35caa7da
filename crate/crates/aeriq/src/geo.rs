//! WGS-84 geometry between a fixed transmit antenna and a moving GPS
//! track.
//!
//! The receiver positions come from a GPS logger sampled on its own
//! schedule, so capture timestamps are matched to the track by linear
//! interpolation. Link geometry (ground distance, slant distance,
//! elevation angle) is computed in a local east-north-up frame whose
//! origin sits at the transmit antenna; over the few kilometers a
//! measurement flight covers, the straight-line ENU distances are the
//! quantities the propagation models want.

use thiserror::Error;

/// WGS-84 semi-major axis in meters.
pub const WGS84_A: f64 = 6_378_137.0;

/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Default tolerance when a capture time falls just outside the GPS
/// track: times within this many seconds of an endpoint clamp to it.
pub const DEFAULT_MAX_EXTRAPOLATION_S: f64 = 1.0;

fn wgs84_e2() -> f64 {
    WGS84_F * (2.0 - WGS84_F)
}

/// Errors from track handling and position lookup.
#[derive(Debug, Error)]
pub enum GeoError {
    #[error("GPS track needs at least 2 fixes, got {got}")]
    TooFewFixes { got: usize },
    #[error("GPS fix {index} does not advance time ({t_prev} followed by {t})")]
    NonMonotonic { index: usize, t_prev: f64, t: f64 },
    #[error(
        "time {t} lies outside the GPS track span {start}..{end} \
         by more than {max_extrapolation_s} s"
    )]
    OutsideTrack {
        t: f64,
        start: f64,
        end: f64,
        max_extrapolation_s: f64,
    },
    #[error("no capture time overlaps the GPS track")]
    NoOverlap,
}

/// One GPS fix: UTC seconds and a WGS-84 position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub time_utc: f64,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

/// The transmit site: tower base position and antenna height above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxAnchor {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    /// Ground altitude of the tower base above the WGS-84 ellipsoid.
    pub ground_alt_m: f64,
    /// Antenna height above the tower base.
    pub antenna_height_m: f64,
}

impl TxAnchor {
    /// Ellipsoidal altitude of the antenna itself.
    pub fn antenna_alt_m(&self) -> f64 {
        self.ground_alt_m + self.antenna_height_m
    }
}

/// Straight-line geometry of one transmitter-receiver link.
///
/// Heights are measured above the transmitter's local ground plane, so
/// `distance_3d_m^2 == ground_distance_m^2 + (rx_height_m - tx_height_m)^2`
/// holds exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Horizontal (east-north) distance in meters.
    pub ground_distance_m: f64,
    /// Slant distance in meters.
    pub distance_3d_m: f64,
    /// Elevation of the receiver seen from the transmit antenna, in
    /// degrees; positive when the receiver is above the antenna.
    pub elevation_deg: f64,
    /// Transmit antenna height above the ground plane.
    pub tx_height_m: f64,
    /// Receiver height above the transmitter's ground plane.
    pub rx_height_m: f64,
}

impl LinkGeometry {
    /// Builds the geometry directly from a ground separation and the
    /// two antenna heights, for synthetic scenarios without GPS data.
    pub fn from_heights(ground_distance_m: f64, tx_height_m: f64, rx_height_m: f64) -> Self {
        let dh = rx_height_m - tx_height_m;
        LinkGeometry {
            ground_distance_m,
            distance_3d_m: ground_distance_m.hypot(dh),
            elevation_deg: dh.atan2(ground_distance_m).to_degrees(),
            tx_height_m,
            rx_height_m,
        }
    }
}

/// Converts a geodetic position to earth-centered earth-fixed meters.
pub fn geodetic_to_ecef(latitude_deg: f64, longitude_deg: f64, altitude_m: f64) -> [f64; 3] {
    let lat = latitude_deg.to_radians();
    let lon = longitude_deg.to_radians();
    let e2 = wgs84_e2();
    let sin_lat = lat.sin();
    let n = WGS84_A / (1.0 - e2 * sin_lat * sin_lat).sqrt();
    [
        (n + altitude_m) * lat.cos() * lon.cos(),
        (n + altitude_m) * lat.cos() * lon.sin(),
        (n * (1.0 - e2) + altitude_m) * sin_lat,
    ]
}

/// Converts ECEF meters back to geodetic `(latitude_deg, longitude_deg,
/// altitude_m)` by fixed-point iteration on the latitude.
pub fn ecef_to_geodetic(ecef: [f64; 3]) -> (f64, f64, f64) {
    let [x, y, z] = ecef;
    let e2 = wgs84_e2();
    let lon = y.atan2(x);
    let p = x.hypot(y);
    let mut lat = z.atan2(p * (1.0 - e2));
    let mut alt = 0.0;
    for _ in 0..10 {
        let sin_lat = lat.sin();
        let n = WGS84_A / (1.0 - e2 * sin_lat * sin_lat).sqrt();
        alt = if lat.abs() < 1.3 {
            p / lat.cos() - n
        } else {
            z / sin_lat - n * (1.0 - e2)
        };
        lat = z.atan2(p * (1.0 - e2 * n / (n + alt)));
    }
    (lat.to_degrees(), lon.to_degrees(), alt)
}

/// Rotates an ECEF displacement from `ref_ecef` into the east-north-up
/// frame of a reference latitude/longitude.
pub fn ecef_to_enu(
    ecef: [f64; 3],
    ref_ecef: [f64; 3],
    ref_latitude_deg: f64,
    ref_longitude_deg: f64,
) -> [f64; 3] {
    let lat = ref_latitude_deg.to_radians();
    let lon = ref_longitude_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    let dx = ecef[0] - ref_ecef[0];
    let dy = ecef[1] - ref_ecef[1];
    let dz = ecef[2] - ref_ecef[2];
    [
        -sin_lon * dx + cos_lon * dy,
        -sin_lat * cos_lon * dx - sin_lat * sin_lon * dy + cos_lat * dz,
        cos_lat * cos_lon * dx + cos_lat * sin_lon * dy + sin_lat * dz,
    ]
}

/// Inverse of [`ecef_to_enu`].
pub fn enu_to_ecef(
    enu: [f64; 3],
    ref_ecef: [f64; 3],
    ref_latitude_deg: f64,
    ref_longitude_deg: f64,
) -> [f64; 3] {
    let lat = ref_latitude_deg.to_radians();
    let lon = ref_longitude_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    let [e, n, u] = enu;
    [
        ref_ecef[0] - sin_lon * e - sin_lat * cos_lon * n + cos_lat * cos_lon * u,
        ref_ecef[1] + cos_lon * e - sin_lat * sin_lon * n + cos_lat * sin_lon * u,
        ref_ecef[2] + cos_lat * n + sin_lat * u,
    ]
}

/// Computes the link geometry from the transmit antenna to a receiver
/// fix, in the antenna-centered ENU frame.
pub fn link_geometry(anchor: &TxAnchor, rx: &GpsFix) -> LinkGeometry {
    let tx_ecef = geodetic_to_ecef(
        anchor.latitude_deg,
        anchor.longitude_deg,
        anchor.antenna_alt_m(),
    );
    let rx_ecef = geodetic_to_ecef(rx.latitude_deg, rx.longitude_deg, rx.altitude_m);
    let [e, n, u] = ecef_to_enu(rx_ecef, tx_ecef, anchor.latitude_deg, anchor.longitude_deg);
    let ground = e.hypot(n);
    LinkGeometry {
        ground_distance_m: ground,
        distance_3d_m: (e * e + n * n + u * u).sqrt(),
        elevation_deg: u.atan2(ground).to_degrees(),
        tx_height_m: anchor.antenna_height_m,
        rx_height_m: anchor.antenna_height_m + u,
    }
}

/// A time-ordered GPS track supporting interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTrack {
    fixes: Vec<GpsFix>,
}

impl GpsTrack {
    /// Builds a track, requiring at least two fixes with strictly
    /// increasing timestamps.
    pub fn new(fixes: Vec<GpsFix>) -> Result<Self, GeoError> {
        if fixes.len() < 2 {
            return Err(GeoError::TooFewFixes { got: fixes.len() });
        }
        for (i, pair) in fixes.windows(2).enumerate() {
            if pair[1].time_utc <= pair[0].time_utc {
                return Err(GeoError::NonMonotonic {
                    index: i + 1,
                    t_prev: pair[0].time_utc,
                    t: pair[1].time_utc,
                });
            }
        }
        Ok(GpsTrack { fixes })
    }

    pub fn fixes(&self) -> &[GpsFix] {
        &self.fixes
    }

    /// First and last timestamp of the track.
    pub fn span(&self) -> (f64, f64) {
        (
            self.fixes[0].time_utc,
            self.fixes[self.fixes.len() - 1].time_utc,
        )
    }

    /// Interpolated position at time `t` with the default endpoint
    /// tolerance of [`DEFAULT_MAX_EXTRAPOLATION_S`].
    ///
    /// The boolean is true when `t` fell outside the track and was
    /// clamped to the nearest endpoint.
    pub fn position_at(&self, t: f64) -> Result<(GpsFix, bool), GeoError> {
        self.position_at_within(t, DEFAULT_MAX_EXTRAPOLATION_S)
    }

    /// Interpolated position at time `t`; times up to
    /// `max_extrapolation_s` outside the span clamp to the endpoints,
    /// anything farther is an error.
    pub fn position_at_within(
        &self,
        t: f64,
        max_extrapolation_s: f64,
    ) -> Result<(GpsFix, bool), GeoError> {
        let (start, end) = self.span();
        if t < start || t > end {
            let gap = if t < start { start - t } else { t - end };
            if gap <= max_extrapolation_s {
                let fix = if t < start {
                    self.fixes[0]
                } else {
                    self.fixes[self.fixes.len() - 1]
                };
                return Ok((GpsFix { time_utc: t, ..fix }, true));
            }
            return Err(GeoError::OutsideTrack {
                t,
                start,
                end,
                max_extrapolation_s,
            });
        }
        let hi = self
            .fixes
            .partition_point(|f| f.time_utc <= t)
            .clamp(1, self.fixes.len() - 1);
        let a = &self.fixes[hi - 1];
        let b = &self.fixes[hi];
        let frac = (t - a.time_utc) / (b.time_utc - a.time_utc);
        Ok((
            GpsFix {
                time_utc: t,
                latitude_deg: a.latitude_deg + frac * (b.latitude_deg - a.latitude_deg),
                longitude_deg: lerp_longitude(a.longitude_deg, b.longitude_deg, frac),
                altitude_m: a.altitude_m + frac * (b.altitude_m - a.altitude_m),
            },
            false,
        ))
    }
}

/// Linear interpolation of longitude along the shorter way around,
/// normalized to (-180, 180].
fn lerp_longitude(a: f64, b: f64, frac: f64) -> f64 {
    let mut delta = b - a;
    if delta > 180.0 {
        delta -= 360.0;
    } else if delta < -180.0 {
        delta += 360.0;
    }
    let mut lon = a + frac * delta;
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon <= -180.0 {
        lon += 360.0;
    }
    lon
}

/// Options for matching capture times against a GPS track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuseOptions {
    /// Seconds added to capture times before track lookup, correcting a
    /// known offset between the capture clock and GPS time.
    pub clock_offset_s: f64,
    /// Endpoint tolerance passed to [`GpsTrack::position_at_within`].
    pub max_extrapolation_s: f64,
}

impl Default for FuseOptions {
    fn default() -> Self {
        FuseOptions {
            clock_offset_s: 0.0,
            max_extrapolation_s: DEFAULT_MAX_EXTRAPOLATION_S,
        }
    }
}

/// Looks up every capture time on the track and computes its link
/// geometry to the anchor.
///
/// Times outside the track (beyond the tolerance) yield `None` and are
/// dropped by callers; if every time falls outside, the track and the
/// capture simply do not overlap, which is reported as an error rather
/// than an empty result.
pub fn fuse_track(
    capture_times: &[f64],
    track: &GpsTrack,
    anchor: &TxAnchor,
    options: &FuseOptions,
) -> Result<Vec<Option<(GpsFix, LinkGeometry)>>, GeoError> {
    let fused: Vec<Option<(GpsFix, LinkGeometry)>> = capture_times
        .iter()
        .map(|&t| {
            track
                .position_at_within(t + options.clock_offset_s, options.max_extrapolation_s)
                .ok()
                .map(|(fix, _)| {
                    let geometry = link_geometry(anchor, &fix);
                    (fix, geometry)
                })
        })
        .collect();
    if !capture_times.is_empty() && fused.iter().all(Option::is_none) {
        return Err(GeoError::NoOverlap);
    }
    Ok(fused)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: f64, want: f64, tol: f64) {
        assert!(
            (got - want).abs() <= tol,
            "got {got}, want {want} (tol {tol})"
        );
    }

    fn fix(t: f64, lat: f64, lon: f64, alt: f64) -> GpsFix {
        GpsFix {
            time_utc: t,
            latitude_deg: lat,
            longitude_deg: lon,
            altitude_m: alt,
        }
    }

    const ANCHOR: TxAnchor = TxAnchor {
        latitude_deg: 35.72,
        longitude_deg: -78.70,
        ground_alt_m: 85.0,
        antenna_height_m: 10.0,
    };

    #[test]
    fn ecef_axis_alignments() {
        let b = WGS84_A * (1.0 - WGS84_F);
        let on_equator = geodetic_to_ecef(0.0, 0.0, 0.0);
        assert_close(on_equator[0], WGS84_A, 1e-6);
        assert_close(on_equator[1], 0.0, 1e-6);
        assert_close(on_equator[2], 0.0, 1e-6);

        let at_pole = geodetic_to_ecef(90.0, 0.0, 0.0);
        assert_close(at_pole[0], 0.0, 1e-6);
        assert_close(at_pole[2], b, 1e-6);

        let at_90e = geodetic_to_ecef(0.0, 90.0, 100.0);
        assert_close(at_90e[0], 0.0, 1e-6);
        assert_close(at_90e[1], WGS84_A + 100.0, 1e-6);
    }

    #[test]
    fn ecef_geodetic_round_trip() {
        for (lat, lon, alt) in [
            (35.72, -78.70, 95.0),
            (0.0, 0.0, 0.0),
            (-45.0, 179.5, 3000.0),
            (89.0, 10.0, -50.0),
            (-89.5, -170.0, 10000.0),
        ] {
            let ecef = geodetic_to_ecef(lat, lon, alt);
            let (lat2, lon2, alt2) = ecef_to_geodetic(ecef);
            assert_close(lat2, lat, 1e-9);
            assert_close(lon2, lon, 1e-9);
            assert_close(alt2, alt, 1e-6);
        }
    }

    #[test]
    fn degree_scale_distances_match_geodesy() {
        // One degree of latitude near the equator spans about 110.57 km;
        // one degree of longitude at 35.72 N about 90.4 km.
        let a = link_geometry(
            &TxAnchor {
                latitude_deg: 0.0,
                longitude_deg: 0.0,
                ground_alt_m: 0.0,
                antenna_height_m: 0.0,
            },
            &fix(0.0, 1.0, 0.0, 0.0),
        );
        assert_close(a.ground_distance_m, 110_570.0, 200.0);

        let b = link_geometry(&ANCHOR, &fix(0.0, 35.72, -78.70 + 1.0, 95.0));
        assert_close(b.ground_distance_m, 90_400.0, 200.0);
    }

    #[test]
    fn link_geometry_pythagorean_consistency() {
        let rx = fix(0.0, 35.7205, -78.7003, 145.0);
        let g = link_geometry(&ANCHOR, &rx);
        let dz = g.rx_height_m - g.tx_height_m;
        assert_close(
            g.distance_3d_m,
            (g.ground_distance_m * g.ground_distance_m + dz * dz).sqrt(),
            1e-9,
        );
        assert_close(
            g.elevation_deg,
            dz.atan2(g.ground_distance_m).to_degrees(),
            1e-9,
        );
        assert!(g.rx_height_m > g.tx_height_m);
        assert!(g.elevation_deg > 0.0);
    }

    #[test]
    fn link_geometry_at_the_anchor_itself() {
        let rx = fix(0.0, ANCHOR.latitude_deg, ANCHOR.longitude_deg, 95.0);
        let g = link_geometry(&ANCHOR, &rx);
        assert_close(g.ground_distance_m, 0.0, 1e-6);
        assert_close(g.rx_height_m, 10.0, 1e-6);
        assert_close(g.tx_height_m, 10.0, 1e-9);
    }

    #[test]
    fn enu_round_trip_reproduces_position() {
        let anchor_ecef = geodetic_to_ecef(
            ANCHOR.latitude_deg,
            ANCHOR.longitude_deg,
            ANCHOR.antenna_alt_m(),
        );
        let rx = fix(0.0, 35.7305, -78.6897, 210.0);
        let rx_ecef = geodetic_to_ecef(rx.latitude_deg, rx.longitude_deg, rx.altitude_m);
        let enu = ecef_to_enu(
            rx_ecef,
            anchor_ecef,
            ANCHOR.latitude_deg,
            ANCHOR.longitude_deg,
        );
        let back = enu_to_ecef(enu, anchor_ecef, ANCHOR.latitude_deg, ANCHOR.longitude_deg);
        let (lat, lon, alt) = ecef_to_geodetic(back);
        assert_close(lat, rx.latitude_deg, 1e-9);
        assert_close(lon, rx.longitude_deg, 1e-9);
        assert_close(alt, rx.altitude_m, 1e-6);
    }

    #[test]
    fn track_requires_two_increasing_fixes() {
        assert!(matches!(
            GpsTrack::new(vec![fix(0.0, 0.0, 0.0, 0.0)]),
            Err(GeoError::TooFewFixes { got: 1 })
        ));
        let err = GpsTrack::new(vec![
            fix(0.0, 0.0, 0.0, 0.0),
            fix(1.0, 0.0, 0.0, 0.0),
            fix(1.0, 0.1, 0.0, 0.0),
        ])
        .unwrap_err();
        assert!(matches!(err, GeoError::NonMonotonic { index: 2, .. }));
    }

    #[test]
    fn track_interpolates_linearly() {
        let track = GpsTrack::new(vec![
            fix(100.0, 35.0, -78.0, 100.0),
            fix(110.0, 35.1, -78.2, 140.0),
            fix(130.0, 35.3, -78.2, 140.0),
        ])
        .unwrap();
        let (p, clamped) = track.position_at(105.0).unwrap();
        assert!(!clamped);
        assert_close(p.latitude_deg, 35.05, 1e-12);
        assert_close(p.longitude_deg, -78.1, 1e-12);
        assert_close(p.altitude_m, 120.0, 1e-12);

        let (q, _) = track.position_at(110.0).unwrap();
        assert_close(q.latitude_deg, 35.1, 1e-12);

        let (r, _) = track.position_at(120.0).unwrap();
        assert_close(r.latitude_deg, 35.2, 1e-12);
    }

    #[test]
    fn track_clamps_within_tolerance_and_errors_beyond() {
        let track = GpsTrack::new(vec![
            fix(100.0, 35.0, -78.0, 100.0),
            fix(110.0, 35.1, -78.0, 100.0),
        ])
        .unwrap();
        let (p, clamped) = track.position_at(99.5).unwrap();
        assert!(clamped);
        assert_close(p.latitude_deg, 35.0, 1e-12);
        let (q, clamped) = track.position_at(110.9).unwrap();
        assert!(clamped);
        assert_close(q.latitude_deg, 35.1, 1e-12);
        assert!(matches!(
            track.position_at(98.0),
            Err(GeoError::OutsideTrack { .. })
        ));
        assert!(track.position_at_within(95.0, 6.0).is_ok());
    }

    #[test]
    fn longitude_interpolation_crosses_antimeridian() {
        let track =
            GpsTrack::new(vec![fix(0.0, 0.0, 179.9, 0.0), fix(10.0, 0.0, -179.9, 0.0)]).unwrap();
        let (p, _) = track.position_at(5.0).unwrap();
        assert_close(p.longitude_deg.abs(), 180.0, 1e-9);
        let (q, _) = track.position_at(2.5).unwrap();
        assert_close(q.longitude_deg, 179.95, 1e-9);
    }

    #[test]
    fn fuse_drops_outside_times_and_flags_no_overlap() {
        let track = GpsTrack::new(vec![
            fix(100.0, 35.72, -78.70, 150.0),
            fix(200.0, 35.73, -78.70, 150.0),
        ])
        .unwrap();
        let fused = fuse_track(
            &[50.0, 120.0, 180.0, 300.0],
            &track,
            &ANCHOR,
            &FuseOptions::default(),
        )
        .unwrap();
        assert!(fused[0].is_none());
        assert!(fused[1].is_some());
        assert!(fused[2].is_some());
        assert!(fused[3].is_none());

        assert!(matches!(
            fuse_track(&[0.0, 10.0], &track, &ANCHOR, &FuseOptions::default()),
            Err(GeoError::NoOverlap)
        ));
    }

    #[test]
    fn fuse_applies_clock_offset() {
        let track = GpsTrack::new(vec![
            fix(100.0, 35.0, -78.0, 0.0),
            fix(110.0, 35.1, -78.0, 0.0),
        ])
        .unwrap();
        let options = FuseOptions {
            clock_offset_s: 100.0,
            ..FuseOptions::default()
        };
        let fused = fuse_track(&[5.0], &track, &ANCHOR, &options).unwrap();
        let (fix, _) = fused[0].as_ref().unwrap();
        assert_close(fix.latitude_deg, 35.05, 1e-12);
    }
}
