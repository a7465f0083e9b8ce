//! Spherical-Earth geometry, the slot clock, and fleet kinematics.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Mean spherical Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.2921159e-5;

/// Seconds since the scenario epoch.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Instant(f64);

impl Instant {
    pub fn new(seconds: f64) -> Result<Self> {
        if !(seconds >= 0.0) || !seconds.is_finite() {
            return Err(Error::out_of_range("t", seconds, "finite, >= 0"));
        }
        Ok(Self(seconds))
    }

    /// Start of slot `slot` for a clock ticking every `slot_duration` seconds.
    pub fn from_slot(slot: usize, slot_duration: f64) -> Result<Self> {
        if !(slot_duration > 0.0) {
            return Err(Error::out_of_range("slot_duration", slot_duration, "> 0"));
        }
        Self::new(slot as f64 * slot_duration)
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    EarthFixed,
    Inertial,
}

/// A position or direction in km, tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianVec {
    pub frame: Frame,
    pub v: Vector3<f64>,
}

impl CartesianVec {
    pub fn new(frame: Frame, x: f64, y: f64, z: f64) -> Self {
        Self {
            frame,
            v: Vector3::new(x, y, z),
        }
    }

    pub fn earth_fixed(x: f64, y: f64, z: f64) -> Self {
        Self::new(Frame::EarthFixed, x, y, z)
    }

    pub fn inertial(x: f64, y: f64, z: f64) -> Self {
        Self::new(Frame::Inertial, x, y, z)
    }

    pub fn from_vector(frame: Frame, v: Vector3<f64>) -> Self {
        Self { frame, v }
    }

    pub fn x(&self) -> f64 {
        self.v.x
    }

    pub fn y(&self) -> f64 {
        self.v.y
    }

    pub fn z(&self) -> f64 {
        self.v.z
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<()> {
        if self.frame != frame {
            return Err(Error::FrameMismatch {
                expected: frame,
                actual: self.frame,
            });
        }
        Ok(())
    }

    /// `self - other`, refusing to mix frames.
    pub fn checked_sub(&self, other: &CartesianVec) -> Result<Vector3<f64>> {
        other.expect_frame(self.frame)?;
        Ok(self.v - other.v)
    }
}

/// Latitude/longitude in degrees, altitude in km above the spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPos {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_km: f64,
}

impl GeodeticPos {
    /// Validates bounds; longitude is wrapped into (-180, 180].
    pub fn new(lat_deg: f64, lon_deg: f64, alt_km: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat_deg) {
            return Err(Error::out_of_range("lat", lat_deg, "[-90, 90]"));
        }
        if !lon_deg.is_finite() {
            return Err(Error::out_of_range("lon", lon_deg, "finite"));
        }
        if !(alt_km >= 0.0) || !alt_km.is_finite() {
            return Err(Error::out_of_range("alt", alt_km, ">= 0"));
        }
        Ok(Self {
            lat_deg,
            lon_deg: wrap_lon(lon_deg),
            alt_km,
        })
    }
}

fn wrap_lon(lon: f64) -> f64 {
    let mut l = lon % 360.0;
    if l > 180.0 {
        l -= 360.0;
    } else if l <= -180.0 {
        l += 360.0;
    }
    l
}

pub fn geodetic_to_cartesian(p: &GeodeticPos) -> CartesianVec {
    let r = EARTH_RADIUS_KM + p.alt_km;
    let (slat, clat) = p.lat_deg.to_radians().sin_cos();
    let (slon, clon) = p.lon_deg.to_radians().sin_cos();
    CartesianVec::earth_fixed(r * clat * clon, r * clat * slon, r * slat)
}

pub fn cartesian_to_geodetic(c: &CartesianVec) -> Result<GeodeticPos> {
    c.expect_frame(Frame::EarthFixed)?;
    let r = c.norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints("position at Earth center"));
    }
    let lat = (c.z() / r).clamp(-1.0, 1.0).asin().to_degrees();
    let lon = c.y().atan2(c.x()).to_degrees();
    GeodeticPos::new(lat, lon, (r - EARTH_RADIUS_KM).max(0.0))
}

/// Rotates an inertial vector into the Earth-fixed frame at time `t`.
pub fn inertial_to_earth_fixed(v: &CartesianVec, t: Instant) -> Result<CartesianVec> {
    v.expect_frame(Frame::Inertial)?;
    Ok(CartesianVec::from_vector(
        Frame::EarthFixed,
        rotate_z(&v.v, -EARTH_ROTATION_RAD_S * t.seconds()),
    ))
}

pub(crate) fn rotate_z(v: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Elevation of `sat` above the local horizontal plane at `ground`, degrees.
pub fn elevation_deg(ground: &CartesianVec, sat: &CartesianVec) -> Result<f64> {
    ground.expect_frame(Frame::EarthFixed)?;
    let ray = sat.checked_sub(ground)?;
    let range = ray.norm();
    if range == 0.0 {
        return Err(Error::CoincidentPoints(
            "satellite coincides with ground point",
        ));
    }
    let up = ground.v.norm();
    if up == 0.0 {
        return Err(Error::CoincidentPoints("ground point at Earth center"));
    }
    let s = ground.v.dot(&ray) / (up * range);
    Ok(s.clamp(-1.0, 1.0).asin().to_degrees())
}

pub fn slant_range_km(ground: &CartesianVec, sat: &CartesianVec) -> Result<f64> {
    Ok(sat.checked_sub(ground)?.norm())
}

/// Great-circle distance on a sphere of radius `radius_km`.
pub fn great_circle_km(a: &GeodeticPos, b: &GeodeticPos, radius_km: f64) -> f64 {
    let (p1, p2) = (a.lat_deg.to_radians(), b.lat_deg.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon_deg - a.lon_deg).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * radius_km * h.sqrt().min(1.0).asin()
}

/// Point reached from `origin` along `bearing` (radians, clockwise from north)
/// after an arc of `distance_km` at the origin's altitude.
fn destination(origin: &GeodeticPos, bearing: f64, distance_km: f64) -> GeodeticPos {
    let delta = distance_km / (EARTH_RADIUS_KM + origin.alt_km);
    let phi1 = origin.lat_deg.to_radians();
    let lam1 = origin.lon_deg.to_radians();
    let sphi2 = phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * bearing.cos();
    let phi2 = sphi2.clamp(-1.0, 1.0).asin();
    let lam2 =
        lam1 + (bearing.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * sphi2);
    GeodeticPos {
        lat_deg: phi2.to_degrees(),
        lon_deg: wrap_lon(lam2.to_degrees()),
        alt_km: origin.alt_km,
    }
}

/// Straight-line (in lat/lon) fleet trajectory with a fixed formation.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetTrack {
    pub start: GeodeticPos,
    pub end: GeodeticPos,
    pub speed_kms: f64,
    pub lav_count: usize,
    pub formation_radius_km: f64,
}

impl FleetTrack {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_kms >= 0.0) || !self.speed_kms.is_finite() {
            return Err(Error::out_of_range("speed_kms", self.speed_kms, ">= 0"));
        }
        if self.lav_count == 0 {
            return Err(Error::out_of_range("k", self.lav_count, ">= 1"));
        }
        if !(self.formation_radius_km >= 0.0) {
            return Err(Error::out_of_range(
                "formation_km",
                self.formation_radius_km,
                ">= 0",
            ));
        }
        Ok(())
    }

    /// Ground length of the start→end leg, measured along the lat/lon line.
    pub fn path_length_km(&self) -> f64 {
        self.arc_km(1.0)
    }

    fn arc_speed(&self, f: f64) -> f64 {
        let dphi = (self.end.lat_deg - self.start.lat_deg).to_radians();
        let dlam = (self.end.lon_deg - self.start.lon_deg).to_radians();
        let phi = self.start.lat_deg.to_radians() + f * dphi;
        EARTH_RADIUS_KM * (dphi * dphi + (phi.cos() * dlam).powi(2)).sqrt()
    }

    // Composite Simpson over [0, f]; the integrand is smooth and nearly constant.
    fn arc_km(&self, f: f64) -> f64 {
        const PANELS: usize = 64;
        let h = f / PANELS as f64;
        let mut acc = self.arc_speed(0.0) + self.arc_speed(f);
        for i in 1..PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * self.arc_speed(i as f64 * h);
        }
        acc * h / 3.0
    }

    /// Fleet centroid (leader position) at `t`; parks at `end` once reached.
    pub fn centroid(&self, t: Instant) -> GeodeticPos {
        let length = self.path_length_km();
        let travelled = self.speed_kms * t.seconds();
        let frac = if length <= 0.0 {
            0.0
        } else if travelled >= length {
            1.0
        } else {
            // Newton on arc(f) = travelled, arc' = arc_speed > 0.
            let mut f = travelled / length;
            for _ in 0..8 {
                let step = (self.arc_km(f) - travelled) / self.arc_speed(f);
                f = (f - step).clamp(0.0, 1.0);
                if step.abs() < 1e-15 {
                    break;
                }
            }
            f
        };
        GeodeticPos {
            lat_deg: self.start.lat_deg + frac * (self.end.lat_deg - self.start.lat_deg),
            lon_deg: self.start.lon_deg + frac * (self.end.lon_deg - self.start.lon_deg),
            alt_km: self.start.alt_km,
        }
    }
}

/// Leader at the centroid, followers evenly spaced on the formation circle.
pub fn lav_positions(track: &FleetTrack, t: Instant) -> Vec<GeodeticPos> {
    let c = track.centroid(t);
    let followers = track.lav_count.saturating_sub(1);
    let mut out = Vec::with_capacity(track.lav_count);
    out.push(c);
    for i in 0..followers {
        let bearing = TAU * i as f64 / followers as f64;
        out.push(destination(&c, bearing, track.formation_radius_km));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ef(x: f64, y: f64, z: f64) -> CartesianVec {
        CartesianVec::earth_fixed(x, y, z)
    }

    #[test]
    fn axis_conversions() {
        let p = geodetic_to_cartesian(&GeodeticPos::new(0.0, 0.0, 0.0).unwrap());
        assert_abs_diff_eq!(p.x(), 6371.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.y(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.z(), 0.0, epsilon = 1e-9);
        let p = geodetic_to_cartesian(&GeodeticPos::new(90.0, 0.0, 0.0).unwrap());
        assert_abs_diff_eq!(p.x(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.z(), 6371.0, epsilon = 1e-9);
    }

    #[test]
    fn london_waypoint() {
        let p = geodetic_to_cartesian(&GeodeticPos::new(51.48, -0.076, 1.0).unwrap());
        assert_abs_diff_eq!(p.norm(), 6372.0, epsilon = 1e-9);
        // 6372 * sin(51.48 deg)
        assert_abs_diff_eq!(p.z(), 4_985.394_244_994, epsilon = 1e-6);
    }

    #[test]
    fn geodetic_bounds() {
        assert!(GeodeticPos::new(90.1, 0.0, 0.0).is_err());
        assert!(GeodeticPos::new(0.0, 0.0, -1.0).is_err());
        assert_eq!(GeodeticPos::new(0.0, -180.0, 0.0).unwrap().lon_deg, 180.0);
    }

    #[test]
    fn earth_rotation() {
        let v = CartesianVec::inertial(7000.0, 0.0, 0.0);
        let r = inertial_to_earth_fixed(&v, Instant::new(0.0).unwrap()).unwrap();
        assert_eq!(r.v, v.v);
        let full = Instant::new(TAU / EARTH_ROTATION_RAD_S).unwrap();
        let r = inertial_to_earth_fixed(&v, full).unwrap();
        assert_abs_diff_eq!(r.x(), 7000.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.y(), 0.0, epsilon = 1e-6);
        let quarter = Instant::new(std::f64::consts::FRAC_PI_2 / EARTH_ROTATION_RAD_S).unwrap();
        let r = inertial_to_earth_fixed(&v, quarter).unwrap();
        assert_abs_diff_eq!(r.x(), 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.y(), -7000.0, epsilon = 1e-6);
        assert!(matches!(
            inertial_to_earth_fixed(&ef(1.0, 0.0, 0.0), quarter),
            Err(Error::FrameMismatch { .. })
        ));
    }

    #[test]
    fn elevation_cases() {
        let g = ef(6371.0, 0.0, 0.0);
        assert_abs_diff_eq!(
            elevation_deg(&g, &ef(6921.0, 0.0, 0.0)).unwrap(),
            90.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            elevation_deg(&g, &ef(6371.0, 500.0, 0.0)).unwrap(),
            0.0,
            epsilon = 1e-9
        );
        assert!(elevation_deg(&g, &g).is_err());

        // Oracle: angle between the ray and the zenith via acos, elevation = 90 - angle.
        let (s, c) = 15f64.to_radians().sin_cos();
        let sat = ef(6921.0 * c, 6921.0 * s, 0.0);
        let ray = [sat.x() - 6371.0, sat.y(), 0.0];
        let len = (ray[0] * ray[0] + ray[1] * ray[1]).sqrt();
        let zenith_angle = (ray[0] / len).acos().to_degrees();
        let expected = 90.0 - zenith_angle;
        assert_abs_diff_eq!(elevation_deg(&g, &sat).unwrap(), expected, epsilon = 1e-9);
        // tan(el) = (cos g - R/r) / sin g
        assert_abs_diff_eq!(expected, 9.947_890_832_874_3, epsilon = 1e-9);
    }

    #[test]
    fn slant_ranges() {
        let g = ef(6371.0, 0.0, 0.0);
        assert_eq!(slant_range_km(&g, &g).unwrap(), 0.0);
        assert_abs_diff_eq!(
            slant_range_km(&g, &ef(6921.0, 0.0, 0.0)).unwrap(),
            550.0,
            epsilon = 1e-9
        );
        let (s, c) = 15f64.to_radians().sin_cos();
        let sat = ef(6921.0 * c, 6921.0 * s, 0.0);
        let cosine_law = (6371f64.powi(2) + 6921f64.powi(2)
            - 2.0 * 6371.0 * 6921.0 * 15f64.to_radians().cos())
        .sqrt();
        assert_abs_diff_eq!(
            slant_range_km(&g, &sat).unwrap(),
            cosine_law,
            epsilon = 1e-9
        );
        assert!(slant_range_km(&g, &CartesianVec::inertial(0.0, 0.0, 0.0)).is_err());
    }

    fn case_track(speed: f64) -> FleetTrack {
        FleetTrack {
            start: GeodeticPos::new(51.48, -0.076, 1.0).unwrap(),
            end: GeodeticPos::new(50.48, -1.076, 1.0).unwrap(),
            speed_kms: speed,
            lav_count: 4,
            formation_radius_km: 0.1,
        }
    }

    #[test]
    fn fleet_initial_and_static() {
        let tr = case_track(0.03);
        let t0 = Instant::new(0.0).unwrap();
        for p in lav_positions(&tr, t0) {
            let d = great_circle_km(&p, &tr.start, EARTH_RADIUS_KM + 1.0);
            assert!(d <= 0.1 + 1e-9, "{d}");
        }
        let still = case_track(0.0);
        let a = lav_positions(&still, t0);
        let b = lav_positions(&still, Instant::new(3600.0).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn fleet_moves_108_km_in_an_hour() {
        let tr = case_track(0.03);
        let c = tr.centroid(Instant::new(3600.0).unwrap());
        let d = great_circle_km(&tr.start, &c, EARTH_RADIUS_KM);
        assert!((d - 108.0).abs() / 108.0 < 0.01, "{d}");
        // The leg is longer than an hour of travel: the endpoint is not reached.
        assert!(tr.path_length_km() > 108.0);
    }

    #[test]
    fn fleet_parks_at_endpoint() {
        let tr = case_track(1.0);
        let c = tr.centroid(Instant::new(3600.0).unwrap());
        assert_abs_diff_eq!(c.lat_deg, 50.48, epsilon = 1e-12);
        assert_abs_diff_eq!(c.lon_deg, -1.076, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn geodetic_round_trip(lat in -89.9f64..89.9, lon in -179.9f64..180.0, alt in 0.0f64..2000.0) {
            let p = GeodeticPos::new(lat, lon, alt).unwrap();
            let c = geodetic_to_cartesian(&p);
            let q = cartesian_to_geodetic(&c).unwrap();
            let back = geodetic_to_cartesian(&q);
            prop_assert!((back.v - c.v).norm() < 1e-9);
        }

        #[test]
        fn elevation_rotation_invariant(
            lat in -80.0f64..80.0, lon in -180.0f64..180.0,
            dlat in -10.0f64..10.0, dlon in -10.0f64..10.0,
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0, angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let g = geodetic_to_cartesian(&GeodeticPos::new(lat, lon, 0.0).unwrap());
            let s = geodetic_to_cartesian(&GeodeticPos::new((lat + dlat).clamp(-90.0, 90.0), lon + dlon, 550.0).unwrap());
            let axis = nalgebra::Unit::new_normalize(Vector3::new(ax, ay, az));
            let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
            let gr = CartesianVec::from_vector(Frame::EarthFixed, rot * g.v);
            let sr = CartesianVec::from_vector(Frame::EarthFixed, rot * s.v);
            let e1 = elevation_deg(&g, &s).unwrap();
            let e2 = elevation_deg(&gr, &sr).unwrap();
            prop_assert!((e1 - e2).abs() < 1e-9);
        }

        #[test]
        fn fleet_speed_and_formation(t1 in 0.0f64..3600.0, dt in 0.0f64..3600.0, k in 1usize..9) {
            let mut tr = case_track(0.03);
            tr.lav_count = k;
            let a = Instant::new(t1).unwrap();
            let b = Instant::new(t1 + dt).unwrap();
            let sep = great_circle_km(&tr.centroid(a), &tr.centroid(b), EARTH_RADIUS_KM);
            prop_assert!(sep <= 0.03 * dt * (1.0 + 1e-6) + 1e-9);
            let lavs = lav_positions(&tr, b);
            prop_assert_eq!(lavs.len(), k);
            let c = tr.centroid(b);
            for p in &lavs {
                prop_assert!(great_circle_km(p, &c, EARTH_RADIUS_KM + 1.0) <= 0.1 * (1.0 + 1e-9));
            }
        }
    }
}
