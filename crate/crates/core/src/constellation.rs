//! Walker shell generation, circular two-body propagation, visibility.

use std::fmt;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geokit::{
    elevation_deg, inertial_to_earth_fixed, CartesianVec, Frame, Instant, EARTH_RADIUS_KM,
};

/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH: f64 = 398_600.441_8;

#[derive(Debug, Clone, PartialEq)]
pub struct ShellConfig {
    pub planes: usize,
    pub sats_per_plane: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub phasing: usize,
    /// Argument-of-latitude offset applied to every satellite at t = 0.
    pub phase_offset_deg: f64,
    /// RAAN offset applied to every plane.
    pub raan_offset_deg: f64,
}

impl Default for ShellConfig {
    fn default() -> Self {
        Self {
            planes: 22,
            sats_per_plane: 72,
            altitude_km: 550.0,
            inclination_deg: 53.0,
            phasing: 1,
            phase_offset_deg: 0.0,
            raan_offset_deg: 0.0,
        }
    }
}

impl ShellConfig {
    pub fn validate(&self) -> Result<()> {
        if self.planes == 0 {
            return Err(Error::out_of_range("shell.planes", self.planes, ">= 1"));
        }
        if self.sats_per_plane == 0 {
            return Err(Error::out_of_range(
                "shell.sats_per_plane",
                self.sats_per_plane,
                ">= 1",
            ));
        }
        if !(self.altitude_km > 0.0) || !self.altitude_km.is_finite() {
            return Err(Error::out_of_range(
                "shell.altitude_km",
                self.altitude_km,
                "> 0",
            ));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(Error::out_of_range(
                "shell.inclination_deg",
                self.inclination_deg,
                "[0, 180]",
            ));
        }
        if self.phasing >= self.planes {
            return Err(Error::out_of_range(
                "shell.phasing",
                self.phasing,
                format!("[0, {}]", self.planes - 1),
            ));
        }
        if !self.phase_offset_deg.is_finite() || !self.raan_offset_deg.is_finite() {
            return Err(Error::out_of_range(
                "shell.phase_deg/raan_deg",
                format!("{}/{}", self.phase_offset_deg, self.raan_offset_deg),
                "finite",
            ));
        }
        Ok(())
    }

    pub fn radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    pub fn len(&self) -> usize {
        self.planes * self.sats_per_plane
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered by plane, then in-plane slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatelliteId {
    pub plane: u16,
    pub slot: u16,
}

impl fmt::Display for SatelliteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.plane, self.slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalElements {
    pub id: SatelliteId,
    pub raan_deg: f64,
    /// Argument of latitude at t = 0.
    pub arg_lat0_deg: f64,
    pub inclination_deg: f64,
    pub radius_km: f64,
}

impl OrbitalElements {
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.radius_km.powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub id: SatelliteId,
    /// Earth-fixed position.
    pub position: CartesianVec,
    /// Inertial velocity, expressed in Earth-fixed axes.
    pub velocity: CartesianVec,
    /// Unit beam axis, Earth-fixed.
    pub boresight: Vector3<f64>,
}

impl SatelliteState {
    pub fn nadir(&self) -> Vector3<f64> {
        -self.position.v.normalize()
    }
}

pub fn build_shell(cfg: &ShellConfig) -> Vec<OrbitalElements> {
    let (p_count, s_count) = (cfg.planes as f64, cfg.sats_per_plane as f64);
    let mut out = Vec::with_capacity(cfg.len());
    for p in 0..cfg.planes {
        for s in 0..cfg.sats_per_plane {
            let raan = 360.0 * p as f64 / p_count + cfg.raan_offset_deg;
            let anomaly = 360.0 * s as f64 / s_count
                + 360.0 * (cfg.phasing * p) as f64 / (p_count * s_count)
                + cfg.phase_offset_deg;
            out.push(OrbitalElements {
                id: SatelliteId {
                    plane: p as u16,
                    slot: s as u16,
                },
                raan_deg: raan.rem_euclid(360.0),
                arg_lat0_deg: anomaly.rem_euclid(360.0),
                inclination_deg: cfg.inclination_deg,
                radius_km: cfg.radius_km(),
            });
        }
    }
    out
}

/// Inertial position and velocity on the circular orbit at `t`.
pub fn propagate_inertial(el: &OrbitalElements, t: Instant) -> (CartesianVec, CartesianVec) {
    let n = el.mean_motion();
    let u = el.arg_lat0_deg.to_radians() + n * t.seconds();
    let (su, cu) = u.sin_cos();
    let (so, co) = el.raan_deg.to_radians().sin_cos();
    let (si, ci) = el.inclination_deg.to_radians().sin_cos();
    let a = el.radius_km;
    let pos = Vector3::new(co * cu - so * su * ci, so * cu + co * su * ci, su * si) * a;
    let vel = Vector3::new(-co * su - so * cu * ci, -so * su + co * cu * ci, cu * si) * (a * n);
    (
        CartesianVec::from_vector(Frame::Inertial, pos),
        CartesianVec::from_vector(Frame::Inertial, vel),
    )
}

/// Earth-fixed state at `t` with the beam pointing at nadir.
pub fn propagate(el: &OrbitalElements, t: Instant) -> SatelliteState {
    let (pos, vel) = propagate_inertial(el, t);
    // Frames are correct by construction; the conversion cannot fail.
    let position = inertial_to_earth_fixed(&pos, t).expect("inertial input");
    let velocity = inertial_to_earth_fixed(&vel, t).expect("inertial input");
    SatelliteState {
        id: el.id,
        boresight: -position.v.normalize(),
        position,
        velocity,
    }
}

pub fn propagate_all(elements: &[OrbitalElements], t: Instant) -> Vec<SatelliteState> {
    elements.iter().map(|el| propagate(el, t)).collect()
}

/// Satellites at or above `min_elev_deg` from `ground`, in id order.
pub fn visible_sats(
    ground: &CartesianVec,
    states: &[SatelliteState],
    min_elev_deg: f64,
) -> Result<Vec<SatelliteId>> {
    let mut ids = Vec::new();
    for s in states {
        if elevation_deg(ground, &s.position)? >= min_elev_deg {
            ids.push(s.id);
        }
    }
    ids.sort();
    Ok(ids)
}
