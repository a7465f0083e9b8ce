//! Satellite element pattern, off-boresight angles, planar-array responses.

use std::f64::consts::TAU;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geokit::CartesianVec;

/// Parabolic main lobe with a flat side-lobe floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPattern {
    pub peak_gain_dbi: f64,
    pub half_beamwidth_deg: f64,
    /// Floor depth below the peak, dB. May be infinite (no floor).
    pub sidelobe_suppression_db: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        Self {
            peak_gain_dbi: 37.5,
            half_beamwidth_deg: 1.14,
            sidelobe_suppression_db: 25.0,
        }
    }
}

impl BeamPattern {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_beamwidth_deg > 0.0) {
            return Err(Error::out_of_range(
                "pattern.hbw_deg",
                self.half_beamwidth_deg,
                "> 0",
            ));
        }
        if !(self.sidelobe_suppression_db > 0.0) {
            return Err(Error::out_of_range(
                "pattern.sll_db",
                self.sidelobe_suppression_db,
                "> 0",
            ));
        }
        if !self.peak_gain_dbi.is_finite() {
            return Err(Error::out_of_range(
                "pattern.peak_dbi",
                self.peak_gain_dbi,
                "finite",
            ));
        }
        Ok(())
    }

    pub fn floor_dbi(&self) -> f64 {
        self.peak_gain_dbi - self.sidelobe_suppression_db
    }
}

pub fn element_gain_db(psi_deg: f64, pattern: &BeamPattern) -> f64 {
    let rolloff = 3.0 * (psi_deg / pattern.half_beamwidth_deg).powi(2);
    pattern.peak_gain_dbi - rolloff.min(pattern.sidelobe_suppression_db)
}

/// Angle between the beam axis and the satellite→target ray, degrees.
pub fn off_boresight_deg(
    sat_pos: &CartesianVec,
    boresight: &Vector3<f64>,
    target: &CartesianVec,
) -> Result<f64> {
    let ray = target.checked_sub(sat_pos)?;
    let n = ray.norm();
    if n == 0.0 {
        return Err(Error::CoincidentPoints("target coincides with satellite"));
    }
    let c = boresight.dot(&ray) / (boresight.norm() * n);
    // acos loses precision near 0 and 180; atan2 of |cross| and dot does not.
    let s = boresight.cross(&ray).norm() / (boresight.norm() * n);
    Ok(s.atan2(c).to_degrees())
}

/// Uniform planar array; element (m, n) sits at m·spacing along local x and
/// n·spacing along local y, stored row-major (n-major).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub spacing_wl: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            spacing_wl: 0.5,
        }
    }
}

impl ArrayGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::out_of_range(
                "array.rows/cols",
                format!("{}x{}", self.rows, self.cols),
                ">= 1 each",
            ));
        }
        if !(self.spacing_wl > 0.0) {
            return Err(Error::out_of_range("array.spacing", self.spacing_wl, "> 0"));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.rows * self.cols
    }

    /// The same element grid widened to `factor` times as many columns.
    pub fn widened(&self, factor: usize) -> Self {
        Self {
            cols: self.cols * factor,
            ..*self
        }
    }
}

/// Orthonormal satellite body axes: z on the boresight, x along the velocity
/// component orthogonal to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

impl LocalFrame {
    pub fn new(boresight: &Vector3<f64>, velocity: &Vector3<f64>) -> Self {
        let z = boresight.normalize();
        let mut x = velocity - z * z.dot(velocity);
        if x.norm() <= 1e-12 * velocity.norm().max(1.0) {
            // velocity along the boresight: any perpendicular axis will do
            let helper = if z.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            x = helper - z * z.dot(&helper);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        Self { x, y, z }
    }

    pub fn to_local(&self, world_dir: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            self.x.dot(world_dir),
            self.y.dot(world_dir),
            self.z.dot(world_dir),
        )
    }
}

/// Array response for a unit `direction` given in the satellite-local frame.
pub fn steering_vector(geom: &ArrayGeometry, direction: &Vector3<f64>) -> DVector<Complex64> {
    let (u, v) = (direction.x, direction.y);
    DVector::from_fn(geom.element_count(), |idx, _| {
        let (n, m) = (idx / geom.cols, idx % geom.cols);
        let phase = TAU * geom.spacing_wl * (m as f64 * u + n as f64 * v);
        Complex64::from_polar(1.0, phase)
    })
}
