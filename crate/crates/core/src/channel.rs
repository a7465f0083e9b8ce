//! Link budget, Rician fading and per-slot stacked channel assembly.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::antenna::{
    element_gain_db, off_boresight_deg, steering_vector, ArrayGeometry, BeamPattern, LocalFrame,
};
use crate::constellation::{SatelliteId, SatelliteState};
use crate::error::{Error, Result};
use crate::geokit::{elevation_deg, CartesianVec};

/// Speed of light, km/s.
pub const SPEED_OF_LIGHT_KMS: f64 = 299_792.458;

const KAPPA_MIN: f64 = 1e-12;
const KAPPA_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub carrier_freq_ghz: f64,
    /// Receiver noise power per antenna, W.
    pub noise_power_w: f64,
    pub rician_k_db: f64,
    /// LAV antenna gain, dBi.
    pub tx_gain_dbi: f64,
    /// Apply the propagation phase exp(-j2πd/λ) to the line-of-sight term.
    pub carrier_phase: bool,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            carrier_freq_ghz: 20.0,
            noise_power_w: 4.0e-14,
            rician_k_db: 10.0,
            tx_gain_dbi: 0.0,
            carrier_phase: true,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_ghz > 0.0) || !self.carrier_freq_ghz.is_finite() {
            return Err(Error::out_of_range(
                "link.freq_ghz",
                self.carrier_freq_ghz,
                "> 0",
            ));
        }
        if !(self.noise_power_w > 0.0) || !self.noise_power_w.is_finite() {
            return Err(Error::out_of_range(
                "link.noise_w",
                self.noise_power_w,
                "> 0",
            ));
        }
        if self.rician_k_db.is_nan() {
            return Err(Error::out_of_range(
                "link.rician_db",
                self.rician_k_db,
                "not NaN",
            ));
        }
        if !self.tx_gain_dbi.is_finite() {
            return Err(Error::out_of_range(
                "link.tx_gain_dbi",
                self.tx_gain_dbi,
                "finite",
            ));
        }
        Ok(())
    }

    pub fn wavelength_km(&self) -> f64 {
        SPEED_OF_LIGHT_KMS / (self.carrier_freq_ghz * 1e9)
    }
}

pub fn fspl_db(distance_km: f64, freq_ghz: f64) -> Result<f64> {
    if !(distance_km > 0.0) {
        return Err(Error::out_of_range("distance_km", distance_km, "> 0"));
    }
    if !(freq_ghz > 0.0) {
        return Err(Error::out_of_range("freq_ghz", freq_ghz, "> 0"));
    }
    Ok(20.0 * (4.0 * PI * distance_km * freq_ghz * 1e9 / SPEED_OF_LIGHT_KMS).log10())
}

/// Labelled random streams derived from one master seed.
///
/// The stream for a label tuple depends on nothing else, so slots, fleets and
/// satellites can be generated in any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub master_seed: u64,
}

pub(crate) mod label {
    pub const FADING: u64 = 0x4641_4449_4e47;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn rng(&self, labels: &[u64]) -> ChaCha8Rng {
        let mut h = splitmix(self.master_seed);
        for &l in labels {
            h = splitmix(h ^ splitmix(l));
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    pub fn fading_rng(&self, slot: u64, sat: SatelliteId, fleet: usize, lav: usize) -> ChaCha8Rng {
        self.rng(&[
            label::FADING,
            slot,
            sat.plane as u64,
            sat.slot as u64,
            fleet as u64,
            lav as u64,
        ])
    }
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `sqrt(κ/(κ+1))·los + sqrt(1/(κ+1))·w`, with κ clamped to [1e-12, 1e12].
pub fn rician_fading<R: Rng + ?Sized>(
    rng: &mut R,
    k_db: f64,
    los: &DVector<Complex64>,
) -> DVector<Complex64> {
    let kappa = 10f64.powf(k_db / 10.0).clamp(KAPPA_MIN, KAPPA_MAX);
    let a = (kappa / (kappa + 1.0)).sqrt();
    let b = (1.0 / (kappa + 1.0)).sqrt();
    los.map(|l| l * a + complex_gaussian(rng) * b)
}

/// Deterministic large-scale power gain (linear) from one LAV to one satellite,
/// using the satellite's current boresight. LAVs below the satellite's horizon
/// see the pattern floor.
pub fn large_scale_gain(
    sat: &SatelliteState,
    lav: &CartesianVec,
    params: &LinkParams,
    pattern: &BeamPattern,
) -> Result<f64> {
    let d = lav.checked_sub(&sat.position)?.norm();
    let rx_gain = if elevation_deg(lav, &sat.position)? < 0.0 {
        pattern.floor_dbi()
    } else {
        element_gain_db(
            off_boresight_deg(&sat.position, &sat.boresight, lav)?,
            pattern,
        )
    };
    let db = params.tx_gain_dbi + rx_gain - fspl_db(d, params.carrier_freq_ghz)?;
    Ok(10f64.powf(db / 10.0))
}

/// Line-of-sight array response of `sat` toward `lav`, unit-modulus entries.
pub fn los_response(
    sat: &SatelliteState,
    lav: &CartesianVec,
    params: &LinkParams,
    geometry: &ArrayGeometry,
) -> Result<DVector<Complex64>> {
    let ray = lav.checked_sub(&sat.position)?;
    let d = ray.norm();
    if d == 0.0 {
        return Err(Error::CoincidentPoints("LAV coincides with satellite"));
    }
    let frame = LocalFrame::new(&sat.boresight, &sat.velocity.v);
    let a = steering_vector(geometry, &frame.to_local(&(ray / d)));
    if params.carrier_phase {
        let cycles = (d / params.wavelength_km()).fract();
        Ok(a * Complex64::from_polar(1.0, -TAU * cycles))
    } else {
        Ok(a)
    }
}

/// Per-satellite slice of a fleet channel: rows = antennas, cols = LAVs.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBlock {
    pub sat: SatelliteId,
    pub fleet: usize,
    pub coefficients: DMatrix<Complex64>,
}

/// Joint channel of one fleet: the serving satellites' blocks stacked in
/// serving-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedChannel {
    pub fleet: usize,
    pub sats: Vec<SatelliteId>,
    pub h: DMatrix<Complex64>,
}

impl StackedChannel {
    pub fn from_blocks(fleet: usize, blocks: &[ChannelBlock]) -> Result<Self> {
        let first = blocks.first().ok_or(Error::Empty("serving set"))?;
        let cols = first.coefficients.ncols();
        let rows: usize = blocks.iter().map(|b| b.coefficients.nrows()).sum();
        let mut h = DMatrix::zeros(rows, cols);
        let mut r = 0;
        for b in blocks {
            if b.coefficients.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "block for satellite {} has {} columns, expected {cols}",
                    b.sat,
                    b.coefficients.ncols()
                )));
            }
            h.view_mut((r, 0), b.coefficients.shape())
                .copy_from(&b.coefficients);
            r += b.coefficients.nrows();
        }
        Ok(Self {
            fleet,
            sats: blocks.iter().map(|b| b.sat).collect(),
            h,
        })
    }
}

/// Everything besides geometry that a channel draw depends on.
#[derive(Debug, Clone, Copy)]
pub struct ChannelContext<'a> {
    pub params: &'a LinkParams,
    pub pattern: &'a BeamPattern,
    pub geometry: &'a ArrayGeometry,
    pub rng: RngStream,
    pub slot: u64,
}

pub fn channel_block(
    fleet: usize,
    sat: &SatelliteState,
    lavs: &[CartesianVec],
    ctx: &ChannelContext<'_>,
) -> Result<ChannelBlock> {
    let ns = ctx.geometry.element_count();
    let mut coefficients = DMatrix::zeros(ns, lavs.len());
    for (u, lav) in lavs.iter().enumerate() {
        let g = large_scale_gain(sat, lav, ctx.params, ctx.pattern)?;
        let los = los_response(sat, lav, ctx.params, ctx.geometry)?;
        let mut rng = ctx.rng.fading_rng(ctx.slot, sat.id, fleet, u);
        let col = rician_fading(&mut rng, ctx.params.rician_k_db, &los) * Complex64::from(g.sqrt());
        coefficients.set_column(u, &col);
    }
    Ok(ChannelBlock {
        sat: sat.id,
        fleet,
        coefficients,
    })
}

pub fn assemble_channel(
    fleet: usize,
    serving: &[SatelliteState],
    lavs: &[CartesianVec],
    ctx: &ChannelContext<'_>,
) -> Result<StackedChannel> {
    if serving.is_empty() {
        return Err(Error::Empty("serving set"));
    }
    if lavs.is_empty() {
        return Err(Error::Empty("transmitters"));
    }
    let blocks = serving
        .iter()
        .map(|s| channel_block(fleet, s, lavs, ctx))
        .collect::<Result<Vec<_>>>()?;
    StackedChannel::from_blocks(fleet, &blocks)
}
