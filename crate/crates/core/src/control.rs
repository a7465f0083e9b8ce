//! Beam-center decisions, serving-set selection, two-timescale scheduling,
//! baseline policies, and service-continuity accounting.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::antenna::BeamPattern;
use crate::channel::{large_scale_gain, LinkParams};
use crate::constellation::{SatelliteId, SatelliteState};
use crate::error::{Error, Result};
use crate::geokit::{
    cartesian_to_geodetic, elevation_deg, geodetic_to_cartesian, slant_range_km, CartesianVec,
    Frame, GeodeticPos,
};
use crate::mimo::RateMetric;

/// How satellite beams are pointed over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeamVariant {
    /// Beam center refreshed every `N` slots.
    TwoTimescale(usize),
    SlotLevel,
    /// Beam center taken at slot 0 and never refreshed.
    FixedInitial,
    /// Beams stay on nadir.
    EarthCenter,
}

/// Who receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    /// `M` cooperating satellites nearest to the beam center.
    DistSat(usize),
    SingleSat,
    /// One satellite carrying `M·Ns` antennas, picked by large-scale gain.
    CoLocatedSat(usize),
}

/// Who transmits within each fleet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transmitter {
    /// All `K` LAVs of the fleet.
    DistLav,
    /// The leader only.
    SingleLav,
    /// The leader carrying `K` antennas.
    CoLocatedLav,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Policy {
    pub beam: BeamVariant,
    pub receiver: Receiver,
    pub transmitter: Transmitter,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            beam: BeamVariant::TwoTimescale(200),
            receiver: Receiver::DistSat(3),
            transmitter: Transmitter::DistLav,
        }
    }
}

impl Policy {
    pub fn validate(&self) -> Result<()> {
        if let BeamVariant::TwoTimescale(0) = self.beam {
            return Err(Error::out_of_range("policy.frame_slots", 0, ">= 1"));
        }
        match self.receiver {
            Receiver::DistSat(0) | Receiver::CoLocatedSat(0) => {
                Err(Error::out_of_range("policy.m", 0, ">= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn with_beam(self, beam: BeamVariant) -> Self {
        Self { beam, ..self }
    }

    pub fn with_receiver(self, receiver: Receiver) -> Self {
        Self { receiver, ..self }
    }

    pub fn with_transmitter(self, transmitter: Transmitter) -> Self {
        Self {
            transmitter,
            ..self
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.receiver, self.beam, self.transmitter)
    }
}

impl fmt::Display for BeamVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeamVariant::TwoTimescale(n) => write!(f, "two-timescale-{n}"),
            BeamVariant::SlotLevel => f.write_str("slot-level"),
            BeamVariant::FixedInitial => f.write_str("fixed-initial"),
            BeamVariant::EarthCenter => f.write_str("earth-center"),
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Receiver::DistSat(m) => write!(f, "dist-sat-{m}"),
            Receiver::SingleSat => f.write_str("single-sat"),
            Receiver::CoLocatedSat(m) => write!(f, "colocated-sat-{m}"),
        }
    }
}

impl fmt::Display for Transmitter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transmitter::DistLav => "dist-lav",
            Transmitter::SingleLav => "single-lav",
            Transmitter::CoLocatedLav => "colocated-lav",
        })
    }
}

impl FromStr for Transmitter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dist-lav" => Ok(Transmitter::DistLav),
            "single-lav" => Ok(Transmitter::SingleLav),
            "colocated-lav" => Ok(Transmitter::CoLocatedLav),
            other => Err(Error::out_of_range(
                "policy.transmitter",
                other,
                "dist-lav | single-lav | colocated-lav",
            )),
        }
    }
}

impl BeamVariant {
    /// Slot whose LAV positions set the beam center in force at `slot`.
    pub fn frame_start(&self, slot: usize) -> Option<usize> {
        match *self {
            BeamVariant::TwoTimescale(n) => Some(slot / n.max(1) * n.max(1)),
            BeamVariant::SlotLevel => Some(slot),
            BeamVariant::FixedInitial => Some(0),
            BeamVariant::EarthCenter => None,
        }
    }

    /// Position reports collected over slots `0..=slot`.
    pub fn reports_through(&self, slot: usize) -> usize {
        match *self {
            BeamVariant::TwoTimescale(n) => slot / n.max(1) + 1,
            BeamVariant::SlotLevel => slot + 1,
            BeamVariant::FixedInitial => 1,
            BeamVariant::EarthCenter => 0,
        }
    }

    /// Position reports over a horizon of `slots` slots.
    pub fn position_report_count(&self, slots: usize) -> usize {
        if slots == 0 {
            0
        } else {
            self.reports_through(slots - 1)
        }
    }
}

/// Frame-level decision in force at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSchedule {
    pub frame_start: Option<usize>,
    /// `None` when beams stay on nadir.
    pub beam_center: Option<GeodeticPos>,
    pub position_report_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ServingSet {
    pub slot: usize,
    pub sats: Vec<SatelliteId>,
}

/// Mean of latitude, longitude and altitude. Falls back to the normalized
/// Cartesian mean when longitudes straddle the antimeridian.
pub fn beam_center(positions: &[GeodeticPos]) -> Result<GeodeticPos> {
    if positions.is_empty() {
        return Err(Error::Empty("LAV positions"));
    }
    let n = positions.len() as f64;
    let (lo, hi) = positions
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.lon_deg), hi.max(p.lon_deg))
        });
    let alt = positions.iter().map(|p| p.alt_km).sum::<f64>() / n;
    if hi - lo > 180.0 {
        let sum: Vector3<f64> = positions
            .iter()
            .map(|p| geodetic_to_cartesian(p).v.normalize())
            .sum();
        let dir = CartesianVec::from_vector(Frame::EarthFixed, sum);
        let g = cartesian_to_geodetic(&dir)?;
        return GeodeticPos::new(g.lat_deg, g.lon_deg, alt);
    }
    GeodeticPos::new(
        positions.iter().map(|p| p.lat_deg).sum::<f64>() / n,
        positions.iter().map(|p| p.lon_deg).sum::<f64>() / n,
        alt,
    )
}

pub fn point_beams(sats: &mut [SatelliteState], center: &CartesianVec) {
    for s in sats {
        let d = center.v - s.position.v;
        if d.norm() > 0.0 {
            s.boresight = d.normalize();
        }
    }
}

pub fn point_nadir(sats: &mut [SatelliteState]) {
    for s in sats {
        s.boresight = s.nadir();
    }
}

/// Satellites usable by the fleets: at or above `min_elev_deg` from every
/// fleet centroid when `joint`, from at least one otherwise.
pub fn eligible_sats<'a>(
    states: &'a [SatelliteState],
    centroids: &[CartesianVec],
    min_elev_deg: f64,
    joint: bool,
) -> Result<Vec<&'a SatelliteState>> {
    let mut out = Vec::new();
    for s in states {
        let mut seen = 0;
        for c in centroids {
            if elevation_deg(c, &s.position)? >= min_elev_deg {
                seen += 1;
            }
        }
        let ok = if joint {
            seen == centroids.len()
        } else {
            seen > 0
        };
        if ok {
            out.push(s);
        }
    }
    Ok(out)
}

/// The `m` eligible satellites nearest to `center`, nearest first, ties by id.
pub fn select_serving_set(
    slot: usize,
    states: &[SatelliteState],
    center: &CartesianVec,
    m: usize,
    min_elev_deg: f64,
    centroids: &[CartesianVec],
    joint: bool,
) -> Result<ServingSet> {
    let eligible = eligible_sats(states, centroids, min_elev_deg, joint)?;
    if eligible.len() < m {
        return Err(Error::InsufficientVisibility {
            available: eligible.len(),
            required: m,
        });
    }
    let mut ranked = eligible
        .into_iter()
        .map(|s| Ok((slant_range_km(center, &s.position)?, s.id)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(ServingSet {
        slot,
        sats: ranked.into_iter().take(m).map(|(_, id)| id).collect(),
    })
}

/// Eligible satellite with the largest summed large-scale gain over `lavs`,
/// evaluated with each candidate's current boresight. Ties go to the lower id.
pub fn best_channel_satellite(
    candidates: &[SatelliteState],
    lavs: &[CartesianVec],
    params: &LinkParams,
    pattern: &BeamPattern,
) -> Result<SatelliteId> {
    let mut best: Option<(f64, SatelliteId)> = None;
    for s in candidates {
        let mut total = 0.0;
        for l in lavs {
            total += large_scale_gain(s, l, params, pattern)?;
        }
        best = match best {
            Some((g, id)) if g > total || (g == total && id < s.id) => Some((g, id)),
            _ => Some((total, s.id)),
        };
    }
    best.map(|(_, id)| id).ok_or(Error::InsufficientVisibility {
        available: 0,
        required: 1,
    })
}

/// Beam decision for `slot`; `centroid_at` gives the all-LAV beam center at a slot.
pub fn schedule<F>(policy: &Policy, slot: usize, centroid_at: F) -> Result<FrameSchedule>
where
    F: FnOnce(usize) -> Result<GeodeticPos>,
{
    let frame_start = policy.beam.frame_start(slot);
    let beam_center = match frame_start {
        Some(s) => Some(centroid_at(s)?),
        None => None,
    };
    Ok(FrameSchedule {
        frame_start,
        beam_center,
        position_report_count: policy.beam.reports_through(slot),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceMetrics {
    /// Consecutive slots from slot 0 served by the initial entity.
    pub service_duration: usize,
    pub handover_count: usize,
    /// Slots where even a fresh selection missed the target.
    pub outage_slots: usize,
    /// Nothing met the target at slot 0; duration and handovers are not available.
    pub na_flag: bool,
}

impl ServiceMetrics {
    pub fn not_available() -> Self {
        Self {
            service_duration: 0,
            handover_count: 0,
            outage_slots: 0,
            na_flag: true,
        }
    }
}

/// What `service_run` needs from the world: a selection rule and per-fleet
/// rates of a given serving entity at a slot.
pub trait ServiceWorld {
    type Entity: Clone + PartialEq;

    fn select(&mut self, slot: usize) -> Result<Option<Self::Entity>>;

    fn rates(&mut self, slot: usize, entity: &Self::Entity) -> Result<Vec<f64>>;
}

fn meets(rates: &[f64], target: f64, metric: RateMetric) -> bool {
    match metric {
        RateMetric::PerFleet => rates.iter().all(|&r| r >= target),
        RateMetric::Sum => rates.iter().sum::<f64>() >= target,
    }
}

/// Serves one frame of `frame_slots` slots, reselecting whenever the current
/// entity misses `target`.
pub fn service_run<W: ServiceWorld>(
    world: &mut W,
    target: f64,
    metric: RateMetric,
    frame_slots: usize,
) -> Result<ServiceMetrics> {
    if frame_slots == 0 {
        return Err(Error::out_of_range("frame_slots", 0, ">= 1"));
    }
    let Some(mut current) = world.select(0)? else {
        return Ok(ServiceMetrics::not_available());
    };
    if !meets(&world.rates(0, &current)?, target, metric) {
        return Ok(ServiceMetrics::not_available());
    }
    let mut m = ServiceMetrics {
        service_duration: 1,
        handover_count: 0,
        outage_slots: 0,
        na_flag: false,
    };
    let mut initial = true;
    for slot in 1..frame_slots {
        if meets(&world.rates(slot, &current)?, target, metric) {
            if initial {
                m.service_duration += 1;
            }
            continue;
        }
        initial = false;
        match world.select(slot)? {
            Some(next) if next != current => {
                m.handover_count += 1;
                current = next;
                if !meets(&world.rates(slot, &current)?, target, metric) {
                    m.outage_slots += 1;
                }
            }
            _ => m.outage_slots += 1,
        }
    }
    Ok(m)
}
