//! Scenario orchestration: world snapshots per slot, policy application,
//! metric collection, and the four experiments.
//!
//! Every slot is a pure function of `(ScenarioConfig, slot)`: satellite
//! positions come from analytic propagation, LAV positions from the fleet
//! tracks, the beam center from the LAV positions at the frame start, and the
//! fading from label-derived random streams. Slots therefore evaluate in
//! parallel and the output does not depend on the worker count. Only the
//! handover fold is sequential.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::antenna::{ArrayGeometry, BeamPattern};
use crate::channel::{assemble_channel, ChannelContext, LinkParams, RngStream, StackedChannel};
use crate::constellation::{
    build_shell, propagate_all, OrbitalElements, SatelliteId, SatelliteState, ShellConfig,
};
use crate::control::{
    beam_center, best_channel_satellite, eligible_sats, point_beams, point_nadir, schedule,
    select_serving_set, service_run, BeamVariant, FrameSchedule, Policy, Receiver, ServiceMetrics,
    ServiceWorld, Transmitter,
};
use crate::error::{Error, Result};
use crate::geokit::{
    elevation_deg, geodetic_to_cartesian, lav_positions, CartesianVec, FleetTrack, GeodeticPos,
    Instant,
};
use crate::mimo::{
    min_power_for_rate, rates_from_effective, slot_rates, unit_effective, PowerBracket,
    PowerSearchProblem, RateMetric, RatePoint,
};

/// Minimum-power search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub bracket: PowerBracket,
    pub tol_db: f64,
    /// Every `stride`-th slot of the horizon enters the frozen search slice.
    pub stride: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            bracket: PowerBracket::default(),
            tol_db: 0.01,
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub shell: ShellConfig,
    pub fleets: Vec<FleetTrack>,
    pub array: ArrayGeometry,
    pub pattern: BeamPattern,
    pub link: LinkParams,
    pub policy: Policy,
    pub horizon_slots: usize,
    pub slot_duration_s: f64,
    pub min_elev_deg: f64,
    pub master_seed: u64,
    /// Per-fleet transmit power budget, W.
    pub power_w: f64,
    /// Serving satellites must clear `min_elev_deg` from every fleet centroid.
    pub joint_visibility: bool,
    pub rate_metric: RateMetric,
    pub search: SearchConfig,
    pub service_frame_slots: usize,
    pub service_start_slot: usize,
}

/// The two fleets of the London-area case study.
pub fn default_fleets() -> Vec<FleetTrack> {
    let gp = |lat, lon| GeodeticPos {
        lat_deg: lat,
        lon_deg: lon,
        alt_km: 1.0,
    };
    vec![
        FleetTrack {
            start: gp(51.48, -0.076),
            end: gp(50.48, -1.076),
            speed_kms: 0.03,
            lav_count: 4,
            formation_radius_km: 0.1,
        },
        FleetTrack {
            start: gp(51.48, -1.076),
            end: gp(50.48, -0.076),
            speed_kms: 0.03,
            lav_count: 4,
            formation_radius_km: 0.1,
        },
    ]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            shell: ShellConfig::default(),
            fleets: default_fleets(),
            array: ArrayGeometry::default(),
            pattern: BeamPattern::default(),
            link: LinkParams::default(),
            policy: Policy::default(),
            horizon_slots: 1800,
            slot_duration_s: 2.0,
            min_elev_deg: 30.0,
            master_seed: 1,
            power_w: 20.0,
            joint_visibility: true,
            rate_metric: RateMetric::PerFleet,
            search: SearchConfig::default(),
            service_frame_slots: 300,
            service_start_slot: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.shell.validate()?;
        if self.fleets.is_empty() {
            return Err(Error::Empty("fleets"));
        }
        for (i, f) in self.fleets.iter().enumerate() {
            f.validate().map_err(|e| match e {
                Error::OutOfRange {
                    name,
                    value,
                    allowed,
                } => Error::OutOfRange {
                    name: format!("fleet.{}.{name}", i + 1),
                    value,
                    allowed,
                },
                e => e,
            })?;
        }
        self.array.validate()?;
        self.pattern.validate()?;
        self.link.validate()?;
        self.policy.validate()?;
        if self.horizon_slots == 0 {
            return Err(Error::out_of_range("sim.slots", 0, ">= 1"));
        }
        if !(self.slot_duration_s > 0.0) || !self.slot_duration_s.is_finite() {
            return Err(Error::out_of_range(
                "sim.slot_s",
                self.slot_duration_s,
                "> 0",
            ));
        }
        if !(-90.0..=90.0).contains(&self.min_elev_deg) {
            return Err(Error::out_of_range(
                "sim.min_elev_deg",
                self.min_elev_deg,
                "[-90, 90]",
            ));
        }
        if !(self.power_w >= 0.0) || !self.power_w.is_finite() {
            return Err(Error::out_of_range("sim.power_w", self.power_w, ">= 0"));
        }
        let b = self.search.bracket;
        if !(b.min_w > 0.0) || !(b.max_w > b.min_w) || !b.max_w.is_finite() {
            return Err(Error::out_of_range(
                "search.min_w/max_w",
                format!("{}/{}", b.min_w, b.max_w),
                "0 < min < max",
            ));
        }
        if !(self.search.tol_db > 0.0) {
            return Err(Error::out_of_range(
                "search.tol_db",
                self.search.tol_db,
                "> 0",
            ));
        }
        if self.search.stride == 0 {
            return Err(Error::out_of_range("search.stride", 0, ">= 1"));
        }
        if self.service_frame_slots == 0 {
            return Err(Error::out_of_range("service.frame_slots", 0, ">= 1"));
        }
        Ok(())
    }

    /// Short hash of the normalized scenario text (includes the seed).
    pub fn fingerprint(&self) -> String {
        let text = crate::cli::scenario::to_text(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            master_seed: seed,
            ..self.clone()
        }
    }

    pub fn with_policy(&self, policy: Policy) -> Self {
        Self {
            policy,
            ..self.clone()
        }
    }
}

/// Everything known about the world at one slot, before any policy acts.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub slot: usize,
    pub states: Vec<SatelliteState>,
    /// Per fleet, leader first.
    pub lavs: Vec<Vec<GeodeticPos>>,
    pub lavs_cart: Vec<Vec<CartesianVec>>,
    /// Fleet centroids (leader positions).
    pub centroids: Vec<CartesianVec>,
}

impl Snapshot {
    pub fn state(&self, id: SatelliteId) -> Option<&SatelliteState> {
        self.states.iter().find(|s| s.id == id)
    }

    /// Satellite ids jointly visible from every fleet centroid.
    pub fn jointly_visible(&self, min_elev_deg: f64) -> Result<Vec<SatelliteId>> {
        Ok(
            eligible_sats(&self.states, &self.centroids, min_elev_deg, true)?
                .into_iter()
                .map(|s| s.id)
                .collect(),
        )
    }
}

/// What one policy does at one slot: pointed receivers and per-fleet channels.
#[derive(Debug, Clone)]
pub struct SlotChannels {
    pub schedule: FrameSchedule,
    pub serving: Vec<SatelliteId>,
    pub channels: Vec<StackedChannel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics {
    pub slot: usize,
    pub serving: Vec<SatelliteId>,
    pub sinr: Vec<f64>,
    pub rate: Vec<f64>,
    pub sum_rate: f64,
    pub beam_center: Option<GeodeticPos>,
    pub position_reports: usize,
    pub handover: bool,
}

pub struct World {
    pub config: ScenarioConfig,
    elements: Vec<OrbitalElements>,
}

impl World {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let elements = build_shell(&config.shell);
        Ok(Self { config, elements })
    }

    fn instant(&self, slot: usize) -> Result<Instant> {
        Instant::from_slot(slot, self.config.slot_duration_s)
    }

    /// LAV positions of every fleet at `slot`.
    pub fn fleet_positions(&self, slot: usize) -> Result<Vec<Vec<GeodeticPos>>> {
        let t = self.instant(slot)?;
        Ok(self
            .config
            .fleets
            .iter()
            .map(|f| lav_positions(f, t))
            .collect())
    }

    /// Beam center of all LAVs of all fleets at `slot`.
    pub fn beam_center_at(&self, slot: usize) -> Result<GeodeticPos> {
        let all: Vec<GeodeticPos> = self.fleet_positions(slot)?.into_iter().flatten().collect();
        beam_center(&all)
    }

    pub fn snapshot(&self, slot: usize) -> Result<Snapshot> {
        let t = self.instant(slot)?;
        let states = propagate_all(&self.elements, t);
        let lavs = self.fleet_positions(slot)?;
        let lavs_cart: Vec<Vec<CartesianVec>> = lavs
            .iter()
            .map(|f| f.iter().map(geodetic_to_cartesian).collect())
            .collect();
        let centroids = lavs_cart.iter().map(|f| f[0]).collect();
        Ok(Snapshot {
            slot,
            states,
            lavs,
            lavs_cart,
            centroids,
        })
    }

    /// Transmit antenna positions of fleet `fleet` under `tx`.
    fn transmitters(&self, snap: &Snapshot, fleet: usize, tx: Transmitter) -> Vec<CartesianVec> {
        let lavs = &snap.lavs_cart[fleet];
        match tx {
            Transmitter::DistLav => lavs.clone(),
            Transmitter::SingleLav => vec![lavs[0]],
            Transmitter::CoLocatedLav => vec![lavs[0]; lavs.len()],
        }
    }

    fn aim(sats: &mut [SatelliteState], sched: &FrameSchedule) {
        match &sched.beam_center {
            Some(c) => point_beams(sats, &geodetic_to_cartesian(c)),
            None => point_nadir(sats),
        }
    }

    /// Reference point for "nearest to the center": the scheduled beam center,
    /// or the current all-LAV centroid when beams stay on nadir.
    fn selection_center(&self, snap: &Snapshot, sched: &FrameSchedule) -> Result<CartesianVec> {
        let c = match &sched.beam_center {
            Some(c) => *c,
            None => beam_center(&snap.lavs.iter().flatten().copied().collect::<Vec<_>>())?,
        };
        Ok(geodetic_to_cartesian(&c))
    }

    pub fn schedule_at(&self, policy: &Policy, slot: usize) -> Result<FrameSchedule> {
        schedule(policy, slot, |s| self.beam_center_at(s))
    }

    /// Serving entity the policy's receiver picks at this snapshot.
    pub fn select_receivers(
        &self,
        snap: &Snapshot,
        policy: &Policy,
        sched: &FrameSchedule,
    ) -> Result<Vec<SatelliteId>> {
        let cfg = &self.config;
        let center = self.selection_center(snap, sched)?;
        let nearest = |m| {
            select_serving_set(
                snap.slot,
                &snap.states,
                &center,
                m,
                cfg.min_elev_deg,
                &snap.centroids,
                cfg.joint_visibility,
            )
            .map(|s| s.sats)
        };
        match policy.receiver {
            Receiver::DistSat(m) => nearest(m),
            Receiver::SingleSat => nearest(1),
            Receiver::CoLocatedSat(_) => {
                let mut candidates: Vec<SatelliteState> = eligible_sats(
                    &snap.states,
                    &snap.centroids,
                    cfg.min_elev_deg,
                    cfg.joint_visibility,
                )?
                .into_iter()
                .copied()
                .collect();
                Self::aim(&mut candidates, sched);
                let lavs: Vec<CartesianVec> = (0..cfg.fleets.len())
                    .flat_map(|f| self.transmitters(snap, f, policy.transmitter))
                    .collect();
                Ok(vec![best_channel_satellite(
                    &candidates,
                    &lavs,
                    &cfg.link,
                    &cfg.pattern,
                )?])
            }
        }
    }

    fn receiver_geometry(&self, receiver: Receiver) -> ArrayGeometry {
        match receiver {
            Receiver::CoLocatedSat(m) => self.config.array.widened(m),
            _ => self.config.array,
        }
    }

    /// Pointed states and per-fleet channels for a given serving entity.
    pub fn channels_for(
        &self,
        snap: &Snapshot,
        policy: &Policy,
        sched: &FrameSchedule,
        serving: &[SatelliteId],
    ) -> Result<Vec<StackedChannel>> {
        let cfg = &self.config;
        let mut sats: Vec<SatelliteState> = serving
            .iter()
            .map(|id| {
                snap.state(*id)
                    .copied()
                    .ok_or(Error::Empty("serving satellite missing from snapshot"))
            })
            .collect::<Result<_>>()?;
        Self::aim(&mut sats, sched);
        let geometry = self.receiver_geometry(policy.receiver);
        let ctx = ChannelContext {
            params: &cfg.link,
            pattern: &cfg.pattern,
            geometry: &geometry,
            rng: RngStream::new(cfg.master_seed),
            slot: snap.slot as u64,
        };
        (0..cfg.fleets.len())
            .map(|f| {
                let tx = self.transmitters(snap, f, policy.transmitter);
                assemble_channel(f, &sats, &tx, &ctx)
            })
            .collect()
    }

    pub fn slot_channels(&self, policy: &Policy, slot: usize) -> Result<SlotChannels> {
        let inner = || -> Result<SlotChannels> {
            let snap = self.snapshot(slot)?;
            let schedule = self.schedule_at(policy, slot)?;
            let serving = self.select_receivers(&snap, policy, &schedule)?;
            let channels = self.channels_for(&snap, policy, &schedule, &serving)?;
            Ok(SlotChannels {
                schedule,
                serving,
                channels,
            })
        };
        inner().map_err(|e| e.at_slot(slot))
    }

    fn rates(&self, channels: &[StackedChannel], power_w: f64) -> Result<RatePoint> {
        if power_w == 0.0 {
            return Ok(RatePoint::zero(channels.len()));
        }
        slot_rates(
            channels,
            &vec![power_w; channels.len()],
            self.config.link.noise_power_w,
        )
    }

    pub fn slot_metrics(&self, policy: &Policy, slot: usize) -> Result<SlotMetrics> {
        let sc = self.slot_channels(policy, slot)?;
        let rp = self
            .rates(&sc.channels, self.config.power_w)
            .map_err(|e| e.at_slot(slot))?;
        Ok(SlotMetrics {
            slot,
            serving: sc.serving,
            sinr: rp.sinr,
            rate: rp.rate,
            sum_rate: rp.sum_rate,
            beam_center: sc.schedule.beam_center,
            position_reports: sc.schedule.position_report_count,
            handover: false,
        })
    }

    pub fn run_policy(&self, policy: &Policy) -> Result<Vec<SlotMetrics>> {
        let mut rows = (0..self.config.horizon_slots)
            .into_par_iter()
            .map(|slot| self.slot_metrics(policy, slot))
            .collect::<Result<Vec<_>>>()?;
        for i in 1..rows.len() {
            rows[i].handover = !same_members(&rows[i].serving, &rows[i - 1].serving);
        }
        Ok(rows)
    }
}

pub fn run(config: &ScenarioConfig) -> Result<Vec<SlotMetrics>> {
    let world = World::new(config.clone())?;
    world.run_policy(&config.policy)
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Na,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Run,
    PowerSweep,
    MinPower,
    Service,
    TimescaleCompare,
    TimescaleTrace,
}

impl ExperimentKind {
    /// Column order of the emitted tables; the fingerprint column is appended.
    pub fn columns(&self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Run => &[
                "slot",
                "serving",
                "sinr_1",
                "sinr_2",
                "rate_1_bps_hz",
                "rate_2_bps_hz",
                "sum_rate_bps_hz",
                "beam_lat_deg",
                "beam_lon_deg",
                "position_reports",
                "handover",
            ],
            ExperimentKind::PowerSweep => &["policy", "power_w", "avg_sum_rate_bps_hz"],
            ExperimentKind::MinPower => {
                &["transmitter", "target_bps_hz", "min_power_w", "reachable"]
            }
            ExperimentKind::Service => &[
                "receiver",
                "target_bps_hz",
                "service_duration_slots",
                "handovers",
                "outage_slots",
                "na_flag",
            ],
            ExperimentKind::TimescaleCompare => &[
                "scheme",
                "frame_slots",
                "avg_sum_rate_bps_hz",
                "position_reports",
            ],
            ExperimentKind::TimescaleTrace => &["scheme", "slot", "sum_rate_bps_hz"],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub rows: Vec<Vec<Cell>>,
    pub fingerprint: String,
}

impl ExperimentResult {
    pub fn columns(&self) -> &'static [&'static str] {
        self.kind.columns()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns().iter().position(|c| *c == name)
    }

    /// Rows whose text cell in `col` equals `value`.
    pub fn rows_where<'a>(
        &'a self,
        col: &str,
        value: &'a str,
    ) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
        let idx = self.column(col);
        self.rows
            .iter()
            .filter(move |r| idx.and_then(|i| r[i].as_str()) == Some(value))
    }
}

/// Serving-set identity ignores the range ordering.
pub fn same_members(a: &[SatelliteId], b: &[SatelliteId]) -> bool {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort();
    b.sort();
    a == b
}

fn serving_label(ids: &[SatelliteId]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn run_table(config: &ScenarioConfig) -> Result<ExperimentResult> {
    let rows = run(config)?;
    let fleets = config.fleets.len();
    let table = rows
        .into_iter()
        .map(|m| {
            let get = |v: &[f64], i: usize| {
                if i < fleets {
                    Cell::Float(v[i])
                } else {
                    Cell::Na
                }
            };
            vec![
                m.slot.into(),
                serving_label(&m.serving).into(),
                get(&m.sinr, 0),
                get(&m.sinr, 1),
                get(&m.rate, 0),
                get(&m.rate, 1),
                m.sum_rate.into(),
                m.beam_center.map_or(Cell::Na, |c| c.lat_deg.into()),
                m.beam_center.map_or(Cell::Na, |c| c.lon_deg.into()),
                m.position_reports.into(),
                m.handover.into(),
            ]
        })
        .collect();
    Ok(ExperimentResult {
        kind: ExperimentKind::Run,
        rows: table,
        fingerprint: config.fingerprint(),
    })
}

/// Policies compared in the power sweep: the configured distributed receiver,
/// a single satellite, the co-located equivalent, and nadir-pointing beams.
pub fn sweep_policies(config: &ScenarioConfig) -> Vec<Policy> {
    let base = config.policy;
    let m = match base.receiver {
        Receiver::DistSat(m) | Receiver::CoLocatedSat(m) => m,
        Receiver::SingleSat => 1,
    };
    vec![
        base.with_receiver(Receiver::DistSat(m)),
        base.with_receiver(Receiver::SingleSat),
        base.with_receiver(Receiver::CoLocatedSat(m)),
        base.with_receiver(Receiver::DistSat(m))
            .with_beam(BeamVariant::EarthCenter),
    ]
}

fn unit_slots(
    world: &World,
    policy: &Policy,
    slots: &[usize],
) -> Result<Vec<Vec<DVector<Complex64>>>> {
    slots
        .par_iter()
        .map(|&slot| {
            let sc = world.slot_channels(policy, slot)?;
            unit_effective(&sc.channels).map_err(|e| e.at_slot(slot))
        })
        .collect()
}

/// Horizon-averaged sum rate of each policy at each power level, with the
/// fading shared across powers and policies.
pub fn power_sweep(
    config: &ScenarioConfig,
    powers: &[f64],
    policies: &[Policy],
) -> Result<ExperimentResult> {
    if powers.is_empty() {
        return Err(Error::Empty("powers"));
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::out_of_range("power_w", p, ">= 0"));
    }
    let world = World::new(config.clone())?;
    let slots: Vec<usize> = (0..config.horizon_slots).collect();
    let noise = config.link.noise_power_w;
    let mut rows = Vec::new();
    for policy in policies {
        let unit = unit_slots(&world, policy, &slots)?;
        for &p in powers {
            let total = unit
                .par_iter()
                .map(|g| {
                    let eff: Vec<_> = g.iter().map(|v| v * Complex64::from(p.sqrt())).collect();
                    if p == 0.0 {
                        Ok(0.0)
                    } else {
                        rates_from_effective(&eff, noise).map(|r| r.sum_rate)
                    }
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .sum::<f64>();
            rows.push(vec![
                policy.label().into(),
                p.into(),
                (total / slots.len() as f64).into(),
            ]);
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::PowerSweep,
        rows,
        fingerprint: config.fingerprint(),
    })
}

pub const TRANSMITTERS: [Transmitter; 3] = [
    Transmitter::DistLav,
    Transmitter::SingleLav,
    Transmitter::CoLocatedLav,
];

/// Frozen-fading search slice for `policy`: every `stride`-th slot.
pub fn power_problem(world: &World, policy: &Policy) -> Result<PowerSearchProblem> {
    let cfg = &world.config;
    let slots: Vec<usize> = (0..cfg.horizon_slots).step_by(cfg.search.stride).collect();
    let channels = slots
        .par_iter()
        .map(|&s| world.slot_channels(policy, s).map(|sc| sc.channels))
        .collect::<Result<Vec<_>>>()?;
    PowerSearchProblem::new(&channels, cfg.link.noise_power_w)
}

/// Minimum common per-fleet power reaching each target, per transmitter variant.
pub fn min_power_experiment(config: &ScenarioConfig, targets: &[f64]) -> Result<ExperimentResult> {
    let world = World::new(config.clone())?;
    let mut rows = Vec::new();
    if !targets.is_empty() {
        for tx in TRANSMITTERS {
            let policy = config.policy.with_transmitter(tx);
            let problem = power_problem(&world, &policy)?;
            for &target in targets {
                let res = min_power_for_rate(
                    &problem,
                    target,
                    config.rate_metric,
                    config.search.bracket,
                    config.search.tol_db,
                );
                let (power, reachable) = match res {
                    Ok(p) => (Cell::Float(p), true),
                    Err(Error::Unreachable { .. }) => (Cell::Na, false),
                    Err(e) => return Err(e),
                };
                rows.push(vec![
                    tx.to_string().into(),
                    target.into(),
                    power,
                    reachable.into(),
                ]);
            }
        }
    }
    Ok(ExperimentResult {
        kind: ExperimentKind::MinPower,
        rows,
        fingerprint: config.fingerprint(),
    })
}

/// Service-continuity world for one receiver variant. Slots are relative to
/// `start`; members that drop below the elevation mask stop contributing.
pub struct ServiceSim<'a> {
    world: &'a World,
    policy: Policy,
    start: usize,
    cache: Option<Snapshot>,
}

impl<'a> ServiceSim<'a> {
    pub fn new(world: &'a World, policy: Policy, start: usize) -> Self {
        Self {
            world,
            policy,
            start,
            cache: None,
        }
    }

    fn snap(&mut self, slot: usize) -> Result<&Snapshot> {
        let abs = self.start + slot;
        if self.cache.as_ref().map(|s| s.slot) != Some(abs) {
            self.cache = Some(self.world.snapshot(abs)?);
        }
        Ok(self.cache.as_ref().expect("just filled"))
    }
}

impl ServiceWorld for ServiceSim<'_> {
    type Entity = Vec<SatelliteId>;

    fn select(&mut self, slot: usize) -> Result<Option<Self::Entity>> {
        let abs = self.start + slot;
        let policy = self.policy;
        let sched = self.world.schedule_at(&policy, abs)?;
        let world = self.world;
        let snap = self.snap(slot)?;
        match world.select_receivers(snap, &policy, &sched) {
            // identity is membership; stacking order does not change the rates
            Ok(mut ids) => {
                ids.sort();
                Ok(Some(ids))
            }
            Err(Error::InsufficientVisibility { .. }) => Ok(None),
            Err(e) => Err(e.at_slot(abs)),
        }
    }

    fn rates(&mut self, slot: usize, entity: &Self::Entity) -> Result<Vec<f64>> {
        let abs = self.start + slot;
        let policy = self.policy;
        let world = self.world;
        let cfg = &world.config;
        let sched = world.schedule_at(&policy, abs)?;
        let fleets = cfg.fleets.len();
        let snap = self.snap(slot)?;
        let mut active = Vec::with_capacity(entity.len());
        for id in entity {
            let s = snap
                .state(*id)
                .ok_or(Error::Empty("serving satellite missing from snapshot"))?;
            let mut seen = 0;
            for c in &snap.centroids {
                if elevation_deg(c, &s.position)? >= cfg.min_elev_deg {
                    seen += 1;
                }
            }
            let ok = if cfg.joint_visibility {
                seen == fleets
            } else {
                seen > 0
            };
            if ok {
                active.push(*id);
            }
        }
        if active.is_empty() {
            return Ok(vec![0.0; fleets]);
        }
        let channels = world
            .channels_for(snap, &policy, &sched, &active)
            .map_err(|e| e.at_slot(abs))?;
        Ok(world.rates(&channels, cfg.power_w)?.rate)
    }
}

pub fn service_receivers(config: &ScenarioConfig) -> [Receiver; 3] {
    let m = match config.policy.receiver {
        Receiver::DistSat(m) | Receiver::CoLocatedSat(m) => m,
        Receiver::SingleSat => 1,
    };
    [
        Receiver::DistSat(m),
        Receiver::CoLocatedSat(m),
        Receiver::SingleSat,
    ]
}

pub fn service_metrics(world: &World, receiver: Receiver, target: f64) -> Result<ServiceMetrics> {
    let cfg = &world.config;
    let mut sim = ServiceSim::new(
        world,
        cfg.policy.with_receiver(receiver),
        cfg.service_start_slot,
    );
    service_run(&mut sim, target, cfg.rate_metric, cfg.service_frame_slots)
}

/// Service duration and handovers per receiver variant per target rate.
pub fn service_experiment(config: &ScenarioConfig, targets: &[f64]) -> Result<ExperimentResult> {
    let world = World::new(config.clone())?;
    let receivers = service_receivers(config);
    let jobs: Vec<(Receiver, f64)> = receivers
        .iter()
        .flat_map(|r| targets.iter().map(move |t| (*r, *t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|(r, t)| service_metrics(&world, *r, *t))
        .collect::<Result<Vec<_>>>()?;
    let rows = jobs
        .iter()
        .zip(results)
        .map(|((r, t), m)| {
            let na = |v: usize| if m.na_flag { Cell::Na } else { v.into() };
            vec![
                r.to_string().into(),
                (*t).into(),
                na(m.service_duration),
                na(m.handover_count),
                na(m.outage_slots),
                m.na_flag.into(),
            ]
        })
        .collect();
    Ok(ExperimentResult {
        kind: ExperimentKind::Service,
        rows,
        fingerprint: config.fingerprint(),
    })
}

/// Beam-control schemes compared against the two-timescale frames.
pub fn timescale_schemes(frame_lengths: &[usize]) -> Vec<BeamVariant> {
    let mut v = vec![
        BeamVariant::SlotLevel,
        BeamVariant::FixedInitial,
        BeamVariant::EarthCenter,
    ];
    v.extend(frame_lengths.iter().map(|&n| BeamVariant::TwoTimescale(n)));
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimescaleResult {
    pub summary: ExperimentResult,
    pub trace: ExperimentResult,
}

pub fn timescale_experiment(
    config: &ScenarioConfig,
    frame_lengths: &[usize],
) -> Result<TimescaleResult> {
    if let Some(n) = frame_lengths.iter().find(|n| **n == 0) {
        return Err(Error::out_of_range("frame length", n, ">= 1"));
    }
    let world = World::new(config.clone())?;
    let mut summary = Vec::new();
    let mut trace = Vec::new();
    for beam in timescale_schemes(frame_lengths) {
        let policy = config.policy.with_beam(beam);
        let rows = world.run_policy(&policy)?;
        let avg = rows.iter().map(|r| r.sum_rate).sum::<f64>() / rows.len() as f64;
        let frame = match beam {
            BeamVariant::TwoTimescale(n) => Cell::from(n),
            _ => Cell::Na,
        };
        summary.push(vec![
            beam.to_string().into(),
            frame,
            avg.into(),
            beam.position_report_count(config.horizon_slots).into(),
        ]);
        trace.extend(
            rows.iter()
                .map(|r| vec![beam.to_string().into(), r.slot.into(), r.sum_rate.into()]),
        );
    }
    let fingerprint = config.fingerprint();
    Ok(TimescaleResult {
        summary: ExperimentResult {
            kind: ExperimentKind::TimescaleCompare,
            rows: summary,
            fingerprint: fingerprint.clone(),
        },
        trace: ExperimentResult {
            kind: ExperimentKind::TimescaleTrace,
            rows: trace,
            fingerprint,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(slots: usize) -> ScenarioConfig {
        ScenarioConfig {
            horizon_slots: slots,
            ..Default::default()
        }
    }

    #[test]
    fn one_slot_one_row() {
        let rows = run(&short(1)).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].serving.len(), 3);
        assert!(rows[0].sum_rate > 0.0);
        assert!(!rows[0].handover);
    }

    #[test]
    fn zero_power_zero_rate() {
        let cfg = ScenarioConfig {
            power_w: 0.0,
            ..short(20)
        };
        assert!(run(&cfg).unwrap().iter().all(|r| r.sum_rate == 0.0));
    }

    #[test]
    fn visibility_error_names_slot() {
        let cfg = ScenarioConfig {
            policy: Policy::default().with_receiver(Receiver::DistSat(200)),
            ..short(3)
        };
        match run(&cfg) {
            Err(Error::AtSlot { slot, source }) => {
                assert_eq!(slot, 0);
                assert!(matches!(*source, Error::InsufficientVisibility { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn receivers_shape_channels() {
        let world = World::new(short(1)).unwrap();
        for (rx, rows) in [
            (Receiver::DistSat(3), 48),
            (Receiver::SingleSat, 16),
            (Receiver::CoLocatedSat(3), 48),
        ] {
            let sc = world
                .slot_channels(&Policy::default().with_receiver(rx), 0)
                .unwrap();
            assert_eq!(sc.channels.len(), 2);
            assert_eq!(sc.channels[0].h.nrows(), rows, "{rx}");
            assert_eq!(sc.channels[0].h.ncols(), 4);
        }
        let sc = world
            .slot_channels(
                &Policy::default().with_transmitter(Transmitter::SingleLav),
                0,
            )
            .unwrap();
        assert_eq!(sc.channels[0].h.ncols(), 1);
    }

    #[test]
    fn handover_flags_follow_serving_changes() {
        let rows = run(&short(60)).unwrap();
        for w in rows.windows(2) {
            assert_eq!(w[1].handover, !same_members(&w[1].serving, &w[0].serving));
        }
    }

    #[test]
    fn sweep_singleton() {
        let cfg = short(4);
        let r = power_sweep(&cfg, &[20.0], &sweep_policies(&cfg)).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(power_sweep(&cfg, &[], &sweep_policies(&cfg)).is_err());
    }

    #[test]
    fn empty_targets_empty_table() {
        let r = min_power_experiment(&short(4), &[]).unwrap();
        assert!(r.rows.is_empty());
    }

    #[test]
    fn zero_target_full_service() {
        let cfg = ScenarioConfig {
            service_frame_slots: 30,
            ..short(30)
        };
        let r = service_experiment(&cfg, &[0.0]).unwrap();
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert_eq!(row[2], Cell::Int(30));
            assert_eq!(row[3], Cell::Int(0));
            assert_eq!(row[5], Cell::Bool(false));
        }
    }

    #[test]
    fn fingerprint_tracks_seed() {
        let a = ScenarioConfig::default();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_ne!(a.fingerprint(), a.with_seed(2).fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
    }
}
