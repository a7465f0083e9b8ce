//! Flat `key = value` scenario files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are dotted (`shell.planes`, `fleet.2.speed_kms`, ...). Unknown or
//! repeated keys are errors; missing keys take the case-study defaults and
//! each substitution is reported as a notice.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::control::{BeamVariant, Policy, Receiver, Transmitter};
use crate::engine::{default_fleets, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geokit::{FleetTrack, GeodeticPos};
use crate::mimo::RateMetric;

/// Non-fleet keys, in emission order.
const KEYS: &[&str] = &[
    "shell.planes",
    "shell.sats_per_plane",
    "shell.altitude_km",
    "shell.inclination_deg",
    "shell.phasing",
    "shell.phase_deg",
    "shell.raan_deg",
    "array.rows",
    "array.cols",
    "array.spacing",
    "pattern.peak_dbi",
    "pattern.hbw_deg",
    "pattern.sll_db",
    "link.freq_ghz",
    "link.noise_w",
    "link.rician_db",
    "link.tx_gain_dbi",
    "link.carrier_phase",
    "policy.beam",
    "policy.frame_slots",
    "policy.receiver",
    "policy.m",
    "policy.transmitter",
    "sim.fleets",
    "sim.slots",
    "sim.slot_s",
    "sim.min_elev_deg",
    "sim.seed",
    "sim.power_w",
    "sim.joint_visibility",
    "sim.rate_metric",
    "search.min_w",
    "search.max_w",
    "search.tol_db",
    "search.stride",
    "service.frame_slots",
    "service.start_slot",
];

const FLEET_FIELDS: &[&str] = &["start", "end", "speed_kms", "k", "alt_km", "formation_km"];

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: ScenarioConfig,
    /// One line per key that fell back to its default.
    pub notices: Vec<String>,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
    notices: Vec<String>,
}

impl Entries {
    fn get<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + std::fmt::Display,
    {
        match self.map.get(key) {
            Some((raw, line)) => raw.parse::<T>().map_err(|_| Error::Parse {
                line: *line,
                message: format!("cannot parse `{raw}` for {key}"),
            }),
            None => {
                self.notices
                    .push(format!("{key} not set, using default {default}"));
                Ok(default)
            }
        }
    }

    fn get_with<T, F>(&mut self, key: &str, default: T, shown: &str, parse: F) -> Result<T>
    where
        F: FnOnce(&str) -> Option<T>,
    {
        match self.map.get(key) {
            Some((raw, line)) => parse(raw).ok_or_else(|| Error::Parse {
                line: *line,
                message: format!("invalid value `{raw}` for {key}"),
            }),
            None => {
                self.notices
                    .push(format!("{key} not set, using default {shown}"));
                Ok(default)
            }
        }
    }
}

fn parse_latlon(raw: &str) -> Option<(f64, f64)> {
    let (a, b) = raw.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_beam(raw: &str, frame: usize) -> Option<BeamVariant> {
    Some(match raw {
        "two-timescale" => BeamVariant::TwoTimescale(frame),
        "slot-level" => BeamVariant::SlotLevel,
        "fixed-initial" => BeamVariant::FixedInitial,
        "earth-center" => BeamVariant::EarthCenter,
        _ => return None,
    })
}

fn beam_name(b: BeamVariant) -> &'static str {
    match b {
        BeamVariant::TwoTimescale(_) => "two-timescale",
        BeamVariant::SlotLevel => "slot-level",
        BeamVariant::FixedInitial => "fixed-initial",
        BeamVariant::EarthCenter => "earth-center",
    }
}

fn receiver_name(r: Receiver) -> &'static str {
    match r {
        Receiver::DistSat(_) => "dist-sat",
        Receiver::SingleSat => "single-sat",
        Receiver::CoLocatedSat(_) => "colocated-sat",
    }
}

fn metric_name(m: RateMetric) -> &'static str {
    match m {
        RateMetric::PerFleet => "per-fleet",
        RateMetric::Sum => "sum",
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if !is_known(&k) {
            return Err(Error::UnknownKey(k));
        }
        if map.insert(k.clone(), (v, line)).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key {k}"),
            });
        }
    }
    Ok(map)
}

fn fleet_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("fleet.")?;
    let (idx, field) = rest.split_once('.')?;
    let idx: usize = idx.parse().ok()?;
    (idx >= 1 && FLEET_FIELDS.contains(&field)).then_some((idx, field))
}

fn is_known(key: &str) -> bool {
    KEYS.contains(&key) || fleet_key(key).is_some()
}

pub fn parse_scenario_str(text: &str) -> Result<Parsed> {
    let map = tokenize(text)?;
    let highest_fleet = map
        .keys()
        .filter_map(|k| fleet_key(k))
        .map(|(i, _)| i)
        .max();
    let mut e = Entries {
        map,
        notices: Vec::new(),
    };
    let d = ScenarioConfig::default();

    let mut c = ScenarioConfig::default();
    c.shell.planes = e.get("shell.planes", d.shell.planes)?;
    c.shell.sats_per_plane = e.get("shell.sats_per_plane", d.shell.sats_per_plane)?;
    c.shell.altitude_km = e.get("shell.altitude_km", d.shell.altitude_km)?;
    c.shell.inclination_deg = e.get("shell.inclination_deg", d.shell.inclination_deg)?;
    c.shell.phasing = e.get("shell.phasing", d.shell.phasing)?;
    c.shell.phase_offset_deg = e.get("shell.phase_deg", d.shell.phase_offset_deg)?;
    c.shell.raan_offset_deg = e.get("shell.raan_deg", d.shell.raan_offset_deg)?;

    c.array.rows = e.get("array.rows", d.array.rows)?;
    c.array.cols = e.get("array.cols", d.array.cols)?;
    c.array.spacing_wl = e.get("array.spacing", d.array.spacing_wl)?;

    c.pattern.peak_gain_dbi = e.get("pattern.peak_dbi", d.pattern.peak_gain_dbi)?;
    c.pattern.half_beamwidth_deg = e.get("pattern.hbw_deg", d.pattern.half_beamwidth_deg)?;
    c.pattern.sidelobe_suppression_db =
        e.get("pattern.sll_db", d.pattern.sidelobe_suppression_db)?;

    c.link.carrier_freq_ghz = e.get("link.freq_ghz", d.link.carrier_freq_ghz)?;
    c.link.noise_power_w = e.get("link.noise_w", d.link.noise_power_w)?;
    c.link.rician_k_db = e.get("link.rician_db", d.link.rician_k_db)?;
    c.link.tx_gain_dbi = e.get("link.tx_gain_dbi", d.link.tx_gain_dbi)?;
    c.link.carrier_phase = e.get("link.carrier_phase", d.link.carrier_phase)?;

    let frame = match d.policy.beam {
        BeamVariant::TwoTimescale(n) => n,
        _ => 200,
    };
    let frame: usize = e.get("policy.frame_slots", frame)?;
    let m_default = match d.policy.receiver {
        Receiver::DistSat(m) | Receiver::CoLocatedSat(m) => m,
        Receiver::SingleSat => 1,
    };
    let m: usize = e.get("policy.m", m_default)?;
    let beam = e.get_with(
        "policy.beam",
        d.policy.beam,
        beam_name(d.policy.beam),
        |s| parse_beam(s, frame),
    )?;
    // a default TwoTimescale still follows an explicit frame length
    let beam = match beam {
        BeamVariant::TwoTimescale(_) => BeamVariant::TwoTimescale(frame),
        b => b,
    };
    let receiver = e.get_with(
        "policy.receiver",
        "dist-sat",
        receiver_name(d.policy.receiver),
        |s| {
            ["dist-sat", "single-sat", "colocated-sat"]
                .into_iter()
                .find(|n| *n == s)
        },
    )?;
    let receiver = match receiver {
        "dist-sat" => Receiver::DistSat(m),
        "single-sat" => Receiver::SingleSat,
        _ => Receiver::CoLocatedSat(m),
    };
    let transmitter = e.get_with(
        "policy.transmitter",
        d.policy.transmitter,
        &d.policy.transmitter.to_string(),
        |s| Transmitter::from_str(s).ok(),
    )?;
    c.policy = Policy {
        beam,
        receiver,
        transmitter,
    };

    let defaults = default_fleets();
    let fleet_count = e.get("sim.fleets", highest_fleet.unwrap_or(0).max(defaults.len()))?;
    if let Some(h) = highest_fleet.filter(|h| *h > fleet_count) {
        return Err(Error::out_of_range(
            "sim.fleets",
            fleet_count,
            format!(">= {h} (fleet.{h}.* is set)"),
        ));
    }
    c.fleets = Vec::with_capacity(fleet_count);
    for i in 1..=fleet_count {
        let base = defaults.get(i - 1).cloned();
        let template = base.clone().unwrap_or_else(|| defaults[0].clone());
        let key = |f: &str| format!("fleet.{i}.{f}");
        let latlon = |e: &mut Entries, f: &str, def: Option<GeodeticPos>| -> Result<(f64, f64)> {
            let k = key(f);
            match def {
                Some(p) => e.get_with(
                    &k,
                    (p.lat_deg, p.lon_deg),
                    &format!("{},{}", p.lat_deg, p.lon_deg),
                    parse_latlon,
                ),
                None => {
                    let (raw, line) = e.map.get(&k).cloned().ok_or_else(|| {
                        Error::out_of_range(
                            k.clone(),
                            "missing",
                            "required for fleets beyond the defaults",
                        )
                    })?;
                    parse_latlon(&raw).ok_or(Error::Parse {
                        line,
                        message: format!("invalid value `{raw}` for {k}"),
                    })
                }
            }
        };
        let start = latlon(&mut e, "start", base.as_ref().map(|b| b.start))?;
        let end = latlon(&mut e, "end", base.as_ref().map(|b| b.end))?;
        let alt: f64 = e.get(&key("alt_km"), template.start.alt_km)?;
        let speed: f64 = e.get(&key("speed_kms"), template.speed_kms)?;
        let k: usize = e.get(&key("k"), template.lav_count)?;
        let formation: f64 = e.get(&key("formation_km"), template.formation_radius_km)?;
        let pos = |(lat, lon): (f64, f64), which: &str| {
            GeodeticPos::new(lat, lon, alt).map_err(|err| match err {
                Error::OutOfRange { value, allowed, .. } => Error::OutOfRange {
                    name: key(which),
                    value,
                    allowed,
                },
                other => other,
            })
        };
        c.fleets.push(FleetTrack {
            start: pos(start, "start")?,
            end: pos(end, "end")?,
            speed_kms: speed,
            lav_count: k,
            formation_radius_km: formation,
        });
    }

    c.horizon_slots = e.get("sim.slots", d.horizon_slots)?;
    c.slot_duration_s = e.get("sim.slot_s", d.slot_duration_s)?;
    c.min_elev_deg = e.get("sim.min_elev_deg", d.min_elev_deg)?;
    c.master_seed = e.get("sim.seed", d.master_seed)?;
    c.power_w = e.get("sim.power_w", d.power_w)?;
    c.joint_visibility = e.get("sim.joint_visibility", d.joint_visibility)?;
    c.rate_metric = e.get_with(
        "sim.rate_metric",
        d.rate_metric,
        metric_name(d.rate_metric),
        |s| match s {
            "per-fleet" => Some(RateMetric::PerFleet),
            "sum" => Some(RateMetric::Sum),
            _ => None,
        },
    )?;

    c.search.bracket.min_w = e.get("search.min_w", d.search.bracket.min_w)?;
    c.search.bracket.max_w = e.get("search.max_w", d.search.bracket.max_w)?;
    c.search.tol_db = e.get("search.tol_db", d.search.tol_db)?;
    c.search.stride = e.get("search.stride", d.search.stride)?;
    c.service_frame_slots = e.get("service.frame_slots", d.service_frame_slots)?;
    c.service_start_slot = e.get("service.start_slot", d.service_start_slot)?;

    c.validate()?;
    Ok(Parsed {
        config: c,
        notices: e.notices,
    })
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Parsed> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_scenario_str(&text)
}

/// Normalized form: every key, fixed order, shortest round-trip floats.
pub fn to_text(c: &ScenarioConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("shell.planes", c.shell.planes.to_string());
    kv("shell.sats_per_plane", c.shell.sats_per_plane.to_string());
    kv("shell.altitude_km", c.shell.altitude_km.to_string());
    kv("shell.inclination_deg", c.shell.inclination_deg.to_string());
    kv("shell.phasing", c.shell.phasing.to_string());
    kv("shell.phase_deg", c.shell.phase_offset_deg.to_string());
    kv("shell.raan_deg", c.shell.raan_offset_deg.to_string());
    kv("array.rows", c.array.rows.to_string());
    kv("array.cols", c.array.cols.to_string());
    kv("array.spacing", c.array.spacing_wl.to_string());
    kv("pattern.peak_dbi", c.pattern.peak_gain_dbi.to_string());
    kv("pattern.hbw_deg", c.pattern.half_beamwidth_deg.to_string());
    kv(
        "pattern.sll_db",
        c.pattern.sidelobe_suppression_db.to_string(),
    );
    kv("link.freq_ghz", c.link.carrier_freq_ghz.to_string());
    kv("link.noise_w", c.link.noise_power_w.to_string());
    kv("link.rician_db", c.link.rician_k_db.to_string());
    kv("link.tx_gain_dbi", c.link.tx_gain_dbi.to_string());
    kv("link.carrier_phase", c.link.carrier_phase.to_string());
    kv("policy.beam", beam_name(c.policy.beam).to_string());
    let frame = match c.policy.beam {
        BeamVariant::TwoTimescale(n) => n,
        _ => 200,
    };
    kv("policy.frame_slots", frame.to_string());
    kv(
        "policy.receiver",
        receiver_name(c.policy.receiver).to_string(),
    );
    let m = match c.policy.receiver {
        Receiver::DistSat(m) | Receiver::CoLocatedSat(m) => m,
        Receiver::SingleSat => 1,
    };
    kv("policy.m", m.to_string());
    kv("policy.transmitter", c.policy.transmitter.to_string());
    kv("sim.fleets", c.fleets.len().to_string());
    for (i, f) in c.fleets.iter().enumerate() {
        let n = i + 1;
        kv(
            &format!("fleet.{n}.start"),
            format!("{},{}", f.start.lat_deg, f.start.lon_deg),
        );
        kv(
            &format!("fleet.{n}.end"),
            format!("{},{}", f.end.lat_deg, f.end.lon_deg),
        );
        kv(&format!("fleet.{n}.alt_km"), f.start.alt_km.to_string());
        kv(&format!("fleet.{n}.speed_kms"), f.speed_kms.to_string());
        kv(&format!("fleet.{n}.k"), f.lav_count.to_string());
        kv(
            &format!("fleet.{n}.formation_km"),
            f.formation_radius_km.to_string(),
        );
    }
    kv("sim.slots", c.horizon_slots.to_string());
    kv("sim.slot_s", c.slot_duration_s.to_string());
    kv("sim.min_elev_deg", c.min_elev_deg.to_string());
    kv("sim.seed", c.master_seed.to_string());
    kv("sim.power_w", c.power_w.to_string());
    kv("sim.joint_visibility", c.joint_visibility.to_string());
    kv("sim.rate_metric", metric_name(c.rate_metric).to_string());
    kv("search.min_w", c.search.bracket.min_w.to_string());
    kv("search.max_w", c.search.bracket.max_w.to_string());
    kv("search.tol_db", c.search.tol_db.to_string());
    kv("search.stride", c.search.stride.to_string());
    kv("service.frame_slots", c.service_frame_slots.to_string());
    kv("service.start_slot", c.service_start_slot.to_string());
    s
}
