//! Slot-level simulator for satellite-assisted low-altitude uplinks.
//!
//! Fleets of single-antenna low-altitude vehicles (LAVs) transmit a common
//! stream per fleet to a cluster of LEO satellites that combine jointly.
//! Beam directions are decided per frame, precoding and combining per slot.
//!
//! Module map:
//! - [`geokit`]: spherical-Earth geometry, time, fleet kinematics
//! - [`constellation`]: Walker shell generation and circular propagation
//! - [`antenna`]: element pattern, off-boresight angle, planar steering vectors
//! - [`channel`]: path loss, Rician fading, stacked channel assembly
//! - [`mimo`]: MRT precoding, MMSE combining, SINR, minimum-power search
//! - [`control`]: beam centers, serving sets, scheduling, service accounting
//! - [`engine`]: scenario orchestration and the four experiments
//! - [`cli`]: scenario files and CSV reports

// `!(x > 0.0)` is how validation rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod antenna;
pub mod channel;
pub mod cli;
pub mod constellation;
pub mod control;
pub mod engine;
pub mod error;
pub mod geokit;
pub mod mimo;

pub use error::{Error, Result};
