//! Fixed-step electromagnetic-transient simulation of wind-power-generator
//! inverters controlled as node flux-linkage sources.
//!
//! The crate is organised bottom-up:
//!
//! * [`em`] per-unit bases, three-phase values, integrators, cycle windows
//! * [`network`] RL branches, saturable transformers, loads, faults, nodal solve
//! * [`plant`] DC-link capacitor, machine-side surrogate, storage boost, governor
//! * [`inverter`] switched full-bridge with RL + RC filter, flux hysteresis modulator
//! * [`control`] flux-linkage synchronizing control, bang-bang funnel control,
//!   mode switching and the voltage-source baseline
//! * [`engine`] deterministic step loop, events, recorder, metrics
//! * [`scenario`] configuration files and run artifacts
//! * [`acceptance`] end-to-end acceptance checks

// Parameter checks use `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod control;
pub mod em;
pub mod engine;
pub mod error;
pub mod inverter;
pub mod network;
pub mod plant;
pub mod scenario;

pub use error::{Error, Result};
