//! Inverter controllers: flux synchronization, funnel current control,
//! the switching strategy between them, and a voltage-source baseline.

pub mod avscm;
pub mod lbfc;
pub mod mode;
pub mod nfscm;

pub use avscm::{avscm_step, AvscmInputs, AvscmParams, AvscmState};
pub use lbfc::{lbfc_control, lbfc_logic, lbfc_step, FunnelParams, FunnelState};
pub use mode::{mode_switch_step, Mode, ModeParams, ModeState, Transition};
pub use nfscm::{
    dc_energy_deviation, flux_from_voltage, modulation_error, nfscm_magnitude_step, nfscm_output,
    nfscm_phase_step, NfscmParams, NfscmState,
};
