//! Shared electrical primitives: per-unit bases, three-phase values,
//! discrete integrators and cycle-windowed statistics.

mod base;
mod integrate;
mod three_phase;
mod window;

pub use base::PerUnitBase;
pub use integrate::{integrate_step, Integrator};
pub use three_phase::{polar_to_abc, Phase, ThreePhase, PHASES};
pub use window::{dc_component, CycleWindow};
