use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One quadrature step of `dx/dt`.
///
/// `dx_dt` is the derivative sample at the end of the step. With the sample
/// from the start of the step in `prev_dx_dt` this is the trapezoidal rule
/// (second order); without it the update falls back to first-order Euler.
pub fn integrate_step(x: f64, dx_dt: f64, prev_dx_dt: Option<f64>, dt: f64) -> Result<f64> {
    if !(x.is_finite() && dx_dt.is_finite() && dt.is_finite()) || dt <= 0.0 {
        return Err(Error::non_finite(format!(
            "integrate_step(x = {x}, dx_dt = {dx_dt}, dt = {dt})"
        )));
    }
    let next = match prev_dx_dt {
        Some(p) if p.is_finite() => x + 0.5 * dt * (dx_dt + p),
        Some(p) => return Err(Error::non_finite(format!("integrate_step(prev_dx_dt = {p})"))),
        None => x + dt * dx_dt,
    };
    Ok(next)
}

/// Scalar integrator state that remembers the previous derivative sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Integrator {
    pub value: f64,
    prev: Option<f64>,
}

impl Integrator {
    pub fn new(value: f64) -> Self {
        Self { value, prev: None }
    }

    pub fn step(&mut self, dx_dt: f64, dt: f64) -> Result<f64> {
        self.value = integrate_step(self.value, dx_dt, self.prev, dt)?;
        self.prev = Some(dx_dt);
        Ok(self.value)
    }

    /// Forgets the previous derivative so the next step is Euler. Used where
    /// the integrand is discontinuous.
    pub fn reset_history(&mut self) {
        self.prev = None;
    }

    pub fn set(&mut self, value: f64) {
        self.value = value;
        self.prev = None;
    }

    pub fn previous_derivative(&self) -> Option<f64> {
        self.prev
    }
}
