use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ring buffer holding exactly one fundamental period of samples.
///
/// The running sum is kept relative to a pivot (the first sample ever
/// pushed), so a constant signal has mean equal to the constant exactly.
/// The sum is recomputed from the stored samples on every wrap of the ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleWindow {
    buf: Vec<f64>,
    head: usize,
    filled: usize,
    pivot: Option<f64>,
    shifted_sum: f64,
    dt: f64,
    f_nom: f64,
}

impl CycleWindow {
    pub fn new(f_nom: f64, dt: f64) -> Self {
        let len = (1.0 / (f_nom * dt)).round().max(1.0) as usize;
        Self {
            buf: vec![0.0; len],
            head: 0,
            filled: 0,
            pivot: None,
            shifted_sum: 0.0,
            dt,
            f_nom,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.buf.len()
    }

    pub fn clear(&mut self) {
        self.head = 0;
        self.filled = 0;
        self.pivot = None;
        self.shifted_sum = 0.0;
    }

    pub fn push(&mut self, x: f64) {
        let pivot = *self.pivot.get_or_insert(x);
        if self.is_full() {
            self.shifted_sum -= self.buf[self.head] - pivot;
        } else {
            self.filled += 1;
        }
        self.buf[self.head] = x;
        self.shifted_sum += x - pivot;
        self.head += 1;
        if self.head == self.buf.len() {
            self.head = 0;
            self.shifted_sum = self.buf[..self.filled].iter().map(|v| v - pivot).sum();
        }
    }

    /// Mean of the stored samples, or `None` while empty.
    pub fn mean(&self) -> Option<f64> {
        let pivot = self.pivot?;
        Some(pivot + self.shifted_sum / self.filled as f64)
    }

    /// Samples oldest-first.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let start = if self.is_full() { self.head } else { 0 };
        (0..self.filled).map(move |k| self.buf[(start + k) % self.buf.len()])
    }

    pub fn latest(&self) -> Option<f64> {
        (self.filled > 0).then(|| self.buf[(self.head + self.buf.len() - 1) % self.buf.len()])
    }

    /// Amplitude of the nominal-frequency component over a full window
    /// (single-bin DFT).
    pub fn fundamental_amplitude(&self) -> Result<f64> {
        if !self.is_full() {
            return Err(Error::MetricNotReady("cycle window not yet full"));
        }
        let w = TAU * self.f_nom * self.dt;
        let (mut re, mut im) = (0.0, 0.0);
        for (k, x) in self.iter().enumerate() {
            let ph = w * k as f64;
            re += x * ph.cos();
            im -= x * ph.sin();
        }
        Ok(2.0 * re.hypot(im) / self.buf.len() as f64)
    }
}

/// DC component over the most recent full fundamental cycle.
pub fn dc_component(w: &CycleWindow) -> Result<f64> {
    if !w.is_full() {
        return Err(Error::MetricNotReady("cycle window not yet full"));
    }
    Ok(w.mean().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const F: f64 = 60.0;

    fn sampled(dt: f64, n: usize, f: impl Fn(f64) -> f64) -> CycleWindow {
        let mut w = CycleWindow::new(F, dt);
        for k in 0..n {
            w.push(f(k as f64 * dt));
        }
        w
    }

    #[test]
    fn underfilled_window_is_not_ready() {
        let w = sampled(1e-4, 10, |t| t);
        assert!(matches!(dc_component(&w), Err(Error::MetricNotReady(_))));
        assert!(w.fundamental_amplitude().is_err());
    }

    #[test]
    fn pure_sinusoid_has_no_dc() {
        // 1000 samples per cycle exactly.
        let dt = 1.0 / (F * 1000.0);
        let w = sampled(dt, 1000, |t| (TAU * F * t).sin());
        assert!(dc_component(&w).unwrap().abs() < 1e-9);
        assert!((w.fundamental_amplitude().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn offset_is_recovered() {
        let dt = 1.0 / (F * 1000.0);
        let w = sampled(dt, 2500, |t| (TAU * F * t).sin() + 0.4);
        assert!((dc_component(&w).unwrap() - 0.4).abs() < 1e-6);
    }

    #[test]
    fn decaying_offset_matches_brute_force_mean() {
        let dt: f64 = 50e-6;
        let f = |t: f64| 0.5 * (-t / 0.1).exp() + (TAU * F * t).sin();
        let n_end = (0.1 / dt).round() as usize; // window ends at t = 0.1 s
        let w = sampled(dt, n_end + 1, f);
        let len = w.len();
        assert_eq!(len, 333);
        let oracle: f64 =
            ((n_end + 1 - len)..=n_end).map(|k| f(k as f64 * dt)).sum::<f64>() / len as f64;
        assert!((dc_component(&w).unwrap() - oracle).abs() < 1e-12);
        // sanity: the decaying offset dominates the residual sinusoid leakage
        assert!((oracle - 0.5 * (-0.1f64 / 0.1).exp()).abs() < 0.03);
    }

    #[test]
    fn iteration_is_oldest_first() {
        let mut w = CycleWindow::new(F, 1.0 / (F * 4.0));
        for x in 0..6 {
            w.push(x as f64);
        }
        assert_eq!(w.iter().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.latest(), Some(5.0));
        w.clear();
        assert!(w.is_empty());
    }

    proptest! {
        #[test]
        fn constant_signal_mean_is_exact(c in -1e6f64..1e6, n in 1usize..5000) {
            let mut w = CycleWindow::new(F, 10e-6);
            for _ in 0..n { w.push(c); }
            prop_assert_eq!(w.mean().unwrap(), c);
        }

        #[test]
        fn running_mean_matches_stored_samples(xs in proptest::collection::vec(-10.0f64..10.0, 1..400)) {
            let mut w = CycleWindow::new(F, 1.0 / (F * 97.0));
            for &x in &xs { w.push(x); }
            let stored: Vec<f64> = w.iter().collect();
            let direct = stored.iter().sum::<f64>() / stored.len() as f64;
            prop_assert!((w.mean().unwrap() - direct).abs() < 1e-12);
        }
    }
}
