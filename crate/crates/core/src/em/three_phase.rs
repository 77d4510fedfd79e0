use std::f64::consts::FRAC_PI_3;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

const TWO_PI_3: f64 = 2.0 * FRAC_PI_3;
const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    A,
    B,
    C,
}

pub const PHASES: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

impl Phase {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Phase::A => "a",
            Phase::B => "b",
            Phase::C => "c",
        }
    }
}

/// Per-phase triple in one electrical frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThreePhase {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhase {
    pub const ZERO: ThreePhase = ThreePhase {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };

    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn splat(x: f64) -> Self {
        Self::new(x, x, x)
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.a), f(self.b), f(self.c))
    }

    pub fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::new(f(self.a, other.a), f(self.b, other.b), f(self.c, other.c))
    }

    pub fn sum(self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn dot(self, other: Self) -> f64 {
        self.a * other.a + self.b * other.b + self.c * other.c
    }

    /// Zero-sequence component `(a + b + c) / 3`.
    pub fn zero_sequence(self) -> f64 {
        self.sum() / 3.0
    }

    /// The triple with its zero-sequence component removed.
    pub fn differential(self) -> Self {
        self - Self::splat(self.zero_sequence())
    }

    /// Amplitude-invariant Clarke transform `(alpha, beta)`.
    pub fn clarke(self) -> (f64, f64) {
        let alpha = (2.0 * self.a - self.b - self.c) / 3.0;
        let beta = (self.b - self.c) / SQRT_3;
        (alpha, beta)
    }

    /// Space-vector magnitude; equals the phase amplitude for balanced sets.
    pub fn magnitude(self) -> f64 {
        let (al, be) = self.clarke();
        al.hypot(be)
    }

    /// Space-vector angle, radians.
    pub fn angle(self) -> f64 {
        let (al, be) = self.clarke();
        be.atan2(al)
    }

    pub fn max_abs(self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    pub fn is_finite(self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }
}

/// Polar-to-abc projection of a space vector of magnitude `magnitude` at `angle`.
pub fn polar_to_abc(magnitude: f64, angle: f64) -> ThreePhase {
    ThreePhase::new(
        magnitude * angle.cos(),
        magnitude * (angle - TWO_PI_3).cos(),
        magnitude * (angle + TWO_PI_3).cos(),
    )
}

impl Index<Phase> for ThreePhase {
    type Output = f64;
    fn index(&self, p: Phase) -> &f64 {
        match p {
            Phase::A => &self.a,
            Phase::B => &self.b,
            Phase::C => &self.c,
        }
    }
}

impl IndexMut<Phase> for ThreePhase {
    fn index_mut(&mut self, p: Phase) -> &mut f64 {
        match p {
            Phase::A => &mut self.a,
            Phase::B => &mut self.b,
            Phase::C => &mut self.c,
        }
    }
}

impl Index<usize> for ThreePhase {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.a,
            1 => &self.b,
            2 => &self.c,
            _ => panic!("phase index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for ThreePhase {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.a,
            1 => &mut self.b,
            2 => &mut self.c,
            _ => panic!("phase index {i} out of range"),
        }
    }
}

impl Add for ThreePhase {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.zip(o, |x, y| x + y)
    }
}

impl Sub for ThreePhase {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.zip(o, |x, y| x - y)
    }
}

impl Neg for ThreePhase {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|x| -x)
    }
}

impl Mul<f64> for ThreePhase {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.map(|x| x * k)
    }
}

impl Mul<ThreePhase> for f64 {
    type Output = ThreePhase;
    fn mul(self, v: ThreePhase) -> ThreePhase {
        v * self
    }
}

impl AddAssign for ThreePhase {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for ThreePhase {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: ThreePhase, b: ThreePhase, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn polar_to_abc_examples() {
        assert!(close(polar_to_abc(1.0, 0.0), ThreePhase::new(1.0, -0.5, -0.5), 1e-15));
        assert_eq!(polar_to_abc(0.0, 1.234), ThreePhase::ZERO.map(|x| x * 1.0));
        let s3 = 3f64.sqrt() / 2.0;
        assert!(close(polar_to_abc(1.0, FRAC_PI_2), ThreePhase::new(0.0, s3, -s3), 1e-15));
    }

    #[test]
    fn clarke_recovers_polar_form() {
        let v = polar_to_abc(0.7, 0.4);
        assert!((v.magnitude() - 0.7).abs() < 1e-14);
        assert!((v.angle() - 0.4).abs() < 1e-14);
        let w = polar_to_abc(1.0, PI - 0.1);
        assert!((w.angle() - (PI - 0.1)).abs() < 1e-13);
    }

    #[test]
    fn differential_removes_common_mode() {
        let v = ThreePhase::new(1.0, -1.0, 1.0);
        assert!((v.zero_sequence() - 1.0 / 3.0).abs() < 1e-15);
        assert!(v.differential().zero_sequence().abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn polar_to_abc_is_zero_sequence_free(m in 0.0f64..10.0, th in -100.0f64..100.0) {
            prop_assert!(polar_to_abc(m, th).zero_sequence().abs() < 1e-12);
        }
    }
}
