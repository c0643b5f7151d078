//! Round-trip phase bookkeeping.
//!
//! Optical phases `2ωd/c` reach 10⁵–10⁹ rad for centimetre-to-metre cavities,
//! so the product and the reduction modulo 2π are carried out in double-double
//! arithmetic (an unevaluated sum `hi + lo` of two `f64`). The reduced phase is
//! then accurate to well below 1e-9 rad.

use std::f64::consts::TAU;

use thiserror::Error;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Largest unreduced phase accepted by [`reduce_mod_2pi_dd`]. Beyond this the
/// turn count loses integer exactness in the double-double scheme.
pub const MAX_REDUCIBLE_PHASE: f64 = 1e15;

/// Low word of 2π in double-double form (`TAU + TAU_LO` ≈ 2π to ~1e-32).
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("{name} = {value} must be positive and finite")]
    InvalidInput { name: &'static str, value: f64 },
    #[error("unreduced phase {phase:e} rad exceeds the safe reduction range {MAX_REDUCIBLE_PHASE:e} rad; precision would be lost")]
    PrecisionLoss { phase: f64 },
}

/// Unevaluated sum of two doubles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let (t, f) = two_sum(self.lo, other.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }

    pub fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }

    pub fn scale(self, k: f64) -> Self {
        let (p, e) = two_prod(self.hi, k);
        let (hi, lo) = quick_two_sum(p, e + self.lo * k);
        Self { hi, lo }
    }

    pub fn div_f64(self, d: f64) -> Self {
        let q1 = self.hi / d;
        let r = self.add(Self::product(q1, d).neg());
        let q2 = r.hi / d;
        let r = r.add(Self::product(q2, d).neg());
        let q3 = r.hi / d;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo }.add(Self::from_f64(q3))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Reduces a double-double phase into `[0, 2π)`.
pub fn reduce_mod_2pi_dd(phase: DoubleDouble) -> Result<f64, PhaseError> {
    let approx = phase.to_f64();
    if !approx.is_finite() || approx.abs() > MAX_REDUCIBLE_PHASE {
        return Err(PhaseError::PrecisionLoss { phase: approx });
    }
    let turns = (approx / TAU).floor();
    // r = phase − turns·(TAU + TAU_LO), every product kept exact
    let mut r = phase
        .add(DoubleDouble::product(turns, TAU).neg())
        .add(DoubleDouble::product(turns, TAU_LO).neg());
    // floor() of a rounded quotient can be one turn off
    for _ in 0..2 {
        if r.hi < 0.0 {
            r = r.add(DoubleDouble { hi: TAU, lo: TAU_LO });
        } else if r.hi >= TAU {
            r = r.add(DoubleDouble { hi: -TAU, lo: -TAU_LO });
        }
    }
    let v = r.to_f64();
    Ok(if v >= TAU || v < 0.0 { 0.0 } else { v })
}

/// Reduces an ordinary `f64` phase into `[0, 2π)`.
pub fn reduce_mod_2pi(phase: f64) -> f64 {
    match reduce_mod_2pi_dd(DoubleDouble::from_f64(phase)) {
        Ok(v) => v,
        Err(_) => phase.rem_euclid(TAU),
    }
}

/// Circular distance from `theta` to the nearest multiple of 2π.
pub fn distance_to_resonance(theta: f64) -> f64 {
    let r = reduce_mod_2pi(theta);
    r.min(TAU - r)
}

fn check_positive(name: &'static str, value: f64) -> Result<(), PhaseError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(PhaseError::InvalidInput { name, value })
    }
}

/// Joint round-trip phase `θ = 2(ω_L d_L + ω_R d_R)/c`, reduced into
/// `[0, 2π)`. On resonance `θ ≡ 0`.
pub fn phase_from_geometry(
    omega_left: f64,
    omega_right: f64,
    d_left: f64,
    d_right: f64,
) -> Result<f64, PhaseError> {
    check_positive("omega_left", omega_left)?;
    check_positive("omega_right", omega_right)?;
    check_positive("d_left", d_left)?;
    check_positive("d_right", d_right)?;
    let path = DoubleDouble::product(omega_left, d_left)
        .add(DoubleDouble::product(omega_right, d_right))
        .scale(2.0);
    reduce_mod_2pi_dd(path.div_f64(SPEED_OF_LIGHT))
}
