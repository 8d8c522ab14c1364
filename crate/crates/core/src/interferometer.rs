//! A single ideal Mach-Zehnder loop: phase bookkeeping and output-port
//! probabilities.
//!
//! Phases in the factoring schedules reach `2πN` with `N` around 10⁷, where a
//! plain `f64` radian value has already lost several digits of the fractional
//! turn. [`Phase`] therefore keeps the whole number of turns as an integer and
//! only the remainder in radians. Rational phases `2π·q/m` with integer `q`
//! and `m` are split with integer arithmetic, so a phase that is an exact
//! multiple of `2π` has a remainder of exactly zero and `cos` evaluates to
//! exactly 1. Real-valued phases are reduced against a two-word
//! representation of `2π` with a fused multiply-add, which keeps the
//! remainder accurate to about 1e-15 rad for `|χ| < 2^52`.

use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// 2π rounded to the nearest `f64`.
pub const TWO_PI_HI: f64 = std::f64::consts::TAU;
/// The part of 2π that `TWO_PI_HI` misses.
pub const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Interferometer phase `χ`, stored as whole turns plus a remainder in `[0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    turns: i64,
    rem: f64,
}

impl Phase {
    pub const ZERO: Phase = Phase { turns: 0, rem: 0.0 };
    /// Exactly one full turn.
    pub const TWO_PI: Phase = Phase { turns: 1, rem: 0.0 };

    /// Phase from a radian value.
    pub fn from_radians(chi: f64) -> Result<Self> {
        if !chi.is_finite() {
            return Err(Error::NonFinitePhase);
        }
        let mut q = (chi / TWO_PI_HI).floor();
        let mut r = q.mul_add(-TWO_PI_HI, chi);
        r = q.mul_add(-TWO_PI_LO, r);
        if r < 0.0 {
            r += TWO_PI_HI;
            q -= 1.0;
        } else if r >= TWO_PI_HI {
            r -= TWO_PI_HI;
            q += 1.0;
        }
        Ok(Phase {
            turns: q as i64,
            rem: r.clamp(0.0, TWO_PI_HI),
        })
    }

    /// The rational phase `2π·numer/denom`, split with integer arithmetic.
    ///
    /// `denom` must be non-zero.
    pub fn from_ratio(numer: i128, denom: u64) -> Self {
        assert!(denom > 0, "phase ratio with zero denominator");
        let m = denom as i128;
        let turns = numer.div_euclid(m);
        let r = numer.rem_euclid(m);
        Phase {
            turns: turns as i64,
            rem: r as f64 * TWO_PI_HI / denom as f64,
        }
    }

    /// The phase `2π·numer/denom` for a real, positive `denom`.
    ///
    /// The remainder `numer - t·denom` is formed with a single rounding, so
    /// the fractional turn is accurate to roughly `numer·2⁻⁵³/denom`.
    pub fn from_real_ratio(numer: u128, denom: f64) -> Result<Self> {
        if !(denom.is_finite() && denom > 0.0) {
            return Err(Error::NonFinitePhase);
        }
        let q = numer as f64;
        let mut t = (q / denom).floor();
        let mut r = t.mul_add(-denom, q);
        if r < 0.0 {
            r += denom;
            t -= 1.0;
        } else if r >= denom {
            r -= denom;
            t += 1.0;
        }
        let rem = (r / denom * TWO_PI_HI).clamp(0.0, TWO_PI_HI);
        Ok(Phase {
            turns: t as i64,
            rem: if rem >= TWO_PI_HI { 0.0 } else { rem },
        })
    }

    /// Whole turns.
    pub fn turns(&self) -> i64 {
        self.turns
    }

    /// Remainder in `[0, 2π)`.
    pub fn reduced(&self) -> f64 {
        self.rem
    }

    /// Unreduced value in radians. Lossy once `turns` is large.
    pub fn radians(&self) -> f64 {
        (self.turns as f64).mul_add(TWO_PI_HI, self.rem)
    }

    pub fn cos(&self) -> f64 {
        self.rem.cos()
    }

    pub fn sin(&self) -> f64 {
        self.rem.sin()
    }
}

impl Add for Phase {
    type Output = Phase;

    fn add(self, rhs: Phase) -> Phase {
        let mut turns = self.turns + rhs.turns;
        let mut rem = self.rem + rhs.rem;
        if rem >= TWO_PI_HI {
            rem = rem - TWO_PI_HI - TWO_PI_LO;
            turns += 1;
            if rem < 0.0 {
                rem = 0.0;
            }
        }
        Phase { turns, rem }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.radians())
    }
}

/// Fringe contrast, a multiplier on the interference term.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Visibility(f64);

impl Visibility {
    pub const IDEAL: Visibility = Visibility(1.0);

    pub fn new(v: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&v) {
            Ok(Visibility(v))
        } else {
            Err(Error::InvalidVisibility(v))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Visibility {
    fn default() -> Self {
        Visibility::IDEAL
    }
}

impl TryFrom<f64> for Visibility {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Visibility::new(v)
    }
}

impl From<Visibility> for f64 {
    fn from(v: Visibility) -> f64 {
        v.0
    }
}

/// Output port of a loop. `Bright` interferes constructively at `χ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Port {
    Bright,
    Dark,
}

impl Port {
    pub fn sign(self) -> f64 {
        match self {
            Port::Bright => 1.0,
            Port::Dark => -1.0,
        }
    }
}

/// Probability that a particle leaves through `port`: `½(1 ± v·cos χ)`.
pub fn detect_probability(chi: &Phase, port: Port, v: Visibility) -> f64 {
    port_probability(chi.cos(), port, v.value())
}

/// [`detect_probability`] on raw inputs, validating both.
pub fn detect_probability_checked(chi: f64, port: Port, v: f64) -> Result<f64> {
    let v = Visibility::new(v)?;
    let chi = Phase::from_radians(chi)?;
    Ok(detect_probability(&chi, port, v))
}

#[inline]
pub(crate) fn port_probability(cos_chi: f64, port: Port, v: f64) -> f64 {
    (0.5 * (1.0 + port.sign() * v * cos_chi)).clamp(0.0, 1.0)
}

/// Discrete phase-step program for one candidate divisor.
///
/// The phase is advanced by `2π/(n+d)` per increment and observed at
/// increment `j = k·N + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    n: u64,
    target: u64,
    deviation: f64,
    offset: u64,
}

impl PhaseSchedule {
    pub fn new(n: u64, target: u64, deviation: f64, offset: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "candidate divisor must be at least 1"));
        }
        if target < 2 {
            return Err(Error::InvalidTarget(target));
        }
        if !deviation.is_finite() || n as f64 + deviation <= 0.0 {
            return Err(Error::DegenerateSchedule { n, d: deviation });
        }
        Ok(PhaseSchedule {
            n,
            target,
            deviation,
            offset,
        })
    }

    /// Unperturbed schedule starting at increment zero.
    pub fn simple(n: u64, target: u64) -> Result<Self> {
        Self::new(n, target, 0.0, 0)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Increment index of the `k`-th observation.
    pub fn increment_at(&self, k: u64) -> u128 {
        k as u128 * self.target as u128 + self.offset as u128
    }

    /// Phase seen at the `k`-th observation, `2π(k·N + offset)/(n + d)`.
    pub fn phase_at_step(&self, k: u64) -> Result<Phase> {
        if k == 0 {
            return Err(invalid("k", "observations are numbered from 1"));
        }
        let j = self.increment_at(k);
        if self.deviation == 0.0 {
            Ok(Phase::from_ratio(j as i128, self.n))
        } else {
            Phase::from_real_ratio(j, self.n as f64 + self.deviation)
        }
    }
}
