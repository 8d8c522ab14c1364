//! Coherence-length limits and step counts.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Light source: central wavelength and the standard deviation of its
/// wavelength distribution, both in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub wavelength: f64,
    pub bandwidth: f64,
}

impl SourceSpec {
    /// Requires `0 < Δλ ≤ λ`. `Δλ = λ` is accepted as the degenerate limit
    /// where the coherence length shrinks to one wavelength.
    pub fn new(wavelength: f64, bandwidth: f64) -> Result<Self> {
        let ok = wavelength.is_finite()
            && bandwidth.is_finite()
            && wavelength > 0.0
            && bandwidth > 0.0
            && bandwidth <= wavelength;
        if ok {
            Ok(SourceSpec {
                wavelength,
                bandwidth,
            })
        } else {
            Err(Error::InvalidBandwidth {
                lambda: wavelength,
                dlambda: bandwidth,
            })
        }
    }

    /// Source with the bandwidth that yields coherence length `coherence`.
    pub fn from_coherence(wavelength: f64, coherence: f64) -> Result<Self> {
        if !(coherence.is_finite() && coherence > 0.0) {
            return Err(invalid(
                "coherence",
                format!("must be positive, got {coherence}"),
            ));
        }
        Self::new(wavelength, wavelength * wavelength / coherence)
    }

    pub fn is_degenerate(&self) -> bool {
        self.bandwidth >= self.wavelength
    }
}

/// `C = λ²/Δλ`.
pub fn coherence_length(src: &SourceSpec) -> f64 {
    src.wavelength * src.wavelength / src.bandwidth
}

/// Largest `N` whose maximal path difference `Nλ` fits in the coherence
/// length: `⌊C/λ⌋ = ⌊λ/Δλ⌋`.
///
/// A quotient within a relative 1e-12 of an integer is snapped to it, so
/// that decimal inputs such as `λ = 500e-9`, `C = 5` give exactly 10⁷.
pub fn max_factorable(src: &SourceSpec) -> u64 {
    let ratio = src.wavelength / src.bandwidth;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= 1e-12 * ratio {
        nearest
    } else {
        ratio.floor()
    };
    (n as u64).max(1)
}

/// Phase settings needed to test candidate `n`: `n·N`.
pub fn step_count(n: u64, target: u64) -> Result<u128> {
    if n < 2 || target < n {
        return Err(Error::InvalidCandidate { n, big_n: target });
    }
    Ok(n as u128 * target as u128)
}

/// Cost of the largest candidate `⌊√N⌋`, `⌊√N⌋·N`, which grows like `N^{3/2}`.
pub fn worst_case(target: u64) -> u128 {
    target.isqrt() as u128 * target as u128
}

/// Growth exponent of [`worst_case`].
pub const WORST_CASE_EXPONENT: f64 = 1.5;

/// Fringe visibility under a Gaussian coherence envelope,
/// `exp(-½(Nλ/C)²)`. An exploratory soft limit, not derived from a lineshape.
pub fn gaussian_envelope_visibility(src: &SourceSpec, target: u64) -> f64 {
    let x = target as f64 * src.wavelength / coherence_length(src);
    (-0.5 * x * x).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub source: SourceSpec,
    pub coherence_length: f64,
    pub max_n: u64,
    /// `⌊√N⌋·N` at `N = max_n`.
    pub worst_case_steps: u128,
    pub worst_case_exponent: f64,
    pub degenerate: bool,
}

impl FeasibilityReport {
    pub fn new(src: SourceSpec) -> Self {
        let max_n = max_factorable(&src);
        FeasibilityReport {
            source: src,
            coherence_length: coherence_length(&src),
            max_n,
            worst_case_steps: worst_case(max_n),
            worst_case_exponent: WORST_CASE_EXPONENT,
            degenerate: src.is_degenerate(),
        }
    }

    pub fn steps_for_candidate(&self, n: u64, target: u64) -> Result<u128> {
        step_count(n, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn coherence_examples() {
        let src = SourceSpec::new(500e-9, 5e-14).unwrap();
        assert_relative_eq!(coherence_length(&src), 5.0, max_relative = 1e-12);
        let src = SourceSpec::new(500e-9, 500e-9 * 1e-3).unwrap();
        assert_relative_eq!(coherence_length(&src), 0.5e-3, max_relative = 1e-12);
        let src = SourceSpec::new(500e-9, 500e-9).unwrap();
        assert_relative_eq!(coherence_length(&src), 500e-9, max_relative = 1e-12);
        assert!(src.is_degenerate());
        assert!(SourceSpec::new(500e-9, 0.0).is_err());
        assert!(SourceSpec::new(500e-9, 600e-9).is_err());
        assert!(SourceSpec::new(-1.0, 1e-9).is_err());
    }

    #[test]
    fn max_factorable_examples() {
        assert_eq!(
            max_factorable(&SourceSpec::from_coherence(500e-9, 5.0).unwrap()),
            10_000_000
        );
        assert_eq!(
            max_factorable(&SourceSpec::new(500e-9, 5e-14).unwrap()),
            10_000_000
        );
        assert_eq!(
            max_factorable(&SourceSpec::from_coherence(500e-9, 5e-6).unwrap()),
            10
        );
        assert_eq!(
            max_factorable(&SourceSpec::from_coherence(500e-9, 500e-9).unwrap()),
            1
        );
    }

    #[test]
    fn step_examples() {
        assert_eq!(step_count(5, 35).unwrap(), 175);
        assert!(step_count(1, 35).is_err());
        assert!(step_count(36, 35).is_err());
        assert_eq!(worst_case(10_000), 1_000_000);
        let ratio = worst_case(40_000) as f64 / worst_case(10_000) as f64;
        assert!((7.8..=8.0).contains(&ratio));
    }

    #[test]
    fn envelope_is_a_visibility() {
        let src = SourceSpec::from_coherence(500e-9, 5.0).unwrap();
        assert_eq!(gaussian_envelope_visibility(&src, 0), 1.0);
        let at_limit = gaussian_envelope_visibility(&src, 10_000_000);
        assert_relative_eq!(at_limit, (-0.5f64).exp(), max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn scaling_in_lambda_and_bandwidth(l in 1e-7f64..1e-5, frac in 1e-9f64..1.0, s in 0.5f64..2.0) {
            let base = SourceSpec::new(l, l * frac * 0.5).unwrap();
            let c0 = coherence_length(&base);
            let wider = SourceSpec::new(l, l * frac * 0.5 * s).unwrap();
            prop_assert!((coherence_length(&wider) * s / c0 - 1.0).abs() < 1e-12);
            let longer = SourceSpec::new(l * s, l * frac * 0.5).unwrap();
            prop_assert!((coherence_length(&longer) / (s * s * c0) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn max_n_brackets_coherence(l in 1e-7f64..1e-5, frac in 1e-8f64..1.0) {
            let src = SourceSpec::new(l, l * frac).unwrap();
            let c = coherence_length(&src);
            let n = max_factorable(&src) as f64;
            prop_assert!(n * l <= c * (1.0 + 1e-12));
            prop_assert!(c < (n + 1.0) * l);
        }

        #[test]
        fn worst_case_tracks_three_halves(target in 100u64..10_000_000) {
            let r = worst_case(target) as f64 / (target as f64).powf(1.5);
            prop_assert!((0.9..=1.0).contains(&r));
        }
    }
}
