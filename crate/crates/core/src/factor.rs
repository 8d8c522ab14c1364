//! Single-loop factor test.
//!
//! The phase is stepped by `2π/n` once per particle and detector A is read
//! only every `N` steps. At the `k`-th reading the bright-port probability is
//! `½(1 + cos(2πkN/n))`, and summing `n` readings gives `n` when `n` divides
//! `N` and `n/2` otherwise, because the cosines then run over a full set of
//! `n`-th roots of unity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{port_probability, PhaseSchedule, Port, Visibility};

/// Outcome of reading a factor signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Factor,
    NonFactor,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Factor => "Factor",
            Classification::NonFactor => "NonFactor",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorTestResult {
    pub n: u64,
    pub target: u64,
    /// Expected number of particles registered at detector A.
    pub intensity: f64,
    pub classification: Classification,
    /// `N mod n`.
    pub remainder: u64,
    /// Number of observations summed.
    pub steps_used: u64,
    /// Phase settings stepped through, `n·N`.
    pub phase_increments: u128,
    pub visibility: f64,
    pub deviation: f64,
}

/// `Σ_{k=1}^{n} cos(2πLk/n)`, summed term by term on exactly reduced phases.
pub fn cosine_sum(l: u64, n: u64) -> Result<f64> {
    if n == 0 || l >= n {
        return Err(Error::OutOfRangeRemainder { l, n });
    }
    let mut sum = 0.0;
    let mut residue = 0u64;
    for _ in 0..n {
        residue = ((residue as u128 + l as u128) % n as u128) as u64;
        sum += crate::interferometer::Phase::from_ratio(residue as i128, n).cos();
    }
    Ok(sum)
}

/// Factor iff the intensity exceeds three quarters of the observation count,
/// the midpoint between the factor level `n` and the non-factor level `n/2`.
pub fn classify_intensity(intensity: f64, steps: u64) -> Classification {
    if intensity > 0.75 * steps as f64 {
        Classification::Factor
    } else {
        Classification::NonFactor
    }
}

fn check_candidate(target: u64, n: u64) -> Result<()> {
    if target < 2 {
        return Err(Error::InvalidTarget(target));
    }
    if n < 2 || n > target {
        return Err(Error::InvalidCandidate { n, big_n: target });
    }
    Ok(())
}

/// Bright-port probabilities at observations `k = 1..=observations`.
pub fn step_probabilities(
    schedule: &PhaseSchedule,
    v: Visibility,
    observations: u64,
) -> Result<Vec<f64>> {
    (1..=observations)
        .map(|k| {
            let chi = schedule.phase_at_step(k)?;
            Ok(port_probability(chi.cos(), Port::Bright, v.value()))
        })
        .collect()
}

fn run_schedule(schedule: PhaseSchedule, v: Visibility) -> Result<FactorTestResult> {
    let n = schedule.n();
    let target = schedule.target();
    let intensity: f64 = step_probabilities(&schedule, v, n)?.into_iter().sum();
    Ok(FactorTestResult {
        n,
        target,
        intensity,
        classification: classify_intensity(intensity, n),
        remainder: target % n,
        steps_used: n,
        phase_increments: n as u128 * target as u128,
        visibility: v.value(),
        deviation: schedule.deviation(),
    })
}

/// Test whether `n` divides `target` by summing `n` detector-A readings.
pub fn run_factor_test(target: u64, n: u64, v: Visibility) -> Result<FactorTestResult> {
    check_candidate(target, n)?;
    run_schedule(PhaseSchedule::simple(n, target)?, v)
}

/// Factor test with the phase increment mis-set to `2π/(n + d)`.
pub fn run_perturbed_test(target: u64, n: u64, d: f64) -> Result<FactorTestResult> {
    check_candidate(target, n)?;
    run_schedule(PhaseSchedule::new(n, target, d, 0)?, Visibility::IDEAL)
}

/// Largest tolerated relative increment error `|d/n|`, `1/(4N)`.
pub fn tolerance_bound(target: u64) -> f64 {
    1.0 / (4.0 * target as f64)
}

/// The deviation `d` at which the last of `n` readings falls a quarter turn
/// short of `2πN`, i.e. `2πnN/(n+d) = 2πN - π/2`.
pub fn quarter_turn_deviation(target: u64, n: u64) -> f64 {
    n as f64 / (4.0 * target as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivisorPair {
    pub n: u64,
    pub cofactor: u64,
    /// Whether `n·cofactor == N`; only false when a degraded visibility
    /// produced a false positive.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    pub target: u64,
    /// One result per candidate `2..=⌊√N⌋`, ordered by `n`.
    pub results: Vec<FactorTestResult>,
    pub factors: Vec<DivisorPair>,
    /// `Σ n·N` over all tested candidates.
    pub total_phase_increments: u128,
}

/// Trial factorization: run the factor test for every `n` in `2..=⌊√N⌋`.
///
/// Candidates are evaluated in parallel; the output is ordered by `n` and is
/// identical to a sequential run.
pub fn factorize(target: u64, v: Visibility) -> Result<Factorization> {
    if target < 2 {
        return Err(Error::InvalidTarget(target));
    }
    let limit = target.isqrt();
    let results = (2..=limit)
        .into_par_iter()
        .map(|n| run_factor_test(target, n, v))
        .collect::<Result<Vec<_>>>()?;
    let factors = results
        .iter()
        .filter(|r| r.classification == Classification::Factor)
        .map(|r| DivisorPair {
            n: r.n,
            cofactor: target / r.n,
            exact: target.is_multiple_of(r.n),
        })
        .collect();
    let total_phase_increments = results.iter().map(|r| r.phase_increments).sum();
    Ok(Factorization {
        target,
        results,
        factors,
        total_phase_increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn naive_cosine_sum(l: u64, n: u64) -> f64 {
        (1..=n)
            .map(|k| (2.0 * PI * l as f64 * k as f64 / n as f64).cos())
            .sum()
    }

    fn trial_division(target: u64) -> Vec<u64> {
        (2..=target.isqrt())
            .filter(|n| target.is_multiple_of(*n))
            .collect()
    }

    #[test]
    fn cosine_sum_examples() {
        assert_abs_diff_eq!(cosine_sum(0, 7).unwrap(), 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cosine_sum(3, 4).unwrap(), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(cosine_sum(1, 2).unwrap(), 0.0, epsilon = 1e-9);
        assert_eq!(
            cosine_sum(4, 4),
            Err(Error::OutOfRangeRemainder { l: 4, n: 4 })
        );
    }

    #[test]
    fn cosine_sum_matches_naive_summation() {
        for n in 1..60 {
            for l in 0..n {
                let expected = if l == 0 { n as f64 } else { 0.0 };
                assert_abs_diff_eq!(cosine_sum(l, n).unwrap(), expected, epsilon = 1e-9);
                assert_abs_diff_eq!(naive_cosine_sum(l, n), expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn factor_test_examples() {
        let r = run_factor_test(15, 3, Visibility::IDEAL).unwrap();
        assert_abs_diff_eq!(r.intensity, 3.0, epsilon = 1e-9);
        assert_eq!(r.classification, Classification::Factor);
        assert_eq!(r.remainder, 0);

        let r = run_factor_test(15, 4, Visibility::IDEAL).unwrap();
        assert_abs_diff_eq!(r.intensity, 2.0, epsilon = 1e-9);
        assert_eq!(r.classification, Classification::NonFactor);
        assert_eq!(r.remainder, 3);
        assert_eq!(r.steps_used, 4);
        assert_eq!(r.phase_increments, 60);

        let r = run_factor_test(6, 6, Visibility::IDEAL).unwrap();
        assert_abs_diff_eq!(r.intensity, 6.0, epsilon = 1e-9);
        assert_eq!(r.classification, Classification::Factor);
    }

    #[test]
    fn factor_test_rejects_candidates() {
        assert!(matches!(
            run_factor_test(15, 1, Visibility::IDEAL),
            Err(Error::InvalidCandidate { .. })
        ));
        assert!(matches!(
            run_factor_test(15, 16, Visibility::IDEAL),
            Err(Error::InvalidCandidate { .. })
        ));
        assert!(run_factor_test(1, 1, Visibility::IDEAL).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_intensity(5.0, 5), Classification::Factor);
        assert_eq!(classify_intensity(2.5, 5), Classification::NonFactor);
        assert_eq!(classify_intensity(4.09, 5), Classification::Factor);
        assert_eq!(classify_intensity(3.75, 5), Classification::NonFactor);
    }

    #[test]
    fn perturbed_examples() {
        let r = run_perturbed_test(20, 5, 0.0).unwrap();
        assert_abs_diff_eq!(r.intensity, 5.0, epsilon = 1e-9);

        // Frozen from a direct sum of ½(1 + cos(2πk·20/(5 + 5/79))), k = 1..5.
        let d = quarter_turn_deviation(20, 5);
        assert_abs_diff_eq!(d, 5.0 / 79.0, epsilon = 1e-15);
        let r = run_perturbed_test(20, 5, d).unwrap();
        assert_abs_diff_eq!(r.intensity, 3.828_437_878_668_743, epsilon = 1e-9);
        assert!(r.intensity < 5.0);
        assert_eq!(r.classification, Classification::Factor);
    }

    #[test]
    fn tolerance_examples() {
        assert_eq!(tolerance_bound(10_000_000), 2.5e-8);
        assert_eq!(tolerance_bound(1), 0.25);
        assert_abs_diff_eq!(tolerance_bound(25), 0.01, epsilon = 1e-18);
    }

    #[test]
    fn factorize_examples() {
        let f = factorize(35, Visibility::IDEAL).unwrap();
        assert_eq!(f.results.len(), 4);
        assert_eq!(
            f.factors,
            vec![DivisorPair {
                n: 5,
                cofactor: 7,
                exact: true
            }]
        );
        assert_eq!(f.total_phase_increments, (2..=5u128).map(|n| n * 35).sum());

        assert!(factorize(13, Visibility::IDEAL).unwrap().factors.is_empty());

        let f = factorize(16, Visibility::IDEAL).unwrap();
        let ns: Vec<u64> = f.factors.iter().map(|p| p.n).collect();
        assert_eq!(ns, vec![2, 4]);

        assert!(factorize(1, Visibility::IDEAL).is_err());
        assert!(factorize(3, Visibility::IDEAL).unwrap().results.is_empty());
    }

    #[test]
    fn factorize_matches_trial_division() {
        for target in 2..400u64 {
            let f = factorize(target, Visibility::IDEAL).unwrap();
            let ns: Vec<u64> = f.factors.iter().map(|p| p.n).collect();
            assert_eq!(ns, trial_division(target), "N = {target}");
        }
    }

    #[test]
    fn perturbed_degradation_at_large_n() {
        for n in [20u64, 50, 100] {
            let target = n * 7;
            let d = quarter_turn_deviation(target, n);
            let r = run_perturbed_test(target, n, d).unwrap();
            let level = n as f64 * (0.5 + 1.0 / PI);
            assert!((r.intensity - level).abs() <= 0.05 * level);
            assert_eq!(r.classification, Classification::Factor);
        }
    }

    #[test]
    fn small_loops_drop_below_threshold_at_the_bound() {
        // At d = n/(4N) the k = n phase is a quarter turn short; for n < 6 the
        // sum lands more than 5% of n under n(1/2 + 1/pi).
        for (n, m) in [(2u64, 4u64), (4, 199), (5, 50)] {
            let target = n * m;
            let r = run_perturbed_test(target, n, tolerance_bound(target) * n as f64).unwrap();
            assert!(r.intensity < n as f64 * (0.45 + 1.0 / PI));
        }
        let r = run_perturbed_test(8, 2, 0.0625).unwrap();
        assert_eq!(r.classification, Classification::NonFactor);
    }

    proptest! {
        #[test]
        fn intensity_decomposes(target in 2u64..5000, n_seed in 0u64..5000) {
            let n = 2 + n_seed % (target - 1);
            let r = run_factor_test(target, n, Visibility::IDEAL).unwrap();
            let cs = cosine_sum(target % n, n).unwrap();
            prop_assert!((r.intensity - (n as f64 / 2.0 + 0.5 * cs)).abs() <= 1e-9);
            prop_assert!(r.intensity >= 0.0 && r.intensity <= r.steps_used as f64 + 1e-9);
        }

        #[test]
        fn visibility_scales_interference(target in 2u64..3000, n_seed in 0u64..3000, v in 0.0f64..=1.0) {
            let n = 2 + n_seed % (target - 1);
            let ideal = run_factor_test(target, n, Visibility::IDEAL).unwrap().intensity;
            let faded = run_factor_test(target, n, Visibility::new(v).unwrap()).unwrap().intensity;
            let half = n as f64 / 2.0;
            prop_assert!(((faded - half) - v * (ideal - half)).abs() <= 1e-9);
        }

        #[test]
        fn degradation_within_tolerance(n in 6u64..200, m in 1u64..200, frac in 0.0f64..=1.0) {
            let target = (n * m).max(n);
            let d1 = frac * tolerance_bound(target) * n as f64;
            let r = run_perturbed_test(target, n, d1).unwrap();
            let floor = n as f64 * (0.5 + 1.0 / PI) - 0.05 * n as f64;
            prop_assert!(r.intensity >= floor);
            prop_assert!(r.intensity < n as f64 + 1e-9);
            prop_assert_eq!(r.classification, Classification::Factor);
        }

        #[test]
        fn degradation_is_monotone(n in 2u64..100, m in 1u64..100, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let target = n * m;
            let edge = quarter_turn_deviation(target, n);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let i_lo = run_perturbed_test(target, n, lo * edge).unwrap().intensity;
            let i_hi = run_perturbed_test(target, n, hi * edge).unwrap().intensity;
            prop_assert!(i_hi <= i_lo + 1e-9);
        }
    }
}
