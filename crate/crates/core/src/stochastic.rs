//! Particle-by-particle simulation of the factor test and of cascades.
//!
//! Each observation sends `repetitions_per_step` particles; with one
//! repetition this is the literal one-particle-per-step protocol.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cascade::CascadeSpec;
use crate::error::{invalid, Error, Result};
use crate::factor::{classify_intensity, step_probabilities, Classification};
use crate::interferometer::{PhaseSchedule, Visibility};
use crate::rng::{categorical, stream_rng, uniform, StreamRng, GENERATOR_ID};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub repetitions_per_step: u32,
    pub seed: u64,
    pub generator_id: String,
}

impl TrialConfig {
    pub fn new(repetitions_per_step: u32, seed: u64) -> Self {
        TrialConfig {
            repetitions_per_step,
            seed,
            generator_id: GENERATOR_ID.to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions_per_step == 0 {
            return Err(invalid("repetitions_per_step", "must be at least 1"));
        }
        if self.generator_id != GENERATOR_ID {
            return Err(Error::UnsupportedGenerator(self.generator_id.clone()));
        }
        Ok(())
    }

    fn rng(&self, trial: u64) -> StreamRng {
        stream_rng(self.seed, trial)
    }
}

/// Detector counts for one observation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub k: u64,
    /// Increment offset of this observation (`j = offset + kN`).
    pub offset: u64,
    pub counts: BTreeMap<String, u64>,
}

impl ClickRecord {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleLoopRun {
    pub target: u64,
    pub n: u64,
    pub trial: u64,
    pub config: TrialConfig,
    /// Clicks at A per repetition, summed over the `n` observations.
    pub empirical_intensity: f64,
    pub stderr: f64,
    pub expected_intensity: f64,
    pub classification: Classification,
    pub records: Vec<ClickRecord>,
}

fn bernoulli_count(rng: &mut StreamRng, p: f64, trials: u32) -> u64 {
    (0..trials).filter(|_| uniform(rng) < p).count() as u64
}

/// One seeded run of the single-loop test (trial 0).
pub fn simulate_single_loop(target: u64, n: u64, config: &TrialConfig) -> Result<SingleLoopRun> {
    simulate_single_loop_trial(target, n, config, 0)
}

/// Seeded run on random stream `trial`.
pub fn simulate_single_loop_trial(
    target: u64,
    n: u64,
    config: &TrialConfig,
    trial: u64,
) -> Result<SingleLoopRun> {
    config.validate()?;
    if target < 2 {
        return Err(Error::InvalidTarget(target));
    }
    if n < 2 || n > target {
        return Err(Error::InvalidCandidate { n, big_n: target });
    }
    let schedule = PhaseSchedule::simple(n, target)?;
    let probs = step_probabilities(&schedule, Visibility::IDEAL, n)?;
    let reps = config.repetitions_per_step;
    let mut rng = config.rng(trial);
    let mut records = Vec::with_capacity(probs.len());
    let mut clicks_a = 0u64;
    for (k, &p) in (1..).zip(&probs) {
        let a = bernoulli_count(&mut rng, p, reps);
        clicks_a += a;
        let counts = BTreeMap::from([("A".to_string(), a), ("B".to_string(), reps as u64 - a)]);
        records.push(ClickRecord {
            k,
            offset: 0,
            counts,
        });
    }
    let variance: f64 = probs.iter().map(|p| p * (1.0 - p)).sum();
    let empirical = clicks_a as f64 / reps as f64;
    Ok(SingleLoopRun {
        target,
        n,
        trial,
        config: config.clone(),
        empirical_intensity: empirical,
        stderr: (variance / reps as f64).sqrt(),
        expected_intensity: probs.iter().sum(),
        classification: classify_intensity(empirical, n),
        records,
    })
}

/// Independent trials `0..trials`, evaluated in parallel, ordered by trial.
pub fn run_trials(
    target: u64,
    n: u64,
    config: &TrialConfig,
    trials: u64,
) -> Result<Vec<SingleLoopRun>> {
    (0..trials)
        .into_par_iter()
        .map(|t| simulate_single_loop_trial(target, n, config, t))
        .collect()
}

/// Smallest repetition count `R = ⌈16 z²/n⌉` (at least 1) for which a
/// normal-approximation test separates the factor level `n` from `n/2` at
/// two-sided `confidence`, assuming the worst-case per-step variance ¼.
pub fn required_repetitions(n: u64, confidence: f64) -> Result<u64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(
            "confidence",
            format!("must lie in (0, 1), got {confidence}"),
        ));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let r = (16.0 * z * z / n as f64).ceil();
    Ok((r as u64).max(1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTally {
    pub detector: String,
    pub horizon: u64,
    /// Clicks per repetition summed over the detector's readings.
    pub empirical_intensity: f64,
    pub stderr: f64,
    pub expected_intensity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeRun {
    pub trial: u64,
    pub config: TrialConfig,
    pub tallies: Vec<EmpiricalTally>,
    pub records: Vec<ClickRecord>,
}

/// Route particles through a cascade (trial 0).
pub fn simulate_cascade(spec: &CascadeSpec, config: &TrialConfig) -> Result<CascadeRun> {
    simulate_cascade_trial(spec, config, 0)
}

/// Route particles through a cascade on random stream `trial`.
///
/// Detectors are read in groups sharing an observation offset. At each
/// reading of a group every particle lands on exactly one detector of the
/// whole network; only the group's own detectors are tallied.
pub fn simulate_cascade_trial(
    spec: &CascadeSpec,
    config: &TrialConfig,
    trial: u64,
) -> Result<CascadeRun> {
    config.validate()?;
    let reps = config.repetitions_per_step;
    let count = spec.detector_count();
    let labels: Vec<String> = (0..count)
        .map(|i| spec.detector_label(i).to_string())
        .collect();
    let horizons: Vec<u64> = (0..count).map(|i| spec.horizon_at(i)).collect();
    let mut clicks = vec![0u64; count];
    let mut variance = vec![0.0f64; count];
    let mut records = Vec::new();
    let mut rng = config.rng(trial);
    for (offset, members) in spec.reading_groups() {
        let readings = members.iter().map(|&i| horizons[i]).max().unwrap_or(0);
        for k in 1..=readings {
            let increment = offset + k * spec.target();
            let dist = spec.increment_distribution(increment);
            let mut counts = vec![0u64; count];
            for _ in 0..reps {
                counts[categorical(&mut rng, &dist)] += 1;
            }
            for &i in &members {
                if k <= horizons[i] {
                    clicks[i] += counts[i];
                    variance[i] += dist[i] * (1.0 - dist[i]);
                }
            }
            records.push(ClickRecord {
                k,
                offset,
                counts: labels.iter().cloned().zip(counts).collect(),
            });
        }
    }
    let tallies = (0..count)
        .map(|i| {
            let expected = spec.accumulate(&labels[i])?.expected_intensity;
            Ok(EmpiricalTally {
                detector: labels[i].clone(),
                horizon: horizons[i],
                empirical_intensity: clicks[i] as f64 / reps as f64,
                stderr: (variance[i] / reps as f64).sqrt(),
                expected_intensity: expected,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CascadeRun {
        trial,
        config: config.clone(),
        tallies,
        records,
    })
}

/// Click records as CSV: a `# seed=… generator_id=…` line, then
/// `k,detector,count,offset` rows in record order and detector-label order.
pub fn write_click_csv<W: Write>(
    out: W,
    config: &TrialConfig,
    records: &[ClickRecord],
) -> std::io::Result<()> {
    let mut out = out;
    writeln!(
        out,
        "# seed={} generator_id={}",
        config.seed, config.generator_id
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "detector", "count", "offset"])?;
    for r in records {
        for (detector, count) in &r.counts {
            w.write_record([
                r.k.to_string(),
                detector.clone(),
                count.to_string(),
                r.offset.to_string(),
            ])?;
        }
    }
    w.flush()
}
