//! Fourier coefficients from a linear phase ramp.
//!
//! The source intensity follows a positive periodic `f(t)` while the phase
//! shifter ramps as `χ(t) = 2πmt/τ + φ`. The count difference between the
//! two detectors over one period is then `c·v·∫₀^τ f(t) cos χ(t) dt`, the
//! `m`-th cosine coefficient for `φ = 0` and the sine coefficient for
//! `φ = -π/2`.
//!
//! Deterministic integrals use composite Simpson on a uniform grid of
//! [`DEFAULT_INTERVALS`] intervals (error `O(h⁴)`). Sampled signals are
//! treated as periodic and linearly interpolated; their own sample points
//! form the grid, doubled by midpoint interpolation when the sample count is
//! odd.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interferometer::Visibility;
use crate::rng::{stream_rng, uniform};

pub const DEFAULT_INTERVALS: usize = 4096;

/// Planck constant in J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Form {
    Closed(Evaluator),
    Samples(Vec<f64>),
}

/// A non-negative function with period `τ`.
#[derive(Clone)]
pub struct PeriodicSignal {
    form: Form,
    period: f64,
    name: String,
}

impl fmt::Debug for PeriodicSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicSignal")
            .field("name", &self.name)
            .field("period", &self.period)
            .finish()
    }
}

fn check_period(period: f64) -> Result<()> {
    if period.is_finite() && period > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            "period",
            format!("must be positive and finite, got {period}"),
        ))
    }
}

impl PeriodicSignal {
    pub fn closed_form<F>(name: &str, period: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_period(period)?;
        Ok(PeriodicSignal {
            form: Form::Closed(Arc::new(f)),
            period,
            name: name.to_string(),
        })
    }

    /// Uniform samples at `t_i = iτ/len`, `i = 0..len`.
    pub fn from_samples(period: f64, samples: Vec<f64>) -> Result<Self> {
        check_period(period)?;
        if samples.len() < 2 {
            return Err(Error::NonIntegrableSamples(samples.len()));
        }
        let step = period / samples.len() as f64;
        if let Some((i, &v)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::NegativeSignal {
                t: i as f64 * step,
                value: v,
            });
        }
        Ok(PeriodicSignal {
            form: Form::Samples(samples),
            period,
            name: "samples".to_string(),
        })
    }

    /// `a₀ + Σ_j a_j cos(2πjt/τ) + b_j sin(2πjt/τ)`, with `j` starting at 1.
    pub fn trig_polynomial(period: f64, a0: f64, cos: &[f64], sin: &[f64]) -> Result<Self> {
        let (cos, sin) = (cos.to_vec(), sin.to_vec());
        Self::closed_form("trig-polynomial", period, move |t| {
            let x = TAU * t / period;
            let mut acc = a0;
            for (j, a) in (1..).zip(&cos) {
                acc += a * (j as f64 * x).cos();
            }
            for (j, b) in (1..).zip(&sin) {
                acc += b * (j as f64 * x).sin();
            }
            acc
        })
    }

    /// Named test signals with period 1:
    /// `demo1 = 3 + 2cos(2πt) + sin(4πt)`, `demo2 = 3 + 2cos(2πt)`,
    /// `constant = 1`.
    pub fn builtin(name: &str) -> Result<Self> {
        let mut s = match name {
            "demo1" => Self::trig_polynomial(1.0, 3.0, &[2.0], &[0.0, 1.0])?,
            "demo2" => Self::trig_polynomial(1.0, 3.0, &[2.0], &[])?,
            "constant" => Self::closed_form("constant", 1.0, |_| 1.0)?,
            other => {
                return Err(invalid(
                    "signal",
                    format!("unknown built-in signal {other:?}"),
                ))
            }
        };
        s.name = name.to_string();
        Ok(s)
    }

    pub const BUILTINS: [&'static str; 3] = ["demo1", "demo2", "constant"];

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Value at `t`; sampled signals are wrapped and linearly interpolated.
    pub fn evaluate(&self, t: f64) -> f64 {
        match &self.form {
            Form::Closed(f) => f(t),
            Form::Samples(s) => {
                let len = s.len();
                let x = (t / self.period).rem_euclid(1.0) * len as f64;
                let i = (x.floor() as usize).min(len - 1);
                let frac = x - i as f64;
                s[i] + frac * (s[(i + 1) % len] - s[i])
            }
        }
    }

    /// Number of Simpson intervals used for this signal when no explicit
    /// resolution is requested.
    pub fn natural_intervals(&self) -> usize {
        match &self.form {
            Form::Closed(_) => DEFAULT_INTERVALS,
            Form::Samples(s) if s.len() % 2 == 0 => s.len(),
            Form::Samples(s) => 2 * s.len(),
        }
    }

    /// `(t_i, f(t_i))` for `t_i = iτ/intervals`, `i = 0..=intervals`,
    /// rejecting any negative value.
    fn grid(&self, intervals: usize) -> Result<Vec<(f64, f64)>> {
        let h = self.period / intervals as f64;
        (0..=intervals)
            .map(|i| {
                let t = i as f64 * h;
                let v = self.evaluate(t);
                if v >= 0.0 && v.is_finite() {
                    Ok((t, v))
                } else {
                    Err(Error::NegativeSignal { t, value: v })
                }
            })
            .collect()
    }

    /// `∫₀^τ f dt` by Simpson on the natural grid.
    pub fn integral(&self) -> Result<f64> {
        let intervals = self.natural_intervals();
        let values: Vec<f64> = self.grid(intervals)?.into_iter().map(|(_, v)| v).collect();
        Ok(simpson(&values, self.period / intervals as f64))
    }
}

/// Harmonic and offset of the phase ramp.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub m: u64,
    /// Constant phase added to the ramp: 0 for cosine, `-π/2` for sine.
    pub extra_phase: f64,
    pub visibility: Visibility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Cos,
    Sin,
}

impl RampSpec {
    pub fn new(m: u64, mode: Mode) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "harmonic index must be at least 1"));
        }
        Ok(RampSpec {
            m,
            extra_phase: match mode {
                Mode::Cos => 0.0,
                Mode::Sin => -FRAC_PI_2,
            },
            visibility: Visibility::IDEAL,
        })
    }

    pub fn cosine(m: u64) -> Result<Self> {
        Self::new(m, Mode::Cos)
    }

    pub fn sine(m: u64) -> Result<Self> {
        Self::new(m, Mode::Sin)
    }

    pub fn with_visibility(mut self, v: Visibility) -> Self {
        self.visibility = v;
        self
    }

    /// `cos χ(t)` with the whole turns of `mt/τ` removed first.
    fn cos_phase(&self, t: f64, period: f64) -> f64 {
        let turns = (self.m as f64 * t / period).rem_euclid(1.0);
        (TAU * turns + self.extra_phase).cos()
    }
}

/// Composite Simpson over equally spaced `values`; an odd interval count
/// falls back to the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let intervals = values.len().saturating_sub(1);
    if intervals == 0 {
        return 0.0;
    }
    if intervals % 2 == 1 {
        let inner: f64 = values[1..intervals].iter().sum();
        return h * (0.5 * (values[0] + values[intervals]) + inner);
    }
    let mut acc = values[0] + values[intervals];
    for (i, v) in values.iter().enumerate().take(intervals).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Instantaneous `I_A - I_B` rate `c·v·f(t)·cos χ(t)` at `steps + 1`
/// uniform times covering one closed period.
pub fn detector_difference_trace(
    signal: &PeriodicSignal,
    ramp: &RampSpec,
    c: f64,
    steps: usize,
) -> Result<Vec<(f64, f64)>> {
    if steps < 2 {
        return Err(invalid("steps", "need at least 2 steps"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid("c", "proportionality constant must be positive"));
    }
    let v = ramp.visibility.value();
    Ok(signal
        .grid(steps)?
        .into_iter()
        .map(|(t, f)| (t, c * v * f * ramp.cos_phase(t, signal.period)))
        .collect())
}

/// Simpson integral of a trace from [`detector_difference_trace`].
pub fn integrate_trace(trace: &[(f64, f64)]) -> f64 {
    if trace.len() < 2 {
        return 0.0;
    }
    let h = (trace[trace.len() - 1].0 - trace[0].0) / (trace.len() - 1) as f64;
    let values: Vec<f64> = trace.iter().map(|&(_, v)| v).collect();
    simpson(&values, h)
}

/// `c·v·∫₀^τ f(t) cos(2πmt/τ + φ) dt` on the signal's natural grid.
pub fn fourier_coefficient(signal: &PeriodicSignal, ramp: &RampSpec, c: f64) -> Result<f64> {
    fourier_coefficient_with(signal, ramp, c, signal.natural_intervals())
}

/// [`fourier_coefficient`] with an explicit number of Simpson intervals.
pub fn fourier_coefficient_with(
    signal: &PeriodicSignal,
    ramp: &RampSpec,
    c: f64,
    intervals: usize,
) -> Result<f64> {
    if matches!(signal.form, Form::Samples(_)) && intervals < 2 {
        return Err(Error::NonIntegrableSamples(intervals));
    }
    Ok(integrate_trace(&detector_difference_trace(
        signal, ramp, c, intervals,
    )?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub count_a: u64,
    pub count_b: u64,
    /// `∫₀^τ f dt`, the factor turning the click asymmetry into an integral.
    pub normalization: f64,
}

/// Particle-counting estimate of `fourier_coefficient(.., c = 1)`.
///
/// Arrival times are drawn from the piecewise-linear interpolant of `f` on
/// the natural grid; each particle then goes to A with probability
/// `½(1 + v cos χ(t))`. The estimate is `(A - B)/P · ∫f dt`.
pub fn stochastic_fourier(
    signal: &PeriodicSignal,
    ramp: &RampSpec,
    total_particles: u64,
    seed: u64,
) -> Result<StochasticEstimate> {
    if total_particles == 0 {
        return Err(invalid("total_particles", "must be at least 1"));
    }
    let intervals = signal.natural_intervals();
    let h = signal.period / intervals as f64;
    let grid = signal.grid(intervals)?;
    let values: Vec<f64> = grid.iter().map(|&(_, v)| v).collect();
    let normalization = simpson(&values, h);

    let mut cumulative = Vec::with_capacity(intervals);
    let mut acc = 0.0;
    for w in values.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cumulative.push(acc);
    }
    if acc <= 0.0 {
        return Err(invalid("signal", "signal integrates to zero"));
    }

    let v = ramp.visibility.value();
    let mut rng = stream_rng(seed, 0);
    let (mut count_a, mut count_b) = (0u64, 0u64);
    for _ in 0..total_particles {
        let target = uniform(&mut rng) * acc;
        let cell = cumulative
            .partition_point(|&c| c <= target)
            .min(intervals - 1);
        let before = if cell == 0 { 0.0 } else { cumulative[cell - 1] };
        let w = target - before;
        let (a, slope) = (values[cell], (values[cell + 1] - values[cell]) / h);
        let root = (a * a + 2.0 * slope * w).max(0.0).sqrt();
        let x = if a + root > 0.0 {
            2.0 * w / (a + root)
        } else {
            0.0
        };
        let t = grid[cell].0 + x.clamp(0.0, h);
        let p_a = 0.5 * (1.0 + v * ramp.cos_phase(t, signal.period));
        if uniform(&mut rng) < p_a {
            count_a += 1;
        } else {
            count_b += 1;
        }
    }
    let p = total_particles as f64;
    let mean = (count_a as f64 - count_b as f64) / p;
    Ok(StochasticEstimate {
        estimate: mean * normalization,
        stderr: normalization * ((1.0 - mean * mean).max(0.0) / p).sqrt(),
        count_a,
        count_b,
        normalization,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticityCheck {
    pub particle_energy: f64,
    /// `m/τ` in 1/s.
    pub ramp_rate: f64,
    /// `(m/τ)·h/E`.
    pub margin: f64,
    pub threshold: f64,
    pub valid: bool,
}

pub const DEFAULT_ADIABATIC_THRESHOLD: f64 = 1e-3;

/// Compare the ramp rate `m/τ` with `E/h`; valid iff the ratio is strictly
/// below `threshold`.
pub fn check_adiabaticity(
    energy: f64,
    m: u64,
    tau: f64,
    threshold: f64,
) -> Result<AdiabaticityCheck> {
    for (name, value) in [("energy", energy), ("tau", tau), ("threshold", threshold)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(invalid(name, format!("must be positive, got {value}")));
        }
    }
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    let ramp_rate = m as f64 / tau;
    let margin = ramp_rate * PLANCK / energy;
    Ok(AdiabaticityCheck {
        particle_energy: energy,
        ramp_rate,
        margin,
        threshold,
        valid: margin < threshold,
    })
}

/// Photon energy `hc/λ` in joules.
pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coefficient_examples() {
        let one = PeriodicSignal::builtin("constant").unwrap();
        assert_abs_diff_eq!(
            fourier_coefficient(&one, &RampSpec::cosine(1).unwrap(), 1.0).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        let demo = PeriodicSignal::builtin("demo1").unwrap();
        assert_abs_diff_eq!(
            fourier_coefficient(&demo, &RampSpec::cosine(1).unwrap(), 1.0).unwrap(),
            1.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            fourier_coefficient(&demo, &RampSpec::sine(2).unwrap(), 1.0).unwrap(),
            0.5,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            fourier_coefficient(&demo, &RampSpec::sine(1).unwrap(), 1.0).unwrap(),
            0.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn negative_signal_is_rejected() {
        let s = PeriodicSignal::closed_form("dip", 1.0, |t| (TAU * t).cos()).unwrap();
        assert!(matches!(
            fourier_coefficient(&s, &RampSpec::cosine(1).unwrap(), 1.0),
            Err(Error::NegativeSignal { .. })
        ));
        assert!(matches!(
            PeriodicSignal::from_samples(1.0, vec![1.0, -0.5, 2.0]),
            Err(Error::NegativeSignal { .. })
        ));
        assert_eq!(
            PeriodicSignal::from_samples(1.0, vec![1.0]).unwrap_err(),
            Error::NonIntegrableSamples(1)
        );
    }

    #[test]
    fn trace_examples() {
        let one = PeriodicSignal::builtin("constant").unwrap();
        let ramp = RampSpec::cosine(1).unwrap();
        let trace = detector_difference_trace(&one, &ramp, 2.5, 8).unwrap();
        assert_eq!(trace.len(), 9);
        assert_abs_diff_eq!(trace[0].1, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(trace[2].0, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(trace[2].1, 0.0, epsilon = 1e-15);
        assert!(detector_difference_trace(&one, &ramp, 1.0, 1).is_err());

        let demo = PeriodicSignal::builtin("demo1").unwrap();
        let trace = detector_difference_trace(&demo, &ramp, 1.0, DEFAULT_INTERVALS).unwrap();
        let direct = fourier_coefficient(&demo, &ramp, 1.0).unwrap();
        assert_abs_diff_eq!(integrate_trace(&trace), direct, epsilon = 1e-9);
    }

    #[test]
    fn sampled_signal_matches_closed_form() {
        let demo = PeriodicSignal::builtin("demo1").unwrap();
        for len in [256usize, 257] {
            let samples: Vec<f64> = (0..len)
                .map(|i| demo.evaluate(i as f64 / len as f64))
                .collect();
            let sampled = PeriodicSignal::from_samples(1.0, samples).unwrap();
            assert_eq!(sampled.natural_intervals() % 2, 0);
            let c = fourier_coefficient(&sampled, &RampSpec::cosine(1).unwrap(), 1.0).unwrap();
            // Linear interpolation error is O(h²).
            assert_abs_diff_eq!(c, 1.0, epsilon = 1e-3);
        }
        let s = PeriodicSignal::from_samples(2.0, vec![0.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.evaluate(0.5), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.evaluate(1.5), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.evaluate(2.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.25;
        let values: Vec<f64> = (0..=8).map(|i| (i as f64 * h).powi(3)).collect();
        assert_abs_diff_eq!(simpson(&values, h), 2f64.powi(4) / 4.0, epsilon = 1e-12);
    }

    #[test]
    fn stochastic_examples() {
        let one = PeriodicSignal::builtin("constant").unwrap();
        let ramp = RampSpec::cosine(1).unwrap();
        let r = stochastic_fourier(&one, &ramp, 100_000, 5).unwrap();
        assert!(r.estimate.abs() <= 4.0 * r.stderr);
        assert_eq!(r.count_a + r.count_b, 100_000);

        let again = stochastic_fourier(&one, &ramp, 100_000, 5).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn adiabaticity_examples() {
        let e = photon_energy(500e-9);
        assert_abs_diff_eq!(e, 3.972_891_714_297_857e-19, epsilon = 1e-30);
        let check = check_adiabaticity(e, 100, 1.0, DEFAULT_ADIABATIC_THRESHOLD).unwrap();
        assert_abs_diff_eq!(check.margin, 1.667_820_475_990_760_3e-13, epsilon = 1e-24);
        assert!(check.valid);

        let edge = check_adiabaticity(PLANCK, 1, 1.0, 1.0).unwrap();
        assert_eq!(edge.margin, 1.0);
        assert!(!edge.valid);

        let m1 = check_adiabaticity(e, 10, 1.0, 1.0).unwrap().margin;
        let m2 = check_adiabaticity(e, 20, 1.0, 1.0).unwrap().margin;
        assert_abs_diff_eq!(m2 / m1, 2.0, epsilon = 1e-12);
        assert!(check_adiabaticity(-1.0, 1, 1.0, 1.0).is_err());
        assert!(check_adiabaticity(e, 0, 1.0, 1.0).is_err());
    }
}
