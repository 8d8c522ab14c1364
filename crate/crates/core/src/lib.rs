//! Computing with a Mach-Zehnder interferometer.
//!
//! * [`interferometer`]: port probabilities of one loop and phase schedules.
//! * [`factor`]: the single-loop factor test, its tolerance to mis-set phase
//!   increments, and trial factorization.
//! * [`cascade`]: trees of loops testing several divisors per particle.
//! * [`stochastic`]: seeded particle-by-particle versions of the above.
//! * [`fourier`]: cosine and sine coefficients from a linear phase ramp.
//! * [`feasibility`]: coherence-length limits and step counts.

pub mod cascade;
pub mod error;
pub mod factor;
pub mod feasibility;
pub mod fourier;
pub mod interferometer;
pub mod rng;
pub mod stochastic;

pub use cascade::{
    build_fig2, table1_report, CascadeNode, CascadeSpec, DelayRule, DetectorTally, Horizon, Outlet,
    Table1Report,
};
pub use error::{Error, Result};
pub use factor::{
    classify_intensity, cosine_sum, factorize, run_factor_test, run_perturbed_test,
    tolerance_bound, Classification, FactorTestResult, Factorization,
};
pub use feasibility::{
    coherence_length, max_factorable, step_count, worst_case, FeasibilityReport, SourceSpec,
};
pub use fourier::{
    check_adiabaticity, fourier_coefficient, stochastic_fourier, AdiabaticityCheck, Mode,
    PeriodicSignal, RampSpec,
};
pub use interferometer::{detect_probability, Phase, PhaseSchedule, Port, Visibility};
pub use stochastic::{
    required_repetitions, simulate_cascade, simulate_single_loop, ClickRecord, TrialConfig,
};
