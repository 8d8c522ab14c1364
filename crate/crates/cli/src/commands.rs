use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use mzi::cascade::TABLE_I;
use mzi::factor::DivisorPair;
use mzi::feasibility::{gaussian_envelope_visibility, WORST_CASE_EXPONENT};
use mzi::fourier::{
    detector_difference_trace, photon_energy, StochasticEstimate, DEFAULT_ADIABATIC_THRESHOLD,
};
use mzi::stochastic::{simulate_cascade, write_click_csv, EmpiricalTally};
use mzi::{
    build_fig2, check_adiabaticity, factorize, fourier_coefficient, required_repetitions,
    run_factor_test, run_perturbed_test, simulate_single_loop, stochastic_fourier, table1_report,
    tolerance_bound, worst_case, CascadeSpec, Classification, DelayRule, DetectorTally,
    FactorTestResult, FeasibilityReport, Horizon, Mode, PeriodicSignal, RampSpec, SourceSpec,
    TrialConfig, Visibility,
};

use crate::args::{CascadeArgs, Command, FactorArgs, FourierArgs, LimitsArgs, TestArgs};
use crate::format::{short, sig9, table};

/// Default particles per reading for stochastic cascades.
const CASCADE_REPS: u32 = 1000;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Io(m) => m,
        }
    }
}

impl From<mzi::Error> for Failure {
    fn from(e: mzi::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// Where output files land.
#[derive(Clone, Debug, Default)]
pub struct Paths {
    /// Replay target: every output goes here under its own file name.
    pub redirect: Option<PathBuf>,
}

impl Paths {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if let Some(dir) = &self.redirect {
            return dir.join(p.file_name().unwrap_or(p.as_os_str()));
        }
        match std::env::var_os("MZI_OUT_DIR") {
            Some(dir) if p.is_relative() => PathBuf::from(dir).join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn write(&self, p: &Path, bytes: &[u8]) -> Result<PathBuf, Failure> {
        let target = self.resolve(p);
        if let Some(parent) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
        }
        fs::write(&target, bytes).map_err(|e| io_failure(&target, e))?;
        Ok(target)
    }
}

/// A command's result in every output format.
pub struct Report {
    pub text: String,
    pub csv: String,
    pub result: Value,
    pub seed: Option<u64>,
    /// Secondary files written by the command, as given on the command line.
    pub extra_outputs: Vec<PathBuf>,
}

pub fn execute(cmd: &Command, paths: &Paths) -> Result<Report, Failure> {
    match cmd {
        Command::Test(a) => cmd_test(a, paths),
        Command::Factor(a) => cmd_factor(a),
        Command::Cascade(a) => cmd_cascade(a, paths),
        Command::Fourier(a) => cmd_fourier(a, paths),
        Command::Limits(a) => cmd_limits(a),
        Command::Replay(_) => unreachable!("replay is dispatched by main"),
    }
}

fn csv_string<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn write_clicks(
    paths: &Paths,
    file: &Path,
    cfg: &TrialConfig,
    records: &[mzi::ClickRecord],
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    write_click_csv(&mut buf, cfg, records).map_err(|e| io_failure(file, e))?;
    paths.write(file, &buf)?;
    Ok(())
}

#[derive(Serialize)]
struct StochasticSummary {
    repetitions_per_step: u32,
    seed: u64,
    generator_id: String,
    empirical_intensity: f64,
    stderr: f64,
    classification: Classification,
}

#[derive(Serialize)]
struct Tolerance {
    relative_deviation: f64,
    bound: f64,
    within: bool,
}

#[derive(Serialize)]
struct TestReport {
    #[serde(flatten)]
    expected: FactorTestResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<Tolerance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stochastic: Option<StochasticSummary>,
}

#[derive(Serialize)]
struct TestRow {
    target: u64,
    n: u64,
    remainder: u64,
    intensity: f64,
    classification: Classification,
    steps_used: u64,
    phase_increments: u128,
    visibility: f64,
    deviation: f64,
    empirical_intensity: Option<f64>,
    stderr: Option<f64>,
    empirical_classification: Option<Classification>,
    repetitions_per_step: Option<u32>,
    seed: Option<u64>,
}

fn cmd_test(a: &TestArgs, paths: &Paths) -> Result<Report, Failure> {
    let v = Visibility::new(a.visibility)?;
    let expected = match a.deviation {
        Some(d) => run_perturbed_test(a.target, a.n, d)?,
        None => run_factor_test(a.target, a.n, v)?,
    };
    let tolerance = a.deviation.map(|d| {
        let bound = tolerance_bound(a.target);
        let rel = (d / a.n as f64).abs();
        Tolerance {
            relative_deviation: rel,
            bound,
            within: rel <= bound,
        }
    });

    let mut extra_outputs = Vec::new();
    let stochastic = if a.mc.stochastic {
        let reps = match a.mc.reps {
            Some(r) => r,
            None => required_repetitions(a.n, 0.999)? as u32,
        };
        let cfg = TrialConfig::new(reps, a.mc.seed);
        let run = simulate_single_loop(a.target, a.n, &cfg)?;
        if let Some(file) = &a.mc.clicks {
            write_clicks(paths, file, &cfg, &run.records)?;
            extra_outputs.push(file.clone());
        }
        Some(StochasticSummary {
            repetitions_per_step: reps,
            seed: cfg.seed,
            generator_id: cfg.generator_id,
            empirical_intensity: run.empirical_intensity,
            stderr: run.stderr,
            classification: run.classification,
        })
    } else {
        None
    };

    let mut text = String::new();
    writeln!(text, "N = {}, n = {}", a.target, a.n).unwrap();
    writeln!(text, "remainder L = {}", expected.remainder).unwrap();
    if let Some(t) = &tolerance {
        writeln!(
            text,
            "deviation d = {}, |d/n| = {} (bound 1/(4N) = {}, {})",
            expected.deviation,
            short(t.relative_deviation),
            short(t.bound),
            if t.within { "within" } else { "exceeded" }
        )
        .unwrap();
    }
    writeln!(
        text,
        "intensity I = {} over {} readings",
        sig9(expected.intensity),
        expected.steps_used
    )
    .unwrap();
    writeln!(text, "classification: {}", expected.classification).unwrap();
    if let Some(s) = &stochastic {
        writeln!(
            text,
            "stochastic: {} particles per reading, seed {}, generator {}",
            s.repetitions_per_step, s.seed, s.generator_id
        )
        .unwrap();
        writeln!(
            text,
            "empirical I = {} +/- {}",
            sig9(s.empirical_intensity),
            short(s.stderr)
        )
        .unwrap();
        writeln!(text, "empirical classification: {}", s.classification).unwrap();
    }
    writeln!(text, "phase increments: {}", expected.phase_increments).unwrap();

    let row = TestRow {
        target: expected.target,
        n: expected.n,
        remainder: expected.remainder,
        intensity: expected.intensity,
        classification: expected.classification,
        steps_used: expected.steps_used,
        phase_increments: expected.phase_increments,
        visibility: expected.visibility,
        deviation: expected.deviation,
        empirical_intensity: stochastic.as_ref().map(|s| s.empirical_intensity),
        stderr: stochastic.as_ref().map(|s| s.stderr),
        empirical_classification: stochastic.as_ref().map(|s| s.classification),
        repetitions_per_step: stochastic.as_ref().map(|s| s.repetitions_per_step),
        seed: stochastic.as_ref().map(|s| s.seed),
    };
    let seed = stochastic.as_ref().map(|s| s.seed);
    let report = TestReport {
        expected,
        tolerance,
        stochastic,
    };
    Ok(Report {
        text,
        csv: csv_string(&[row]),
        result: to_value(&report),
        seed,
        extra_outputs,
    })
}

/// Prime factors by repeatedly splitting off the smallest detected divisor.
fn prime_factors(target: u64, v: Visibility) -> Result<Vec<u64>, Failure> {
    let mut out = Vec::new();
    let mut rest = target;
    while rest >= 2 {
        let f = factorize(rest, v)?;
        match f.factors.iter().find(|p| p.exact) {
            Some(p) => {
                out.push(p.n);
                rest = p.cofactor;
            }
            None => {
                out.push(rest);
                break;
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct FactorRow {
    n: u64,
    remainder: u64,
    intensity: f64,
    classification: Classification,
    cofactor: Option<u64>,
    phase_increments: u128,
}

fn cmd_factor(a: &FactorArgs) -> Result<Report, Failure> {
    let v = Visibility::new(a.visibility)?;
    let f = factorize(a.target, v)?;
    let primes = if a.full {
        Some(prime_factors(a.target, v)?)
    } else {
        None
    };
    let cofactor = |n: u64| -> Option<&DivisorPair> { f.factors.iter().find(|p| p.n == n) };

    let mut text = String::new();
    let limit = a.target.isqrt();
    if limit < 2 {
        writeln!(
            text,
            "N = {}: no candidates below the square root",
            a.target
        )
        .unwrap();
    } else {
        writeln!(text, "N = {}: testing n = 2..{}", a.target, limit).unwrap();
        let rows: Vec<Vec<String>> = f
            .results
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.remainder.to_string(),
                    sig9(r.intensity),
                    r.classification.to_string(),
                    cofactor(r.n).map_or(String::new(), |p| p.cofactor.to_string()),
                ]
            })
            .collect();
        text.push_str(&table(
            &["n", "L", "intensity", "classification", "cofactor"],
            &rows,
        ));
    }
    if f.factors.is_empty() {
        writeln!(text, "no divisors found: {} is prime", a.target).unwrap();
    } else {
        let pairs: Vec<String> = f
            .factors
            .iter()
            .map(|p| {
                let mark = if p.exact { "" } else { " (inexact)" };
                format!("{} x {}{mark}", p.n, p.cofactor)
            })
            .collect();
        writeln!(text, "divisor pairs: {}", pairs.join(", ")).unwrap();
    }
    if let Some(primes) = &primes {
        let s: Vec<String> = primes.iter().map(u64::to_string).collect();
        writeln!(text, "prime factorization: {}", s.join(" x ")).unwrap();
    }
    writeln!(text, "total phase increments: {}", f.total_phase_increments).unwrap();

    let rows: Vec<FactorRow> = f
        .results
        .iter()
        .map(|r| FactorRow {
            n: r.n,
            remainder: r.remainder,
            intensity: r.intensity,
            classification: r.classification,
            cofactor: cofactor(r.n).map(|p| p.cofactor),
            phase_increments: r.phase_increments,
        })
        .collect();
    let mut result = to_value(&f);
    if let Some(primes) = primes {
        result["prime_factors"] = json!(primes);
    }
    Ok(Report {
        text,
        csv: csv_string(&rows),
        result,
        seed: None,
        extra_outputs: Vec::new(),
    })
}

#[derive(Serialize)]
struct CascadeRow {
    detector: String,
    offset: u64,
    horizon: u64,
    expected_intensity: f64,
    units_of: f64,
    intensity_units: f64,
    predicted_units: f64,
    deviation_units: f64,
    exact: bool,
    empirical_intensity: Option<f64>,
    stderr: Option<f64>,
}

#[derive(Serialize)]
struct LoopRow {
    label: String,
    n: u64,
    start_delay: u64,
}

#[derive(Serialize)]
struct CascadeStochastic {
    repetitions_per_step: u32,
    seed: u64,
    generator_id: String,
    tallies: Vec<EmpiricalTally>,
}

fn load_spec(a: &CascadeArgs) -> Result<CascadeSpec, Failure> {
    let mut spec = if let Some(v) = &a.fig2 {
        let ns: [u64; 7] = v[1..]
            .try_into()
            .map_err(|_| Failure::Validation("--fig2 takes N and seven divisors".into()))?;
        build_fig2(v[0], ns, DelayRule::DarkPort)?
    } else if let Some(path) = &a.spec {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        CascadeSpec::from_json(&text)
            .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?
    } else {
        unreachable!("clap requires a network source")
    };
    if let Some(h) = a.horizon {
        spec = spec.with_horizon(h);
    }
    if a.no_delay {
        spec = spec.without_delays();
    }
    Ok(spec)
}

fn cmd_cascade(a: &CascadeArgs, paths: &Paths) -> Result<Report, Failure> {
    if let Some(v) = &a.table1 {
        if a.mc.stochastic {
            return Err(Failure::Validation(
                "--stochastic is not available with --table1".into(),
            ));
        }
        return cascade_table1(v, a.horizon.unwrap_or_default());
    }
    let spec = load_spec(a)?;
    let tallies: Vec<DetectorTally> = spec.accumulate_all();
    let loops: Vec<LoopRow> = spec
        .loops()
        .map(|(label, n, start_delay)| LoopRow {
            label: label.to_string(),
            n,
            start_delay,
        })
        .collect();

    let mut extra_outputs = Vec::new();
    let stochastic = if a.mc.stochastic {
        let cfg = TrialConfig::new(a.mc.reps.unwrap_or(CASCADE_REPS), a.mc.seed);
        let run = simulate_cascade(&spec, &cfg)?;
        if let Some(file) = &a.mc.clicks {
            write_clicks(paths, file, &cfg, &run.records)?;
            extra_outputs.push(file.clone());
        }
        Some(CascadeStochastic {
            repetitions_per_step: cfg.repetitions_per_step,
            seed: cfg.seed,
            generator_id: cfg.generator_id,
            tallies: run.tallies,
        })
    } else {
        None
    };
    let empirical = |d: &str| {
        stochastic
            .as_ref()
            .and_then(|s| s.tallies.iter().find(|t| t.detector == d))
    };

    let mut text = String::new();
    writeln!(text, "N = {}, horizon {}", spec.target(), spec.horizon()).unwrap();
    let loop_rows: Vec<Vec<String>> = loops
        .iter()
        .map(|l| vec![l.label.clone(), l.n.to_string(), l.start_delay.to_string()])
        .collect();
    text.push_str(&table(&["loop", "n", "start"], &loop_rows));
    let mut header = vec![
        "detector",
        "offset",
        "readings",
        "intensity",
        "unit",
        "I/unit",
        "predicted",
        "deviation",
        "exact",
    ];
    if stochastic.is_some() {
        header.extend(["empirical", "stderr"]);
    }
    let rows: Vec<Vec<String>> = tallies
        .iter()
        .map(|t| {
            let mut row = vec![
                t.detector.clone(),
                t.observation_offset.to_string(),
                t.horizon.to_string(),
                sig9(t.expected_intensity),
                short(t.units_of),
                sig9(t.intensity_units),
                short(t.predicted_units),
                short(t.deviation_units),
                if t.exact_expectation { "yes" } else { "no" }.to_string(),
            ];
            if let Some(e) = empirical(&t.detector) {
                row.push(sig9(e.empirical_intensity));
                row.push(short(e.stderr));
            }
            row
        })
        .collect();
    text.push('\n');
    text.push_str(&table(&header, &rows));
    for t in tallies.iter().filter(|t| !t.resonances.is_empty()) {
        let sets: Vec<String> = t.resonances.iter().map(|r| r.join("+")).collect();
        writeln!(text, "{}: resonant loops {}", t.detector, sets.join(", ")).unwrap();
    }
    if let Some(s) = &stochastic {
        writeln!(
            text,
            "stochastic: {} particles per reading, seed {}, generator {}",
            s.repetitions_per_step, s.seed, s.generator_id
        )
        .unwrap();
    }

    let csv_rows: Vec<CascadeRow> = tallies
        .iter()
        .map(|t| CascadeRow {
            detector: t.detector.clone(),
            offset: t.observation_offset,
            horizon: t.horizon,
            expected_intensity: t.expected_intensity,
            units_of: t.units_of,
            intensity_units: t.intensity_units,
            predicted_units: t.predicted_units,
            deviation_units: t.deviation_units,
            exact: t.exact_expectation,
            empirical_intensity: empirical(&t.detector).map(|e| e.empirical_intensity),
            stderr: empirical(&t.detector).map(|e| e.stderr),
        })
        .collect();
    let spec_value: Value = serde_json::from_str(&spec.to_json()).expect("spec json parses");
    let mut result = json!({
        "kind": "network",
        "target": spec.target(),
        "horizon": spec.horizon(),
        "spec": spec_value,
        "loops": loops,
        "detectors": tallies,
    });
    if let Some(s) = &stochastic {
        result["stochastic"] = to_value(s);
    }
    Ok(Report {
        text,
        csv: csv_string(&csv_rows),
        result,
        seed: stochastic.as_ref().map(|s| s.seed),
        extra_outputs,
    })
}

#[derive(Serialize)]
struct Table1Row {
    quantity: &'static str,
    measured: f64,
    tabulated: f64,
    deviation: f64,
}

fn cascade_table1(v: &[u64], horizon: Horizon) -> Result<Report, Failure> {
    let r = table1_report(v[0], v[1], v[2], v[3], horizon)?;
    let row_no = TABLE_I
        .iter()
        .position(|(m, _)| *m == r.marks)
        .map_or(0, |i| i + 1);
    let mark = |b: bool| if b { "factor" } else { "non-factor" };
    let mut text = String::new();
    writeln!(
        text,
        "N = {}, n1 = {}, n2 = {}, n4 = {}, K = {} readings, unit K/8",
        r.target, r.ns[0], r.ns[1], r.ns[2], r.horizon
    )
    .unwrap();
    writeln!(
        text,
        "n1 {}, n2 {}, n4 {} (row {row_no})",
        mark(r.marks[0]),
        mark(r.marks[1]),
        mark(r.marks[2])
    )
    .unwrap();
    let names = ["I_A", "I_B", "I_C+I_D"];
    let rows: Vec<Vec<String>> = (0..3)
        .map(|i| {
            vec![
                names[i].to_string(),
                sig9(r.measured[i]),
                short(r.tabulated[i]),
                short(r.deviation[i]),
            ]
        })
        .collect();
    text.push_str(&table(
        &["quantity", "measured", "tabulated", "deviation"],
        &rows,
    ));
    for set in &r.resonances {
        writeln!(text, "resonant loops {}", set.join("+")).unwrap();
    }
    let csv_rows: Vec<Table1Row> = (0..3)
        .map(|i| Table1Row {
            quantity: names[i],
            measured: r.measured[i],
            tabulated: r.tabulated[i],
            deviation: r.deviation[i],
        })
        .collect();
    let mut result = to_value(&r);
    result["kind"] = json!("table1");
    result["row"] = json!(row_no);
    Ok(Report {
        text,
        csv: csv_string(&csv_rows),
        result,
        seed: None,
        extra_outputs: Vec::new(),
    })
}

fn load_samples(path: &Path, period: Option<f64>) -> Result<PeriodicSignal, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let bad = |msg: String| Failure::Validation(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name:?}")))
    };
    let (ti, fi) = (column("t")?, column("f")?);
    let mut ts = Vec::new();
    let mut fs_ = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |i: usize, name: &str| {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|x| x.is_finite())
                .ok_or_else(|| bad(format!("line {line}: column {name} is not a number")))
        };
        ts.push(parse(ti, "t")?);
        fs_.push(parse(fi, "f")?);
    }
    if ts.len() < 2 {
        return Err(bad(format!("need at least 2 samples, got {}", ts.len())));
    }
    let dt = ts[1] - ts[0];
    if dt.is_nan() || dt <= 0.0 {
        return Err(bad("sample times must increase".into()));
    }
    for (i, w) in ts.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(ts[i].abs()) {
            return Err(bad(format!(
                "sample times are not uniformly spaced near t = {}",
                w[0]
            )));
        }
    }
    let period = period.unwrap_or(dt * ts.len() as f64);
    Ok(PeriodicSignal::from_samples(period, fs_)?)
}

#[derive(Serialize)]
struct FourierResult {
    signal: String,
    period: f64,
    m: u64,
    mode: Mode,
    c: f64,
    visibility: f64,
    intervals: usize,
    coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stochastic: Option<FourierStochastic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adiabaticity: Option<mzi::AdiabaticityCheck>,
}

#[derive(Serialize)]
struct FourierStochastic {
    particles: u64,
    seed: u64,
    generator_id: &'static str,
    #[serde(flatten)]
    estimate: StochasticEstimate,
}

#[derive(Serialize)]
struct FourierRow {
    signal: String,
    m: u64,
    mode: Mode,
    c: f64,
    visibility: f64,
    intervals: usize,
    coefficient: f64,
    estimate: Option<f64>,
    stderr: Option<f64>,
    particles: Option<u64>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    difference: f64,
}

fn cmd_fourier(a: &FourierArgs, paths: &Paths) -> Result<Report, Failure> {
    let signal = match &a.samples {
        Some(path) => load_samples(path, a.period)?,
        None => PeriodicSignal::builtin(a.builtin.as_deref().unwrap_or("demo1"))?,
    };
    let v = Visibility::new(a.visibility)?;
    let ramp = RampSpec::new(a.m, a.mode)?.with_visibility(v);
    let coefficient = fourier_coefficient(&signal, &ramp, a.c)?;
    let intervals = signal.natural_intervals();

    let mut extra_outputs = Vec::new();
    if let Some(file) = &a.trace {
        let trace = detector_difference_trace(&signal, &ramp, a.c, intervals)?;
        let rows: Vec<TraceRow> = trace
            .into_iter()
            .map(|(t, difference)| TraceRow { t, difference })
            .collect();
        paths.write(file, csv_string(&rows).as_bytes())?;
        extra_outputs.push(file.clone());
    }
    let stochastic = if a.stochastic {
        let mut estimate = stochastic_fourier(&signal, &ramp, a.particles, a.seed)?;
        estimate.estimate *= a.c;
        estimate.stderr *= a.c;
        Some(FourierStochastic {
            particles: a.particles,
            seed: a.seed,
            generator_id: mzi::rng::GENERATOR_ID,
            estimate,
        })
    } else {
        None
    };
    let adiabaticity = match a.tau {
        Some(tau) => Some(check_adiabaticity(
            photon_energy(a.lambda),
            a.m,
            tau,
            DEFAULT_ADIABATIC_THRESHOLD,
        )?),
        None => None,
    };
    let mode = match a.mode {
        Mode::Cos => "cos",
        Mode::Sin => "sin",
    };

    let mut text = String::new();
    writeln!(
        text,
        "signal {} (period {}), m = {}, mode {mode}, c = {}, v = {}",
        signal.name(),
        signal.period(),
        a.m,
        a.c,
        a.visibility
    )
    .unwrap();
    writeln!(text, "coefficient = {}", sig9(coefficient)).unwrap();
    writeln!(text, "quadrature: composite Simpson, {intervals} intervals").unwrap();
    if let Some(s) = &stochastic {
        writeln!(
            text,
            "stochastic: {} particles, seed {}: {} +/- {} (A {}, B {})",
            s.particles,
            s.seed,
            sig9(s.estimate.estimate),
            short(s.estimate.stderr),
            s.estimate.count_a,
            s.estimate.count_b
        )
        .unwrap();
    }
    if let Some(c) = &adiabaticity {
        writeln!(
            text,
            "adiabaticity: m/tau = {} 1/s, (m/tau)h/E = {} vs {}: {}",
            short(c.ramp_rate),
            short(c.margin),
            short(c.threshold),
            if c.valid { "valid" } else { "violated" }
        )
        .unwrap();
    }
    if let Some(file) = &a.trace {
        writeln!(text, "trace written to {}", file.display()).unwrap();
    }

    let row = FourierRow {
        signal: signal.name().to_string(),
        m: a.m,
        mode: a.mode,
        c: a.c,
        visibility: a.visibility,
        intervals,
        coefficient,
        estimate: stochastic.as_ref().map(|s| s.estimate.estimate),
        stderr: stochastic.as_ref().map(|s| s.estimate.stderr),
        particles: stochastic.as_ref().map(|s| s.particles),
        seed: stochastic.as_ref().map(|s| s.seed),
    };
    let seed = stochastic.as_ref().map(|s| s.seed);
    let result = FourierResult {
        signal: signal.name().to_string(),
        period: signal.period(),
        m: a.m,
        mode: a.mode,
        c: a.c,
        visibility: a.visibility,
        intervals,
        coefficient,
        stochastic,
        adiabaticity,
    };
    Ok(Report {
        text,
        csv: csv_string(&[row]),
        result: to_value(&result),
        seed,
        extra_outputs,
    })
}

#[derive(Serialize)]
struct TargetLimits {
    target: u64,
    within_coherence: bool,
    largest_candidate: u64,
    worst_case_steps: u128,
    envelope_visibility: f64,
}

#[derive(Serialize)]
struct LimitsRow {
    wavelength: f64,
    bandwidth: f64,
    coherence_length: f64,
    max_n: u64,
    worst_case_steps: u128,
    degenerate: bool,
}

fn cmd_limits(a: &LimitsArgs) -> Result<Report, Failure> {
    let src = match (a.dlambda, a.coherence) {
        (Some(d), None) => SourceSpec::new(a.lambda, d)?,
        (None, Some(c)) => SourceSpec::from_coherence(a.lambda, c)?,
        _ => unreachable!("clap requires exactly one of --dlambda and --coherence"),
    };
    let r = FeasibilityReport::new(src);
    let target = a.target.map(|t| TargetLimits {
        target: t,
        within_coherence: t <= r.max_n,
        largest_candidate: t.isqrt(),
        worst_case_steps: worst_case(t),
        envelope_visibility: gaussian_envelope_visibility(&src, t),
    });

    let mut text = String::new();
    writeln!(
        text,
        "lambda = {:e} m, dlambda = {:e} m",
        src.wavelength, src.bandwidth
    )
    .unwrap();
    writeln!(text, "coherence length C = {} m", sig9(r.coherence_length)).unwrap();
    writeln!(text, "max N = {}", r.max_n).unwrap();
    writeln!(
        text,
        "worst-case steps at max N = {} (isqrt(N)*N, growing as N^{WORST_CASE_EXPONENT})",
        r.worst_case_steps
    )
    .unwrap();
    if r.degenerate {
        writeln!(
            text,
            "note: dlambda = lambda, coherence is a single wavelength"
        )
        .unwrap();
    }
    if let Some(t) = &target {
        writeln!(
            text,
            "N = {}: {} the coherence limit, largest candidate {}, worst-case steps {}",
            t.target,
            if t.within_coherence {
                "within"
            } else {
                "beyond"
            },
            t.largest_candidate,
            t.worst_case_steps
        )
        .unwrap();
        writeln!(
            text,
            "Gaussian-envelope visibility (extrapolation) = {}",
            sig9(t.envelope_visibility)
        )
        .unwrap();
    }

    let row = LimitsRow {
        wavelength: src.wavelength,
        bandwidth: src.bandwidth,
        coherence_length: r.coherence_length,
        max_n: r.max_n,
        worst_case_steps: r.worst_case_steps,
        degenerate: r.degenerate,
    };
    let mut result = to_value(&r);
    if let Some(t) = &target {
        result["target"] = to_value(t);
    }
    Ok(Report {
        text,
        csv: csv_string(&[row]),
        result,
        seed: None,
        extra_outputs: Vec::new(),
    })
}
