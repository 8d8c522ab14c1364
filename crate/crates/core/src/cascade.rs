//! Series-connected interferometer loops.
//!
//! Each loop splits the incoming particle between its bright and dark output,
//! and each output feeds either a further loop or a detector. All phase
//! shifters are stepped together, each at its own increment `2π/n`, so the
//! probability of reaching a detector is the product of the per-loop port
//! factors `½(1 ± cos χ)` along its path.
//!
//! A loop whose input comes through a dark port would see no particles
//! whenever the feeding loop's `n` divides `N`. Such loops start stepping
//! `⌈Σ/2⌉` increments late, `Σ` being the sum of the `n` values of all
//! dark-traversed ancestors, and the detectors behind a loop started at
//! increment `s` are read at increments `j = s + kN`. At that reading an
//! ancestor started at `s'` sits at phase `2π(kN + s - s')/n'`. The readings
//! of differently delayed detectors therefore happen at different
//! increments; at any single increment the probabilities over all detectors
//! sum to one (see [`CascadeSpec::increment_distribution`]).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{port_probability, Phase, Port};

/// Where a loop output goes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outlet {
    Detector(String),
    Loop(Box<CascadeNode>),
}

impl Outlet {
    pub fn detector(label: &str) -> Self {
        Outlet::Detector(label.to_string())
    }
}

/// One interferometer loop in the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeNode {
    pub label: String,
    pub n: u64,
    pub bright: Outlet,
    pub dark: Outlet,
    /// Start delay in increments. `None` applies the dark-port rule.
    #[serde(default, rename = "delay", skip_serializing_if = "Option::is_none")]
    pub start_delay: Option<u64>,
}

impl CascadeNode {
    pub fn new(label: &str, n: u64, bright: Outlet, dark: Outlet) -> Self {
        CascadeNode {
            label: label.to_string(),
            n,
            bright,
            dark,
            start_delay: None,
        }
    }

    pub fn with_delay(mut self, delay: u64) -> Self {
        self.start_delay = Some(delay);
        self
    }
}

/// Number of observations summed per detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Horizon {
    /// Largest `n` on the detector's path.
    #[default]
    PathMax,
    /// Least common multiple of the `n` values on the path; cross terms then
    /// cancel over whole periods.
    PathLcm,
    Fixed(u64),
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::PathMax => f.write_str("path-max"),
            Horizon::PathLcm => f.write_str("lcm"),
            Horizon::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path-max" | "max" => Ok(Horizon::PathMax),
            "lcm" => Ok(Horizon::PathLcm),
            other => match other.parse::<u64>() {
                Ok(k) if k >= 1 => Ok(Horizon::Fixed(k)),
                _ => Err(Error::InvalidTopology(format!(
                    "horizon must be \"path-max\", \"lcm\" or a positive integer, got {other:?}"
                ))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HorizonRepr {
    Named(String),
    Fixed(u64),
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Fixed(k) => HorizonRepr::Fixed(*k),
            other => HorizonRepr::Named(other.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match HorizonRepr::deserialize(d)? {
            HorizonRepr::Named(s) => s.parse().map_err(serde::de::Error::custom),
            HorizonRepr::Fixed(0) => Err(serde::de::Error::custom("horizon must be at least 1")),
            HorizonRepr::Fixed(k) => Ok(Horizon::Fixed(k)),
        }
    }
}

/// `⌈Σ parent_ns / 2⌉`, the start delay for a loop fed through the dark
/// ports of loops with the given `n` values.
pub fn dark_port_delay(parent_ns: &[u64]) -> u64 {
    parent_ns.iter().sum::<u64>().div_ceil(2)
}

#[derive(Clone, Debug, PartialEq)]
struct LoopInfo {
    label: String,
    n: u64,
    start_delay: u64,
}

#[derive(Clone, Debug, PartialEq)]
struct DetectorPath {
    label: String,
    /// Loops traversed from the root, with the port taken out of each.
    hops: Vec<(usize, Port)>,
    /// Start delay of the loop feeding this detector.
    offset: u64,
}

/// A validated cascade: the loop tree, the number under test and the
/// summation horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeSpec {
    root: CascadeNode,
    target: u64,
    horizon: Horizon,
    loops: Vec<LoopInfo>,
    detectors: Vec<DetectorPath>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CascadeFile {
    #[serde(rename = "N")]
    target: u64,
    #[serde(default)]
    horizon: Horizon,
    root: CascadeNode,
}

impl CascadeSpec {
    /// Validates the tree and resolves every unset start delay.
    pub fn new(root: CascadeNode, target: u64, horizon: Horizon) -> Result<Self> {
        if target < 2 {
            return Err(Error::InvalidTarget(target));
        }
        if let Horizon::Fixed(0) = horizon {
            return Err(Error::InvalidTopology("horizon must be at least 1".into()));
        }
        let mut root = root;
        let mut loops = Vec::new();
        let mut detectors = Vec::new();
        let mut loop_labels = BTreeSet::new();
        let mut detector_labels = BTreeSet::new();
        let mut walker = Walker {
            loops: &mut loops,
            detectors: &mut detectors,
            loop_labels: &mut loop_labels,
            detector_labels: &mut detector_labels,
        };
        walker.visit(&mut root, "root", &mut Vec::new(), &mut Vec::new())?;
        Ok(CascadeSpec {
            root,
            target,
            horizon,
            loops,
            detectors,
        })
    }

    /// Parses the JSON configuration format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CascadeFile = serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        CascadeSpec::new(file.root, file.target, file.horizon)
    }

    /// JSON with every start delay written out.
    pub fn to_json(&self) -> String {
        let file = CascadeFile {
            target: self.target,
            horizon: self.horizon,
            root: self.root.clone(),
        };
        serde_json::to_string_pretty(&file).expect("cascade spec serializes")
    }

    pub fn root(&self) -> &CascadeNode {
        &self.root
    }

    pub fn target(&self) -> u64 {
        self.target
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn with_horizon(mut self, horizon: Horizon) -> Self {
        self.horizon = horizon;
        self
    }

    /// Copy of this spec with every start delay forced to zero.
    pub fn without_delays(&self) -> Self {
        fn strip(node: &mut CascadeNode) {
            node.start_delay = Some(0);
            for out in [&mut node.bright, &mut node.dark] {
                if let Outlet::Loop(child) = out {
                    strip(child);
                }
            }
        }
        let mut root = self.root.clone();
        strip(&mut root);
        CascadeSpec::new(root, self.target, self.horizon).expect("zero delays are always valid")
    }

    /// Detector labels in depth-first, bright-first order.
    pub fn detectors(&self) -> impl Iterator<Item = &str> {
        self.detectors.iter().map(|d| d.label.as_str())
    }

    /// `(label, n, start_delay)` for every loop, depth-first.
    pub fn loops(&self) -> impl Iterator<Item = (&str, u64, u64)> {
        self.loops
            .iter()
            .map(|l| (l.label.as_str(), l.n, l.start_delay))
    }

    fn detector_index(&self, detector: &str) -> Result<usize> {
        self.detectors
            .iter()
            .position(|d| d.label == detector)
            .ok_or_else(|| Error::UnknownDetector(detector.to_string()))
    }

    /// Increment offset at which `detector` is read: its `k`-th reading is at
    /// increment `offset + kN`.
    pub fn observation_offset(&self, detector: &str) -> Result<u64> {
        Ok(self.detectors[self.detector_index(detector)?].offset)
    }

    /// Loops on the way to `detector` as `(label, n, port)`.
    pub fn path(&self, detector: &str) -> Result<Vec<(&str, u64, Port)>> {
        let d = &self.detectors[self.detector_index(detector)?];
        Ok(d.hops
            .iter()
            .map(|&(i, port)| (self.loops[i].label.as_str(), self.loops[i].n, port))
            .collect())
    }

    /// Number of readings summed for `detector`.
    pub fn horizon_for(&self, detector: &str) -> Result<u64> {
        let idx = self.detector_index(detector)?;
        Ok(self.horizon_of(idx))
    }

    fn horizon_of(&self, idx: usize) -> u64 {
        let ns = self.detectors[idx]
            .hops
            .iter()
            .map(|&(i, _)| self.loops[i].n);
        match self.horizon {
            Horizon::Fixed(k) => k,
            Horizon::PathMax => ns.max().unwrap_or(1),
            Horizon::PathLcm => ns.fold(1, lcm),
        }
    }

    fn probability_at(&self, idx: usize, increment: i128) -> f64 {
        self.detectors[idx]
            .hops
            .iter()
            .map(|&(i, port)| {
                let l = &self.loops[i];
                let chi = Phase::from_ratio(increment - l.start_delay as i128, l.n);
                port_probability(chi.cos(), port, 1.0)
            })
            .product()
    }

    /// Probability that a particle sent at the `k`-th reading of `detector`
    /// arrives there.
    pub fn path_probability(&self, detector: &str, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(crate::error::invalid(
                "k",
                "observations are numbered from 1",
            ));
        }
        let idx = self.detector_index(detector)?;
        Ok(self.probability_at(idx, self.reading_increment(idx, k)))
    }

    fn reading_increment(&self, idx: usize, k: u64) -> i128 {
        k as i128 * self.target as i128 + self.detectors[idx].offset as i128
    }

    /// Arrival probabilities over all detectors, in [`Self::detectors`] order,
    /// for a particle sent at global increment `increment`.
    pub fn increment_distribution(&self, increment: u64) -> Vec<f64> {
        (0..self.detectors.len())
            .map(|idx| self.probability_at(idx, increment as i128))
            .collect()
    }

    /// Detector readings grouped by observation offset: `(offset, detector
    /// indices)`, ascending in offset.
    pub(crate) fn reading_groups(&self) -> Vec<(u64, Vec<usize>)> {
        let offsets: BTreeSet<u64> = self.detectors.iter().map(|d| d.offset).collect();
        offsets
            .into_iter()
            .map(|o| {
                let members = (0..self.detectors.len())
                    .filter(|&i| self.detectors[i].offset == o)
                    .collect();
                (o, members)
            })
            .collect()
    }

    pub(crate) fn detector_label(&self, idx: usize) -> &str {
        &self.detectors[idx].label
    }

    pub(crate) fn horizon_at(&self, idx: usize) -> u64 {
        self.horizon_of(idx)
    }

    pub(crate) fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    /// Expected count at `detector` summed over its readings `k = 1..=K`.
    pub fn accumulate(&self, detector: &str) -> Result<DetectorTally> {
        let idx = self.detector_index(detector)?;
        let horizon = self.horizon_of(idx);
        let expected: f64 = (1..=horizon)
            .map(|k| self.probability_at(idx, self.reading_increment(idx, k)))
            .sum();
        let path = &self.detectors[idx];
        let depth = path.hops.len() as i32;
        let units_of = horizon as f64 / 2f64.powi(depth);

        // Divisibility prediction: a dividing loop contributes its constant
        // port factor, any other loop averages to one half.
        let mut predicted = 1.0;
        let mut periods = 1u64;
        let mut open = Vec::new();
        for &(i, port) in &path.hops {
            let l = &self.loops[i];
            let residue = self.target % l.n;
            if residue == 0 {
                let shift = path.offset as i128 - l.start_delay as i128;
                predicted *= port_probability(Phase::from_ratio(shift, l.n).cos(), port, 1.0);
            } else {
                predicted *= 0.5;
                periods = lcm(periods, l.n / gcd(l.n, residue));
                open.push((l.label.clone(), l.n, residue));
            }
        }
        let resonances = resonant_sets(&open);
        let full_period = horizon.is_multiple_of(periods);
        Ok(DetectorTally {
            detector: path.label.clone(),
            expected_intensity: expected,
            horizon,
            units_of,
            intensity_units: expected / units_of,
            predicted_units: predicted * 2f64.powi(depth),
            deviation_units: expected / units_of - predicted * 2f64.powi(depth),
            observation_offset: path.offset,
            exact_expectation: full_period && resonances.is_empty(),
            resonances,
        })
    }

    /// [`Self::accumulate`] for every detector, in detector order.
    pub fn accumulate_all(&self) -> Vec<DetectorTally> {
        self.detectors
            .iter()
            .map(|d| self.accumulate(&d.label).expect("known detector"))
            .collect()
    }
}

struct Walker<'a> {
    loops: &'a mut Vec<LoopInfo>,
    detectors: &'a mut Vec<DetectorPath>,
    loop_labels: &'a mut BTreeSet<String>,
    detector_labels: &'a mut BTreeSet<String>,
}

impl Walker<'_> {
    fn visit(
        &mut self,
        node: &mut CascadeNode,
        field: &str,
        hops: &mut Vec<(usize, Port)>,
        dark_ns: &mut Vec<u64>,
    ) -> Result<()> {
        let bad = |msg: String| Error::InvalidTopology(format!("{field}: {msg}"));
        if node.n == 0 {
            return Err(bad("n must be at least 1".into()));
        }
        if node.label.is_empty() {
            return Err(bad("loop label must not be empty".into()));
        }
        if !self.loop_labels.insert(node.label.clone()) {
            return Err(bad(format!("duplicate loop label {:?}", node.label)));
        }
        if hops.len() >= 60 {
            return Err(bad("tree is deeper than 60 loops".into()));
        }
        let rule = dark_port_delay(dark_ns);
        let delay = match node.start_delay {
            Some(d) if dark_ns.is_empty() && d != 0 => {
                return Err(bad(format!(
                    "loop {:?} is reached through bright ports only and must have delay 0, got {d}",
                    node.label
                )))
            }
            Some(d) => d,
            None => rule,
        };
        node.start_delay = Some(delay);
        let idx = self.loops.len();
        self.loops.push(LoopInfo {
            label: node.label.clone(),
            n: node.n,
            start_delay: delay,
        });
        for (port, name) in [(Port::Bright, "bright"), (Port::Dark, "dark")] {
            hops.push((idx, port));
            if port == Port::Dark {
                dark_ns.push(node.n);
            }
            let out = match port {
                Port::Bright => &mut node.bright,
                Port::Dark => &mut node.dark,
            };
            let child_field = format!("{field}.{name}");
            match out {
                Outlet::Detector(label) => {
                    if label.is_empty() {
                        return Err(Error::InvalidTopology(format!(
                            "{child_field}: detector label must not be empty"
                        )));
                    }
                    if !self.detector_labels.insert(label.clone()) {
                        return Err(Error::InvalidTopology(format!(
                            "{child_field}: duplicate detector label {label:?}"
                        )));
                    }
                    self.detectors.push(DetectorPath {
                        label: label.clone(),
                        hops: hops.clone(),
                        offset: delay,
                    });
                }
                Outlet::Loop(child) => self.visit(child, &child_field, hops, dark_ns)?,
            }
            if port == Port::Dark {
                dark_ns.pop();
            }
            hops.pop();
        }
        Ok(())
    }
}

/// Accumulated expectation at one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorTally {
    pub detector: String,
    pub expected_intensity: f64,
    /// Number of readings summed.
    pub horizon: u64,
    /// `K / 2^depth`; for a three-loop path with `K = n₄` this is `n₄/8`.
    pub units_of: f64,
    pub intensity_units: f64,
    /// Value predicted from divisibility alone, in the same units.
    pub predicted_units: f64,
    pub deviation_units: f64,
    pub observation_offset: u64,
    /// Whether the horizon covers whole periods of every non-dividing loop
    /// and no cross term is resonant, so the prediction is exact.
    pub exact_expectation: bool,
    /// Sets of non-dividing loops whose sum/difference frequencies are
    /// integers; their cross terms do not cancel.
    pub resonances: Vec<Vec<String>>,
}

/// Subsets (size ≥ 2) of non-dividing loops `(label, n, N mod n)` for which
/// some signed sum `Σ ±L_i/n_i` is an integer.
fn resonant_sets(open: &[(String, u64, u64)]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let m = open.len();
    let period = open.iter().fold(1u64, |acc, &(_, n, _)| lcm(acc, n)) as i128;
    for mask in 1u32..(1 << m) {
        if mask.count_ones() < 2 {
            continue;
        }
        let members: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let free = members.len() - 1;
        let hit = (0u32..(1 << free)).any(|signs| {
            let mut acc = 0i128;
            for (pos, &i) in members.iter().enumerate() {
                let (_, n, l) = &open[i];
                let term = *l as i128 * (period / *n as i128);
                let negative = pos > 0 && signs & (1 << (pos - 1)) != 0;
                acc += if negative { -term } else { term };
            }
            acc.rem_euclid(period) == 0
        });
        if hit {
            out.push(members.iter().map(|&i| open[i].0.clone()).collect());
        }
    }
    out
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub(crate) fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// How [`build_fig2`] assigns start delays.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayRule {
    /// Dark-fed loops wait `⌈Σ/2⌉` increments.
    DarkPort,
    /// Every loop starts at increment zero.
    None,
}

/// Seven-loop, eight-detector network.
///
/// `n1` feeds `n2` (bright) and `n3` (dark). `n2` feeds `n4` (bright,
/// detectors A/B) and `n5` (dark, C/D). `n3` feeds `n7` (bright, G/H) and
/// `n6` (dark, E/F), so the E/F readings wait `⌈(n1 + n3)/2⌉` increments.
pub fn build_fig2(target: u64, ns: [u64; 7], delays: DelayRule) -> Result<CascadeSpec> {
    check_increasing(&ns)?;
    let leaf = |label: &str, n: u64, b: &str, d: &str| {
        CascadeNode::new(label, n, Outlet::detector(b), Outlet::detector(d))
    };
    let n4 = leaf("n4", ns[3], "A", "B");
    let n5 = leaf("n5", ns[4], "C", "D");
    let n6 = leaf("n6", ns[5], "E", "F");
    let n7 = leaf("n7", ns[6], "G", "H");
    let n2 = CascadeNode::new(
        "n2",
        ns[1],
        Outlet::Loop(Box::new(n4)),
        Outlet::Loop(Box::new(n5)),
    );
    let n3 = CascadeNode::new(
        "n3",
        ns[2],
        Outlet::Loop(Box::new(n7)),
        Outlet::Loop(Box::new(n6)),
    );
    let root = CascadeNode::new(
        "n1",
        ns[0],
        Outlet::Loop(Box::new(n2)),
        Outlet::Loop(Box::new(n3)),
    );
    let spec = CascadeSpec::new(root, target, Horizon::PathMax)?;
    Ok(match delays {
        DelayRule::DarkPort => spec,
        DelayRule::None => spec.without_delays(),
    })
}

fn check_increasing(ns: &[u64]) -> Result<()> {
    if ns.contains(&0) {
        return Err(Error::OrderingViolation(
            "loop divisors must be positive".into(),
        ));
    }
    for w in ns.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::OrderingViolation(format!(
                "divisors must be strictly increasing, got {} before {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Factor (`true`) / non-factor marks for `(n1, n2, n4)` and the tabulated
/// `(I_A, I_B, I_C + I_D)` in units of `K/8`.
pub const TABLE_I: [([bool; 3], [f64; 3]); 8] = [
    ([true, true, true], [8.0, 0.0, 0.0]),
    ([true, true, false], [4.0, 4.0, 0.0]),
    ([true, false, true], [4.0, 0.0, 4.0]),
    ([true, false, false], [2.0, 2.0, 4.0]),
    ([false, true, true], [4.0, 0.0, 0.0]),
    ([false, true, false], [2.0, 2.0, 0.0]),
    ([false, false, true], [2.0, 0.0, 2.0]),
    ([false, false, false], [1.0, 1.0, 2.0]),
];

/// Tabulated intensities for a factor pattern.
pub fn table_i_row(marks: [bool; 3]) -> [f64; 3] {
    TABLE_I
        .iter()
        .find(|(m, _)| *m == marks)
        .map(|(_, v)| *v)
        .expect("all eight patterns are tabulated")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub target: u64,
    pub ns: [u64; 3],
    pub horizon: u64,
    /// Whether each of `n1, n2, n4` divides `N`.
    pub marks: [bool; 3],
    /// `I_A, I_B, I_C + I_D` in units of `K/8`.
    pub measured: [f64; 3],
    pub tabulated: [f64; 3],
    pub deviation: [f64; 3],
    pub resonances: Vec<Vec<String>>,
}

impl Table1Report {
    pub fn max_deviation(&self) -> f64 {
        self.deviation.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    }
}

/// Front section of the network: `n1 → n2 → n4` with detectors A, B behind
/// `n4` and C + D lumped behind the dark port of `n2`. No loop in it is
/// dark-fed, so there are no delays.
pub fn front_section(
    target: u64,
    n1: u64,
    n2: u64,
    n4: u64,
    horizon: Horizon,
) -> Result<CascadeSpec> {
    check_increasing(&[n1, n2, n4])?;
    let inner = CascadeNode::new("n4", n4, Outlet::detector("A"), Outlet::detector("B"));
    let middle = CascadeNode::new(
        "n2",
        n2,
        Outlet::Loop(Box::new(inner)),
        Outlet::detector("C+D"),
    );
    let root = CascadeNode::new(
        "n1",
        n1,
        Outlet::Loop(Box::new(middle)),
        Outlet::detector("lower"),
    );
    CascadeSpec::new(root, target, horizon)
}

/// Accumulate `I_A`, `I_B` and `I_C + I_D` over a common horizon and compare
/// them with the tabulated row for the divisibility pattern of `n1, n2, n4`.
pub fn table1_report(
    target: u64,
    n1: u64,
    n2: u64,
    n4: u64,
    horizon: Horizon,
) -> Result<Table1Report> {
    let spec = front_section(target, n1, n2, n4, horizon)?;
    let k = match horizon {
        Horizon::PathMax => n4,
        Horizon::PathLcm => lcm(lcm(n1, n2), n4),
        Horizon::Fixed(k) => k,
    };
    let spec = spec.with_horizon(Horizon::Fixed(k));
    let unit = k as f64 / 8.0;
    let a = spec.accumulate("A")?;
    let b = spec.accumulate("B")?;
    let cd = spec.accumulate("C+D")?;
    let measured = [
        a.expected_intensity / unit,
        b.expected_intensity / unit,
        cd.expected_intensity / unit,
    ];
    let marks = [
        target.is_multiple_of(n1),
        target.is_multiple_of(n2),
        target.is_multiple_of(n4),
    ];
    let tabulated = table_i_row(marks);
    let deviation = [0, 1, 2].map(|i| measured[i] - tabulated[i]);
    let mut resonances = a.resonances;
    for r in b.resonances.into_iter().chain(cd.resonances) {
        if !resonances.contains(&r) {
            resonances.push(r);
        }
    }
    Ok(Table1Report {
        target,
        ns: [n1, n2, n4],
        horizon: k,
        marks,
        measured,
        tabulated,
        deviation,
        resonances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn single(n: u64, target: u64) -> CascadeSpec {
        let root = CascadeNode::new("L", n, Outlet::detector("bright"), Outlet::detector("dark"));
        CascadeSpec::new(root, target, Horizon::PathMax).unwrap()
    }

    #[test]
    fn delay_rule_examples() {
        assert_eq!(dark_port_delay(&[6]), 3);
        assert_eq!(dark_port_delay(&[5, 7]), 6);
        assert_eq!(dark_port_delay(&[5]), 3);
        assert_eq!(dark_port_delay(&[]), 0);
    }

    #[test]
    fn single_loop_dark_detector_is_empty() {
        let spec = single(5, 20);
        for k in 1..=10 {
            assert_eq!(spec.path_probability("dark", k).unwrap(), 0.0);
            assert_eq!(spec.path_probability("bright", k).unwrap(), 1.0);
        }
        assert_eq!(
            spec.path_probability("X", 1),
            Err(Error::UnknownDetector("X".into()))
        );
    }

    #[test]
    fn all_factor_bright_path() {
        let spec = build_fig2(840, [2, 3, 4, 5, 6, 7, 8], DelayRule::DarkPort).unwrap();
        for k in 1..=20 {
            assert_eq!(spec.path_probability("A", k).unwrap(), 1.0);
        }
        let a = spec.accumulate("A").unwrap();
        assert_abs_diff_eq!(a.expected_intensity, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.intensity_units, 8.0, epsilon = 1e-12);
        assert_eq!(spec.accumulate("B").unwrap().expected_intensity, 0.0);
    }

    #[test]
    fn fig2_delays_follow_dark_ancestors() {
        let spec = build_fig2(60, [2, 3, 5, 7, 11, 13, 17], DelayRule::DarkPort).unwrap();
        let delays: Vec<(String, u64)> = spec.loops().map(|(l, _, d)| (l.to_string(), d)).collect();
        let get = |name: &str| delays.iter().find(|(l, _)| l == name).unwrap().1;
        assert_eq!(get("n1"), 0);
        assert_eq!(get("n2"), 0);
        assert_eq!(get("n4"), 0);
        assert_eq!(get("n5"), 2);
        assert_eq!(get("n3"), 1);
        assert_eq!(get("n7"), 1);
        assert_eq!(get("n6"), 4);
        assert_eq!(spec.observation_offset("E").unwrap(), 4);
        assert_eq!(spec.observation_offset("A").unwrap(), 0);
        assert_eq!(
            spec.detectors().collect::<Vec<_>>(),
            ["A", "B", "C", "D", "G", "H", "E", "F"]
        );
    }

    #[test]
    fn fig2_rejects_unordered() {
        assert!(matches!(
            build_fig2(60, [2, 3, 5, 4, 6, 7, 8], DelayRule::DarkPort),
            Err(Error::OrderingViolation(_))
        ));
        assert!(matches!(
            table1_report(60, 3, 2, 4, Horizon::PathMax),
            Err(Error::OrderingViolation(_))
        ));
    }

    #[test]
    fn dark_fed_detectors_without_delay_never_click() {
        let spec = build_fig2(840, [2, 3, 4, 5, 6, 7, 8], DelayRule::None).unwrap();
        for det in ["E", "F", "G", "H"] {
            assert_eq!(spec.accumulate(det).unwrap().expected_intensity, 0.0);
        }
        let delayed = build_fig2(840, [2, 3, 4, 5, 6, 7, 8], DelayRule::DarkPort).unwrap();
        assert!(delayed.accumulate("E").unwrap().expected_intensity > 0.0);
    }

    #[test]
    fn increment_distribution_is_normalized() {
        let spec = build_fig2(97, [3, 4, 6, 9, 10, 14, 15], DelayRule::DarkPort).unwrap();
        for j in 0..500 {
            let total: f64 = spec.increment_distribution(j).iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn table1_exact_rows() {
        let r = table1_report(60, 2, 3, 4, Horizon::PathMax).unwrap();
        assert_eq!(r.marks, [true, true, true]);
        for i in 0..3 {
            assert_abs_diff_eq!(r.measured[i], [8.0, 0.0, 0.0][i], epsilon = 1e-9);
        }
        let r = table1_report(60, 2, 3, 7, Horizon::PathMax).unwrap();
        assert_eq!(r.tabulated, [4.0, 4.0, 0.0]);
        assert!(r.max_deviation() < 1e-9);
    }

    #[test]
    fn table1_lcm_row_eight() {
        let r = table1_report(60, 7, 11, 13, Horizon::PathLcm).unwrap();
        assert_eq!(r.horizon, 1001);
        assert_eq!(r.tabulated, [1.0, 1.0, 2.0]);
        assert!(r.max_deviation() < 0.5);
        assert!(r.resonances.is_empty());
    }

    #[test]
    fn resonance_detection() {
        // 1/4 + 3/4 is an integer.
        let found = resonant_sets(&[("a".into(), 4, 1), ("b".into(), 4, 3)]);
        assert_eq!(found, vec![vec!["a".to_string(), "b".to_string()]]);
        assert!(resonant_sets(&[("a".into(), 7, 4), ("b".into(), 11, 5)]).is_empty());
    }

    #[test]
    fn resonant_cross_term_shows_in_deviation() {
        // N = 9: residues 1/4 and 9/12 add up to one full turn.
        let root = CascadeNode::new(
            "a",
            4,
            Outlet::Loop(Box::new(CascadeNode::new(
                "b",
                12,
                Outlet::detector("X"),
                Outlet::detector("Y"),
            ))),
            Outlet::detector("Z"),
        );
        let spec = CascadeSpec::new(root, 9, Horizon::PathLcm).unwrap();
        let t = spec.accumulate("X").unwrap();
        assert!(!t.exact_expectation);
        assert_eq!(t.resonances, vec![vec!["a".to_string(), "b".to_string()]]);
        assert!(t.deviation_units.abs() > 0.1);
    }

    #[test]
    fn json_round_trip_and_diagnostics() {
        let spec = build_fig2(60, [2, 3, 5, 7, 11, 13, 17], DelayRule::DarkPort).unwrap();
        let text = spec.to_json();
        let back = CascadeSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);

        let err = CascadeSpec::from_json(
            "{\n  \"N\": 60,\n  \"root\": {\"label\": \"a\", \"n\": \"x\"}\n}",
        )
        .unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }

        let dup = r#"{"N": 6, "root": {"label": "a", "n": 2, "bright": "A", "dark": "A"}}"#;
        let err = CascadeSpec::from_json(dup).unwrap_err();
        assert!(err.to_string().contains("root.dark"), "{err}");

        let bad_delay =
            r#"{"N": 6, "root": {"label": "a", "n": 2, "bright": "A", "dark": "B", "delay": 3}}"#;
        assert!(CascadeSpec::from_json(bad_delay).is_err());

        let lcm_h = r#"{"N": 6, "horizon": "lcm", "root": {"label": "a", "n": 2, "bright": "A", "dark": "B"}}"#;
        assert_eq!(
            CascadeSpec::from_json(lcm_h).unwrap().horizon(),
            Horizon::PathLcm
        );
        let fixed = r#"{"N": 6, "horizon": 12, "root": {"label": "a", "n": 2, "bright": "A", "dark": "B"}}"#;
        assert_eq!(
            CascadeSpec::from_json(fixed)
                .unwrap()
                .horizon_for("A")
                .unwrap(),
            12
        );
    }

    #[test]
    fn product_form_matches_monolithic_expression() {
        // Three-loop bright path written out as one expression.
        let (target, ns) = (60u64, [7u64, 11, 13]);
        let spec = front_section(target, ns[0], ns[1], ns[2], Horizon::Fixed(50)).unwrap();
        for k in 1..=50u64 {
            let c = |n: u64| (2.0 * PI * (k * target) as f64 / n as f64).cos();
            let a = (1.0 + c(ns[0])) * (1.0 + c(ns[1])) * (1.0 + c(ns[2])) / 8.0;
            let b = (1.0 + c(ns[0])) * (1.0 + c(ns[1])) * (1.0 - c(ns[2])) / 8.0;
            assert_abs_diff_eq!(spec.path_probability("A", k).unwrap(), a, epsilon = 1e-12);
            assert_abs_diff_eq!(spec.path_probability("B", k).unwrap(), b, epsilon = 1e-12);
        }
    }
}
