//! Exhaustive single-fault enumeration and the derived coefficients.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::builders::injection_site;
use crate::circuit::{Circuit, Op};
use crate::decoder::Decoder;
use crate::dem::build_dem;
use crate::error::{Error, Result};
use crate::noise::IDLE_SCALE;
use crate::propagate::{enumerate_terms, term_signatures, NoiseTerm, Signature};

pub type Rational = Ratio<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    Detected,
    UndetectedLogical,
    Harmless,
}

/// Logical action of an undetected fault on the injected state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LogicalLabel {
    #[serde(rename = "F_L")]
    F,
    #[serde(rename = "X_L")]
    X,
    #[serde(rename = "Y_L")]
    Y,
    #[serde(rename = "Z_L")]
    Z,
}

impl LogicalLabel {
    pub fn name(self) -> &'static str {
        match self {
            LogicalLabel::F => "F_L",
            LogicalLabel::X => "X_L",
            LogicalLabel::Y => "Y_L",
            LogicalLabel::Z => "Z_L",
        }
    }
}

/// Channel parameter a noise term is proportional to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    P1,
    P2,
    PIn,
    Erasure,
}

fn source_of(op: &Op) -> Source {
    match op {
        Op::Depol1(_) => Source::P1,
        Op::Depol2(_) => Source::P2,
        Op::XError(_) | Op::ZError(_) => Source::PIn,
        _ => Source::Erasure,
    }
}

/// Gate family of a noise location, for the detection histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    OneQubit,
    TwoQubit,
    Spam,
}

#[derive(Clone, Debug, Serialize)]
pub struct Fault {
    pub instruction: u32,
    pub location: u32,
    /// (qubit, Pauli letter) components.
    pub paulis: Vec<(u32, char)>,
    pub source: Source,
    /// Probability relative to the channel parameter.
    pub share: (u64, u64),
    pub probability: f64,
    pub class: FaultClass,
    pub label: Option<LogicalLabel>,
    /// True when the fault flips the measured logical of the injected state.
    pub flips_state: bool,
    pub detectors: Vec<u32>,
}

impl Fault {
    fn share(&self) -> Rational {
        Rational::new(self.share.0, self.share.1)
    }
}

/// Linear coefficients of the undetected logical rate.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SourceCoefficients {
    pub p1: Rational,
    pub p2: Rational,
    pub p_in: Rational,
}

impl SourceCoefficients {
    fn add(&mut self, s: Source, v: Rational) {
        match s {
            Source::P1 => self.p1 += v,
            Source::P2 => self.p2 += v,
            Source::PIn => self.p_in += v,
            Source::Erasure => {}
        }
    }

    /// Coefficient of `p` at `p_in = p2 = p`, `p1 = p / 10`.
    pub fn at_reference(&self) -> Rational {
        self.p_in + self.p2 + self.p1 * Rational::new(1, (1.0 / IDLE_SCALE).round() as u64)
    }

    pub fn is_zero(&self) -> bool {
        self.p1 == Rational::from(0) && self.p2 == Rational::from(0) && self.p_in == Rational::from(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FaultCoefficients {
    /// Terms flipping the injected state, by source (`a p1 + b p2 + c p_IN`).
    pub effective: SourceCoefficients,
    /// Every undetected logical term by label, including those harmless to the state.
    pub channel: BTreeMap<LogicalLabel, SourceCoefficients>,
}

impl FaultCoefficients {
    pub fn effective_rate(&self) -> Rational {
        self.effective.at_reference()
    }

    pub fn channel_total(&self) -> Rational {
        self.channel.values().map(SourceCoefficients::at_reference).sum()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GateDetection {
    pub location: u32,
    pub instruction: u32,
    pub kind: GateKind,
    pub qubits: Vec<u32>,
    /// Share of the gate's Pauli terms that are detected.
    pub detected_fraction: f64,
    /// Probability that this gate produces a detected error.
    pub p_detect: f64,
    pub p_total: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FaultReport {
    pub faults: Vec<Fault>,
    pub gates: Vec<GateDetection>,
    pub distinct_signatures: usize,
}

/// Qubits flagged by an erasure check after `at` and inside the window.
fn flagged_later(c: &Circuit) -> HashMap<u32, Vec<usize>> {
    let rounds = c.round_of_instructions();
    let w = c.window_rounds();
    let mut out: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        if matches!(ins.op, Op::ErasureCheck { fn_, .. } if fn_ < 1.0) && rounds[i] <= w {
            for &q in &ins.targets {
                out.entry(q).or_default().push(i);
            }
        }
    }
    out
}

/// Instruction range around the injection gate in which faults on the injected
/// qubit act directly on the state being prepared.
fn preparation_window(c: &Circuit) -> Option<(u32, std::ops::Range<usize>)> {
    let (at, q) = injection_site(c)?;
    let touches = |i: usize| c.instructions[i].op == Op::Cx && c.instructions[i].targets.contains(&q);
    let lo = (0..at).rev().find(|&i| touches(i)).map_or(0, |i| i + 1);
    let hi = (at + 1..c.instructions.len()).find(|&i| touches(i)).unwrap_or(c.instructions.len());
    Some((q, lo..hi))
}

fn letter(x: bool, z: bool) -> char {
    match (x, z) {
        (true, false) => 'X',
        (true, true) => 'Y',
        _ => 'Z',
    }
}

struct Classifier<'a> {
    window: Vec<bool>,
    decoder: Decoder,
    circuit: &'a Circuit,
}

impl Classifier<'_> {
    /// Flip of the observable and residual logical after decoding outside the window.
    fn residual(&self, sig: &Signature) -> Result<(bool, u8)> {
        let c = self.decoder.decode(&sig.detectors, &[])?;
        Ok(((sig.observables ^ c.observables) & 1 == 1, sig.logical ^ c.logical))
    }

    fn in_window(&self, sig: &Signature) -> bool {
        sig.detectors.iter().any(|&d| self.window[d as usize])
    }
}

/// Classify every single Pauli term of every noise channel.
pub fn enumerate_faults(c: &Circuit) -> Result<FaultReport> {
    if c.num_observables() == 0 {
        return Err(Error::Invalid("circuit has no logical observable".into()));
    }
    let terms = enumerate_terms(c);
    let sigs = term_signatures(c, &terms);
    let dem = build_dem(c)?;
    let cl = Classifier { window: c.window_detectors(), decoder: Decoder::new(&dem)?, circuit: c };
    let flagged = flagged_later(c);
    let prep = preparation_window(c);
    let mut faults = Vec::with_capacity(terms.len());
    for (t, sig) in terms.iter().zip(&sigs) {
        let op = &cl.circuit.instructions[t.instruction as usize].op;
        let heralded = t.erasure
            && t.paulis.iter().all(|&(q, ..)| {
                flagged.get(&q).is_some_and(|v| v.iter().any(|&i| i > t.instruction as usize))
            });
        let (class, label, flips) = if heralded || cl.in_window(sig) {
            (FaultClass::Detected, None, false)
        } else {
            let (flip, logical) = cl.residual(sig)?;
            if logical == 0 && !flip {
                (FaultClass::Harmless, None, false)
            } else {
                let on_prep = prep.as_ref().is_some_and(|(q, r)| {
                    r.contains(&(t.instruction as usize)) && t.paulis.iter().all(|p| p.0 == *q)
                });
                let label = if on_prep {
                    LogicalLabel::F
                } else {
                    match logical {
                        1 => LogicalLabel::X,
                        2 => LogicalLabel::Z,
                        _ => LogicalLabel::Y,
                    }
                };
                (FaultClass::UndetectedLogical, Some(label), flip)
            }
        };
        faults.push(Fault {
            instruction: t.instruction,
            location: t.location,
            paulis: t.paulis.iter().map(|&(q, x, z)| (q, letter(x, z))).collect(),
            source: source_of(op),
            share: (t.share.0 as u64, t.share.1 as u64),
            probability: t.probability,
            class,
            label,
            flips_state: flips,
            detectors: sig.detectors.clone(),
        });
    }
    let distinct_signatures = terms
        .iter()
        .zip(&sigs)
        .filter(|(t, s)| !t.erasure && !s.is_trivial())
        .map(|(_, s)| s)
        .collect::<HashSet<_>>()
        .len();
    let gates = gate_detection(c, &terms, &faults);
    Ok(FaultReport { faults, gates, distinct_signatures })
}

fn gate_detection(c: &Circuit, terms: &[NoiseTerm], faults: &[Fault]) -> Vec<GateDetection> {
    let mut by_loc: BTreeMap<u32, GateDetection> = BTreeMap::new();
    for (t, f) in terms.iter().zip(faults) {
        if t.erasure {
            continue;
        }
        let op = &c.instructions[t.instruction as usize].op;
        let kind = match op {
            Op::Depol2(_) => GateKind::TwoQubit,
            Op::Depol1(_) => GateKind::OneQubit,
            _ => GateKind::Spam,
        };
        let g = by_loc.entry(t.location).or_insert_with(|| GateDetection {
            location: t.location,
            instruction: t.instruction,
            kind,
            qubits: Vec::new(),
            detected_fraction: 0.0,
            p_detect: 0.0,
            p_total: 0.0,
        });
        for &(q, ..) in &t.paulis {
            if !g.qubits.contains(&q) {
                g.qubits.push(q);
            }
        }
        g.p_total += t.probability;
        if f.class == FaultClass::Detected {
            g.p_detect += t.probability;
        }
    }
    let mut out: Vec<GateDetection> = by_loc.into_values().collect();
    for g in &mut out {
        g.qubits.sort_unstable();
        g.detected_fraction = if g.p_total > 0.0 { g.p_detect / g.p_total } else { 0.0 };
    }
    out
}

/// Sum undetected logical shares by source and by logical label.
pub fn coefficients(report: &FaultReport) -> FaultCoefficients {
    let mut out = FaultCoefficients::default();
    for f in &report.faults {
        if f.class != FaultClass::UndetectedLogical {
            continue;
        }
        if f.flips_state {
            out.effective.add(f.source, f.share());
        }
        if let Some(l) = f.label {
            out.channel.entry(l).or_default().add(f.source, f.share());
        }
    }
    out
}

/// Histogram of per-gate detection fractions, `bins` equal buckets on [0, 1]
/// with 1.0 falling into the last one.
pub fn detection_histogram(report: &FaultReport, kind: GateKind, bins: usize) -> Vec<usize> {
    let mut h = vec![0; bins.max(1)];
    for g in report.gates.iter().filter(|g| g.kind == kind) {
        let k = ((g.detected_fraction * h.len() as f64) as usize).min(h.len() - 1);
        h[k] += 1;
    }
    h
}

/// First-order acceptance estimate from per-gate detection probabilities.
pub fn acceptance_from_detection(report: &FaultReport) -> f64 {
    report.gates.iter().map(|g| 1.0 - g.p_detect).product()
}

/// Second-order contribution of fault pairs that escape the window and flip the state.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PairSearch {
    pub pairs_checked: u64,
    pub logical_pairs: u64,
    /// Sum of `p_i p_j` over logical pairs.
    pub probability: f64,
    /// True when the search stopped at the pair budget.
    pub truncated: bool,
}

/// Bounded search over pairs of Pauli terms at distinct locations.
///
/// Only pairs whose window syndromes cancel can escape post-selection, so
/// terms are grouped by their window detectors first.
pub fn pair_search(c: &Circuit, max_pairs: u64) -> Result<PairSearch> {
    let terms = enumerate_terms(c);
    let sigs = term_signatures(c, &terms);
    let dem = build_dem(c)?;
    let cl = Classifier { window: c.window_detectors(), decoder: Decoder::new(&dem)?, circuit: c };
    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (k, (t, s)) in terms.iter().zip(&sigs).enumerate() {
        if t.erasure || s.is_trivial() {
            continue;
        }
        let key: Vec<u32> = s.detectors.iter().copied().filter(|&d| cl.window[d as usize]).collect();
        groups.entry(key).or_default().push(k);
    }
    let mut keys: Vec<&Vec<u32>> = groups.keys().collect();
    keys.sort();
    let mut out = PairSearch::default();
    for key in keys {
        let g = &groups[key];
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                if terms[i].location == terms[j].location {
                    continue;
                }
                if out.pairs_checked >= max_pairs {
                    out.truncated = true;
                    return Ok(out);
                }
                out.pairs_checked += 1;
                let s = sigs[i].xor(&sigs[j]);
                let (flip, _) = cl.residual(&s)?;
                if flip {
                    out.logical_pairs += 1;
                    out.probability += terms[i].probability * terms[j].probability;
                }
            }
        }
    }
    Ok(out)
}
