//! Post-selected injection runs: acceptance, logical error and expected volume.

use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builders::{build, ProtocolConfig};
use crate::circuit::{Circuit, Op};
use crate::decoder::Decoder;
use crate::dem::{build_dem, DetectorErrorModel};
use crate::error::{Error, Result};
use crate::faults::{acceptance_from_detection, enumerate_faults};
use crate::noise::{annotate_region, Cadence, ErasurePlan, NoiseParams, NoiseRegion};
use crate::sampler::{FrameSampler, ShotRecord, LANES};
use crate::stats::Estimate;

/// Discard rules applied inside the injection window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostSelectionPolicy {
    /// Discard when any window detector fires.
    pub pauli_rule: bool,
    /// Discard when the number of window erasure flags reaches `discard_threshold`.
    pub erasure_rule: bool,
    pub discard_threshold: u32,
}

impl Default for PostSelectionPolicy {
    fn default() -> Self {
        PostSelectionPolicy { pauli_rule: true, erasure_rule: true, discard_threshold: 1 }
    }
}

impl PostSelectionPolicy {
    pub fn with_threshold(mut self, t: u32) -> Self {
        self.discard_threshold = t.max(1);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    pub shots: u64,
    pub acceptance: Estimate,
    pub logical: Estimate,
    /// `Q_{d1} r / AR`; `None` when nothing was accepted.
    pub volume: Option<f64>,
}

impl RunResult {
    pub const CSV_HEADER: &'static str = "scenario,d1,d2,r,shots,accepted,ar,ar_lo,ar_hi,logical_fails,pl,pl_lo,pl_hi,volume";

    pub fn csv_row(&self) -> String {
        let a = &self.acceptance;
        let l = &self.logical;
        let mut s = String::new();
        write!(
            s,
            "{},{},{},{},{},{},{:.9e},{:.9e},{:.9e},{},{:.9e},{:.9e},{:.9e},",
            self.scenario, self.d1, self.d2, self.r, self.shots, a.k, a.rate, a.ci_low, a.ci_high, l.k, l.rate, l.ci_low, l.ci_high
        )
        .unwrap();
        match self.volume {
            Some(v) => write!(s, "{v:.9e}").unwrap(),
            None => s.push_str("nan"),
        }
        s
    }
}

/// Space-time volume per accepted state.
pub fn expected_volume(q_d1: usize, r: usize, ar: f64) -> Option<f64> {
    (ar > 0.0).then(|| (q_d1 * r) as f64 / ar)
}

#[derive(Clone, Copy, Default)]
struct Tally {
    shots: u64,
    accepted: u64,
    fails: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally { shots: self.shots + o.shots, accepted: self.accepted + o.accepted, fails: self.fails + o.fails }
    }
}

/// Everything a run needs that does not change from shot to shot.
pub struct Runner<'c> {
    circuit: &'c Circuit,
    sampler: FrameSampler<'c>,
    dem: DetectorErrorModel,
    decoder: Decoder,
    window: Vec<usize>,
    window_slots: Vec<usize>,
    policy: PostSelectionPolicy,
}

impl<'c> Runner<'c> {
    pub fn new(circuit: &'c Circuit, policy: PostSelectionPolicy) -> Result<Self> {
        let sampler = FrameSampler::new(circuit)?;
        let dem = build_dem(circuit)?;
        let decoder = Decoder::new(&dem)?;
        let window = circuit.window_detectors().iter().enumerate().filter(|(_, &w)| w).map(|(k, _)| k).collect();
        let rounds = circuit.round_of_instructions();
        let w = circuit.window_rounds();
        let window_slots = sampler
            .check_slots()
            .iter()
            .enumerate()
            .filter(|(_, s)| rounds[s.instruction] <= w)
            .map(|(k, _)| k)
            .collect();
        Ok(Runner { circuit, sampler, dem, decoder, window, window_slots, policy })
    }

    pub fn dem(&self) -> &DetectorErrorModel {
        &self.dem
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    /// Whether a single shot survives post-selection.
    pub fn accepts(&self, r: &ShotRecord) -> bool {
        if self.policy.pauli_rule && self.window.iter().any(|&d| r.detectors[d]) {
            return false;
        }
        let flagged = self.window_slots.iter().filter(|&&k| r.erasure_flags[k]).count() as u32;
        !(self.policy.erasure_rule && flagged >= self.policy.discard_threshold)
    }

    fn block(&self, seed: u64, block: u64, lanes: u64) -> Result<Tally> {
        let b = self.sampler.sample_batch(seed, block);
        let mut accept = lanes;
        if self.policy.pauli_rule {
            for &d in &self.window {
                accept &= !b.detectors[d];
            }
        }
        if self.policy.erasure_rule && !self.window_slots.is_empty() {
            let mut counts = [0u32; LANES];
            for &k in &self.window_slots {
                let mut w = b.flags[k] & accept;
                while w != 0 {
                    counts[w.trailing_zeros() as usize] += 1;
                    w &= w - 1;
                }
            }
            for (lane, &n) in counts.iter().enumerate() {
                if n >= self.policy.discard_threshold {
                    accept &= !(1u64 << lane);
                }
            }
        }
        let mut fired: Vec<Vec<u32>> = vec![Vec::new(); LANES];
        for (d, &w) in b.detectors.iter().enumerate() {
            let mut w = w & accept;
            while w != 0 {
                fired[w.trailing_zeros() as usize].push(d as u32);
                w &= w - 1;
            }
        }
        let mut t = Tally { shots: lanes.count_ones() as u64, accepted: accept.count_ones() as u64, fails: 0 };
        let obs = b.observables.first().copied().unwrap_or(0);
        let mut rest = accept;
        while rest != 0 {
            let lane = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let erased = self.dem.erased_edges(&b.erased_locations(lane));
            let c = self.decoder.decode(&fired[lane], &erased)?;
            if (c.observables & 1) as u64 != (obs >> lane) & 1 {
                t.fails += 1;
            }
        }
        Ok(t)
    }

    /// Sample `shots` shots in parallel 64-shot blocks.
    pub fn run(&self, shots: u64, seed: u64, scenario: &str) -> Result<RunResult> {
        let blocks = shots.div_ceil(LANES as u64);
        let tally = (0..blocks)
            .into_par_iter()
            .map(|blk| {
                let remaining = shots - blk * LANES as u64;
                let lanes = if remaining >= LANES as u64 { u64::MAX } else { (1u64 << remaining) - 1 };
                self.block(seed, blk, lanes)
            })
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
        let c = self.circuit;
        let acceptance = Estimate::wilson(tally.accepted, tally.shots);
        let r = c.meta_usize("r").unwrap_or(1);
        let q = c.meta_usize("q_d1").unwrap_or(c.num_qubits());
        Ok(RunResult {
            scenario: scenario.to_string(),
            d1: c.meta_usize("d1").unwrap_or(0),
            d2: c.meta_usize("d2").unwrap_or(0),
            r,
            shots: tally.shots,
            acceptance,
            logical: Estimate::wilson(tally.fails, tally.accepted),
            volume: expected_volume(q, r, acceptance.rate),
        })
    }
}

/// Sample an annotated circuit and post-select, decode and count logical failures.
pub fn run_protocol(circuit: &Circuit, policy: PostSelectionPolicy, shots: u64, seed: u64, scenario: &str) -> Result<RunResult> {
    Runner::new(circuit, policy)?.run(shots, seed, scenario)
}

/// One full experiment: protocol, noise and post-selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub protocol: ProtocolConfig,
    pub noise: NoiseParams,
    /// Erasure qubits; `None` means every qubit.
    pub erasure_qubits: Option<Vec<u32>>,
    #[serde(default)]
    pub region: NoiseRegion,
    #[serde(default)]
    pub cadence: Cadence,
    #[serde(default)]
    pub policy: PostSelectionPolicy,
}

impl Scenario {
    pub fn new(name: &str, protocol: ProtocolConfig, noise: NoiseParams) -> Self {
        Scenario {
            name: name.to_string(),
            protocol,
            noise,
            erasure_qubits: None,
            region: NoiseRegion::All,
            cadence: Cadence::PerRound,
            policy: PostSelectionPolicy::default(),
        }
    }

    pub fn noisy_circuit(&self) -> Result<Circuit> {
        let c = build(&self.protocol)?;
        let plan = match &self.erasure_qubits {
            Some(qs) => ErasurePlan::subset(qs.iter().copied()),
            None => ErasurePlan::all(&c),
        }
        .with_threshold(self.policy.discard_threshold)
        .with_cadence(self.cadence);
        annotate_region(&c, &self.noise, &plan, self.region)
    }

    pub fn run(&self, shots: u64, seed: u64) -> Result<RunResult> {
        let c = self.noisy_circuit()?;
        run_protocol(&c, self.policy, shots, seed, &self.name)
    }
}

/// Predicted acceptance rates of an annotated circuit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptancePrediction {
    /// Probability that no erasure happens inside the window.
    pub ar_e: f64,
    /// First-order probability that no Pauli error is detected.
    pub ar_p: f64,
}

pub fn acceptance_prediction(circuit: &Circuit) -> Result<AcceptancePrediction> {
    let rounds = circuit.round_of_instructions();
    let w = circuit.window_rounds();
    let mut ar_e = 1.0;
    for (ins, &round) in circuit.instructions.iter().zip(&rounds) {
        if round > w {
            continue;
        }
        match ins.op {
            Op::Erase1(p) => ar_e *= (1.0 - p).powi(ins.targets.len() as i32),
            Op::Erase2(p) => ar_e *= (1.0 - p).powi((ins.targets.len() / 2) as i32),
            _ => {}
        }
    }
    let ar_p = if circuit.num_observables() > 0 {
        acceptance_from_detection(&enumerate_faults(circuit)?)
    } else {
        1.0
    };
    Ok(AcceptancePrediction { ar_e, ar_p })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub d1: usize,
    pub r: usize,
    pub result: Option<RunResult>,
    pub error: Option<String>,
    pub dominated: bool,
}

/// Mark points whose (volume, p_L) is beaten in both coordinates by another point.
pub fn mark_dominated(points: &mut [ParetoPoint]) {
    let key = |p: &ParetoPoint| p.result.as_ref().and_then(|r| r.volume.map(|v| (v, r.logical.rate)));
    let keys: Vec<Option<(f64, f64)>> = points.iter().map(key).collect();
    for (i, p) in points.iter_mut().enumerate() {
        p.dominated = match keys[i] {
            None => true,
            Some((v, l)) => keys
                .iter()
                .enumerate()
                .any(|(j, k)| j != i && k.is_some_and(|(v2, l2)| v2 <= v && l2 <= l && (v2 < v || l2 < l))),
        };
    }
}

/// Run every `(d1, r)` of a template scenario; failures are kept per point.
pub fn pareto_sweep(template: &Scenario, configs: &[(usize, usize)], shots: u64, seed: u64) -> Vec<ParetoPoint> {
    let mut points: Vec<ParetoPoint> = configs
        .iter()
        .map(|&(d1, r)| {
            let mut s = template.clone();
            s.protocol.d1 = d1;
            s.protocol.r = r;
            match s.run(shots, seed) {
                Ok(res) => ParetoPoint { d1, r, result: Some(res), error: None, dominated: false },
                Err(e) => ParetoPoint { d1, r, result: None, error: Some(e.to_string()), dominated: false },
            }
        })
        .collect();
    mark_dominated(&mut points);
    points
}

/// Reject obviously inconsistent shot counts early.
pub fn check_shots(shots: u64) -> Result<()> {
    if shots == 0 {
        return Err(Error::Config("shots must be positive".into()));
    }
    Ok(())
}
