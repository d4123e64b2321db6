//! Noise annotation: Pauli channels, erasure channels and erasure checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::circuit::{idle_locations, Circuit, Instruction, Op};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Residual one-qubit gate and idle Pauli rate.
    pub p1: f64,
    pub p2: f64,
    pub p_spam: f64,
    #[serde(default)]
    pub e1: f64,
    #[serde(default)]
    pub e2: f64,
    #[serde(default)]
    pub e_spam: f64,
    #[serde(default)]
    pub e_fp: f64,
    #[serde(default)]
    pub e_fn: f64,
    /// Pauli rates for locations touching non-erasure qubits; defaults to the rates above.
    #[serde(default)]
    pub non_erasure: Option<PauliRates>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliRates {
    pub p1: f64,
    pub p2: f64,
    pub p_spam: f64,
}

/// Idle and one-qubit rates are a tenth of the two-qubit rate.
pub const IDLE_SCALE: f64 = 0.1;

impl NoiseParams {
    pub fn zero() -> Self {
        NoiseParams::uniform_pauli(0.0)
    }

    /// Pauli-only noise at rate `p` with `p1 = p/10`.
    pub fn uniform_pauli(p: f64) -> Self {
        NoiseParams { p1: p * IDLE_SCALE, p2: p, p_spam: p, e1: 0.0, e2: 0.0, e_spam: 0.0, e_fp: 0.0, e_fn: 0.0, non_erasure: None }
    }

    /// Erasure rate `e` with residual Pauli rate `p`, both with the 1/10 one-qubit scaling.
    pub fn erasure(e: f64, p: f64) -> Self {
        NoiseParams {
            p1: p * IDLE_SCALE,
            p2: p,
            p_spam: p,
            e1: e * IDLE_SCALE,
            e2: e,
            e_spam: e,
            e_fp: 0.0,
            e_fn: 0.0,
            non_erasure: None,
        }
    }

    pub fn with_detection(mut self, e_fp: f64, e_fn: f64) -> Self {
        self.e_fp = e_fp;
        self.e_fn = e_fn;
        self
    }

    /// Hybrid patch: non-erasure qubits see Pauli rate `p_n`.
    pub fn with_non_erasure(mut self, p_n: f64) -> Self {
        self.non_erasure = Some(PauliRates { p1: p_n * IDLE_SCALE, p2: p_n, p_spam: p_n });
        self
    }

    /// Uniform model: every operation carries the same rate `p` (and `e`).
    pub fn flat(e: f64, p: f64) -> Self {
        NoiseParams { p1: p, p2: p, p_spam: p, e1: e, e2: e, e_spam: e, e_fp: 0.0, e_fn: 0.0, non_erasure: None }
    }

    pub fn has_erasure(&self) -> bool {
        self.e1 > 0.0 || self.e2 > 0.0 || self.e_spam > 0.0 || self.e_fp > 0.0
    }

    fn pauli(&self, erasure_side: bool) -> PauliRates {
        match (erasure_side, self.non_erasure) {
            (false, Some(r)) => r,
            _ => PauliRates { p1: self.p1, p2: self.p2, p_spam: self.p_spam },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut all = vec![self.p1, self.p2, self.p_spam, self.e1, self.e2, self.e_spam, self.e_fp, self.e_fn];
        if let Some(r) = self.non_erasure {
            all.extend([r.p1, r.p2, r.p_spam]);
        }
        if all.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("noise probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// The pre-registered scenarios.
pub fn named_scenario(name: &str) -> Option<NoiseParams> {
    Some(match name {
        "non_erasure" => NoiseParams::uniform_pauli(1e-3),
        "near_perfect" => NoiseParams::erasure(1e-3, 1e-4),
        "imperfect_4e-3" => NoiseParams::erasure(4e-3, 1e-4),
        "imperfect_1e-2" => NoiseParams::erasure(1e-2, 1e-4),
        _ => return None,
    })
}

pub const SCENARIO_NAMES: [&str; 4] = ["non_erasure", "near_perfect", "imperfect_4e-3", "imperfect_1e-2"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    #[default]
    PerRound,
    EndOnly,
    PerGate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErasurePlan {
    pub erasure_qubits: BTreeSet<u32>,
    pub detection_cadence: Cadence,
    pub discard_threshold: u32,
}

impl ErasurePlan {
    pub fn all(c: &Circuit) -> Self {
        ErasurePlan { erasure_qubits: (0..c.num_qubits() as u32).collect(), detection_cadence: Cadence::PerRound, discard_threshold: 1 }
    }

    pub fn subset(qs: impl IntoIterator<Item = u32>) -> Self {
        ErasurePlan { erasure_qubits: qs.into_iter().collect(), detection_cadence: Cadence::PerRound, discard_threshold: 1 }
    }

    pub fn with_cadence(mut self, c: Cadence) -> Self {
        self.detection_cadence = c;
        self
    }

    pub fn with_threshold(mut self, t: u32) -> Self {
        self.discard_threshold = t;
        self
    }
}

/// Which part of the circuit receives noise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRegion {
    #[default]
    All,
    /// Noise starts at the expansion round; the injection is noiseless.
    FromExpansion,
}

/// Per-qubit erasure probability of a two-qubit erasure channel.
pub fn two_qubit_erasure_split(e2: f64) -> f64 {
    1.0 - (1.0 - e2).sqrt()
}

pub fn annotate(c: &Circuit, params: &NoiseParams, plan: &ErasurePlan) -> Result<Circuit> {
    annotate_region(c, params, plan, NoiseRegion::All)
}

pub fn annotate_region(c: &Circuit, params: &NoiseParams, plan: &ErasurePlan, region: NoiseRegion) -> Result<Circuit> {
    if c.has_noise() {
        return Err(Error::Invalid("circuit is already annotated".into()));
    }
    params.validate()?;
    let nq = c.num_qubits() as u32;
    if let Some(q) = plan.erasure_qubits.iter().find(|&&q| q >= nq) {
        return Err(Error::Config(format!("erasure plan references unknown qubit {q}")));
    }
    let noisy_from = match region {
        NoiseRegion::All => 1,
        NoiseRegion::FromExpansion => c
            .meta_usize("expansion_round")
            .ok_or_else(|| Error::Config("circuit has no expansion round".into()))?,
    };
    let noiseless_from = c.meta_usize("noiseless_from").unwrap_or(usize::MAX);
    let rounds = c.round_of_instructions();
    let noisy = |i: usize| rounds[i] >= noisy_from && rounds[i] < noiseless_from;
    let erasure_on = params.has_erasure();
    let is_e = |q: u32| plan.erasure_qubits.contains(&q);
    let window = c.window_rounds();

    let mut idle_at: Vec<Vec<u32>> = vec![Vec::new(); c.instructions.len() + 1];
    for (at, qs) in idle_locations(c) {
        idle_at[at] = qs;
    }
    // Per-round check positions: after the last instruction of the round.
    let round_ranges = c.rounds();
    let mut check_at = vec![false; c.instructions.len() + 1];
    if erasure_on && plan.detection_cadence != Cadence::PerGate {
        for (k, r) in round_ranges.iter().enumerate() {
            let round = k + 1;
            let emit = match plan.detection_cadence {
                Cadence::PerRound => true,
                Cadence::EndOnly => round == window.min(round_ranges.len()),
                Cadence::PerGate => false,
            };
            if emit && round >= noisy_from && round < noiseless_from {
                let last = r.end - 1;
                let pos = if c.instructions[last].op == Op::Tick { last } else { r.end };
                check_at[pos] = true;
            }
        }
    }

    let mut out = Circuit { qubits: c.qubits.clone(), instructions: Vec::new(), metadata: c.metadata.clone() };
    let mut active = vec![false; nq as usize];
    let push = |out: &mut Circuit, op: Op, t: Vec<u32>| {
        if !t.is_empty() {
            out.instructions.push(Instruction::new(op, t));
        }
    };
    let check = |out: &mut Circuit, qs: Vec<u32>| {
        let qs: Vec<u32> = qs.into_iter().filter(|&q| is_e(q)).collect();
        push(out, Op::ErasureCheck { fp: params.e_fp, fn_: params.e_fn }, qs);
    };
    for (i, ins) in c.instructions.iter().enumerate() {
        let here = noisy(i);
        if here && !idle_at[i].is_empty() {
            let qs = idle_at[i].clone();
            single_noise(&mut out, &qs, params, &is_e, |r| r.p1, params.e1, erasure_on);
            if plan.detection_cadence == Cadence::PerGate && erasure_on {
                check(&mut out, qs);
            }
        }
        if here && check_at[i] {
            let qs: Vec<u32> = (0..nq).filter(|&q| active[q as usize]).collect();
            check(&mut out, qs);
        }
        let op = &ins.op;
        if here && op.is_measure() {
            spam_noise(&mut out, op, &ins.targets, params, &is_e, erasure_on);
        }
        out.instructions.push(ins.clone());
        if op.is_reset() {
            for &q in &ins.targets {
                active[q as usize] = true;
            }
        }
        if !here {
            continue;
        }
        if op.is_reset() {
            spam_noise(&mut out, op, &ins.targets, params, &is_e, erasure_on);
        } else if op.is_single_gate() {
            single_noise(&mut out, &ins.targets, params, &is_e, |r| r.p1, params.e1, erasure_on);
        } else if *op == Op::Cx {
            let mut both = Vec::new();
            let mut mixed = Vec::new();
            let mut lone = Vec::new();
            let mut mixed_side = Vec::new();
            for (a, b) in ins.pairs() {
                match (is_e(a), is_e(b)) {
                    (true, true) => both.extend([a, b]),
                    (false, false) => lone.extend([a, b]),
                    (ea, _) => {
                        mixed.extend([a, b]);
                        mixed_side.push(if ea { a } else { b });
                    }
                }
            }
            let pe = params.pauli(true).p2;
            let pn = params.pauli(false).p2;
            if pe > 0.0 {
                push(&mut out, Op::Depol2(pe), both.clone());
            }
            let mut rest = mixed.clone();
            rest.extend(lone);
            if pn > 0.0 {
                push(&mut out, Op::Depol2(pn), rest);
            }
            if erasure_on && params.e2 > 0.0 {
                push(&mut out, Op::Erase2(params.e2), both);
                push(&mut out, Op::Erase1(two_qubit_erasure_split(params.e2)), mixed_side);
            }
        }
        if plan.detection_cadence == Cadence::PerGate && erasure_on && op.is_operation() {
            check(&mut out, ins.targets.clone());
        }
    }
    if noisy(c.instructions.len().saturating_sub(1)) && check_at[c.instructions.len()] {
        let qs: Vec<u32> = (0..nq).filter(|&q| active[q as usize]).collect();
        check(&mut out, qs);
    }
    Ok(out)
}

/// Basis-matched flips (and SPAM erasures) around a reset or measurement.
fn spam_noise(out: &mut Circuit, op: &Op, qs: &[u32], params: &NoiseParams, is_e: &dyn Fn(u32) -> bool, erasure_on: bool) {
    let (es, ns): (Vec<u32>, Vec<u32>) = qs.iter().partition(|&&q| is_e(q));
    let z_basis = matches!(op, Op::ResetZ | Op::MeasureZ);
    let flip = |p| if z_basis { Op::XError(p) } else { Op::ZError(p) };
    let pe = params.pauli(true).p_spam;
    let pn = params.pauli(false).p_spam;
    if pe > 0.0 && !es.is_empty() {
        out.push(flip(pe), es.clone());
    }
    if pn > 0.0 && !ns.is_empty() {
        out.push(flip(pn), ns);
    }
    if erasure_on && params.e_spam > 0.0 && !es.is_empty() {
        out.push(Op::Erase1(params.e_spam), es);
    }
}

fn single_noise(
    out: &mut Circuit,
    qs: &[u32],
    params: &NoiseParams,
    is_e: &dyn Fn(u32) -> bool,
    p_of: impl Fn(PauliRates) -> f64,
    e_rate: f64,
    erasure_on: bool,
) {
    let (es, ns): (Vec<u32>, Vec<u32>) = qs.iter().partition(|&&q| is_e(q));
    let pe = p_of(params.pauli(true));
    let pn = p_of(params.pauli(false));
    if pe > 0.0 && !es.is_empty() {
        out.push(Op::Depol1(pe), es.clone());
    }
    if pn > 0.0 && !ns.is_empty() {
        out.push(Op::Depol1(pn), ns);
    }
    if erasure_on && e_rate > 0.0 && !es.is_empty() {
        out.push(Op::Erase1(e_rate), es);
    }
}

/// Gate-time model of the hybrid transmon/dual-rail patch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdlingModel {
    pub t1: f64,
    /// Dual-rail/transmon two-qubit gate time.
    pub t_2dr: f64,
    /// Transmon/transmon two-qubit gate time.
    pub t_2tr: f64,
    /// Transmon/dual-rail gate time.
    pub t_trdr: f64,
}

/// Twirled amplitude-damping Pauli probability after idling for `t`.
pub fn idle_pauli(t: f64, t1: f64) -> f64 {
    0.75 - 0.25 * (-t / t1).exp() - 0.5 * (-1.5 * t / t1).exp()
}

/// Erasure probability of a dual-rail qubit after time `t`.
pub fn idle_erasure(t: f64, t1: f64) -> f64 {
    1.0 - (-t / t1).exp()
}

/// Small-time idle Pauli rate `t / 2T1`.
pub fn idle_pauli_linear(t: f64, t1: f64) -> f64 {
    t / (2.0 * t1)
}

/// Replace the non-erasure two-qubit rate by `p2* = (p_n + e2) / 2`.
pub fn idling_adjusted_params(base: &NoiseParams, model: &IdlingModel) -> Result<NoiseParams> {
    let times = [model.t1, model.t_2dr, model.t_2tr, model.t_trdr];
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Config("gate times and T1 must be positive".into()));
    }
    if model.t_2dr < model.t_2tr {
        return Err(Error::Config("t_2dr must not be shorter than t_2tr".into()));
    }
    let mut out = *base;
    let pn = base.non_erasure.map(|r| r.p2).unwrap_or(base.p2);
    let star = (pn + base.e2) / 2.0;
    let mut r = base.non_erasure.unwrap_or(PauliRates { p1: base.p1, p2: base.p2, p_spam: base.p_spam });
    r.p2 = star;
    out.non_erasure = Some(r);
    Ok(out)
}
