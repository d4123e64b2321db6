//! Bit-sliced Pauli-frame sampler with erasure tracking.
//!
//! Shots are simulated 64 at a time, one lane per bit of a `u64`. The frame
//! records how the noisy run differs from a noiseless reference; measurement
//! flips feed detectors and observables directly.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Op};
use crate::error::{Error, Result};
use crate::noise::two_qubit_erasure_split;
use crate::rng::{ln_q, Stream};
use crate::tableau::{annotation_exprs, symbolic_outcomes};

pub const LANES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }
}

/// A deterministic Pauli applied just before instruction `at` on selected lanes.
#[derive(Clone, Debug)]
pub struct ForcedPauli {
    pub at: usize,
    pub qubit: u32,
    pub pauli: Pauli,
    pub lanes: u64,
}

/// One erasure event: instruction index, qubit and the lanes that were erased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ErasureEvent {
    pub instruction: u32,
    pub qubit: u32,
    pub lanes: u64,
}

/// Results for one block of 64 shots.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub block: u64,
    pub detectors: Vec<u64>,
    pub observables: Vec<u64>,
    pub measurements: Vec<u64>,
    /// One word per (check instruction, qubit) slot, in circuit order.
    pub flags: Vec<u64>,
    pub erasures: Vec<ErasureEvent>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub detectors: Vec<bool>,
    pub erasure_flags: Vec<bool>,
    pub observable_flip: Vec<bool>,
    pub erased_locations: Vec<(u32, u32)>,
    pub seed: u64,
    pub shot: u64,
}

/// Hex digits of a bit vector; digit `k` holds bits `4k..4k+4`, least significant first.
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(4)
        .map(|c| {
            let v = c.iter().enumerate().fold(0u32, |a, (i, &b)| a | (b as u32) << i);
            char::from_digit(v, 16).unwrap()
        })
        .collect()
}

pub fn hex_to_bits(hex: &str, n: usize) -> Result<Vec<bool>> {
    if hex.len() != n.div_ceil(4) {
        return Err(Error::Config(format!("expected {} hex digits for {n} bits, got {}", n.div_ceil(4), hex.len())));
    }
    let mut out = Vec::with_capacity(n);
    for ch in hex.chars() {
        let v = ch.to_digit(16).ok_or_else(|| Error::Config(format!("'{ch}' is not a hex digit")))?;
        out.extend((0..4).map(|i| v >> i & 1 == 1));
    }
    if out[n..].iter().any(|&b| b) {
        return Err(Error::Config("padding bits must be zero".into()));
    }
    out.truncate(n);
    Ok(out)
}

impl ShotRecord {
    pub const CSV_HEADER: &'static str = "shot,detectors,flags,observable,accepted,erased";

    /// One dump line; `erased` lists `instruction:qubit` pairs separated by `;`.
    pub fn csv_row(&self, accepted: bool) -> String {
        let erased: Vec<String> = self.erased_locations.iter().map(|(i, q)| format!("{i}:{q}")).collect();
        let obs = self.observable_flip.first().copied().unwrap_or(false) as u8;
        format!(
            "{},{},{},{},{},{}",
            self.shot,
            bits_to_hex(&self.detectors),
            bits_to_hex(&self.erasure_flags),
            obs,
            accepted as u8,
            erased.join(";")
        )
    }

    /// Parse a dump line for a circuit with the given detector and check-slot counts.
    pub fn from_csv_row(line: &str, seed: u64, detectors: usize, slots: usize) -> Result<ShotRecord> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::Config(format!("expected 6 columns, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|_| Error::Config(format!("'{s}' is not a number")));
        let mut erased_locations = Vec::new();
        for item in f[5].split(';').filter(|s| !s.is_empty()) {
            let (i, q) = item.split_once(':').ok_or_else(|| Error::Config(format!("bad erased location '{item}'")))?;
            erased_locations.push((num(i)? as u32, num(q)? as u32));
        }
        Ok(ShotRecord {
            detectors: hex_to_bits(f[1], detectors)?,
            erasure_flags: hex_to_bits(f[2], slots)?,
            observable_flip: vec![num(f[3])? & 1 == 1],
            erased_locations,
            seed,
            shot: num(f[0])?,
        })
    }
}

/// Slot of an erasure-check outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckSlot {
    pub instruction: usize,
    pub qubit: u32,
}

pub struct FrameSampler<'c> {
    circuit: &'c Circuit,
    ln_q: Vec<f64>,
    split: Vec<f64>,
    detectors: Vec<Vec<u32>>,
    observables: Vec<Vec<u32>>,
    checks: Vec<CheckSlot>,
    gauge: bool,
}

/// Absolute measurement indices referenced by each detector and observable.
pub(crate) fn annotation_indices(c: &Circuit) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let mut dets = Vec::new();
    let mut obs = vec![Vec::new(); c.num_observables()];
    let mut measured = 0u32;
    for ins in &c.instructions {
        match &ins.op {
            op if op.is_measure() => measured += ins.targets.len() as u32,
            Op::Detector(recs) => dets.push(recs.iter().map(|&k| measured - k).collect()),
            Op::Observable(id, recs) => obs[*id as usize].extend(recs.iter().map(|&k| measured - k)),
            _ => {}
        }
    }
    (dets, obs)
}

pub fn check_slots(c: &Circuit) -> Vec<CheckSlot> {
    let mut out = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        if let Op::ErasureCheck { .. } = ins.op {
            out.extend(ins.targets.iter().map(|&q| CheckSlot { instruction: i, qubit: q }));
        }
    }
    out
}

impl<'c> FrameSampler<'c> {
    pub fn new(circuit: &'c Circuit) -> Result<Self> {
        let report = circuit.validate();
        if let Some(v) = report.first() {
            return Err(Error::Invalid(v.to_string()));
        }
        let mut lq = vec![0.0; circuit.instructions.len()];
        let mut split = vec![0.0; circuit.instructions.len()];
        for (i, ins) in circuit.instructions.iter().enumerate() {
            match ins.op {
                Op::T => return Err(Error::Unsupported("T is not Clifford; the sampler cannot run it".into())),
                Op::Depol1(p) | Op::Depol2(p) | Op::Erase1(p) | Op::XError(p) | Op::ZError(p) => lq[i] = ln_q(p),
                Op::Erase2(p) => {
                    split[i] = two_qubit_erasure_split(p);
                    lq[i] = ln_q(split[i]);
                }
                _ => {}
            }
        }
        let (detectors, observables) = annotation_indices(circuit);
        Ok(FrameSampler { circuit, ln_q: lq, split, detectors, observables, checks: check_slots(circuit), gauge: true })
    }

    /// Disable random gauge flips on resets and measurements (useful for tests).
    pub fn without_gauge(mut self) -> Self {
        self.gauge = false;
        self
    }

    pub fn circuit(&self) -> &Circuit {
        self.circuit
    }

    pub fn check_slots(&self) -> &[CheckSlot] {
        &self.checks
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn sample_batch(&self, seed: u64, block: u64) -> Batch {
        self.sample_batch_forced(seed, block, &[])
    }

    pub fn sample_batch_forced(&self, seed: u64, block: u64, forced: &[ForcedPauli]) -> Batch {
        let c = self.circuit;
        let n = c.num_qubits();
        let mut x = vec![0u64; n];
        let mut z = vec![0u64; n];
        let mut erased = vec![0u64; n];
        let mut meas: Vec<u64> = Vec::with_capacity(c.num_measurements());
        let mut flags = Vec::with_capacity(self.checks.len());
        let mut events = Vec::new();
        let mut forced_sorted: Vec<&ForcedPauli> = forced.iter().collect();
        forced_sorted.sort_by_key(|f| f.at);
        let mut fi = 0;

        for (i, ins) in c.instructions.iter().enumerate() {
            while fi < forced_sorted.len() && forced_sorted[fi].at == i {
                let f = forced_sorted[fi];
                let (fx, fz) = f.pauli.bits();
                if fx {
                    x[f.qubit as usize] ^= f.lanes;
                }
                if fz {
                    z[f.qubit as usize] ^= f.lanes;
                }
                fi += 1;
            }
            let op = &ins.op;
            if matches!(op, Op::Tick | Op::Detector(_) | Op::Observable(..)) {
                continue;
            }
            let p_zero = match *op {
                Op::Depol1(p) | Op::Depol2(p) | Op::Erase1(p) | Op::Erase2(p) | Op::XError(p) | Op::ZError(p) => p <= 0.0,
                Op::ErasureCheck { .. } => false,
                _ => false,
            };
            if p_zero {
                continue;
            }
            let needs_rng = !matches!(op, Op::H | Op::S | Op::SDag | Op::Cx)
                || ins.targets.iter().any(|&q| erased[q as usize] != 0);
            let mut rng = if needs_rng || self.gauge && (op.is_reset() || op.is_measure()) {
                Some(Stream::new(seed, block, i as u64))
            } else {
                None
            };

            // Erased qubits randomise themselves, and partners, at every later operation.
            if op.is_operation() && !op.is_reset() {
                if let Some(r) = rng.as_mut() {
                    if *op == Op::Cx {
                        for (a, b) in ins.pairs() {
                            let m = erased[a as usize] | erased[b as usize];
                            if m != 0 {
                                for q in [a, b] {
                                    x[q as usize] ^= r.next_u64() & m;
                                    z[q as usize] ^= r.next_u64() & m;
                                    events.push(ErasureEvent { instruction: i as u32, qubit: q, lanes: m });
                                }
                            }
                        }
                    } else {
                        for &q in &ins.targets {
                            let m = erased[q as usize];
                            if m != 0 {
                                x[q as usize] ^= r.next_u64() & m;
                                z[q as usize] ^= r.next_u64() & m;
                                events.push(ErasureEvent { instruction: i as u32, qubit: q, lanes: m });
                            }
                        }
                    }
                }
            }

            match *op {
                Op::ResetZ | Op::ResetX => {
                    for &q in &ins.targets {
                        let q = q as usize;
                        x[q] = 0;
                        z[q] = 0;
                        erased[q] = 0;
                        if self.gauge {
                            let g = rng.as_mut().unwrap().next_u64();
                            if *op == Op::ResetZ {
                                z[q] = g;
                            } else {
                                x[q] = g;
                            }
                        }
                    }
                }
                Op::H => {
                    for &q in &ins.targets {
                        std::mem::swap(&mut x[q as usize], &mut z[q as usize]);
                    }
                }
                Op::S | Op::SDag => {
                    for &q in &ins.targets {
                        z[q as usize] ^= x[q as usize];
                    }
                }
                Op::Cx => {
                    for (a, b) in ins.pairs() {
                        x[b as usize] ^= x[a as usize];
                        z[a as usize] ^= z[b as usize];
                    }
                }
                Op::MeasureZ | Op::MeasureX => {
                    for &q in &ins.targets {
                        let q = q as usize;
                        if *op == Op::MeasureZ {
                            meas.push(x[q]);
                            if self.gauge {
                                z[q] ^= rng.as_mut().unwrap().next_u64();
                            }
                        } else {
                            meas.push(z[q]);
                            if self.gauge {
                                x[q] ^= rng.as_mut().unwrap().next_u64();
                            }
                        }
                    }
                }
                Op::Depol1(p) => {
                    let r = rng.as_mut().unwrap();
                    for &q in &ins.targets {
                        let mut m = r.bernoulli_mask(p, self.ln_q[i]);
                        while m != 0 {
                            let lane = m.trailing_zeros();
                            let k = r.below(3) + 1;
                            x[q as usize] ^= (k & 1) << lane;
                            z[q as usize] ^= (k >> 1) << lane;
                            m &= m - 1;
                        }
                    }
                }
                Op::Depol2(p) => {
                    let r = rng.as_mut().unwrap();
                    for (a, b) in ins.pairs() {
                        let mut m = r.bernoulli_mask(p, self.ln_q[i]);
                        while m != 0 {
                            let lane = m.trailing_zeros();
                            let k = r.below(15) + 1;
                            x[a as usize] ^= (k & 1) << lane;
                            z[a as usize] ^= ((k >> 1) & 1) << lane;
                            x[b as usize] ^= ((k >> 2) & 1) << lane;
                            z[b as usize] ^= ((k >> 3) & 1) << lane;
                            m &= m - 1;
                        }
                    }
                }
                Op::XError(p) => {
                    let r = rng.as_mut().unwrap();
                    for &q in &ins.targets {
                        x[q as usize] ^= r.bernoulli_mask(p, self.ln_q[i]);
                    }
                }
                Op::ZError(p) => {
                    let r = rng.as_mut().unwrap();
                    for &q in &ins.targets {
                        z[q as usize] ^= r.bernoulli_mask(p, self.ln_q[i]);
                    }
                }
                Op::Erase1(_) | Op::Erase2(_) => {
                    let p = match *op {
                        Op::Erase1(p) => p,
                        _ => self.split[i],
                    };
                    let r = rng.as_mut().unwrap();
                    for &q in &ins.targets {
                        let m = r.bernoulli_mask(p, self.ln_q[i]);
                        if m != 0 {
                            let q = q as usize;
                            x[q] ^= r.next_u64() & m;
                            z[q] ^= r.next_u64() & m;
                            erased[q] |= m;
                            events.push(ErasureEvent { instruction: i as u32, qubit: q as u32, lanes: m });
                        }
                    }
                }
                Op::ErasureCheck { fp, fn_ } => {
                    let r = rng.as_mut().unwrap();
                    let (lfp, lfn) = (ln_q(fp), ln_q(fn_));
                    for &q in &ins.targets {
                        let q = q as usize;
                        let e = erased[q];
                        let misses = r.bernoulli_mask(fn_, lfn) & e;
                        let false_pos = r.bernoulli_mask(fp, lfp) & !e;
                        let flag = (e & !misses) | false_pos;
                        // A flagged erased qubit returns to the computational space fully mixed.
                        let caught = e & flag;
                        if caught != 0 {
                            x[q] ^= r.next_u64() & caught;
                            z[q] ^= r.next_u64() & caught;
                            erased[q] &= !caught;
                            events.push(ErasureEvent { instruction: i as u32, qubit: q as u32, lanes: caught });
                        }
                        flags.push(flag);
                    }
                }
                Op::T => unreachable!("rejected at construction"),
                Op::Tick | Op::Detector(_) | Op::Observable(..) => {}
            }
        }

        let fold = |idx: &Vec<u32>| idx.iter().fold(0u64, |acc, &m| acc ^ meas[m as usize]);
        Batch {
            block,
            detectors: self.detectors.iter().map(fold).collect(),
            observables: self.observables.iter().map(fold).collect(),
            measurements: meas,
            flags,
            erasures: events,
        }
    }

    /// Per-shot records for shots `start..start+count`.
    pub fn sample(&self, shots: u64, seed: u64) -> Vec<ShotRecord> {
        self.sample_range(0, shots, seed)
    }

    pub fn sample_range(&self, start: u64, count: u64, seed: u64) -> Vec<ShotRecord> {
        let mut out = Vec::with_capacity(count as usize);
        if count == 0 {
            return out;
        }
        let first_block = start / LANES as u64;
        let last_block = (start + count - 1) / LANES as u64;
        for block in first_block..=last_block {
            let b = self.sample_batch(seed, block);
            for lane in 0..LANES as u64 {
                let shot = block * LANES as u64 + lane;
                if shot < start || shot >= start + count {
                    continue;
                }
                out.push(b.record(lane as usize, seed));
            }
        }
        out
    }
}

impl Batch {
    pub fn record(&self, lane: usize, seed: u64) -> ShotRecord {
        let bit = |w: &u64| (w >> lane) & 1 == 1;
        ShotRecord {
            detectors: self.detectors.iter().map(bit).collect(),
            erasure_flags: self.flags.iter().map(bit).collect(),
            observable_flip: self.observables.iter().map(bit).collect(),
            erased_locations: self
                .erasures
                .iter()
                .filter(|e| (e.lanes >> lane) & 1 == 1)
                .map(|e| (e.instruction, e.qubit))
                .collect(),
            seed,
            shot: self.block * LANES as u64 + lane as u64,
        }
    }

    /// Erased (instruction, qubit) locations of one lane.
    pub fn erased_locations(&self, lane: usize) -> Vec<(u32, u32)> {
        self.erasures
            .iter()
            .filter(|e| (e.lanes >> lane) & 1 == 1)
            .map(|e| (e.instruction, e.qubit))
            .collect()
    }
}

/// Noiseless measurement values. Deterministic outcomes are exact; random
/// outcomes follow a fixed seed-0 branch convention.
pub fn reference_frame(c: &Circuit) -> Result<Vec<bool>> {
    let (outcomes, _) = symbolic_outcomes(c)?;
    let mut branch = Stream::new(0, u64::MAX, 0);
    let n_sym = outcomes.iter().map(|e| e.symbols.len() * 64).max().unwrap_or(0);
    let bits: Vec<bool> = (0..n_sym).map(|_| branch.next_u64() & 1 == 1).collect();
    Ok(outcomes.iter().map(|e| e.eval(|k| bits[k])).collect())
}

/// Detectors whose noiseless value is not fixed, which would make them useless.
pub fn nondeterministic_detectors(c: &Circuit) -> Result<Vec<usize>> {
    let (outcomes, sw) = symbolic_outcomes(c)?;
    let (dets, obs) = annotation_exprs(c, &outcomes, sw);
    let mut bad: Vec<usize> = dets.iter().enumerate().filter(|(_, e)| !e.is_deterministic()).map(|(i, _)| i).collect();
    bad.extend(obs.iter().enumerate().filter(|(_, e)| !e.is_deterministic()).map(|(i, _)| usize::MAX - i));
    Ok(bad)
}
