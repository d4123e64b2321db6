//! Exact symplectic propagation of single-qubit Paulis to detector signatures.
//!
//! Sixty-four generators are pushed through the noiseless circuit at once,
//! each injected at its own instruction. By linearity the signature of any
//! multi-qubit Pauli term is the XOR of its generators' signatures.

use crate::circuit::{Circuit, Op};
use crate::sampler::annotation_indices;

/// Generator: Pauli X (`z = false`) or Z (`z = true`) on `qubit`, inserted
/// just before instruction `at`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Generator {
    pub at: u32,
    pub qubit: u32,
    pub z: bool,
}

/// Detectors, declared observables and frame-logical bits flipped by a Pauli.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    pub detectors: Vec<u32>,
    pub observables: u32,
    /// Bit 0: X_L component, bit 1: Z_L component, of the residual at the probe point.
    pub logical: u8,
}

impl Signature {
    pub fn xor(&self, other: &Signature) -> Signature {
        let (a, b) = (&self.detectors, &other.detectors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Signature { detectors: out, observables: self.observables ^ other.observables, logical: self.logical ^ other.logical }
    }

    pub fn is_trivial(&self) -> bool {
        self.detectors.is_empty() && self.observables == 0 && self.logical == 0
    }
}

/// Where the residual error is compared against the logical operators.
#[derive(Clone, Debug)]
pub struct LogicalProbe {
    pub at: usize,
    pub logical_x: Vec<u32>,
    pub logical_z: Vec<u32>,
}

impl LogicalProbe {
    /// From circuit metadata: start of the readout round, with the patch logicals.
    pub fn from_circuit(c: &Circuit) -> Option<Self> {
        let lx = c.meta_qubits("logical_x");
        let lz = c.meta_qubits("logical_z");
        if lx.is_empty() || lz.is_empty() {
            return None;
        }
        let at = match c.meta_usize("readout_round") {
            Some(r) => {
                let rounds = c.rounds();
                rounds.get(r - 1).map(|rg| rg.start).unwrap_or(c.instructions.len())
            }
            None => c.instructions.len(),
        };
        Some(LogicalProbe { at, logical_x: lx, logical_z: lz })
    }
}

pub fn propagate(c: &Circuit, gens: &[Generator]) -> Vec<Signature> {
    let probe = LogicalProbe::from_circuit(c);
    let mut out = Vec::with_capacity(gens.len());
    for chunk in gens.chunks(64) {
        out.extend(propagate_chunk(c, chunk, probe.as_ref()));
    }
    out
}

fn propagate_chunk(c: &Circuit, gens: &[Generator], probe: Option<&LogicalProbe>) -> Vec<Signature> {
    let n = c.num_qubits();
    let mut x = vec![0u64; n];
    let mut z = vec![0u64; n];
    let mut meas = Vec::with_capacity(c.num_measurements());
    let mut order: Vec<usize> = (0..gens.len()).collect();
    order.sort_by_key(|&k| gens[k].at);
    let mut gi = 0;
    let mut logical = [0u64; 2];
    let end = c.instructions.len();
    for i in 0..=end {
        if let Some(p) = probe {
            if p.at == i {
                logical[0] = p.logical_z.iter().fold(0, |a, &q| a ^ x[q as usize]);
                logical[1] = p.logical_x.iter().fold(0, |a, &q| a ^ z[q as usize]);
            }
        }
        while gi < order.len() && gens[order[gi]].at as usize == i {
            let g = gens[order[gi]];
            let bit = 1u64 << order[gi];
            if g.z {
                z[g.qubit as usize] ^= bit;
            } else {
                x[g.qubit as usize] ^= bit;
            }
            gi += 1;
        }
        if i == end {
            break;
        }
        let ins = &c.instructions[i];
        match ins.op {
            Op::ResetZ | Op::ResetX => {
                for &q in &ins.targets {
                    x[q as usize] = 0;
                    z[q as usize] = 0;
                }
            }
            Op::H => {
                for &q in &ins.targets {
                    std::mem::swap(&mut x[q as usize], &mut z[q as usize]);
                }
            }
            Op::S | Op::SDag | Op::T => {
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
            Op::MeasureZ => meas.extend(ins.targets.iter().map(|&q| x[q as usize])),
            Op::MeasureX => meas.extend(ins.targets.iter().map(|&q| z[q as usize])),
            _ => {}
        }
    }
    let (dets, obs) = annotation_indices(c);
    let mut sigs = vec![Signature::default(); gens.len()];
    for (d, idx) in dets.iter().enumerate() {
        let mut w = idx.iter().fold(0u64, |a, &m| a ^ meas[m as usize]);
        while w != 0 {
            let k = w.trailing_zeros() as usize;
            sigs[k].detectors.push(d as u32);
            w &= w - 1;
        }
    }
    for (o, idx) in obs.iter().enumerate() {
        let mut w = idx.iter().fold(0u64, |a, &m| a ^ meas[m as usize]);
        while w != 0 {
            let k = w.trailing_zeros() as usize;
            sigs[k].observables |= 1 << o;
            w &= w - 1;
        }
    }
    for (k, s) in sigs.iter_mut().enumerate() {
        s.logical = (((logical[0] >> k) & 1) | (((logical[1] >> k) & 1) << 1)) as u8;
    }
    sigs
}

/// A single Pauli term of a noise channel.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTerm {
    pub instruction: u32,
    /// (qubit, x, z) components.
    pub paulis: Vec<(u32, bool, bool)>,
    pub probability: f64,
    /// Probability relative to the channel parameter (1/3, 1/15, 1, ...), as numerator/denominator.
    pub share: (u32, u32),
    pub erasure: bool,
    /// Index of the physical location (target or pair) within the circuit.
    pub location: u32,
}

fn pauli_of(k: u32) -> (bool, bool) {
    ((k & 1) == 1, (k & 2) == 2)
}

/// Every nontrivial Pauli term of every noise channel, erasures as full depolarisation.
pub fn enumerate_terms(c: &Circuit) -> Vec<NoiseTerm> {
    let mut out = Vec::new();
    let mut loc = 0u32;
    for (i, ins) in c.instructions.iter().enumerate() {
        let i = i as u32;
        match ins.op {
            Op::Depol1(p) | Op::Erase1(p) => {
                let erasure = ins.op.is_erasure();
                let (share, prob) = if erasure { ((1, 4), p / 4.0) } else { ((1, 3), p / 3.0) };
                for &q in &ins.targets {
                    for k in 1..4 {
                        let (xb, zb) = pauli_of(k);
                        out.push(NoiseTerm { instruction: i, paulis: vec![(q, xb, zb)], probability: prob, share, erasure, location: loc });
                    }
                    loc += 1;
                }
            }
            Op::Depol2(p) | Op::Erase2(p) => {
                let erasure = ins.op.is_erasure();
                for (a, b) in ins.pairs() {
                    if erasure {
                        let pq = crate::noise::two_qubit_erasure_split(p);
                        for q in [a, b] {
                            for k in 1..4 {
                                let (xb, zb) = pauli_of(k);
                                out.push(NoiseTerm {
                                    instruction: i,
                                    paulis: vec![(q, xb, zb)],
                                    probability: pq / 4.0,
                                    share: (1, 4),
                                    erasure,
                                    location: loc,
                                });
                            }
                        }
                    } else {
                        for k in 1..16u32 {
                            let (xa, za) = pauli_of(k & 3);
                            let (xb, zb) = pauli_of(k >> 2);
                            let mut paulis = Vec::with_capacity(2);
                            if xa || za {
                                paulis.push((a, xa, za));
                            }
                            if xb || zb {
                                paulis.push((b, xb, zb));
                            }
                            out.push(NoiseTerm { instruction: i, paulis, probability: p / 15.0, share: (1, 15), erasure, location: loc });
                        }
                    }
                    loc += 1;
                }
            }
            Op::XError(p) | Op::ZError(p) => {
                let z = matches!(ins.op, Op::ZError(_));
                for &q in &ins.targets {
                    out.push(NoiseTerm { instruction: i, paulis: vec![(q, !z, z)], probability: p, share: (1, 1), erasure: false, location: loc });
                    loc += 1;
                }
            }
            _ => {}
        }
    }
    out
}

/// Generators needed for `terms`, and the generator indices composing each term.
pub fn term_generators(terms: &[NoiseTerm]) -> (Vec<Generator>, Vec<Vec<usize>>) {
    let mut index = std::collections::HashMap::new();
    let mut gens = Vec::new();
    let mut parts = Vec::with_capacity(terms.len());
    for t in terms {
        let mut p = Vec::new();
        for &(q, xb, zb) in &t.paulis {
            for (on, z) in [(xb, false), (zb, true)] {
                if on {
                    let g = Generator { at: t.instruction, qubit: q, z };
                    let k = *index.entry(g).or_insert_with(|| {
                        gens.push(g);
                        gens.len() - 1
                    });
                    p.push(k);
                }
            }
        }
        parts.push(p);
    }
    (gens, parts)
}

/// Signatures of all noise terms of a circuit.
pub fn term_signatures(c: &Circuit, terms: &[NoiseTerm]) -> Vec<Signature> {
    let (gens, parts) = term_generators(terms);
    let sigs = propagate(c, &gens);
    parts
        .iter()
        .map(|p| p.iter().fold(Signature::default(), |acc, &k| acc.xor(&sigs[k])))
        .collect()
}
