//! Detector error models and their graphlike decomposition.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use crate::circuit::{Circuit, Op};
use crate::error::{Error, Result};
use crate::propagate::{enumerate_terms, propagate, term_generators, Generator, Signature};

/// Virtual node absorbing single-detector edges.
pub const BOUNDARY: u32 = u32::MAX;

/// One merged error mechanism with its graphlike components.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorMechanism {
    pub probability: f64,
    pub signature: Signature,
    /// Edge ids whose XOR reproduces the signature; empty when not matchable.
    pub components: Vec<u32>,
    /// (instruction, qubit) of the first Pauli term merged into this mechanism.
    pub location: (u32, u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: u32,
    /// Second detector or [`BOUNDARY`].
    pub b: u32,
    pub observables: u32,
    pub logical: u8,
    pub probability: f64,
}

#[derive(Clone, Debug, Default)]
pub struct DetectorErrorModel {
    pub num_detectors: usize,
    pub num_observables: usize,
    pub mechanisms: Vec<ErrorMechanism>,
    pub edges: Vec<Edge>,
    /// Erasure location (instruction, qubit) to the edges of its X and Z parts.
    pub erasure_sites: HashMap<(u32, u32), Vec<u32>>,
    /// Mechanisms left out of the graph because they only touch discarded detectors.
    pub dropped: usize,
}

/// Probability that exactly one of two independent events happens.
pub fn xor_probability(p: f64, q: f64) -> f64 {
    p * (1.0 - q) + q * (1.0 - p)
}

#[derive(Default)]
struct EdgeTable {
    // (a, b) -> list of (observables, logical, probability)
    by_pair: BTreeMap<(u32, u32), Vec<(u32, u8, f64)>>,
}

fn pair_of(s: &Signature) -> (u32, u32) {
    match s.detectors.as_slice() {
        [a] => (*a, BOUNDARY),
        [a, b] => (*a, *b),
        _ => unreachable!("not graphlike"),
    }
}

impl EdgeTable {
    fn add(&mut self, s: &Signature, p: f64) {
        let list = self.by_pair.entry(pair_of(s)).or_default();
        match list.iter_mut().find(|e| e.0 == s.observables && e.1 == s.logical) {
            Some(e) => e.2 = xor_probability(e.2, p),
            None => list.push((s.observables, s.logical, p)),
        }
    }

    fn contains(&self, dets: &[u32], obs: u32) -> Option<(u8, f64)> {
        let key = match dets {
            [a] => (*a, BOUNDARY),
            [a, b] => (*a, *b),
            _ => return None,
        };
        self.by_pair.get(&key)?.iter().find(|e| e.0 == obs).map(|e| (e.1, e.2))
    }
}

fn graphlike(s: &Signature) -> bool {
    (1..=2).contains(&s.detectors.len())
}

/// Set partitions of `0..n`, as block labels.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max {
            cur[i] = b;
            rec(i + 1, max.max(b + 1), cur, out);
        }
    }
    if n > 0 {
        rec(0, 0, &mut cur, &mut out);
    }
    out
}

/// Split a term into graphlike blocks of its single-qubit X/Z pieces.
fn decompose_pieces(pieces: &[Signature]) -> Option<Vec<Signature>> {
    let pieces: Vec<&Signature> = pieces.iter().filter(|p| !p.is_trivial()).collect();
    let mut best: Option<Vec<Signature>> = None;
    for labels in partitions(pieces.len()) {
        let nb = labels.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Signature::default(); nb];
        for (p, &l) in pieces.iter().zip(&labels) {
            blocks[l] = blocks[l].xor(p);
        }
        if blocks.iter().all(graphlike) && best.as_ref().is_none_or(|b| b.len() < blocks.len()) {
            best = Some(blocks);
        }
    }
    best
}

/// Split a signature into two existing edges.
fn decompose_existing(s: &Signature, table: &EdgeTable) -> Option<Vec<Signature>> {
    let d = &s.detectors;
    let n = d.len();
    if !(2..=4).contains(&n) {
        return None;
    }
    for mask in 1u32..(1 << n) - 1 {
        let (left, right): (Vec<u32>, Vec<u32>) = {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for (i, &x) in d.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    l.push(x)
                } else {
                    r.push(x)
                }
            }
            (l, r)
        };
        if left.len() > 2 || right.len() > 2 || mask & 1 == 0 {
            continue;
        }
        for &(lo, ll, _) in table.by_pair.get(&pair_key(&left)).into_iter().flatten() {
            let ro = s.observables ^ lo;
            if let Some((rl, _)) = table.contains(&right, ro) {
                return Some(vec![
                    Signature { detectors: left.clone(), observables: lo, logical: ll },
                    Signature { detectors: right.clone(), observables: ro, logical: rl },
                ]);
            }
        }
    }
    None
}

fn pair_key(d: &[u32]) -> (u32, u32) {
    match d {
        [a] => (*a, BOUNDARY),
        [a, b] => (*a, *b),
        _ => (BOUNDARY, BOUNDARY),
    }
}

impl DetectorErrorModel {
    /// A model given directly as graph edges, one mechanism per edge.
    pub fn from_edges(num_detectors: usize, num_observables: usize, edges: Vec<Edge>) -> Self {
        let mechanisms = edges
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let mut detectors = vec![e.a];
                if e.b != BOUNDARY {
                    detectors.push(e.b);
                }
                detectors.sort_unstable();
                ErrorMechanism {
                    probability: e.probability,
                    signature: Signature { detectors, observables: e.observables, logical: e.logical },
                    components: vec![k as u32],
                    location: (0, 0),
                }
            })
            .collect();
        DetectorErrorModel { num_detectors, num_observables, mechanisms, edges, erasure_sites: HashMap::new(), dropped: 0 }
    }

    /// Edge ids to zero out for a set of erased (instruction, qubit) locations.
    pub fn erased_edges(&self, locations: &[(u32, u32)]) -> Vec<u32> {
        let mut out: Vec<u32> = locations
            .iter()
            .filter_map(|l| self.erasure_sites.get(l))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// One line per mechanism: `error(p) D3 D7 L0`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for m in &self.mechanisms {
            write!(s, "error({})", m.probability).unwrap();
            for d in &m.signature.detectors {
                write!(s, " D{d}").unwrap();
            }
            for o in 0..32 {
                if m.signature.observables >> o & 1 == 1 {
                    write!(s, " L{o}").unwrap();
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Detector error model of an annotated circuit.
///
/// Every Pauli term is propagated exactly. Terms with the same detectors,
/// observables and logical action merge into one mechanism. Mechanisms with
/// more than two detectors are split into graphlike pieces: first along
/// single-qubit X/Z parts, then into two edges that already exist.
pub fn build_dem(c: &Circuit) -> Result<DetectorErrorModel> {
    if let Some(v) = c.validate().first() {
        return Err(Error::Invalid(v.to_string()));
    }
    let terms = enumerate_terms(c);
    let (gens, parts) = term_generators(&terms);
    let gsig = propagate(c, &gens);
    let window = c.window_detectors();

    // Merge Pauli terms by signature, remembering a representative decomposition.
    struct Acc {
        p: f64,
        location: (u32, u32),
        pieces: Vec<Signature>,
    }
    let mut merged: BTreeMap<Signature, Acc> = BTreeMap::new();
    let mut order = Vec::new();
    for (t, ps) in terms.iter().zip(&parts) {
        if t.erasure {
            continue;
        }
        let pieces: Vec<Signature> = ps.iter().map(|&k| gsig[k].clone()).collect();
        let sig = pieces.iter().fold(Signature::default(), |a, p| a.xor(p));
        if sig.is_trivial() {
            continue;
        }
        match merged.get_mut(&sig) {
            Some(a) => a.p = xor_probability(a.p, t.probability),
            None => {
                order.push(sig.clone());
                merged.insert(sig, Acc { p: t.probability, location: (t.instruction, t.paulis[0].0), pieces });
            }
        }
    }

    let mut table = EdgeTable::default();
    let mut pending = Vec::new();
    let mut decomposition: HashMap<Signature, Vec<Signature>> = HashMap::new();
    for sig in &order {
        let acc = &merged[sig];
        if sig.detectors.is_empty() {
            continue;
        }
        let blocks = if graphlike(sig) { Some(vec![sig.clone()]) } else { decompose_pieces(&acc.pieces) };
        match blocks {
            Some(b) => {
                for s in &b {
                    table.add(s, acc.p);
                }
                decomposition.insert(sig.clone(), b);
            }
            None => pending.push(sig.clone()),
        }
    }
    let mut dropped = 0;
    for sig in pending {
        match decompose_existing(&sig, &table) {
            Some(b) => {
                let p = merged[&sig].p;
                for s in &b {
                    table.add(s, p);
                }
                decomposition.insert(sig, b);
            }
            None if sig.detectors.iter().all(|&d| window[d as usize]) => dropped += 1,
            None => {
                return Err(Error::Dem(format!(
                    "mechanism on detectors {:?} cannot be split into graphlike edges",
                    sig.detectors
                )))
            }
        }
    }

    // Erasure sites: X and Z parts of each qubit that can be erased,
    // re-randomized by a successful check, or randomized by a later operation
    // while it or a CX partner may still be erased.
    let mut maybe = vec![false; c.num_qubits()];
    let mut sites = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        let at = |q: u32| (i as u32, q);
        match &ins.op {
            Op::Erase1(_) | Op::Erase2(_) => {
                for &q in &ins.targets {
                    maybe[q as usize] = true;
                    sites.push(at(q));
                }
            }
            Op::ErasureCheck { fn_, .. } => {
                for &q in &ins.targets {
                    sites.push(at(q));
                    if *fn_ == 0.0 {
                        maybe[q as usize] = false;
                    }
                }
            }
            Op::Cx => {
                for (a, b) in ins.pairs() {
                    if maybe[a as usize] || maybe[b as usize] {
                        sites.extend([at(a), at(b)]);
                    }
                }
            }
            op if op.is_reset() => {
                for &q in &ins.targets {
                    maybe[q as usize] = false;
                }
            }
            op if op.is_operation() => sites.extend(ins.targets.iter().filter(|&&q| maybe[q as usize]).map(|&q| at(q))),
            _ => {}
        }
    }
    sites.sort_unstable();
    sites.dedup();
    let site_gens: Vec<Generator> = sites
        .iter()
        .flat_map(|&(at, qubit)| [Generator { at, qubit, z: false }, Generator { at, qubit, z: true }])
        .collect();
    let site_sig = propagate(c, &site_gens);
    let mut site_sigs: Vec<((u32, u32), Vec<Signature>)> = Vec::with_capacity(sites.len());
    for (k, &loc) in sites.iter().enumerate() {
        let mut blocks = Vec::new();
        for s in &site_sig[2 * k..2 * k + 2] {
            if s.detectors.is_empty() {
                continue;
            }
            if graphlike(s) {
                blocks.push(s.clone());
            } else if let Some(b) = decompose_existing(s, &table) {
                blocks.extend(b);
            }
        }
        for s in &blocks {
            if table.contains(&s.detectors, s.observables).is_none() {
                table.add(s, 0.0);
            }
        }
        site_sigs.push((loc, blocks));
    }

    // Keep the most likely edge per detector pair.
    let mut edges = Vec::new();
    let mut edge_id: HashMap<(u32, u32), u32> = HashMap::new();
    for (&(a, b), list) in &table.by_pair {
        let best = list.iter().max_by(|x, y| x.2.total_cmp(&y.2)).unwrap();
        edge_id.insert((a, b), edges.len() as u32);
        edges.push(Edge { a, b, observables: best.0, logical: best.1, probability: best.2 });
    }
    let id_of = |s: &Signature| edge_id[&pair_of(s)];
    let mechanisms = order
        .iter()
        .map(|sig| {
            let acc = &merged[sig];
            let components = decomposition.get(sig).map(|b| b.iter().map(id_of).collect()).unwrap_or_default();
            ErrorMechanism { probability: acc.p, signature: sig.clone(), components, location: acc.location }
        })
        .collect();
    let erasure_sites = site_sigs.into_iter().map(|(l, b)| (l, b.iter().map(id_of).collect())).collect();
    Ok(DetectorErrorModel {
        num_detectors: c.num_detectors(),
        num_observables: c.num_observables(),
        mechanisms,
        edges,
        erasure_sites,
        dropped,
    })
}
