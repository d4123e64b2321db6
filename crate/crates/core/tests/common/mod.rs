#![allow(dead_code)]

use eml_core::decoder::{oracle_decode, Decoder};
use eml_core::dem::{DetectorErrorModel, Edge, BOUNDARY};
use eml_core::sampler::{ForcedPauli, Pauli};
use eml_core::tableau::{Expr, Tableau};
use eml_core::{Circuit, Coord, Op, Qubit, Role};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Gen(ChaCha8Rng);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn qubits(n: u32) -> Vec<Qubit> {
    (0..n).map(|i| Qubit { index: i, coords: Coord::site(i as i32, 0), role: Role::Data }).collect()
}

/// Random Clifford circuit on `n` qubits with resets and mixed-basis measurements.
/// No detectors are attached.
pub fn random_clifford(g: &mut Gen, n: u32, len: usize) -> Circuit {
    let mut c = Circuit::new();
    c.qubits = qubits(n);
    c.push(Op::ResetZ, (0..n).collect());
    for _ in 0..len {
        let q = g.below(n as usize) as u32;
        match g.below(10) {
            0 | 1 => c.push(Op::H, vec![q]),
            2 => c.push(Op::S, vec![q]),
            3 => c.push(Op::SDag, vec![q]),
            4..=6 if n > 1 => {
                let mut b = g.below(n as usize - 1) as u32;
                if b >= q {
                    b += 1;
                }
                c.push(Op::Cx, vec![q, b]);
            }
            7 => c.push(Op::MeasureZ, vec![q]),
            8 => c.push(Op::MeasureX, vec![q]),
            _ => c.push(if g.below(2) == 0 { Op::ResetZ } else { Op::ResetX }, vec![q]),
        }
    }
    c.push(Op::MeasureZ, (0..n).collect());
    c
}

fn apply(t: &mut Tableau, op: &Op, targets: &[u32], out: &mut Vec<Expr>) {
    for (k, &q) in targets.iter().enumerate() {
        let q = q as usize;
        match op {
            Op::ResetZ => t.reset_z(q),
            Op::ResetX => t.reset_x(q),
            Op::H => t.h(q),
            Op::S => t.s(q),
            Op::SDag => t.s_dag(q),
            Op::Cx if k % 2 == 0 => t.cx(q, targets[k + 1] as usize),
            Op::MeasureZ => out.push(t.measure_z(q, None)),
            Op::MeasureX => out.push(t.measure_x(q, None)),
            _ => {}
        }
    }
}

/// Measurement expressions of a noiseless circuit with Paulis applied at the
/// given instruction positions.
pub fn tableau_outcomes(c: &Circuit, paulis: &[(usize, u32, Pauli)]) -> Vec<Expr> {
    let resets: usize = c.instructions.iter().filter(|i| i.op.is_reset()).map(|i| i.targets.len()).sum();
    let mut t = Tableau::new(c.num_qubits(), c.num_measurements() + resets);
    let mut out = Vec::new();
    for (i, ins) in c.instructions.iter().enumerate() {
        for &(_, q, p) in paulis.iter().filter(|f| f.0 == i) {
            match p {
                Pauli::X => t.x_gate(q as usize),
                Pauli::Y => t.y_gate(q as usize),
                Pauli::Z => t.z_gate(q as usize),
            }
        }
        apply(&mut t, &ins.op, &ins.targets, &mut out);
    }
    out
}

/// Attach detectors on every deterministic single measurement and on
/// deterministic parities of measurement pairs that are individually random.
pub fn attach_detectors(c: &mut Circuit) -> Vec<Vec<usize>> {
    let out = tableau_outcomes(c, &[]);
    let mut sets = Vec::new();
    for (i, e) in out.iter().enumerate() {
        if e.is_deterministic() {
            sets.push(vec![i]);
        }
    }
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            if out[i].is_deterministic() || out[j].is_deterministic() {
                continue;
            }
            let mut e = out[i].clone();
            e.xor_assign(&out[j]);
            if e.is_deterministic() && sets.len() < 64 {
                sets.push(vec![i, j]);
            }
        }
    }
    let total = out.len() as u32;
    for s in &sets {
        c.push(Op::Detector(s.iter().map(|&m| total - m as u32).collect()), vec![]);
    }
    sets
}

/// Detector flips predicted by the tableau for the given Pauli insertions.
pub fn tableau_flips(c: &Circuit, sets: &[Vec<usize>], paulis: &[(usize, u32, Pauli)]) -> Vec<bool> {
    let clean = tableau_outcomes(c, &[]);
    let noisy = tableau_outcomes(c, paulis);
    sets.iter()
        .map(|s| {
            let mut a = Expr::zero(clean[0].symbols.len());
            let mut b = a.clone();
            for &m in s {
                a.xor_assign(&clean[m]);
                b.xor_assign(&noisy[m]);
            }
            assert!(a.is_deterministic() && b.is_deterministic());
            a.constant ^ b.constant
        })
        .collect()
}

pub fn random_paulis(g: &mut Gen, c: &Circuit, count: usize) -> Vec<(usize, u32, Pauli)> {
    (0..count)
        .map(|_| {
            let at = 1 + g.below(c.instructions.len() - 1);
            let q = g.below(c.num_qubits()) as u32;
            let p = [Pauli::X, Pauli::Y, Pauli::Z][g.below(3)];
            (at, q, p)
        })
        .collect()
}

pub fn forced(paulis: &[(usize, u32, Pauli)]) -> Vec<ForcedPauli> {
    paulis.iter().map(|&(at, qubit, pauli)| ForcedPauli { at, qubit, pauli, lanes: !0 }).collect()
}

pub fn random_dem(g: &mut Gen, detectors: usize, edges: usize) -> DetectorErrorModel {
    let mut out = Vec::new();
    for _ in 0..edges {
        let a = g.below(detectors) as u32;
        let b = if g.below(3) == 0 { BOUNDARY } else { g.below(detectors) as u32 };
        if b == a {
            continue;
        }
        let probability = 1e-3 + 0.3 * g.unit();
        out.push(Edge { a, b, observables: g.below(4) as u32, logical: 0, probability });
    }
    DetectorErrorModel::from_edges(detectors, 2, out)
}

/// Decoder and oracle agree on every syndrome: same weight, and the decoder's
/// observable mask is one of the optimal ones.
pub fn agree_everywhere(dem: &DetectorErrorModel, erased: &[u32]) -> Result<(), String> {
    let dec = Decoder::new(dem).unwrap();
    for s in 0u32..1 << dem.num_detectors {
        let fired: Vec<u32> = (0..dem.num_detectors as u32).filter(|d| s >> d & 1 == 1).collect();
        match (oracle_decode(dem, &fired, erased), dec.decode(&fired, erased)) {
            (Ok(o), Ok(c)) => {
                if o.weight != c.weight || !o.optimal_observables.contains(&c.observables) {
                    return Err(format!("syndrome {fired:?}: oracle {o:?}, decoder {c:?}"));
                }
            }
            (Err(_), Err(_)) => {}
            (o, c) => return Err(format!("syndrome {fired:?}: oracle {o:?}, decoder {c:?}")),
        }
    }
    Ok(())
}
