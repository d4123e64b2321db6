//! Circuit builders: rotated surface code patches, hook and Lao-Criger
//! injection, expansion to a larger patch, and a distance-3 color code
//! unitary injection. All builders finish with a noiseless stabilizer round
//! and a noiseless readout of the logical `Y` through an extra ancilla.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Coord, Op, Qubit, Role};
use crate::error::{Error, Result};
use crate::sampler::Pauli;
use crate::tableau::{symbolic_outcomes, Expr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Hook,
    LaoCriger,
    ColorUnitary,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Hook => "hook",
            Protocol::LaoCriger => "lao_criger",
            Protocol::ColorUnitary => "color_unitary",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum InjectedState {
    #[default]
    #[serde(rename = "S_state", alias = "s")]
    S,
    #[serde(rename = "T_state", alias = "t")]
    T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default)]
    pub protocol: Protocol,
    pub d1: usize,
    #[serde(default)]
    pub d2: Option<usize>,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub injected_state: InjectedState,
    /// Full rounds after the expansion round; defaults to `d2`.
    #[serde(default)]
    pub memory_rounds: Option<usize>,
}

fn default_r() -> usize {
    2
}

impl ProtocolConfig {
    pub fn new(protocol: Protocol, d1: usize, r: usize) -> Self {
        ProtocolConfig { protocol, d1, d2: None, r, injected_state: InjectedState::S, memory_rounds: None }
    }

    pub fn hook(d1: usize, r: usize) -> Self {
        Self::new(Protocol::Hook, d1, r)
    }

    pub fn lao_criger(d1: usize, r: usize) -> Self {
        Self::new(Protocol::LaoCriger, d1, r)
    }

    pub fn color() -> Self {
        Self::new(Protocol::ColorUnitary, 3, 1)
    }

    pub fn expanded(mut self, d2: usize, memory_rounds: usize) -> Self {
        self.d2 = Some(d2);
        self.memory_rounds = Some(memory_rounds);
        self
    }

    pub fn with_state(mut self, s: InjectedState) -> Self {
        self.injected_state = s;
        self
    }

    pub fn d2(&self) -> usize {
        self.d2.unwrap_or(self.d1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::Config("r must be at least 1".into()));
        }
        if self.d2() < self.d1 {
            return Err(Error::Config(format!("d2 = {} is smaller than d1 = {}", self.d2(), self.d1)));
        }
        if self.d2() > self.d1 && self.d2() % 2 == 0 {
            return Err(Error::Config("d2 must be odd".into()));
        }
        Ok(())
    }
}

/// One plaquette. Corners are ordered NW, NE, SW, SE.
#[derive(Clone, Debug, PartialEq)]
pub struct Stabilizer {
    pub ancilla: u32,
    pub basis: Basis,
    pub plaquette: (i32, i32),
    pub corners: [Option<u32>; 4],
}

impl Stabilizer {
    pub fn support(&self) -> Vec<u32> {
        self.corners.iter().flatten().copied().collect()
    }
}

const NW: usize = 0;
const NE: usize = 1;
const SW: usize = 2;
const SE: usize = 3;
const X_ORDER: [usize; 4] = [NW, NE, SW, SE];
const Z_ORDER: [usize; 4] = [NW, SW, NE, SE];

#[derive(Clone, Debug, PartialEq)]
pub struct PatchLayout {
    pub d: usize,
    pub qubits: Vec<Qubit>,
    pub stabilizers: Vec<Stabilizer>,
    /// Row `y = 0`.
    pub logical_z: Vec<u32>,
    /// Column `x = d - 1`.
    pub logical_x: Vec<u32>,
}

impl PatchLayout {
    pub fn data(&self, x: usize, y: usize) -> u32 {
        (y * self.d + x) as u32
    }

    pub fn num_data(&self) -> usize {
        self.d * self.d
    }

    pub fn stabilizer_at(&self, plaquette: (i32, i32)) -> Option<&Stabilizer> {
        self.stabilizers.iter().find(|s| s.plaquette == plaquette)
    }

    /// Logical `Y` as `i X_L Z_L`: `Y` on the shared corner.
    pub fn logical_y(&self) -> Vec<(u32, Pauli)> {
        let corner = self.data(self.d - 1, 0);
        let mut out: Vec<(u32, Pauli)> = self
            .logical_z
            .iter()
            .filter(|&&q| q != corner)
            .map(|&q| (q, Pauli::Z))
            .collect();
        out.extend(self.logical_x.iter().filter(|&&q| q != corner).map(|&q| (q, Pauli::X)));
        out.push((corner, Pauli::Y));
        out.sort_by_key(|p| p.0);
        out
    }
}

pub fn build_surface_patch(d: usize) -> Result<PatchLayout> {
    if d < 2 {
        return Err(Error::Config(format!("distance {d} is below 2")));
    }
    let di = d as i32;
    let off = di % 2;
    let mut qubits = Vec::new();
    for y in 0..di {
        for x in 0..di {
            qubits.push(Qubit { index: qubits.len() as u32, coords: Coord::site(x, y), role: Role::Data });
        }
    }
    let inside = |x: i32, y: i32| (0..di).contains(&x) && (0..di).contains(&y);
    let mut stabilizers = Vec::new();
    for py in -1..di {
        for px in -1..di {
            let basis = if (px + py + off).rem_euclid(2) == 1 { Basis::X } else { Basis::Z };
            let pos = [(px, py), (px + 1, py), (px, py + 1), (px + 1, py + 1)];
            let corners = pos.map(|(x, y)| inside(x, y).then(|| (y * di + x) as u32));
            let weight = corners.iter().flatten().count();
            if weight < 2 {
                continue;
            }
            if weight == 2 {
                let horizontal = py == -1 || py == di - 1;
                if horizontal && basis != Basis::X || !horizontal && basis != Basis::Z {
                    continue;
                }
            }
            let ancilla = qubits.len() as u32;
            let role = if basis == Basis::X { Role::XAncilla } else { Role::ZAncilla };
            qubits.push(Qubit { index: ancilla, coords: Coord::new(2 * px + 1, 2 * py + 1), role });
            stabilizers.push(Stabilizer { ancilla, basis, plaquette: (px, py), corners });
        }
    }
    let logical_z = (0..d).map(|x| x as u32).collect();
    let logical_x = (0..d).map(|y| (y * d + d - 1) as u32).collect();
    Ok(PatchLayout { d, qubits, stabilizers, logical_z, logical_x })
}

/// Gate inserted into a stabilizer round after CNOT layer `after_layer`
/// (0 means before the first layer).
struct Insert {
    after_layer: usize,
    op: Op,
    qubit: u32,
}

/// A stabilizer round builder over circuit-level qubit indices.
struct Round<'a> {
    stabs: &'a [Stabilizer],
    map: &'a dyn Fn(u32) -> u32,
    order: &'a dyn Fn(&Stabilizer) -> [usize; 4],
    data_z: Vec<u32>,
    data_x: Vec<u32>,
    inserts: Vec<Insert>,
}

impl Round<'_> {
    fn emit(&self, c: &mut Circuit) {
        let m = self.map;
        let mut rz = self.data_z.clone();
        let mut rx = self.data_x.clone();
        for s in self.stabs {
            match s.basis {
                Basis::Z => rz.push(m(s.ancilla)),
                Basis::X => rx.push(m(s.ancilla)),
            }
        }
        if !rz.is_empty() {
            c.push(Op::ResetZ, rz);
        }
        if !rx.is_empty() {
            c.push(Op::ResetX, rx);
        }
        for layer in 0..=4 {
            for ins in self.inserts.iter().filter(|i| i.after_layer == layer) {
                c.push(ins.op.clone(), vec![ins.qubit]);
            }
            if layer == 4 {
                break;
            }
            let mut t = Vec::new();
            for s in self.stabs {
                if let Some(q) = s.corners[(self.order)(s)[layer]] {
                    let (a, q) = (m(s.ancilla), m(q));
                    match s.basis {
                        Basis::Z => t.extend([q, a]),
                        Basis::X => t.extend([a, q]),
                    }
                }
            }
            if !t.is_empty() {
                c.push(Op::Cx, t);
            }
        }
        let zs: Vec<u32> = self.stabs.iter().filter(|s| s.basis == Basis::Z).map(|s| m(s.ancilla)).collect();
        let xs: Vec<u32> = self.stabs.iter().filter(|s| s.basis == Basis::X).map(|s| m(s.ancilla)).collect();
        c.push(Op::MeasureZ, zs);
        c.push(Op::MeasureX, xs);
        c.push(Op::Tick, vec![]);
    }
}

fn standard_order(s: &Stabilizer) -> [usize; 4] {
    match s.basis {
        Basis::X => X_ORDER,
        Basis::Z => Z_ORDER,
    }
}

fn injection_gate(state: InjectedState) -> Op {
    match state {
        InjectedState::S => Op::S,
        InjectedState::T => Op::T,
    }
}

fn readout_qubit(index: u32) -> Qubit {
    Qubit { index, coords: Coord::site(-1, -1), role: Role::XAncilla }
}

/// Noiseless readout of a Pauli product through `anc`, then `OBSERVABLE 0`.
fn emit_readout(c: &mut Circuit, anc: u32, paulis: &[(u32, Pauli)]) {
    c.push(Op::ResetX, vec![anc]);
    for &(q, p) in paulis {
        match p {
            Pauli::X => c.push(Op::Cx, vec![anc, q]),
            Pauli::Z => {
                c.push(Op::H, vec![q]);
                c.push(Op::Cx, vec![anc, q]);
                c.push(Op::H, vec![q]);
            }
            Pauli::Y => {
                c.push(Op::SDag, vec![q]);
                c.push(Op::Cx, vec![anc, q]);
                c.push(Op::S, vec![q]);
            }
        }
    }
    c.push(Op::MeasureX, vec![anc]);
}

fn join(qs: &[u32]) -> String {
    qs.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",")
}

/// Records whose outcomes cancel the random part of `target`, preferring late measurements.
fn byproducts(outcomes: &[Expr], target: usize) -> Result<Vec<usize>> {
    // Basis rows: (symbol vector, combination of measurement indices), keyed by pivot.
    let mut basis: HashMap<usize, (Vec<u64>, BTreeSet<usize>)> = HashMap::new();
    let pivot = |v: &[u64]| v.iter().enumerate().find(|(_, &w)| w != 0).map(|(i, &w)| i * 64 + w.trailing_zeros() as usize);
    let reduce = |basis: &HashMap<usize, (Vec<u64>, BTreeSet<usize>)>, mut v: Vec<u64>, mut combo: BTreeSet<usize>| {
        while let Some(p) = pivot(&v) {
            match basis.get(&p) {
                Some((bv, bc)) => {
                    for (a, b) in v.iter_mut().zip(bv) {
                        *a ^= b;
                    }
                    combo = combo.symmetric_difference(bc).copied().collect();
                }
                None => return (v, combo, Some(p)),
            }
        }
        (v, combo, None)
    };
    for m in (0..target).rev() {
        let (v, combo, p) = reduce(&basis, outcomes[m].symbols.clone(), BTreeSet::from([m]));
        if let Some(p) = p {
            basis.insert(p, (v, combo));
        }
    }
    let (_, combo, rest) = reduce(&basis, outcomes[target].symbols.clone(), BTreeSet::new());
    if rest.is_some() {
        return Err(Error::Invalid("logical readout is not determined by the measurement record".into()));
    }
    Ok(combo.into_iter().collect())
}

/// Add detectors to an operation-only circuit.
///
/// For every measurement of a qubit in `detect`, compare with its previous
/// measurement when that parity is deterministic, otherwise use the outcome
/// alone when it is deterministic. The measurement of `readout` becomes
/// observable 0, together with the records that fix its random gauge.
fn finalize(ops: Circuit, detect: &[bool], readout: u32) -> Result<Circuit> {
    let (outcomes, _) = symbolic_outcomes(&ops)?;
    let mut c = Circuit { qubits: ops.qubits, instructions: Vec::new(), metadata: ops.metadata };
    let mut last: Vec<Option<usize>> = vec![None; c.qubits.len()];
    let mut m = 0usize;
    for ins in ops.instructions {
        let measure = ins.op.is_measure();
        let targets = ins.targets.clone();
        c.instructions.push(ins);
        if !measure {
            continue;
        }
        let mut dets: Vec<Vec<usize>> = Vec::new();
        let mut obs = None;
        for &q in &targets {
            let idx = m;
            m += 1;
            if q == readout {
                obs = Some(idx);
                continue;
            }
            if !detect[q as usize] {
                continue;
            }
            let mut chosen = None;
            if let Some(prev) = last[q as usize] {
                let mut e = outcomes[idx].clone();
                e.xor_assign(&outcomes[prev]);
                if e.is_deterministic() {
                    chosen = Some(vec![idx, prev]);
                }
            }
            if chosen.is_none() && outcomes[idx].is_deterministic() {
                chosen = Some(vec![idx]);
            }
            dets.extend(chosen);
            last[q as usize] = Some(idx);
        }
        for d in dets {
            c.push(Op::Detector(d.iter().map(|&k| (m - k) as u32).collect()), vec![]);
        }
        if let Some(idx) = obs {
            let mut recs = vec![idx];
            recs.extend(byproducts(&outcomes, idx)?);
            c.push(Op::Observable(0, recs.iter().map(|&k| (m - k) as u32).collect()), vec![]);
        }
    }
    Ok(c)
}

fn set_common_meta(c: &mut Circuit, cfg: &ProtocolConfig, window: usize, noiseless_from: usize, lx: &[u32], lz: &[u32]) {
    c.set_meta("protocol", cfg.protocol.name());
    c.set_meta("d1", cfg.d1);
    c.set_meta("d2", cfg.d2());
    c.set_meta("r", cfg.r);
    c.set_meta(
        "state",
        match cfg.injected_state {
            InjectedState::S => "S",
            InjectedState::T => "T",
        },
    );
    let q_d1 = match cfg.protocol {
        Protocol::ColorUnitary => 13,
        _ => 2 * cfg.d1 * cfg.d1 - 1,
    };
    c.set_meta("q_d1", q_d1);
    c.set_meta("window", window);
    c.set_meta("noiseless_from", noiseless_from);
    c.set_meta("readout_round", noiseless_from + 1);
    c.set_meta("logical_x", join(lx));
    c.set_meta("logical_z", join(lz));
}

/// Rounds `1..=r` on a surface patch plus the noiseless round and readout.
fn surface_injection(
    cfg: &ProtocolConfig,
    layout: &PatchLayout,
    init: impl Fn(usize, usize) -> Basis,
    round_one: impl Fn(&Stabilizer) -> [usize; 4],
    inserts: Vec<Insert>,
) -> Result<Circuit> {
    let d = layout.d;
    let mut c = Circuit::new();
    c.qubits = layout.qubits.clone();
    let readout = c.qubits.len() as u32;
    c.qubits.push(readout_qubit(readout));
    let mut data_z = Vec::new();
    let mut data_x = Vec::new();
    for y in 0..d {
        for x in 0..d {
            match init(x, y) {
                Basis::Z => data_z.push(layout.data(x, y)),
                Basis::X => data_x.push(layout.data(x, y)),
            }
        }
    }
    let id = |q: u32| q;
    let first = Round { stabs: &layout.stabilizers, map: &id, order: &round_one, data_z, data_x, inserts };
    first.emit(&mut c);
    for _ in 1..=cfg.r {
        let round = Round {
            stabs: &layout.stabilizers,
            map: &id,
            order: &standard_order,
            data_z: vec![],
            data_x: vec![],
            inserts: vec![],
        };
        round.emit(&mut c);
    }
    // The loop emits r further rounds; the last of them is the noiseless one.
    emit_readout(&mut c, readout, &layout.logical_y());
    // A distance-2 patch only detects, so its whole record is post-selected.
    let window = if d == 2 { cfg.r + 1 } else { cfg.r };
    set_common_meta(&mut c, cfg, window, cfg.r + 1, &layout.logical_x, &layout.logical_z);
    let mut detect = vec![false; c.qubits.len()];
    for s in &layout.stabilizers {
        detect[s.ancilla as usize] = true;
    }
    finalize(c, &detect, readout)
}

/// Hook injection: the injection gate on a Z ancilla rotates `Z_L`.
pub fn build_hook_injection(cfg: &ProtocolConfig) -> Result<Circuit> {
    if cfg.protocol != Protocol::Hook {
        return Err(Error::Config("build_hook_injection needs protocol = hook".into()));
    }
    cfg.validate()?;
    let d = cfg.d1;
    let layout = build_surface_patch(d)?;
    let hook = layout
        .stabilizer_at((d as i32 - 2, 0))
        .filter(|s| s.basis == Basis::Z)
        .ok_or_else(|| Error::Invalid("no Z plaquette at the hook position".into()))?
        .ancilla;
    let init = move |x: usize, y: usize| if x + 3 <= d && y <= 1 { Basis::Z } else { Basis::X };
    let inserts = vec![Insert { after_layer: 2, op: injection_gate(cfg.injected_state), qubit: hook }];
    let c = surface_injection(cfg, &layout, init, |_| X_ORDER, inserts)?;
    if cfg.d2() > cfg.d1 {
        build_expansion(cfg, &c)
    } else {
        Ok(c)
    }
}

/// Center-qubit injection with the remaining data in a quadrant pattern.
pub fn build_lao_criger_injection(cfg: &ProtocolConfig) -> Result<Circuit> {
    if cfg.protocol != Protocol::LaoCriger {
        return Err(Error::Config("build_lao_criger_injection needs protocol = lao_criger".into()));
    }
    cfg.validate()?;
    let d = cfg.d1;
    if d % 2 == 0 || d < 3 {
        return Err(Error::Config(format!("Lao-Criger injection needs odd d1 >= 3, got {d}")));
    }
    let layout = build_surface_patch(d)?;
    let c0 = d / 2;
    let init = move |x: usize, y: usize| {
        if x == c0 {
            Basis::X
        } else if y == c0 {
            Basis::Z
        } else if (x < c0) == (y < c0) {
            Basis::Z
        } else {
            Basis::X
        }
    };
    let inserts = vec![Insert { after_layer: 0, op: injection_gate(cfg.injected_state), qubit: layout.data(c0, c0) }];
    let c = surface_injection(cfg, &layout, init, standard_order, inserts)?;
    if cfg.d2() > cfg.d1 {
        build_expansion(cfg, &c)
    } else {
        Ok(c)
    }
}

/// Grow an injection circuit from `d1` to `d2`, with the small patch in the
/// top-left corner, followed by memory rounds, a noiseless round and readout.
pub fn build_expansion(cfg: &ProtocolConfig, inner: &Circuit) -> Result<Circuit> {
    cfg.validate()?;
    if cfg.protocol == Protocol::ColorUnitary {
        return Err(Error::Unsupported("the color code injection is not expanded".into()));
    }
    let (d1, d2, r) = (cfg.d1, cfg.d2(), cfg.r);
    if inner.meta_usize("d1") != Some(d1) {
        return Err(Error::Config("inner circuit was built for a different d1".into()));
    }
    let big = build_surface_patch(d2)?;
    let mut by_coord: HashMap<Coord, u32> = big.qubits.iter().map(|q| (q.coords, q.index)).collect();
    let readout = big.qubits.len() as u32;
    by_coord.insert(Coord::site(-1, -1), readout);
    let mut remap = Vec::with_capacity(inner.num_qubits());
    for q in &inner.qubits {
        let to = by_coord
            .get(&q.coords)
            .ok_or_else(|| Error::Invalid(format!("inner qubit {} has no place in the d2 layout", q.index)))?;
        remap.push(*to);
    }
    let rounds = inner.rounds();
    if rounds.len() < r {
        return Err(Error::Invalid("inner circuit has fewer than r rounds".into()));
    }
    let mut c = Circuit::new();
    c.qubits = big.qubits.clone();
    c.qubits.push(readout_qubit(readout));
    for ins in &inner.instructions[..rounds[r - 1].end] {
        if ins.op.is_operation() || ins.op == Op::Tick {
            c.push(ins.op.clone(), ins.targets.iter().map(|&q| remap[q as usize]).collect());
        }
    }
    let mut data_z = Vec::new();
    let mut data_x = Vec::new();
    for y in 0..d2 {
        for x in 0..d2 {
            if x < d1 && y < d1 {
                continue;
            }
            if y >= d1 {
                data_x.push(big.data(x, y));
            } else {
                data_z.push(big.data(x, y));
            }
        }
    }
    let id = |q: u32| q;
    Round { stabs: &big.stabilizers, map: &id, order: &standard_order, data_z, data_x, inserts: vec![] }.emit(&mut c);
    let memory = cfg.memory_rounds.unwrap_or(d2);
    for _ in 0..memory + 1 {
        Round {
            stabs: &big.stabilizers,
            map: &id,
            order: &standard_order,
            data_z: vec![],
            data_x: vec![],
            inserts: vec![],
        }
        .emit(&mut c);
    }
    emit_readout(&mut c, readout, &big.logical_y());
    let noiseless_from = r + 2 + memory;
    set_common_meta(&mut c, cfg, r, noiseless_from, &big.logical_x, &big.logical_z);
    c.set_meta("expansion_round", r + 1);
    let mut detect = vec![false; c.qubits.len()];
    for s in &big.stabilizers {
        detect[s.ancilla as usize] = true;
    }
    finalize(c, &detect, readout)
}

/// Steane-code stabilizer supports, shared by the X and Z checks.
pub const COLOR_STABILIZERS: [[u32; 4]; 3] = [[3, 4, 5, 6], [1, 2, 5, 6], [0, 2, 4, 6]];
/// Support of the color-code logical operators.
pub const COLOR_LOGICAL: [u32; 3] = [0, 3, 4];

/// Unitary encoding of the injected state into the 7-qubit color code,
/// followed by one round measuring all six stabilizers.
pub fn build_color_unitary_injection(cfg: &ProtocolConfig) -> Result<Circuit> {
    if cfg.protocol != Protocol::ColorUnitary {
        return Err(Error::Config("build_color_unitary_injection needs protocol = color_unitary".into()));
    }
    if cfg.d1 != 3 {
        return Err(Error::Config(format!("the color code injection is distance 3 only, got d1 = {}", cfg.d1)));
    }
    if cfg.d2() != 3 {
        return Err(Error::Unsupported("the color code injection is not expanded".into()));
    }
    const SITES: [(i32, i32); 7] = [(0, 4), (4, 4), (2, 2), (3, 0), (1, 0), (3, 2), (2, 0)];
    let mut c = Circuit::new();
    for (i, &(x, y)) in SITES.iter().enumerate() {
        c.qubits.push(Qubit { index: i as u32, coords: Coord::site(x, y), role: Role::Data });
    }
    for (k, role) in [Role::ZAncilla, Role::XAncilla].into_iter().enumerate() {
        for j in 0..3 {
            let index = c.qubits.len() as u32;
            c.qubits.push(Qubit { index, coords: Coord::new(11 + 2 * j, 1 + 2 * k as i32), role });
        }
    }
    let readout = c.qubits.len() as u32;
    c.qubits.push(readout_qubit(readout));
    let z_anc = [7u32, 8, 9];
    let x_anc = [10u32, 11, 12];

    // Encode |+> on the pivots and spread them over their generators.
    let pivots: [(u32, &[u32]); 4] = [(0, &[2, 5]), (1, &[3, 5]), (4, &[2, 3, 5]), (6, &[2, 3])];
    let stab_round = |c: &mut Circuit, encoder: bool| {
        let mut rz: Vec<u32> = if encoder { vec![2, 3, 5] } else { vec![] };
        rz.extend(z_anc);
        let mut rx: Vec<u32> = if encoder { pivots.iter().map(|p| p.0).collect() } else { vec![] };
        rx.extend(x_anc);
        c.push(Op::ResetZ, rz);
        c.push(Op::ResetX, rx);
        if encoder {
            for (p, targets) in pivots {
                for &t in targets {
                    c.push(Op::Cx, vec![p, t]);
                }
            }
            c.push(injection_gate(cfg.injected_state), vec![3]);
            c.push(Op::Cx, vec![0, 3]);
            c.push(Op::Cx, vec![4, 3]);
        }
        for (s, &a) in COLOR_STABILIZERS.iter().zip(&z_anc) {
            for &q in s {
                c.push(Op::Cx, vec![q, a]);
            }
        }
        for (s, &a) in COLOR_STABILIZERS.iter().zip(&x_anc) {
            for &q in s {
                c.push(Op::Cx, vec![a, q]);
            }
        }
        c.push(Op::MeasureZ, z_anc.to_vec());
        c.push(Op::MeasureX, x_anc.to_vec());
        c.push(Op::Tick, vec![]);
    };
    stab_round(&mut c, true);
    stab_round(&mut c, false);
    let y: Vec<(u32, Pauli)> = COLOR_LOGICAL.iter().map(|&q| (q, Pauli::Y)).collect();
    emit_readout(&mut c, readout, &y);
    // The whole record is post-selected: the window covers the noiseless round too.
    set_common_meta(&mut c, cfg, 2, 2, &COLOR_LOGICAL, &COLOR_LOGICAL);
    let mut detect = vec![false; c.qubits.len()];
    for &a in z_anc.iter().chain(&x_anc) {
        detect[a as usize] = true;
    }
    finalize(c, &detect, readout)
}

/// Z-basis memory on a distance-`d` patch: `rounds` noisy stabilizer rounds,
/// a noiseless round and a noiseless `Z_L` readout.
pub fn build_memory(d: usize, rounds: usize) -> Result<Circuit> {
    if rounds == 0 {
        return Err(Error::Config("memory needs at least one round".into()));
    }
    let layout = build_surface_patch(d)?;
    let mut c = Circuit::new();
    c.qubits = layout.qubits.clone();
    let readout = c.qubits.len() as u32;
    c.qubits.push(readout_qubit(readout));
    let id = |q: u32| q;
    let data_z: Vec<u32> = (0..layout.num_data() as u32).collect();
    for k in 0..=rounds {
        let data_z = if k == 0 { data_z.clone() } else { vec![] };
        Round { stabs: &layout.stabilizers, map: &id, order: &standard_order, data_z, data_x: vec![], inserts: vec![] }
            .emit(&mut c);
    }
    let z: Vec<(u32, Pauli)> = layout.logical_z.iter().map(|&q| (q, Pauli::Z)).collect();
    emit_readout(&mut c, readout, &z);
    c.set_meta("protocol", "memory");
    c.set_meta("d1", d);
    c.set_meta("d2", d);
    c.set_meta("q_d1", 2 * d * d - 1);
    c.set_meta("r", rounds);
    c.set_meta("window", 0);
    c.set_meta("noiseless_from", rounds + 1);
    c.set_meta("readout_round", rounds + 2);
    c.set_meta("logical_x", join(&layout.logical_x));
    c.set_meta("logical_z", join(&layout.logical_z));
    let mut detect = vec![false; c.qubits.len()];
    for s in &layout.stabilizers {
        detect[s.ancilla as usize] = true;
    }
    finalize(c, &detect, readout)
}

/// Build whichever protocol `cfg` names, expanded when `d2 > d1`.
pub fn build(cfg: &ProtocolConfig) -> Result<Circuit> {
    match cfg.protocol {
        Protocol::Hook => build_hook_injection(cfg),
        Protocol::LaoCriger => build_lao_criger_injection(cfg),
        Protocol::ColorUnitary => build_color_unitary_injection(cfg),
    }
}

/// Position and qubit of the injection gate (the first `S` or `T`).
pub fn injection_site(c: &Circuit) -> Option<(usize, u32)> {
    c.instructions
        .iter()
        .position(|i| matches!(i.op, Op::S | Op::T))
        .map(|i| (i, c.instructions[i].targets[0]))
}

/// The hook ancilla and the data partners of the CNOTs adjacent to the injection gate.
pub fn hybrid_erasure_set(c: &Circuit) -> Result<BTreeSet<u32>> {
    let (at, a) = injection_site(c).ok_or_else(|| Error::Invalid("no S/T injection gate in circuit".into()))?;
    if c.qubits.get(a as usize).map(|q| q.role) == Some(Role::Data) {
        return Err(Error::Invalid("injection gate is not on an ancilla; not a hook circuit".into()));
    }
    let partner = |i: usize| {
        c.instructions[i]
            .pairs()
            .find(|&(x, y)| x == a || y == a)
            .map(|(x, y)| if x == a { y } else { x })
    };
    let before = (0..at).rev().filter(|&i| c.instructions[i].op == Op::Cx).find_map(partner);
    let after = (at + 1..c.instructions.len()).filter(|&i| c.instructions[i].op == Op::Cx).find_map(partner);
    match (before, after) {
        (Some(b), Some(f)) => Ok(BTreeSet::from([a, b, f])),
        _ => Err(Error::Invalid("hook CNOTs around the injection gate not found".into())),
    }
}

/// Ancillas whose first measurement carries a detector.
pub fn deterministic_set(c: &Circuit) -> Vec<u32> {
    let mut seen = vec![false; c.num_qubits()];
    let mut first = Vec::new();
    let mut out = Vec::new();
    for ins in &c.instructions {
        if ins.op.is_measure() {
            for &q in &ins.targets {
                first.push(!seen[q as usize]);
                seen[q as usize] = true;
            }
        }
    }
    let mut measured = 0usize;
    let mut owner = Vec::new();
    for ins in &c.instructions {
        match &ins.op {
            op if op.is_measure() => {
                owner.extend(ins.targets.iter().copied());
                measured += ins.targets.len();
            }
            Op::Detector(recs) if recs.len() == 1 => {
                let m = measured - recs[0] as usize;
                if first[m] {
                    out.push(owner[m]);
                }
            }
            _ => {}
        }
    }
    out
}
