//! Circuit intermediate representation.
//!
//! A circuit is a list of declared qubits followed by an ordered list of
//! instructions. Measurements append to one global record; detectors and
//! observables refer back into it with `rec[-k]` lookbacks. `TICK` closes a
//! round.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-integer grid coordinate stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x2: i32,
    pub y2: i32,
}

impl Coord {
    pub fn new(x2: i32, y2: i32) -> Self {
        Coord { x2, y2 }
    }

    /// Coordinate at an integer lattice site.
    pub fn site(x: i32, y: i32) -> Self {
        Coord { x2: 2 * x, y2: 2 * y }
    }

    pub fn x(&self) -> f64 {
        self.x2 as f64 / 2.0
    }

    pub fn y(&self) -> f64 {
        self.y2 as f64 / 2.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Data,
    XAncilla,
    ZAncilla,
}

impl Role {
    fn as_str(&self) -> &'static str {
        match self {
            Role::Data => "data",
            Role::XAncilla => "x_ancilla",
            Role::ZAncilla => "z_ancilla",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Qubit {
    pub index: u32,
    pub coords: Coord,
    pub role: Role,
}

/// Instruction opcodes. Noise channels carry their probabilities inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Op {
    ResetZ,
    ResetX,
    H,
    S,
    SDag,
    T,
    Cx,
    MeasureZ,
    MeasureX,
    Tick,
    Depol1(f64),
    Depol2(f64),
    Erase1(f64),
    Erase2(f64),
    /// Classical flip channel: X before a Z-basis operation.
    XError(f64),
    /// Classical flip channel: Z before an X-basis operation.
    ZError(f64),
    ErasureCheck { fp: f64, fn_: f64 },
    /// Lookbacks `k` meaning `rec[-k]`.
    Detector(Vec<u32>),
    Observable(u32, Vec<u32>),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::ResetZ => "RESET_Z",
            Op::ResetX => "RESET_X",
            Op::H => "H",
            Op::S => "S",
            Op::SDag => "S_DAG",
            Op::T => "T",
            Op::Cx => "CX",
            Op::MeasureZ => "MEASURE_Z",
            Op::MeasureX => "MEASURE_X",
            Op::Tick => "TICK",
            Op::Depol1(_) => "DEPOL1",
            Op::Depol2(_) => "DEPOL2",
            Op::Erase1(_) => "ERASE1",
            Op::Erase2(_) => "ERASE2",
            Op::XError(_) => "X_ERROR",
            Op::ZError(_) => "Z_ERROR",
            Op::ErasureCheck { .. } => "ERASURE_CHECK",
            Op::Detector(_) => "DETECTOR",
            Op::Observable(..) => "OBSERVABLE",
        }
    }

    pub fn is_noise(&self) -> bool {
        matches!(
            self,
            Op::Depol1(_)
                | Op::Depol2(_)
                | Op::Erase1(_)
                | Op::Erase2(_)
                | Op::XError(_)
                | Op::ZError(_)
                | Op::ErasureCheck { .. }
        )
    }

    pub fn is_pauli_noise(&self) -> bool {
        matches!(self, Op::Depol1(_) | Op::Depol2(_) | Op::XError(_) | Op::ZError(_))
    }

    pub fn is_erasure(&self) -> bool {
        matches!(self, Op::Erase1(_) | Op::Erase2(_))
    }

    pub fn is_reset(&self) -> bool {
        matches!(self, Op::ResetZ | Op::ResetX)
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, Op::MeasureZ | Op::MeasureX)
    }

    pub fn is_single_gate(&self) -> bool {
        matches!(self, Op::H | Op::S | Op::SDag | Op::T)
    }

    /// Operations acting on qubit state, as opposed to noise or annotations.
    pub fn is_operation(&self) -> bool {
        self.is_reset() || self.is_measure() || self.is_single_gate() || matches!(self, Op::Cx)
    }

    pub fn pairwise(&self) -> bool {
        matches!(self, Op::Cx | Op::Depol2(_) | Op::Erase2(_))
    }

    fn probabilities(&self) -> Vec<f64> {
        match *self {
            Op::Depol1(p) | Op::Depol2(p) | Op::Erase1(p) | Op::Erase2(p) | Op::XError(p) | Op::ZError(p) => {
                vec![p]
            }
            Op::ErasureCheck { fp, fn_ } => vec![fp, fn_],
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub op: Op,
    pub targets: Vec<u32>,
}

impl Instruction {
    pub fn new(op: Op, targets: Vec<u32>) -> Self {
        Instruction { op, targets }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.targets.chunks_exact(2).map(|c| (c[0], c[1]))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub qubits: Vec<Qubit>,
    pub instructions: Vec<Instruction>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "instruction {i}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationCounts {
    pub x1: usize,
    pub x2: usize,
    pub x_spam: usize,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn push(&mut self, op: Op, targets: Vec<u32>) {
        self.instructions.push(Instruction::new(op, targets));
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(|s| s.as_str())
    }

    pub fn meta_usize(&self, key: &str) -> Option<usize> {
        self.meta(key).and_then(|v| v.parse().ok())
    }

    pub fn meta_qubits(&self, key: &str) -> Vec<u32> {
        self.meta(key)
            .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
            .unwrap_or_default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    pub fn num_measurements(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| i.op.is_measure())
            .map(|i| i.targets.len())
            .sum()
    }

    pub fn num_detectors(&self) -> usize {
        self.instructions.iter().filter(|i| matches!(i.op, Op::Detector(_))).count()
    }

    pub fn num_observables(&self) -> usize {
        self.instructions
            .iter()
            .filter_map(|i| match i.op {
                Op::Observable(id, _) => Some(id as usize + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn has_noise(&self) -> bool {
        self.instructions.iter().any(|i| i.op.is_noise())
    }

    /// Instruction ranges of each round; a round ends with (and includes) its TICK.
    pub fn rounds(&self) -> Vec<Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, ins) in self.instructions.iter().enumerate() {
            if ins.op == Op::Tick {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        if start < self.instructions.len() {
            out.push(start..self.instructions.len());
        }
        out
    }

    /// 1-based round number of every instruction.
    pub fn round_of_instructions(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.instructions.len());
        let mut round = 1;
        for ins in &self.instructions {
            out.push(round);
            if ins.op == Op::Tick {
                round += 1;
            }
        }
        out
    }

    /// 1-based round of each detector, in declaration order.
    pub fn detector_rounds(&self) -> Vec<usize> {
        let rounds = self.round_of_instructions();
        self.instructions
            .iter()
            .zip(rounds)
            .filter(|(i, _)| matches!(i.op, Op::Detector(_)))
            .map(|(_, r)| r)
            .collect()
    }

    /// Last round of the post-selection window, defaulting to the whole circuit.
    pub fn window_rounds(&self) -> usize {
        self.meta_usize("window").unwrap_or(usize::MAX)
    }

    /// Detector mask: `true` for detectors inside the post-selection window.
    pub fn window_detectors(&self) -> Vec<bool> {
        let w = self.window_rounds();
        self.detector_rounds().into_iter().map(|r| r <= w).collect()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate(self)
    }

    pub fn count_locations(&self) -> LocationCounts {
        count_locations(self)
    }

    pub fn to_text(&self) -> String {
        serialize(self)
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        parse(text)
    }
}

pub fn validate(c: &Circuit) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |index: Option<usize>, message: String| out.push(Violation { index, message });
    let n = c.qubits.len() as u32;
    let mut seen_coords = std::collections::HashSet::new();
    for (i, q) in c.qubits.iter().enumerate() {
        if q.index != i as u32 {
            bad(None, format!("qubit {} declared at position {i}", q.index));
        }
        if !seen_coords.insert(q.coords) {
            bad(None, format!("qubit {} shares coords ({}, {})", q.index, q.coords.x(), q.coords.y()));
        }
    }
    let mut measured = 0usize;
    // Erasure checks may not repeat on a qubit without an intervening operation
    // or noise location (idles are noise-only locations).
    let mut checked = vec![false; n as usize];
    for (i, ins) in c.instructions.iter().enumerate() {
        let at = Some(i);
        for p in ins.op.probabilities() {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                bad(at, format!("probability {p} outside [0, 1]"));
            }
        }
        match &ins.op {
            Op::Tick | Op::Detector(_) | Op::Observable(..) => {
                if !ins.targets.is_empty() {
                    bad(at, format!("{} takes no qubit targets", ins.op.name()));
                }
            }
            _ => {}
        }
        for &t in &ins.targets {
            if t >= n {
                bad(at, format!("target {t} out of range"));
            }
        }
        if ins.op.pairwise() {
            if ins.targets.len() % 2 != 0 {
                bad(at, "odd pair count".to_string());
            } else {
                for (a, b) in ins.pairs() {
                    if a == b {
                        bad(at, format!("pair acts twice on qubit {a}"));
                    }
                }
            }
        }
        match &ins.op {
            Op::Detector(recs) | Op::Observable(_, recs) => {
                for &k in recs {
                    if k == 0 || k as usize > measured {
                        bad(at, format!("dangling record rec[-{k}]"));
                    }
                }
            }
            Op::ErasureCheck { .. } => {
                for &t in &ins.targets {
                    if t < n {
                        if checked[t as usize] {
                            bad(at, format!("repeated erasure check on qubit {t}"));
                        }
                        checked[t as usize] = true;
                    }
                }
            }
            op if op.is_operation() || op.is_noise() => {
                for &t in &ins.targets {
                    if t < n {
                        checked[t as usize] = false;
                    }
                }
            }
            _ => {}
        }
        if ins.op.is_measure() {
            measured += ins.targets.len();
        }
    }
    out
}

/// Gate-location counts of a circuit, ignoring noise instructions.
pub fn count_locations(c: &Circuit) -> LocationCounts {
    let mut counts = LocationCounts::default();
    let idle = idle_locations(c);
    counts.x1 += idle.iter().map(|(_, qs)| qs.len()).sum::<usize>();
    for ins in &c.instructions {
        match ins.op {
            Op::Cx => counts.x2 += ins.targets.len() / 2,
            ref op if op.is_single_gate() => counts.x1 += ins.targets.len(),
            ref op if op.is_reset() || op.is_measure() => counts.x_spam += ins.targets.len(),
            _ => {}
        }
    }
    counts
}

/// Idle locations: for every round, the qubits that are initialised and not
/// measured in that round. Returned as (instruction index at which the idle
/// window sits, qubits). The idle window is placed before the round's first
/// measurement, or before its TICK when nothing is measured.
pub fn idle_locations(c: &Circuit) -> Vec<(usize, Vec<u32>)> {
    let n = c.qubits.len();
    let mut active = vec![false; n];
    let mut out = Vec::new();
    for range in c.rounds() {
        let mut measured = vec![false; n];
        let mut first_measure = None;
        let mut in_round_active = active.clone();
        for i in range.clone() {
            let ins = &c.instructions[i];
            if ins.op.is_measure() {
                first_measure.get_or_insert(i);
                for &t in &ins.targets {
                    measured[t as usize] = true;
                }
            }
            if ins.op.is_reset() {
                for &t in &ins.targets {
                    in_round_active[t as usize] = true;
                }
            }
        }
        let at = first_measure.unwrap_or_else(|| {
            if c.instructions[range.end - 1].op == Op::Tick {
                range.end - 1
            } else {
                range.end
            }
        });
        // Only operation-bearing rounds idle.
        let has_ops = range.clone().any(|i| c.instructions[i].op.is_operation());
        let qs: Vec<u32> = (0..n)
            .filter(|&q| in_round_active[q] && !measured[q])
            .map(|q| q as u32)
            .collect();
        if has_ops && !qs.is_empty() {
            out.push((at, qs));
        }
        active = in_round_active;
    }
    out
}

fn fmt_prob_args(op: &Op) -> String {
    match *op {
        Op::Depol1(p) | Op::Depol2(p) | Op::Erase1(p) | Op::Erase2(p) | Op::XError(p) | Op::ZError(p) => {
            format!("({p})")
        }
        Op::ErasureCheck { fp, fn_ } => format!("({fp},{fn_})"),
        _ => String::new(),
    }
}

pub fn serialize(c: &Circuit) -> String {
    use fmt::Write;
    let mut s = String::new();
    for (k, v) in &c.metadata {
        writeln!(s, "META {k} {v}").unwrap();
    }
    for q in &c.qubits {
        writeln!(s, "QUBIT {} {} {} {}", q.index, q.coords.x(), q.coords.y(), q.role.as_str()).unwrap();
    }
    for ins in &c.instructions {
        s.push_str(ins.op.name());
        s.push_str(&fmt_prob_args(&ins.op));
        match &ins.op {
            Op::Detector(recs) => {
                for k in recs {
                    write!(s, " rec[-{k}]").unwrap();
                }
            }
            Op::Observable(id, recs) => {
                write!(s, " {id}").unwrap();
                for k in recs {
                    write!(s, " rec[-{k}]").unwrap();
                }
            }
            _ => {
                for t in &ins.targets {
                    write!(s, " {t}").unwrap();
                }
            }
        }
        s.push('\n');
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, message: msg.into() }
}

fn parse_coord(line: usize, s: &str) -> Result<i32> {
    let v: f64 = s.parse().map_err(|_| parse_err(line, format!("bad coordinate '{s}'")))?;
    let d = v * 2.0;
    if d.fract() != 0.0 {
        return Err(parse_err(line, format!("coordinate '{s}' is not a half-integer")));
    }
    Ok(d as i32)
}

fn parse_rec(line: usize, s: &str) -> Result<u32> {
    let inner = s
        .strip_prefix("rec[-")
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| parse_err(line, format!("expected rec[-k], got '{s}'")))?;
    inner.parse().map_err(|_| parse_err(line, format!("bad record offset '{s}'")))
}

pub fn parse(text: &str) -> Result<Circuit> {
    let mut c = Circuit::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut words = content.split_whitespace();
        let head = words.next().unwrap();
        let rest: Vec<&str> = words.collect();
        if head == "META" {
            if rest.len() < 2 {
                return Err(parse_err(line, "META needs a key and a value"));
            }
            c.metadata.insert(rest[0].to_string(), rest[1..].join(" "));
            continue;
        }
        if head == "QUBIT" {
            if !c.instructions.is_empty() {
                return Err(parse_err(line, "QUBIT declarations must precede instructions"));
            }
            if rest.len() != 4 {
                return Err(parse_err(line, "QUBIT expects index, x, y and role"));
            }
            let index = rest[0].parse().map_err(|_| parse_err(line, "bad qubit index"))?;
            let role = match rest[3] {
                "data" => Role::Data,
                "x_ancilla" => Role::XAncilla,
                "z_ancilla" => Role::ZAncilla,
                other => return Err(parse_err(line, format!("unknown role '{other}'"))),
            };
            c.qubits.push(Qubit {
                index,
                coords: Coord::new(parse_coord(line, rest[1])?, parse_coord(line, rest[2])?),
                role,
            });
            continue;
        }
        let (name, args) = match head.find('(') {
            Some(i) => {
                let a = head[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| parse_err(line, "unclosed parenthesis"))?;
                let vals: Vec<f64> = a
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|_| parse_err(line, format!("bad probability '{v}'"))))
                    .collect::<Result<_>>()?;
                (&head[..i], vals)
            }
            None => (head, Vec::new()),
        };
        let want = |k: usize| -> Result<()> {
            if args.len() != k {
                Err(parse_err(line, format!("{name} takes {k} parenthesised argument(s)")))
            } else {
                Ok(())
            }
        };
        let op = match name {
            "RESET_Z" => Op::ResetZ,
            "RESET_X" => Op::ResetX,
            "H" => Op::H,
            "S" => Op::S,
            "S_DAG" => Op::SDag,
            "T" => Op::T,
            "CX" => Op::Cx,
            "MEASURE_Z" => Op::MeasureZ,
            "MEASURE_X" => Op::MeasureX,
            "TICK" => Op::Tick,
            "DEPOL1" => {
                want(1)?;
                Op::Depol1(args[0])
            }
            "DEPOL2" => {
                want(1)?;
                Op::Depol2(args[0])
            }
            "ERASE1" => {
                want(1)?;
                Op::Erase1(args[0])
            }
            "ERASE2" => {
                want(1)?;
                Op::Erase2(args[0])
            }
            "X_ERROR" => {
                want(1)?;
                Op::XError(args[0])
            }
            "Z_ERROR" => {
                want(1)?;
                Op::ZError(args[0])
            }
            "ERASURE_CHECK" => {
                want(2)?;
                Op::ErasureCheck { fp: args[0], fn_: args[1] }
            }
            "DETECTOR" => {
                let recs = rest.iter().map(|w| parse_rec(line, w)).collect::<Result<_>>()?;
                c.push(Op::Detector(recs), vec![]);
                continue;
            }
            "OBSERVABLE" => {
                let id = rest
                    .first()
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| parse_err(line, "OBSERVABLE needs an integer id"))?;
                let recs = rest[1..].iter().map(|w| parse_rec(line, w)).collect::<Result<_>>()?;
                c.push(Op::Observable(id, recs), vec![]);
                continue;
            }
            other => return Err(parse_err(line, format!("unknown opcode '{other}'"))),
        };
        if !args.is_empty() && op.probabilities().is_empty() {
            return Err(parse_err(line, format!("{name} takes no parenthesised arguments")));
        }
        let targets = rest
            .iter()
            .map(|w| w.parse::<u32>().map_err(|_| parse_err(line, format!("bad target '{w}'"))))
            .collect::<Result<_>>()?;
        c.push(op, targets);
    }
    Ok(c)
}
