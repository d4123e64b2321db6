//! Stabilizer tableau with symbolic measurement outcomes.
//!
//! Each random measurement introduces a fresh binary symbol, so every outcome
//! is an affine GF(2) expression in those symbols. A parity of outcomes is
//! deterministic exactly when its symbol set cancels, which is how builders
//! decide which comparisons become detectors.

use crate::circuit::{Circuit, Op};
use crate::error::{Error, Result};

/// Affine expression `c ⊕ (⊕ symbols)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Expr {
    pub constant: bool,
    pub symbols: Vec<u64>,
}

impl Expr {
    pub fn zero(words: usize) -> Self {
        Expr { constant: false, symbols: vec![0; words] }
    }

    pub fn is_deterministic(&self) -> bool {
        self.symbols.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &Expr) {
        self.constant ^= other.constant;
        for (a, b) in self.symbols.iter_mut().zip(&other.symbols) {
            *a ^= b;
        }
    }

    /// Evaluate with symbol `k` set to `bits(k)`.
    pub fn eval(&self, bits: impl Fn(usize) -> bool) -> bool {
        let mut v = self.constant;
        for (w, &word) in self.symbols.iter().enumerate() {
            let mut m = word;
            while m != 0 {
                let b = m.trailing_zeros() as usize;
                v ^= bits(w * 64 + b);
                m &= m - 1;
            }
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct Tableau {
    n: usize,
    w: usize,
    sw: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<u64>,
    symbols: usize,
}

#[inline]
fn bit(v: &[u64], i: usize) -> bool {
    (v[i >> 6] >> (i & 63)) & 1 == 1
}

impl Tableau {
    /// `|0…0⟩` on `n` qubits with room for `max_symbols` random outcomes.
    pub fn new(n: usize, max_symbols: usize) -> Self {
        let w = n.div_ceil(64).max(1);
        let sw = max_symbols.div_ceil(64).max(1);
        let rows = 2 * n + 1;
        let mut t = Tableau {
            n,
            w,
            sw,
            x: vec![0; rows * w],
            z: vec![0; rows * w],
            r: vec![0; rows * (sw + 1)],
            symbols: 0,
        };
        for i in 0..n {
            t.x[i * w + (i >> 6)] |= 1 << (i & 63);
            t.z[(i + n) * w + (i >> 6)] |= 1 << (i & 63);
        }
        t
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn symbol_words(&self) -> usize {
        self.sw
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols
    }

    #[inline]
    fn xb(&self, row: usize, q: usize) -> bool {
        bit(&self.x[row * self.w..], q)
    }

    #[inline]
    fn zb(&self, row: usize, q: usize) -> bool {
        bit(&self.z[row * self.w..], q)
    }

    #[inline]
    fn flip_const(&mut self, row: usize) {
        self.r[row * (self.sw + 1)] ^= 1;
    }

    fn phase_xor_expr(&mut self, row: usize, e: &Expr) {
        let base = row * (self.sw + 1);
        self.r[base] ^= e.constant as u64;
        for (k, &s) in e.symbols.iter().enumerate() {
            self.r[base + 1 + k] ^= s;
        }
    }

    fn row_expr(&self, row: usize) -> Expr {
        let base = row * (self.sw + 1);
        Expr { constant: self.r[base] & 1 == 1, symbols: self.r[base + 1..base + 1 + self.sw].to_vec() }
    }

    fn set_row_expr(&mut self, row: usize, e: &Expr) {
        let base = row * (self.sw + 1);
        self.r[base] = e.constant as u64;
        self.r[base + 1..base + 1 + self.sw].copy_from_slice(&e.symbols);
    }

    fn each_row(&mut self, q: usize, mut f: impl FnMut(bool, bool) -> (bool, bool, bool)) {
        let (wi, m) = (q >> 6, 1u64 << (q & 63));
        for row in 0..2 * self.n {
            let idx = row * self.w + wi;
            let (xv, zv) = (self.x[idx] & m != 0, self.z[idx] & m != 0);
            let (nx, nz, flip) = f(xv, zv);
            if nx != xv {
                self.x[idx] ^= m;
            }
            if nz != zv {
                self.z[idx] ^= m;
            }
            if flip {
                self.flip_const(row);
            }
        }
    }

    pub fn h(&mut self, q: usize) {
        self.each_row(q, |x, z| (z, x, x && z));
    }

    pub fn s(&mut self, q: usize) {
        self.each_row(q, |x, z| (x, z ^ x, x && z));
    }

    pub fn s_dag(&mut self, q: usize) {
        self.each_row(q, |x, z| (x, z ^ x, x && !z));
    }

    pub fn x_gate(&mut self, q: usize) {
        self.each_row(q, |x, z| (x, z, z));
    }

    pub fn z_gate(&mut self, q: usize) {
        self.each_row(q, |x, z| (x, z, x));
    }

    pub fn y_gate(&mut self, q: usize) {
        self.each_row(q, |x, z| (x, z, x ^ z));
    }

    pub fn cx(&mut self, a: usize, b: usize) {
        let (wa, ma) = (a >> 6, 1u64 << (a & 63));
        let (wb, mb) = (b >> 6, 1u64 << (b & 63));
        for row in 0..2 * self.n {
            let o = row * self.w;
            let xa = self.x[o + wa] & ma != 0;
            let za = self.z[o + wa] & ma != 0;
            let xb = self.x[o + wb] & mb != 0;
            let zb = self.z[o + wb] & mb != 0;
            if xa && zb && (xb == za) {
                self.flip_const(row);
            }
            if xa {
                self.x[o + wb] ^= mb;
            }
            if zb {
                self.z[o + wa] ^= ma;
            }
        }
    }

    /// Row `h` ← row `h` · row `i`, tracking the phase.
    fn rowsum(&mut self, h: usize, i: usize) {
        let w = self.w;
        let mut sum: i64 = 0;
        for k in 0..w {
            let x1 = self.x[i * w + k];
            let z1 = self.z[i * w + k];
            let x2 = self.x[h * w + k];
            let z2 = self.z[h * w + k];
            let pos = (x1 & z1 & z2 & !x2) | (x1 & !z1 & z2 & x2) | (!x1 & z1 & x2 & !z2);
            let neg = (x1 & z1 & x2 & !z2) | (x1 & !z1 & z2 & !x2) | (!x1 & z1 & x2 & z2);
            sum += pos.count_ones() as i64 - neg.count_ones() as i64;
            self.x[h * w + k] ^= x1;
            self.z[h * w + k] ^= z1;
        }
        let sum = sum.rem_euclid(4);
        debug_assert!(sum % 2 == 0);
        let sw1 = self.sw + 1;
        for k in 0..sw1 {
            let v = self.r[i * sw1 + k];
            self.r[h * sw1 + k] ^= v;
        }
        if sum == 2 {
            self.flip_const(h);
        }
    }

    fn clear_row(&mut self, row: usize) {
        let w = self.w;
        self.x[row * w..(row + 1) * w].fill(0);
        self.z[row * w..(row + 1) * w].fill(0);
        let sw1 = self.sw + 1;
        self.r[row * sw1..(row + 1) * sw1].fill(0);
    }

    fn copy_row(&mut self, dst: usize, src: usize) {
        let w = self.w;
        self.x.copy_within(src * w..(src + 1) * w, dst * w);
        self.z.copy_within(src * w..(src + 1) * w, dst * w);
        let sw1 = self.sw + 1;
        self.r.copy_within(src * sw1..(src + 1) * sw1, dst * sw1);
    }

    /// Deterministic value of a Z measurement on `q`, if it is deterministic.
    pub fn peek_z(&mut self, q: usize) -> Option<Expr> {
        let n = self.n;
        if (n..2 * n).any(|p| self.xb(p, q)) {
            return None;
        }
        let scratch = 2 * n;
        self.clear_row(scratch);
        for i in 0..n {
            if self.xb(i, q) {
                self.rowsum(scratch, i + n);
            }
        }
        Some(self.row_expr(scratch))
    }

    /// Measure Z on `q`. Random outcomes take `forced` if given, otherwise a fresh symbol.
    pub fn measure_z(&mut self, q: usize, forced: Option<bool>) -> Expr {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&p| self.xb(p, q)) {
            // Row p - n is overwritten below, so it is skipped.
            for i in 0..2 * n {
                if i != p && i != p - n && self.xb(i, q) {
                    self.rowsum(i, p);
                }
            }
            self.copy_row(p - n, p);
            self.clear_row(p);
            self.z[p * self.w + (q >> 6)] |= 1 << (q & 63);
            let mut e = Expr::zero(self.sw);
            match forced {
                Some(v) => e.constant = v,
                None => {
                    assert!(self.symbols < self.sw * 64, "tableau symbol capacity exceeded");
                    e.symbols[self.symbols >> 6] |= 1 << (self.symbols & 63);
                    self.symbols += 1;
                }
            }
            self.set_row_expr(p, &e);
            e
        } else {
            self.peek_z(q).expect("deterministic")
        }
    }

    pub fn measure_x(&mut self, q: usize, forced: Option<bool>) -> Expr {
        self.h(q);
        let e = self.measure_z(q, forced);
        self.h(q);
        e
    }

    /// Reset to |0⟩. The discarded outcome gets its own symbol, since it can
    /// still decide the state of qubits entangled with `q`.
    pub fn reset_z(&mut self, q: usize) {
        let e = self.measure_z(q, None);
        if e.constant || !e.is_deterministic() {
            // Conditionally apply X: flip the phase of rows anticommuting with X_q.
            for row in 0..2 * self.n {
                if self.zb(row, q) {
                    self.phase_xor_expr(row, &e);
                }
            }
        }
    }

    pub fn reset_x(&mut self, q: usize) {
        self.h(q);
        self.reset_z(q);
        self.h(q);
    }

    /// Expectation of a Hermitian Pauli string given by bit vectors (`x&z` means Y):
    /// `Some(e)` with eigenvalue `(-1)^e` when deterministic.
    pub fn peek_pauli(&mut self, xs: &[bool], zs: &[bool]) -> Option<Expr> {
        let n = self.n;
        let anti = |t: &Tableau, row: usize| -> bool {
            let mut par = false;
            for q in 0..n {
                par ^= (xs[q] && t.zb(row, q)) ^ (zs[q] && t.xb(row, q));
            }
            par
        };
        if (n..2 * n).any(|p| anti(self, p)) {
            return None;
        }
        let scratch = 2 * n;
        self.clear_row(scratch);
        for i in 0..n {
            if anti(self, i) {
                self.rowsum(scratch, i + n);
            }
        }
        for q in 0..n {
            debug_assert_eq!(self.xb(scratch, q), xs[q]);
            debug_assert_eq!(self.zb(scratch, q), zs[q]);
        }
        Some(self.row_expr(scratch))
    }
}

/// Symbolic outcomes of every measurement of a noiseless Clifford circuit.
/// `T` is simulated as `S` (the Clifford proxy used for analysis).
pub fn symbolic_outcomes(c: &Circuit) -> Result<(Vec<Expr>, usize)> {
    let resets: usize = c.instructions.iter().filter(|i| i.op.is_reset()).map(|i| i.targets.len()).sum();
    let mut t = Tableau::new(c.num_qubits(), c.num_measurements() + resets);
    let mut out = Vec::with_capacity(c.num_measurements());
    for ins in &c.instructions {
        run_op(&mut t, &ins.op, &ins.targets, &mut out)?;
    }
    let sw = t.symbol_words();
    Ok((out, sw))
}

pub(crate) fn run_op(t: &mut Tableau, op: &Op, targets: &[u32], out: &mut Vec<Expr>) -> Result<()> {
    match op {
        Op::ResetZ => targets.iter().for_each(|&q| t.reset_z(q as usize)),
        Op::ResetX => targets.iter().for_each(|&q| t.reset_x(q as usize)),
        Op::H => targets.iter().for_each(|&q| t.h(q as usize)),
        Op::S | Op::T => targets.iter().for_each(|&q| t.s(q as usize)),
        Op::SDag => targets.iter().for_each(|&q| t.s_dag(q as usize)),
        Op::Cx => {
            for c in targets.chunks_exact(2) {
                t.cx(c[0] as usize, c[1] as usize);
            }
        }
        Op::MeasureZ => targets.iter().for_each(|&q| out.push(t.measure_z(q as usize, None))),
        Op::MeasureX => targets.iter().for_each(|&q| out.push(t.measure_x(q as usize, None))),
        op if op.is_noise() => {}
        Op::Tick | Op::Detector(_) | Op::Observable(..) => {}
        other => return Err(Error::Unsupported(other.name().to_string())),
    }
    Ok(())
}

/// Detector and observable expressions: XOR of the referenced outcome expressions.
pub fn annotation_exprs(c: &Circuit, outcomes: &[Expr], sw: usize) -> (Vec<Expr>, Vec<Expr>) {
    let mut dets = Vec::new();
    let mut obs: Vec<Expr> = vec![Expr::zero(sw); c.num_observables()];
    let mut measured = 0usize;
    for ins in &c.instructions {
        match &ins.op {
            op if op.is_measure() => measured += ins.targets.len(),
            Op::Detector(recs) => {
                let mut e = Expr::zero(sw);
                for &k in recs {
                    e.xor_assign(&outcomes[measured - k as usize]);
                }
                dets.push(e);
            }
            Op::Observable(id, recs) => {
                for &k in recs {
                    let m = outcomes[measured - k as usize].clone();
                    obs[*id as usize].xor_assign(&m);
                }
            }
            _ => {}
        }
    }
    (dets, obs)
}
