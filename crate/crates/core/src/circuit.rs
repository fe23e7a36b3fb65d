//! Circuit container and builders: QFT, ripple-carry modular adders, polynomial phases,
//! inversion, gate accounting, lowering and a line-based text format.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::state::{reduce_angle, GateOp, NoiseSpec, StateVector};
use crate::{Error, Result};

/// An ordered gate list on `width` qubits plus an accumulated global phase.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Circuit {
    width: usize,
    gates: Vec<GateOp>,
    global_phase: f64,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit {
            width,
            gates: Vec::new(),
            global_phase: 0.0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn add_global_phase(&mut self, phase: f64) {
        self.global_phase = reduce_angle(self.global_phase + phase);
    }

    pub fn push(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.width)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Appends `other`; the width grows to cover both.
    pub fn append(&mut self, other: &Circuit) {
        self.width = self.width.max(other.width);
        self.gates.extend_from_slice(&other.gates);
        self.add_global_phase(other.global_phase);
    }

    /// Widens the declared register without touching the gates.
    pub fn with_width(mut self, width: usize) -> Result<Self> {
        if width < self.width {
            return Err(Error::domain(format!(
                "cannot shrink circuit from {} to {width} qubits",
                self.width
            )));
        }
        self.width = width;
        Ok(self)
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if self.width > state.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                found: state.num_qubits(),
            });
        }
        Ok(())
    }

    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        self.check_state(state)?;
        for gate in &self.gates {
            state.apply(gate)?;
        }
        state.apply_global_phase(self.global_phase);
        Ok(())
    }

    /// Runs the circuit with every gate passed through the noise model.
    pub fn apply_noisy_to(&self, state: &mut StateVector, noise: &mut NoiseSpec) -> Result<()> {
        self.check_state(state)?;
        for gate in &self.gates {
            state.apply_noisy(gate, noise)?;
        }
        state.apply_global_phase(self.global_phase);
        Ok(())
    }

    pub fn inverse(&self) -> Circuit {
        Circuit {
            width: self.width,
            gates: self.gates.iter().rev().map(GateOp::inverse).collect(),
            global_phase: reduce_angle(-self.global_phase),
        }
    }

    pub fn count(&self) -> GateCount {
        let mut count = GateCount::default();
        for g in &self.gates {
            *count.by_kind.entry(g.kind()).or_default() += 1;
            *count.by_arity.entry(g.arity()).or_default() += 1;
            count.total += 1;
        }
        count
    }

    /// Serializes to the text format: a `width=m` header, an optional `global_phase=`
    /// line, then one `KIND q0 [q1 ...] [angle]` line per gate. Diagonal gates are written
    /// as `DIAG q0 .. qk ; phase_0 .. phase_{2^k-1}`.
    pub fn to_text(&self) -> String {
        let mut out = format!("width={}\n", self.width);
        if self.global_phase != 0.0 {
            writeln!(out, "global_phase={:?}", self.global_phase).unwrap();
        }
        for g in &self.gates {
            out.push_str(g.kind());
            for q in g.qubits() {
                write!(out, " {q}").unwrap();
            }
            if let Some(angle) = g.angle() {
                write!(out, " {angle:?}").unwrap();
            }
            if let GateOp::Diagonal { phases, .. } = g {
                out.push_str(" ;");
                for p in phases.iter() {
                    write!(out, " {p:?}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`Circuit::to_text`] output. Blank lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let width = header
            .strip_prefix("width=")
            .and_then(|w| w.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected `width=<m>`, got `{header}`"),
            })?;
        let mut circuit = Circuit::new(width);
        for (line, text) in lines {
            let perr = |msg: String| Error::Parse { line, msg };
            if let Some(phase) = text.strip_prefix("global_phase=") {
                circuit.global_phase = phase
                    .trim()
                    .parse()
                    .map_err(|e| perr(format!("bad global phase: {e}")))?;
                continue;
            }
            let gate = parse_gate(text).map_err(perr)?;
            circuit.push(gate).map_err(|e| perr(e.to_string()))?;
        }
        Ok(circuit)
    }
}

fn parse_gate(text: &str) -> std::result::Result<GateOp, String> {
    let (head, phases) = match text.split_once(';') {
        Some((h, p)) => (h, Some(p)),
        None => (text, None),
    };
    let mut tokens = head.split_whitespace();
    let kind = tokens.next().ok_or("missing gate kind")?;
    let rest: Vec<&str> = tokens.collect();
    let qubit = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| format!("bad qubit `{s}`: {e}"))
    };
    let angle = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| format!("bad angle `{s}`: {e}"))
    };
    let qubits_then_angle = |n: Option<usize>| -> std::result::Result<(Vec<usize>, f64), String> {
        let (a, qs) = rest.split_last().ok_or("missing angle")?;
        if let Some(n) = n {
            if qs.len() != n {
                return Err(format!("{kind} takes {n} qubits and an angle"));
            }
        }
        Ok((
            qs.iter()
                .map(|s| qubit(s))
                .collect::<std::result::Result<_, _>>()?,
            angle(a)?,
        ))
    };
    let qubits_only = |n: usize| -> std::result::Result<Vec<usize>, String> {
        if rest.len() != n {
            return Err(format!("{kind} takes {n} qubits"));
        }
        rest.iter().map(|s| qubit(s)).collect()
    };
    if phases.is_some() && kind != "DIAG" {
        return Err(format!("unexpected `;` in {kind} line"));
    }
    Ok(match kind {
        "H" => GateOp::Hadamard(qubits_only(1)?[0]),
        "S" => GateOp::Phase(qubits_only(1)?[0]),
        "CNOT" => {
            let q = qubits_only(2)?;
            GateOp::Cnot {
                control: q[0],
                target: q[1],
            }
        }
        "TOFFOLI" => {
            let q = qubits_only(3)?;
            GateOp::Toffoli {
                controls: [q[0], q[1]],
                target: q[2],
            }
        }
        "SWAP" => {
            let q = qubits_only(2)?;
            GateOp::Swap(q[0], q[1])
        }
        "CPHASE" => {
            let (q, a) = qubits_then_angle(Some(2))?;
            GateOp::ControlledPhase {
                qubits: [q[0], q[1]],
                angle: a,
            }
        }
        "RPHASE" => {
            let (q, a) = qubits_then_angle(Some(1))?;
            GateOp::PhaseRotation {
                qubit: q[0],
                angle: a,
            }
        }
        "MCPHASE" => {
            let (q, a) = qubits_then_angle(None)?;
            GateOp::MultiControlledPhase {
                qubits: q,
                angle: a,
            }
        }
        "DIAG" => {
            let phases = phases.ok_or("DIAG needs `; phases`")?;
            let qubits = rest
                .iter()
                .map(|s| qubit(s))
                .collect::<std::result::Result<_, _>>()?;
            let phases = phases
                .split_whitespace()
                .map(angle)
                .collect::<std::result::Result<Vec<f64>, _>>()?;
            GateOp::Diagonal {
                qubits,
                phases: phases.into(),
            }
        }
        other => return Err(format!("unknown gate kind `{other}`")),
    })
}

/// Gate tallies by kind and by number of touched qubits.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GateCount {
    pub by_kind: BTreeMap<&'static str, usize>,
    pub by_arity: BTreeMap<usize, usize>,
    pub total: usize,
}

impl GateCount {
    pub fn kind(&self, kind: &str) -> usize {
        self.by_kind.get(kind).copied().unwrap_or(0)
    }

    /// Gates other than native diagonals (which have no universal-gate decomposition).
    pub fn universal(&self) -> usize {
        self.total - self.kind("DIAG")
    }
}

pub fn count_gates(c: &Circuit) -> GateCount {
    c.count()
}

pub fn invert_circuit(c: &Circuit) -> Circuit {
    c.inverse()
}

fn width_of(registers: &[&[usize]]) -> usize {
    registers
        .iter()
        .flat_map(|r| r.iter())
        .max()
        .map_or(0, |m| m + 1)
}

fn check_disjoint(registers: &[&[usize]]) -> Result<()> {
    let mut all: Vec<usize> = registers.iter().flat_map(|r| r.iter().copied()).collect();
    all.sort_unstable();
    if all.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("registers overlap"));
    }
    Ok(())
}

/// Quantum Fourier transform on `register` (bit j of the value is `register[j]`).
///
/// The core is H on the most significant qubit followed by controlled phases pi/2^d from
/// each lower qubit, repeated downwards: n Hadamards and n(n-1)/2 controlled phases. It
/// leaves the output bit-reversed; `bit_reversal_fix` appends floor(n/2) swaps so that the
/// circuit equals F_kl = 2^{-n/2} exp(2 pi i k l / 2^n). `inverse` returns the adjoint.
pub fn build_qft(register: &[usize], inverse: bool, bit_reversal_fix: bool) -> Result<Circuit> {
    let n = register.len();
    if n == 0 {
        return Err(Error::domain("QFT on an empty register"));
    }
    check_disjoint(&[register])?;
    let mut c = Circuit::new(width_of(&[register]));
    for j in (0..n).rev() {
        c.push(GateOp::Hadamard(register[j]))?;
        for k in (0..j).rev() {
            c.push(GateOp::controlled_phase(
                register[k],
                register[j],
                PI / (1u64 << (j - k)) as f64,
            ))?;
        }
    }
    if bit_reversal_fix {
        for i in 0..n / 2 {
            c.push(GateOp::Swap(register[i], register[n - 1 - i]))?;
        }
    }
    Ok(if inverse { c.inverse() } else { c })
}

/// Number of gates emitted by [`build_modular_adder`] for a full-width source.
pub fn adder_gate_count(w: usize) -> usize {
    if w <= 1 {
        w
    } else {
        8 * w - 11
    }
}

/// Ripple-carry addition |a>|b>|0> -> |a>|(a + b) mod 2^w>|0>.
///
/// `dst` must hold exactly `w` qubits, `src` at most `w` (missing high bits are zero and
/// their gates are dropped), and `carry` at least `w - 1` (only the first `w - 1` are
/// used, and they are returned to |0>).
pub fn build_modular_adder(
    src: &[usize],
    dst: &[usize],
    carry: &[usize],
    w: usize,
) -> Result<Circuit> {
    if w == 0 || dst.len() != w {
        return Err(Error::domain(format!(
            "destination has {} qubits, width is {w}",
            dst.len()
        )));
    }
    if src.len() > w {
        return Err(Error::domain(format!(
            "source has {} qubits, more than width {w}",
            src.len()
        )));
    }
    if carry.len() + 1 < w {
        return Err(Error::domain(format!(
            "carry register has {} qubits, needs {}",
            carry.len(),
            w - 1
        )));
    }
    let carry = &carry[..w - 1];
    check_disjoint(&[src, dst, carry])?;

    let mut c = Circuit::new(width_of(&[src, dst, carry]));
    let a = |i: usize| src.get(i).copied();
    let b = |i: usize| dst[i];
    // carry[i - 1] holds the carry into bit i.
    let cin = |i: usize| carry[i - 1];
    let mut ops: Vec<GateOp> = Vec::new();
    let toffoli = |x: usize, y: usize, t: usize| GateOp::Toffoli {
        controls: [x, y],
        target: t,
    };
    let cnot = |x: usize, t: usize| GateOp::Cnot {
        control: x,
        target: t,
    };

    if w == 1 {
        if let Some(a0) = a(0) {
            ops.push(cnot(a0, b(0)));
        }
    } else {
        if let Some(a0) = a(0) {
            ops.push(toffoli(a0, b(0), cin(1)));
        }
        for i in 1..w - 1 {
            if let Some(ai) = a(i) {
                ops.push(toffoli(ai, b(i), cin(i + 1)));
                ops.push(cnot(ai, b(i)));
            }
            ops.push(toffoli(cin(i), b(i), cin(i + 1)));
        }
        if let Some(top) = a(w - 1) {
            ops.push(cnot(top, b(w - 1)));
        }
        ops.push(cnot(cin(w - 1), b(w - 1)));
        for i in (1..w - 1).rev() {
            ops.push(toffoli(cin(i), b(i), cin(i + 1)));
            if let Some(ai) = a(i) {
                ops.push(cnot(ai, b(i)));
                ops.push(toffoli(ai, b(i), cin(i + 1)));
                ops.push(cnot(ai, b(i)));
            }
            ops.push(cnot(cin(i), b(i)));
        }
        if let Some(a0) = a(0) {
            ops.push(toffoli(a0, b(0), cin(1)));
            ops.push(cnot(a0, b(0)));
        }
    }
    for g in ops {
        c.push(g)?;
    }
    Ok(c)
}

/// |a>|b>|0> -> |a>|(b - a) mod 2^w>|0>; the inverse of [`build_modular_adder`].
pub fn build_modular_subtractor(
    src: &[usize],
    dst: &[usize],
    carry: &[usize],
    w: usize,
) -> Result<Circuit> {
    Ok(build_modular_adder(src, dst, carry, w)?.inverse())
}

/// How a register's bits encode the variable of a phase polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    /// x in [0, 2^n).
    Unsigned,
    /// Two's complement, x in [-2^(n-1), 2^(n-1)).
    Signed,
}

impl Encoding {
    pub fn value(self, raw: usize, n: usize) -> i64 {
        match self {
            Encoding::Signed if n > 0 && (raw >> (n - 1)) & 1 == 1 => raw as i64 - (1i64 << n),
            _ => raw as i64,
        }
    }
}

/// Phase angle per set of distinct bits (bitmask over register positions) for
/// exp(i poly(x)), after reducing b^k = b.
pub fn phase_monomials(n: usize, poly: &[f64], encoding: Encoding) -> Result<BTreeMap<u64, f64>> {
    if n == 0 || n > 63 {
        return Err(Error::domain(format!("register of {n} qubits")));
    }
    if poly.len() > 5 {
        return Err(Error::Unsupported(format!(
            "phase polynomial of degree {}",
            poly.len() - 1
        )));
    }
    let weights: Vec<f64> = (0..n)
        .map(|j| {
            let w = (1u64 << j) as f64;
            if encoding == Encoding::Signed && j == n - 1 {
                -w
            } else {
                w
            }
        })
        .collect();
    let mut terms: BTreeMap<u64, f64> = BTreeMap::new();
    for (d, &coef) in poly.iter().enumerate() {
        if coef == 0.0 {
            continue;
        }
        // Sum over ordered d-tuples of bit positions.
        let mut idx = vec![0usize; d];
        loop {
            let mut mask = 0u64;
            let mut w = coef;
            for &j in &idx {
                mask |= 1 << j;
                w *= weights[j];
            }
            *terms.entry(mask).or_insert(0.0) += w;
            // Next tuple.
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
    }
    Ok(terms)
}

/// Diagonal circuit |x> -> exp(i poly(x)) |x> with `poly = [c0, c1, ...]` of degree at
/// most 4 in the unsigned register value. One phase gate per surviving monomial; c0 goes
/// to the global phase.
pub fn build_diagonal_phase(register: &[usize], poly: &[f64]) -> Result<Circuit> {
    build_diagonal_phase_encoded(register, poly, Encoding::Unsigned)
}

/// As [`build_diagonal_phase`], with an explicit encoding of the register value.
pub fn build_diagonal_phase_encoded(
    register: &[usize],
    poly: &[f64],
    encoding: Encoding,
) -> Result<Circuit> {
    check_disjoint(&[register])?;
    let terms = phase_monomials(register.len(), poly, encoding)?;
    let mut c = Circuit::new(width_of(&[register]));
    for (mask, angle) in terms {
        let angle = reduce_angle(angle);
        if angle.abs() < 1e-13 {
            continue;
        }
        let qs: Vec<usize> = (0..register.len())
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| register[j])
            .collect();
        match qs.len() {
            0 => c.add_global_phase(angle),
            1 => c.push(GateOp::phase_rotation(qs[0], angle))?,
            2 => c.push(GateOp::controlled_phase(qs[0], qs[1], angle))?,
            _ => c.push(GateOp::multi_controlled_phase(qs, angle))?,
        }
    }
    Ok(c)
}

/// Rewrites a circuit over {H, S, CNOT, CPHASE, RPHASE, SWAP}: Toffoli becomes H, a doubly
/// controlled Z and H; multi-controlled phases are expanded with the parity identity
/// b_1...b_k = 2^{1-k} sum_{T nonempty} (-1)^{|T|+1} parity(T), each parity evaluated by a
/// CNOT ladder around one rotation. Native diagonals are kept as they are.
pub fn lower(c: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(c.width);
    out.global_phase = c.global_phase;
    for g in &c.gates {
        match g {
            GateOp::Toffoli { controls, target } => {
                out.push(GateOp::Hadamard(*target))?;
                lower_mcphase(&mut out, &[controls[0], controls[1], *target], PI)?;
                out.push(GateOp::Hadamard(*target))?;
            }
            GateOp::MultiControlledPhase { qubits, angle } => {
                lower_mcphase(&mut out, qubits, *angle)?
            }
            _ => out.push(g.clone())?,
        }
    }
    Ok(out)
}

fn lower_mcphase(out: &mut Circuit, qubits: &[usize], angle: f64) -> Result<()> {
    let k = qubits.len();
    let scale = angle / (1u64 << (k - 1)) as f64;
    for subset in 1u32..(1 << k) {
        let members: Vec<usize> = (0..k)
            .filter(|j| subset >> j & 1 == 1)
            .map(|j| qubits[j])
            .collect();
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        let (last, rest) = members.split_last().unwrap();
        for &q in rest {
            out.push(GateOp::Cnot {
                control: q,
                target: *last,
            })?;
        }
        out.push(GateOp::phase_rotation(*last, sign * scale))?;
        for &q in rest.iter().rev() {
            out.push(GateOp::Cnot {
                control: q,
                target: *last,
            })?;
        }
    }
    Ok(())
}

/// Per-basis phase factors of a circuit made only of diagonal gates.
pub fn diagonal_of(c: &Circuit) -> Result<Vec<Complex64>> {
    if let Some(g) = c.gates.iter().find(|g| !g.is_diagonal()) {
        return Err(Error::domain(format!("{} is not diagonal", g.kind())));
    }
    if c.width > 24 {
        return Err(Error::Resource {
            what: "diagonal".into(),
            needed: 16 << c.width,
            cap: 16 << 24,
        });
    }
    let dim = 1usize << c.width.max(1);
    let mut d = vec![Complex64::from_polar(1.0, c.global_phase); dim];
    for g in &c.gates {
        let qs = g.qubits();
        let m = g.local_matrix();
        let k = 1usize << qs.len();
        for (i, slot) in d.iter_mut().enumerate() {
            let p = crate::state::gather_bits(i, &qs);
            *slot *= m[p * k + p];
        }
    }
    Ok(d)
}
