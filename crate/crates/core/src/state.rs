//! Statevector, register layout, elementary gates and the per-gate noise model.
//!
//! Qubit 0 is the least-significant bit of the basis index.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::rng::Stream;
use crate::{Error, Result};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest register handled by the simulator (2^30 amplitudes = 16 GiB).
pub const MAX_QUBITS: usize = 30;

/// Reduce an angle to (-pi, pi].
pub fn reduce_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("num_qubits", &self.num_qubits)
            .field("len", &self.amps.len())
            .finish()
    }
}

impl StateVector {
    /// Computational basis state `|index>` on `num_qubits` qubits.
    pub fn new_basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::domain(format!(
                "qubit count {num_qubits} outside 1..={MAX_QUBITS}"
            )));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::domain(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(StateVector { num_qubits, amps })
    }

    /// Wraps an explicit amplitude vector; the length must be a power of two and the
    /// vector must be normalized to 1e-9.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::domain(format!(
                "amplitude length {len} is not 2^m, m >= 1"
            )));
        }
        let state = StateVector {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("state norm^2 = {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        pairwise_sum(&self.amps, |a| a.norm_sqr())
    }

    /// Memory footprint of a state with `num_qubits` qubits.
    pub fn bytes_for(num_qubits: usize) -> u64 {
        (std::mem::size_of::<Complex64>() as u64) << num_qubits
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: other.num_qubits,
            });
        }
        let mut acc = ZERO;
        for (a, b) in self.amps.iter().zip(&other.amps) {
            acc += a.conj() * b;
        }
        Ok(acc)
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        apply_ideal(&mut self.amps, gate);
        Ok(())
    }

    /// Applies `gate` through the noise model of [`NoiseSpec`]. With `epsilon == 0` this is
    /// exactly [`StateVector::apply`] and draws nothing from the stream.
    pub fn apply_noisy(&mut self, gate: &GateOp, noise: &mut NoiseSpec) -> Result<()> {
        gate.validate(self.num_qubits)?;
        if noise.epsilon == 0.0 {
            apply_ideal(&mut self.amps, gate);
            return Ok(());
        }
        let (jittered, etas) = noise.perturb(gate);
        apply_with_dephasing(&mut self.amps, &jittered, &etas);
        Ok(())
    }

    /// Multiplies every amplitude by exp(i phase); a no-op for phase 0.
    pub fn apply_global_phase(&mut self, phase: f64) {
        if phase != 0.0 {
            let f = Complex64::from_polar(1.0, phase);
            self.amps.iter_mut().for_each(|a| *a *= f);
        }
    }

    /// Applies Hadamards to every qubit of `register`, which must be in |0...0> on every
    /// branch of the state. Returns the number of gates applied.
    pub fn prepare_uniform(&mut self, register: &[usize]) -> Result<usize> {
        let mut mask = 0usize;
        for &q in register {
            if q >= self.num_qubits {
                return Err(Error::domain(format!("qubit {q} out of range")));
            }
            mask |= 1 << q;
        }
        if self
            .amps
            .iter()
            .enumerate()
            .any(|(i, a)| i & mask != 0 && a.norm_sqr() > 0.0)
        {
            return Err(Error::domain("register to prepare is not in |0...0>"));
        }
        for &q in register {
            self.apply(&GateOp::Hadamard(q))?;
        }
        Ok(register.len())
    }

    /// Probability distribution of the value of `register` (bit j of the value is
    /// `register[j]`), summed over all other qubits.
    pub fn register_distribution(&self, register: &[usize]) -> Result<Vec<f64>> {
        if let Some(&q) = register.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::domain(format!("qubit {q} out of range")));
        }
        let mut out = vec![0.0; 1usize << register.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p != 0.0 {
                out[gather_bits(i, register)] += p;
            }
        }
        Ok(out)
    }

    /// Marginal distribution of a named register.
    pub fn marginal_distribution(&self, layout: &RegisterLayout, name: &str) -> Result<Vec<f64>> {
        self.check_layout(layout)?;
        self.register_distribution(layout.register(name)?)
    }

    /// Joint distribution of several named registers; the combined value places the
    /// first register in the low bits.
    pub fn joint_distribution(&self, layout: &RegisterLayout, names: &[&str]) -> Result<Vec<f64>> {
        self.check_layout(layout)?;
        let mut qubits = Vec::new();
        for name in names {
            qubits.extend_from_slice(layout.register(name)?);
        }
        self.register_distribution(&qubits)
    }

    fn check_layout(&self, layout: &RegisterLayout) -> Result<()> {
        if layout.width() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: layout.width(),
            });
        }
        Ok(())
    }

    /// Draws `shots` i.i.d. outcomes from the Born distribution. Returns counts keyed by
    /// basis index.
    pub fn sample_measurement(
        &self,
        stream: &mut Stream,
        shots: u64,
    ) -> Result<BTreeMap<usize, u64>> {
        if shots == 0 {
            return Err(Error::domain("shots must be >= 1"));
        }
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u = stream.uniform() * acc;
            let mut k = cumulative.partition_point(|&c| c <= u);
            // Skip zero-probability tail entries produced by rounding.
            while k > 0 && (k >= cumulative.len() || self.amps[k].norm_sqr() == 0.0) {
                k -= 1;
            }
            *counts.entry(k).or_insert(0) += 1;
        }
        Ok(counts)
    }
}

/// |<a|b>|^2.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Pairwise (cascade) summation over fixed 1024-element leaves; the result depends only on
/// the data, never on scheduling.
pub(crate) fn pairwise_sum<T>(xs: &[T], f: impl Fn(&T) -> f64 + Copy) -> f64 {
    const LEAF: usize = 1024;
    if xs.len() <= LEAF {
        return xs.iter().map(f).sum();
    }
    let mid = (xs.len() / 2).next_multiple_of(LEAF).min(xs.len());
    pairwise_sum(&xs[..mid], f) + pairwise_sum(&xs[mid..], f)
}

pub(crate) fn gather_bits(index: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .fold(0, |v, (j, &q)| v | (((index >> q) & 1) << j))
}

/// Named, disjoint qubit registers covering `0..width`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    registers: Vec<(String, Vec<usize>)>,
    width: usize,
}

impl RegisterLayout {
    pub fn new(registers: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let width: usize = registers.iter().map(|(_, q)| q.len()).sum();
        let mut seen = vec![false; width];
        for (name, qubits) in &registers {
            for &q in qubits {
                if q >= width || seen[q] {
                    return Err(Error::domain(format!(
                        "register `{name}`: qubit {q} overlaps or leaves a gap in 0..{width}"
                    )));
                }
                seen[q] = true;
            }
        }
        let mut names: Vec<&str> = registers.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("duplicate register name"));
        }
        Ok(RegisterLayout { registers, width })
    }

    /// Consecutive registers of the given sizes, allocated from qubit 0 upwards.
    pub fn contiguous(spec: &[(&str, usize)]) -> Result<Self> {
        let mut next = 0;
        let registers = spec
            .iter()
            .map(|&(name, len)| {
                let qubits = (next..next + len).collect();
                next += len;
                (name.to_string(), qubits)
            })
            .collect();
        Self::new(registers)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn register(&self, name: &str) -> Result<&[usize]> {
        self.registers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, q)| q.as_slice())
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.registers.iter().map(|(n, _)| n.as_str())
    }

    /// Basis index with each listed register set to the given value (others zero).
    pub fn compose(&self, values: &[(&str, usize)]) -> Result<usize> {
        let mut index = 0;
        for &(name, value) in values {
            let qubits = self.register(name)?;
            if qubits.len() < usize::BITS as usize && value >> qubits.len() != 0 {
                return Err(Error::domain(format!(
                    "value {value} does not fit register `{name}`"
                )));
            }
            for (j, &q) in qubits.iter().enumerate() {
                index |= ((value >> j) & 1) << q;
            }
        }
        Ok(index)
    }

    pub fn value_of(&self, index: usize, name: &str) -> Result<usize> {
        Ok(gather_bits(index, self.register(name)?))
    }
}

/// One elementary operation of the simulated computer.
#[derive(Clone, Debug, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    /// The phase gate: |1> -> i|1>.
    Phase(usize),
    Cnot {
        control: usize,
        target: usize,
    },
    Toffoli {
        controls: [usize; 2],
        target: usize,
    },
    /// exp(i angle) on |11>.
    ControlledPhase {
        qubits: [usize; 2],
        angle: f64,
    },
    /// exp(i angle) on |1>.
    PhaseRotation {
        qubit: usize,
        angle: f64,
    },
    Swap(usize, usize),
    /// exp(i angle) when all 3 or 4 qubits are |1>.
    MultiControlledPhase {
        qubits: Vec<usize>,
        angle: f64,
    },
    /// Native diagonal: exp(i phases[v]) where v is the value of the register `qubits`
    /// (bit j of v is `qubits[j]`). Used for phases that have no polynomial form.
    Diagonal {
        qubits: Vec<usize>,
        phases: Arc<[f64]>,
    },
}

impl GateOp {
    pub fn controlled_phase(a: usize, b: usize, angle: f64) -> Self {
        GateOp::ControlledPhase {
            qubits: [a, b],
            angle: reduce_angle(angle),
        }
    }

    pub fn phase_rotation(qubit: usize, angle: f64) -> Self {
        GateOp::PhaseRotation {
            qubit,
            angle: reduce_angle(angle),
        }
    }

    pub fn multi_controlled_phase(qubits: Vec<usize>, angle: f64) -> Self {
        GateOp::MultiControlledPhase {
            qubits,
            angle: reduce_angle(angle),
        }
    }

    /// Short mnemonic, also used by the text serialization.
    pub fn kind(&self) -> &'static str {
        match self {
            GateOp::Hadamard(_) => "H",
            GateOp::Phase(_) => "S",
            GateOp::Cnot { .. } => "CNOT",
            GateOp::Toffoli { .. } => "TOFFOLI",
            GateOp::ControlledPhase { .. } => "CPHASE",
            GateOp::PhaseRotation { .. } => "RPHASE",
            GateOp::Swap(..) => "SWAP",
            GateOp::MultiControlledPhase { .. } => "MCPHASE",
            GateOp::Diagonal { .. } => "DIAG",
        }
    }

    /// Touched qubits, in the gate's canonical order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Hadamard(q) | GateOp::Phase(q) => vec![*q],
            GateOp::PhaseRotation { qubit, .. } => vec![*qubit],
            GateOp::Cnot { control, target } => vec![*control, *target],
            GateOp::Toffoli { controls, target } => vec![controls[0], controls[1], *target],
            GateOp::ControlledPhase { qubits, .. } => qubits.to_vec(),
            GateOp::Swap(a, b) => vec![*a, *b],
            GateOp::MultiControlledPhase { qubits, .. } | GateOp::Diagonal { qubits, .. } => {
                qubits.clone()
            }
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateOp::MultiControlledPhase { qubits, .. } | GateOp::Diagonal { qubits, .. } => {
                qubits.len()
            }
            GateOp::Hadamard(_) | GateOp::Phase(_) | GateOp::PhaseRotation { .. } => 1,
            GateOp::Toffoli { .. } => 3,
            _ => 2,
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            GateOp::ControlledPhase { angle, .. }
            | GateOp::PhaseRotation { angle, .. }
            | GateOp::MultiControlledPhase { angle, .. } => Some(*angle),
            _ => None,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(
            self,
            GateOp::Phase(_)
                | GateOp::ControlledPhase { .. }
                | GateOp::PhaseRotation { .. }
                | GateOp::MultiControlledPhase { .. }
                | GateOp::Diagonal { .. }
        )
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        let qubits = self.qubits();
        match self {
            GateOp::MultiControlledPhase { .. } if !(3..=4).contains(&qubits.len()) => {
                return Err(Error::domain(format!(
                    "multi-controlled phase needs 3 or 4 qubits, got {}",
                    qubits.len()
                )));
            }
            GateOp::Diagonal { phases, .. } => {
                if qubits.is_empty() || qubits.len() > 24 || phases.len() != 1 << qubits.len() {
                    return Err(Error::domain(format!(
                        "diagonal on {} qubits needs 2^{} phases, got {}",
                        qubits.len(),
                        qubits.len(),
                        phases.len()
                    )));
                }
            }
            _ => {}
        }
        for (i, &q) in qubits.iter().enumerate() {
            if q >= width {
                return Err(Error::domain(format!(
                    "{} targets qubit {q}, register width is {width}",
                    self.kind()
                )));
            }
            if qubits[..i].contains(&q) {
                return Err(Error::domain(format!("{} repeats qubit {q}", self.kind())));
            }
        }
        Ok(())
    }

    pub fn inverse(&self) -> GateOp {
        match self {
            GateOp::Phase(q) => GateOp::phase_rotation(*q, -FRAC_PI_2),
            GateOp::ControlledPhase { qubits, angle } => GateOp::ControlledPhase {
                qubits: *qubits,
                angle: reduce_angle(-angle),
            },
            GateOp::PhaseRotation { qubit, angle } => GateOp::PhaseRotation {
                qubit: *qubit,
                angle: reduce_angle(-angle),
            },
            GateOp::MultiControlledPhase { qubits, angle } => GateOp::MultiControlledPhase {
                qubits: qubits.clone(),
                angle: reduce_angle(-angle),
            },
            GateOp::Diagonal { qubits, phases } => GateOp::Diagonal {
                qubits: qubits.clone(),
                phases: phases.iter().map(|p| -p).collect(),
            },
            _ => self.clone(),
        }
    }

    /// Same gate with its (single) angle parameter shifted by `delta`.
    fn with_angle_shift(&self, delta: f64) -> GateOp {
        match self {
            GateOp::ControlledPhase { qubits, angle } => GateOp::ControlledPhase {
                qubits: *qubits,
                angle: angle + delta,
            },
            GateOp::PhaseRotation { qubit, angle } => GateOp::PhaseRotation {
                qubit: *qubit,
                angle: angle + delta,
            },
            GateOp::MultiControlledPhase { qubits, angle } => GateOp::MultiControlledPhase {
                qubits: qubits.clone(),
                angle: angle + delta,
            },
            _ => self.clone(),
        }
    }

    /// The gate's unitary on its own qubits as a row-major 2^k x 2^k matrix, with local
    /// pattern bit j corresponding to `self.qubits()[j]`.
    pub fn local_matrix(&self) -> Vec<Complex64> {
        let k = self.arity();
        let d = 1usize << k;
        let mut m = vec![ZERO; d * d];
        match self {
            GateOp::Hadamard(_) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                m.copy_from_slice(&[h, h, h, -h]);
            }
            _ if self.is_diagonal() => {
                for (p, phase) in diagonal_table(self).into_iter().enumerate() {
                    m[p * d + p] = phase;
                }
            }
            _ => {
                for p in 0..d {
                    m[permute_pattern(self, p) * d + p] = ONE;
                }
            }
        }
        m
    }
}

/// Pattern image under a permutation gate (CNOT, Toffoli, Swap), local bit order.
fn permute_pattern(gate: &GateOp, p: usize) -> usize {
    match gate {
        GateOp::Cnot { .. } if p & 1 == 1 => p ^ 0b10,
        GateOp::Toffoli { .. } if p & 0b11 == 0b11 => p ^ 0b100,
        GateOp::Swap(..) if p == 0b01 || p == 0b10 => p ^ 0b11,
        _ => p,
    }
}

/// Transpositions of local patterns implementing a permutation gate.
fn transpositions(gate: &GateOp) -> &'static [(usize, usize)] {
    match gate {
        GateOp::Cnot { .. } => &[(0b01, 0b11)],
        GateOp::Toffoli { .. } => &[(0b011, 0b111)],
        GateOp::Swap(..) => &[(0b01, 0b10)],
        _ => &[],
    }
}

/// Phase per local pattern of a diagonal gate.
fn diagonal_table(gate: &GateOp) -> Vec<Complex64> {
    let k = gate.arity();
    let d = 1usize << k;
    let full = d - 1;
    let mut t = vec![ONE; d];
    match gate {
        GateOp::Phase(_) => t[1] = Complex64::new(0.0, 1.0),
        GateOp::PhaseRotation { angle, .. }
        | GateOp::ControlledPhase { angle, .. }
        | GateOp::MultiControlledPhase { angle, .. } => {
            t[full] = Complex64::from_polar(1.0, *angle)
        }
        GateOp::Diagonal { phases, .. } => {
            for (slot, &phi) in t.iter_mut().zip(phases.iter()) {
                *slot = Complex64::from_polar(1.0, phi);
            }
        }
        _ => unreachable!("not a diagonal gate"),
    }
    t
}

/// Index bookkeeping for a k-local operation: `offsets[p]` is the amplitude offset of local
/// pattern `p`, and bases enumerate indices whose touched bits are all zero.
struct Local {
    offsets: Vec<usize>,
    sorted: Vec<usize>,
}

impl Local {
    fn new(qubits: &[usize]) -> Self {
        let d = 1usize << qubits.len();
        let offsets = (0..d)
            .map(|p| {
                qubits
                    .iter()
                    .enumerate()
                    .fold(0, |o, (j, &q)| o | (((p >> j) & 1) << q))
            })
            .collect();
        let mut sorted = qubits.to_vec();
        sorted.sort_unstable();
        Local { offsets, sorted }
    }

    fn for_each_base(&self, dim: usize, mut f: impl FnMut(usize)) {
        let count = dim >> self.sorted.len();
        for r in 0..count {
            let mut b = r;
            for &q in &self.sorted {
                b = ((b >> q) << (q + 1)) | (b & ((1 << q) - 1));
            }
            f(b);
        }
    }
}

fn apply_ideal(amps: &mut [Complex64], gate: &GateOp) {
    let dim = amps.len();
    match gate {
        GateOp::Hadamard(q) => {
            let step = 1usize << q;
            let s = FRAC_1_SQRT_2;
            for block in (0..dim).step_by(step << 1) {
                for i in block..block + step {
                    let (a, b) = (amps[i], amps[i + step]);
                    amps[i] = (a + b) * s;
                    amps[i + step] = (a - b) * s;
                }
            }
        }
        g if g.is_diagonal() => {
            let qubits = g.qubits();
            let local = Local::new(&qubits);
            let table = diagonal_table(g);
            let active: Vec<(usize, Complex64)> = table
                .iter()
                .enumerate()
                .filter(|(_, &t)| t != ONE)
                .map(|(p, &t)| (local.offsets[p], t))
                .collect();
            if active.is_empty() {
                return;
            }
            local.for_each_base(dim, |b| {
                for &(off, t) in &active {
                    amps[b + off] *= t;
                }
            });
        }
        g => {
            let local = Local::new(&g.qubits());
            let swaps: Vec<(usize, usize)> = transpositions(g)
                .iter()
                .map(|&(p, q)| (local.offsets[p], local.offsets[q]))
                .collect();
            local.for_each_base(dim, |b| {
                for &(x, y) in &swaps {
                    amps.swap(b + x, b + y);
                }
            });
        }
    }
}

/// Applies `gate` and then exp(-i eta_j sigma_z / 2) on each touched qubit j, fused into one
/// pass over each local block.
fn apply_with_dephasing(amps: &mut [Complex64], gate: &GateOp, etas: &[f64]) {
    let dim = amps.len();
    let qubits = gate.qubits();
    let local = Local::new(&qubits);
    let d = local.offsets.len();
    // exp(-i eta sigma_z / 2): |0> -> exp(-i eta/2), |1> -> exp(+i eta/2).
    let mut noise = vec![ONE; d];
    for (p, slot) in noise.iter_mut().enumerate() {
        let phase: f64 = etas
            .iter()
            .enumerate()
            .map(|(j, eta)| {
                if (p >> j) & 1 == 1 {
                    0.5 * eta
                } else {
                    -0.5 * eta
                }
            })
            .sum();
        *slot = Complex64::from_polar(1.0, phase);
    }
    let offsets = &local.offsets;
    match gate {
        GateOp::Hadamard(_) => {
            let s = FRAC_1_SQRT_2;
            let (o0, o1) = (offsets[0], offsets[1]);
            let (n0, n1) = (noise[0] * s, noise[1] * s);
            local.for_each_base(dim, |b| {
                let (a, c) = (amps[b + o0], amps[b + o1]);
                amps[b + o0] = (a + c) * n0;
                amps[b + o1] = (a - c) * n1;
            });
        }
        g if g.is_diagonal() => {
            let table: Vec<Complex64> = diagonal_table(g)
                .iter()
                .zip(&noise)
                .map(|(t, n)| t * n)
                .collect();
            local.for_each_base(dim, |b| {
                for (off, t) in offsets.iter().zip(&table) {
                    amps[b + off] *= t;
                }
            });
        }
        g => {
            let swaps = transpositions(g);
            local.for_each_base(dim, |b| {
                for &(x, y) in swaps {
                    amps.swap(b + offsets[x], b + offsets[y]);
                }
                for (off, n) in offsets.iter().zip(&noise) {
                    amps[b + off] *= n;
                }
            });
        }
    }
}

/// Unitary gate-error model.
///
/// Each noisy gate has every angle parameter shifted by an independent draw eta, and is
/// then followed by exp(-i eta_q sigma_z / 2) on every qubit q it touches. All etas are
/// uniform in [-epsilon, epsilon), drawn from `stream` in this order: the angle jitter
/// (if the gate has an angle), then one eta per touched qubit in the gate's qubit order.
#[derive(Clone, Debug)]
pub struct NoiseSpec {
    epsilon: f64,
    seed: u64,
    stream: Stream,
}

impl NoiseSpec {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::domain(format!(
                "noise amplitude {epsilon} must be >= 0"
            )));
        }
        Ok(NoiseSpec {
            epsilon,
            seed,
            stream: Stream::new(seed),
        })
    }

    /// Noise on its own sub-stream of `seed`, for independent runs sharing one seed.
    pub fn with_substream(epsilon: f64, seed: u64, id: u64) -> Result<Self> {
        let mut spec = Self::new(epsilon, seed)?;
        spec.stream = Stream::substream(seed, id);
        Ok(spec)
    }

    pub fn ideal() -> Self {
        NoiseSpec {
            epsilon: 0.0,
            seed: 0,
            stream: Stream::new(0),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws the perturbation for one application of `gate`: the jittered gate and the
    /// dephasing angles of its touched qubits.
    pub fn perturb(&mut self, gate: &GateOp) -> (GateOp, Vec<f64>) {
        let jittered = match gate.angle() {
            Some(_) => gate.with_angle_shift(self.stream.symmetric(self.epsilon)),
            None => gate.clone(),
        };
        let etas = (0..gate.arity())
            .map(|_| self.stream.symmetric(self.epsilon))
            .collect();
        (jittered, etas)
    }
}

/// Dense matrix of the perturbed gate `(jittered, etas)` on its local qubits; used to check
/// unitarity of the noise model.
pub fn perturbed_local_matrix(jittered: &GateOp, etas: &[f64]) -> Vec<Complex64> {
    let k = jittered.arity();
    let d = 1usize << k;
    let mut m = jittered.local_matrix();
    for p in 0..d {
        let phase: f64 = etas
            .iter()
            .enumerate()
            .map(|(j, eta)| {
                if (p >> j) & 1 == 1 {
                    0.5 * eta
                } else {
                    -0.5 * eta
                }
            })
            .sum();
        let n = Complex64::from_polar(1.0, phase);
        for c in 0..d {
            m[p * d + c] *= n;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(m: usize, seed: u64) -> StateVector {
        let mut s = Stream::new(seed);
        let mut amps: Vec<Complex64> = (0..1 << m).map(|_| c(s.normal(), s.normal())).collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn random_gate(m: usize, s: &mut Stream) -> GateOp {
        let mut pick = |k: usize| -> Vec<usize> {
            let mut qs = Vec::new();
            while qs.len() < k {
                let q = s.below(m as u64) as usize;
                if !qs.contains(&q) {
                    qs.push(q);
                }
            }
            qs
        };
        let kind = pick(1)[0] % 8;
        let angle = 1.234 * (kind as f64 + 1.0);
        match kind {
            0 => GateOp::Hadamard(pick(1)[0]),
            1 => GateOp::Phase(pick(1)[0]),
            2 => {
                let q = pick(2);
                GateOp::Cnot {
                    control: q[0],
                    target: q[1],
                }
            }
            3 => {
                let q = pick(3);
                GateOp::Toffoli {
                    controls: [q[0], q[1]],
                    target: q[2],
                }
            }
            4 => {
                let q = pick(2);
                GateOp::controlled_phase(q[0], q[1], angle)
            }
            5 => GateOp::phase_rotation(pick(1)[0], angle),
            6 => {
                let q = pick(2);
                GateOp::Swap(q[0], q[1])
            }
            _ => GateOp::multi_controlled_phase(pick(3), angle),
        }
    }

    #[test]
    fn basis_states() {
        let s = StateVector::new_basis_state(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = StateVector::new_basis_state(2, 3).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ZERO, ZERO, ONE]);
        let s = StateVector::new_basis_state(20, 0).unwrap();
        assert_eq!(s.dim(), 1 << 20);
        assert_eq!(s.norm_sqr(), 1.0);
        assert!(matches!(
            StateVector::new_basis_state(2, 4),
            Err(Error::Domain(_))
        ));
        assert!(StateVector::new_basis_state(0, 0).is_err());
    }

    #[test]
    fn elementary_gate_truth_tables() {
        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        s.apply(&GateOp::Hadamard(0)).unwrap();
        assert!((s.amplitude(0) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((s.amplitude(1) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);

        let mut s = StateVector::new_basis_state(1, 1).unwrap();
        s.apply(&GateOp::Phase(0)).unwrap();
        assert_eq!(s.amplitude(1), c(0.0, 1.0));

        // |10> with the first (control) qubit set: control = qubit 1, target = qubit 0.
        let mut s = StateVector::new_basis_state(2, 0b10).unwrap();
        s.apply(&GateOp::Cnot {
            control: 1,
            target: 0,
        })
        .unwrap();
        assert_eq!(s.amplitude(0b11), ONE);

        let mut s = StateVector::new_basis_state(3, 0b110).unwrap();
        s.apply(&GateOp::Toffoli {
            controls: [2, 1],
            target: 0,
        })
        .unwrap();
        assert_eq!(s.amplitude(0b111), ONE);

        let mut s = StateVector::new_basis_state(3, 0b001).unwrap();
        s.apply(&GateOp::Swap(0, 2)).unwrap();
        assert_eq!(s.amplitude(0b100), ONE);
    }

    #[test]
    fn invalid_targets_rejected() {
        let mut s = StateVector::new_basis_state(2, 0).unwrap();
        assert!(s.apply(&GateOp::Hadamard(2)).is_err());
        assert!(s
            .apply(&GateOp::Cnot {
                control: 1,
                target: 1
            })
            .is_err());
        assert!(s
            .apply(&GateOp::multi_controlled_phase(vec![0, 1], 0.3))
            .is_err());
        let bad = GateOp::Diagonal {
            qubits: vec![0, 1],
            phases: vec![0.0; 3].into(),
        };
        assert!(s.apply(&bad).is_err());
    }

    #[test]
    fn angles_are_reduced() {
        let g = GateOp::phase_rotation(0, 3.0 * PI);
        assert!((g.angle().unwrap() - PI).abs() < 1e-12);
        let g = GateOp::controlled_phase(0, 1, -PI);
        assert!((g.angle().unwrap() - PI).abs() < 1e-12);
        for a in [-7.0, -PI, 0.0, 1.0, PI, 10.0] {
            let r = reduce_angle(a);
            assert!(r > -PI && r <= PI);
            assert!(((a - r) / TAU - ((a - r) / TAU).round()).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_match_local_matrices() {
        let mut s = Stream::new(3);
        for trial in 0..200 {
            let m = 4;
            let gate = random_gate(m, &mut s);
            let psi = random_state(m, trial);
            let mut fast = psi.clone();
            fast.apply(&gate).unwrap();
            let expected = apply_local_dense(&psi, &gate.qubits(), &gate.local_matrix());
            for (a, b) in fast.amplitudes().iter().zip(&expected) {
                assert!((a - b).norm() < 1e-13, "{gate:?}");
            }
        }
    }

    fn apply_local_dense(psi: &StateVector, qubits: &[usize], m: &[Complex64]) -> Vec<Complex64> {
        let d = 1 << qubits.len();
        let mask: usize = qubits.iter().map(|q| 1 << q).sum();
        let mut out = vec![ZERO; psi.dim()];
        for (i, slot) in out.iter_mut().enumerate() {
            let p = gather_bits(i, qubits);
            for q in 0..d {
                let mut j = i & !mask;
                for (bit, &qb) in qubits.iter().enumerate() {
                    j |= ((q >> bit) & 1) << qb;
                }
                *slot += m[p * d + q] * psi.amplitude(j);
            }
        }
        out
    }

    #[test]
    fn zero_noise_is_bit_identical() {
        let mut s = Stream::new(9);
        let mut noise = NoiseSpec::new(0.0, 5).unwrap();
        let mut a = random_state(5, 1);
        let mut b = a.clone();
        for _ in 0..500 {
            let g = random_gate(5, &mut s);
            a.apply(&g).unwrap();
            b.apply_noisy(&g, &mut noise).unwrap();
        }
        assert!(a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| x == y));
    }

    #[test]
    fn noisy_runs_are_reproducible() {
        let run = || {
            let mut s = Stream::new(11);
            let mut noise = NoiseSpec::new(0.01, 77).unwrap();
            let mut psi = random_state(6, 2);
            for _ in 0..300 {
                psi.apply_noisy(&random_gate(6, &mut s), &mut noise)
                    .unwrap();
            }
            psi
        };
        let (a, b) = (run(), run());
        assert!(a
            .amplitudes()
            .iter()
            .zip(b.amplitudes())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
    }

    #[test]
    fn noisy_kernel_matches_perturbed_matrix_and_is_unitary() {
        let mut s = Stream::new(21);
        for trial in 0..200 {
            let gate = random_gate(4, &mut s);
            let psi = random_state(4, 1000 + trial);
            let mut noise = NoiseSpec::new(0.3, trial).unwrap();
            let mut probe = noise.clone();
            let (jittered, etas) = probe.perturb(&gate);
            let m = perturbed_local_matrix(&jittered, &etas);
            let d = 1 << gate.arity();
            for r in 0..d {
                for c2 in 0..d {
                    let dot: Complex64 = (0..d).map(|k| m[k * d + r].conj() * m[k * d + c2]).sum();
                    let want = if r == c2 { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-12);
                }
            }
            let mut noisy = psi.clone();
            noisy.apply_noisy(&gate, &mut noise).unwrap();
            let expected = apply_local_dense(&psi, &gate.qubits(), &m);
            for (a, b) in noisy.amplitudes().iter().zip(&expected) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn per_gate_fidelity_loss_is_order_epsilon_squared() {
        // Operator-norm bound: each dephasing factor moves by at most eps/2 and an angle
        // jitter by at most eps, so 1 - F <= (k eps / 2 + eps)^2 <= 6.25 eps^2 for k <= 3.
        let eps = 0.01;
        let mut s = Stream::new(5);
        let mut noise = NoiseSpec::new(eps, 6).unwrap();
        let mut total = 0.0;
        let trials = 10_000;
        for t in 0..trials {
            let gate = random_gate(4, &mut s);
            let psi = random_state(4, 50_000 + t);
            let mut ideal = psi.clone();
            ideal.apply(&gate).unwrap();
            let mut noisy = psi;
            noisy.apply_noisy(&gate, &mut noise).unwrap();
            let loss = 1.0 - fidelity(&ideal, &noisy).unwrap();
            assert!(loss <= 6.25 * eps * eps, "loss {loss}");
            total += loss;
        }
        let c_mean = total / trials as f64 / (eps * eps);
        // Measured mean constant: about 0.11 for the 4-qubit random gate mix.
        assert!(c_mean > 0.02 && c_mean < 0.5, "mean constant {c_mean}");
    }

    #[test]
    fn involutions() {
        let psi = random_state(5, 4);
        for g in [
            GateOp::Hadamard(3),
            GateOp::Cnot {
                control: 4,
                target: 0,
            },
            GateOp::Toffoli {
                controls: [1, 3],
                target: 2,
            },
            GateOp::Swap(0, 4),
        ] {
            let mut phi = psi.clone();
            phi.apply(&g).unwrap();
            phi.apply(&g).unwrap();
            assert!(fidelity(&psi, &phi).unwrap() >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn norm_preserved_over_long_random_circuits() {
        let mut s = Stream::new(8);
        let mut noise = NoiseSpec::new(0.02, 3).unwrap();
        let mut ideal = random_state(8, 9);
        let mut noisy = ideal.clone();
        for _ in 0..10_000 {
            let g = random_gate(8, &mut s);
            ideal.apply(&g).unwrap();
            noisy.apply_noisy(&g, &mut noise).unwrap();
        }
        assert!((ideal.norm_sqr() - 1.0).abs() < 1e-9);
        assert!((noisy.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prepare_uniform_register() {
        let mut s = StateVector::new_basis_state(1, 0).unwrap();
        assert_eq!(s.prepare_uniform(&[0]).unwrap(), 1);
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a.re - FRAC_1_SQRT_2).abs() < 1e-15));

        let mut s = StateVector::new_basis_state(3, 0).unwrap();
        assert_eq!(s.prepare_uniform(&[0, 1, 2]).unwrap(), 3);
        let want = 1.0 / (2.0 * 2f64.sqrt());
        assert!(s
            .amplitudes()
            .iter()
            .all(|a| (a.re - want).abs() < 1e-15 && a.im == 0.0));

        let mut s = StateVector::new_basis_state(2, 0b01).unwrap();
        assert!(s.prepare_uniform(&[0]).is_err());
        assert_eq!(s.prepare_uniform(&[1]).unwrap(), 1);
    }

    #[test]
    fn fidelity_cases() {
        let psi = random_state(3, 1);
        assert!((fidelity(&psi, &psi).unwrap() - 1.0).abs() < 1e-14);
        let a = StateVector::new_basis_state(2, 1).unwrap();
        let b = StateVector::new_basis_state(2, 2).unwrap();
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let zero = StateVector::new_basis_state(1, 0).unwrap();
        let mut plus = zero.clone();
        plus.apply(&GateOp::Hadamard(0)).unwrap();
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        let other = StateVector::new_basis_state(3, 0).unwrap();
        assert!(matches!(
            fidelity(&zero, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn marginals() {
        let layout = RegisterLayout::contiguous(&[("x", 2), ("y", 3)]).unwrap();
        let idx = layout.compose(&[("x", 2), ("y", 5)]).unwrap();
        let s = StateVector::new_basis_state(5, idx).unwrap();
        let px = s.marginal_distribution(&layout, "x").unwrap();
        assert_eq!(px, vec![0.0, 0.0, 1.0, 0.0]);
        let py = s.marginal_distribution(&layout, "y").unwrap();
        assert_eq!(py[5], 1.0);
        assert!(matches!(
            s.marginal_distribution(&layout, "z"),
            Err(Error::UnknownRegister(_))
        ));

        let mut u = StateVector::new_basis_state(5, 0).unwrap();
        u.prepare_uniform(&[0, 1, 2, 3, 4]).unwrap();
        for name in ["x", "y"] {
            let p = u.marginal_distribution(&layout, name).unwrap();
            let want = 1.0 / p.len() as f64;
            assert!(p.iter().all(|v| (v - want).abs() < 1e-12));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn layout_validation() {
        assert!(
            RegisterLayout::new(vec![("a".into(), vec![0, 1]), ("b".into(), vec![1])]).is_err()
        );
        assert!(RegisterLayout::new(vec![("a".into(), vec![0, 2])]).is_err());
        assert!(RegisterLayout::new(vec![("a".into(), vec![0]), ("a".into(), vec![1])]).is_err());
        let l = RegisterLayout::new(vec![("a".into(), vec![1]), ("b".into(), vec![0])]).unwrap();
        assert_eq!(l.width(), 2);
        assert_eq!(l.value_of(0b10, "a").unwrap(), 1);
    }

    #[test]
    fn sampling() {
        let mut stream = Stream::new(1);
        let s = StateVector::new_basis_state(3, 5).unwrap();
        let counts = s.sample_measurement(&mut stream, 1000).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[&5], 1000);
        assert!(s.sample_measurement(&mut stream, 0).is_err());

        let mut u = StateVector::new_basis_state(2, 0).unwrap();
        u.prepare_uniform(&[0, 1]).unwrap();
        let shots = 100_000;
        let counts = u.sample_measurement(&mut Stream::new(2), shots).unwrap();
        for k in 0..4 {
            let f = counts[&k] as f64 / shots as f64;
            assert!((f - 0.25).abs() < 0.01, "outcome {k}: {f}");
        }
        let again = u.sample_measurement(&mut Stream::new(2), shots).unwrap();
        assert_eq!(counts, again);
    }
}
