//! Circuits and observables for the simulated maps: the Arnold cat map on a discretized
//! torus and the kicked rotator with cosine or double-well potential.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;

use crate::circuit::{
    build_diagonal_phase, build_diagonal_phase_encoded, build_modular_adder, build_qft, Encoding,
};
use crate::classical::{evolve_cat_exact, torus_second_moment, Direction, LatticeMask};
use crate::dense::Matrix;
use crate::state::{GateOp, NoiseSpec, RegisterLayout, StateVector};
use crate::{Circuit, Error, Result};

/// Default memory cap for a single statevector.
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

/// Fails with a resource error if a `qubits`-qubit state exceeds `cap` bytes.
pub fn check_memory(qubits: usize, cap: u64) -> Result<()> {
    let needed = if qubits >= 60 {
        u64::MAX
    } else {
        StateVector::bytes_for(qubits)
    };
    if needed > cap || qubits > crate::state::MAX_QUBITS {
        return Err(Error::Resource {
            what: format!("{qubits}-qubit statevector"),
            needed,
            cap,
        });
    }
    Ok(())
}

/// 3n + 2 log2(L) - 1: x (n), y (n + log2 L) and carry (n + log2 L - 1) registers.
pub fn qubits_required(n: usize, l: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if l == 0 || !l.is_power_of_two() {
        return Err(Error::domain(format!(
            "torus height L = {l} is not a power of two"
        )));
    }
    Ok(3 * n + 2 * l.trailing_zeros() as usize - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatMapSpec {
    n: usize,
    l: usize,
    layout: RegisterLayout,
}

impl CatMapSpec {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        let total = qubits_required(n, l)?;
        let b = l.trailing_zeros() as usize;
        let layout =
            RegisterLayout::contiguous(&[("x", n), ("y", n + b), ("carry", total - 2 * n - b)])?;
        Ok(CatMapSpec { n, l, layout })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> usize {
        self.layout.width()
    }

    fn reg(&self, name: &str) -> &[usize] {
        self.layout
            .register(name)
            .expect("cat-map layout registers exist")
    }
}

/// Equal superposition over the mask cells with the carry register in |0>.
pub fn prepare_cat_initial(
    spec: &CatMapSpec,
    mask: &LatticeMask,
    memory_cap: u64,
) -> Result<StateVector> {
    if mask.n() != spec.n || mask.l() != spec.l {
        return Err(Error::domain(
            "mask lattice does not match the cat-map spec",
        ));
    }
    let k = mask.count();
    if k == 0 {
        return Err(Error::domain("empty initial mask"));
    }
    check_memory(spec.num_qubits(), memory_cap)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << spec.num_qubits()];
    let a = Complex64::new(1.0 / (k as f64).sqrt(), 0.0);
    for (i, j) in mask.iter() {
        amps[spec.layout.compose(&[("x", i), ("y", j)])?] = a;
    }
    StateVector::from_amplitudes(amps)
}

/// y <- y + x (mod L 2^n), then x <- x + y (mod 2^n).
pub fn build_cat_step(spec: &CatMapSpec) -> Result<Circuit> {
    let (x, y, carry) = (spec.reg("x"), spec.reg("y"), spec.reg("carry"));
    let mut c = build_modular_adder(x, y, carry, y.len())?;
    c.append(&build_modular_adder(&y[..spec.n], x, carry, spec.n)?);
    c.with_width(spec.num_qubits())
}

/// Probabilities over the 2^n x (L 2^n) lattice, index i + j * width.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDistribution {
    pub n: usize,
    pub l: usize,
    pub probs: Vec<f64>,
}

impl LatticeDistribution {
    pub fn from_state(state: &StateVector, spec: &CatMapSpec) -> Result<Self> {
        let probs = state.joint_distribution(&spec.layout, &["x", "y"])?;
        Ok(LatticeDistribution {
            n: spec.n,
            l: spec.l,
            probs,
        })
    }

    pub fn width(&self) -> usize {
        1 << self.n
    }

    pub fn height(&self) -> usize {
        self.l << self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i + j * self.width()]
    }

    /// Probability mass on the cells of `mask`.
    pub fn overlap(&self, mask: &LatticeMask) -> f64 {
        mask.iter().map(|(i, j)| self.get(i, j)).sum()
    }

    /// Distribution of the y index, summed over x.
    pub fn y_marginal(&self) -> Vec<f64> {
        self.probs
            .chunks(self.width())
            .map(|row| row.iter().sum())
            .collect()
    }
}

/// ⟨y^2⟩ in torus units, y = j / 2^n, about the circular mean of the distribution with
/// minimal-image displacements on the circle of length L.
pub fn second_moment(dist: &LatticeDistribution) -> f64 {
    let scale = 1.0 / dist.width() as f64;
    let ys: Vec<f64> = (0..dist.height()).map(|j| j as f64 * scale).collect();
    torus_second_moment(&ys, Some(&dist.y_marginal()), dist.l as f64)
}

/// Per-step record of [`run_cat_experiment`].
#[derive(Clone, Debug, PartialEq)]
pub struct CatStepRecord {
    pub t: usize,
    /// |<ideal|noisy>|^2 with the noise-free evolution at the same time.
    pub fidelity: f64,
    /// Probability mass on the initial mask.
    pub overlap: f64,
    pub second_moment: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatRun {
    pub records: Vec<CatStepRecord>,
    /// Distributions at the requested snapshot times, in increasing t.
    pub snapshots: Vec<(usize, LatticeDistribution)>,
    pub step_gates: usize,
}

/// `t_forward` noisy cat steps followed by `t_reverse` noisy inverse steps. The noise-free
/// state at every time is the uniform superposition over the exact image of the mask,
/// which gives the fidelity without a second statevector.
pub fn run_cat_experiment(
    spec: &CatMapSpec,
    mask: &LatticeMask,
    t_forward: usize,
    t_reverse: usize,
    noise: &mut NoiseSpec,
    snapshots: &[usize],
    memory_cap: u64,
) -> Result<CatRun> {
    let step = build_cat_step(spec)?;
    let back = step.inverse();
    let mut state = prepare_cat_initial(spec, mask, memory_cap)?;
    let mut image = mask.clone();
    let mut records = Vec::with_capacity(t_forward + t_reverse + 1);
    let mut shots = Vec::new();
    let amp = 1.0 / (mask.count() as f64).sqrt();
    for t in 0..=t_forward + t_reverse {
        if t > 0 {
            let (circuit, dir) = if t <= t_forward {
                (&step, Direction::Forward)
            } else {
                (&back, Direction::Inverse)
            };
            circuit.apply_noisy_to(&mut state, noise)?;
            image = evolve_cat_exact(&image, 1, dir);
        }
        let mut inner = Complex64::new(0.0, 0.0);
        for (i, j) in image.iter() {
            inner += state.amplitude(spec.layout.compose(&[("x", i), ("y", j)])?) * amp;
        }
        let dist = LatticeDistribution::from_state(&state, spec)?;
        records.push(CatStepRecord {
            t,
            fidelity: inner.norm_sqr(),
            overlap: dist.overlap(mask),
            second_moment: second_moment(&dist),
        });
        if snapshots.contains(&t) {
            shots.push((t, dist));
        }
    }
    Ok(CatRun {
        records,
        snapshots: shots,
        step_gates: step.len(),
    })
}

/// Applies the QFT to `register`, reads its marginal distribution and, if `restore`,
/// undoes the transform.
pub fn spectral_readout(
    state: &mut StateVector,
    register: &[usize],
    restore: bool,
) -> Result<Vec<f64>> {
    let qft = build_qft(register, false, true)?;
    qft.apply_to(state)?;
    let out = state.register_distribution(register)?;
    if restore {
        qft.inverse().apply_to(state)?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    Cosine,
    /// V(theta) = (theta^2 - a^2)^2.
    DoubleWell {
        a: f64,
    },
}

impl Potential {
    pub fn value(self, theta: f64) -> f64 {
        match self {
            Potential::Cosine => theta.cos(),
            Potential::DoubleWell { a } => (theta * theta - a * a).powi(2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KickedMapSpec {
    pub n_sys: usize,
    pub k: f64,
    pub hbar: f64,
    pub potential: Potential,
    /// Extra idle qubits above the system register.
    pub ancillas: usize,
}

impl KickedMapSpec {
    pub fn new(n_sys: usize, k: f64, hbar: f64, potential: Potential) -> Result<Self> {
        let spec = KickedMapSpec {
            n_sys,
            k,
            hbar,
            potential,
            ancillas: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_ancillas(mut self, ancillas: usize) -> Self {
        self.ancillas = ancillas;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_sys == 0 || self.n_sys > 24 {
            return Err(Error::domain(format!(
                "n_sys = {} outside 1..=24",
                self.n_sys
            )));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) || !self.k.is_finite() {
            return Err(Error::domain("hbar must be positive and K finite"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        1 << self.n_sys
    }

    pub fn num_qubits(&self) -> usize {
        self.n_sys + self.ancillas
    }

    pub fn system(&self) -> Vec<usize> {
        (0..self.n_sys).collect()
    }

    /// theta_k = -pi + 2 pi k / N.
    pub fn theta(&self, k: usize) -> f64 {
        -PI + TAU * k as f64 / self.levels() as f64
    }

    /// Signed momentum of register value m (two's complement).
    pub fn momentum(&self, m: usize) -> i64 {
        Encoding::Signed.value(m, self.n_sys)
    }

    /// Kick phase -K V(theta_k) / hbar.
    pub fn kick_phase(&self, k: usize) -> f64 {
        -self.k * self.potential.value(self.theta(k)) / self.hbar
    }
}

/// Coefficients of p(alpha + beta x).
fn compose_affine(p: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len().max(1)];
    // Horner: out = out * (alpha + beta x) + c.
    for &c in p.iter().rev() {
        let mut next = vec![0.0; out.len()];
        for (d, &o) in out.iter().enumerate() {
            next[d] += alpha * o;
            if d + 1 < next.len() {
                next[d + 1] += beta * o;
            }
        }
        next[0] += c;
        out = next;
    }
    out
}

/// One Floquet period: kick exp(-i K V(theta) / hbar) in the theta basis, inverse QFT to
/// momentum, free rotation exp(-i hbar l^2 / 2) with signed l, QFT back. The double-well
/// kick is an exact quartic phase circuit; the cosine kick is a native diagonal.
pub fn build_kicked_step(spec: &KickedMapSpec) -> Result<Circuit> {
    spec.validate()?;
    let reg = spec.system();
    let n = spec.levels() as f64;
    let mut c = Circuit::new(spec.num_qubits());
    if spec.k != 0.0 {
        match spec.potential {
            Potential::DoubleWell { a } => {
                let v = [a.powi(4), 0.0, -2.0 * a * a, 0.0, 1.0];
                let scaled: Vec<f64> = v.iter().map(|c| -spec.k * c / spec.hbar).collect();
                let poly = compose_affine(&scaled, -PI, TAU / n);
                c.append(&build_diagonal_phase(&reg, &poly)?);
            }
            Potential::Cosine => {
                let phases: Arc<[f64]> = (0..spec.levels()).map(|k| spec.kick_phase(k)).collect();
                c.push(GateOp::Diagonal {
                    qubits: reg.clone(),
                    phases,
                })?;
            }
        }
    }
    let qft = build_qft(&reg, false, true)?;
    c.append(&qft.inverse());
    c.append(&build_diagonal_phase_encoded(
        &reg,
        &[0.0, 0.0, -spec.hbar / 2.0],
        Encoding::Signed,
    )?);
    c.append(&qft);
    Ok(c)
}

/// The Floquet operator built directly: U_kk' = (1/N) sum_m exp(2 pi i m (k - k') / N)
/// exp(-i hbar l(m)^2 / 2) exp(-i K V(theta_k') / hbar).
pub fn floquet_matrix(spec: &KickedMapSpec) -> Result<Matrix> {
    spec.validate()?;
    if spec.n_sys > 10 {
        return Err(Error::Resource {
            what: "Floquet matrix".into(),
            needed: 16 << (2 * spec.n_sys),
            cap: 16 << 20,
        });
    }
    let n = spec.levels();
    let rot: Vec<Complex64> = (0..n)
        .map(|m| {
            let l = spec.momentum(m) as f64;
            Complex64::from_polar(1.0, -spec.hbar * l * l / 2.0)
        })
        .collect();
    let kick: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, spec.kick_phase(k)))
        .collect();
    Ok(Matrix::from_fn(n, |k, kp| {
        let d = (k + n - kp) % n;
        let s: Complex64 = (0..n)
            .map(|m| rot[m] * Complex64::from_polar(1.0, TAU * ((m * d) % n) as f64 / n as f64))
            .sum();
        s * kick[kp] / n as f64
    }))
}

/// Probability on theta < 0 and theta >= 0.
pub fn well_populations(state: &StateVector, spec: &KickedMapSpec) -> Result<(f64, f64)> {
    let p = state.register_distribution(&spec.system())?;
    let half = spec.levels() / 2;
    let left: f64 = p[..half].iter().sum();
    let right: f64 = p[half..].iter().sum();
    Ok((left, right))
}

/// Gaussian packet exp(-(theta - theta0)^2 / (4 sigma^2)) on the theta grid, with
/// minimal-image distances on the circle.
pub fn gaussian_packet(spec: &KickedMapSpec, theta0: f64, sigma: f64) -> Result<StateVector> {
    if !(sigma > 0.0) {
        return Err(Error::domain("packet width must be positive"));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << spec.num_qubits()];
    for (k, a) in amps.iter_mut().take(spec.levels()).enumerate() {
        let d = crate::classical::wrap_signed(spec.theta(k) - theta0, TAU);
        *a = Complex64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0);
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(amps)
}

/// Minimal-uncertainty width sqrt(hbar / (2 omega)) of the harmonic ground state of a
/// double well, omega = sqrt(K V''(a)) = sqrt(8 K a^2).
pub fn double_well_packet_width(spec: &KickedMapSpec) -> Result<f64> {
    match spec.potential {
        Potential::DoubleWell { a } if spec.k > 0.0 => {
            let omega = (8.0 * spec.k * a * a).sqrt();
            Ok((spec.hbar / (2.0 * omega)).sqrt())
        }
        _ => Err(Error::Unsupported(
            "packet width defined for a double well with K > 0".into(),
        )),
    }
}

/// Variance of the signed momentum, read out after an inverse QFT on the system register
/// (the state is restored).
pub fn momentum_variance(state: &mut StateVector, spec: &KickedMapSpec) -> Result<f64> {
    let reg = spec.system();
    let qft = build_qft(&reg, true, true)?;
    qft.apply_to(state)?;
    let p = state.register_distribution(&reg)?;
    qft.inverse().apply_to(state)?;
    let mean: f64 = p
        .iter()
        .enumerate()
        .map(|(m, w)| w * spec.momentum(m) as f64)
        .sum();
    Ok(p.iter()
        .enumerate()
        .map(|(m, w)| w * (spec.momentum(m) as f64 - mean).powi(2))
        .sum())
}

/// Tunneling period of a packet from the quasi-energy spectrum of the Floquet operator.
/// P_left(t) = sum_kk' c_k* c_k' L_kk' e^{-i (phi_k - phi_k') t} with L the overlap of
/// eigenstates on theta < 0; the period is 2 pi / |phi_k - phi_k'| of the dominant cross term.
pub fn tunneling_period(spec: &KickedMapSpec, packet: &StateVector) -> Result<f64> {
    let u = floquet_matrix(spec)?;
    let n = spec.levels();
    if packet.dim() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: packet.dim(),
        });
    }
    let mut a: Vec<Complex64> = (0..n * n).map(|k| u.get(k % n, k / n)).collect();
    let (w, v) = crate::lapack::general_eigen(n, &mut a)?;
    let vec = |k: usize| &v[k * n..(k + 1) * n];
    let c: Vec<Complex64> = (0..n)
        .map(|k| {
            vec(k)
                .iter()
                .enumerate()
                .map(|(i, x)| x.conj() * packet.amplitude(i))
                .sum()
        })
        .collect();
    let half = n / 2;
    let mut best = (0.0, 0.0);
    for k in 0..n {
        for kp in k + 1..n {
            let l: Complex64 = vec(k)[..half]
                .iter()
                .zip(&vec(kp)[..half])
                .map(|(x, y)| x.conj() * y)
                .sum();
            let amp = (c[k].conj() * c[kp] * l).norm();
            if amp > best.0 {
                best = (amp, (w[k] / w[kp]).arg().abs());
            }
        }
    }
    if best.1 < 1e-15 {
        return Err(Error::domain("no population transfer between the wells"));
    }
    Ok(TAU / best.1)
}

/// Classical-limit parameters of a kicked spec.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardMapParams {
    pub k: f64,
    pub integrable: bool,
    pub chaotic: bool,
    pub note: &'static str,
}

pub fn classical_standard_map_params(spec: &KickedMapSpec) -> StandardMapParams {
    let note = match spec.potential {
        Potential::Cosine => "I <- I + K sin(theta), theta <- theta + I with I = hbar * l",
        Potential::DoubleWell { .. } => {
            "I <- I - K V'(theta), theta <- theta + I with I = hbar * l"
        }
    };
    StandardMapParams {
        k: spec.k,
        integrable: spec.k == 0.0,
        chaotic: spec.k > 1.0,
        note,
    }
}
