//! Scaling laws of the fidelity time and tunneling decay, and dynamical localization.

use std::f64::consts::{LN_2, PI, TAU};

use crate::classical::{evolve_standard_map, LatticeMask};
use crate::fit::{linear_fit, power_law_exponent};
use crate::maps::{
    build_kicked_step, check_memory, momentum_variance, run_cat_experiment, CatMapSpec,
    KickedMapSpec, Potential,
};
use crate::rng::Stream;
use crate::{NoiseSpec, Result, StateVector};

use super::config::ExperimentConfig;
use super::figures::{cat_mask, sub_seed, well_decay, well_setup};
use super::output::{Cell, Csv, RunReport};

/// Fidelities below this are dominated by the residual overlap and excluded from fits.
const FIDELITY_FLOOR: f64 = 0.05;

/// Decay rate of ln F(t) over the steps where F stays above the floor.
pub fn fidelity_decay_rate(fidelity: &[f64]) -> Result<f64> {
    let (t, lf): (Vec<f64>, Vec<f64>) = fidelity
        .iter()
        .enumerate()
        .take_while(|(_, f)| **f > FIDELITY_FLOOR)
        .map(|(t, f)| (t as f64, f.ln()))
        .unzip();
    if t.len() < 3 {
        return Err(crate::Error::InsufficientData(
            "fidelity falls below the floor within 3 steps".into(),
        ));
    }
    Ok(-linear_fit(&t, &lf)?.slope)
}

/// One point of a scaling sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub epsilon: f64,
    pub gates_per_step: usize,
    pub gamma: f64,
    /// ln 2 / gamma.
    pub t_f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub by_epsilon: Vec<ScalingPoint>,
    pub by_size: Vec<ScalingPoint>,
    /// Exponent of t_f against epsilon.
    pub epsilon_exponent: (f64, f64),
    /// Exponent of t_f against n.
    pub size_exponent: (f64, f64),
    /// Exponent of gamma against the gate count per step.
    pub gate_exponent: (f64, f64),
    pub report: RunReport,
}

fn scaling_csv(points: &[ScalingPoint]) -> Vec<u8> {
    let mut c = Csv::new(&[
        "n",
        "epsilon",
        "gates_per_step",
        "gamma",
        "t_f",
        "loss_per_gate_over_eps2",
    ]);
    for p in points {
        let per_gate = p.gamma / (p.gates_per_step as f64 * p.epsilon * p.epsilon);
        c.row(vec![
            p.n.into(),
            p.epsilon.into(),
            p.gates_per_step.into(),
            p.gamma.into(),
            p.t_f.into(),
            per_gate.into(),
        ]);
    }
    c.into_bytes()
}

fn exponent(
    points: &[ScalingPoint],
    x: impl Fn(&ScalingPoint) -> f64,
    y: impl Fn(&ScalingPoint) -> f64,
) -> Result<(f64, f64)> {
    let xs: Vec<f64> = points.iter().map(x).collect();
    let ys: Vec<f64> = points.iter().map(y).collect();
    let f = power_law_exponent(&xs, &ys)?;
    Ok((f.slope, f.slope_err))
}

/// Exponents of t_f against epsilon and n, and of gamma against the gate count per step.
fn scaling_exponents(
    rep: &mut RunReport,
    by_epsilon: &[ScalingPoint],
    by_size: &[ScalingPoint],
) -> Result<((f64, f64), (f64, f64), (f64, f64))> {
    let eps = exponent(by_epsilon, |p| p.epsilon, |p| p.t_f)?;
    let n = exponent(by_size, |p| p.n as f64, |p| p.t_f)?;
    let gates = exponent(by_size, |p| p.gates_per_step as f64, |p| p.gamma)?;
    rep.metric("t_f_vs_epsilon_exponent", format!("{} +- {}", eps.0, eps.1));
    rep.metric("t_f_vs_n_exponent", format!("{} +- {}", n.0, n.1));
    rep.metric(
        "gamma_vs_gates_exponent",
        format!("{} +- {}", gates.0, gates.1),
    );
    rep.check(
        "t_f ~ epsilon^a",
        eps.0,
        "a in [-2.4, -1.6]",
        (-2.4..=-1.6).contains(&eps.0),
    );
    Ok((eps, n, gates))
}

/// Decay rate of the fidelity averaged over `seeds` runs; seed `s` uses sub-stream `id + s`.
fn cat_point(
    cfg: &ExperimentConfig,
    n: usize,
    eps: f64,
    seeds: usize,
    id: u64,
) -> Result<ScalingPoint> {
    let l = cfg.usize("L")?;
    let t_max = cfg.usize("t_max")?;
    let spec = CatMapSpec::new(n, l)?;
    check_memory(spec.num_qubits(), cfg.memory_cap)?;
    let mask: LatticeMask = cat_mask(n, l)?;
    let mut mean = vec![0.0; t_max + 1];
    let mut gates = 0;
    for s in 0..seeds {
        let mut noise = NoiseSpec::with_substream(eps, cfg.seed, id + s as u64)?;
        let run = run_cat_experiment(&spec, &mask, t_max, 0, &mut noise, &[], cfg.memory_cap)?;
        for (m, r) in mean.iter_mut().zip(&run.records) {
            *m += r.fidelity / seeds as f64;
        }
        gates = run.step_gates;
    }
    let gamma = fidelity_decay_rate(&mean)?;
    Ok(ScalingPoint {
        n,
        epsilon: eps,
        gates_per_step: gates,
        gamma,
        t_f: LN_2 / gamma,
    })
}

/// Fidelity decay of the noisy forward cat map against epsilon and register size.
///
/// A seed's fidelity decay rate scatters by about 20% around its mean, so the number of
/// seeds grows 4x per qubit below the largest n (the cost per seed shrinks 8x).
pub fn run_scaling_fidelity(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    let n0 = cfg.usize("n")?;
    let eps0 = cfg.f64("epsilon")?;
    let n_list = cfg.usize_list("n_list")?;
    let n_top = n_list.iter().copied().chain([n0]).max().unwrap_or(n0);
    let base = cfg.usize("seeds")?.max(1);
    let seeds_for = |n: usize| (base << (2 * (n_top - n)).min(8)).min(256);
    let mut rep = RunReport::default();
    let mut points: Vec<(usize, f64, ScalingPoint)> = Vec::new();
    let mut point = |n: usize, e: f64| -> Result<ScalingPoint> {
        if let Some((_, _, p)) = points.iter().find(|(m, f, _)| *m == n && *f == e) {
            return Ok(p.clone());
        }
        let id = (points.len() as u64 + 1) << 32;
        let p = cat_point(cfg, n, e, seeds_for(n), id)?;
        points.push((n, e, p.clone()));
        Ok(p)
    };
    let mut by_epsilon = Vec::new();
    for e in cfg.f64_list("epsilons")? {
        by_epsilon.push(point(n0, e)?);
    }
    let mut by_size = Vec::new();
    for &n in &n_list {
        by_size.push(point(n, eps0)?);
    }
    let mut gate_table: Vec<(usize, usize)> = by_size
        .iter()
        .chain(&by_epsilon)
        .map(|p| (p.n, p.gates_per_step))
        .collect();
    gate_table.sort_unstable();
    gate_table.dedup();
    for (n, g) in gate_table {
        rep.gates(format!("cat_step_n{n}"), g);
        rep.metric(format!("seeds_n{n}"), seeds_for(n));
    }
    let (epsilon_exponent, size_exponent, gate_exponent) =
        scaling_exponents(&mut rep, &by_epsilon, &by_size)?;
    rep.check(
        "t_f ~ n^b",
        size_exponent.0,
        "b in [-1.6, -0.5]",
        (-1.6..=-0.5).contains(&size_exponent.0),
    );
    rep.artifacts
        .add("scaling_fidelity_epsilon.csv", scaling_csv(&by_epsilon));
    rep.artifacts
        .add("scaling_fidelity_size.csv", scaling_csv(&by_size));
    Ok(ScalingResult {
        by_epsilon,
        by_size,
        epsilon_exponent,
        size_exponent,
        gate_exponent,
        report: rep,
    })
}

fn well_point(cfg: &ExperimentConfig, n_sys: usize, eps: f64, stream: u64) -> Result<ScalingPoint> {
    let spec = KickedMapSpec::new(
        n_sys,
        cfg.f64("K")?,
        4.0 * PI / (1u64 << n_sys) as f64,
        Potential::DoubleWell { a: cfg.f64("a")? },
    )?
    .with_ancillas(cfg.usize("ancillas")?);
    let setup = well_setup(spec, cfg.usize("t_max")?)?;
    let d = well_decay(
        &setup,
        eps,
        cfg.usize("seeds")?.max(2),
        cfg.seed,
        stream << 32,
    )?;
    Ok(ScalingPoint {
        n: n_sys,
        epsilon: eps,
        gates_per_step: setup.step.len(),
        gamma: d.gamma.0,
        t_f: LN_2 / d.gamma.0,
    })
}

/// Tunneling decay rate against epsilon and register size, with hbar = 4 pi / 2^n_sys.
pub fn run_scaling_gamma(cfg: &ExperimentConfig) -> Result<ScalingResult> {
    let n0 = cfg.usize("n_sys")?;
    let eps0 = cfg.f64("epsilon")?;
    let mut rep = RunReport::default();
    let mut stream = 0u64;
    let mut by_epsilon = Vec::new();
    for e in cfg.f64_list("epsilons")? {
        stream += 1;
        by_epsilon.push(well_point(cfg, n0, e, stream)?);
    }
    let mut by_size = Vec::new();
    for n in cfg.usize_list("n_sys_list")? {
        stream += 1;
        by_size.push(well_point(cfg, n, eps0, stream)?);
    }
    for p in &by_size {
        rep.gates(format!("kicked_step_n{}", p.n), p.gates_per_step);
    }
    let (epsilon_exponent, size_exponent, gate_exponent) =
        scaling_exponents(&mut rep, &by_epsilon, &by_size)?;
    rep.check(
        "gamma ~ gates^c",
        gate_exponent.0,
        "c in [0.5, 1.6]",
        (0.5..=1.6).contains(&gate_exponent.0),
    );
    rep.artifacts
        .add("scaling_gamma_epsilon.csv", scaling_csv(&by_epsilon));
    rep.artifacts
        .add("scaling_gamma_size.csv", scaling_csv(&by_size));
    Ok(ScalingResult {
        by_epsilon,
        by_size,
        epsilon_exponent,
        size_exponent,
        gate_exponent,
        report: rep,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationResult {
    /// Quantum momentum variance in units of hbar^2, t = 0..=t_max.
    pub quantum: Vec<f64>,
    /// Classical action variance divided by hbar^2.
    pub classical: Vec<f64>,
    pub ratio: f64,
    pub report: RunReport,
}

/// Kicked rotator from the zero-momentum state against the classical standard map.
pub fn run_localization(cfg: &ExperimentConfig) -> Result<LocalizationResult> {
    let hbar = cfg.f64("hbar")?;
    let k = cfg.f64("K")?;
    let t_max = cfg.usize("t_max")?;
    let spec = KickedMapSpec::new(cfg.usize("n_sys")?, k, hbar, Potential::Cosine)?;
    let step = build_kicked_step(&spec)?;
    let mut rep = RunReport::default();
    rep.gates("kicked_step", step.len());
    let mut psi = StateVector::new_basis_state(spec.num_qubits(), 0)?;
    psi.prepare_uniform(&spec.system())?;
    let mut quantum = vec![momentum_variance(&mut psi, &spec)?];
    for _ in 0..t_max {
        step.apply_to(&mut psi)?;
        quantum.push(momentum_variance(&mut psi, &spec)?);
    }
    let orbits = cfg.usize("orbits")?;
    let mut s = Stream::new(sub_seed(cfg.seed, 1));
    let mut theta: Vec<f64> = (0..orbits)
        .map(|_| s.uniform_in(-PI, PI).rem_euclid(TAU))
        .collect();
    let mut action = vec![0.0; orbits];
    let classical: Vec<f64> = evolve_standard_map(&mut action, &mut theta, t_max, k)?
        .into_iter()
        .map(|v| v / (hbar * hbar))
        .collect();
    let ratio = quantum[t_max] / classical[t_max];
    let mut c = Csv::new(&["t", "quantum_var_l", "classical_var_l"]);
    for t in 0..=t_max {
        c.row(vec![Cell::from(t), quantum[t].into(), classical[t].into()]);
    }
    rep.artifacts.add("localization.csv", c.into_bytes());
    rep.metric("quantum_variance", quantum[t_max]);
    rep.metric("classical_variance", classical[t_max]);
    rep.metric("ratio", ratio);
    rep.check(
        "dynamical localization",
        ratio,
        "quantum / classical < 0.2",
        ratio < 0.2,
    );
    Ok(LocalizationResult {
        quantum,
        classical,
        ratio,
        report: rep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_rate_of_exponential() {
        let f: Vec<f64> = (0..50).map(|t| (-0.03 * t as f64).exp()).collect();
        assert!((fidelity_decay_rate(&f).unwrap() - 0.03).abs() < 1e-12);
        assert!(fidelity_decay_rate(&[1.0, 0.01, 0.0]).is_err());
    }

    #[test]
    fn noiseless_cat_has_no_decay() {
        let mut cfg = ExperimentConfig::new(
            crate::experiment::ExperimentId::ScalingFidelity,
            crate::experiment::Preset::Reduced,
        );
        cfg.set("t_max", "20").unwrap();
        let p = cat_point(&cfg, 3, 0.0, 1, 1).unwrap();
        assert!(p.gamma.abs() < 1e-9);
        assert!(p.gates_per_step > 0);
    }
}
