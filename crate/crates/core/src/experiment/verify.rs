//! Self-checks of the building blocks against independent oracles.

use num_complex::Complex64;

use crate::circuit::{adder_gate_count, build_modular_adder, build_modular_subtractor, build_qft};
use crate::classical::{
    diffusion_slope, evolve_cat_exact, lyapunov_estimate, lyapunov_numerical, roundoff_divergence,
    Direction,
};
use crate::dense::{dense_unitary, dft_matrix};
use crate::imperfections::poisson_reference_ratio;
use crate::maps::{
    build_cat_step, build_kicked_step, floquet_matrix, prepare_cat_initial, CatMapSpec,
    KickedMapSpec, Potential,
};
use crate::rng::Stream;
use crate::state::fidelity;
use crate::{Circuit, GateOp, NoiseSpec, Result, StateVector};

use super::config::ExperimentConfig;
use super::figures::{cat_mask, sub_seed};
use super::output::RunReport;

const TOL: f64 = 1e-9;

/// Largest entry-wise deviation of `circuit` from the discrete Fourier matrix.
pub fn qft_oracle_error(n: usize, circuit: &Circuit) -> Result<f64> {
    Ok(dense_unitary(circuit, 12)?.max_abs_diff(&dft_matrix(n, false)))
}

/// The QFT with the sign of every controlled phase flipped.
pub fn mutated_qft(n: usize) -> Result<Circuit> {
    let good = build_qft(&(0..n).collect::<Vec<_>>(), false, true)?;
    let mut bad = Circuit::new(n);
    for g in good.gates() {
        bad.push(match g {
            GateOp::ControlledPhase { qubits, angle } => GateOp::ControlledPhase {
                qubits: *qubits,
                angle: -angle,
            },
            other => other.clone(),
        })?;
    }
    Ok(bad)
}

/// Number of wrong outputs over all inputs of the width-w adder and subtractor; a wrong
/// output includes a carry qubit left set.
pub fn adder_failures(w: usize) -> Result<usize> {
    let a: Vec<usize> = (0..w).collect();
    let b: Vec<usize> = (w..2 * w).collect();
    let c: Vec<usize> = (2 * w..3 * w - 1).collect();
    let add = build_modular_adder(&a, &b, &c, w)?;
    let sub = build_modular_subtractor(&a, &b, &c, w)?;
    let width = (3 * w - 1).max(2 * w);
    let m = 1usize << w;
    let mut failures = 0;
    for x in 0..m {
        for y in 0..m {
            for (circuit, expect) in [(&add, (x + y) % m), (&sub, (y + m - x) % m)] {
                let mut s = StateVector::new_basis_state(width, x | (y << w))?;
                circuit.apply_to(&mut s)?;
                if (s.amplitude(x | (expect << w)).re - 1.0).abs() > TOL {
                    failures += 1;
                }
            }
        }
    }
    Ok(failures)
}

/// Largest amplitude error after `steps` ideal cat steps from the cat mask, against the
/// uniform superposition over its exact lattice image.
pub fn cat_permutation_error(n: usize, l: usize, steps: usize, cap: u64) -> Result<f64> {
    let spec = CatMapSpec::new(n, l)?;
    let mask = cat_mask(n, l)?;
    let step = build_cat_step(&spec)?;
    let mut s = prepare_cat_initial(&spec, &mask, cap)?;
    for _ in 0..steps {
        step.apply_to(&mut s)?;
    }
    let image = evolve_cat_exact(&mask, steps, Direction::Forward);
    let a = 1.0 / (mask.count() as f64).sqrt();
    let mut expected = vec![Complex64::new(0.0, 0.0); s.dim()];
    for (i, j) in image.iter() {
        expected[spec.layout().compose(&[("x", i), ("y", j)])?] = Complex64::new(a, 0.0);
    }
    Ok(s.amplitudes()
        .iter()
        .zip(&expected)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

fn binomial_sum(n: usize, d_max: usize) -> usize {
    let mut total = 0;
    let mut c = 1usize;
    for d in 0..=d_max.min(n) {
        total += c;
        c = c * (n - d) / (d + 1);
    }
    total
}

/// Mean infidelity of one noisy controlled phase on random states.
pub fn noise_infidelity(eps: f64, draws: usize, seed: u64) -> Result<f64> {
    let mut s = Stream::new(seed);
    let mut noise = NoiseSpec::with_substream(eps, seed, 1)?;
    let gate = GateOp::controlled_phase(0, 1, 0.7);
    let mut total = 0.0;
    for _ in 0..draws {
        let amps: Vec<Complex64> = (0..4)
            .map(|_| Complex64::new(s.normal(), s.normal()))
            .collect();
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi = StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect())?;
        let mut ideal = psi.clone();
        ideal.apply(&gate)?;
        let mut noisy = psi;
        noisy.apply_noisy(&gate, &mut noise)?;
        total += 1.0 - fidelity(&ideal, &noisy)?;
    }
    Ok(total / draws as f64)
}

pub fn run_verify(cfg: &ExperimentConfig) -> Result<RunReport> {
    let mut rep = RunReport::default();
    let inject = cfg.usize("inject_qft_sign_error")? != 0;
    if inject {
        rep.note("QFT checks use a circuit with every controlled-phase sign flipped");
    }
    for n in 1..=cfg.usize("qft_max")? {
        let reg: Vec<usize> = (0..n).collect();
        let core = build_qft(&reg, false, false)?;
        rep.gates(format!("qft_n{n}"), core.len());
        rep.check(
            format!("QFT n={n} gate count"),
            core.len(),
            format!("{}", n * (n + 1) / 2),
            core.len() == n * (n + 1) / 2,
        );
        let circuit = if inject {
            mutated_qft(n)?
        } else {
            build_qft(&reg, false, true)?
        };
        let err = qft_oracle_error(n, &circuit)?;
        rep.check(
            format!("QFT n={n} vs DFT"),
            format!("{err:.2e}"),
            "< 1e-9",
            err < TOL,
        );
    }
    let n_mut = cfg.usize("qft_max")?.max(2);
    let mut_err = qft_oracle_error(n_mut, &mutated_qft(n_mut)?)?;
    rep.check(
        "mutated QFT is rejected",
        format!("{mut_err:.3}"),
        "> 0.1",
        mut_err > 0.1,
    );

    for w in 1..=cfg.usize("adder_max")? {
        let a: Vec<usize> = (0..w).collect();
        let b: Vec<usize> = (w..2 * w).collect();
        let c: Vec<usize> = (2 * w..3 * w - 1).collect();
        let len = build_modular_adder(&a, &b, &c, w)?.len();
        rep.gates(format!("adder_w{w}"), len);
        rep.check(
            format!("adder w={w} gate count"),
            len,
            format!("{}", adder_gate_count(w)),
            len == adder_gate_count(w),
        );
        let f = adder_failures(w)?;
        rep.check(
            format!("adder/subtractor w={w} exhaustive"),
            f,
            "0 wrong outputs",
            f == 0,
        );
    }

    let steps = cfg.usize("cat_steps")?;
    for n in 1..=cfg.usize("cat_max_n")? {
        for l in [1, 4] {
            let err = cat_permutation_error(n, l, steps, cfg.memory_cap)?;
            rep.check(
                format!("cat map n={n} L={l}, {steps} steps"),
                format!("{err:.2e}"),
                "< 1e-9",
                err < TOL,
            );
        }
    }

    let kn = cfg.usize("kicked_n")?;
    let hbar = 4.0 * std::f64::consts::PI / (1u64 << kn) as f64;
    let specs = [
        (
            "double well",
            KickedMapSpec::new(kn, 0.04, hbar, Potential::DoubleWell { a: 1.6 })?,
        ),
        (
            "cosine",
            KickedMapSpec::new(kn, 5.0, 1.0, Potential::Cosine)?,
        ),
        (
            "free rotation",
            KickedMapSpec::new(kn, 0.0, hbar, Potential::DoubleWell { a: 1.6 })?,
        ),
    ];
    for (name, spec) in &specs {
        let step = build_kicked_step(spec)?;
        let err = dense_unitary(&step, 12)?.max_abs_diff(&floquet_matrix(spec)?);
        rep.check(
            format!("kicked step ({name}) vs Floquet matrix"),
            format!("{err:.2e}"),
            "< 1e-8",
            err < 1e-8,
        );
        let qft = build_qft(&spec.system(), false, true)?.len();
        let bound = 2 * qft + binomial_sum(kn, 4) + binomial_sum(kn, 2);
        rep.gates(
            format!("kicked_step_{}", name.replace(' ', "_")),
            step.len(),
        );
        rep.check(
            format!("kicked step ({name}) gate count"),
            step.len(),
            format!("<= {bound}"),
            step.len() <= bound,
        );
    }

    let lambda = lyapunov_numerical(25, sub_seed(cfg.seed, 1))?;
    let exact = lyapunov_estimate();
    rep.check(
        "cat-map Lyapunov exponent",
        format!("{lambda:.4}"),
        format!("{exact:.4} +- 5%"),
        (lambda / exact - 1.0).abs() < 0.05,
    );
    let d = roundoff_divergence(120, 80, sub_seed(cfg.seed, 2))?;
    let t_break = d.iter().position(|&v| v > 0.1);
    rep.check(
        "double-precision orbit leaves the exact one",
        t_break.map_or("never".into(), |t| t.to_string()),
        "step in 30..=50",
        t_break.is_some_and(|t| (30..=50).contains(&t)),
    );
    let (dc, dc_err) = diffusion_slope(100_000, 10, 60, sub_seed(cfg.seed, 3))?;
    rep.check(
        "cat-map diffusion constant",
        format!("{dc:.5} +- {dc_err:.5}"),
        "1/12 +- 10%",
        (dc * 12.0 - 1.0).abs() < 0.1,
    );
    let r = poisson_reference_ratio(1 << 20, sub_seed(cfg.seed, 4));
    let r_exact = 2.0 * 2f64.ln() - 1.0;
    rep.check(
        "Poisson gap ratio",
        format!("{r:.4}"),
        format!("{r_exact:.4} +- 0.005"),
        (r - r_exact).abs() < 0.005,
    );
    let i1 = noise_infidelity(0.01, 4000, sub_seed(cfg.seed, 5))?;
    let i2 = noise_infidelity(0.02, 4000, sub_seed(cfg.seed, 5))?;
    rep.check(
        "per-gate infidelity bound",
        format!("{:.3}", i1 / 1e-4),
        "<= 1 eps^2",
        i1 <= 1e-4,
    );
    rep.check(
        "per-gate infidelity ~ eps^2",
        format!("{:.3}", i2 / i1),
        "4 +- 0.5",
        (i2 / i1 - 4.0).abs() <= 0.5,
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_is_caught() {
        let good = build_qft(&[0, 1, 2], false, true).unwrap();
        assert!(qft_oracle_error(3, &good).unwrap() < 1e-12);
        assert!(qft_oracle_error(3, &mutated_qft(3).unwrap()).unwrap() > 0.1);
    }

    #[test]
    fn adders_are_exact() {
        for w in 1..=3 {
            assert_eq!(adder_failures(w).unwrap(), 0);
        }
    }

    #[test]
    fn binomial_sums() {
        assert_eq!(binomial_sum(5, 4), 31);
        assert_eq!(binomial_sum(5, 2), 16);
        assert_eq!(binomial_sum(2, 4), 4);
    }

    #[test]
    fn cat_permutation_small() {
        assert!(cat_permutation_error(3, 4, 20, 1 << 30).unwrap() < 1e-9);
    }

    #[test]
    fn infidelity_scales_quadratically() {
        assert!(noise_infidelity(0.0, 10, 1).unwrap().abs() < 1e-12);
        let i = noise_infidelity(0.05, 2000, 3).unwrap();
        assert!(i > 0.0 && i < 0.05 * 0.05);
    }
}
