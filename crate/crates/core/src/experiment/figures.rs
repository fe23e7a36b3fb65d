//! The four figure reproductions.

use crate::classical::{
    diffusion_slope, evolve_cat_float, lyapunov_estimate, Direction, LatticeMask, OrbitEnsemble,
    PerturbationSpec,
};
use crate::fit::{fit_envelope_decay, fit_reference_decay, linear_fit, mean_stderr};
use crate::imperfections::{
    diagonalize_model, mean_level_spacing, melting_scan, poisson_reference_ratio,
    spacing_statistics, BorderScan, ImperfectionModel, Topology, Want, MAP_BINS,
};
use crate::maps::{
    build_cat_step, build_kicked_step, check_memory, double_well_packet_width, gaussian_packet,
    run_cat_experiment, tunneling_period, well_populations, CatMapSpec, KickedMapSpec,
    LatticeDistribution, Potential,
};
use crate::rng::Stream;
use crate::state::fidelity;
use crate::{Circuit, NoiseSpec, Result, StateVector};

use super::config::ExperimentConfig;
use super::output::{heatmap_ppm, Cell, Csv, RunReport, SERIES_HEADER};

/// An independent seed derived from the run seed.
pub(crate) fn sub_seed(seed: u64, id: u64) -> u64 {
    Stream::substream(seed, id).next_u64()
}

/// A cat face: a disc with two triangular ears, centred on the 2^n x L 2^n lattice.
pub fn cat_mask(n: usize, l: usize) -> Result<LatticeMask> {
    let w = 1usize << n;
    let (cx, cy) = (w as f64 / 2.0, (l * w) as f64 / 2.0);
    let r = (w as f64 / 6.0).max(1.0);
    let cells = (0..w)
        .flat_map(|i| (0..l * w).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            let (dx, dy) = (i as f64 + 0.5 - cx, j as f64 + 0.5 - cy);
            let head = dx * dx + dy * dy <= r * r;
            let ear = |side: f64| {
                dy >= 0.5 * r
                    && dy <= 1.5 * r
                    && (dx - side * 0.6 * r).abs() <= 0.5 * (1.5 * r - dy)
            };
            head || ear(1.0) || ear(-1.0)
        });
    LatticeMask::from_cells(n, l, cells)
}

/// `rows` full rows of the lattice centred on y = L/2.
pub fn strip_mask(n: usize, l: usize, rows: usize) -> Result<LatticeMask> {
    let w = 1usize << n;
    let j0 = (l * w / 2).saturating_sub(rows / 2);
    LatticeMask::from_cells(
        n,
        l,
        (0..w).flat_map(|i| (j0..j0 + rows).map(move |j| (i, j))),
    )
}

fn distribution_image(d: &LatticeDistribution) -> Vec<u8> {
    let (w, h) = (d.width(), d.height());
    let v: Vec<f64> = (0..h)
        .flat_map(|r| (0..w).map(move |i| (i, h - 1 - r)))
        .map(|(i, j)| d.get(i, j))
        .collect();
    heatmap_ppm(w, h, &v)
}

fn ensemble_image(e: &OrbitEnsemble, n: usize, l: usize) -> Vec<u8> {
    let w = 1usize << n;
    let h = l * w;
    let mut v = vec![0.0; w * h];
    for (x, y) in e.x.iter().zip(&e.y) {
        let i = ((x * w as f64) as usize).min(w - 1);
        let j = ((y * w as f64) as usize).min(h - 1);
        v[(h - 1 - j) * w + i] += 1.0;
    }
    heatmap_ppm(w, h, &v)
}

fn fmt_opt(v: Option<usize>) -> String {
    v.map_or("none".into(), |t| t.to_string())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig1Result {
    /// Probability on the initial mask after the noisy quantum forward/back run.
    pub quantum_overlap: f64,
    /// Fraction of classical orbits back on the mask after the perturbed reversal.
    pub classical_overlap: f64,
    pub quantum_fidelity: f64,
    /// (quantum, classical) return overlaps of the long run.
    pub long_run: Option<(f64, f64)>,
    pub report: RunReport,
}

pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Fig1Result> {
    let n = cfg.usize("n")?;
    let l = cfg.usize("L")?;
    let eps = cfg.f64("epsilon")?;
    let eps_cl = cfg.f64("epsilon_cl")?;
    let t_rev = cfg.usize("t_reverse")?;
    let t_long = cfg.usize("t_long")?;
    let spec = CatMapSpec::new(n, l)?;
    check_memory(spec.num_qubits(), cfg.memory_cap)?;
    let mask = cat_mask(n, l)?;
    let mut rep = RunReport::default();
    rep.gates("cat_step", build_cat_step(&spec)?.len());
    rep.metric("qubits", spec.num_qubits());
    rep.metric("lattice", format!("{} x {}", 1usize << n, l << n));
    rep.metric("mask_cells", mask.count());

    let mut noise = NoiseSpec::with_substream(eps, cfg.seed, 1)?;
    let q = run_cat_experiment(
        &spec,
        &mask,
        t_rev,
        t_rev,
        &mut noise,
        &[0, t_rev, 2 * t_rev],
        cfg.memory_cap,
    )?;
    let last = q.records.last().expect("records include t = 0");
    let mut series = Csv::new(&SERIES_HEADER);
    for r in &q.records {
        series.row(vec![
            r.t.into(),
            r.fidelity.into(),
            r.second_moment.into(),
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    rep.artifacts.add("fig1_quantum.csv", series.into_bytes());
    for (t, d) in &q.snapshots {
        rep.artifacts
            .add(format!("fig1_quantum_t{t}.ppm"), distribution_image(d));
    }

    let ens = OrbitEnsemble::from_mask(&mask);
    let c = evolve_cat_float(
        &ens,
        t_rev,
        t_rev,
        PerturbationSpec::at_reversal(eps_cl, sub_seed(cfg.seed, 2)),
    )?;
    let classical_overlap = c.final_ensemble.fraction_in(&mask);
    let mut fwd = ens.clone();
    for _ in 0..t_rev {
        fwd.step(Direction::Forward);
    }
    rep.artifacts
        .add("fig1_classical_t0.ppm", ensemble_image(&ens, n, l));
    rep.artifacts.add(
        format!("fig1_classical_t{t_rev}.ppm"),
        ensemble_image(&fwd, n, l),
    );
    rep.artifacts.add(
        format!("fig1_classical_t{}.ppm", 2 * t_rev),
        ensemble_image(&c.final_ensemble, n, l),
    );

    let mut summary = Csv::new(&[
        "run",
        "t_reversal",
        "t_final",
        "epsilon",
        "return_overlap",
        "fidelity",
    ]);
    summary.row(vec![
        "quantum".into(),
        t_rev.into(),
        (2 * t_rev).into(),
        eps.into(),
        last.overlap.into(),
        last.fidelity.into(),
    ]);
    summary.row(vec![
        "classical".into(),
        t_rev.into(),
        (2 * t_rev).into(),
        eps_cl.into(),
        classical_overlap.into(),
        Cell::Empty,
    ]);

    let long_run = if t_long > 0 {
        let mut noise = NoiseSpec::with_substream(eps, cfg.seed, 3)?;
        let ql = run_cat_experiment(
            &spec,
            &mask,
            t_long,
            t_long,
            &mut noise,
            &[2 * t_long],
            cfg.memory_cap,
        )?;
        let cl = evolve_cat_float(
            &ens,
            t_long,
            t_long,
            PerturbationSpec::at_reversal(eps_cl, sub_seed(cfg.seed, 4)),
        )?;
        let qo = ql.records.last().expect("records include t = 0");
        let co = cl.final_ensemble.fraction_in(&mask);
        for (t, d) in &ql.snapshots {
            rep.artifacts
                .add(format!("fig1_quantum_t{t}.ppm"), distribution_image(d));
        }
        rep.artifacts.add(
            format!("fig1_classical_t{}.ppm", 2 * t_long),
            ensemble_image(&cl.final_ensemble, n, l),
        );
        summary.row(vec![
            "quantum".into(),
            t_long.into(),
            (2 * t_long).into(),
            eps.into(),
            qo.overlap.into(),
            qo.fidelity.into(),
        ]);
        summary.row(vec![
            "classical".into(),
            t_long.into(),
            (2 * t_long).into(),
            eps_cl.into(),
            co.into(),
            Cell::Empty,
        ]);
        rep.metric("long_quantum_overlap", qo.overlap);
        rep.metric("long_classical_overlap", co);
        Some((qo.overlap, co))
    } else {
        None
    };
    rep.artifacts.add("fig1_summary.csv", summary.into_bytes());

    rep.metric("quantum_return_overlap", last.overlap);
    rep.metric("quantum_return_fidelity", last.fidelity);
    rep.metric("classical_return_overlap", classical_overlap);
    rep.check("quantum return", last.overlap, "> 0.5", last.overlap > 0.5);
    rep.check(
        "classical return fails",
        classical_overlap,
        "< 0.5",
        classical_overlap < 0.5,
    );
    Ok(Fig1Result {
        quantum_overlap: last.overlap,
        classical_overlap,
        quantum_fidelity: last.fidelity,
        long_run,
        report: rep,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Result {
    /// Quantum <y^2>(t) for t = 0..=t_total.
    pub quantum_y2: Vec<f64>,
    pub quantum_slope: f64,
    /// Slope of the unperturbed classical strip ensemble over the same window.
    pub classical_slope: f64,
    /// Diffusion constant from the long unperturbed run, with its fit error.
    pub diffusion: (f64, f64),
    /// (epsilon, <y^2>(t), breakdown time) per classical perturbation.
    pub classical: Vec<(f64, Vec<f64>, Option<usize>)>,
    pub t_reverse: usize,
    pub report: RunReport,
}

impl Fig2Result {
    /// (<y^2>(end) - <y^2>(0)) / (<y^2>(reversal) - <y^2>(0)).
    pub fn residual_fraction(y2: &[f64], t_reverse: usize) -> f64 {
        let y0 = y2[0];
        (y2[y2.len() - 1] - y0) / (y2[t_reverse] - y0)
    }
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Fig2Result> {
    let n = cfg.usize("n")?;
    let l = cfg.usize("L")?;
    let eps = cfg.f64("epsilon")?;
    let eps_cl = cfg.f64_list("epsilon_cl")?;
    let t_rev = cfg.usize("t_reverse")?;
    let t_total = cfg.usize("t_total")?.max(t_rev);
    let rows = cfg.usize("strip_rows")?.max(1);
    let fit_hi = cfg.usize("fit_t_hi")?.clamp(2, t_rev);
    let threshold = cfg.f64("breakdown")?;
    let spec = CatMapSpec::new(n, l)?;
    let mut rep = RunReport::default();
    if spec.num_qubits() >= 26 {
        rep.note(format!(
            "{} qubits: statevector of {} MiB",
            spec.num_qubits(),
            (16u64 << spec.num_qubits()) >> 20
        ));
    }
    check_memory(spec.num_qubits(), cfg.memory_cap)?;
    rep.gates("cat_step", build_cat_step(&spec)?.len());
    rep.metric("qubits", spec.num_qubits());
    let w = 1usize << n;
    let mask = strip_mask(n, l, rows)?;
    rep.note(format!(
        "initial distribution: {rows} full rows centred on y = L/2, uniform in x"
    ));

    let mut noise = NoiseSpec::with_substream(eps, cfg.seed, 1)?;
    let q = run_cat_experiment(
        &spec,
        &mask,
        t_rev,
        t_total - t_rev,
        &mut noise,
        &[0, t_rev, t_total],
        cfg.memory_cap,
    )?;
    let quantum_y2: Vec<f64> = q.records.iter().map(|r| r.second_moment).collect();
    let window: Vec<f64> = (0..=fit_hi).map(|t| t as f64).collect();
    let quantum_slope = linear_fit(&window, &quantum_y2[..=fit_hi])?.slope;
    for (t, d) in &q.snapshots {
        rep.artifacts
            .add(format!("fig2_quantum_t{t}.ppm"), distribution_image(d));
    }

    let diffusion = diffusion_slope(
        cfg.usize("d_orbits")?,
        cfg.usize("d_t_lo")?,
        cfg.usize("d_t_hi")?,
        sub_seed(cfg.seed, 2),
    )?;
    let mut stream = Stream::new(sub_seed(cfg.seed, 3));
    let j0 = (l * w / 2).saturating_sub(rows / 2);
    let (y_lo, y_hi) = (j0 as f64 / w as f64, (j0 + rows) as f64 / w as f64);
    let ens = OrbitEnsemble::strip(cfg.usize("orbits")?, l, y_lo, y_hi, &mut stream)?;
    let base = evolve_cat_float(
        &ens,
        t_rev,
        t_total - t_rev,
        PerturbationSpec::at_reversal(0.0, 0),
    )?;
    let classical_slope = linear_fit(&window, &base.second_moment[..=fit_hi])?.slope;
    let mut classical = Vec::new();
    for (k, &e) in eps_cl.iter().enumerate() {
        let run = evolve_cat_float(
            &ens,
            t_rev,
            t_total - t_rev,
            PerturbationSpec::at_reversal(e, sub_seed(cfg.seed, 10 + k as u64)),
        )?;
        let tb = run.breakdown_time(t_rev, threshold);
        classical.push((e, run.second_moment, tb));
    }

    let mut qcsv = Csv::new(&SERIES_HEADER);
    for r in &q.records {
        qcsv.row(vec![
            r.t.into(),
            r.fidelity.into(),
            r.second_moment.into(),
            Cell::Empty,
            Cell::Empty,
        ]);
    }
    rep.artifacts.add("fig2_quantum.csv", qcsv.into_bytes());
    let mut header = vec!["t".to_string()];
    header.extend(
        classical
            .iter()
            .map(|(e, _, _)| format!("classical_eps_{e:e}")),
    );
    header.push("classical_eps_0".into());
    header.push("theory".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut ccsv = Csv::new(&header_refs);
    for t in 0..=t_total {
        let mut row: Vec<Cell> = vec![t.into()];
        row.extend(classical.iter().map(|(_, y, _)| Cell::Num(y[t])));
        row.push(base.second_moment[t].into());
        row.push((quantum_y2[0] + diffusion.0 * t.min(t_rev) as f64).into());
        ccsv.row(row);
    }
    rep.artifacts.add("fig2_classical.csv", ccsv.into_bytes());

    rep.metric("diffusion_D", format!("{} +- {}", diffusion.0, diffusion.1));
    rep.metric("quantum_slope", quantum_slope);
    rep.metric("classical_slope", classical_slope);
    let within = |s: f64| ((s - diffusion.0) / diffusion.0).abs() <= 0.2;
    rep.check(
        "quantum pre-reversal slope vs D",
        quantum_slope / diffusion.0,
        "ratio within 1 +- 0.2",
        within(quantum_slope),
    );
    rep.check(
        "classical pre-reversal slope vs D",
        classical_slope / diffusion.0,
        "ratio within 1 +- 0.2",
        within(classical_slope),
    );
    let qres = Fig2Result::residual_fraction(&quantum_y2, t_rev);
    rep.metric("quantum_residual_fraction", qres);
    rep.check(
        "quantum return",
        qres,
        "<= 0.2 of the excursion",
        qres <= 0.2,
    );
    let rel = (quantum_y2[t_total] - quantum_y2[0]).abs() / quantum_y2[0];
    rep.check(
        "quantum <y2> back to its initial value",
        rel,
        "relative deviation <= 0.2",
        rel <= 0.2,
    );
    for (e, y, tb) in &classical {
        let res = Fig2Result::residual_fraction(y, t_rev);
        rep.metric(format!("classical_eps_{e:e}_breakdown"), fmt_opt(*tb));
        rep.check(
            format!("classical eps={e:e} resumes diffusion"),
            res,
            "> 0.2 of the excursion",
            res > 0.2,
        );
    }
    if let [(e1, _, Some(t1)), (e2, _, Some(t2)), ..] = classical.as_slice() {
        let predicted = (e1 / e2).ln().abs() / lyapunov_estimate();
        let delay = *t2 as f64 - *t1 as f64;
        rep.metric("breakdown_delay", delay);
        rep.metric("breakdown_delay_predicted", predicted);
        rep.check(
            "breakdown delay",
            delay,
            format!("{predicted:.2} +- 3"),
            (delay.abs() - predicted).abs() <= 3.0,
        );
    }
    Ok(Fig2Result {
        quantum_y2,
        quantum_slope,
        classical_slope,
        diffusion,
        classical,
        t_reverse: t_rev,
        report: rep,
    })
}

/// Seed-averaged noisy double-well runs measured against the noise-free run.
#[derive(Clone, Debug, PartialEq)]
pub struct WellDecay {
    pub epsilon: f64,
    /// Per-seed rates from the reference fit.
    pub gammas: Vec<f64>,
    pub gamma: (f64, f64),
    pub mean_left: Vec<f64>,
    pub mean_fidelity: Vec<f64>,
    /// theta density per step of the first seed.
    pub first_density: Vec<Vec<f64>>,
}

pub(crate) struct WellSetup {
    pub spec: KickedMapSpec,
    pub step: Circuit,
    pub ideal_states: Vec<StateVector>,
    pub ideal_left: Vec<f64>,
}

pub(crate) fn well_setup(spec: KickedMapSpec, t_max: usize) -> Result<WellSetup> {
    let step = build_kicked_step(&spec)?;
    let a = match spec.potential {
        Potential::DoubleWell { a } => a,
        Potential::Cosine => {
            return Err(crate::Error::Unsupported(
                "tunneling needs a double well".into(),
            ))
        }
    };
    let mut psi = gaussian_packet(&spec, -a, double_well_packet_width(&spec)?)?;
    let mut ideal_states = vec![psi.clone()];
    let mut ideal_left = vec![well_populations(&psi, &spec)?.0];
    for _ in 0..t_max {
        step.apply_to(&mut psi)?;
        ideal_left.push(well_populations(&psi, &spec)?.0);
        ideal_states.push(psi.clone());
    }
    Ok(WellSetup {
        spec,
        step,
        ideal_states,
        ideal_left,
    })
}

pub(crate) fn well_decay(
    setup: &WellSetup,
    eps: f64,
    seeds: usize,
    seed: u64,
    stream_base: u64,
) -> Result<WellDecay> {
    let t_max = setup.ideal_left.len() - 1;
    let times: Vec<f64> = (0..=t_max).map(|t| t as f64).collect();
    let centred_ideal: Vec<f64> = setup.ideal_left.iter().map(|v| v - 0.5).collect();
    let mut gammas = Vec::with_capacity(seeds);
    let mut mean_left = vec![0.0; t_max + 1];
    let mut mean_fidelity = vec![0.0; t_max + 1];
    let mut first_density = Vec::new();
    let reg = setup.spec.system();
    for s in 0..seeds {
        let mut noise = NoiseSpec::with_substream(eps, seed, stream_base + s as u64)?;
        let mut psi = setup.ideal_states[0].clone();
        let mut left = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            if t > 0 {
                setup.step.apply_noisy_to(&mut psi, &mut noise)?;
            }
            let p = well_populations(&psi, &setup.spec)?.0;
            left.push(p);
            mean_left[t] += p / seeds as f64;
            mean_fidelity[t] += fidelity(&psi, &setup.ideal_states[t])? / seeds as f64;
            if s == 0 {
                first_density.push(psi.register_distribution(&reg)?);
            }
        }
        let centred: Vec<f64> = left.iter().map(|v| v - 0.5).collect();
        gammas.push(fit_reference_decay(&times, &centred, &centred_ideal)?.gamma);
    }
    Ok(WellDecay {
        epsilon: eps,
        gamma: mean_stderr(&gammas),
        gammas,
        mean_left,
        mean_fidelity,
        first_density,
    })
}

/// Full left-right-left cycles: drops below 0.2 then recovers above 0.8.
pub fn count_oscillations(left: &[f64]) -> usize {
    let mut on_left = true;
    let mut cycles = 0;
    for &p in left {
        if on_left && p < 0.2 {
            on_left = false;
        } else if !on_left && p > 0.8 {
            on_left = true;
            cycles += 1;
        }
    }
    cycles
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig3Result {
    pub ideal_left: Vec<f64>,
    pub ideal_contrast: f64,
    pub ideal_oscillations: usize,
    pub tunneling_period: f64,
    pub noisy: WellDecay,
    pub reference: WellDecay,
    pub gamma_ratio: f64,
    pub report: RunReport,
}

fn well_csv(left: &[f64], fid: Option<&[f64]>) -> Vec<u8> {
    let mut c = Csv::new(&SERIES_HEADER);
    for (t, p) in left.iter().enumerate() {
        c.row(vec![
            t.into(),
            fid.map(|f| f[t]).into(),
            Cell::Empty,
            (*p).into(),
            (1.0 - p).into(),
        ]);
    }
    c.into_bytes()
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Fig3Result> {
    let spec = KickedMapSpec::new(
        cfg.usize("n_sys")?,
        cfg.f64("K")?,
        cfg.f64("hbar")?,
        Potential::DoubleWell { a: cfg.f64("a")? },
    )?
    .with_ancillas(cfg.usize("ancillas")?);
    let t_max = cfg.usize("t_max")?;
    let seeds = cfg.usize("seeds")?.max(1);
    let eps = cfg.f64("epsilon")?;
    let eps_ref = cfg.f64("epsilon_ref")?;
    let setup = well_setup(spec, t_max)?;
    let mut rep = RunReport::default();
    rep.metric("qubits", setup.spec.num_qubits());
    rep.metric("packet_sigma", double_well_packet_width(&setup.spec)?);
    let count = setup.step.count();
    rep.gates("kicked_step", count.total);
    for (arity, k) in &count.by_arity {
        rep.gates(format!("kicked_step_{arity}q"), *k);
    }

    let period = tunneling_period(&setup.spec, &setup.ideal_states[0])?;
    let ideal = &setup.ideal_left;
    let contrast = ideal.iter().copied().fold(f64::MIN, f64::max)
        - ideal.iter().copied().fold(f64::MAX, f64::min);
    let oscillations = count_oscillations(ideal);
    let noisy = well_decay(&setup, eps, seeds, cfg.seed, 1 << 32)?;
    let reference = well_decay(&setup, eps_ref, seeds, cfg.seed, 2 << 32)?;
    let gamma_ratio = noisy.gamma.0 / reference.gamma.0;

    rep.artifacts.add("fig3_ideal.csv", well_csv(ideal, None));
    rep.artifacts.add(
        "fig3_noisy.csv",
        well_csv(&noisy.mean_left, Some(&noisy.mean_fidelity)),
    );
    rep.artifacts.add(
        "fig3_reference.csv",
        well_csv(&reference.mean_left, Some(&reference.mean_fidelity)),
    );
    let mut g = Csv::new(&["epsilon", "seed", "gamma"]);
    for d in [&noisy, &reference] {
        for (s, v) in d.gammas.iter().enumerate() {
            g.row(vec![d.epsilon.into(), s.into(), (*v).into()]);
        }
    }
    rep.artifacts.add("fig3_gamma.csv", g.into_bytes());
    let n = setup.spec.levels();
    let dens: Vec<f64> = noisy
        .first_density
        .iter()
        .flat_map(|row| row[..n].iter().copied())
        .collect();
    rep.artifacts.add(
        "fig3_density.ppm",
        heatmap_ppm(n, noisy.first_density.len(), &dens),
    );

    let times: Vec<f64> = (0..=t_max).map(|t| t as f64).collect();
    match fit_envelope_decay(&times, &noisy.mean_left, 0.5) {
        Ok(f) => rep.metric("envelope_gamma", f.gamma),
        Err(e) => rep.note(format!("envelope fit not applicable: {e}")),
    }
    rep.metric("tunneling_period_floquet", period);
    rep.metric("ideal_contrast", contrast);
    rep.metric("ideal_full_oscillations", oscillations);
    rep.metric(
        format!("gamma_eps_{eps}"),
        format!("{} +- {}", noisy.gamma.0, noisy.gamma.1),
    );
    rep.metric(
        format!("gamma_eps_{eps_ref}"),
        format!("{} +- {}", reference.gamma.0, reference.gamma.1),
    );
    rep.metric("gamma_ratio", gamma_ratio);
    let contrast_final = {
        let tail = &noisy.mean_left[t_max.saturating_sub(t_max / 4)..];
        tail.iter().copied().fold(f64::MIN, f64::max)
            - tail.iter().copied().fold(f64::MAX, f64::min)
    };
    rep.metric("noisy_late_contrast", contrast_final);
    rep.check(
        "ideal oscillations",
        oscillations,
        ">= 2 full",
        oscillations >= 2,
    );
    rep.check("ideal contrast", contrast, "> 0.9", contrast > 0.9);
    let expected = (eps / eps_ref).powi(2);
    rep.check(
        "gamma ratio",
        gamma_ratio,
        format!("{expected} within a factor 1.5"),
        gamma_ratio >= expected / 1.5 && gamma_ratio <= expected * 1.5,
    );
    Ok(Fig3Result {
        ideal_left: ideal.clone(),
        ideal_contrast: contrast,
        ideal_oscillations: oscillations,
        tunneling_period: period,
        noisy,
        reference,
        gamma_ratio,
        report: rep,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Fig4Result {
    pub scan: BorderScan,
    /// (J, <r>, standard error).
    pub r_low: (f64, f64, f64),
    pub r_high: (f64, f64, f64),
    pub poisson_r: f64,
    /// (n, mean central spacing, standard error).
    pub spacing: Vec<(usize, f64, f64)>,
    /// Delta_{n+1} / Delta_n for consecutive entries of `spacing`.
    pub spacing_ratios: Vec<f64>,
    pub report: RunReport,
}

pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Fig4Result> {
    let n = cfg.usize("n")?;
    let delta = cfg.f64("delta")?;
    let realizations = cfg.usize("realizations")?.max(1);
    let step = cfg.f64("j_step")?;
    let j_max = cfg.f64("j_max")?;
    if !(step > 0.0) {
        return Err(crate::Error::domain("j_step must be positive"));
    }
    let points = (j_max / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=points).map(|k| k as f64 * step * delta).collect();
    let mut template = ImperfectionModel::new(n, delta, 0.0, cfg.seed)?;
    template.field_factor = cfg.f64("field_factor")?;
    template.topology = match cfg.word("topology") {
        "chain" => Topology::Chain,
        "all_pairs" => Topology::AllPairs,
        _ => Topology::square_grid(n),
    };
    let sector_bytes = 8u64 << (2 * (n - 1));
    if sector_bytes > cfg.memory_cap {
        return Err(crate::Error::Resource {
            what: format!("{n}-qubit sector matrix"),
            needed: sector_bytes,
            cap: cfg.memory_cap,
        });
    }
    let mut rep = RunReport::default();
    rep.metric("topology", format!("{:?}", template.topology));
    rep.metric(
        "realization_seeds",
        format!("substreams 0..{realizations} of seed {}", cfg.seed),
    );
    let scan = melting_scan(&template, &grid, realizations, |_, _| {})?;

    let r_realizations = cfg.usize("r_realizations")?.max(1);
    let r_at = |j: f64| -> Result<(f64, f64, f64)> {
        let spectra = (0..r_realizations)
            .map(|r| {
                let m = ImperfectionModel {
                    j: j * delta,
                    realization: r as u64,
                    ..template.clone()
                };
                diagonalize_model(&m, Want::Eigenvalues).map(|s| s.sectors)
            })
            .collect::<Result<Vec<_>>>()?;
        let s = spacing_statistics(&spectra, 0.5)?;
        Ok((j, s.mean_r, s.stderr))
    };
    let r_low = r_at(cfg.f64("r_low")?)?;
    let r_high = r_at(cfg.f64("r_high")?)?;
    let poisson_r = poisson_reference_ratio(1 << 20, sub_seed(cfg.seed, 7));

    let mut spacing = Vec::new();
    let spacing_realizations = cfg.usize("spacing_realizations")?.max(1);
    for m in cfg.usize_list("spacing_n")? {
        let vals = (0..spacing_realizations)
            .map(|r| {
                let model = ImperfectionModel {
                    n: m,
                    topology: Topology::square_grid(m),
                    realization: r as u64,
                    ..template.clone()
                };
                diagonalize_model(&model, Want::Eigenvalues)
                    .and_then(|s| mean_level_spacing(&s.eigenvalues, 0.8))
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, se) = mean_stderr(&vals);
        spacing.push((m, mean, se));
    }
    let spacing_ratios: Vec<f64> = spacing.windows(2).map(|w| w[1].1 / w[0].1).collect();

    let mut map_csv = Csv::new(&["E_minus_E0", "J_over_delta", "S"]);
    let mut rows_csv = Csv::new(&[
        "J_over_delta",
        "S_center",
        "S_center_se",
        "S_edge",
        "S_edge_se",
        "r",
        "r_se",
    ]);
    for row in &scan.rows {
        for (b, s) in row.map.iter().enumerate() {
            let e = (b as f64 + 0.5) / MAP_BINS as f64 * scan.energy_span;
            map_csv.row(vec![e.into(), (row.j / delta).into(), (*s).into()]);
        }
        rows_csv.row(vec![
            (row.j / delta).into(),
            row.center.0.into(),
            row.center.1.into(),
            row.edge.0.into(),
            row.edge.1.into(),
            row.mean_r.0.into(),
            row.mean_r.1.into(),
        ]);
    }
    rep.artifacts.add("fig4_map.csv", map_csv.into_bytes());
    rep.artifacts.add("fig4_border.csv", rows_csv.into_bytes());
    let image: Vec<f64> = scan
        .rows
        .iter()
        .rev()
        .flat_map(|r| r.map.iter().copied())
        .collect();
    rep.artifacts.add(
        "fig4_melting.ppm",
        heatmap_ppm(MAP_BINS, scan.rows.len(), &image),
    );
    let mut sp_csv = Csv::new(&["n", "mean_spacing", "stderr", "ratio_to_previous"]);
    for (k, (m, mean, se)) in spacing.iter().enumerate() {
        let ratio = if k > 0 {
            Some(spacing_ratios[k - 1])
        } else {
            None
        };
        sp_csv.row(vec![
            (*m).into(),
            (*mean).into(),
            (*se).into(),
            ratio.into(),
        ]);
    }
    rep.artifacts.add("fig4_spacing.csv", sp_csv.into_bytes());
    let mut r_csv = Csv::new(&["J_over_delta", "r", "r_se"]);
    for (j, r, se) in [r_low, r_high] {
        r_csv.row(vec![j.into(), r.into(), se.into()]);
    }
    rep.artifacts.add("fig4_r.csv", r_csv.into_bytes());

    let plateau = scan.reference.plateau;
    rep.metric("plateau_bits", plateau);
    rep.metric("random_matrix_r", scan.reference.mean_r);
    rep.metric("poisson_r", poisson_r);
    rep.metric("delta_over_n", 1.0 / n as f64);
    match scan.j_c {
        Some(j) => rep.metric("J_c_over_delta", j / delta),
        None => rep.note("J grid does not bracket the half-plateau crossing"),
    }
    let zero_row = scan.rows.iter().find(|r| r.j == 0.0);
    let zero_max = zero_row.map_or(f64::NAN, |r| {
        r.map
            .iter()
            .copied()
            .fold(r.center.0.max(r.edge.0), f64::max)
    });
    rep.check("J=0 entropy", zero_max, "0", zero_max == 0.0);
    let centre_first = scan
        .rows
        .iter()
        .filter(|r| r.j > 0.0)
        .all(|r| r.center.0 > r.edge.0);
    rep.check(
        "band-centre melts first",
        centre_first,
        "centre > edge at every J > 0",
        centre_first,
    );
    let inversions = scan
        .rows
        .windows(2)
        .filter(|w| {
            w[1].center.0 + (w[0].center.1.powi(2) + w[1].center.1.powi(2)).sqrt() < w[0].center.0
        })
        .count();
    rep.check(
        "centre entropy monotone in J",
        inversions,
        "<= 1 inversion beyond error bars",
        inversions <= 1,
    );
    let jc = scan.j_c.map_or(f64::NAN, |j| j / delta);
    rep.check("J_c / delta", jc, "0.3 +- 0.15", (jc - 0.3).abs() <= 0.15);
    let sep = (r_high.1 - r_low.1) / (r_low.2.powi(2) + r_high.2.powi(2)).sqrt();
    rep.metric("r_low", format!("{} +- {}", r_low.1, r_low.2));
    rep.metric("r_high", format!("{} +- {}", r_high.1, r_high.2));
    rep.check("<r> crossover", sep, ">= 5 standard errors", sep >= 5.0);
    if let Some(last) = scan.rows.last() {
        let ok = last.center.0 >= 0.8 * plateau && last.edge.0 < 0.5 * plateau;
        rep.check(
            format!("entropy at J/delta={}", last.j / delta),
            format!("centre {:.3}, edge {:.3}", last.center.0, last.edge.0),
            format!(
                "centre >= {:.3}, edge < {:.3}",
                0.8 * plateau,
                0.5 * plateau
            ),
            ok,
        );
    }
    let ratios_ok = spacing_ratios.iter().all(|r| (0.4..=0.6).contains(r));
    rep.check(
        "level spacing halves per qubit",
        format!("{spacing_ratios:.3?}"),
        "each ratio in [0.4, 0.6]",
        ratios_ok,
    );
    Ok(Fig4Result {
        scan,
        r_low,
        r_high,
        poisson_r,
        spacing,
        spacing_ratios,
        report: rep,
    })
}
