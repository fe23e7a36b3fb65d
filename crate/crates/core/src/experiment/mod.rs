//! Reproducible experiment runs: configuration, dispatch and output files.
//!
//! Every run writes its CSV/PPM files plus `manifest.txt`, which holds the fully resolved
//! configuration. Feeding the manifest back as a config file reproduces the files
//! byte-for-byte.

mod config;
mod figures;
mod output;
mod sweeps;
mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentId, Preset, DEFAULT_SEED};
pub use figures::{
    cat_mask, count_oscillations, run_fig1, run_fig2, run_fig3, run_fig4, strip_mask, Fig1Result,
    Fig2Result, Fig3Result, Fig4Result, WellDecay,
};
pub use output::{colormap, heatmap_ppm, Artifacts, Cell, Check, Csv, RunReport, SERIES_HEADER};
pub use sweeps::{
    fidelity_decay_rate, run_localization, run_scaling_fidelity, run_scaling_gamma,
    LocalizationResult, ScalingPoint, ScalingResult,
};
pub use verify::{
    adder_failures, cat_permutation_error, mutated_qft, noise_infidelity, qft_oracle_error,
    run_verify,
};

use crate::Result;

/// Runs one experiment in memory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    Ok(match cfg.id {
        ExperimentId::Fig1 => run_fig1(cfg)?.report,
        ExperimentId::Fig2 => run_fig2(cfg)?.report,
        ExperimentId::Fig3 => run_fig3(cfg)?.report,
        ExperimentId::Fig4 => run_fig4(cfg)?.report,
        ExperimentId::ScalingFidelity => run_scaling_fidelity(cfg)?.report,
        ExperimentId::ScalingGamma => run_scaling_gamma(cfg)?.report,
        ExperimentId::Localization => run_localization(cfg)?.report,
        ExperimentId::Verify => run_verify(cfg)?,
    })
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub report: RunReport,
    pub manifest: PathBuf,
    pub wall_clock_s: f64,
}

/// Runs an experiment and writes its files and `manifest.txt` into `out_dir`.
pub fn execute(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let report = run(cfg)?;
    let wall_clock_s = start.elapsed().as_secs_f64();
    fs::create_dir_all(out_dir)?;
    for (name, bytes) in report.artifacts.files() {
        fs::write(out_dir.join(name), bytes)?;
    }
    let mut text = String::new();
    for (k, v) in cfg.entries() {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str(&format!("run.version = {}\n", env!("CARGO_PKG_VERSION")));
    text.push_str(&format!("run.wall_clock_s = {wall_clock_s:.3}\n"));
    for (k, v) in &report.gate_counts {
        text.push_str(&format!("run.gates.{k} = {v}\n"));
    }
    for (name, _) in report.artifacts.files() {
        text.push_str(&format!("run.output = {name}\n"));
    }
    let manifest = out_dir.join("manifest.txt");
    fs::write(&manifest, text)?;
    Ok(RunSummary {
        report,
        manifest,
        wall_clock_s,
    })
}
