//! `qchaos`: run an experiment and write its CSV/PPM files and manifest.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qchaos::experiment::{execute, ExperimentConfig, ExperimentId, Preset};
use qchaos::Error;

#[derive(Parser, Debug)]
#[command(
    name = "qchaos",
    version,
    about = "Chaotic maps on a noisy quantum computer simulator"
)]
struct Args {
    /// fig1, fig2, fig3, fig4, scaling-fidelity, scaling-gamma, localization or verify.
    experiment: ExperimentId,

    /// Number of qubits per lattice coordinate (system qubits for the kicked maps).
    #[arg(long)]
    n: Option<String>,
    /// Torus height of the cat map.
    #[arg(long = "L")]
    l: Option<String>,
    /// Kick strength.
    #[arg(long = "K")]
    k: Option<String>,
    /// Double-well minimum position.
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    hbar: Option<String>,
    /// Per-gate noise amplitude.
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Memory cap in bytes for a single state or matrix.
    #[arg(long)]
    memory_cap: Option<String>,
    /// full or reduced.
    #[arg(long)]
    preset: Option<Preset>,
    /// key = value file; a previous run's manifest.txt works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any parameter, e.g. --set t_max=50. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory [default: results/<experiment>].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn entries(args: &Args) -> Result<Vec<(String, String)>, Error> {
    let mut out = match &args.config {
        Some(path) => ExperimentConfig::parse_entries(&fs::read_to_string(path)?)?,
        None => Vec::new(),
    };
    if let Some(p) = args.preset {
        out.push(("preset".into(), p.name().into()));
    }
    let keys = ExperimentConfig::keys(args.experiment);
    let n_key = if keys.contains(&"n_sys") {
        "n_sys"
    } else {
        "n"
    };
    let flags = [
        (n_key, &args.n),
        ("L", &args.l),
        ("K", &args.k),
        ("a", &args.a),
        ("hbar", &args.hbar),
        ("epsilon", &args.epsilon),
        ("seed", &args.seed),
        ("memory_cap", &args.memory_cap),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            out.push((key.into(), v.clone()));
        }
    }
    for s in &args.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("--set expects KEY=VALUE, got '{s}'"),
        })?;
        out.push((k.trim().into(), v.trim().into()));
    }
    Ok(out)
}

fn run(args: &Args) -> Result<bool, Error> {
    let cfg = ExperimentConfig::resolve(args.experiment, &entries(args)?)?;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(args.experiment.name()));
    let summary = execute(&cfg, &dir)?;
    print!("{}", summary.report.render());
    println!(
        "wrote {} files and {} in {:.1} s",
        summary.report.artifacts.files().len(),
        summary.manifest.display(),
        summary.wall_clock_s
    );
    Ok(summary.report.passed())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if args.experiment == ExperimentId::Verify => ExitCode::from(2),
        Ok(false) => ExitCode::SUCCESS,
        Err(e @ Error::Resource { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
