//! Experiment identifiers, presets and `key=value` parameter resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::maps::DEFAULT_MEMORY_CAP;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    ScalingFidelity,
    ScalingGamma,
    Localization,
    Verify,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::Fig1,
        ExperimentId::Fig2,
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::ScalingFidelity,
        ExperimentId::ScalingGamma,
        ExperimentId::Localization,
        ExperimentId::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig1 => "fig1",
            ExperimentId::Fig2 => "fig2",
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::ScalingFidelity => "scaling-fidelity",
            ExperimentId::ScalingGamma => "scaling-gamma",
            ExperimentId::Localization => "localization",
            ExperimentId::Verify => "verify",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Full,
    Reduced,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Full => "full",
            Preset::Reduced => "reduced",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "reduced" => Ok(Preset::Reduced),
            _ => Err(Error::domain(format!(
                "unknown preset '{s}' (full|reduced)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Int,
    Float,
    IntList,
    FloatList,
    Word(&'static [&'static str]),
}

struct Param {
    key: &'static str,
    kind: Kind,
    full: &'static str,
    reduced: &'static str,
}

const fn p(key: &'static str, kind: Kind, full: &'static str, reduced: &'static str) -> Param {
    Param {
        key,
        kind,
        full,
        reduced,
    }
}

use Kind::{Float, FloatList, Int, IntList, Word};

const TOPOLOGIES: &[&str] = &["grid", "chain", "all_pairs"];

const FIG1: &[Param] = &[
    p("n", Int, "7", "5"),
    p("L", Int, "1", "1"),
    p("epsilon", Float, "0.01", "0.01"),
    p("epsilon_cl", Float, "0.0078125", "0.03125"),
    p("t_reverse", Int, "10", "10"),
    // Second run reversed at t_long (total 2 t_long); 0 skips it.
    p("t_long", Int, "200", "0"),
];

const FIG2: &[Param] = &[
    p("n", Int, "7", "5"),
    p("L", Int, "8", "4"),
    p("epsilon", Float, "0.01", "0.01"),
    p(
        "epsilon_cl",
        FloatList,
        "0.0001,0.00000001",
        "0.0001,0.00000001",
    ),
    p("t_reverse", Int, "35", "35"),
    p("t_total", Int, "70", "70"),
    p("strip_rows", Int, "4", "4"),
    p("orbits", Int, "1000000", "1000000"),
    p("fit_t_hi", Int, "16", "8"),
    p("d_orbits", Int, "100000", "100000"),
    p("d_t_lo", Int, "10", "10"),
    p("d_t_hi", Int, "60", "60"),
    p("breakdown", Float, "0.1", "0.1"),
];

const FIG3: &[Param] = &[
    p("n_sys", Int, "5", "5"),
    p("ancillas", Int, "1", "1"),
    p("K", Float, "0.04", "0.04"),
    p("a", Float, "1.6", "1.6"),
    p("hbar", Float, "0.39269908169872414", "0.39269908169872414"),
    p("epsilon", Float, "0.02", "0.02"),
    p("epsilon_ref", Float, "0.01", "0.01"),
    p("t_max", Int, "180", "180"),
    p("seeds", Int, "32", "16"),
];

const FIG4: &[Param] = &[
    p("n", Int, "12", "8"),
    p("delta", Float, "1", "1"),
    p("j_max", Float, "0.5", "0.5"),
    p("j_step", Float, "0.05", "0.05"),
    p("realizations", Int, "10", "10"),
    p("topology", Word(TOPOLOGIES), "grid", "grid"),
    p("field_factor", Float, "1", "1"),
    p("r_low", Float, "0.02", "0.02"),
    p("r_high", Float, "0.5", "0.5"),
    p("spacing_n", IntList, "8,9,10,11,12", "6,7,8"),
    p("spacing_realizations", Int, "20", "20"),
    p("r_realizations", Int, "10", "80"),
];

const SCALING_FIDELITY: &[Param] = &[
    p("n", Int, "6", "5"),
    p("L", Int, "1", "1"),
    p("epsilon", Float, "0.01", "0.01"),
    p("epsilons", FloatList, "0.005,0.01,0.02", "0.005,0.01,0.02"),
    p("n_list", IntList, "5,6,7", "5,6,7"),
    p("t_max", Int, "100", "60"),
    p("seeds", Int, "6", "3"),
];

const SCALING_GAMMA: &[Param] = &[
    p("n_sys", Int, "5", "5"),
    p("ancillas", Int, "1", "1"),
    p("K", Float, "0.04", "0.04"),
    p("a", Float, "1.6", "1.6"),
    p("epsilon", Float, "0.01", "0.01"),
    p("epsilons", FloatList, "0.005,0.01,0.02", "0.005,0.01,0.02"),
    p("n_sys_list", IntList, "4,5,6", "4,5"),
    p("t_max", Int, "180", "180"),
    p("seeds", Int, "16", "8"),
];

const LOCALIZATION: &[Param] = &[
    p("n_sys", Int, "8", "8"),
    p("K", Float, "5", "5"),
    p("hbar", Float, "1", "1"),
    p("t_max", Int, "200", "200"),
    p("orbits", Int, "100000", "20000"),
];

const VERIFY: &[Param] = &[
    p("qft_max", Int, "6", "6"),
    p("adder_max", Int, "5", "4"),
    p("cat_max_n", Int, "6", "4"),
    p("cat_steps", Int, "50", "50"),
    p("kicked_n", Int, "5", "5"),
    p("inject_qft_sign_error", Int, "0", "0"),
];

fn table(id: ExperimentId) -> &'static [Param] {
    match id {
        ExperimentId::Fig1 => FIG1,
        ExperimentId::Fig2 => FIG2,
        ExperimentId::Fig3 => FIG3,
        ExperimentId::Fig4 => FIG4,
        ExperimentId::ScalingFidelity => SCALING_FIDELITY,
        ExperimentId::ScalingGamma => SCALING_GAMMA,
        ExperimentId::Localization => LOCALIZATION,
        ExperimentId::Verify => VERIFY,
    }
}

pub const DEFAULT_SEED: u64 = 42;

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: ExperimentId,
    pub preset: Preset,
    pub seed: u64,
    pub memory_cap: u64,
    values: BTreeMap<&'static str, String>,
}

fn check_value(key: &str, kind: Kind, value: &str) -> Result<()> {
    let bad = |what: &str| Error::domain(format!("{key}: '{value}' is not {what}"));
    match kind {
        Int => value
            .parse::<usize>()
            .map(|_| ())
            .map_err(|_| bad("a non-negative integer")),
        Float => match value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(()),
            _ => Err(bad("a finite number")),
        },
        IntList => value
            .split(',')
            .try_for_each(|v| v.trim().parse::<usize>().map(|_| ()))
            .map_err(|_| bad("a comma-separated integer list")),
        FloatList => value
            .split(',')
            .try_for_each(|v| match v.trim().parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(()),
                _ => Err(()),
            })
            .map_err(|_| bad("a comma-separated number list")),
        Word(options) => {
            if options.contains(&value) {
                Ok(())
            } else {
                Err(bad(&format!("one of {}", options.join("|"))))
            }
        }
    }
}

impl ExperimentConfig {
    /// Defaults of `id` under `preset`.
    pub fn new(id: ExperimentId, preset: Preset) -> Self {
        let values = table(id)
            .iter()
            .map(|d| {
                (
                    d.key,
                    if preset == Preset::Full {
                        d.full
                    } else {
                        d.reduced
                    }
                    .to_string(),
                )
            })
            .collect();
        ExperimentConfig {
            id,
            preset,
            seed: DEFAULT_SEED,
            memory_cap: DEFAULT_MEMORY_CAP,
            values,
        }
    }

    /// Parameter keys accepted by `id`, besides `seed` and `memory_cap`.
    pub fn keys(id: ExperimentId) -> Vec<&'static str> {
        table(id).iter().map(|d| d.key).collect()
    }

    /// Builds a config from ordered `key=value` entries; later entries win. `preset` is
    /// applied first; `experiment`, if present, must name `id`; `run.*` keys are run
    /// metadata and are skipped, so a manifest is itself a valid config file.
    pub fn resolve(id: ExperimentId, entries: &[(String, String)]) -> Result<Self> {
        let preset = match entries.iter().rev().find(|(k, _)| k == "preset") {
            Some((_, v)) => v.parse()?,
            None => Preset::Full,
        };
        let mut cfg = ExperimentConfig::new(id, preset);
        for (k, v) in entries {
            if k != "preset" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::domain(format!("seed: '{value}' is not a u64")))?
            }
            "memory_cap" => {
                self.memory_cap = value.parse().map_err(|_| {
                    Error::domain(format!("memory_cap: '{value}' is not a byte count"))
                })?
            }
            "experiment" => {
                if value != self.id.name() {
                    return Err(Error::domain(format!(
                        "config is for '{value}', not '{}'",
                        self.id
                    )));
                }
            }
            "preset" => {
                if value.parse::<Preset>()? != self.preset {
                    return Err(Error::domain("preset must be set before other parameters"));
                }
            }
            k if k.starts_with("run.") => {}
            k => {
                let def = table(self.id)
                    .iter()
                    .find(|d| d.key == k)
                    .ok_or_else(|| Error::domain(format!("unknown key '{k}' for {}", self.id)))?;
                check_value(k, def.kind, value)?;
                self.values.insert(def.key, value.to_string());
            }
        }
        Ok(())
    }

    /// `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                msg: format!("expected key=value, got '{line}'"),
            })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    /// The resolved configuration as ordered `key=value` pairs.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("experiment".to_string(), self.id.name().to_string()),
            ("preset".to_string(), self.preset.name().to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("memory_cap".to_string(), self.memory_cap.to_string()),
        ];
        out.extend(
            table(self.id)
                .iter()
                .map(|d| (d.key.to_string(), self.values[d.key].clone())),
        );
        out
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("{} has no parameter '{key}'", self.id))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.raw(key)
            .parse()
            .map_err(|_| Error::domain(format!("{key} is not an integer")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.raw(key)
            .parse()
            .map_err(|_| Error::domain(format!("{key} is not a number")))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::domain(format!("{key} is not a number list")))
            })
            .collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.raw(key)
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::domain(format!("{key} is not an integer list")))
            })
            .collect()
    }

    pub fn word(&self, key: &str) -> &str {
        self.raw(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        assert!("fig5".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn figure_defaults() {
        let c = ExperimentConfig::new(ExperimentId::Fig1, Preset::Full);
        assert_eq!((c.usize("n").unwrap(), c.usize("L").unwrap()), (7, 1));
        assert_eq!(c.f64("epsilon").unwrap(), 0.01);
        assert_eq!(c.f64("epsilon_cl").unwrap(), 1.0 / 128.0);
        let c = ExperimentConfig::new(ExperimentId::Fig2, Preset::Reduced);
        assert_eq!((c.usize("n").unwrap(), c.usize("L").unwrap()), (5, 4));
        let c = ExperimentConfig::new(ExperimentId::Fig3, Preset::Full);
        assert_eq!(c.f64("hbar").unwrap(), 4.0 * std::f64::consts::PI / 32.0);
        assert_eq!(c.f64("K").unwrap(), 0.04);
        let c = ExperimentConfig::new(ExperimentId::Fig4, Preset::Full);
        assert_eq!(c.usize("n").unwrap(), 12);
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        let mut c = ExperimentConfig::new(ExperimentId::Fig1, Preset::Full);
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("n", "seven").is_err());
        assert!(c.set("epsilon", "inf").is_err());
        assert!(c.set("experiment", "fig2").is_err());
        c.set("run.wall_clock_s", "3.2").unwrap();
        c.set("n", "5").unwrap();
        assert_eq!(c.usize("n").unwrap(), 5);
        let mut f = ExperimentConfig::new(ExperimentId::Fig4, Preset::Full);
        assert!(f.set("topology", "ring").is_err());
        f.set("topology", "chain").unwrap();
    }

    #[test]
    fn entries_round_trip() {
        let text = "# comment\npreset=reduced\nn=6\nseed=7\n\nepsilon = 0.02\n";
        let e = ExperimentConfig::parse_entries(text).unwrap();
        let c = ExperimentConfig::resolve(ExperimentId::Fig1, &e).unwrap();
        assert_eq!(c.preset, Preset::Reduced);
        assert_eq!(c.seed, 7);
        let again = ExperimentConfig::resolve(ExperimentId::Fig1, &c.entries()).unwrap();
        assert_eq!(again, c);
        assert!(matches!(
            ExperimentConfig::parse_entries("n 7"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
