//! Flat `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::Path;

use boxcycle::manybody::HolonomyMode;
use boxcycle::{BoxParams, CycleSpec, Ramp, WallConfig, WallStrength};

use crate::CliError;

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("box.L", "1"),
    ("box.m", "1"),
    ("box.hbar", "1"),
    ("cycle.x0", "0.4703"),
    ("cycle.x1", ""),
    ("cycle.g_scale", "10"),
    ("cycle.g_cap", "10000"),
    ("cycle.samples_per_stage", "100"),
    ("cycle.ramp", "rational"),
    ("wall.g", "inf"),
    ("wall.X", "0.4703"),
    ("levels.M", "4"),
    ("particles.N", "1"),
    ("basis.cutoff", "4"),
    ("interaction.lambda", "0"),
    ("holonomy.mode", "NONINTERACTING"),
    ("sweep.T", "100"),
    ("sweep.tolerance", "1e-8"),
    ("grid.sigma", "0.02"),
    ("grid.modes", "6"),
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn valid_keys() -> String {
    KEYS.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(config_error(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    i + 1
                )));
            };
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(config_error(format!(
                "unknown key {key:?}; valid keys: {}",
                valid_keys()
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let Some((k, v)) = assignment.split_once('=') else {
            return Err(config_error(format!(
                "--set expects key=value, got {assignment:?}"
            )));
        };
        self.set(k.trim(), v.trim())
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| KEYS.iter().find(|(k, _)| *k == key).unwrap().1)
    }

    fn num(&self, key: &str) -> Result<f64, CliError> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| config_error(format!("{key}: cannot parse {v:?} as a number")))
    }

    fn count(&self, key: &str) -> Result<usize, CliError> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| config_error(format!("{key}: cannot parse {v:?} as a count")))
    }

    /// Every key with its effective value, defaults filled in.
    pub fn snapshot(&self) -> Result<BTreeMap<String, String>, CliError> {
        let spec = self.spec()?;
        let mut out = BTreeMap::new();
        for (k, _) in KEYS {
            let v = match *k {
                "cycle.x1" => boxcycle::report::fmt_g(spec.x1),
                _ => self.raw(k).to_string(),
            };
            out.insert(k.to_string(), v);
        }
        Ok(out)
    }

    pub fn params(&self) -> Result<BoxParams, CliError> {
        Ok(BoxParams::new(
            self.num("box.L")?,
            self.num("box.m")?,
            self.num("box.hbar")?,
        )?)
    }

    pub fn spec(&self) -> Result<CycleSpec, CliError> {
        let params = self.params()?;
        let x0 = self.num("cycle.x0")? * params.length;
        let x1 = if self.raw("cycle.x1").is_empty() {
            params.length - x0
        } else {
            self.num("cycle.x1")? * params.length
        };
        let spec = CycleSpec {
            g_scale: self.num("cycle.g_scale")?,
            g_cap: self.num("cycle.g_cap")?,
            samples_per_stage: self.count("cycle.samples_per_stage")?,
            ramp: Ramp::parse(self.raw("cycle.ramp"))?,
            ..CycleSpec::canonical(&params)
        }
        .with_positions(x0, x1);
        spec.validate(&params)?;
        Ok(spec)
    }

    pub fn wall(&self) -> Result<WallConfig, CliError> {
        let params = self.params()?;
        let x = self.num("wall.X")? * params.length;
        let wall = match WallStrength::parse(self.raw("wall.g"))? {
            WallStrength::Infinite => WallConfig::infinite(x),
            WallStrength::Finite(g) => WallConfig::finite(g, x),
        };
        wall.validate(&params)?;
        Ok(wall)
    }

    pub fn levels(&self) -> Result<usize, CliError> {
        self.count("levels.M")
    }

    pub fn particles(&self) -> Result<usize, CliError> {
        self.count("particles.N")
    }

    pub fn cutoff(&self) -> Result<usize, CliError> {
        self.count("basis.cutoff")
    }

    pub fn lambda(&self) -> Result<f64, CliError> {
        self.num("interaction.lambda")
    }

    pub fn mode(&self) -> Result<HolonomyMode, CliError> {
        Ok(HolonomyMode::parse(self.raw("holonomy.mode"))?)
    }

    pub fn total_time(&self) -> Result<f64, CliError> {
        self.num("sweep.T")
    }

    pub fn tolerance(&self) -> Result<f64, CliError> {
        self.num("sweep.tolerance")
    }

    pub fn sigma(&self) -> Result<f64, CliError> {
        Ok(self.num("grid.sigma")? * self.params()?.length)
    }

    pub fn grid_modes(&self) -> Result<usize, CliError> {
        self.count("grid.modes")
    }
}
