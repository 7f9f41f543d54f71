//! Run configuration: a flat parameter table plus an optional `[run]` table.
//!
//! ```toml
//! g0_mhz = 2.8
//! reflectivity = 0.99999
//!
//! [run]
//! seed = 7
//! samples = 2000
//! grid = "-3:3:121"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use faraday_cavity::params::{mhz, ParamFile, ResolvedParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const OUT_DIR_ENV: &str = "FARADAY_OUT";
pub const DEFAULT_OUT_DIR: &str = "out";
pub const MANIFEST_NAME: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Fig2,
    Fig4,
    Fig5,
    Fig6,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fig2 => "fig2",
            Command::Fig4 => "fig4",
            Command::Fig5 => "fig5",
            Command::Fig6 => "fig6",
            Command::Validate => "validate",
        }
    }

    /// Stochastic sample count used when none is given: drop positions for
    /// fig2, selected trajectories for fig4 and fig5.
    pub fn default_samples(self) -> usize {
        match self {
            Command::Fig2 => 1000,
            Command::Fig4 => 10_000,
            Command::Fig5 => 2000,
            Command::Fig6 | Command::Validate => 0,
        }
    }

    pub fn default_grid(self) -> GridSpec {
        match self {
            Command::Fig2 => GridSpec::new(-6.0, 6.0, 121),
            _ => GridSpec::new(-3.0, 3.0, 121),
        }
    }
}

/// Uniform detuning grid `START:STOP:N` in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start_mhz: f64,
    pub stop_mhz: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(start_mhz: f64, stop_mhz: f64, points: usize) -> Self {
        Self {
            start_mhz,
            stop_mhz,
            points,
        }
    }

    /// Angular detunings (rad/s).
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![mhz(self.start_mhz)],
            n => (0..n)
                .map(|i| {
                    let f = self.start_mhz + (self.stop_mhz - self.start_mhz) * i as f64 / (n - 1) as f64;
                    mhz(f)
                })
                .collect(),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start_mhz, self.stop_mhz, self.points)
    }
}

impl FromStr for GridSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Config(format!("grid '{s}' is not START:STOP:N (MHz)"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let points: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(start.is_finite() && stop.is_finite()) {
            return Err(bad());
        }
        Ok(Self::new(start, stop, points))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub params: ParamFile,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = s.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let run = match table.remove("run") {
            Some(toml::Value::Table(t)) => t
                .try_into::<RunSection>()
                .map_err(|e| CliError::Config(format!("[run]: {e}")))?,
            Some(_) => return Err(CliError::Config("'run' must be a table".into())),
            None => RunSection::default(),
        };
        let params = table
            .try_into::<ParamFile>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { params, run })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let mut table = toml::Table::try_from(&self.params).expect("parameter table serializes");
        let run = toml::Table::try_from(&self.run).expect("run table serializes");
        if !run.is_empty() {
            table.insert("run".into(), toml::Value::Table(run));
        }
        toml::to_string(&table).expect("table serializes")
    }
}

/// Command-line overrides; `None` leaves the config value in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<String>,
}

/// Everything a command needs, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub command: Command,
    pub params: ResolvedParams,
    pub out: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub grid: GridSpec,
}

impl Resolved {
    /// Manifest that reproduces this run when passed back as `--config`.
    pub fn manifest(&self) -> RunConfig {
        RunConfig {
            params: ParamFile::from_resolved(&self.params),
            run: RunSection {
                command: Some(self.command),
                seed: Some(self.seed),
                samples: Some(self.samples),
                grid: Some(self.grid.to_string()),
            },
        }
    }
}

pub fn resolve(command: Command, config: &RunConfig, overrides: &Overrides) -> Result<Resolved, CliError> {
    if let Some(c) = config.run.command {
        if c != command {
            return Err(CliError::Config(format!(
                "config was written for '{}', not '{}'",
                c.name(),
                command.name()
            )));
        }
    }
    let params = config.params.resolve().map_err(|e| CliError::Config(e.to_string()))?;
    let grid = match overrides.grid.as_ref().or(config.run.grid.as_ref()) {
        Some(s) => s.parse()?,
        None => command.default_grid(),
    };
    if grid.points == 0 {
        return Err(CliError::Config("grid has no points".into()));
    }
    let samples = overrides
        .samples
        .or(config.run.samples)
        .unwrap_or_else(|| command.default_samples());
    if samples == 0 && matches!(command, Command::Fig2 | Command::Fig4 | Command::Fig5) {
        return Err(CliError::Config("samples must be at least 1".into()));
    }
    let out = overrides.out.clone().unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    });
    Ok(Resolved {
        command,
        params,
        out,
        seed: overrides.seed.or(config.run.seed).unwrap_or(0),
        samples,
        grid,
    })
}
