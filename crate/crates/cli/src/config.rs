//! Run configuration: one TOML file, optionally patched with `--set` overrides.

use std::path::{Path, PathBuf};

use ionladder::ed::sweep::{default_momenta, SweepGrid};
use ionladder::ed::Tail;
use ionladder::spinphonon::{Propagator, SpinConfig};
use ionladder::{LaserConfig, TrapConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<TrapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laser: Option<LaserSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ed: Option<EdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_scenario() -> String {
    "unnamed".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub n_ions: usize,
    pub alpha_x: f64,
    pub alpha_y: f64,
}

/// Either an explicit `kx`, or `kx_pair = j` for the wavevector giving the
/// pair `(j, j+1)` a phase of `kx_harmonic * pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kx_pair: Option<usize>,
    #[serde(default = "one")]
    pub kx_harmonic: f64,
    pub ky: f64,
    pub rabi: f64,
    pub beat: f64,
    pub ldy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_ratio: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub initial: String,
    /// Defaults to `5 / J_eff`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    pub dt_out: f64,
    #[serde(default = "two")]
    pub max_total_phonons: usize,
    #[serde(default = "spectral")]
    pub propagator: Propagator,
    #[serde(default = "yes")]
    pub compare_effective: bool,
}

fn two() -> usize {
    2
}

fn spectral() -> Propagator {
    Propagator::Spectral
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// J1-J2 model with an optional dipolar tail.
    Parametric,
    /// Bulk-averaged couplings of the configured crystal and laser.
    Geometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdSection {
    #[serde(default = "parametric")]
    pub model: ModelKind,
    #[serde(default = "minus_one")]
    pub j1: f64,
    #[serde(default)]
    pub j2: f64,
    #[serde(default)]
    pub h: f64,
    pub n_spins: usize,
    pub r_max: usize,
    #[serde(default = "no_tail")]
    pub tail: Tail,
    #[serde(default = "one_state")]
    pub k: usize,
    #[serde(default = "default_momenta")]
    pub momenta: Vec<f64>,
}

fn parametric() -> ModelKind {
    ModelKind::Parametric
}

fn minus_one() -> f64 {
    -1.0
}

fn no_tail() -> Tail {
    Tail::None
}

fn one_state() -> usize {
    1
}

/// `(start, stop, count)` axes; `j1`, `n_spins`, `r_max`, `tail` and
/// `momenta` come from the `[ed]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub j2_over_j1: (f64, f64, usize),
    pub h_over_j2: (f64, f64, usize),
}

impl SweepSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid::linspace(self.j2_over_j1, self.h_over_j2)
    }
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        for entry in overrides {
            apply_override(&mut table, entry)?;
        }
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| config_error(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn trap(&self) -> Result<TrapConfig, CliError> {
        let t = self.trap.as_ref().ok_or_else(|| config_error("missing [trap] section"))?;
        TrapConfig::new(t.n_ions, t.alpha_x, t.alpha_y).map_err(|e| config_error(e.to_string()))
    }

    pub fn laser_section(&self) -> Result<&LaserSection, CliError> {
        self.laser.as_ref().ok_or_else(|| config_error("missing [laser] section"))
    }

    pub fn dynamics(&self) -> Result<&DynamicsSection, CliError> {
        self.dynamics.as_ref().ok_or_else(|| config_error("missing [dynamics] section"))
    }

    pub fn ed(&self) -> Result<&EdSection, CliError> {
        self.ed.as_ref().ok_or_else(|| config_error("missing [ed] section"))
    }

    pub fn sweep(&self) -> Result<&SweepSection, CliError> {
        self.sweep.as_ref().ok_or_else(|| config_error("missing [sweep] section"))
    }

    /// Checks everything a subcommand needs before any computation starts.
    pub fn validate_for(&self, command: &str) -> Result<(), CliError> {
        let needs_laser = matches!(command, "couplings" | "validate" | "dynamics");
        if matches!(command, "crystal" | "modes") || needs_laser {
            self.trap()?;
        }
        if needs_laser {
            self.laser_section()?.validate()?;
        }
        if command == "dynamics" {
            self.dynamics()?.validate(self.trap()?.n_ions)?;
        }
        if matches!(command, "ed" | "sweep") {
            let ed = self.ed()?;
            ed.validate()?;
            if ed.model == ModelKind::Geometry {
                if command == "sweep" {
                    return Err(config_error("sweep requires ed.model = \"parametric\""));
                }
                self.trap()?;
                self.laser_section()?.validate()?;
            }
        }
        if command == "sweep" {
            let s = self.sweep()?;
            for (name, (a, b, n)) in [("j2_over_j1", s.j2_over_j1), ("h_over_j2", s.h_over_j2)] {
                if n == 0 || !a.is_finite() || !b.is_finite() {
                    return Err(config_error(format!("sweep.{name} needs finite bounds and at least one point")));
                }
            }
            if self.ed()?.k == 0 {
                return Err(config_error("ed.k must be at least 1"));
            }
        }
        Ok(())
    }
}

impl LaserSection {
    fn validate(&self) -> Result<(), CliError> {
        match (self.kx, self.kx_pair) {
            (Some(_), Some(_)) => return Err(config_error("give either laser.kx or laser.kx_pair, not both")),
            (None, None) => return Err(config_error("laser needs kx or kx_pair")),
            _ => {}
        }
        if !self.kx_harmonic.is_finite() {
            return Err(config_error("laser.kx_harmonic must be finite"));
        }
        self.resolve(0.0).validate().map_err(|e| config_error(e.to_string()))
    }

    pub fn resolve(&self, kx: f64) -> LaserConfig {
        LaserConfig { kx, ky: self.ky, rabi: self.rabi, beat: self.beat, ldy: self.ldy, length_ratio: self.length_ratio }
    }
}

impl DynamicsSection {
    fn validate(&self, n_ions: usize) -> Result<(), CliError> {
        let spins: SpinConfig = self.initial.parse().map_err(|e| config_error(format!("dynamics.initial: {e}")))?;
        if spins.0.len() != n_ions {
            return Err(config_error(format!("dynamics.initial has {} spins for {n_ions} ions", spins.0.len())));
        }
        if !(self.dt_out.is_finite() && self.dt_out > 0.0) {
            return Err(config_error("dynamics.dt_out must be positive"));
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t >= 0.0) {
                return Err(config_error("dynamics.t_max must be non-negative"));
            }
        }
        if !(1..=4).contains(&self.max_total_phonons) {
            return Err(config_error("dynamics.max_total_phonons must lie in 1..=4"));
        }
        Ok(())
    }
}

impl EdSection {
    fn validate(&self) -> Result<(), CliError> {
        if self.k == 0 || self.k > ionladder::ed::MAX_EIGENPAIRS {
            return Err(config_error(format!("ed.k must lie in 1..={}", ionladder::ed::MAX_EIGENPAIRS)));
        }
        if self.momenta.iter().any(|q| !q.is_finite()) {
            return Err(config_error("ed.momenta must be finite"));
        }
        if self.model == ModelKind::Parametric {
            ionladder::ed::build_spin_model(self.j1, self.j2, self.h, self.n_spins, self.r_max, self.tail)
                .map_err(|e| config_error(e.to_string()))?;
        }
        Ok(())
    }
}

/// `section.key=value`; the value is parsed as a TOML value, falling back
/// to a bare string.
fn apply_override(table: &mut toml::Table, entry: &str) -> Result<(), CliError> {
    let (path, raw) = entry.split_once('=').ok_or_else(|| config_error(format!("override `{entry}` lacks `=`")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut current = table;
    for key in parents {
        let entry = current.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{path}`: `{key}` is not a section")))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}
