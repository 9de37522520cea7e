//! Run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use qst_core::abqt::AbqtConfig;
use qst_core::naqst::EpisodeConfig;
use qst_core::schedule;
use qst_core::standard::OrientationMode;
use qst_core::{PovmFamily, StatePrior};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const MAX_TOTAL_COPIES: u64 = 10_000_000;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    #[default]
    Standard,
    Abqt,
    Naqst,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Standard => "standard",
            Algorithm::Abqt => "abqt",
            Algorithm::Naqst => "naqst",
        }
    }
}

/// Copies per step: either explicit or `total` split geometrically over `steps`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Explicit(Vec<u64>),
    Geometric { total: u64, steps: usize },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Geometric { total: 10_000, steps: 12 }
    }
}

impl ScheduleSpec {
    pub fn resolve(&self) -> Result<Vec<u64>> {
        match self {
            ScheduleSpec::Explicit(v) => Ok(v.clone()),
            ScheduleSpec::Geometric { total, steps } => {
                schedule::geometric(*total, *steps).map_err(|e| HarnessError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub family: PovmFamily,
    pub adaptive: bool,
    pub n_bank: usize,
    pub schedule: ScheduleSpec,
    pub trials: usize,
    pub seed: u64,
    pub prior: StatePrior,
    pub n_qubits: usize,
    pub orientation: OrientationMode,
    pub n_candidates: usize,
    pub mh_steps: usize,
    pub mh_step_scale: f64,
    pub n_resample: usize,
    pub n_steps: usize,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Standard,
            family: PovmFamily::Sic,
            adaptive: false,
            n_bank: 100,
            schedule: ScheduleSpec::default(),
            trials: 1,
            seed: 0,
            prior: StatePrior::MixedHs,
            n_qubits: 2,
            orientation: OrientationMode::Fixed,
            n_candidates: 40,
            mh_steps: 10,
            mh_step_scale: 0.1,
            n_resample: 16,
            n_steps: 4,
            checkpoint: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sched = self.schedule.resolve()?;
        if sched.is_empty() {
            return Err(HarnessError::Config("schedule is empty".into()));
        }
        let total: u64 = sched.iter().sum();
        if total > MAX_TOTAL_COPIES {
            return Err(HarnessError::Config(format!("schedule total {total} exceeds {MAX_TOTAL_COPIES}")));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.n_bank == 0 || self.n_qubits == 0 || self.n_candidates == 0 {
            return Err(HarnessError::Config("n_bank, n_qubits and n_candidates must be positive".into()));
        }
        if self.algorithm == Algorithm::Naqst && self.checkpoint.is_none() {
            return Err(HarnessError::Config("naqst needs a checkpoint".into()));
        }
        Ok(())
    }

    pub fn resolved_schedule(&self) -> Result<Vec<u64>> {
        self.schedule.resolve()
    }

    /// Canonical JSON of the resolved configuration; the output path is left
    /// out so that it does not affect the hash.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        if let Ok(s) = c.schedule.resolve() {
            c.schedule = ScheduleSpec::Explicit(s);
        }
        serde_json::to_string(&c).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn abqt(&self) -> AbqtConfig {
        AbqtConfig {
            family: self.family,
            adaptive: self.adaptive,
            n_bank: self.n_bank,
            n_candidates: self.n_candidates,
            prior: self.prior,
            mh_steps: self.mh_steps,
            step_scale: self.mh_step_scale,
            ..AbqtConfig::default()
        }
    }

    pub fn episode(&self) -> Result<EpisodeConfig> {
        Ok(EpisodeConfig {
            schedule: self.resolved_schedule()?,
            n_bank: self.n_bank,
            n_resample: self.n_resample,
            n_steps: self.n_steps,
            family: self.family,
            adaptive: self.adaptive,
            n_candidates: self.n_candidates,
            n_qubits: self.n_qubits,
            prior: self.prior,
        })
    }
}
