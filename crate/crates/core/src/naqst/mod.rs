//! Neural adaptive tomography: a recurrent cell that reweights, resamples
//! and perturbs a particle bank using learned heads, and combines the
//! per-step guesses into a running estimate.

mod cell;
mod episode;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::PovmFamily;
use crate::qcore::{purify, random_state, DensityMatrix, Purification, StatePrior};
use crate::schedule;

pub use cell::{cell_step, resample_step, CellOutput};
pub use episode::{reconstruct, run_episode, run_episode_train, EpisodeResult};
pub use train::{episode_truth, train, validation_loss, IterationStat, TrainConfig, TrainReport};

/// Counts of the kernels an estimator step executes.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkCounter {
    pub born_evaluations: u64,
    pub perturbations: u64,
    pub forward_passes: u64,
    pub heuristic_evaluations: u64,
}

impl WorkCounter {
    pub fn total(&self) -> u64 {
        self.born_evaluations + self.perturbations + self.forward_passes + self.heuristic_evaluations
    }
}

/// Particles with their purifications, weights and perturbation sizes.
#[derive(Clone, Debug)]
pub struct ParticleBank {
    pub(crate) particles: Vec<DensityMatrix>,
    pub(crate) purifications: Vec<Purification>,
    pub(crate) weights: Vec<f64>,
    pub(crate) epsilons: Vec<f64>,
}

impl ParticleBank {
    /// Equal weights; every perturbation size set to `epsilon`.
    pub fn new(particles: Vec<DensityMatrix>, epsilon: f64) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidConfig("empty bank".into()));
        }
        let n = particles.len();
        Ok(Self {
            purifications: particles.iter().map(purify).collect(),
            particles,
            weights: vec![1.0 / n as f64; n],
            epsilons: vec![epsilon; n],
        })
    }

    pub fn from_prior<R: Rng + ?Sized>(prior: StatePrior, dim: usize, n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| random_state(prior, dim, rng)).collect(), 0.0)
    }

    pub fn particles(&self) -> &[DensityMatrix] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn set_epsilons(&mut self, epsilons: Vec<f64>) -> Result<()> {
        if epsilons.len() != self.particles.len() {
            return Err(Error::ArityMismatch {
                expected: self.particles.len(),
                got: epsilons.len(),
            });
        }
        if epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidConfig("perturbation sizes must lie in [0, 1]".into()));
        }
        self.epsilons = epsilons;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }
}

/// One step's weighted bank mean and its score.
#[derive(Clone, Debug)]
pub struct Guess {
    pub rho: DensityMatrix,
    pub score: f64,
}

/// State carried between cells.
#[derive(Clone, Debug)]
pub struct CellState {
    pub bank: ParticleBank,
    pub guesses: Vec<Guess>,
    pub step: usize,
}

impl CellState {
    pub fn new(bank: ParticleBank) -> Self {
        Self {
            bank,
            guesses: Vec::new(),
            step: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub schedule: Vec<u64>,
    pub n_bank: usize,
    pub n_resample: usize,
    pub n_steps: usize,
    pub family: PovmFamily,
    pub adaptive: bool,
    pub n_candidates: usize,
    pub n_qubits: usize,
    pub prior: StatePrior,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            schedule: schedule::doubling(50, 12),
            n_bank: 100,
            n_resample: 16,
            n_steps: 4,
            family: PovmFamily::Sic,
            adaptive: false,
            n_candidates: 40,
            n_qubits: 2,
            prior: StatePrior::MixedHs,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidConfig("schedule must have at least one step".into()));
        }
        if self.n_bank == 0 || self.n_resample == 0 || self.n_steps == 0 || self.n_candidates == 0 || self.n_qubits == 0 {
            return Err(Error::InvalidConfig("episode counts must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}
