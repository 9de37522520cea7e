use std::path::PathBuf;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_episode_train, EpisodeConfig};
use crate::error::{Error, Result};
use crate::nn::{estimate_gradient, optimizer_step, AdamHyper, AdamState, ModelParameters};
use crate::qcore::{random_state, DensityMatrix};
use crate::rng::{derive_seed, stream, StreamRng};

const VALIDATION_LABEL: u64 = 0x7661_6c69_6461_7465;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episode: EpisodeConfig,
    /// Total training episodes; each antithetic probe pair uses two.
    pub episodes: usize,
    pub n_probes: usize,
    pub sigma: f64,
    pub adam: AdamHyper,
    /// Learning rate at the last iteration as a fraction of the first;
    /// the rate decays linearly in between.
    pub final_lr_fraction: f64,
    pub validation_episodes: usize,
    /// Validate every this many optimizer steps.
    pub validate_every: usize,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episode: EpisodeConfig::default(),
            episodes: 2000,
            n_probes: 8,
            sigma: 0.02,
            adam: AdamHyper::default(),
            final_lr_fraction: 1.0,
            validation_episodes: 16,
            validate_every: 10,
            checkpoint: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStat {
    pub iteration: usize,
    pub episodes: usize,
    pub mean_loss: f64,
    pub validation: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Parameters with the lowest validation loss seen.
    pub params: ModelParameters,
    pub best_validation: f64,
    pub initial_validation: f64,
    pub episodes: usize,
    pub history: Vec<IterationStat>,
}

/// The hidden state of a training episode is a function of its seed.
pub fn episode_truth(config: &EpisodeConfig, seed: u64) -> DensityMatrix {
    random_state(config.prior, config.dim(), &mut stream(seed, 0))
}

fn episode_loss(config: &EpisodeConfig, base: &ModelParameters, values: &[f64], seed: u64) -> f64 {
    let params = match base.with_values(values.to_vec()) {
        Ok(p) => p,
        Err(_) => return f64::NAN,
    };
    let truth = episode_truth(config, seed);
    run_episode_train(&truth, config, &params, seed).unwrap_or(f64::NAN)
}

/// Mean loss over the fixed validation seeds of `seed`.
pub fn validation_loss(config: &TrainConfig, params: &ModelParameters) -> f64 {
    let losses: Vec<f64> = (0..config.validation_episodes as u64)
        .into_par_iter()
        .map(|k| episode_loss(&config.episode, params, &params.values, derive_seed(config.seed ^ VALIDATION_LABEL, k)))
        .collect();
    losses.iter().sum::<f64>() / losses.len().max(1) as f64
}

/// Evolution-strategies training with adaptive-moment steps.
pub fn train(config: &TrainConfig, params0: &ModelParameters) -> Result<TrainReport> {
    config.episode.validate()?;
    if config.episodes == 0 || config.n_probes == 0 || config.sigma.is_nan() || config.sigma <= 0.0 {
        return Err(Error::InvalidConfig("episodes, n_probes and sigma must be positive".into()));
    }
    if !(config.final_lr_fraction > 0.0 && config.final_lr_fraction <= 1.0) {
        return Err(Error::InvalidConfig("final_lr_fraction must lie in (0, 1]".into()));
    }
    params0.validate()?;
    let per_iter = 2 * config.n_probes;
    let iterations = config.episodes.div_ceil(per_iter);
    let mut rng = StreamRng::seed_from_u64(derive_seed(config.seed, 1));
    let mut values = params0.values.clone();
    let mut adam = AdamState::new(values.len());
    let initial = validation_loss(config, params0);
    let mut best = (initial, params0.clone());
    let mut history = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let est = estimate_gradient(
            |p, seed| episode_loss(&config.episode, params0, p, seed),
            &values,
            &mut rng,
            config.n_probes,
            config.sigma,
        );
        if est.used_probes > 0 {
            let progress = it as f64 / (iterations.max(2) - 1) as f64;
            let hyper = AdamHyper {
                learning_rate: config.adam.learning_rate * (1.0 - (1.0 - config.final_lr_fraction) * progress),
                ..config.adam
            };
            optimizer_step(&mut values, &est.grad, &mut adam, &hyper);
        }
        let last = it + 1 == iterations;
        let validation = if (it + 1) % config.validate_every.max(1) == 0 || last {
            let candidate = params0.with_values(values.clone())?;
            let v = validation_loss(config, &candidate);
            if v < best.0 {
                best = (v, candidate);
                if let Some(path) = &config.checkpoint {
                    best.1.save(path)?;
                }
            }
            Some(v)
        } else {
            None
        };
        log::info!(
            "iteration {}/{}: probe loss {:.4}, validation {:?}",
            it + 1,
            iterations,
            est.mean_loss,
            validation
        );
        history.push(IterationStat {
            iteration: it,
            episodes: (it + 1) * per_iter,
            mean_loss: est.mean_loss,
            validation,
        });
    }
    if let Some(path) = &config.checkpoint {
        best.1.save(path)?;
    }
    Ok(TrainReport {
        params: best.1,
        best_validation: best.0,
        initial_validation: initial,
        episodes: iterations * per_iter,
        history,
    })
}
