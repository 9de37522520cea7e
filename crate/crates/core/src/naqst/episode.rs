use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use super::{cell_step, CellState, EpisodeConfig, ParticleBank, WorkCounter};
use crate::adapt::choose_povm;
use crate::error::Result;
use crate::nn::ModelParameters;
use crate::povm::{build_povm, random_orientation};
use crate::qcore::{hs_distance, DensityMatrix};
use crate::rng::stream;
use crate::source::{MeasurementRecord, MeasurementSource, SimulatedSource, StepOutput};

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub outputs: Vec<StepOutput>,
    /// Kernel counts per step.
    pub work: Vec<WorkCounter>,
    /// Sum over steps of the Hilbert-Schmidt distance to `truth`, when given.
    pub loss: Option<f64>,
}

/// Runs every cell of an episode against `source`. `truth` is used only to
/// accumulate the loss.
pub fn run_episode<S: MeasurementSource, R: Rng + ?Sized>(
    source: &mut S,
    config: &EpisodeConfig,
    params: &ModelParameters,
    rng: &mut R,
    truth: Option<&DensityMatrix>,
) -> Result<EpisodeResult> {
    config.validate()?;
    let bank = ParticleBank::from_prior(config.prior, config.dim(), config.n_bank, rng)?;
    let mut state = CellState::new(bank);
    let mut outputs = Vec::with_capacity(config.schedule.len());
    let mut work = Vec::with_capacity(config.schedule.len());
    let mut loss = truth.map(|_| 0.0);
    let mut cumulative = 0;
    for (t, &copies) in config.schedule.iter().enumerate() {
        let start = Instant::now();
        let mut counter = WorkCounter::default();
        let povm = if config.adaptive {
            counter.heuristic_evaluations += config.n_candidates as u64;
            counter.born_evaluations += (config.n_candidates * (config.n_bank + 1)) as u64;
            let particles = state.bank.particles();
            choose_povm(particles, state.bank.weights(), config.family, config.n_candidates, rng)?.0
        } else {
            build_povm(config.family, &random_orientation(rng, config.n_qubits))
        };
        let povm = Arc::new(povm);
        let sampled = Instant::now();
        let counts = source.measure(&povm, copies)?;
        let sampling = sampled.elapsed();
        let record = MeasurementRecord::new(povm.clone(), counts)?;
        let (next, out) = cell_step(state, &record, params, config.n_resample, config.n_steps, rng, &mut counter)?;
        state = next;
        cumulative += copies;
        let wall = start.elapsed().saturating_sub(sampling).as_secs_f64();
        if let (Some(l), Some(truth)) = (loss.as_mut(), truth) {
            *l += hs_distance(&out.estimate, truth);
        }
        source.report_estimate(t, &out.estimate, out.confidence)?;
        outputs.push(StepOutput {
            step: t,
            copies,
            cumulative_copies: cumulative,
            estimate: out.estimate,
            confidence: out.confidence,
            angles: povm.angles().clone(),
            wall_seconds: wall,
        });
        work.push(counter);
    }
    source.finish()?;
    Ok(EpisodeResult { outputs, work, loss })
}

/// Deployment: the same loop against an arbitrary source, no loss.
pub fn reconstruct<S: MeasurementSource, R: Rng + ?Sized>(
    source: &mut S,
    config: &EpisodeConfig,
    params: &ModelParameters,
    rng: &mut R,
) -> Result<Vec<StepOutput>> {
    Ok(run_episode(source, config, params, rng, None)?.outputs)
}

/// Training episode on a simulated source around `truth`. Sampling and the
/// estimator draw from separate streams of `seed`, so parameter changes that
/// alter the requested POVMs do not shift the estimator's randomness.
pub fn run_episode_train(truth: &DensityMatrix, config: &EpisodeConfig, params: &ModelParameters, seed: u64) -> Result<f64> {
    let mut source = SimulatedSource::new(truth.clone(), stream(seed, 1));
    let result = run_episode(&mut source, config, params, &mut stream(seed, 2), Some(truth))?;
    Ok(result.loss.unwrap_or(0.0))
}
