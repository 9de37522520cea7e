use rand::Rng;

use super::{CellState, Guess, ParticleBank, WorkCounter};
use crate::error::{Error, Result};
use crate::nn::{epsilon_head, particle_features, score_head, softmax, weight_head, ModelParameters, PARTICLE_FEATURES};
use crate::povm::ProductPovm;
use crate::qcore::{born_into, depurify, perturb_purification, prob_distance, DensityMatrix, DistanceMetric};
use crate::source::MeasurementRecord;

/// What one cell emits.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub estimate: DensityMatrix,
    /// Aggregation weight of this step's guess.
    pub confidence: f64,
    pub guess_weights: Vec<f64>,
}

fn born(rho: &DensityMatrix, povm: &ProductPovm, buf: &mut [f64], counter: &mut WorkCounter) -> Result<()> {
    counter.born_evaluations += 1;
    born_into(rho, povm, buf)
}

/// One keep-best round: every particle is perturbed `n_resample` times with
/// its own size and replaced by whichever candidate, itself included, has
/// Born probabilities closest in L2 to `nu`. Returns the kept distances.
pub fn resample_step<R: Rng + ?Sized>(
    bank: &mut ParticleBank,
    nu: &[f64],
    povm: &ProductPovm,
    n_resample: usize,
    rng: &mut R,
    counter: &mut WorkCounter,
) -> Result<Vec<f64>> {
    if nu.len() != povm.num_outcomes() {
        return Err(Error::ArityMismatch {
            expected: povm.num_outcomes(),
            got: nu.len(),
        });
    }
    let mut buf = vec![0.0; nu.len()];
    let mut kept = Vec::with_capacity(bank.len());
    for i in 0..bank.len() {
        born(&bank.particles[i], povm, &mut buf, counter)?;
        let mut best = prob_distance(&buf, nu, DistanceMetric::L2);
        let eps = bank.epsilons[i];
        // The kept candidate's vector is itself a purification of it, so no
        // fresh eigendecomposition is needed between rounds.
        let base = bank.purifications[i].clone();
        for _ in 0..n_resample {
            counter.perturbations += 1;
            let v = perturb_purification(&base, eps, rng);
            let rho = depurify(&v);
            born(&rho, povm, &mut buf, counter)?;
            let dist = prob_distance(&buf, nu, DistanceMetric::L2);
            if dist < best {
                best = dist;
                bank.particles[i] = rho;
                bank.purifications[i] = v;
            }
        }
        kept.push(best);
    }
    Ok(kept)
}

/// Inverse-CDF draws of `n` indices proportional to `weights`.
fn multinomial_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cum.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cum.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

/// One recurrent step on a new record.
pub fn cell_step<R: Rng + ?Sized>(
    state: CellState,
    record: &MeasurementRecord,
    params: &ModelParameters,
    n_resample: usize,
    n_steps: usize,
    rng: &mut R,
    counter: &mut WorkCounter,
) -> Result<(CellState, CellOutput)> {
    let CellState { bank, mut guesses, step } = state;
    let povm = record.povm();
    let nu = record.frequencies();
    let mut buf = vec![0.0; nu.len()];
    let mut features: Vec<[f64; PARTICLE_FEATURES]> = Vec::with_capacity(bank.len());
    for rho in &bank.particles {
        born(rho, povm, &mut buf, counter)?;
        let l1 = prob_distance(&buf, &nu, DistanceMetric::L1);
        let l2 = prob_distance(&buf, &nu, DistanceMetric::L2);
        features.push(particle_features(l1, l2, record.copies(), step));
    }
    counter.forward_passes += 2 * features.len() as u64 + 1;
    let (weights, combined) = weight_head(params, &features)?;
    let epsilons = epsilon_head(params, &features)?;
    let guess = DensityMatrix::mix(&bank.particles, &weights)?;
    let score = score_head(params, &combined, &weights, &features)?;
    if !score.is_finite() {
        return Err(Error::NonFinite("guess score".into()));
    }

    let idx = multinomial_indices(&weights, bank.len(), rng);
    let mut next = ParticleBank {
        particles: idx.iter().map(|&i| bank.particles[i].clone()).collect(),
        purifications: idx.iter().map(|&i| bank.purifications[i].clone()).collect(),
        weights: vec![1.0 / bank.len() as f64; bank.len()],
        epsilons: idx.iter().map(|&i| epsilons[i]).collect(),
    };
    for _ in 0..n_steps {
        resample_step(&mut next, &nu, povm, n_resample, rng, counter)?;
    }

    guesses.push(Guess { rho: guess, score });
    let scores: Vec<f64> = guesses.iter().map(|g| g.score).collect();
    let guess_weights = softmax(&scores);
    let rhos: Vec<DensityMatrix> = guesses.iter().map(|g| g.rho.clone()).collect();
    let estimate = DensityMatrix::mix(&rhos, &guess_weights)?;
    let confidence = *guess_weights.last().expect("at least one guess");
    Ok((
        CellState {
            bank: next,
            guesses,
            step: step + 1,
        },
        CellOutput {
            estimate,
            confidence,
            guess_weights,
        },
    ))
}
