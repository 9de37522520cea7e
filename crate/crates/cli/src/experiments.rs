//! Simulation experiments: per-trial trajectories, accuracy summaries,
//! runtime scaling and heuristic landscapes.

use std::time::Instant;

use qst_core::abqt::run_abqt;
use qst_core::adapt::{landscape_scan, LandscapePoint};
use qst_core::naqst::reconstruct;
use qst_core::nn::ModelParameters;
use qst_core::qcore::{bures_sq, hs_distance, random_state};
use qst_core::rng::{derive_seed, stream};
use qst_core::source::StepOutput;
use qst_core::standard::run_standard;
use qst_core::{schedule, DensityMatrix, MeasurementSource, OrientationAngles, SimulatedSource};
use rayon::prelude::*;

use crate::config::{Algorithm, RunConfig};
use crate::error::{HarnessError, Result};
use crate::results::{hardware_descriptor, ResultRow, SummaryRow, TimingRow};
use crate::stats::{mean, median, standard_error};

/// Seed of trial `trial`; its hidden state, the source and the estimator
/// each draw from their own stream of it.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, trial as u64)
}

pub fn trial_truth(config: &RunConfig, trial: usize) -> DensityMatrix {
    let dim = 1 << config.n_qubits;
    random_state(config.prior, dim, &mut stream(trial_seed(config.seed, trial), 0))
}

/// The simulated source of trial `trial`.
pub fn trial_source(config: &RunConfig, trial: usize) -> SimulatedSource {
    SimulatedSource::new(trial_truth(config, trial), stream(trial_seed(config.seed, trial), 1))
}

/// Loads the checkpoint named by `config`, if any.
pub fn load_params(config: &RunConfig) -> Result<Option<ModelParameters>> {
    match &config.checkpoint {
        Some(path) if config.algorithm == Algorithm::Naqst => ModelParameters::load(path)
            .map(Some)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display()))),
        _ => Ok(None),
    }
}

/// Runs the configured estimator against `source` using the estimator
/// stream of trial `trial`.
pub fn run_with_source<S: MeasurementSource>(
    config: &RunConfig,
    params: Option<&ModelParameters>,
    source: &mut S,
    trial: usize,
) -> Result<Vec<StepOutput>> {
    let sched = config.resolved_schedule()?;
    let mut rng = stream(trial_seed(config.seed, trial), 2);
    let out = match config.algorithm {
        Algorithm::Standard => run_standard(source, &sched, config.family, config.n_qubits, config.orientation, &mut rng)?,
        Algorithm::Abqt => run_abqt(source, &sched, &config.abqt(), config.n_qubits, &mut rng)?,
        Algorithm::Naqst => {
            let params = params.ok_or_else(|| HarnessError::Config("naqst needs trained parameters".into()))?;
            reconstruct(source, &config.episode()?, params, &mut rng)?
        }
    };
    Ok(out)
}

/// Counts of emitted estimates checked against the state invariants.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidityTally {
    pub checked: u64,
    pub violations: u64,
}

impl ValidityTally {
    pub fn record(&mut self, estimate: &DensityMatrix) {
        self.checked += 1;
        if estimate.validate().is_err() {
            self.violations += 1;
        }
    }

    pub fn merge(&mut self, other: ValidityTally) {
        self.checked += other.checked;
        self.violations += other.violations;
    }
}

#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    pub truth: DensityMatrix,
    pub outputs: Vec<StepOutput>,
}

impl TrialResult {
    pub fn final_bures_sq(&self) -> Result<f64> {
        let last = self.outputs.last().ok_or_else(|| HarnessError::Config("empty trajectory".into()))?;
        Ok(bures_sq(&last.estimate, &self.truth)?)
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.outputs.iter().map(|o| o.wall_seconds).sum()
    }
}

pub fn run_trial(config: &RunConfig, params: Option<&ModelParameters>, trial: usize) -> Result<TrialResult> {
    let mut source = trial_source(config, trial);
    let outputs = run_with_source(config, params, &mut source, trial)?;
    Ok(TrialResult {
        trial,
        truth: source.hidden_state().clone(),
        outputs,
    })
}

#[derive(Clone, Debug, Default)]
pub struct Simulation {
    pub trials: Vec<TrialResult>,
    pub validity: ValidityTally,
}

impl Simulation {
    pub fn final_bures_sq(&self) -> Result<Vec<f64>> {
        self.trials.iter().map(TrialResult::final_bures_sq).collect()
    }

    /// One row per trial and step, ordered by (trial, step). With `timing`
    /// off the wall-time column is zero so repeated runs compare equal.
    pub fn rows(&self, config_hash: &str, timing: bool) -> Result<Vec<ResultRow>> {
        let mut rows = Vec::new();
        for t in &self.trials {
            for o in &t.outputs {
                rows.push(ResultRow {
                    trial: t.trial,
                    step: o.step,
                    copies: o.copies,
                    cumulative_copies: o.cumulative_copies,
                    bures_sq: bures_sq(&o.estimate, &t.truth)?,
                    hs_distance: hs_distance(&o.estimate, &t.truth),
                    wall_seconds: if timing { o.wall_seconds } else { 0.0 },
                    confidence: o.confidence,
                    angles: o.angles.flat(),
                    config_hash: config_hash.to_string(),
                });
            }
        }
        Ok(rows)
    }
}

/// All trials of `config`, in parallel, in trial order.
pub fn simulate(config: &RunConfig, params: Option<&ModelParameters>) -> Result<Simulation> {
    config.validate()?;
    let trials: Vec<TrialResult> = (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(config, params, k))
        .collect::<Result<_>>()?;
    let mut validity = ValidityTally::default();
    for t in &trials {
        for o in &t.outputs {
            validity.record(&o.estimate);
        }
    }
    Ok(Simulation { trials, validity })
}

pub fn summarize(config: &RunConfig, finals: &[f64]) -> Result<SummaryRow> {
    let copies = config.resolved_schedule()?.iter().sum();
    Ok(SummaryRow {
        algorithm: config.algorithm.name().into(),
        family: config.family.name().into(),
        adaptive: config.adaptive,
        n_bank: config.n_bank,
        copies,
        trials: finals.len(),
        mean_bures_sq: mean(finals),
        se_bures_sq: standard_error(finals),
        min_bures_sq: finals.iter().copied().fold(f64::INFINITY, f64::min),
        max_bures_sq: finals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        config_hash: config.hash(),
    })
}

/// Final-step accuracy summary for every cell of `grid`.
pub fn experiment_accuracy(grid: &[RunConfig], params: Option<&ModelParameters>) -> Result<(Vec<SummaryRow>, ValidityTally)> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut validity = ValidityTally::default();
    for cell in grid {
        let sim = simulate(cell, params)?;
        validity.merge(sim.validity);
        rows.push(summarize(cell, &sim.final_bures_sq()?)?);
    }
    Ok((rows, validity))
}

/// Median analysis time of a full reconstruction for each total copy count,
/// `steps` steps each. One warmup run per point is discarded.
pub fn experiment_runtime(
    base: &RunConfig,
    params: Option<&ModelParameters>,
    totals: &[u64],
    steps: usize,
    repetitions: usize,
) -> Result<Vec<TimingRow>> {
    if repetitions < 3 {
        return Err(HarnessError::Config("at least 3 repetitions are needed".into()));
    }
    let hardware = hardware_descriptor();
    let mut rows = Vec::with_capacity(totals.len());
    for &total in totals {
        let cfg = RunConfig {
            schedule: crate::config::ScheduleSpec::Explicit(
                schedule::geometric(total, steps).map_err(|e| HarnessError::Config(e.to_string()))?,
            ),
            ..base.clone()
        };
        run_trial(&cfg, params, 0)?;
        let mut times = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let start = Instant::now();
            let r = run_trial(&cfg, params, rep + 1)?;
            let analysis = r.total_wall_seconds();
            log::debug!("{} N={total} rep {rep}: {analysis:.4}s of {:.4}s", cfg.algorithm.name(), start.elapsed().as_secs_f64());
            times.push(analysis);
        }
        rows.push(TimingRow {
            algorithm: cfg.algorithm.name().into(),
            copies: total,
            steps,
            repetitions,
            median_seconds: median(&times),
            hardware: hardware.clone(),
        });
    }
    Ok(rows)
}

/// Heuristic values over the X-angles of qubits 0 and 1 for a uniformly
/// weighted bank of `n_bank` prior samples.
pub fn landscape(config: &RunConfig, resolution: usize) -> Result<Vec<LandscapePoint>> {
    if config.n_qubits < 2 {
        return Err(HarnessError::Config("landscape needs at least two qubits".into()));
    }
    let dim = 1 << config.n_qubits;
    let mut rng = stream(config.seed, 3);
    let bank: Vec<DensityMatrix> = (0..config.n_bank).map(|_| random_state(config.prior, dim, &mut rng)).collect();
    let weights = vec![1.0 / bank.len() as f64; bank.len()];
    Ok(landscape_scan(
        &bank,
        &weights,
        config.family,
        &OrientationAngles::zeros(config.n_qubits),
        resolution,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScheduleSpec;

    fn small(algorithm: Algorithm) -> RunConfig {
        RunConfig {
            algorithm,
            schedule: ScheduleSpec::Explicit(vec![100, 200, 400]),
            trials: 3,
            n_bank: 10,
            seed: 4,
            ..RunConfig::default()
        }
    }

    #[test]
    fn rows_are_ordered_and_cumulative() {
        let cfg = small(Algorithm::Abqt);
        let sim = simulate(&cfg, None).unwrap();
        let rows = sim.rows(&cfg.hash(), false).unwrap();
        assert_eq!(rows.len(), 9);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!((r.trial, r.step), (i / 3, i % 3));
            assert_eq!(r.wall_seconds, 0.0);
        }
        assert!(rows.windows(2).all(|w| w[0].trial != w[1].trial || w[0].cumulative_copies <= w[1].cumulative_copies));
        assert_eq!(sim.validity, ValidityTally { checked: 9, violations: 0 });
    }

    #[test]
    fn single_trial_summary_equals_the_trial() {
        let cfg = RunConfig { trials: 1, ..small(Algorithm::Standard) };
        let (rows, _) = experiment_accuracy(std::slice::from_ref(&cfg), None).unwrap();
        let b = run_trial(&cfg, None, 0).unwrap().final_bures_sq().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].mean_bures_sq, b);
        assert_eq!(rows[0].min_bures_sq, b);
        assert_eq!(rows[0].max_bures_sq, b);
        assert_eq!(rows[0].copies, 700);
    }

    #[test]
    fn mean_lies_within_trial_range() {
        let (rows, _) = experiment_accuracy(&[small(Algorithm::Abqt)], None).unwrap();
        let r = &rows[0];
        assert!(r.min_bures_sq <= r.mean_bures_sq && r.mean_bures_sq <= r.max_bures_sq);
        assert!(experiment_accuracy(&[], None).unwrap().0.is_empty());
    }

    #[test]
    fn naqst_without_parameters_is_a_config_error() {
        let cfg = small(Algorithm::Naqst);
        let err = run_trial(&cfg, None, 0).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = small(Algorithm::Abqt);
        let a = run_trial(&cfg, None, 1).unwrap();
        let b = run_trial(&cfg, None, 1).unwrap();
        assert_eq!(a.final_bures_sq().unwrap(), b.final_bures_sq().unwrap());
    }

    #[test]
    fn runtime_needs_three_repetitions() {
        assert!(experiment_runtime(&small(Algorithm::Standard), None, &[100], 2, 2).is_err());
        let rows = experiment_runtime(&small(Algorithm::Standard), None, &[1000], 3, 3).unwrap();
        assert_eq!(rows[0].repetitions, 3);
        assert!(rows[0].median_seconds >= 0.0);
    }
}
