//! Adaptive Bayesian tomography with a particle filter.
//!
//! The posterior over states is a weighted bank of particles. Weights follow
//! Bayes' rule, and when the effective sample size collapses the bank is
//! resampled and mutated with Metropolis-Hastings moves whose likelihood is
//! evaluated over every measurement result seen so far.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adapt::choose_povm;
use crate::error::{Error, Result};
use crate::povm::{build_povm, random_orientation, PovmFamily, ProductPovm};
use crate::qcore::{
    born_into, born_probabilities, depurify, perturb_purification, purify, random_state, DensityMatrix, StatePrior,
};
use crate::rng::StreamRng;
use crate::source::{MeasurementRecord, MeasurementSource, StepOutput};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Particles with normalized nonnegative weights.
#[derive(Clone, Debug)]
pub struct WeightedBank {
    particles: Vec<DensityMatrix>,
    weights: Vec<f64>,
}

impl WeightedBank {
    pub fn new(particles: Vec<DensityMatrix>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::InvalidConfig("empty bank".into()));
        }
        if particles.len() != weights.len() {
            return Err(Error::ArityMismatch {
                expected: particles.len(),
                got: weights.len(),
            });
        }
        let d = particles[0].dim();
        if let Some(p) = particles.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidConfig(format!("weights sum to {sum}")));
        }
        Ok(Self { particles, weights })
    }

    /// Equal weights over the given particles.
    pub fn uniform(particles: Vec<DensityMatrix>) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![1.0 / n.max(1) as f64; n])
    }

    /// `n` independent draws from `prior`, equally weighted.
    pub fn from_prior<R: Rng + ?Sized>(prior: StatePrior, dim: usize, n: usize, rng: &mut R) -> Result<Self> {
        Self::uniform((0..n).map(|_| random_state(prior, dim, rng)).collect())
    }

    pub fn particles(&self) -> &[DensityMatrix] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }
}

/// `1 / sum_i w_i^2`.
pub fn effective_sample_size(bank: &WeightedBank) -> f64 {
    1.0 / bank.weights.iter().map(|w| w * w).sum::<f64>()
}

fn normalize_log_weights(logw: &[f64]) -> Result<Vec<f64>> {
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::DegeneratePosterior);
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("log weight".into()));
    }
    let mut w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
    Ok(w)
}

/// Multiplies each weight by the particle's likelihood of the record.
pub fn bayes_update(bank: &WeightedBank, record: &MeasurementRecord) -> Result<WeightedBank> {
    if record.copies() == 0 {
        return Ok(bank.clone());
    }
    let mut logw = Vec::with_capacity(bank.len());
    for (rho, &w) in bank.particles.iter().zip(&bank.weights) {
        let p = born_probabilities(rho, record.povm())?;
        logw.push(w.ln() + crate::qcore::log_likelihood(record.counts(), &p));
    }
    Ok(WeightedBank {
        particles: bank.particles.clone(),
        weights: normalize_log_weights(&logw)?,
    })
}

/// Weighted mean of the bank.
pub fn abqt_estimate(bank: &WeightedBank) -> DensityMatrix {
    DensityMatrix::mix(&bank.particles, &bank.weights).expect("bank is nonempty and consistent")
}

/// Every individual measurement result seen so far, in arrival order.
#[derive(Clone, Debug, Default)]
pub struct History {
    povms: Vec<Arc<ProductPovm>>,
    offsets: Vec<usize>,
    width: usize,
    // index into the concatenated per-POVM outcome table
    results: Vec<u32>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    /// All results of the given records, outcome by outcome.
    pub fn from_records(records: &[MeasurementRecord]) -> Self {
        let mut h = Self::new();
        for r in records {
            let k = h.push_povm(r.povm().clone());
            for (y, &n) in r.counts().counts().iter().enumerate() {
                for _ in 0..n {
                    h.push_result(k, y);
                }
            }
        }
        h
    }

    /// Registers a POVM and returns its index.
    pub fn push_povm(&mut self, povm: Arc<ProductPovm>) -> usize {
        self.offsets.push(self.width);
        self.width += povm.num_outcomes();
        self.povms.push(povm);
        self.povms.len() - 1
    }

    pub fn push_result(&mut self, povm: usize, outcome: usize) {
        assert!(outcome < self.povms[povm].num_outcomes(), "outcome out of range");
        self.results.push((self.offsets[povm] + outcome) as u32);
    }

    /// Number of individual results.
    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    pub fn povms(&self) -> &[Arc<ProductPovm>] {
        &self.povms
    }

    /// `sum_r ln p(y_r | rho)`, one term per stored result.
    pub fn log_likelihood(&self, rho: &DensityMatrix) -> Result<f64> {
        let mut table = vec![0.0; self.width];
        for (povm, &off) in self.povms.iter().zip(&self.offsets) {
            let slot = &mut table[off..off + povm.num_outcomes()];
            born_into(rho, povm, slot)?;
            for p in slot.iter_mut() {
                *p = p.ln();
            }
        }
        let mut ll = 0.0;
        for &r in &self.results {
            ll += table[r as usize];
        }
        Ok(ll)
    }
}

/// Metropolis-Hastings settings for one resampling pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MhSettings {
    pub steps: usize,
    /// Scale of the half-normal perturbation size.
    pub step_scale: f64,
    /// When set, the scale is retuned after every sweep over the bank
    /// towards this acceptance rate.
    pub target_acceptance: Option<f64>,
}

impl Default for MhSettings {
    fn default() -> Self {
        Self {
            steps: 10,
            step_scale: 0.1,
            target_acceptance: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MhOutcome {
    pub bank: WeightedBank,
    pub acceptance_rate: f64,
    /// Scale after tuning; equal to the input scale without a target.
    pub step_scale: f64,
}

const MIN_SCALE: f64 = 1e-6;
const MAX_SCALE: f64 = 1.0;

/// Systematic resampling indices.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while u > cum && i + 1 < n {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
    }
    out
}

fn mh_move<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    ll: f64,
    history: &History,
    scale: f64,
    rng: &mut R,
) -> Result<(DensityMatrix, f64, bool)> {
    let z: f64 = rng.sample(StandardNormal);
    let eps = (z.abs() * scale).min(1.0);
    let proposal = depurify(&perturb_purification(&purify(rho), eps, rng));
    let ll_new = history.log_likelihood(&proposal)?;
    let u: f64 = rng.random();
    let accept = if ll == f64::NEG_INFINITY {
        true
    } else {
        ll_new.is_finite() && u.ln() < ll_new - ll
    };
    if accept {
        Ok((proposal, ll_new, true))
    } else {
        Ok((rho.clone(), ll, false))
    }
}

/// Systematic resampling followed by `steps` Metropolis-Hastings sweeps
/// targeting the likelihood of `history`; weights come back uniform.
pub fn resample_mh<R: Rng + ?Sized>(
    bank: &WeightedBank,
    history: &History,
    rng: &mut R,
    settings: &MhSettings,
) -> Result<MhOutcome> {
    let idx = systematic_indices(&bank.weights, rng);
    let mut particles: Vec<DensityMatrix> = idx.iter().map(|&i| bank.particles[i].clone()).collect();
    let n = particles.len();
    let mut scale = settings.step_scale;
    let mut accepted = 0usize;
    if settings.steps > 0 {
        let mut rngs: Vec<StreamRng> = (0..n).map(|_| StreamRng::seed_from_u64(rng.random())).collect();
        let mut lls: Vec<f64> = particles
            .par_iter()
            .map(|p| history.log_likelihood(p))
            .collect::<Result<_>>()?;
        for _ in 0..settings.steps {
            let moved: Vec<(DensityMatrix, f64, bool)> = particles
                .par_iter()
                .zip(lls.par_iter())
                .zip(rngs.par_iter_mut())
                .map(|((p, &ll), r)| mh_move(p, ll, history, scale, r))
                .collect::<Result<_>>()?;
            let mut sweep_accepts = 0;
            for (k, (p, ll, acc)) in moved.into_iter().enumerate() {
                particles[k] = p;
                lls[k] = ll;
                sweep_accepts += acc as usize;
            }
            accepted += sweep_accepts;
            if let Some(target) = settings.target_acceptance {
                let rate = sweep_accepts as f64 / n as f64;
                scale = (scale * (2.0 * (rate - target)).exp()).clamp(MIN_SCALE, MAX_SCALE);
            }
        }
    }
    let total = (settings.steps * n).max(1);
    Ok(MhOutcome {
        bank: WeightedBank::uniform(particles)?,
        acceptance_rate: if settings.steps == 0 { 1.0 } else { accepted as f64 / total as f64 },
        step_scale: scale,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbqtConfig {
    pub family: PovmFamily,
    pub adaptive: bool,
    pub n_bank: usize,
    pub n_candidates: usize,
    pub prior: StatePrior,
    pub mh_steps: usize,
    pub step_scale: f64,
    /// Acceptance rate the MH scale is tuned towards; `None` keeps it fixed.
    pub target_acceptance: Option<f64>,
    /// Resample when the effective sample size drops below this fraction of the bank.
    pub resample_fraction: f64,
    /// Update and test the effective sample size after every single result
    /// instead of once per batch.
    pub sequential: bool,
}

impl Default for AbqtConfig {
    fn default() -> Self {
        Self {
            family: PovmFamily::Sic,
            adaptive: false,
            n_bank: 100,
            n_candidates: 40,
            prior: StatePrior::MixedHs,
            mh_steps: 10,
            step_scale: 0.1,
            target_acceptance: Some(0.3),
            resample_fraction: 0.5,
            sequential: true,
        }
    }
}

impl AbqtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_bank == 0 || self.n_candidates == 0 {
            return Err(Error::InvalidConfig("n_bank and n_candidates must be positive".into()));
        }
        if self.step_scale.is_nan() || self.step_scale < 0.0 || !(0.0..=1.0).contains(&self.resample_fraction) {
            return Err(Error::InvalidConfig("bad MH scale or resample fraction".into()));
        }
        Ok(())
    }

    fn mh(&self, scale: f64) -> MhSettings {
        MhSettings {
            steps: self.mh_steps,
            step_scale: scale,
            target_acceptance: self.target_acceptance,
        }
    }
}

struct Filter<'a> {
    config: &'a AbqtConfig,
    bank: WeightedBank,
    history: History,
    scale: f64,
    resamples: usize,
}

impl Filter<'_> {
    fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let out = resample_mh(&self.bank, &self.history, rng, &self.config.mh(self.scale))?;
        self.bank = out.bank;
        self.scale = out.step_scale;
        self.resamples += 1;
        Ok(())
    }

    fn below_threshold(&self) -> bool {
        effective_sample_size(&self.bank) < self.config.resample_fraction * self.bank.len() as f64
    }

    // Fresh prior draws reweighted by the full history, used when every
    // particle has been ruled out.
    fn restart<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let d = self.bank.dim();
        let fresh = WeightedBank::from_prior(self.config.prior, d, self.bank.len(), rng)?;
        let logw: Vec<f64> = fresh
            .particles
            .iter()
            .map(|p| self.history.log_likelihood(p))
            .collect::<Result<_>>()?;
        let weights = normalize_log_weights(&logw).unwrap_or_else(|_| fresh.weights.clone());
        self.bank = WeightedBank::new(fresh.particles, weights)?;
        self.resample(rng)
    }

    fn tables(&self, povm: &ProductPovm) -> Result<Vec<Vec<f64>>> {
        self.bank
            .particles
            .iter()
            .map(|p| born_probabilities(p, povm).map(|d| d.probs().to_vec()))
            .collect()
    }

    fn sequential_update<R: Rng + ?Sized>(&mut self, record: &MeasurementRecord, rng: &mut R) -> Result<()> {
        let k = self.history.push_povm(record.povm().clone());
        let mut outcomes: Vec<u32> = Vec::with_capacity(record.copies() as usize);
        for (y, &n) in record.counts().counts().iter().enumerate() {
            outcomes.extend(std::iter::repeat_n(y as u32, n as usize));
        }
        outcomes.shuffle(rng);
        let mut probs = self.tables(record.povm())?;
        let mut weights = self.bank.weights.clone();
        for &y in &outcomes {
            self.history.push_result(k, y as usize);
            let mut sum = 0.0;
            for (w, p) in weights.iter_mut().zip(&probs) {
                *w *= p[y as usize];
                sum += *w;
            }
            if sum <= 0.0 || !sum.is_finite() {
                self.restart(rng)?;
                weights = self.bank.weights.clone();
                probs = self.tables(record.povm())?;
                continue;
            }
            let mut sq = 0.0;
            for w in weights.iter_mut() {
                *w /= sum;
                sq += *w * *w;
            }
            if 1.0 / sq < self.config.resample_fraction * weights.len() as f64 {
                self.bank.weights.clone_from(&weights);
                self.resample(rng)?;
                weights = self.bank.weights.clone();
                probs = self.tables(record.povm())?;
            }
        }
        self.bank.weights = weights;
        Ok(())
    }

    fn batch_update<R: Rng + ?Sized>(&mut self, record: &MeasurementRecord, rng: &mut R) -> Result<()> {
        let k = self.history.push_povm(record.povm().clone());
        for (y, &n) in record.counts().counts().iter().enumerate() {
            for _ in 0..n {
                self.history.push_result(k, y);
            }
        }
        match bayes_update(&self.bank, record) {
            Ok(b) => self.bank = b,
            Err(Error::DegeneratePosterior) => return self.restart(rng),
            Err(e) => return Err(e),
        }
        if self.below_threshold() {
            self.resample(rng)?;
        }
        Ok(())
    }
}

/// Runs the particle filter over `schedule`, one estimate per batch.
pub fn run_abqt<S: MeasurementSource, R: Rng + ?Sized>(
    source: &mut S,
    schedule: &[u64],
    config: &AbqtConfig,
    n_qubits: usize,
    rng: &mut R,
) -> Result<Vec<StepOutput>> {
    config.validate()?;
    if schedule.is_empty() {
        return Err(Error::InvalidConfig("schedule must be nonempty".into()));
    }
    let d = 1usize << n_qubits;
    let mut filter = Filter {
        config,
        bank: WeightedBank::from_prior(config.prior, d, config.n_bank, rng)?,
        history: History::new(),
        scale: config.step_scale,
        resamples: 0,
    };
    let mut out = Vec::with_capacity(schedule.len());
    let mut cumulative = 0;
    for (t, &copies) in schedule.iter().enumerate() {
        let start = Instant::now();
        let povm = if config.adaptive {
            choose_povm(filter.bank.particles(), filter.bank.weights(), config.family, config.n_candidates, rng)?.0
        } else {
            build_povm(config.family, &random_orientation(rng, n_qubits))
        };
        let povm = Arc::new(povm);
        let sampled = Instant::now();
        let counts = source.measure(&povm, copies)?;
        let sampling = sampled.elapsed();
        let record = MeasurementRecord::new(povm.clone(), counts)?;
        if config.sequential {
            filter.sequential_update(&record, rng)?;
        } else {
            filter.batch_update(&record, rng)?;
        }
        cumulative += copies;
        let estimate = abqt_estimate(&filter.bank);
        let confidence = effective_sample_size(&filter.bank) / filter.bank.len() as f64;
        let wall = start.elapsed().saturating_sub(sampling).as_secs_f64();
        source.report_estimate(t, &estimate, confidence)?;
        out.push(StepOutput {
            step: t,
            copies,
            cumulative_copies: cumulative,
            estimate,
            confidence,
            angles: povm.angles().clone(),
            wall_seconds: wall,
        });
    }
    log::debug!(
        "abqt finished: {} results, {} resamples, final MH scale {:.3e}",
        filter.history.len(),
        filter.resamples,
        filter.scale
    );
    source.finish()?;
    Ok(out)
}
