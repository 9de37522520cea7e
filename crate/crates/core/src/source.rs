//! Measurement records and the sources that produce them.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::povm::{OrientationAngles, ProductPovm};
use crate::qcore::{born_probabilities, sample_counts, DensityMatrix, OutcomeCounts};
use crate::rng::StreamRng;

/// One batch of data: the POVM that was measured and its click counts.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    povm: Arc<ProductPovm>,
    counts: OutcomeCounts,
}

impl MeasurementRecord {
    pub fn new(povm: Arc<ProductPovm>, counts: OutcomeCounts) -> Result<Self> {
        if counts.len() != povm.num_outcomes() {
            return Err(Error::ArityMismatch {
                expected: povm.num_outcomes(),
                got: counts.len(),
            });
        }
        Ok(Self { povm, counts })
    }

    pub fn povm(&self) -> &Arc<ProductPovm> {
        &self.povm
    }

    pub fn counts(&self) -> &OutcomeCounts {
        &self.counts
    }

    pub fn copies(&self) -> u64 {
        self.counts.total()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.frequencies()
    }
}

/// What an estimator reports after each batch.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub step: usize,
    pub copies: u64,
    pub cumulative_copies: u64,
    pub estimate: DensityMatrix,
    pub confidence: f64,
    /// Orientation of the POVM measured in this step.
    pub angles: OrientationAngles,
    /// Estimator time for the step, excluding time spent inside the source.
    pub wall_seconds: f64,
}

/// Supplies outcome counts for a requested POVM and number of copies.
pub trait MeasurementSource {
    fn measure(&mut self, povm: &ProductPovm, copies: u64) -> Result<OutcomeCounts>;

    /// Called after every estimation step; sources that report to a remote
    /// party forward the estimate, the in-process simulator ignores it.
    fn report_estimate(&mut self, _step: usize, _estimate: &DensityMatrix, _confidence: f64) -> Result<()> {
        Ok(())
    }

    /// Called once when the estimator has finished.
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

impl<S: MeasurementSource + ?Sized> MeasurementSource for &mut S {
    fn measure(&mut self, povm: &ProductPovm, copies: u64) -> Result<OutcomeCounts> {
        (**self).measure(povm, copies)
    }

    fn report_estimate(&mut self, step: usize, estimate: &DensityMatrix, confidence: f64) -> Result<()> {
        (**self).report_estimate(step, estimate, confidence)
    }

    fn finish(&mut self) -> Result<()> {
        (**self).finish()
    }
}

/// Multinomial sampling from a hidden state.
#[derive(Clone, Debug)]
pub struct SimulatedSource {
    state: DensityMatrix,
    rng: StreamRng,
}

impl SimulatedSource {
    pub fn new(state: DensityMatrix, rng: StreamRng) -> Self {
        Self { state, rng }
    }

    /// The hidden state; estimators never call this.
    pub fn hidden_state(&self) -> &DensityMatrix {
        &self.state
    }
}

impl MeasurementSource for SimulatedSource {
    fn measure(&mut self, povm: &ProductPovm, copies: u64) -> Result<OutcomeCounts> {
        let p = born_probabilities(&self.state, povm)?;
        Ok(sample_counts(&p, copies, &mut self.rng))
    }
}
