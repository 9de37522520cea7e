use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::state::DensityMatrix;
use crate::error::{Error, Result};
use crate::povm::ProductPovm;

/// Probabilities over POVM outcomes.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub const NEGATIVE_TOL: f64 = 1e-12;
    pub const SUM_TOL: f64 = 1e-9;

    /// Checks the entries, clamping tiny negatives to zero.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            if !p.is_finite() {
                return Err(Error::NonFinite("probability".into()));
            }
            if *p < -Self::NEGATIVE_TOL {
                return Err(Error::InvalidConfig(format!("negative probability {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidConfig(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Click counts `n_y` for each outcome of one batch.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutcomeCounts {
    counts: Vec<u64>,
}

impl OutcomeCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn zeros(n: usize) -> Self {
        Self { counts: vec![0; n] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Relative frequencies `n_y / N`; all zero when no copies were measured.
    pub fn frequencies(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&n| n as f64 / total as f64)
            .collect()
    }
}

/// Writes `Re Tr(rho Pi_y)` for every outcome into `out`, then clamps and renormalizes.
pub fn born_into(rho: &DensityMatrix, povm: &ProductPovm, out: &mut [f64]) -> Result<()> {
    let d = rho.dim();
    if d != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: d,
        });
    }
    if out.len() != povm.num_outcomes() {
        return Err(Error::ArityMismatch {
            expected: povm.num_outcomes(),
            got: out.len(),
        });
    }
    let entries = rho.matrix().as_slice();
    let flat = povm.flat();
    let stride = 2 * d * d;
    let mut sum = 0.0;
    for (y, p) in out.iter_mut().enumerate() {
        let op = &flat[y * stride..(y + 1) * stride];
        let mut acc = 0.0;
        for (z, pair) in entries.iter().zip(op.chunks_exact(2)) {
            acc += z.re * pair[0] + z.im * pair[1];
        }
        let v = acc.max(0.0);
        *p = v;
        sum += v;
    }
    if sum > 0.0 {
        for p in out.iter_mut() {
            *p /= sum;
        }
    }
    Ok(())
}

/// Born-rule outcome probabilities `p_y = Re Tr(rho Pi_y)`.
pub fn born_probabilities(rho: &DensityMatrix, povm: &ProductPovm) -> Result<OutcomeDistribution> {
    let mut probs = vec![0.0; povm.num_outcomes()];
    born_into(rho, povm, &mut probs)?;
    Ok(OutcomeDistribution { probs })
}

/// Multinomial draw of `copies` outcomes by sequential binomial splitting.
///
/// Consumes exactly one binomial draw per outcome except the last, so the
/// stream position depends only on the arity.
pub fn sample_counts<R: Rng + ?Sized>(
    p: &OutcomeDistribution,
    copies: u64,
    rng: &mut R,
) -> OutcomeCounts {
    let n = p.len();
    let mut counts = vec![0u64; n];
    if n == 0 {
        return OutcomeCounts { counts };
    }
    let mut remaining = copies;
    let mut mass = 1.0f64;
    for (slot, &py) in counts.iter_mut().zip(&p.probs[..n - 1]) {
        let draw = if remaining == 0 || py <= 0.0 {
            0
        } else if py >= mass {
            remaining
        } else {
            let q = (py / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .expect("binomial parameter in [0, 1]")
                .sample(rng)
        };
        *slot = draw;
        remaining -= draw;
        mass -= py;
    }
    counts[n - 1] = remaining;
    OutcomeCounts { counts }
}

/// `sum_y n_y ln p_y`, with zero-count outcomes contributing nothing.
///
/// Returns negative infinity when an observed outcome has zero probability.
pub fn log_likelihood(counts: &OutcomeCounts, p: &OutcomeDistribution) -> f64 {
    assert_eq!(counts.len(), p.len(), "outcome arity mismatch");
    let mut ll = 0.0;
    for (&n, &q) in counts.counts.iter().zip(&p.probs) {
        if n == 0 {
            continue;
        }
        if q <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += n as f64 * q.ln();
    }
    ll
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceMetric {
    L1,
    L2,
}

/// L1 (sum of absolute differences) or L2 (Euclidean) distance between probability vectors.
pub fn prob_distance(p: &[f64], q: &[f64], metric: DistanceMetric) -> f64 {
    assert_eq!(p.len(), q.len(), "outcome arity mismatch");
    match metric {
        DistanceMetric::L1 => p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum(),
        DistanceMetric::L2 => p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
    }
}
