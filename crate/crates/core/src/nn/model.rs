use std::fs;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::mlp::{mlp_forward, MlpSpec, Squash};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Per-particle input: L1 and L2 distance to the frequencies, `ln(1 + M_t)`, `ln(1 + t)`.
pub const PARTICLE_FEATURES: usize = 4;
/// Guess-score input: weighted combined distance, weighted L1, weighted L2,
/// `sum w^2`, `ln(1 + M_t)`, `ln(1 + t)`.
pub const SCORE_FEATURES: usize = 6;

pub const CHECKPOINT_VERSION: &str = "naqst-params/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedSlice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Shapes of the three heads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpecs {
    pub weight_net: MlpSpec,
    pub epsilon_net: MlpSpec,
    pub score_net: MlpSpec,
}

impl HeadSpecs {
    pub fn with_hidden(hidden: Vec<usize>) -> Self {
        Self {
            weight_net: MlpSpec::new(PARTICLE_FEATURES, hidden.clone(), 2),
            epsilon_net: MlpSpec::new(PARTICLE_FEATURES, hidden.clone(), 1).with_squash(Squash::Sigmoid),
            score_net: MlpSpec::new(SCORE_FEATURES, hidden, 1),
        }
    }
}

impl Default for HeadSpecs {
    fn default() -> Self {
        Self::with_hidden(vec![32, 32])
    }
}

/// Flat parameter vector for all heads plus the metadata a checkpoint needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub version: String,
    pub init_seed: u64,
    pub specs: HeadSpecs,
    pub epsilon_max: f64,
    pub slices: Vec<NamedSlice>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub training_config_hash: Option<String>,
}

impl ModelParameters {
    /// Fan-in initialization. The perturbation head's output bias is set so
    /// that it starts at `epsilon_init`.
    pub fn init(specs: HeadSpecs, epsilon_max: f64, epsilon_init: f64, seed: u64) -> Result<Self> {
        if !(epsilon_max > 0.0 && epsilon_max <= 1.0) || !(epsilon_init > 0.0 && epsilon_init < epsilon_max) {
            return Err(Error::InvalidConfig("need 0 < epsilon_init < epsilon_max <= 1".into()));
        }
        let nets = [
            ("weight_net", &specs.weight_net),
            ("epsilon_net", &specs.epsilon_net),
            ("score_net", &specs.score_net),
        ];
        let mut slices = Vec::new();
        let mut offset = 0;
        for (name, spec) in nets {
            spec.validate()?;
            slices.push(NamedSlice {
                name: name.into(),
                offset,
                len: spec.param_count(),
            });
            offset += spec.param_count();
        }
        let mut values = vec![0.0; offset];
        let mut rng = StreamRng::seed_from_u64(seed);
        for ((_, spec), s) in nets.iter().zip(&slices) {
            spec.init(&mut values[s.offset..s.offset + s.len], &mut rng);
        }
        let eps = &slices[1];
        let q = epsilon_init / epsilon_max;
        values[eps.offset + eps.len - 1] = (q / (1.0 - q)).ln();
        let params = Self {
            version: CHECKPOINT_VERSION.into(),
            init_seed: seed,
            specs,
            epsilon_max,
            slices,
            values,
            training_config_hash: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let mut offset = 0;
        let specs = [&self.specs.weight_net, &self.specs.epsilon_net, &self.specs.score_net];
        if self.slices.len() != 3 {
            return Err(Error::InvalidConfig("expected three parameter slices".into()));
        }
        for (s, spec) in self.slices.iter().zip(specs) {
            if s.offset != offset || s.len != spec.param_count() {
                return Err(Error::InvalidConfig(format!("slice {} does not match its network", s.name)));
            }
            offset += s.len;
        }
        if offset != self.values.len() {
            return Err(Error::InvalidConfig("slices do not cover the parameter vector".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same layout with a different parameter vector.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                got: values.len(),
            });
        }
        let mut out = self.clone();
        out.values = values;
        Ok(out)
    }

    pub fn slice(&self, name: &str) -> Option<&[f64]> {
        self.slices
            .iter()
            .find(|s| s.name == name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    fn part(&self, k: usize) -> &[f64] {
        let s = &self.slices[k];
        &self.values[s.offset..s.offset + s.len]
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("checkpoint: {e}")))?;
        if p.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported checkpoint version {}", p.version)));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= s;
    }
    out
}

pub fn particle_features(l1: f64, l2: f64, batch_copies: u64, step: usize) -> [f64; PARTICLE_FEATURES] {
    [l1, l2, (batch_copies as f64).ln_1p(), (step as f64).ln_1p()]
}

/// Bank weights (softmax of per-particle logits) and each particle's combined distance.
pub fn weight_head(params: &ModelParameters, features: &[[f64; PARTICLE_FEATURES]]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = &params.specs.weight_net;
    let mut logits = Vec::with_capacity(features.len());
    let mut combined = Vec::with_capacity(features.len());
    for f in features {
        let out = mlp_forward(spec, params.part(0), f)?;
        logits.push(out[0]);
        combined.push(out[1]);
    }
    Ok((softmax(&logits), combined))
}

/// Perturbation sizes in `(0, epsilon_max]`.
pub fn epsilon_head(params: &ModelParameters, features: &[[f64; PARTICLE_FEATURES]]) -> Result<Vec<f64>> {
    let spec = &params.specs.epsilon_net;
    features
        .iter()
        .map(|f| {
            let s = mlp_forward(spec, params.part(1), f)?[0];
            Ok((s * params.epsilon_max).max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Unsquashed score of the step's guess.
pub fn score_head(
    params: &ModelParameters,
    combined: &[f64],
    weights: &[f64],
    features: &[[f64; PARTICLE_FEATURES]],
) -> Result<f64> {
    let mut x = [0.0; SCORE_FEATURES];
    for ((c, w), f) in combined.iter().zip(weights).zip(features) {
        x[0] += w * c;
        x[1] += w * f[0];
        x[2] += w * f[1];
        x[3] += w * w;
    }
    if let Some(f) = features.first() {
        x[4] = f[2];
        x[5] = f[3];
    }
    Ok(mlp_forward(&params.specs.score_net, params.part(2), &x)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParameters {
        ModelParameters::init(HeadSpecs::with_hidden(vec![8]), 0.5, 0.05, 3).unwrap()
    }

    fn zeroed() -> ModelParameters {
        let m = model();
        let n = m.len();
        m.with_values(vec![0.0; n]).unwrap()
    }

    #[test]
    fn slices_partition_the_vector() {
        let m = model();
        let total: usize = m.slices.iter().map(|s| s.len).sum();
        assert_eq!(total, m.len());
        assert_eq!(m.slice("score_net").unwrap().len(), m.specs.score_net.param_count());
        assert!(m.slice("nope").is_none());
        let mut bad = m.clone();
        bad.values[0] = f64::NAN;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn epsilon_starts_at_requested_value() {
        let m = model();
        let f = [particle_features(0.0, 0.0, 0, 0)];
        assert!((epsilon_head(&m, &f).unwrap()[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn identical_features_give_uniform_weights() {
        let m = model();
        let f = vec![particle_features(0.3, 0.1, 100, 2); 7];
        let (w, _) = weight_head(&m, &f).unwrap();
        for v in w {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_saturates() {
        let w = softmax(&[50.0, 0.0, 0.0]);
        assert!((w[0] - 1.0).abs() < 1e-9);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let w = softmax(&[1e300, -1e300]);
        assert_eq!(w, vec![1.0, 0.0]);
    }

    #[test]
    fn weights_are_permutation_equivariant() {
        let m = model();
        let f: Vec<[f64; 4]> = (0..5).map(|i| particle_features(i as f64 * 0.1, 0.05 * i as f64, 50, 1)).collect();
        let (w, c) = weight_head(&m, &f).unwrap();
        let rev: Vec<[f64; 4]> = f.iter().rev().cloned().collect();
        let (wr, cr) = weight_head(&m, &rev).unwrap();
        for i in 0..5 {
            assert!((w[i] - wr[4 - i]).abs() < 1e-15);
            assert_eq!(c[i], cr[4 - i]);
        }
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_parameters_give_half_epsilon_and_zero_score() {
        let m = zeroed();
        let f = [particle_features(1.0, 0.5, 10, 3)];
        assert_eq!(epsilon_head(&m, &f).unwrap(), vec![0.25]);
        assert_eq!(score_head(&m, &[0.0], &[1.0], &f).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_is_monotone_in_the_unsquashed_output() {
        let m = model();
        let linear = m.specs.epsilon_net.clone().with_squash(Squash::None);
        let mut pairs = Vec::new();
        for k in 0..50 {
            let f = [particle_features(k as f64 * 0.04, k as f64 * 0.02, 200, 4)];
            let e = epsilon_head(&m, &f).unwrap()[0];
            assert!(e > 0.0 && e <= 0.5);
            let logit = mlp_forward(&linear, m.slice("epsilon_net").unwrap(), &f[0]).unwrap()[0];
            assert!((e - 0.5 / (1.0 + (-logit).exp())).abs() < 1e-15);
            pairs.push((logit, e));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let mut m = model();
        m.values[3] = 0.1 + 0.2;
        m.training_config_hash = Some("abc".into());
        let back = ModelParameters::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let mut wrong = m.clone();
        wrong.version = "other".into();
        assert!(ModelParameters::from_json(&wrong.to_json().unwrap()).is_err());
    }
}
