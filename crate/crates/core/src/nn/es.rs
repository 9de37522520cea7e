use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Antithetic evolution-strategies gradient estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    /// Mean of all finite probe losses.
    pub mean_loss: f64,
    pub used_probes: usize,
    pub discarded_probes: usize,
}

/// Averages `(L(x + s u) - L(x - s u)) / (2 s) u` over `n_probes` standard
/// normal directions `u`. Both members of a pair see the same episode seed;
/// pairs with a non-finite loss are dropped.
pub fn estimate_gradient<F, R>(loss: F, params: &[f64], rng: &mut R, n_probes: usize, sigma: f64) -> GradientEstimate
where
    F: Fn(&[f64], u64) -> f64 + Sync,
    R: Rng + ?Sized,
{
    assert!(sigma > 0.0, "probe scale must be positive");
    let n = params.len();
    let probes: Vec<(Vec<f64>, u64)> = (0..n_probes)
        .map(|_| {
            let u: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (u, rng.random())
        })
        .collect();
    let results: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|(u, seed)| {
            let plus: Vec<f64> = params.iter().zip(u).map(|(p, d)| p + sigma * d).collect();
            let minus: Vec<f64> = params.iter().zip(u).map(|(p, d)| p - sigma * d).collect();
            (loss(&plus, *seed), loss(&minus, *seed))
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut used = 0;
    let mut loss_sum = 0.0;
    for ((u, _), (lp, lm)) in probes.iter().zip(&results) {
        if !lp.is_finite() || !lm.is_finite() {
            log::warn!("discarding probe with non-finite loss ({lp}, {lm})");
            continue;
        }
        used += 1;
        loss_sum += lp + lm;
        let c = (lp - lm) / (2.0 * sigma);
        for (g, d) in grad.iter_mut().zip(u) {
            *g += c * d;
        }
    }
    if used > 0 {
        for g in grad.iter_mut() {
            *g /= used as f64;
        }
    }
    GradientEstimate {
        grad,
        mean_loss: if used > 0 { loss_sum / (2 * used) as f64 } else { f64::NAN },
        used_probes: used,
        discarded_probes: n_probes - used,
    }
}
