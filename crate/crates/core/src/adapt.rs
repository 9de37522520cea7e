//! Measurement orientation selection by the mixed-entropy heuristic.

use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::povm::{build_povm, random_orientation, OrientationAngles, PovmFamily, ProductPovm};
use crate::qcore::{born_probabilities, DensityMatrix};

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum::<f64>()
}

fn check_bank(particles: &[DensityMatrix], weights: &[f64]) -> Result<()> {
    if particles.len() != weights.len() {
        return Err(Error::ArityMismatch {
            expected: particles.len(),
            got: weights.len(),
        });
    }
    if particles.is_empty() {
        return Err(Error::InvalidConfig("empty bank".into()));
    }
    Ok(())
}

/// `S(p_mean) - sum_i w_i S(p_i)` where `p_mean` are the outcome
/// probabilities of the weighted bank mean.
pub fn heuristic_f(particles: &[DensityMatrix], weights: &[f64], povm: &ProductPovm) -> Result<f64> {
    check_bank(particles, weights)?;
    let mean = DensityMatrix::mix(particles, weights)?;
    let p_mean = born_probabilities(&mean, povm)?;
    let mut conditional = 0.0;
    for (rho, &w) in particles.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        conditional += w * entropy(born_probabilities(rho, povm)?.probs());
    }
    Ok(entropy(p_mean.probs()) - conditional)
}

/// Mutual information between the particle label and the outcome, computed
/// directly from the joint distribution `w_x p(y|x)`.
pub fn mutual_information_oracle(particles: &[DensityMatrix], weights: &[f64], povm: &ProductPovm) -> Result<f64> {
    check_bank(particles, weights)?;
    let conditionals: Vec<Vec<f64>> = particles
        .iter()
        .map(|rho| born_probabilities(rho, povm).map(|p| p.probs().to_vec()))
        .collect::<Result<_>>()?;
    let k = povm.num_outcomes();
    let mut p_y = vec![0.0; k];
    for (cond, &w) in conditionals.iter().zip(weights) {
        for (acc, &q) in p_y.iter_mut().zip(cond) {
            *acc += w * q;
        }
    }
    let mut info = 0.0;
    for (cond, &w) in conditionals.iter().zip(weights) {
        for (y, &q) in cond.iter().enumerate() {
            let joint = w * q;
            if joint > 0.0 {
                info += joint * (q / p_y[y]).ln();
            }
        }
    }
    Ok(info)
}

/// A candidate orientation and its heuristic value.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicValue {
    pub value: f64,
    pub orientation: OrientationAngles,
}

/// Draws `n_candidates` random orientations and keeps the one with the
/// largest heuristic; ties go to the earliest candidate.
pub fn choose_povm<R: Rng + ?Sized>(
    particles: &[DensityMatrix],
    weights: &[f64],
    family: PovmFamily,
    n_candidates: usize,
    rng: &mut R,
) -> Result<(ProductPovm, HeuristicValue)> {
    if n_candidates == 0 {
        return Err(Error::InvalidConfig("n_candidates must be at least 1".into()));
    }
    check_bank(particles, weights)?;
    let n_qubits = particles[0].dim().trailing_zeros() as usize;
    let candidates: Vec<OrientationAngles> = (0..n_candidates)
        .map(|_| random_orientation(rng, n_qubits))
        .collect();
    let values: Vec<f64> = candidates
        .par_iter()
        .map(|a| heuristic_f(particles, weights, &build_povm(family, a)))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let orientation = candidates[best].clone();
    Ok((
        build_povm(family, &orientation),
        HeuristicValue {
            value: values[best],
            orientation,
        },
    ))
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LandscapePoint {
    pub angle1: f64,
    pub angle2: f64,
    pub f: f64,
}

/// Heuristic on a `resolution x resolution` grid of the X rotation angles of
/// qubits 0 and 1, other angles taken from `base`. Rows are ordered with
/// `angle1` varying slowest.
pub fn landscape_scan(
    particles: &[DensityMatrix],
    weights: &[f64],
    family: PovmFamily,
    base: &OrientationAngles,
    resolution: usize,
) -> Result<Vec<LandscapePoint>> {
    if resolution < 2 {
        return Err(Error::InvalidConfig("grid resolution must be at least 2".into()));
    }
    if base.n_qubits() < 2 {
        return Err(Error::InvalidConfig("landscape needs two qubits".into()));
    }
    let grid: Vec<(f64, f64)> = (0..resolution)
        .flat_map(|i| (0..resolution).map(move |j| (i, j)))
        .map(|(i, j)| (i as f64 * TAU / resolution as f64, j as f64 * TAU / resolution as f64))
        .collect();
    grid.par_iter()
        .map(|&(a1, a2)| {
            let mut per = base.per_qubit().to_vec();
            per[0][0] = a1;
            per[1][0] = a2;
            let angles = OrientationAngles::new(per)?;
            let f = heuristic_f(particles, weights, &build_povm(family, &angles))?;
            Ok(LandscapePoint { angle1: a1, angle2: a2, f })
        })
        .collect()
}

/// Writes the grid as CSV with header `angle1,angle2,f`.
pub fn write_landscape_csv<W: Write>(points: &[LandscapePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "angle1,angle2,f")?;
    for p in points {
        writeln!(out, "{},{},{}", p.angle1, p.angle2, p.f)?;
    }
    Ok(())
}
