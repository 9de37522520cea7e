//! Non-adaptive tomography: least-squares linear inversion of measured
//! frequencies followed by projection onto the closest valid state.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{build_povm, random_orientation, OrientationAngles, PovmFamily, ProductPovm};
use crate::qcore::{hermitian_eigh, state_from_spectrum, DensityMatrix, C64};
use crate::source::{MeasurementRecord, MeasurementSource, StepOutput};

/// Hermitian, unit-trace matrix that need not be positive.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionEstimate {
    matrix: DMatrix<C64>,
}

impl InversionEstimate {
    pub fn new(matrix: DMatrix<C64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Orthonormal traceless Hermitian basis (generalized Gell-Mann, `Tr(B_j B_k) = δ_jk`).
pub fn traceless_basis(d: usize) -> Vec<DMatrix<C64>> {
    let mut basis = Vec::with_capacity(d * d - 1);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut s = DMatrix::<C64>::zeros(d, d);
            s[(j, k)] = C64::new(h, 0.0);
            s[(k, j)] = C64::new(h, 0.0);
            basis.push(s);
            let mut a = DMatrix::<C64>::zeros(d, d);
            a[(j, k)] = C64::new(0.0, -h);
            a[(k, j)] = C64::new(0.0, h);
            basis.push(a);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = C64::new(1.0 / norm, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) / norm, 0.0);
        basis.push(m);
    }
    basis
}

fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    // Tr(AB) = sum_jk A_jk conj(B_jk) for Hermitian B
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

/// Weighted least squares over `(povm, frequencies, weight)` triples.
pub fn linear_inversion_weighted(data: &[(&ProductPovm, &[f64], f64)]) -> Result<InversionEstimate> {
    let d = data
        .first()
        .map(|(p, _, _)| p.dim())
        .ok_or(Error::InformationallyIncomplete {
            rank: 0,
            params: 0,
            deficiency: 0,
        })?;
    let basis = traceless_basis(d);
    let n = basis.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut row = vec![0.0; n];
    for (povm, freqs, weight) in data {
        if povm.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: povm.dim(),
            });
        }
        if freqs.len() != povm.num_outcomes() {
            return Err(Error::ArityMismatch {
                expected: povm.num_outcomes(),
                got: freqs.len(),
            });
        }
        if *weight <= 0.0 {
            continue;
        }
        for (op, &nu) in povm.outcomes().iter().zip(freqs.iter()) {
            let offset = (0..d).map(|i| op[(i, i)].re).sum::<f64>() / d as f64;
            for (r, b) in row.iter_mut().zip(&basis) {
                *r = trace_product(b, op);
            }
            let target = nu - offset;
            for i in 0..n {
                rhs[i] += weight * row[i] * target;
                for j in 0..n {
                    gram[(i, j)] += weight * row[i] * row[j];
                }
            }
        }
    }
    let eig = gram.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * max.max(f64::MIN_POSITIVE);
    let rank = eig.eigenvalues.iter().filter(|&&v| v > tol).count();
    if rank < n || max <= 0.0 {
        return Err(Error::InformationallyIncomplete {
            rank,
            params: n,
            deficiency: n - rank,
        });
    }
    let proj = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_fn(n, |i, _| proj[i] / eig.eigenvalues[i]);
    let coeffs = &eig.eigenvectors * scaled;
    let mut m = DMatrix::<C64>::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0));
    for (c, b) in coeffs.iter().zip(&basis) {
        m += b * C64::new(*c, 0.0);
    }
    Ok(InversionEstimate { matrix: m })
}

/// Linear inversion of measured records, each weighted by its copy count.
pub fn linear_inversion(records: &[MeasurementRecord]) -> Result<InversionEstimate> {
    let freqs: Vec<Vec<f64>> = records.iter().map(|r| r.frequencies()).collect();
    let data: Vec<(&ProductPovm, &[f64], f64)> = records
        .iter()
        .zip(&freqs)
        .map(|(r, f)| (r.povm().as_ref(), f.as_slice(), r.copies() as f64))
        .collect();
    if data.iter().all(|(_, _, w)| *w <= 0.0) {
        let d = records.first().map(|r| r.povm().dim()).unwrap_or(0);
        let params = if d > 0 { d * d - 1 } else { 0 };
        return Err(Error::InformationallyIncomplete {
            rank: 0,
            params,
            deficiency: params,
        });
    }
    linear_inversion_weighted(&data)
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Frobenius-closest density matrix: eigenvalues projected onto the simplex.
pub fn project_to_state(m: &InversionEstimate) -> DensityMatrix {
    let (values, vectors) = hermitian_eigh(&m.matrix);
    let projected = project_simplex(&values);
    state_from_spectrum(&projected, &vectors)
}

/// How standard tomography orients its measurements.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    /// One orientation for the whole run (the reference orientation).
    #[default]
    Fixed,
    /// A fresh uniformly random orientation for every batch.
    RandomPerBatch,
}

/// Standard tomography over a copy schedule. Until the accumulated data are
/// informationally complete the estimate is the maximally mixed state.
pub fn run_standard<S: MeasurementSource, R: Rng + ?Sized>(
    source: &mut S,
    schedule: &[u64],
    family: PovmFamily,
    n_qubits: usize,
    mode: OrientationMode,
    rng: &mut R,
) -> Result<Vec<StepOutput>> {
    if schedule.is_empty() {
        return Err(Error::InvalidConfig("schedule must be nonempty".into()));
    }
    let d = 1usize << n_qubits;
    let fixed = Arc::new(build_povm(family, &OrientationAngles::zeros(n_qubits)));
    let mut records = Vec::with_capacity(schedule.len());
    let mut out = Vec::with_capacity(schedule.len());
    let mut cumulative = 0;
    for (t, &copies) in schedule.iter().enumerate() {
        let start = Instant::now();
        let povm = match mode {
            OrientationMode::Fixed => fixed.clone(),
            OrientationMode::RandomPerBatch => Arc::new(build_povm(family, &random_orientation(rng, n_qubits))),
        };
        let sampled = Instant::now();
        let counts = source.measure(&povm, copies)?;
        let sampling = sampled.elapsed();
        cumulative += copies;
        let angles = povm.angles().clone();
        records.push(MeasurementRecord::new(povm, counts)?);
        let estimate = match linear_inversion(&records) {
            Ok(inv) => project_to_state(&inv),
            Err(Error::InformationallyIncomplete { .. }) => DensityMatrix::maximally_mixed(d),
            Err(e) => return Err(e),
        };
        let wall = start.elapsed().saturating_sub(sampling).as_secs_f64();
        source.report_estimate(t, &estimate, 1.0)?;
        out.push(StepOutput {
            step: t,
            copies,
            cumulative_copies: cumulative,
            estimate,
            confidence: 1.0,
            angles,
            wall_seconds: wall,
        });
    }
    source.finish()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{born_probabilities, bures_sq, random_state, OutcomeCounts, StatePrior};
    use crate::rng::stream;
    use crate::source::SimulatedSource;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frob(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        (a - b).norm()
    }

    fn diag_estimate(values: &[f64]) -> InversionEstimate {
        let d = values.len();
        InversionEstimate::new(DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Exhaustive active-set minimisation of |x - v|^2 over the simplex.
    fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sum: f64 = support.iter().map(|&i| v[i]).sum();
            let shift = (sum - 1.0) / support.len() as f64;
            let mut x = vec![0.0; n];
            let mut feasible = true;
            for &i in &support {
                x[i] = v[i] - shift;
                if x[i] < -1e-15 {
                    feasible = false;
                }
            }
            if !feasible {
                continue;
            }
            let dist: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, x));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn basis_is_orthonormal_and_traceless() {
        for d in [2, 3, 4] {
            let b = traceless_basis(d);
            assert_eq!(b.len(), d * d - 1);
            for (i, x) in b.iter().enumerate() {
                assert!(x.trace().norm() < 1e-14);
                for (j, y) in b.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((trace_product(x, y) - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn exact_sic_frequencies_recover_the_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let povm = build_povm(PovmFamily::Sic, &random_orientation(&mut rng, 2));
        for prior in [StatePrior::MixedHs, StatePrior::PureHaar] {
            let rho = random_state(prior, 4, &mut rng);
            let p = born_probabilities(&rho, &povm).unwrap();
            let est = linear_inversion_weighted(&[(&povm, p.probs(), 1.0)]).unwrap();
            assert!(frob(est.matrix(), rho.matrix()) < 1e-8);
        }
    }

    #[test]
    fn uniform_sic_frequencies_give_maximally_mixed() {
        let povm = build_povm(PovmFamily::Sic, &OrientationAngles::zeros(2));
        let nu = vec![1.0 / 16.0; 16];
        let est = linear_inversion_weighted(&[(&povm, &nu, 1.0)]).unwrap();
        assert!(frob(est.matrix(), DensityMatrix::maximally_mixed(4).matrix()) < 1e-8);
    }

    #[test]
    fn single_basis_record_is_incomplete() {
        let povm = Arc::new(build_povm(PovmFamily::Basis, &OrientationAngles::zeros(2)));
        let rec = MeasurementRecord::new(povm, OutcomeCounts::new(vec![10, 20, 30, 40])).unwrap();
        match linear_inversion(&[rec]) {
            Err(Error::InformationallyIncomplete { rank, params, deficiency }) => {
                assert_eq!(params, 15);
                assert_eq!(rank, 3);
                assert_eq!(deficiency, 12);
            }
            other => panic!("expected incompleteness, got {other:?}"),
        }
    }

    #[test]
    fn projection_examples() {
        let out = project_to_state(&diag_estimate(&[1.2, -0.2, 0.0, 0.0]));
        let (vals, _) = out.eigh();
        let want = [1.0, 0.0, 0.0, 0.0];
        for (a, b) in vals.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(brute_force_simplex(&[1.2, -0.2, 0.0, 0.0]), vec![1.0, 0.0, 0.0, 0.0]);

        let input = [0.6, 0.5, -0.05, -0.05];
        let oracle = brute_force_simplex(&input);
        let out = project_to_state(&diag_estimate(&input));
        out.validate().unwrap();
        for (i, o) in oracle.iter().enumerate() {
            assert!((out.matrix()[(i, i)].re - o).abs() < 1e-12);
        }
    }

    #[test]
    fn valid_input_is_unchanged_and_projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let rho = random_state(StatePrior::MixedHs, 4, &mut rng);
        let once = project_to_state(&InversionEstimate::new(rho.matrix().clone()));
        assert!(frob(once.matrix(), rho.matrix()) < 1e-10);
        let twice = project_to_state(&InversionEstimate::new(once.matrix().clone()));
        assert!(frob(once.matrix(), twice.matrix()) < 1e-12);
    }

    fn random_hermitian_trace_one(rng: &mut ChaCha8Rng, d: usize) -> InversionEstimate {
        let mut m = DMatrix::<C64>::from_fn(d, d, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        m = (&m + m.adjoint()).scale(0.5);
        let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
        for i in 0..d {
            m[(i, i)] += C64::new((1.0 - tr) / d as f64, 0.0);
        }
        InversionEstimate::new(m)
    }

    #[test]
    fn projection_beats_random_valid_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let m = random_hermitian_trace_one(&mut rng, 4);
            let p = project_to_state(&m);
            p.validate().unwrap();
            let best = frob(p.matrix(), m.matrix());
            for _ in 0..10_000 / 100 {
                let prior = if rng.random::<bool>() { StatePrior::PureHaar } else { StatePrior::MixedHs };
                let s = random_state(prior, 4, &mut rng);
                assert!(frob(s.matrix(), m.matrix()) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn standard_pipeline_improves_with_copies() {
        let mut totals = [0.0; 3];
        for trial in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let rho = random_state(StatePrior::MixedHs, 4, &mut rng);
            for (k, n) in [100u64, 10_000, 1_000_000].into_iter().enumerate() {
                let mut src = SimulatedSource::new(rho.clone(), stream(trial, k as u64));
                let traj = run_standard(&mut src, &[n], PovmFamily::Sic, 2, OrientationMode::Fixed, &mut rng).unwrap();
                totals[k] += bures_sq(&traj[0].estimate, &rho).unwrap();
            }
        }
        assert!(totals[0] > totals[1] && totals[1] > totals[2], "{totals:?}");
    }
}
