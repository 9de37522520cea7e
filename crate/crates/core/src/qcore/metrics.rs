use nalgebra::DMatrix;

use super::linalg::{from_spectrum, hermitian_deviation, hermitian_eigh, C64};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

// Eigenvalues below this are rounding noise; their square roots would not be.
const SPECTRUM_FLOOR: f64 = 1e-13;
const HERMITIAN_GUARD: f64 = 1e-8;

fn check_pair(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: sigma.dim(),
        });
    }
    for m in [rho.matrix(), sigma.matrix()] {
        let dev = hermitian_deviation(m);
        if dev > HERMITIAN_GUARD {
            return Err(Error::NotHermitian(dev));
        }
    }
    Ok(())
}

fn sqrt_psd(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (mut values, vectors) = hermitian_eigh(m);
    for v in values.iter_mut() {
        *v = if *v < SPECTRUM_FLOOR { 0.0 } else { v.sqrt() };
    }
    from_spectrum(&values, &vectors)
}

/// Squared Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// The trace is evaluated as the nuclear norm of `sqrt(rho) sqrt(sigma)`,
/// which avoids square roots of tiny, noisy eigenvalues and makes the result
/// symmetric in its arguments.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_pair(rho, sigma)?;
    let a = sqrt_psd(rho.matrix()) * sqrt_psd(sigma.matrix());
    let svd = a.svd(false, false);
    let nuclear: f64 = svd.singular_values.iter().sum();
    if !nuclear.is_finite() {
        return Err(Error::NonFinite("fidelity".into()));
    }
    Ok((nuclear * nuclear).clamp(0.0, 1.0))
}

/// Squared Bures distance `2 - 2 sqrt(F)`, in `[0, 2]`.
pub fn bures_sq(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((2.0 - 2.0 * f.sqrt()).clamp(0.0, 2.0))
}

/// Frobenius norm of `rho - sigma`.
pub fn hs_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    assert_eq!(rho.dim(), sigma.dim(), "dimension mismatch");
    rho.matrix()
        .iter()
        .zip(sigma.matrix().iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{random_state, StatePrior};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(d: usize, k: usize) -> DensityMatrix {
        let mut psi = vec![C64::new(0.0, 0.0); d];
        psi[k] = C64::new(1.0, 0.0);
        DensityMatrix::pure(&psi).unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for prior in [StatePrior::PureHaar, StatePrior::MixedHs] {
            let rho = random_state(prior, 4, &mut rng);
            assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-9);
            assert!(bures_sq(&rho, &rho).unwrap() < 1e-9);
        }
    }

    #[test]
    fn orthogonal_pure_states() {
        let a = basis(4, 0);
        let b = basis(4, 3);
        assert!(fidelity(&a, &b).unwrap() < 1e-12);
        assert!((bures_sq(&a, &b).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pure_versus_maximally_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let psi = random_state(StatePrior::PureHaar, 4, &mut rng);
        let mm = DensityMatrix::maximally_mixed(4);
        assert!((fidelity(&psi, &mm).unwrap() - 0.25).abs() < 1e-10);
        assert!((bures_sq(&psi, &mm).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for i in 0..200 {
            let p = if i % 2 == 0 { StatePrior::PureHaar } else { StatePrior::MixedHs };
            let a = random_state(p, 4, &mut rng);
            let b = random_state(StatePrior::MixedHs, 4, &mut rng);
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            assert!((fab - fba).abs() < 1e-8, "{fab} vs {fba}");
            let d = bures_sq(&a, &b).unwrap();
            assert!((0.0..=2.0).contains(&d));
        }
    }

    #[test]
    fn hs_distance_cases() {
        let a = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let b = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        assert_eq!(hs_distance(&a, &a), 0.0);
        assert!((hs_distance(&a, &b) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hs_distance_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let a = random_state(StatePrior::MixedHs, 4, &mut rng);
        let b = random_state(StatePrior::MixedHs, 4, &mut rng);
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let z = a.matrix()[(i, j)] - b.matrix()[(i, j)];
                acc += z.re * z.re + z.im * z.im;
            }
        }
        assert!((hs_distance(&a, &b) - acc.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn fidelity_rejects_mismatched_dimensions() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(4);
        assert!(matches!(fidelity(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fidelity_rejects_non_hermitian_input() {
        let mut m = DensityMatrix::maximally_mixed(2).into_matrix();
        m[(0, 1)] = C64::new(0.3, 0.0);
        let bad = DensityMatrix::from_matrix_unchecked(m).unwrap();
        assert!(matches!(
            fidelity(&bad, &DensityMatrix::maximally_mixed(2)),
            Err(Error::NotHermitian(_))
        ));
    }
}
