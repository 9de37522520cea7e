use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{from_spectrum, hermitian_deviation, hermitian_eigh, C64};
use crate::error::{Error, Result};

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const PSD_TOL: f64 = 1e-9;

    /// Wraps a matrix after checking every invariant.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a square matrix without checking Hermiticity, trace or positivity.
    pub fn from_matrix_unchecked(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        Ok(Self { m })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            m: DMatrix::from_diagonal_element(d, d, C64::new(1.0 / d as f64, 0.0)),
        }
    }

    /// `|psi><psi|` for the normalized input vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NonFinite("zero or non-finite state vector".into()));
        }
        let d = psi.len();
        let m = DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self { m })
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = populations.len();
        let m = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(populations[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Checks Hermiticity (1e-10), unit trace (1e-10) and positivity (-1e-9).
    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.m);
        if dev > Self::HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidTrace(tr));
        }
        let (values, _) = hermitian_eigh(&self.m);
        let min = values.last().copied().unwrap_or(0.0);
        if min < -Self::PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(())
    }

    /// Eigenvalues (descending) and eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        hermitian_eigh(&self.m)
    }

    /// Convex combination `sum_i w_i rho_i`.
    pub fn mix(states: &[DensityMatrix], weights: &[f64]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidConfig("cannot mix an empty set of states".into()));
        }
        if states.len() != weights.len() {
            return Err(Error::ArityMismatch {
                expected: states.len(),
                got: weights.len(),
            });
        }
        let d = states[0].dim();
        let mut acc = DMatrix::<C64>::zeros(d, d);
        for (s, &w) in states.iter().zip(weights) {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: s.dim(),
                });
            }
            if w != 0.0 {
                acc.zip_apply(&s.m, |a, b| *a += b * w);
            }
        }
        Ok(Self { m: acc })
    }

    /// Row-major `[re, im]` pairs.
    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.m[(i, j)];
                out.push([z.re, z.im]);
            }
        }
        out
    }

    /// Inverse of [`DensityMatrix::to_pairs`]; validates the result.
    pub fn from_pairs(pairs: &[[f64; 2]]) -> Result<Self> {
        let d = (pairs.len() as f64).sqrt().round() as usize;
        if d * d != pairs.len() || d == 0 {
            return Err(Error::NonSquareLength(pairs.len()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| {
            let [re, im] = pairs[i * d + j];
            C64::new(re, im)
        });
        Self::new(m)
    }
}

/// A unit vector on system ⊗ reference whose partial trace is a density matrix.
///
/// Index `i * d + a` holds the amplitude for system basis state `i` and
/// reference basis state `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Purification {
    dim: usize,
    vector: Vec<C64>,
}

impl Purification {
    pub const NORM_TOL: f64 = 1e-10;

    pub fn new(vector: Vec<C64>) -> Result<Self> {
        let len = vector.len();
        let dim = (len as f64).sqrt().round() as usize;
        if dim * dim != len || dim == 0 {
            return Err(Error::NonSquareLength(len));
        }
        let norm = norm(&vector);
        if (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidConfig(format!(
                "purification must have unit norm, got {norm}"
            )));
        }
        Ok(Self { dim, vector })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self) -> &[C64] {
        &self.vector
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vector)
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenvalues at or below this are treated as zero when purifying.
const CLAMP_TOL: f64 = 1e-9;

/// `sum_k sqrt(lambda_k) |k> ⊗ |k>` from the eigendecomposition of `rho`.
pub fn purify(rho: &DensityMatrix) -> Purification {
    let d = rho.dim();
    let (mut values, vectors) = rho.eigh();
    for v in values.iter_mut() {
        if *v < CLAMP_TOL {
            *v = 0.0;
        }
    }
    let total: f64 = values.iter().sum();
    let mut vector = vec![C64::new(0.0, 0.0); d * d];
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        let amp = (lam / total).sqrt();
        for i in 0..d {
            vector[i * d + k] = vectors[(i, k)] * amp;
        }
    }
    Purification { dim: d, vector }
}

/// Partial trace over the reference factor.
pub fn depurify(v: &Purification) -> DensityMatrix {
    DensityMatrix {
        m: partial_trace_reference(&v.vector, v.dim),
    }
}

pub(crate) fn partial_trace_reference(v: &[C64], d: usize) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        let row_i = &v[i * d..(i + 1) * d];
        let diag: f64 = row_i.iter().map(|z| z.norm_sqr()).sum();
        m[(i, i)] = C64::new(diag, 0.0);
        for j in (i + 1)..d {
            let row_j = &v[j * d..(j + 1) * d];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row_i.iter().zip(row_j) {
                acc += a * b.conj();
            }
            m[(i, j)] = acc;
            m[(j, i)] = acc.conj();
        }
    }
    m
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Moves `v` a fraction `eps` of the way towards a random orthogonal direction.
///
/// The direction is the component of an isotropic complex Gaussian vector
/// orthogonal to `v`; the combination `(1 - eps) v + eps o` is renormalized.
pub fn perturb_purification<R: Rng + ?Sized>(
    v: &Purification,
    eps: f64,
    rng: &mut R,
) -> Purification {
    assert!(
        (0.0..=1.0).contains(&eps),
        "perturbation size must lie in [0, 1], got {eps}"
    );
    if eps == 0.0 {
        return v.clone();
    }
    let n = v.vector.len();
    let mut o = vec![C64::new(0.0, 0.0); n];
    loop {
        for z in o.iter_mut() {
            *z = complex_normal(rng);
        }
        let overlap: C64 = v.vector.iter().zip(&o).map(|(a, b)| a.conj() * b).sum();
        for (z, a) in o.iter_mut().zip(&v.vector) {
            *z -= overlap * a;
        }
        let len = norm(&o);
        if len > 1e-12 {
            for z in o.iter_mut() {
                *z /= len;
            }
            break;
        }
    }
    let mut out: Vec<C64> = v
        .vector
        .iter()
        .zip(&o)
        .map(|(a, b)| a * (1.0 - eps) + b * eps)
        .collect();
    let len = norm(&out);
    for z in out.iter_mut() {
        *z /= len;
    }
    Purification {
        dim: v.dim,
        vector: out,
    }
}

/// Prior over true states.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatePrior {
    /// Haar-uniform pure states.
    #[serde(rename = "pure-haar")]
    PureHaar,
    /// Hilbert-Schmidt measure: partial trace of a Haar state on `d ⊗ d`.
    #[default]
    #[serde(rename = "mixed-hs")]
    MixedHs,
}

impl std::str::FromStr for StatePrior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure-haar" => Ok(Self::PureHaar),
            "mixed-hs" => Ok(Self::MixedHs),
            other => Err(Error::InvalidConfig(format!("unknown state prior {other:?}"))),
        }
    }
}

pub fn random_state<R: Rng + ?Sized>(prior: StatePrior, d: usize, rng: &mut R) -> DensityMatrix {
    assert!(d >= 2, "state dimension must be at least 2");
    match prior {
        StatePrior::PureHaar => {
            let psi: Vec<C64> = (0..d).map(|_| complex_normal(rng)).collect();
            DensityMatrix::pure(&psi).expect("gaussian vector is nonzero")
        }
        StatePrior::MixedHs => {
            let mut g: Vec<C64> = (0..d * d).map(|_| complex_normal(rng)).collect();
            let len = norm(&g);
            for z in g.iter_mut() {
                *z /= len;
            }
            DensityMatrix {
                m: partial_trace_reference(&g, d),
            }
        }
    }
}

/// `V diag(values) V^†` wrapped as a state, without validation.
pub(crate) fn state_from_spectrum(values: &[f64], vectors: &DMatrix<C64>) -> DensityMatrix {
    DensityMatrix {
        m: from_spectrum(values, vectors),
    }
}
