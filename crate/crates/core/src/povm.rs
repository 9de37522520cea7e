//! Single-qubit POVM families and their oriented tensor products.
//!
//! Each family is a set of Bloch-vector "legs" `c (I + s·σ)` summing to the
//! identity. A qubit's orientation is the rotation
//! `U = exp(-i θx σx/2) exp(-i θy σy/2) exp(-i θz σz/2)` applied by conjugation
//! to every leg. With this convention `θy = π/2` turns the `+z` leg of the basis
//! POVM into `+x`. Product outcomes are ordered lexicographically with qubit 0
//! as the most significant digit.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::qcore::C64;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmFamily {
    /// Projective measurement, two antipodal legs.
    Basis,
    /// Three coplanar legs at 120 degrees in the x-z plane.
    Trine,
    /// Symmetric informationally complete tetrahedron.
    Sic,
    /// The six Pauli eigenprojectors, each scaled by 1/3.
    #[serde(rename = "six")]
    SixState,
}

impl PovmFamily {
    pub const ALL: [PovmFamily; 4] = [Self::Basis, Self::Trine, Self::Sic, Self::SixState];

    pub fn legs(self) -> usize {
        match self {
            Self::Basis => 2,
            Self::Trine => 3,
            Self::Sic => 4,
            Self::SixState => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Basis => "basis",
            Self::Trine => "trine",
            Self::Sic => "sic",
            Self::SixState => "six",
        }
    }

    /// Unrotated legs of the family.
    pub fn reference_legs(self) -> Vec<Leg> {
        match self {
            Self::Basis => vec![
                Leg::new(0.5, [0.0, 0.0, 1.0]),
                Leg::new(0.5, [0.0, 0.0, -1.0]),
            ],
            Self::Trine => (0..3)
                .map(|k| {
                    let phi = 2.0 * PI * k as f64 / 3.0;
                    Leg::new(1.0 / 3.0, [phi.sin(), 0.0, phi.cos()])
                })
                .collect(),
            Self::Sic => {
                let s = 1.0 / 3f64.sqrt();
                [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
                    .into_iter()
                    .map(|[x, y, z]| Leg::new(0.25, [x * s, y * s, z * s]))
                    .collect()
            }
            Self::SixState => {
                let mut legs = Vec::with_capacity(6);
                for axis in 0..3 {
                    for sign in [1.0, -1.0] {
                        let mut b = [0.0; 3];
                        b[axis] = sign;
                        legs.push(Leg::new(1.0 / 6.0, b));
                    }
                }
                legs
            }
        }
    }
}

impl fmt::Display for PovmFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PovmFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "basis" => Ok(Self::Basis),
            "trine" => Ok(Self::Trine),
            "sic" => Ok(Self::Sic),
            "six" => Ok(Self::SixState),
            other => Err(Error::InvalidConfig(format!("unknown POVM family {other:?}"))),
        }
    }
}

/// A qubit outcome operator `scale (I + bloch·σ)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Leg {
    pub scale: f64,
    pub bloch: [f64; 3],
}

impl Leg {
    pub fn new(scale: f64, bloch: [f64; 3]) -> Self {
        Self { scale, bloch }
    }

    pub fn operator(&self) -> [[C64; 2]; 2] {
        let c = self.scale;
        let [x, y, z] = self.bloch;
        [
            [C64::new(c * (1.0 + z), 0.0), C64::new(c * x, -c * y)],
            [C64::new(c * x, c * y), C64::new(c * (1.0 - z), 0.0)],
        ]
    }
}

/// Per-qubit rotation angles `(θx, θy, θz)`, canonicalized to `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct OrientationAngles {
    per_qubit: Vec<[f64; 3]>,
}

impl OrientationAngles {
    pub fn new(per_qubit: Vec<[f64; 3]>) -> Result<Self, Error> {
        if per_qubit.is_empty() {
            return Err(Error::InvalidConfig("at least one qubit is required".into()));
        }
        let mut out = per_qubit;
        for triple in out.iter_mut() {
            for a in triple.iter_mut() {
                if !a.is_finite() {
                    return Err(Error::NonFinite("orientation angle".into()));
                }
                *a = canonical_angle(*a);
            }
        }
        Ok(Self { per_qubit: out })
    }

    pub fn zeros(n_qubits: usize) -> Self {
        Self {
            per_qubit: vec![[0.0; 3]; n_qubits],
        }
    }

    /// Builds from a flat list `[θx0, θy0, θz0, θx1, ...]`.
    pub fn from_flat(flat: &[f64]) -> Result<Self, Error> {
        if flat.is_empty() || !flat.len().is_multiple_of(3) {
            return Err(Error::InvalidConfig(format!(
                "expected a multiple of three angles, got {}",
                flat.len()
            )));
        }
        Self::new(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.per_qubit.len()
    }

    pub fn per_qubit(&self) -> &[[f64; 3]] {
        &self.per_qubit
    }

    pub fn flat(&self) -> Vec<f64> {
        self.per_qubit.iter().flatten().copied().collect()
    }
}

impl TryFrom<Vec<[f64; 3]>> for OrientationAngles {
    type Error = Error;

    fn try_from(v: Vec<[f64; 3]>) -> Result<Self, Error> {
        Self::new(v)
    }
}

impl From<OrientationAngles> for Vec<[f64; 3]> {
    fn from(a: OrientationAngles) -> Self {
        a.per_qubit
    }
}

fn canonical_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// An oriented product POVM on `n` qubits.
#[derive(Clone, Debug)]
pub struct ProductPovm {
    n_qubits: usize,
    family: PovmFamily,
    angles: OrientationAngles,
    outcomes: Vec<DMatrix<C64>>,
    // per outcome, column-major (re, im) pairs of the operator
    flat: Vec<f64>,
}

impl PartialEq for ProductPovm {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.angles == other.angles
    }
}

impl ProductPovm {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn family(&self) -> PovmFamily {
        self.family
    }

    pub fn angles(&self) -> &OrientationAngles {
        &self.angles
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[DMatrix<C64>] {
        &self.outcomes
    }

    pub(crate) fn flat(&self) -> &[f64] {
        &self.flat
    }
}

type Mat2 = [[C64; 2]; 2];

fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn adjoint2(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

/// `exp(-i θx σx/2) exp(-i θy σy/2) exp(-i θz σz/2)`.
pub fn qubit_rotation([tx, ty, tz]: [f64; 3]) -> [[C64; 2]; 2] {
    let (sx, cx) = (tx / 2.0).sin_cos();
    let (sy, cy) = (ty / 2.0).sin_cos();
    let (sz, cz) = (tz / 2.0).sin_cos();
    let zero = C64::new(0.0, 0.0);
    let rx = [[C64::new(cx, 0.0), C64::new(0.0, -sx)], [C64::new(0.0, -sx), C64::new(cx, 0.0)]];
    let ry = [[C64::new(cy, 0.0), C64::new(-sy, 0.0)], [C64::new(sy, 0.0), C64::new(cy, 0.0)]];
    let rz = [[C64::new(cz, -sz), zero], [zero, C64::new(cz, sz)]];
    mul2(&mul2(&rx, &ry), &rz)
}

/// Oriented single-qubit legs for one rotation triple.
pub fn oriented_legs(family: PovmFamily, angles: [f64; 3]) -> Vec<[[C64; 2]; 2]> {
    let u = qubit_rotation(angles);
    let ud = adjoint2(&u);
    family
        .reference_legs()
        .iter()
        .map(|leg| {
            let mut m = mul2(&mul2(&u, &leg.operator()), &ud);
            // exact Hermiticity on the diagonal
            m[0][0].im = 0.0;
            m[1][1].im = 0.0;
            m[1][0] = m[0][1].conj();
            m
        })
        .collect()
}

/// Orients the family on every qubit and tensors all outcome combinations.
pub fn build_povm(family: PovmFamily, angles: &OrientationAngles) -> ProductPovm {
    let n = angles.n_qubits();
    let per_qubit: Vec<Vec<DMatrix<C64>>> = angles
        .per_qubit()
        .iter()
        .map(|&a| {
            oriented_legs(family, a)
                .into_iter()
                .map(|m| DMatrix::from_fn(2, 2, |i, j| m[i][j]))
                .collect()
        })
        .collect();
    let mut outcomes: Vec<DMatrix<C64>> = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
    for legs in &per_qubit {
        let mut next = Vec::with_capacity(outcomes.len() * legs.len());
        for acc in &outcomes {
            for leg in legs {
                next.push(acc.kronecker(leg));
            }
        }
        outcomes = next;
    }
    let flat = outcomes
        .iter()
        .flat_map(|m| m.as_slice().iter().flat_map(|z| [z.re, z.im]))
        .collect();
    ProductPovm {
        n_qubits: n,
        family,
        angles: angles.clone(),
        outcomes,
        flat,
    }
}

/// Independent uniform angles on `[0, 2π)` for every qubit and axis.
pub fn random_orientation<R: Rng + ?Sized>(rng: &mut R, n_qubits: usize) -> OrientationAngles {
    let per_qubit = (0..n_qubits)
        .map(|_| {
            [
                rng.random::<f64>() * TAU,
                rng.random::<f64>() * TAU,
                rng.random::<f64>() * TAU,
            ]
        })
        .collect();
    OrientationAngles::new(per_qubit).expect("finite angles")
}
