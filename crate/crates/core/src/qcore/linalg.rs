use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// The input is symmetrized as `(m + m^†)/2` first so that rounding noise in
/// the strictly lower triangle cannot leak into the result.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Rebuilds `V diag(values) V^†`.
pub(crate) fn from_spectrum(values: &[f64], vectors: &DMatrix<C64>) -> DMatrix<C64> {
    let d = vectors.nrows();
    let mut out = DMatrix::<C64>::zeros(d, d);
    for (k, &lam) in values.iter().enumerate() {
        if lam == 0.0 {
            continue;
        }
        for j in 0..d {
            let vj = vectors[(j, k)].conj() * lam;
            for i in 0..d {
                out[(i, j)] += vectors[(i, k)] * vj;
            }
        }
    }
    out
}

/// Largest elementwise deviation from Hermiticity.
pub(crate) fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
