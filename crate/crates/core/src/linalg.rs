//! Dense Hermitian eigen-decomposition for the small matrices used here.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Required eigen-residual `||H v - e v|| <= RESIDUAL_TOLERANCE * ||H||`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Eigenpairs sorted by ascending eigenvalue; `vectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Largest entry magnitude.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `|M - M^dagger|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Hermitian eigen-decomposition with a residual check.
///
/// The input is symmetrized (`(M + M^dagger) / 2`) before decomposition so
/// round-off asymmetry does not leak into the eigenvectors.
pub fn eigh(m: &CMatrix) -> Result<Eigen> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let decomposition = SymmetricEigen::new(sym.clone());

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomposition.eigenvalues[a].total_cmp(&decomposition.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| decomposition.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = decomposition.eigenvectors.column(src).into_owned();
        fix_phase(&mut v);
        vectors.set_column(dst, &v);
    }

    let scale = max_abs(&sym).max(f64::MIN_POSITIVE) * n as f64;
    let tolerance = RESIDUAL_TOLERANCE * scale;
    let mut residual = 0.0f64;
    for (k, &value) in values.iter().enumerate() {
        let v = vectors.column(k);
        let r = &sym * v - v.scale(value);
        residual = residual.max(r.norm());
    }
    if !(residual <= tolerance) {
        return Err(Error::Convergence {
            residual,
            tolerance,
        });
    }
    Ok(Eigen { values, vectors })
}

/// Rotates `v` so its largest-magnitude component is real and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // ties resolved toward the lower index
        if z.norm() > best_abs + 1e-12 {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best] / v[best].norm();
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// `exp(-i H t) psi` from a precomputed decomposition of `H`.
pub fn propagate_with(eigen: &Eigen, psi: &CVector, t: f64) -> CVector {
    let coefficients = eigen.vectors.adjoint() * psi;
    let phased = CVector::from_iterator(
        coefficients.len(),
        coefficients
            .iter()
            .zip(&eigen.values)
            .map(|(c, &e)| c * Complex64::from_polar(1.0, -e * t)),
    );
    &eigen.vectors * phased
}
