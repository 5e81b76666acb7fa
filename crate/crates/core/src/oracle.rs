//! Brute-force product-space model of `N` distinguishable atoms.
//!
//! Each atom has levels `0` (lower clock state), `1` (upper clock state) and
//! one Rydberg level per channel, encoded as digits `0, 1, 2 + k`. Product
//! states are base-`(2 + K)` numbers with atom 0 as the most significant
//! digit. Energies are relative to `n * omega_hf`, where a Rydberg atom
//! counts as one excitation, so the symmetric model is recovered exactly by
//! projecting onto permutation-symmetric states.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hamiltonians::{build_symmetric, BasisTag, DriveParams, FrameTag, HMatrix};
use crate::linalg::{self, CMatrix};
use crate::symbasis::{enumerate_basis, ModelParams, SymIndex};
use crate::{Error, Result};

/// Largest product-space dimension accepted.
pub const MAX_PRODUCT_DIM: usize = 100_000;

/// Largest product-space dimension materialized as a dense matrix.
pub const MAX_DENSE_DIM: usize = 4096;

/// Required agreement of the projected and symmetric matrices.
pub const PROJECTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Blockade {
    /// Pairwise energy penalty for two atoms in any Rydberg levels.
    Finite(f64),
    /// States with two or more Rydberg atoms are projected out.
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductParams {
    base: ModelParams,
    blockade: Blockade,
}

impl ProductParams {
    pub fn new(base: ModelParams, blockade: Blockade) -> Result<Self> {
        if let Blockade::Finite(b) = blockade {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::InvalidParams(format!("blockade strength must be finite and >= 0, got {b}")));
            }
        }
        let levels = 2 + base.n_channels();
        let dim = (levels as f64).powi(base.n_atoms() as i32);
        if dim > MAX_PRODUCT_DIM as f64 {
            return Err(Error::Capacity(format!(
                "product dimension {levels}^{} exceeds {MAX_PRODUCT_DIM}",
                base.n_atoms()
            )));
        }
        Ok(Self { base, blockade })
    }

    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    pub fn blockade(&self) -> Blockade {
        self.blockade
    }

    pub fn levels(&self) -> usize {
        2 + self.base.n_channels()
    }

    pub fn dim(&self) -> usize {
        self.levels().pow(self.base.n_atoms() as u32)
    }

    /// Per-atom levels of product state `index`, atom 0 first.
    pub fn digits(&self, index: usize) -> Vec<usize> {
        let (levels, n) = (self.levels(), self.base.n_atoms());
        let mut out = vec![0; n];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % levels;
            rest /= levels;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.levels() + d)
    }
}

fn rydberg_count(digits: &[usize]) -> usize {
    digits.iter().filter(|&&d| d >= 2).count()
}

fn excitation(digits: &[usize]) -> usize {
    digits.iter().filter(|&&d| d >= 1).count()
}

/// Sparse Hermitian operator on the product space.
#[derive(Debug, Clone)]
pub struct ProductOperator {
    dim: usize,
    diagonal: Vec<f64>,
    /// Upper-triangle entries `(row, col, value)` with `row < col`.
    upper: Vec<(usize, usize, Complex64)>,
}

impl ProductOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dense copy; fails above [`MAX_DENSE_DIM`].
    pub fn to_dense(&self) -> Result<CMatrix> {
        if self.dim > MAX_DENSE_DIM {
            return Err(Error::Capacity(format!(
                "dense product matrix of dimension {} exceeds {MAX_DENSE_DIM}",
                self.dim
            )));
        }
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (i, &d) in self.diagonal.iter().enumerate() {
            m[(i, i)] = d.into();
        }
        for &(i, j, v) in &self.upper {
            m[(i, j)] += v;
            m[(j, i)] += v.conj();
        }
        Ok(m)
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = self.diagonal.iter().zip(x).map(|(d, v)| v * d).collect();
        for &(i, j, v) in &self.upper {
            y[i] += v * x[j];
            y[j] += v.conj() * x[i];
        }
        y
    }
}

fn assemble(pp: &ProductParams, drive: Option<&DriveParams>) -> ProductOperator {
    let base = &pp.base;
    let dim = pp.dim();
    let mut diagonal = vec![0.0; dim];
    let mut upper = Vec::new();
    let channels = base.channels();
    for (index, d) in diagonal.iter_mut().enumerate() {
        let digits = pp.digits(index);
        let rydberg = rydberg_count(&digits);
        if rydberg >= 2 && pp.blockade == Blockade::Infinite {
            continue;
        }
        for &level in &digits {
            if level >= 2 {
                *d -= base.delta_r() + channels[level - 2].detuning_offset;
            }
        }
        if let Blockade::Finite(b) = pp.blockade {
            *d += b * (rydberg * rydberg.saturating_sub(1) / 2) as f64;
        }
        if let Some(drive) = drive {
            *d -= drive.delta_uw * excitation(&digits) as f64;
        }
        for (atom, &level) in digits.iter().enumerate() {
            if level != 1 {
                continue;
            }
            // laser: |1> -> |r_k> on this atom
            for (k, channel) in channels.iter().enumerate() {
                let mut target = digits.clone();
                target[atom] = 2 + k;
                if rydberg + 1 >= 2 && pp.blockade == Blockade::Infinite {
                    continue;
                }
                let j = pp.index(&target);
                let value = Complex64::new(channel.rabi_scale * base.omega_r() / 2.0, 0.0);
                upper.push((index.min(j), index.max(j), value));
            }
            // probe: |0> <-> |1> on this atom
            if let Some(drive) = drive {
                let mut target = digits.clone();
                target[atom] = 0;
                let j = pp.index(&target);
                upper.push((index.min(j), index.max(j), Complex64::new(drive.omega_uw / 2.0, 0.0)));
            }
        }
    }
    upper.retain(|e| e.2 != Complex64::new(0.0, 0.0));
    ProductOperator { dim, diagonal, upper }
}

/// Product-space Hamiltonian in the laser frame, as a sparse operator.
pub fn product_operator(pp: &ProductParams) -> ProductOperator {
    assemble(pp, None)
}

/// Product-space Hamiltonian with the global clock probe, in the frame
/// rotating with the probe.
pub fn product_driven_operator(pp: &ProductParams, drive: &DriveParams) -> ProductOperator {
    assemble(pp, Some(drive))
}

/// Dense product-space Hamiltonian.
pub fn build_product(pp: &ProductParams) -> Result<HMatrix> {
    Ok(HMatrix::new(product_operator(pp).to_dense()?, BasisTag::Product, FrameTag::LaserFrame))
}

pub fn build_product_driven(pp: &ProductParams, drive: &DriveParams) -> Result<HMatrix> {
    Ok(HMatrix::new(
        product_driven_operator(pp, drive).to_dense()?,
        BasisTag::Product,
        FrameTag::DoublyRotating,
    ))
}

/// Isometry from a symmetric basis into the product space. Column `j` is
/// stored sparsely as its non-zero product indices, all sharing one
/// amplitude.
#[derive(Debug, Clone)]
pub struct Symmetrizer {
    product_dim: usize,
    columns: Vec<(Vec<usize>, f64)>,
}

impl Symmetrizer {
    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn product_dim(&self) -> usize {
        self.product_dim
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); self.product_dim];
        let (support, amp) = &self.columns[j];
        for &i in support {
            v[i] = (*amp).into();
        }
        v
    }

    /// Dense `product_dim x cols` matrix.
    pub fn to_dense(&self) -> Result<CMatrix> {
        if self.product_dim > MAX_DENSE_DIM {
            return Err(Error::Capacity(format!(
                "dense symmetrizer with {} rows exceeds {MAX_DENSE_DIM}",
                self.product_dim
            )));
        }
        let mut m = CMatrix::zeros(self.product_dim, self.cols());
        for j in 0..self.cols() {
            let (support, amp) = &self.columns[j];
            for &i in support {
                m[(i, j)] = (*amp).into();
            }
        }
        Ok(m)
    }

    /// `S^dagger H S` for a sparse product operator.
    pub fn project(&self, op: &ProductOperator) -> CMatrix {
        let cols = self.cols();
        let mut out = CMatrix::zeros(cols, cols);
        for j in 0..cols {
            let hs = op.apply(&self.column(j));
            for i in 0..cols {
                let (support, amp) = &self.columns[i];
                out[(i, j)] = support.iter().map(|&p| hs[p]).sum::<Complex64>() * *amp;
            }
        }
        out
    }

    /// Largest entry of `|S^dagger S - 1|`.
    pub fn isometry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.cols() {
            for j in 0..self.cols() {
                let (si, ai) = &self.columns[i];
                let (sj, aj) = &self.columns[j];
                let overlap = si.iter().filter(|p| sj.binary_search(p).is_ok()).count() as f64 * ai * aj;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((overlap - target).abs());
            }
        }
        worst
    }
}

/// Product states whose level occupations match `counts` (atoms per level).
fn occupation_support(pp: &ProductParams, counts: &[usize]) -> Vec<usize> {
    let levels = pp.levels();
    (0..pp.dim())
        .filter(|&index| {
            let mut seen = vec![0; levels];
            for d in pp.digits(index) {
                seen[d] += 1;
            }
            seen == counts
        })
        .collect()
}

fn normalized_column(support: Vec<usize>) -> (Vec<usize>, f64) {
    let amp = 1.0 / (support.len() as f64).sqrt();
    (support, amp)
}

/// Maps every symmetric basis state to the normalized equal superposition of
/// its permutations, in [`enumerate_basis`] order.
pub fn symmetrize(pp: &ProductParams) -> Symmetrizer {
    let base = &pp.base;
    let n = base.n_atoms();
    let columns = enumerate_basis(base)
        .into_iter()
        .map(|idx| {
            let mut counts = vec![0; pp.levels()];
            match idx {
                SymIndex::Ground { n: ones } => {
                    counts[0] = n - ones;
                    counts[1] = ones;
                }
                SymIndex::Excited { channel, n: ones } => {
                    counts[0] = n - 1 - ones;
                    counts[1] = ones;
                    counts[2 + channel] = 1;
                }
            }
            normalized_column(occupation_support(pp, &counts))
        })
        .collect();
    Symmetrizer {
        product_dim: pp.dim(),
        columns,
    }
}

/// The whole permutation-symmetric sector, including multi-Rydberg states.
/// Returns the isometry and the Rydberg count of each column.
pub fn symmetric_sector(pp: &ProductParams) -> (Symmetrizer, Vec<usize>) {
    let levels = pp.levels();
    let mut groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for index in 0..pp.dim() {
        let mut counts = vec![0; levels];
        for d in pp.digits(index) {
            counts[d] += 1;
        }
        groups.entry(counts).or_default().push(index);
    }
    let mut keys: Vec<Vec<usize>> = groups.keys().cloned().collect();
    keys.sort();
    let rydberg: Vec<usize> = keys.iter().map(|c| c[2..].iter().sum()).collect();
    let columns = keys.into_iter().map(|k| normalized_column(groups.remove(&k).unwrap())).collect();
    (
        Symmetrizer {
            product_dim: pp.dim(),
            columns,
        },
        rydberg,
    )
}

/// Permutation operator exchanging atoms `a` and `b`.
pub fn atom_swap(pp: &ProductParams, a: usize, b: usize) -> Result<CMatrix> {
    let n = pp.base.n_atoms();
    if a >= n || b >= n {
        return Err(Error::Domain(format!("atom index out of range 0..{n}")));
    }
    if pp.dim() > MAX_DENSE_DIM {
        return Err(Error::Capacity(format!("dense swap of dimension {} exceeds {MAX_DENSE_DIM}", pp.dim())));
    }
    let mut m = CMatrix::zeros(pp.dim(), pp.dim());
    for index in 0..pp.dim() {
        let mut digits = pp.digits(index);
        digits.swap(a, b);
        m[(pp.index(&digits), index)] = 1.0.into();
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// Largest entry of `|S^dagger H_product S - H_symmetric|` over the
    /// singly-excited symmetric basis.
    pub max_matrix_deviation: f64,
    /// Largest difference between symmetric-model eigenvalues and the
    /// matching product-space eigenvalues.
    pub max_eigenvalue_deviation: f64,
}

/// Checks the symmetric model against the product space.
///
/// With infinite blockade the projected matrix must equal the symmetric one.
/// With finite blockade the symmetric sector is diagonalized in full and the
/// eigenvalues whose eigenvectors carry less than half their weight on
/// multi-Rydberg states are compared with the symmetric-model spectrum.
pub fn verify_projection(pp: &ProductParams) -> Result<ProjectionReport> {
    verify_against(pp, &build_symmetric(&pp.base))
}

/// As [`verify_projection`], against an arbitrary candidate symmetric matrix.
pub fn verify_against(pp: &ProductParams, candidate: &HMatrix) -> Result<ProjectionReport> {
    if candidate.dim() != pp.base.dim() {
        return Err(Error::Domain(format!(
            "candidate has dimension {}, symmetric basis has {}",
            candidate.dim(),
            pp.base.dim()
        )));
    }
    let op = product_operator(pp);
    let projected = symmetrize(pp).project(&op);
    let max_matrix_deviation = linalg::max_abs(&(&projected - candidate.entries()));
    let reference = candidate.eigh()?.values;

    let product_values = match pp.blockade {
        Blockade::Infinite => linalg::eigh(&projected)?.values,
        Blockade::Finite(_) => {
            let (sector, rydberg) = symmetric_sector(pp);
            let eigen = linalg::eigh(&sector.project(&op))?;
            (0..eigen.len())
                .filter(|&j| {
                    let v = eigen.vector(j);
                    let multi: f64 = rydberg
                        .iter()
                        .enumerate()
                        .filter(|(_, r)| **r >= 2)
                        .map(|(i, _)| v[i].norm_sqr())
                        .sum();
                    multi < 0.5
                })
                .map(|j| eigen.values[j])
                .collect()
        }
    };
    if product_values.len() != reference.len() {
        return Err(Error::Domain(format!(
            "{} blockade-compatible product levels for {} symmetric levels",
            product_values.len(),
            reference.len()
        )));
    }
    let max_eigenvalue_deviation = product_values
        .iter()
        .zip(&reference)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    Ok(ProjectionReport {
        max_matrix_deviation,
        max_eigenvalue_deviation,
    })
}

/// Random `(omega_r, delta_r)` draws in `[0.1, 3] x [-3, 3]`.
pub fn random_draws(seed: u64, count: usize) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (rng.random_range(0.1..3.0), rng.random_range(-3.0..3.0)))
        .collect()
}
