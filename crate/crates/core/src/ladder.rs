//! The dressed-state (Jaynes-Cummings) ladder of the undriven symmetric model.
//!
//! The undriven Hamiltonian is block diagonal in the excitation number `n`.
//! Block `n >= 1` couples `|g,n>` to `|e_k,n-1>` for every channel `k`. For a
//! single channel the two dressed levels are
//!
//! ```text
//! eps_{n,+-} = ( -delta_r +- sign(delta_r) * sqrt(n omega_r^2 + delta_r^2) ) / 2
//! ```
//!
//! (relative to `n * omega_hf`). The `+` branch is the ground-like state
//! `|g~,n>` and the `-` branch the Rydberg-like state `|e~,n-1>`. At exact
//! resonance the `+` label goes to the positive eigenvalue.

use serde::{Deserialize, Serialize};

use crate::hamiltonians::build_symmetric;
use crate::linalg::{self, CMatrix, CVector};
use crate::symbasis::{index_of, ModelParams, SymIndex};
use crate::{Error, Result};

/// Label of a dressed branch within an excitation block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Ground-like `|g~,n>` (single channel).
    Plus,
    /// Rydberg-like `|e~,n-1>` (single channel).
    Minus,
    /// Multi-channel branch, `0` = highest energy in the block.
    Sorted(usize),
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Branch::Plus => f.write_str("plus"),
            Branch::Minus => f.write_str("minus"),
            Branch::Sorted(k) => write!(f, "b{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DressedLevel {
    pub energy: f64,
    pub branch: Branch,
    /// Eigenvector in the full symmetric basis.
    pub vector: CVector,
}

#[derive(Debug, Clone)]
pub struct LadderBlock {
    pub n: usize,
    /// Ascending in energy.
    pub levels: Vec<DressedLevel>,
    /// `theta_n` (single channel with `omega_r > 0` only).
    pub mixing_angle: Option<f64>,
    /// `|eps_+ - eps_-|`; for several channels the spread of the block.
    pub splitting: f64,
}

impl LadderBlock {
    pub fn level(&self, branch: Branch) -> Option<&DressedLevel> {
        self.levels.iter().find(|l| l.branch == branch)
    }

    pub fn energy(&self, branch: Branch) -> Option<f64> {
        self.level(branch).map(|l| l.energy)
    }

    /// Branch labels, highest energy first.
    pub fn branches(&self) -> Vec<Branch> {
        self.levels.iter().rev().map(|l| l.branch).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchShift {
    pub branch: Branch,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct LadderResult {
    /// Blocks for `n = 1..=N`.
    pub blocks: Vec<LadderBlock>,
    /// Nonlinear shifts `eps_{2,b} - 2 eps_{1,b}` per branch (needs `N >= 2`).
    pub kappa: Vec<BranchShift>,
}

impl LadderResult {
    pub fn block(&self, n: usize) -> Option<&LadderBlock> {
        self.blocks.iter().find(|b| b.n == n)
    }

    pub fn energy(&self, n: usize, branch: Branch) -> Option<f64> {
        self.block(n)?.energy(branch)
    }

    pub fn kappa(&self, branch: Branch) -> Option<f64> {
        self.kappa.iter().find(|k| k.branch == branch).map(|k| k.value)
    }

    pub fn kappa_plus(&self) -> Option<f64> {
        self.kappa(Branch::Plus)
    }

    pub fn kappa_minus(&self) -> Option<f64> {
        self.kappa(Branch::Minus)
    }
}

/// Basis positions of excitation block `n` (`|g,n>` first, then channels).
pub fn block_indices(params: &ModelParams, n: usize) -> Vec<usize> {
    let mut out = vec![index_of(SymIndex::ground(n), params).expect("valid block")];
    if n >= 1 {
        for k in 0..params.n_channels() {
            out.push(index_of(SymIndex::excited(k, n - 1), params).expect("valid block"));
        }
    }
    out
}

/// Diagonalizes each excitation block of the symmetric Hamiltonian.
pub fn ladder(params: &ModelParams) -> Result<LadderResult> {
    let h = build_symmetric(params);
    let dim = params.dim();
    let single = params.n_channels() == 1;
    let mut blocks = Vec::with_capacity(params.n_atoms());
    for n in 1..=params.n_atoms() {
        let idx = block_indices(params, n);
        let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| h.get(idx[i], idx[j]));
        let eigen = linalg::eigh(&sub)?;
        let m = idx.len();
        let mut levels = Vec::with_capacity(m);
        for (rank, &energy) in eigen.values.iter().enumerate() {
            let local = eigen.vector(rank);
            let mut vector = CVector::zeros(dim);
            for (i, &p) in idx.iter().enumerate() {
                vector[p] = local[i];
            }
            let branch = if single {
                // rank 1 is the upper level; it is ground-like for delta_r >= 0
                let upper = rank == 1;
                if upper == (params.delta_r() >= 0.0) {
                    Branch::Plus
                } else {
                    Branch::Minus
                }
            } else {
                Branch::Sorted(m - 1 - rank)
            };
            levels.push(DressedLevel {
                energy,
                branch,
                vector,
            });
        }
        let splitting = eigen.values[m - 1] - eigen.values[0];
        let mixing_angle = if single && params.omega_r() > 0.0 {
            Some(mixing_angle_unchecked(params, n))
        } else {
            None
        };
        blocks.push(LadderBlock {
            n,
            levels,
            mixing_angle,
            splitting,
        });
    }

    let mut kappa = Vec::new();
    if params.n_atoms() >= 2 {
        for level in &blocks[0].levels {
            if let Some(e2) = blocks[1].energy(level.branch) {
                kappa.push(BranchShift {
                    branch: level.branch,
                    value: e2 - 2.0 * level.energy,
                });
            }
        }
        // highest branch first, matching LadderBlock::branches
        kappa.reverse();
    }
    Ok(LadderResult { blocks, kappa })
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Closed-form single-channel dressed energies `(eps_{n,+}, eps_{n,-})`.
///
/// Written without the cancellation of the textbook form so that the small
/// light shift of the ground-like branch keeps full relative accuracy at
/// large detuning.
pub fn analytic_energies(omega_r: f64, delta_r: f64, n: usize) -> (f64, f64) {
    let coupling_sq = n as f64 * omega_r * omega_r;
    let root = (coupling_sq + delta_r * delta_r).sqrt();
    let s = sign(delta_r);
    let denom = root + delta_r.abs();
    let plus = if denom > 0.0 { s * coupling_sq / (2.0 * denom) } else { 0.0 };
    let minus = -s * denom / 2.0;
    (plus, minus)
}

/// Closed-form nonlinear shifts `(kappa_+, kappa_-)`.
pub fn kappa_closed_form(omega_r: f64, delta_r: f64) -> (f64, f64) {
    let s = sign(delta_r);
    let w2 = omega_r * omega_r;
    let d = delta_r.abs();
    let r1 = (w2 + delta_r * delta_r).sqrt();
    let r2 = (2.0 * w2 + delta_r * delta_r).sqrt();
    let denom = (r1 + r2) * (r1 + d) * (r2 + d);
    let plus = if denom > 0.0 { -s * w2 * w2 / denom } else { 0.0 };
    let minus = (delta_r - s * (r2 - 2.0 * r1)) / 2.0;
    (plus, minus)
}

/// Mixing angle `theta_n = atan2(sqrt(n) omega_r, delta_r)` in `(0, pi)`.
///
/// `(cos(theta/2), sin(theta/2))` are the `|g,n>`, `|e,n-1>` amplitudes of the
/// upper dressed level of block `n`.
pub fn mixing_angle(params: &ModelParams, n: usize) -> Result<f64> {
    if params.n_channels() != 1 {
        return Err(Error::Unsupported("mixing angle is defined for a single channel".into()));
    }
    if params.omega_r() <= 0.0 {
        return Err(Error::Domain("mixing angle undefined for omega_r = 0".into()));
    }
    if n == 0 || n > params.n_atoms() {
        return Err(Error::Domain(format!("n = {n} outside 1..={}", params.n_atoms())));
    }
    Ok(mixing_angle_unchecked(params, n))
}

fn mixing_angle_unchecked(params: &ModelParams, n: usize) -> f64 {
    ((n as f64).sqrt() * params.omega_r()).atan2(params.delta_r())
}

/// Leading far-detuned behaviour of the nonlinear shifts (signed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaLimits {
    /// `-sign(delta_r) * omega_r^4 / (8 |delta_r|^3)`
    pub kappa_plus_limit: f64,
    /// `delta_r`
    pub kappa_minus_limit: f64,
}

/// Valid for `|delta_r| >= 5 omega_r`.
pub fn kappa_asymptotics(params: &ModelParams) -> Result<KappaLimits> {
    let (w, d) = (params.omega_r(), params.delta_r());
    if d.abs() < 5.0 * w || d == 0.0 {
        return Err(Error::Domain(format!(
            "asymptotic form needs |delta_r| >= 5 omega_r (got delta_r = {d}, omega_r = {w})"
        )));
    }
    Ok(KappaLimits {
        kappa_plus_limit: -sign(d) * w.powi(4) / (8.0 * d.abs().powi(3)),
        kappa_minus_limit: d,
    })
}
