//! Hamiltonian matrices: the blockaded symmetric model, its microwave-driven
//! version, and the truncated cavity Jaynes-Cummings model it maps onto.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix, Eigen};
use crate::symbasis::{enumerate_basis, index_of, ModelParams, SymIndex};
use crate::{Error, Result};

/// Relative Hermiticity tolerance used by [`is_hermitian`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisTag {
    Symmetric,
    Product,
    CavityJc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameTag {
    LaserFrame,
    DoublyRotating,
}

/// Dense complex Hermitian matrix plus the basis it is written in.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix {
    entries: CMatrix,
    basis: BasisTag,
    frame: FrameTag,
}

impl HMatrix {
    pub fn new(entries: CMatrix, basis: BasisTag, frame: FrameTag) -> Self {
        assert!(entries.is_square(), "Hamiltonian must be square");
        Self {
            entries,
            basis,
            frame,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    pub fn frame(&self) -> FrameTag {
        self.frame
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    pub fn eigh(&self) -> Result<Eigen> {
        linalg::eigh(&self.entries)
    }
}

/// Microwave (two-photon Raman) probe on the `|0> <-> |1>` clock transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Single-atom Rabi frequency of the probe.
    pub omega_uw: f64,
    /// Probe detuning from the hyperfine splitting.
    pub delta_uw: f64,
}

impl DriveParams {
    pub fn new(omega_uw: f64, delta_uw: f64) -> Result<Self> {
        if !omega_uw.is_finite() || !delta_uw.is_finite() {
            return Err(Error::InvalidParams("drive parameters must be finite".into()));
        }
        if omega_uw < 0.0 {
            return Err(Error::InvalidParams("omega_uw must be non-negative".into()));
        }
        Ok(Self { omega_uw, delta_uw })
    }

    pub fn off() -> Self {
        Self {
            omega_uw: 0.0,
            delta_uw: 0.0,
        }
    }
}

/// How the `|g,n> <-> |e,n-1>` coupling grows with `n`.
///
/// Only [`CouplingLaw::SqrtN`] is physical; `LinearN` exists so the
/// product-space verifier can be shown to catch a wrong collective factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CouplingLaw {
    #[default]
    SqrtN,
    LinearN,
}

impl CouplingLaw {
    fn factor(self, n: usize) -> f64 {
        match self {
            CouplingLaw::SqrtN => (n as f64).sqrt(),
            CouplingLaw::LinearN => n as f64,
        }
    }
}

/// Blockaded symmetric Hamiltonian, energies relative to `n * omega_hf`.
///
/// `<e_k,n-1|H|e_k,n-1> = -(delta_r + offset_k)` and
/// `<e_k,n-1|H|g,n> = sqrt(n) * scale_k * omega_r / 2`.
pub fn build_symmetric(params: &ModelParams) -> HMatrix {
    build_symmetric_with(params, CouplingLaw::SqrtN)
}

pub fn build_symmetric_with(params: &ModelParams, law: CouplingLaw) -> HMatrix {
    let dim = params.dim();
    let mut h = CMatrix::zeros(dim, dim);
    let big_n = params.n_atoms();
    for (k, channel) in params.channels().iter().enumerate() {
        let detuning = params.delta_r() + channel.detuning_offset;
        let rabi = channel.rabi_scale * params.omega_r();
        for n in 1..=big_n {
            let e = pos(SymIndex::excited(k, n - 1), params);
            let g = pos(SymIndex::ground(n), params);
            h[(e, e)] = Complex64::new(-detuning, 0.0);
            let coupling = Complex64::new(law.factor(n) * rabi / 2.0, 0.0);
            h[(e, g)] = coupling;
            h[(g, e)] = coupling;
        }
    }
    HMatrix::new(h, BasisTag::Symmetric, FrameTag::LaserFrame)
}

/// Symmetric Hamiltonian plus a global clock-transition probe, written in
/// the frame rotating at the probe frequency.
///
/// Adds `-m * delta_uw` to every state with excitation number `m` and the
/// collective-spin ladder couplings `sqrt((n+1)(N-n)) * omega_uw / 2` between
/// `|g,n>, |g,n+1>` and `sqrt((m+1)(N-1-m)) * omega_uw / 2` between
/// `|e_k,m>, |e_k,m+1>`. The probe does not touch the Rydberg atom.
pub fn build_driven(params: &ModelParams, drive: &DriveParams) -> HMatrix {
    let mut h = build_symmetric(params).into_entries();
    let big_n = params.n_atoms();
    for (i, idx) in enumerate_basis(params).into_iter().enumerate() {
        h[(i, i)] -= Complex64::new(idx.excitation() as f64 * drive.delta_uw, 0.0);
    }
    let half = drive.omega_uw / 2.0;
    if half != 0.0 {
        for n in 0..big_n {
            let a = pos(SymIndex::ground(n), params);
            let b = pos(SymIndex::ground(n + 1), params);
            let c = Complex64::new((((n + 1) * (big_n - n)) as f64).sqrt() * half, 0.0);
            h[(a, b)] += c;
            h[(b, a)] += c;
        }
        for k in 0..params.n_channels() {
            for m in 0..big_n.saturating_sub(1) {
                let a = pos(SymIndex::excited(k, m), params);
                let b = pos(SymIndex::excited(k, m + 1), params);
                let c = Complex64::new((((m + 1) * (big_n - 1 - m)) as f64).sqrt() * half, 0.0);
                h[(a, b)] += c;
                h[(b, a)] += c;
            }
        }
    }
    HMatrix::new(h, BasisTag::Symmetric, FrameTag::DoublyRotating)
}

/// Cavity QED Jaynes-Cummings Hamiltonian truncated to at most `truncation`
/// excitations, in absolute energies.
///
/// Basis order `|n,g>` for `n = 0..=truncation`, then `|n,e>` for
/// `n = 0..truncation`, so that `|n,g> <-> |g,n>` and `|n,e> <-> |e,n>` line up
/// with the symmetric ordering. Mapping: `omega_c = omega_hf`,
/// `omega_eg = omega_hf - delta_r`, `g = omega_r / 2`.
pub fn build_cavity_jc(params: &ModelParams, truncation: usize) -> Result<HMatrix> {
    if params.n_channels() != 1 {
        return Err(Error::Unsupported(
            "the cavity Jaynes-Cummings mapping needs exactly one Rydberg channel".into(),
        ));
    }
    if truncation == 0 {
        return Err(Error::Domain("truncation must be at least 1".into()));
    }
    let omega_c = params.omega_hf();
    let omega_eg = params.omega_hf() - params.delta_r();
    let g = params.omega_r() / 2.0;
    let dim = 2 * truncation + 1;
    let photon_g = |n: usize| n;
    let photon_e = |n: usize| truncation + 1 + n;
    let mut h = CMatrix::zeros(dim, dim);
    for n in 0..=truncation {
        h[(photon_g(n), photon_g(n))] = Complex64::new(n as f64 * omega_c, 0.0);
    }
    for n in 0..truncation {
        h[(photon_e(n), photon_e(n))] = Complex64::new(n as f64 * omega_c + omega_eg, 0.0);
        // a sigma_+ |n+1, g> = sqrt(n+1) |n, e>
        let c = Complex64::new(g * ((n + 1) as f64).sqrt(), 0.0);
        h[(photon_e(n), photon_g(n + 1))] = c;
        h[(photon_g(n + 1), photon_e(n))] = c;
    }
    Ok(HMatrix::new(h, BasisTag::CavityJc, FrameTag::LaserFrame))
}

/// Adds back the linear ladder `m * omega_hf` (`m` = excitation number) to a
/// symmetric Hamiltonian.
pub fn restore_ladder(h: &HMatrix, params: &ModelParams) -> HMatrix {
    let mut entries = h.entries().clone();
    for (i, idx) in enumerate_basis(params).into_iter().enumerate() {
        entries[(i, i)] += Complex64::new(idx.excitation() as f64 * params.omega_hf(), 0.0);
    }
    HMatrix::new(entries, h.basis(), h.frame())
}

/// `max |H - H^dagger| <= 1e-12 * max |H|`.
pub fn is_hermitian(h: &HMatrix) -> bool {
    let scale = h.max_abs();
    linalg::hermiticity_defect(h.entries()) <= HERMITIAN_TOLERANCE * scale
}

fn pos(idx: SymIndex, params: &ModelParams) -> usize {
    index_of(idx, params).expect("index generated from params")
}
