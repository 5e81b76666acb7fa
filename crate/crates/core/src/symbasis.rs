//! Symmetric, perfectly blockaded basis.
//!
//! For `N` atoms and `K` Rydberg channels the basis is
//!
//! ```text
//! |g,0>, ..., |g,N>, |e_1,0>, ..., |e_1,N-1>, |e_2,0>, ..., |e_K,N-1>
//! ```
//!
//! where `|g,n>` is the Dicke state with `n` atoms in `|1>` and `|e_k,n>` has
//! one atom in Rydberg channel `k` and `n` of the remaining atoms in `|1>`.
//! Channels are indexed from zero; channel 0 is the reference transition.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the squared norm of a state after evolution.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// One Rydberg level coupled to `|1>`.
///
/// Its Rabi frequency is `rabi_scale * omega_r` and its laser detuning is
/// `delta_r + detuning_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RydbergChannel {
    pub rabi_scale: f64,
    pub detuning_offset: f64,
}

impl RydbergChannel {
    pub const REFERENCE: RydbergChannel = RydbergChannel {
        rabi_scale: 1.0,
        detuning_offset: 0.0,
    };

    pub fn new(rabi_scale: f64, detuning_offset: f64) -> Self {
        Self {
            rabi_scale,
            detuning_offset,
        }
    }

    /// The `m_J = +1/2` companion of a `m_J = +3/2` reference line: Rabi
    /// frequency reduced by `1/sqrt(3)` and shifted by the Zeeman splitting.
    ///
    /// The sign of `zeeman_offset` is a configuration choice; the default
    /// used by the CLI is positive (the companion line needs a larger laser
    /// detuning to be reached).
    pub fn zeeman_companion(zeeman_offset: f64) -> Self {
        Self::new(1.0 / 3f64.sqrt(), zeeman_offset)
    }
}

/// Physical parameters of the blockaded ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    n_atoms: usize,
    omega_r: f64,
    delta_r: f64,
    omega_hf: f64,
    channels: Vec<RydbergChannel>,
}

impl ModelParams {
    /// Single-channel model.
    pub fn new(n_atoms: usize, omega_r: f64, delta_r: f64, omega_hf: f64) -> Result<Self> {
        let params = Self {
            n_atoms,
            omega_r,
            delta_r,
            omega_hf,
            channels: vec![RydbergChannel::REFERENCE],
        };
        params.validate()?;
        Ok(params)
    }

    /// Model with an explicit channel list; the first entry must be the
    /// reference channel `(1, 0)`.
    pub fn with_channels(
        n_atoms: usize,
        omega_r: f64,
        delta_r: f64,
        omega_hf: f64,
        channels: Vec<RydbergChannel>,
    ) -> Result<Self> {
        let params = Self {
            n_atoms,
            omega_r,
            delta_r,
            omega_hf,
            channels,
        };
        params.validate()?;
        Ok(params)
    }

    /// Appends an extra Rydberg channel.
    pub fn add_channel(mut self, channel: RydbergChannel) -> Result<Self> {
        self.channels.push(channel);
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega_r(mut self, omega_r: f64) -> Result<Self> {
        self.omega_r = omega_r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta_r(mut self, delta_r: f64) -> Result<Self> {
        self.delta_r = delta_r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_n_atoms(mut self, n_atoms: usize) -> Result<Self> {
        self.n_atoms = n_atoms;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::InvalidParams("n_atoms must be at least 1".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::InvalidParams("at least one Rydberg channel required".into()));
        }
        if self.channels[0] != RydbergChannel::REFERENCE {
            return Err(Error::InvalidParams(
                "channel 0 must have rabi_scale = 1 and detuning_offset = 0".into(),
            ));
        }
        for (name, v) in [
            ("omega_r", self.omega_r),
            ("delta_r", self.delta_r),
            ("omega_hf", self.omega_hf),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.omega_r < 0.0 {
            return Err(Error::InvalidParams("omega_r must be non-negative".into()));
        }
        if self.omega_hf < 0.0 {
            return Err(Error::InvalidParams("omega_hf must be non-negative".into()));
        }
        for (k, ch) in self.channels.iter().enumerate() {
            if !ch.rabi_scale.is_finite() || ch.rabi_scale < 0.0 || !ch.detuning_offset.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "channel {k}: rabi_scale must be finite and >= 0, detuning_offset finite"
                )));
            }
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    pub fn delta_r(&self) -> f64 {
        self.delta_r
    }

    pub fn omega_hf(&self) -> f64 {
        self.omega_hf
    }

    pub fn channels(&self) -> &[RydbergChannel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    /// `(N + 1) + K * N`
    pub fn dim(&self) -> usize {
        (self.n_atoms + 1) + self.n_channels() * self.n_atoms
    }
}

/// Label of one symmetric basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymIndex {
    /// `|g,n>`: `n` atoms in `|1>`, none in a Rydberg level.
    Ground { n: usize },
    /// `|e_k,n>`: one atom in Rydberg channel `channel`, `n` others in `|1>`.
    Excited { channel: usize, n: usize },
}

impl SymIndex {
    pub fn ground(n: usize) -> Self {
        SymIndex::Ground { n }
    }

    pub fn excited(channel: usize, n: usize) -> Self {
        SymIndex::Excited { channel, n }
    }

    /// Number of `|1>` atoms, the `n` in `|g,n>` / `|e,n>`.
    pub fn n_flips(self) -> usize {
        match self {
            SymIndex::Ground { n } | SymIndex::Excited { n, .. } => n,
        }
    }

    /// Total excitation number: `n` for `|g,n>`, `n + 1` for `|e,n>`. The
    /// undriven Hamiltonian only couples states with equal excitation number.
    pub fn excitation(self) -> usize {
        match self {
            SymIndex::Ground { n } => n,
            SymIndex::Excited { n, .. } => n + 1,
        }
    }

    pub fn is_ground(self) -> bool {
        matches!(self, SymIndex::Ground { .. })
    }

    pub fn is_valid(self, params: &ModelParams) -> bool {
        let big_n = params.n_atoms();
        match self {
            SymIndex::Ground { n } => n <= big_n,
            SymIndex::Excited { channel, n } => channel < params.n_channels() && n < big_n,
        }
    }
}

impl std::fmt::Display for SymIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymIndex::Ground { n } => write!(f, "|g,{n}>"),
            SymIndex::Excited { channel: 0, n } => write!(f, "|e,{n}>"),
            SymIndex::Excited { channel, n } => write!(f, "|e{},{n}>", channel + 1),
        }
    }
}

/// Canonical ordering: ground block, then one excited block per channel.
pub fn enumerate_basis(params: &ModelParams) -> Vec<SymIndex> {
    let big_n = params.n_atoms();
    let ground = (0..=big_n).map(SymIndex::ground);
    let excited = (0..params.n_channels())
        .flat_map(move |channel| (0..big_n).map(move |n| SymIndex::excited(channel, n)));
    ground.chain(excited).collect()
}

/// Position of `idx` in [`enumerate_basis`].
pub fn index_of(idx: SymIndex, params: &ModelParams) -> Result<usize> {
    if !idx.is_valid(params) {
        return Err(Error::Domain(format!(
            "{idx} is outside the basis for N = {}, K = {}",
            params.n_atoms(),
            params.n_channels()
        )));
    }
    let big_n = params.n_atoms();
    Ok(match idx {
        SymIndex::Ground { n } => n,
        SymIndex::Excited { channel, n } => (big_n + 1) + channel * big_n + n,
    })
}

/// Complex amplitude vector over the symmetric basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SymState {
    amplitudes: DVector<Complex64>,
}

impl SymState {
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Self {
        Self { amplitudes }
    }

    /// The bare basis state `idx`.
    pub fn basis(params: &ModelParams, idx: SymIndex) -> Result<Self> {
        let pos = index_of(idx, params)?;
        let mut amplitudes = DVector::zeros(params.dim());
        amplitudes[pos] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<Complex64> {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_squared() - 1.0).abs() <= NORM_TOLERANCE
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|<self|other>|^2`
    pub fn overlap_probability(&self, other: &DVector<Complex64>) -> f64 {
        self.amplitudes.dotc(other).norm_sqr()
    }

    /// Population of each excitation number `0..=N`.
    pub fn excitation_populations(&self, params: &ModelParams) -> Vec<f64> {
        let mut out = vec![0.0; params.n_atoms() + 1];
        for (idx, p) in enumerate_basis(params).into_iter().zip(self.populations()) {
            out[idx.excitation()] += p;
        }
        out
    }

    /// Basis label with the largest population.
    pub fn dominant(&self, params: &ModelParams) -> SymIndex {
        let basis = enumerate_basis(params);
        let (pos, _) = self
            .populations()
            .into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, p)| if p > best.1 { (i, p) } else { best });
        basis[pos]
    }
}
