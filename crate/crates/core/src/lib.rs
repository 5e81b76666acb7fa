//! Jaynes-Cummings ladder of symmetric Rydberg-blockaded atomic ensembles.
//!
//! A blockaded ensemble of `N` identical three-level atoms (`|0>`, `|1>`,
//! `|r>`) restricted to the permutation-symmetric sector behaves as a
//! Jaynes-Cummings system: the presence or absence of one collective Rydberg
//! excitation is the qubit, and the number `n` of atoms flipped to `|1>` is the
//! boson count. This crate builds the relevant Hamiltonians, diagonalizes the
//! dressed-state ladder, simulates Autler-Townes microwave spectroscopy and
//! adiabatic ramps, and checks the reduced model against a brute-force
//! product-space simulation.
//!
//! Units: angular frequencies with `hbar = 1`. Energies in the symmetric
//! model are measured relative to `n * omega_hf` (the linear ladder is
//! removed) except where a function explicitly restores it.

pub mod analysis;
pub mod cli;
pub mod dynamics;
mod error;
pub mod hamiltonians;
pub mod ladder;
pub mod linalg;
pub mod oracle;
pub mod spectroscopy;
pub mod symbasis;

pub use error::{Error, Result};
pub use hamiltonians::{DriveParams, HMatrix};
pub use ladder::{ladder, Branch, LadderResult};
pub use symbasis::{ModelParams, RydbergChannel, SymIndex, SymState};
