//! Exact diagonalization of one- and two-species Bose-Hubbard gases on a
//! 1D ring threaded by Peierls phases, together with the closed-form
//! perturbative predictions they are compared against.
//!
//! The physical setting: two bosonic species A and B live on the same ring
//! lattice, each carrying its own tunneling, on-site repulsion, and Peierls
//! phase (so each sustains a persistent current). At `t = 0` an attractive
//! interspecies contact coupling `-V Σ_j n^A_j n^B_j` is switched on and the
//! mixture evolves unitarily. The library computes, exactly and
//! perturbatively:
//!
//! - the relative reduction of the B-species current after the quench,
//! - the interspecies entanglement (purity / Schmidt number of the reduced
//!   states),
//! - single-species momentum distributions and visibilities,
//! - the projection of the quenched state onto the post-quench eigenbasis.
//!
//! Units: the B-species on-site repulsion sets the energy scale (U_B = 1)
//! and `hbar = 1`, so times are in units of 1/U_B.

pub mod basis;
pub mod dynamics;
pub mod observables;
pub mod operators;
pub mod quad;
pub mod solvers;
pub mod theory;
