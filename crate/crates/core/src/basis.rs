//! Fock bases for bosons on a finite ring.
//!
//! A single species of `N` bosons on `L` sites lives in the symmetric Fock
//! space of dimension `C(N + L - 1, L - 1)`. States are labelled by their
//! occupation vectors `(n_0, ..., n_{L-1})` with `sum_j n_j = N`, stored as
//! `u8` per site and enumerated in *decreasing lexicographic* order, e.g. for
//! `L = 3`, `N = 2`:
//!
//! ```text
//! (2,0,0), (1,1,0), (1,0,1), (0,2,0), (0,1,1), (0,0,2)
//! ```
//!
//! Two-species mixtures use the tensor-product basis: the pair
//! `(i_a, i_b)` of single-species indices maps to the flat ordinal
//! `i_a * dim_b + i_b`.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Largest admissible basis dimension (indices must fit comfortably in
/// signed 32-bit arithmetic used by the dense backends).
pub const MAX_DIM: u128 = 1 << 31;

/// Errors arising while constructing a Fock basis.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BasisError {
    /// A lattice needs at least one site.
    #[error("lattice must have at least one site")]
    EmptyLattice,
    /// Occupations are stored as `u8`; more than 255 atoms per species
    /// cannot be represented.
    #[error("atom number {0} exceeds the per-species limit of 255")]
    TooManyAtoms(usize),
    /// The requested space is too large to enumerate.
    #[error("basis dimension {dim} exceeds the limit of 2^31 (sites = {sites}, atoms = {atoms})")]
    DimensionOverflow { sites: usize, atoms: usize, dim: u128 },
}

/// Number of `L`-site occupation vectors with fixed total `N`:
/// the binomial coefficient `C(N + L - 1, L - 1)`, computed in `u128`.
fn multiset_count(sites: usize, atoms: usize) -> u128 {
    // C(n, k) with n = atoms + sites - 1, k = sites - 1, multiplicative form.
    let n = (atoms + sites - 1) as u128;
    let k = (sites - 1).min(atoms) as u128;
    let mut c: u128 = 1;
    for i in 0..k {
        // Exact at every step: the running product over i+1 consecutive
        // integers is divisible by (i+1)!.
        c = c * (n - i) / (i + 1);
    }
    c
}

/// Identifies which Fock space a state vector lives in, so that operators
/// and observables can refuse mismatched operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    /// Single-species space of `atoms` bosons on `sites` sites.
    Species { sites: usize, atoms: usize },
    /// Two-species product space on a common lattice.
    Product { sites: usize, atoms_a: usize, atoms_b: usize },
}

impl BasisTag {
    /// Hilbert-space dimension this tag refers to.
    pub fn dim(&self) -> usize {
        match *self {
            BasisTag::Species { sites, atoms } => multiset_count(sites, atoms) as usize,
            BasisTag::Product { sites, atoms_a, atoms_b } => {
                (multiset_count(sites, atoms_a) * multiset_count(sites, atoms_b)) as usize
            }
        }
    }
}

/// Enumerated Fock basis of a single bosonic species.
#[derive(Debug, Clone)]
pub struct SpeciesBasis {
    sites: usize,
    atoms: usize,
    /// Occupation vectors in decreasing lexicographic order.
    states: Vec<Vec<u8>>,
    /// Inverse lookup: occupation vector -> index in `states`.
    index: HashMap<Vec<u8>, usize>,
}

impl SpeciesBasis {
    /// Number of lattice sites.
    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Total atom number.
    pub fn atoms(&self) -> usize {
        self.atoms
    }

    /// Basis dimension `C(N + L - 1, L - 1)`.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Occupation vector of basis state `i`.
    pub fn occupation(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    /// All occupation vectors, in basis order.
    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    /// Tag identifying this space.
    pub fn tag(&self) -> BasisTag {
        BasisTag::Species { sites: self.sites, atoms: self.atoms }
    }
}

/// Enumerate the Fock basis of `atoms` bosons on `sites` ring sites in
/// decreasing lexicographic order of the occupation vectors.
pub fn enumerate_basis(sites: usize, atoms: usize) -> Result<SpeciesBasis, BasisError> {
    if sites == 0 {
        return Err(BasisError::EmptyLattice);
    }
    if atoms > u8::MAX as usize {
        return Err(BasisError::TooManyAtoms(atoms));
    }
    let dim = multiset_count(sites, atoms);
    if dim > MAX_DIM {
        return Err(BasisError::DimensionOverflow { sites, atoms, dim });
    }

    let mut states = Vec::with_capacity(dim as usize);
    let mut current = vec![0u8; sites];
    // Depth-first fill: occupancy of each site descends from the remaining
    // total, which yields decreasing lexicographic order directly.
    fn fill(site: usize, remaining: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if site == current.len() - 1 {
            current[site] = remaining as u8;
            out.push(current.clone());
            return;
        }
        for n in (0..=remaining).rev() {
            current[site] = n as u8;
            fill(site + 1, remaining - n, current, out);
        }
    }
    fill(0, atoms, &mut current, &mut states);
    debug_assert_eq!(states.len() as u128, dim);

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(SpeciesBasis { sites, atoms, states, index })
}

/// Index of an occupation vector in `basis`, or `None` if the vector does
/// not belong to it (wrong length or wrong total atom number).
pub fn state_index(basis: &SpeciesBasis, occupation: &[u8]) -> Option<usize> {
    basis.index.get(occupation).copied()
}

/// Tensor-product basis of a two-species mixture sharing one lattice.
///
/// The flat ordinal of the pair `(i_a, i_b)` is `i_a * dim_b + i_b`, i.e.
/// species B is the fast index.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    a: SpeciesBasis,
    b: SpeciesBasis,
}

impl ProductBasis {
    /// Combine two single-species bases defined on the same lattice.
    ///
    /// Panics if the site counts differ; the two species always share the
    /// ring in this model.
    pub fn new(a: SpeciesBasis, b: SpeciesBasis) -> Self {
        assert_eq!(
            a.sites(),
            b.sites(),
            "product basis requires a common lattice"
        );
        ProductBasis { a, b }
    }

    /// Species-A factor.
    pub fn species_a(&self) -> &SpeciesBasis {
        &self.a
    }

    /// Species-B factor.
    pub fn species_b(&self) -> &SpeciesBasis {
        &self.b
    }

    /// Number of lattice sites of the shared ring.
    pub fn sites(&self) -> usize {
        self.a.sites()
    }

    /// Total dimension `dim_a * dim_b`.
    pub fn dim(&self) -> usize {
        self.a.dim() * self.b.dim()
    }

    /// Flat ordinal of the pair `(i_a, i_b)`.
    pub fn ordinal(&self, i_a: usize, i_b: usize) -> usize {
        i_a * self.b.dim() + i_b
    }

    /// Inverse of [`ProductBasis::ordinal`].
    pub fn split(&self, ordinal: usize) -> (usize, usize) {
        (ordinal / self.b.dim(), ordinal % self.b.dim())
    }

    /// Tag identifying this space.
    pub fn tag(&self) -> BasisTag {
        BasisTag::Product {
            sites: self.a.sites(),
            atoms_a: self.a.atoms(),
            atoms_b: self.b.atoms(),
        }
    }
}

/// A normalized (or not) wavefunction over a tagged Fock space.
#[derive(Debug, Clone)]
pub struct StateVector {
    /// Complex amplitude per basis state, in basis order.
    pub amplitudes: Vec<C64>,
    /// Which space the amplitudes refer to.
    pub tag: BasisTag,
}

impl StateVector {
    /// Wrap amplitudes; panics if the length disagrees with the tag.
    pub fn new(amplitudes: Vec<C64>, tag: BasisTag) -> Self {
        assert_eq!(amplitudes.len(), tag.dim(), "amplitude count must match basis dimension");
        StateVector { amplitudes, tag }
    }

    /// The basis state `i` as a wavefunction.
    pub fn basis_state(i: usize, tag: BasisTag) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); tag.dim()];
        amplitudes[i] = C64::new(1.0, 0.0);
        StateVector { amplitudes, tag }
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `<self|other>` (conjugate-linear in `self`).
    pub fn inner(&self, other: &StateVector) -> C64 {
        debug_assert_eq!(self.tag, other.tag);
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Rescale to unit norm (no-op on the zero vector).
    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amplitudes {
                *a /= n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_sites_two_atoms_enumerates_in_decreasing_lex_order() {
        let basis = enumerate_basis(3, 2).unwrap();
        let expect: Vec<Vec<u8>> = vec![
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 2, 0],
            vec![0, 1, 1],
            vec![0, 0, 2],
        ];
        assert_eq!(basis.states(), expect.as_slice());
        assert_eq!(basis.dim(), 6);
    }

    #[test]
    fn four_sites_four_atoms_has_dimension_35() {
        let basis = enumerate_basis(4, 4).unwrap();
        assert_eq!(basis.dim(), 35);
        // Spot-check the extremes of the ordering.
        assert_eq!(basis.occupation(0), &[4, 0, 0, 0]);
        assert_eq!(basis.occupation(34), &[0, 0, 0, 4]);
    }

    #[test]
    fn single_site_holds_all_atoms() {
        let basis = enumerate_basis(1, 3).unwrap();
        assert_eq!(basis.states(), &[vec![3u8]]);
    }

    #[test]
    fn zero_atoms_yields_the_vacuum() {
        let basis = enumerate_basis(5, 0).unwrap();
        assert_eq!(basis.dim(), 1);
        assert_eq!(basis.occupation(0), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn state_index_inverts_enumeration() {
        let basis = enumerate_basis(5, 3).unwrap();
        for i in 0..basis.dim() {
            assert_eq!(state_index(&basis, basis.occupation(i)), Some(i));
        }
        assert_eq!(state_index(&basis, &[3, 0, 0, 0]), None); // wrong length
        assert_eq!(state_index(&basis, &[4, 0, 0, 0, 0]), None); // wrong total
    }

    #[test]
    fn empty_lattice_is_rejected() {
        assert!(matches!(enumerate_basis(0, 2), Err(BasisError::EmptyLattice)));
    }

    #[test]
    fn atom_number_above_u8_is_rejected() {
        assert!(matches!(enumerate_basis(2, 256), Err(BasisError::TooManyAtoms(256))));
    }

    #[test]
    fn oversized_basis_is_rejected() {
        // C(60 + 60 - 1, 59) ~ 5e34, astronomically above 2^31, while the
        // atom count itself still fits the per-site u8 occupation type.
        let err = enumerate_basis(60, 60).unwrap_err();
        assert!(matches!(err, BasisError::DimensionOverflow { .. }));
    }

    #[test]
    fn product_ordinal_roundtrips() {
        let a = enumerate_basis(3, 2).unwrap();
        let b = enumerate_basis(3, 1).unwrap();
        let p = ProductBasis::new(a, b);
        assert_eq!(p.dim(), 18);
        for ord in 0..p.dim() {
            let (ia, ib) = p.split(ord);
            assert_eq!(p.ordinal(ia, ib), ord);
        }
        // B is the fast index.
        assert_eq!(p.ordinal(1, 0), p.species_b().dim());
    }

    #[test]
    fn dimension_formula_matches_enumeration() {
        for sites in 1..=6 {
            for atoms in 0..=6 {
                let basis = enumerate_basis(sites, atoms).unwrap();
                assert_eq!(basis.dim() as u128, multiset_count(sites, atoms));
            }
        }
    }
}
