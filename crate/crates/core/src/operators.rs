//! Hamiltonians and observables as sparse Hermitian matrices.
//!
//! Each species hops on a ring of `L` sites threaded by a Peierls phase
//! `phi` (site `L` is identified with site `0`):
//!
//! ```text
//! H = -J * sum_j (e^{i phi} a†_{j+1} a_j + h.c.) + (U/2) * sum_j n_j (n_j - 1)
//! ```
//!
//! with repulsive on-site interactions `U > 0`. A two-species mixture couples
//! through the attractive density-density term `-V * sum_j n^A_j n^B_j`, and
//! the particle current of a species is
//!
//! ```text
//! I = (1/2iL) * sum_j (e^{i phi} a†_{j+1} a_j - h.c.) ,
//! ```
//!
//! equal to `(1/2LJ) dH/dphi`. Energies are in units of the B-species on-site
//! repulsion and `hbar = 1` throughout.
//!
//! Matrices are stored compressed-sparse-row. Only the upper triangle is
//! generated explicitly; the strict lower triangle is its conjugate mirror,
//! so Hermiticity holds by construction.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::basis::{BasisTag, ProductBasis, SpeciesBasis, StateVector};

/// Hard cap on the dimension of any operator assembled here.
pub const BUILD_DIM_CAP: usize = 1 << 31;

/// Errors from operator construction and application.
#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    /// Repulsive interactions only: λ = J/U must be well defined.
    #[error("on-site interaction must be positive, got U = {0}")]
    NonpositiveInteraction(f64),
    /// Negative tunneling amplitudes are outside the model.
    #[error("tunneling amplitude must be non-negative, got J = {0}")]
    NegativeTunneling(f64),
    /// On a 2-site ring the bonds 0→1 and 1→0 coincide and hops would be
    /// double counted; rings start at 3 sites.
    #[error("ring must have at least 3 sites, got L = {0}")]
    TooFewSites(usize),
    /// The interspecies quench switches on an attractive coupling V > 0.
    #[error("interspecies coupling must be positive, got V = {0}")]
    NonpositiveCoupling(f64),
    /// Time grid parameters must be positive.
    #[error("time parameter {name} must be positive, got {value}")]
    NonpositiveTime { name: &'static str, value: f64 },
    /// Recording every k-th step requires k ≥ 1.
    #[error("sample stride must be at least 1")]
    ZeroStride,
    /// Operator requested over a basis with different lattice/atom numbers.
    #[error("basis mismatch: params describe (L = {expected_sites}, N = {expected_atoms}), basis holds (L = {got_sites}, N = {got_atoms})")]
    BasisMismatch {
        expected_sites: usize,
        expected_atoms: usize,
        got_sites: usize,
        got_atoms: usize,
    },
    /// The two species of a mixture must share one lattice.
    #[error("species lattices differ: L_A = {0}, L_B = {1}")]
    LatticeMismatch(usize, usize),
    /// Assembled dimension exceeds the configured capacity.
    #[error("operator dimension {dim} exceeds the capacity {cap}")]
    CapacityExceeded { dim: usize, cap: usize },
    /// Operator applied to a vector from a different space.
    #[error("operator acts on {op:?} but the vector lives in {vector:?}")]
    SpaceMismatch { op: BasisTag, vector: BasisTag },
}

/// Physical parameters of one bosonic species on the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleSpeciesParams {
    /// Tunneling energy J ≥ 0.
    pub j: f64,
    /// On-site repulsion U > 0.
    pub u: f64,
    /// Peierls phase (radians).
    pub phi: f64,
    /// Ring sites L ≥ 3.
    pub sites: usize,
    /// Atom number.
    pub atoms: usize,
}

impl SingleSpeciesParams {
    /// Validate and build: U > 0, J ≥ 0, L ≥ 3.
    pub fn new(j: f64, u: f64, phi: f64, sites: usize, atoms: usize) -> Result<Self, OperatorError> {
        if !(u > 0.0) {
            return Err(OperatorError::NonpositiveInteraction(u));
        }
        if !(j >= 0.0) {
            return Err(OperatorError::NegativeTunneling(j));
        }
        if sites < 3 {
            return Err(OperatorError::TooFewSites(sites));
        }
        Ok(SingleSpeciesParams { j, u, phi, sites, atoms })
    }

    /// Dimensionless tunneling ratio λ = J/U.
    pub fn lambda(&self) -> f64 {
        self.j / self.u
    }

    /// Filling factor ν = N/L (integer fillings define the Mott regime).
    pub fn filling(&self) -> f64 {
        self.atoms as f64 / self.sites as f64
    }
}

/// Complete description of an interspecies interaction quench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchScenario {
    /// Species A (the "stirrer" whose coherence feeds the coupling).
    pub params_a: SingleSpeciesParams,
    /// Species B (whose current responds to the quench).
    pub params_b: SingleSpeciesParams,
    /// Interspecies attraction strength V > 0.
    pub v: f64,
    /// Trotter step, in units of 1/U_B.
    pub dt: f64,
    /// Evolution horizon.
    pub t_max: f64,
    /// Record every `sample_stride`-th step.
    pub sample_stride: usize,
}

impl QuenchScenario {
    /// Validate and build: shared lattice, V > 0, dt > 0, t_max > 0, stride ≥ 1.
    pub fn new(
        params_a: SingleSpeciesParams,
        params_b: SingleSpeciesParams,
        v: f64,
        dt: f64,
        t_max: f64,
        sample_stride: usize,
    ) -> Result<Self, OperatorError> {
        if params_a.sites != params_b.sites {
            return Err(OperatorError::LatticeMismatch(params_a.sites, params_b.sites));
        }
        if !(v > 0.0) {
            return Err(OperatorError::NonpositiveCoupling(v));
        }
        if !(dt > 0.0) {
            return Err(OperatorError::NonpositiveTime { name: "dt", value: dt });
        }
        if !(t_max > 0.0) {
            return Err(OperatorError::NonpositiveTime { name: "t_max", value: t_max });
        }
        if sample_stride == 0 {
            return Err(OperatorError::ZeroStride);
        }
        Ok(QuenchScenario { params_a, params_b, v, dt, t_max, sample_stride })
    }
}

/// Complex sparse matrix in CSR layout, Hermitian by construction.
#[derive(Debug, Clone)]
pub struct SparseHermitianOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    tag: BasisTag,
}

impl SparseHermitianOperator {
    /// Assemble from the upper triangle (row ≤ col); the strict lower
    /// triangle is added as the conjugate mirror.
    fn from_upper_triangle(
        dim: usize,
        upper: BTreeMap<(usize, usize), C64>,
        tag: BasisTag,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (&(r, c), &v) in &upper {
            debug_assert!(r <= c);
            rows[r].push((c, v));
            if r != c {
                rows[c].push((r, v.conj()));
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseHermitianOperator { dim, row_ptr, col_idx, values, tag }
    }

    /// Matrix dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Basis the operator acts on.
    pub fn tag(&self) -> BasisTag {
        self.tag
    }

    /// Number of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = M x over raw slices (no tag checks); used by hot loops.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// ⟨v|M|v⟩; real up to rounding for Hermitian M.
    pub fn expectation(&self, v: &StateVector) -> Result<C64, OperatorError> {
        if v.tag != self.tag {
            return Err(OperatorError::SpaceMismatch { op: self.tag, vector: v.tag });
        }
        let mut mv = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec(&v.amplitudes, &mut mv);
        Ok(v
            .amplitudes
            .iter()
            .zip(&mv)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Densify (for direct eigensolvers and small-scale cross-checks).
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C64::new(0.0, 0.0));
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }

    /// Worst-case Hermiticity residual max |M - M†| (diagnostic; zero up to
    /// floating representation by construction).
    pub fn hermiticity_residual(&self) -> f64 {
        let dense = self.to_dense();
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                worst = worst.max((dense[(r, c)] - dense[(c, r)].conj()).norm());
            }
        }
        worst
    }

    /// Diagonal entries (real parts; imaginary parts vanish for Hermitian M).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k].re;
                }
            }
        }
        d
    }
}

/// Accumulate `coeff * a†_{to} a_{from}` plus its Hermitian conjugate over
/// all basis states into the upper-triangle map.
fn add_hop_terms(
    basis: &SpeciesBasis,
    from: usize,
    to: usize,
    coeff: C64,
    upper: &mut BTreeMap<(usize, usize), C64>,
) {
    for (col, occ) in basis.states().iter().enumerate() {
        let n_from = occ[from];
        if n_from == 0 {
            continue;
        }
        let n_to = occ[to];
        let mut tgt = occ.clone();
        tgt[from] -= 1;
        tgt[to] += 1;
        let row = crate::basis::state_index(basis, &tgt)
            .expect("hopping conserves the atom number");
        let amp = ((n_from as f64) * (n_to as f64 + 1.0)).sqrt();
        // Only the upper half is stored; a hop landing below the diagonal is
        // recorded through its h.c. partner's upper-triangle element instead.
        if row <= col {
            *upper.entry((row, col)).or_insert(C64::new(0.0, 0.0)) += coeff * amp;
        } else {
            *upper.entry((col, row)).or_insert(C64::new(0.0, 0.0)) += coeff.conj() * amp;
        }
    }
}

/// Bose-Hubbard Hamiltonian of one species on the ring:
/// `-J Σ_j (e^{i phi} a†_{j+1} a_j + h.c.) + (U/2) Σ_j n_j (n_j - 1)`.
pub fn build_bose_hubbard(
    p: &SingleSpeciesParams,
    basis: &SpeciesBasis,
) -> Result<SparseHermitianOperator, OperatorError> {
    if basis.sites() != p.sites || basis.atoms() != p.atoms {
        return Err(OperatorError::BasisMismatch {
            expected_sites: p.sites,
            expected_atoms: p.atoms,
            got_sites: basis.sites(),
            got_atoms: basis.atoms(),
        });
    }
    let mut upper = BTreeMap::new();
    // On-site repulsion (diagonal).
    for (i, occ) in basis.states().iter().enumerate() {
        let e: f64 = occ
            .iter()
            .map(|&n| 0.5 * p.u * (n as f64) * (n as f64 - 1.0))
            .sum();
        if e != 0.0 {
            upper.insert((i, i), C64::new(e, 0.0));
        }
    }
    // Hopping around the ring, site L identified with site 0.
    let coeff = -p.j * C64::new(0.0, p.phi).exp();
    for j in 0..p.sites {
        add_hop_terms(basis, j, (j + 1) % p.sites, coeff, &mut upper);
    }
    Ok(SparseHermitianOperator::from_upper_triangle(basis.dim(), upper, basis.tag()))
}

/// Kinetic (hopping) part alone: `-J Σ_j (e^{i phi} a†_{j+1} a_j + h.c.)`.
///
/// Used by the split-step propagator, which treats hopping and all density
/// terms separately.
pub fn build_kinetic(
    basis: &SpeciesBasis,
    j: f64,
    phi: f64,
) -> Result<SparseHermitianOperator, OperatorError> {
    if basis.sites() < 3 {
        return Err(OperatorError::TooFewSites(basis.sites()));
    }
    let mut upper = BTreeMap::new();
    let coeff = -j * C64::new(0.0, phi).exp();
    for site in 0..basis.sites() {
        add_hop_terms(basis, site, (site + 1) % basis.sites(), coeff, &mut upper);
    }
    Ok(SparseHermitianOperator::from_upper_triangle(basis.dim(), upper, basis.tag()))
}

/// Attractive interspecies density coupling `-V Σ_j n^A_j n^B_j`, diagonal
/// over the product basis.
pub fn build_interaction_coupling(
    pb: &ProductBasis,
    v: f64,
) -> Result<SparseHermitianOperator, OperatorError> {
    if !(v > 0.0) {
        return Err(OperatorError::NonpositiveCoupling(v));
    }
    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    let mut upper = BTreeMap::new();
    for ia in 0..da {
        let occ_a = pb.species_a().occupation(ia);
        for ib in 0..db {
            let occ_b = pb.species_b().occupation(ib);
            let overlap: f64 = occ_a
                .iter()
                .zip(occ_b)
                .map(|(&na, &nb)| (na as f64) * (nb as f64))
                .sum();
            if overlap != 0.0 {
                let ord = pb.ordinal(ia, ib);
                upper.insert((ord, ord), C64::new(-v * overlap, 0.0));
            }
        }
    }
    Ok(SparseHermitianOperator::from_upper_triangle(pb.dim(), upper, pb.tag()))
}

/// Post-quench mixture Hamiltonian `H_A ⊗ 1 + 1 ⊗ H_B - V Σ_j n^A_j n^B_j`
/// over the product basis.
pub fn build_total_hamiltonian(
    sc: &QuenchScenario,
    pb: &ProductBasis,
) -> Result<SparseHermitianOperator, OperatorError> {
    if pb.dim() > BUILD_DIM_CAP {
        return Err(OperatorError::CapacityExceeded { dim: pb.dim(), cap: BUILD_DIM_CAP });
    }
    let h_a = build_bose_hubbard(&sc.params_a, pb.species_a())?;
    let h_b = build_bose_hubbard(&sc.params_b, pb.species_b())?;
    let db = pb.species_b().dim();

    let mut upper = BTreeMap::new();
    // H_A ⊗ 1: entry (ra, ca) fans out over the diagonal of species B.
    for ra in 0..h_a.dim {
        for k in h_a.row_ptr[ra]..h_a.row_ptr[ra + 1] {
            let ca = h_a.col_idx[k];
            if ra > ca {
                continue;
            }
            for ib in 0..db {
                let (r, c) = (ra * db + ib, ca * db + ib);
                *upper.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += h_a.values[k];
            }
        }
    }
    // 1 ⊗ H_B.
    for rb in 0..h_b.dim {
        for k in h_b.row_ptr[rb]..h_b.row_ptr[rb + 1] {
            let cb = h_b.col_idx[k];
            if rb > cb {
                continue;
            }
            for ia in 0..pb.species_a().dim() {
                let (r, c) = (ia * db + rb, ia * db + cb);
                *upper.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += h_b.values[k];
            }
        }
    }
    // -V Σ_j n^A_j n^B_j (diagonal).
    for ia in 0..pb.species_a().dim() {
        let occ_a = pb.species_a().occupation(ia);
        for ib in 0..db {
            let occ_b = pb.species_b().occupation(ib);
            let overlap: f64 = occ_a
                .iter()
                .zip(occ_b)
                .map(|(&na, &nb)| (na as f64) * (nb as f64))
                .sum();
            if overlap != 0.0 {
                let ord = pb.ordinal(ia, ib);
                *upper.entry((ord, ord)).or_insert(C64::new(0.0, 0.0)) +=
                    C64::new(-sc.v * overlap, 0.0);
            }
        }
    }
    Ok(SparseHermitianOperator::from_upper_triangle(pb.dim(), upper, pb.tag()))
}

/// Particle-current operator `(1/2iL) Σ_j (e^{i phi} a†_{j+1} a_j - h.c.)`.
///
/// Satisfies `I = (1/2LJ) dH/dphi` for the matching Hamiltonian.
pub fn build_current_operator(basis: &SpeciesBasis, phi: f64) -> SparseHermitianOperator {
    let sites = basis.sites();
    let mut upper = BTreeMap::new();
    // e^{i phi}/(2iL) on the forward hop; the backward hop carries exactly
    // the conjugate coefficient, so the generic Hermitian assembly applies.
    let coeff = C64::new(0.0, phi).exp() / C64::new(0.0, 2.0 * sites as f64);
    for j in 0..sites {
        add_hop_terms(basis, j, (j + 1) % sites, coeff, &mut upper);
    }
    SparseHermitianOperator::from_upper_triangle(basis.dim(), upper, basis.tag())
}

/// Apply `op` to `v`, returning `M v` (no normalization).
pub fn apply(op: &SparseHermitianOperator, v: &StateVector) -> Result<StateVector, OperatorError> {
    if v.tag != op.tag {
        return Err(OperatorError::SpaceMismatch { op: op.tag, vector: v.tag });
    }
    let mut out = vec![C64::new(0.0, 0.0); op.dim];
    op.matvec(&v.amplitudes, &mut out);
    Ok(StateVector::new(out, v.tag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(j: f64, u: f64, phi: f64, sites: usize, atoms: usize) -> SingleSpeciesParams {
        SingleSpeciesParams::new(j, u, phi, sites, atoms).unwrap()
    }

    #[test]
    fn params_validation_rejects_bad_inputs() {
        assert!(matches!(
            SingleSpeciesParams::new(1.0, 0.0, 0.0, 4, 4),
            Err(OperatorError::NonpositiveInteraction(_))
        ));
        assert!(matches!(
            SingleSpeciesParams::new(-0.5, 1.0, 0.0, 4, 4),
            Err(OperatorError::NegativeTunneling(_))
        ));
        assert!(matches!(
            SingleSpeciesParams::new(1.0, 1.0, 0.0, 2, 2),
            Err(OperatorError::TooFewSites(2))
        ));
    }

    #[test]
    fn atomic_limit_energies_count_pairs() {
        // J = 0, U = 1, unit filling: the uniform state has energy 0 and a
        // single particle-hole excitation costs exactly U.
        let basis = enumerate_basis(4, 4).unwrap();
        let p = params(0.0, 1.0, 0.0, 4, 4);
        let h = build_bose_hubbard(&p, &basis).unwrap();
        let mi = crate::basis::state_index(&basis, &[1, 1, 1, 1]).unwrap();
        let ph = crate::basis::state_index(&basis, &[2, 0, 1, 1]).unwrap();
        let d = h.diagonal();
        assert_eq!(d[mi], 0.0);
        assert_eq!(d[ph], 1.0);
    }

    #[test]
    fn one_particle_ring_spectrum_is_minus_2j_cos() {
        // L = 3, N = 1: eigenvalues -2J cos(2π m/3 - φ); at φ = 0 they are
        // {-2, 1, 1}.
        let basis = enumerate_basis(3, 1).unwrap();
        let p = params(1.0, 1.0, 0.0, 3, 1);
        let h = build_bose_hubbard(&p, &basis).unwrap();
        let dense = h.to_dense();
        let mut eig: Vec<f64> = dense
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] - (-2.0)).abs() < 1e-12);
        assert!((eig[1] - 1.0).abs() < 1e-12);
        assert!((eig[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_hamiltonians_are_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let sites = rng.random_range(3..=5);
            let atoms = rng.random_range(1..=4);
            let p = params(
                rng.random::<f64>() * 2.0,
                0.1 + rng.random::<f64>(),
                (rng.random::<f64>() - 0.5) * 6.0,
                sites,
                atoms,
            );
            let basis = enumerate_basis(sites, atoms).unwrap();
            let h = build_bose_hubbard(&p, &basis).unwrap();
            assert!(h.hermiticity_residual() <= 1e-12);
        }
    }

    #[test]
    fn interaction_coupling_is_diagonal_density_overlap() {
        let a = enumerate_basis(4, 4).unwrap();
        let b = enumerate_basis(4, 4).unwrap();
        let pb = ProductBasis::new(a, b);
        let w = build_interaction_coupling(&pb, 3.0).unwrap();
        // Uniform against uniform: -V * 4.
        let ia = crate::basis::state_index(pb.species_a(), &[1, 1, 1, 1]).unwrap();
        let ib = crate::basis::state_index(pb.species_b(), &[1, 1, 1, 1]).unwrap();
        assert_eq!(w.diagonal()[pb.ordinal(ia, ib)], -12.0);
        // Mott A against any B Fock state: -V ν_A N_B.
        let jb = crate::basis::state_index(pb.species_b(), &[4, 0, 0, 0]).unwrap();
        assert_eq!(w.diagonal()[pb.ordinal(ia, jb)], -12.0);
    }

    #[test]
    fn disjoint_densities_do_not_couple() {
        let a = enumerate_basis(3, 2).unwrap();
        let b = enumerate_basis(3, 2).unwrap();
        let pb = ProductBasis::new(a, b);
        let w = build_interaction_coupling(&pb, 1.0).unwrap();
        let ia = crate::basis::state_index(pb.species_a(), &[2, 0, 0]).unwrap();
        let ib = crate::basis::state_index(pb.species_b(), &[0, 2, 0]).unwrap();
        assert_eq!(w.diagonal()[pb.ordinal(ia, ib)], 0.0);
    }

    #[test]
    fn total_hamiltonian_reduces_to_tensor_sum_plus_coupling() {
        let pa = params(0.05, 1.0, 0.3, 3, 3);
        let pb_params = params(1.0, 1.0, 0.3, 3, 3);
        let sc = QuenchScenario::new(pa, pb_params, 2.0, 0.01, 1.0, 10).unwrap();
        let a = enumerate_basis(3, 3).unwrap();
        let b = enumerate_basis(3, 3).unwrap();
        let pb = ProductBasis::new(a.clone(), b.clone());
        let h = build_total_hamiltonian(&sc, &pb).unwrap();
        assert!(h.hermiticity_residual() <= 1e-12);

        // Dense reference: kron(H_A, 1) + kron(1, H_B) + diag coupling.
        let ha = build_bose_hubbard(&pa, &a).unwrap().to_dense();
        let hb = build_bose_hubbard(&pb_params, &b).unwrap().to_dense();
        let w = build_interaction_coupling(&pb, 2.0).unwrap().to_dense();
        let id = DMatrix::<C64>::identity(10, 10);
        let reference = ha.kronecker(&id) + id.kronecker(&hb) + w;
        let got = h.to_dense();
        let mut worst: f64 = 0.0;
        for r in 0..got.nrows() {
            for c in 0..got.ncols() {
                worst = worst.max((got[(r, c)] - reference[(r, c)]).norm());
            }
        }
        assert!(worst <= 1e-12, "worst entry deviation {worst}");
    }

    #[test]
    fn plane_wave_current_matches_sin_over_l() {
        // One particle in the k = 0 plane wave on L = 3 at φ = 0.3 carries
        // current sin(0.3)/3.
        let basis = enumerate_basis(3, 1).unwrap();
        let op = build_current_operator(&basis, 0.3);
        let amp = C64::new(1.0 / 3.0_f64.sqrt(), 0.0);
        let psi = StateVector::new(vec![amp; 3], basis.tag());
        let got = op.expectation(&psi).unwrap();
        assert!((got.re - 0.3_f64.sin() / 3.0).abs() < 1e-12);
        assert!(got.im.abs() < 1e-14);
    }

    #[test]
    fn current_is_phase_derivative_of_hamiltonian() {
        // I = (1/2LJ) dH/dφ via central differences at δφ = 1e-6.
        let basis = enumerate_basis(4, 3).unwrap();
        let (j, u, phi) = (0.7, 1.3, 0.9);
        let dphi = 1e-6;
        let hp = build_bose_hubbard(&params(j, u, phi + dphi, 4, 3), &basis)
            .unwrap()
            .to_dense();
        let hm = build_bose_hubbard(&params(j, u, phi - dphi, 4, 3), &basis)
            .unwrap()
            .to_dense();
        let i_op = build_current_operator(&basis, phi).to_dense();
        let scale = 1.0 / (2.0 * 4.0 * j);
        let mut worst: f64 = 0.0;
        for r in 0..i_op.nrows() {
            for c in 0..i_op.ncols() {
                let fd = (hp[(r, c)] - hm[(r, c)]) * (scale / (2.0 * dphi));
                worst = worst.max((fd - i_op[(r, c)]).norm());
            }
        }
        assert!(worst < 1e-8, "finite-difference mismatch {worst}");
    }

    #[test]
    fn apply_matches_dense_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = enumerate_basis(4, 3).unwrap();
        let p = params(0.8, 1.1, 0.4, 4, 3);
        let h = build_bose_hubbard(&p, &basis).unwrap();
        let dense = h.to_dense();
        for _ in 0..5 {
            let v: Vec<C64> = (0..basis.dim())
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let sv = StateVector::new(v.clone(), basis.tag());
            let got = apply(&h, &sv).unwrap();
            let dv = &dense * DMatrix::from_column_slice(basis.dim(), 1, &v);
            for i in 0..basis.dim() {
                assert!((got.amplitudes[i] - dv[(i, 0)]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn apply_rejects_wrong_space() {
        let basis3 = enumerate_basis(3, 1).unwrap();
        let basis4 = enumerate_basis(4, 1).unwrap();
        let op = build_current_operator(&basis3, 0.0);
        let v = StateVector::basis_state(0, basis4.tag());
        assert!(matches!(apply(&op, &v), Err(OperatorError::SpaceMismatch { .. })));
    }

    #[test]
    fn expectation_of_hermitian_operator_is_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = enumerate_basis(4, 4).unwrap();
        let p = params(0.5, 1.0, 1.1, 4, 4);
        let h = build_bose_hubbard(&p, &basis).unwrap();
        let v: Vec<C64> = (0..basis.dim())
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let sv = StateVector::new(v, basis.tag());
        let e = h.expectation(&sv).unwrap();
        assert!(e.im.abs() <= 1e-12 * e.re.abs().max(1.0));
    }

    #[test]
    fn scenario_validation() {
        let pa = params(0.05, 1.0, 0.1, 4, 4);
        let pb = params(1.0, 1.0, 0.1, 4, 4);
        assert!(QuenchScenario::new(pa, pb, 200.0, 0.002, 0.3, 10).is_ok());
        assert!(matches!(
            QuenchScenario::new(pa, pb, 0.0, 0.002, 0.3, 10),
            Err(OperatorError::NonpositiveCoupling(_))
        ));
        assert!(matches!(
            QuenchScenario::new(pa, pb, 1.0, -0.1, 0.3, 10),
            Err(OperatorError::NonpositiveTime { .. })
        ));
        let pc = params(1.0, 1.0, 0.1, 5, 4);
        assert!(matches!(
            QuenchScenario::new(pa, pc, 1.0, 0.1, 0.3, 10),
            Err(OperatorError::LatticeMismatch(4, 5))
        ));
    }
}
