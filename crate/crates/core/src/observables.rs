//! Measured quantities: currents, momentum distributions, visibility,
//! reduced density matrices, entanglement measures, spectral projections.
//!
//! Conventions:
//!
//! - The particle current of species s is `I_s = ⟨ψ| Î_s |ψ⟩` with the
//!   `1/(2L)`-normalized current operator; after the quench the relative
//!   variation is `J(t) = (I(0) - I(t)) / I(0)`.
//! - The momentum distribution is
//!   `S(q) = Σ_{i,j} e^{i q (i-j)} ⟨b†_i b_j⟩` with `q` continuous; the
//!   visibility is `(S_max - S_min)/(S_max + S_min)`.
//! - Entanglement between the species is quantified by the shifted Schmidt
//!   number `K = 1/tr(ρ_A²) - 1` and the Rényi-2 entropy `ln(1 + K)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::basis::{enumerate_basis, BasisTag, ProductBasis, SpeciesBasis, StateVector};
use crate::operators::{OperatorError, SparseHermitianOperator};
use crate::solvers::EigenDecomposition;

/// Which factor of the mixture an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    /// The stirrer species (slow, near-Mott in the scenarios).
    A,
    /// The probed species whose current is monitored.
    B,
}

/// Errors from observable evaluation.
#[derive(Debug, Error)]
pub enum ObservablesError {
    /// Hermitian expectation came out with a non-negligible imaginary part.
    #[error("expectation has imaginary residual {0:.3e} (limit 1e-8): state or operator corrupted")]
    ImaginaryResidual(f64),
    /// The pre-quench current vanishes; the relative variation is undefined.
    #[error("baseline current {0:.3e} is below the 1e-12 guard; relative variation undefined (phase = 0?)")]
    UndefinedBaseline(f64),
    /// S_max + S_min ≤ 0: visibility undefined.
    #[error("momentum distribution is degenerate (S_max + S_min = {0:.3e}); visibility undefined")]
    DegenerateDistribution(f64),
    /// Reduced density matrix lost probability.
    #[error("reduced density matrix trace deviates from 1 by {0:.3e} (limit 1e-8)")]
    TraceDeviation(f64),
    /// Operand lives in an unexpected space.
    #[error("operation expects {expected}, got state in {got:?}")]
    WrongSpace { expected: &'static str, got: BasisTag },
    /// Eigenbasis probabilities failed to close to 1.
    #[error("eigenbasis probabilities deviate from closure by {0:.3e} (limit 1e-10)")]
    IncompleteProjection(f64),
    /// Underlying operator plumbing failed.
    #[error(transparent)]
    Operator(#[from] OperatorError),
    /// Basis plumbing failed.
    #[error(transparent)]
    Basis(#[from] crate::basis::BasisError),
}

/// Momentum distribution on a uniform grid with refined extrema.
#[derive(Debug, Clone)]
pub struct MomentumDistribution {
    /// Uniform grid over [0, 2π).
    pub q_grid: Vec<f64>,
    /// S(q) on the grid.
    pub values: Vec<f64>,
    /// Refined global maximum: (q_location, value).
    pub s_max: (f64, f64),
    /// Refined global minimum: (q_location, value).
    pub s_min: (f64, f64),
}

/// Entanglement summary of a pure two-species state.
#[derive(Debug, Clone, Copy)]
pub struct EntanglementRecord {
    /// tr ρ_A².
    pub purity_a: f64,
    /// tr ρ_B² (equal to `purity_a` up to rounding for pure joint states).
    pub purity_b: f64,
    /// Shifted Schmidt number K = 1/purity - 1 ≥ 0.
    pub schmidt_shifted: f64,
    /// Rényi-2 entanglement entropy ln(1 + K).
    pub renyi2: f64,
}

/// `⟨ψ| Î |ψ⟩` for a single-species state, or `tr[ρ_s Î]` when `psi` is a
/// two-species state (the species is inferred from the operator's basis;
/// when both species match it, the B factor is traced — the quench
/// scenarios monitor the B current).
pub fn current_expectation(
    psi: &StateVector,
    op_current: &SparseHermitianOperator,
) -> Result<f64, ObservablesError> {
    match psi.tag {
        BasisTag::Species { .. } => {
            let e = op_current.expectation(psi)?;
            if e.im.abs() > 1e-8 {
                return Err(ObservablesError::ImaginaryResidual(e.im.abs()));
            }
            Ok(e.re)
        }
        BasisTag::Product { sites, atoms_a, atoms_b } => {
            let matches_b = op_current.tag() == (BasisTag::Species { sites, atoms: atoms_b });
            let matches_a = op_current.tag() == (BasisTag::Species { sites, atoms: atoms_a });
            let which = if matches_b {
                Species::B
            } else if matches_a {
                Species::A
            } else {
                return Err(ObservablesError::WrongSpace {
                    expected: "an operator over one of the two species factors",
                    got: op_current.tag(),
                });
            };
            current_expectation_for(psi, op_current, which)
        }
    }
}

/// `tr[ρ_s Î]` for an explicit species choice (needed when both species
/// hold the same atom number and the operator basis alone is ambiguous).
pub fn current_expectation_for(
    psi: &StateVector,
    op_current: &SparseHermitianOperator,
    which: Species,
) -> Result<f64, ObservablesError> {
    let BasisTag::Product { sites, atoms_a, atoms_b } = psi.tag else {
        return Err(ObservablesError::WrongSpace { expected: "a two-species state", got: psi.tag });
    };
    let (da, db) = (
        (BasisTag::Species { sites, atoms: atoms_a }).dim(),
        (BasisTag::Species { sites, atoms: atoms_b }).dim(),
    );
    // tr[ρ_s Î] as Σ over the traced index of per-slice expectations,
    // without forming ρ explicitly.
    let mut acc = C64::new(0.0, 0.0);
    match which {
        Species::B => {
            let mut slice = vec![C64::new(0.0, 0.0); db];
            let mut out = vec![C64::new(0.0, 0.0); db];
            for ia in 0..da {
                slice.copy_from_slice(&psi.amplitudes[ia * db..(ia + 1) * db]);
                op_current.matvec(&slice, &mut out);
                acc += slice
                    .iter()
                    .zip(&out)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>();
            }
        }
        Species::A => {
            let mut slice = vec![C64::new(0.0, 0.0); da];
            let mut out = vec![C64::new(0.0, 0.0); da];
            for ib in 0..db {
                for ia in 0..da {
                    slice[ia] = psi.amplitudes[ia * db + ib];
                }
                op_current.matvec(&slice, &mut out);
                acc += slice
                    .iter()
                    .zip(&out)
                    .map(|(a, b)| a.conj() * b)
                    .sum::<C64>();
            }
        }
    }
    if acc.im.abs() > 1e-8 {
        return Err(ObservablesError::ImaginaryResidual(acc.im.abs()));
    }
    Ok(acc.re)
}

/// Relative current variation `(i0 - it)/i0`; undefined when the baseline
/// vanishes (at zero Peierls phase the ground-state current is zero).
pub fn relative_current_variation(i0: f64, it: f64) -> Result<f64, ObservablesError> {
    if i0.abs() <= 1e-12 {
        return Err(ObservablesError::UndefinedBaseline(i0));
    }
    Ok((i0 - it) / i0)
}

/// One-body correlations ⟨b†_i b_j⟩ of a single-species state, via the
/// Gram matrix of the lowered vectors b_j|ψ⟩ (which live in the
/// (L, N-1) sector).
pub(crate) fn one_body_correlations(
    psi: &StateVector,
    basis: &SpeciesBasis,
) -> Result<DMatrix<C64>, ObservablesError> {
    if psi.tag != basis.tag() {
        return Err(ObservablesError::WrongSpace { expected: "a single-species state on the given basis", got: psi.tag });
    }
    let sites = basis.sites();
    if basis.atoms() == 0 {
        return Ok(DMatrix::from_element(sites, sites, C64::new(0.0, 0.0)));
    }
    let lowered_basis = enumerate_basis(sites, basis.atoms() - 1)?;
    let mut lowered = DMatrix::from_element(lowered_basis.dim(), sites, C64::new(0.0, 0.0));
    for (idx, occ) in basis.states().iter().enumerate() {
        let a = psi.amplitudes[idx];
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..sites {
            if occ[j] == 0 {
                continue;
            }
            let mut low = occ.clone();
            low[j] -= 1;
            let lidx = crate::basis::state_index(&lowered_basis, &low)
                .expect("lowering lands in the (L, N-1) sector");
            lowered[(lidx, j)] += a * (occ[j] as f64).sqrt();
        }
    }
    // c[i][j] = ⟨b_i ψ | b_j ψ⟩.
    Ok(lowered.adjoint() * lowered)
}

/// Evaluate S(q) from ring-distance sums of the correlation matrix.
fn s_of_q(corr: &DMatrix<C64>, q: f64) -> f64 {
    let sites = corr.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..sites {
        for j in 0..sites {
            s += C64::new(0.0, q * (i as f64 - j as f64)).exp() * corr[(i, j)];
        }
    }
    s.re
}

/// Golden-section refinement of an extremum of f within [a, b] to
/// tolerance `tol` in the argument; `sign` +1 maximizes, -1 minimizes.
fn golden_refine<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, sign: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sign * f(c), sign * f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sign * f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sign * f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Momentum distribution on `grid_points` uniform q values in [0, 2π),
/// with the global extrema refined to 1e-10 in q.
pub fn momentum_distribution(
    psi: &StateVector,
    basis: &SpeciesBasis,
    grid_points: usize,
) -> Result<MomentumDistribution, ObservablesError> {
    let corr = one_body_correlations(psi, basis)?;
    let n = grid_points.max(8);
    let step = std::f64::consts::TAU / n as f64;
    let q_grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let values: Vec<f64> = q_grid.iter().map(|&q| s_of_q(&corr, q)).collect();

    for &v in &values {
        debug_assert!(v >= -1e-10, "S(q) is a positive quadratic form, got {v}");
    }

    let (mut imax, mut imin) = (0usize, 0usize);
    for (i, &v) in values.iter().enumerate() {
        if v > values[imax] {
            imax = i;
        }
        if v < values[imin] {
            imin = i;
        }
    }
    let f = |q: f64| s_of_q(&corr, q);
    // Bracket each extremum by its grid neighbors (periodic).
    let bracket = |i: usize| -> (f64, f64) {
        let left = q_grid[i] - step;
        let right = q_grid[i] + step;
        (left, right)
    };
    let (ql, qr) = bracket(imax);
    let s_max = golden_refine(&f, ql, qr, 1.0, 1e-10);
    let (ql, qr) = bracket(imin);
    let s_min = golden_refine(&f, ql, qr, -1.0, 1e-10);

    Ok(MomentumDistribution { q_grid, values, s_max, s_min })
}

/// Fringe visibility `(S_max - S_min)/(S_max + S_min)`, in [0, 1].
pub fn visibility(md: &MomentumDistribution) -> Result<f64, ObservablesError> {
    let (smax, smin) = (md.s_max.1, md.s_min.1);
    let total = smax + smin;
    if total <= 0.0 {
        return Err(ObservablesError::DegenerateDistribution(total));
    }
    Ok(((smax - smin) / total).clamp(0.0, 1.0))
}

/// Amplitudes reshaped to a dim_A x dim_B matrix (B is the fast index).
fn amplitude_matrix(psi: &StateVector, pb: &ProductBasis) -> Result<DMatrix<C64>, ObservablesError> {
    if psi.tag != pb.tag() {
        return Err(ObservablesError::WrongSpace { expected: "a state on the given product basis", got: psi.tag });
    }
    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    Ok(DMatrix::from_fn(da, db, |ia, ib| psi.amplitudes[ia * db + ib]))
}

/// Reduced density matrix of one species, `tr_other |ψ⟩⟨ψ|`.
pub fn reduced_density_matrix(
    psi_ab: &StateVector,
    pb: &ProductBasis,
    which: Species,
) -> Result<DMatrix<C64>, ObservablesError> {
    let m = amplitude_matrix(psi_ab, pb)?;
    let rho = match which {
        Species::A => &m * m.adjoint(),
        // ρ_B[i,j] = Σ_a M[a,i] conj(M[a,j]) = (M† M)ᵀ.
        Species::B => (m.adjoint() * &m).transpose(),
    };
    let trace: f64 = (0..rho.nrows()).map(|i| rho[(i, i)].re).sum();
    if (trace - 1.0).abs() > 1e-8 {
        return Err(ObservablesError::TraceDeviation((trace - 1.0).abs()));
    }
    Ok(rho)
}

/// Purities, shifted Schmidt number and Rényi-2 entropy of a pure
/// two-species state. Purity is the squared Frobenius norm of the Gram
/// factor, so ρ is never formed beyond the smaller species.
pub fn entanglement_record(
    psi_ab: &StateVector,
    pb: &ProductBasis,
) -> Result<EntanglementRecord, ObservablesError> {
    let m = amplitude_matrix(psi_ab, pb)?;
    let gram_a = &m * m.adjoint();
    let gram_b = m.adjoint() * &m;
    let purity_a: f64 = gram_a.iter().map(|z| z.norm_sqr()).sum();
    let purity_b: f64 = gram_b.iter().map(|z| z.norm_sqr()).sum();
    let schmidt_shifted = (1.0 / purity_a - 1.0).max(0.0);
    Ok(EntanglementRecord {
        purity_a,
        purity_b,
        schmidt_shifted,
        renyi2: schmidt_shifted.ln_1p(),
    })
}

/// Probabilities `p_i = |⟨Φ_i|ψ⟩|²` of finding `ψ` in each eigenstate,
/// paired with the eigenenergies (ascending).
pub fn eigenbasis_probabilities(
    psi: &StateVector,
    eig: &EigenDecomposition,
) -> Result<Vec<(f64, f64)>, ObservablesError> {
    if psi.tag != eig.tag {
        return Err(ObservablesError::WrongSpace { expected: "a state on the decomposition's basis", got: psi.tag });
    }
    let dim = eig.len();
    let mut out = Vec::with_capacity(dim);
    let mut total = 0.0f64;
    for i in 0..dim {
        let mut amp = C64::new(0.0, 0.0);
        for r in 0..dim {
            amp += eig.eigenvectors[(r, i)].conj() * psi.amplitudes[r];
        }
        let p = amp.norm_sqr();
        total += p;
        out.push((eig.eigenvalues[i], p));
    }
    if (total - 1.0).abs() > 1e-10 {
        return Err(ObservablesError::IncompleteProjection(total - 1.0));
    }
    Ok(out)
}
