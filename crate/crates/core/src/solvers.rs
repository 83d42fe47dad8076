//! Ground states and full spectra of sparse Hermitian operators.
//!
//! Two paths:
//!
//! - [`ground_state`]: Lanczos with full reorthogonalization and a
//!   deterministic (fixed-seed) start vector, so repeated runs are
//!   bit-reproducible. A second, deflated pass estimates the spectral gap;
//!   a gap below `10^-10 * ||H||` sets the `degenerate` flag (on the ring
//!   this happens at Peierls phases near half-integer multiples of
//!   `2 pi / L`, where two superfluid branches cross).
//! - [`full_spectrum`]: dense Hermitian eigendecomposition of the
//!   densified matrix, for spectral projections and as an exactness oracle.
//!   Capped at dimension 20 000.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::basis::StateVector;
use crate::operators::SparseHermitianOperator;

/// Largest dimension accepted by the dense [`full_spectrum`] path.
pub const DENSE_DIM_CAP: usize = 20_000;

/// Iteration cap of the Lanczos loop.
pub const LANCZOS_MAX_ITER: usize = 10_000;

/// Convergence tolerance on the Ritz residual, relative to the spectral
/// radius estimate.
pub const LANCZOS_TOL: f64 = 1e-12;

/// Relative gap below which the ground state is reported degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;

/// Errors from the eigen solvers.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    /// Lanczos failed to reach the residual tolerance within the cap.
    #[error("Lanczos did not converge within {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    /// Dense decomposition requested above the capacity.
    #[error("dense spectrum of dimension {dim} exceeds the cap {cap}")]
    CapacityExceeded { dim: usize, cap: usize },
}

/// Lowest eigenpair of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct GroundState {
    /// Lowest eigenvalue.
    pub energy: f64,
    /// Normalized eigenvector, global phase fixed so that the
    /// largest-magnitude amplitude is real positive.
    pub vector: StateVector,
    /// Set when the gap to the next level is below `10^-10 * ||H||`;
    /// the returned vector is then one arbitrary member of the eigenspace.
    pub degenerate: bool,
}

/// Complete eigendecomposition, ascending in energy.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, ordered as `eigenvalues`.
    pub eigenvectors: DMatrix<C64>,
    /// Basis the operator acts on.
    pub tag: crate::basis::BasisTag,
}

impl EigenDecomposition {
    /// Number of eigenpairs.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Whether the decomposition is empty (never for valid operators).
    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector `i` as a state vector.
    pub fn eigenvector(&self, i: usize) -> StateVector {
        StateVector::new(self.eigenvectors.column(i).iter().copied().collect(), self.tag)
    }
}

/// Rotate the global phase so the largest-magnitude amplitude is real
/// positive, then normalize.
fn fix_phase(amplitudes: &mut [C64]) {
    let mut best = 0usize;
    let mut best_mag = 0.0f64;
    for (i, a) in amplitudes.iter().enumerate() {
        let m = a.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = amplitudes[best] / amplitudes[best].norm();
        let rot = phase.conj();
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amplitudes.iter_mut() {
            *a = *a * rot / norm;
        }
    }
}

/// Lowest Ritz pair of a real symmetric tridiagonal matrix given by
/// diagonal `alpha` and off-diagonal `beta` (beta[i] couples i and i+1).
/// Returns (value, eigenvector, second-lowest value if present).
fn tridiagonal_lowest(alpha: &[f64], beta: &[f64]) -> (f64, DVector<f64>, Option<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lowest = order[0];
    let second = order.get(1).map(|&i| eig.eigenvalues[i]);
    (
        eig.eigenvalues[lowest],
        eig.eigenvectors.column(lowest).into_owned(),
        second,
    )
}

/// One Lanczos run; `deflate` vectors are projected out of the Krylov
/// space (used by the gap probe). Returns (lowest value, Ritz vector,
/// spectral radius estimate).
fn lanczos_lowest(
    op: &SparseHermitianOperator,
    seed: u64,
    deflate: &[Vec<C64>],
) -> Result<(f64, Vec<C64>, f64), SolverError> {
    let dim = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();

    let project_out = |v: &mut Vec<C64>, basis: &[Vec<C64>]| {
        for q in basis {
            let overlap: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= overlap * qi;
            }
        }
    };
    project_out(&mut v, deflate);
    let norm = |v: &[C64]| v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let n0 = norm(&v);
    for a in &mut v {
        *a /= n0;
    }

    let max_m = LANCZOS_MAX_ITER.min(dim.saturating_sub(deflate.len()).max(1));
    let mut basis: Vec<Vec<C64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut last_residual = f64::INFINITY;

    for it in 0..max_m {
        let vj = basis.last().unwrap().clone();
        op.matvec(&vj, &mut w);
        let alpha: f64 = vj
            .iter()
            .zip(&w)
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        alphas.push(alpha);
        // Full reorthogonalization (two passes) against the Krylov basis
        // and the deflated directions keeps ghost eigenvalues out.
        for _ in 0..2 {
            project_out(&mut w, deflate);
            project_out(&mut w, &basis);
        }
        let beta = norm(&w);

        // Convergence check on the current tridiagonal.
        let (theta, s, _) = tridiagonal_lowest(&alphas, &betas);
        let scale = alphas
            .iter()
            .map(|a| a.abs())
            .chain(betas.iter().map(|b| b.abs()))
            .fold(1.0f64, f64::max);
        last_residual = beta * s[s.len() - 1].abs();
        let converged = last_residual <= LANCZOS_TOL * scale;
        let breakdown = beta <= f64::EPSILON * scale * 10.0;
        if converged || breakdown || it + 1 == max_m {
            if !(converged || breakdown) {
                return Err(SolverError::NonConvergence {
                    iterations: it + 1,
                    residual: last_residual,
                });
            }
            // Assemble the Ritz vector from the Krylov basis.
            let mut ground = vec![C64::new(0.0, 0.0); dim];
            for (k, q) in basis.iter().enumerate() {
                let c = s[k];
                for (g, qi) in ground.iter_mut().zip(q) {
                    *g += qi * c;
                }
            }
            let gn = norm(&ground);
            for g in &mut ground {
                *g /= gn;
            }
            return Ok((theta, ground, scale));
        }
        for a in &mut w {
            *a /= beta;
        }
        betas.push(beta);
        basis.push(w.clone());
    }
    Err(SolverError::NonConvergence { iterations: max_m, residual: last_residual })
}

/// Lowest eigenpair via Lanczos; see module docs for the degeneracy flag.
pub fn ground_state(op: &SparseHermitianOperator) -> Result<GroundState, SolverError> {
    let dim = op.dim();
    if dim == 1 {
        let energy = op.diagonal()[0];
        return Ok(GroundState {
            energy,
            vector: StateVector::basis_state(0, op.tag()),
            degenerate: false,
        });
    }

    let (energy, mut ground, scale) = lanczos_lowest(op, 0x5eed_1234, &[])?;
    // Deflated second pass for the spectral gap; only used for the flag,
    // so a loose result on pathological inputs is acceptable — but the
    // same tolerance is reached in practice.
    let (second, _, _) = lanczos_lowest(op, 0x5eed_5678, std::slice::from_ref(&ground))?;
    let degenerate = (second - energy).abs() < DEGENERACY_GAP * scale.max(1.0);

    fix_phase(&mut ground);
    Ok(GroundState {
        energy,
        vector: StateVector::new(ground, op.tag()),
        degenerate,
    })
}

/// Full dense spectrum, ascending; capped at [`DENSE_DIM_CAP`].
pub fn full_spectrum(op: &SparseHermitianOperator) -> Result<EigenDecomposition, SolverError> {
    let dim = op.dim();
    if dim > DENSE_DIM_CAP {
        return Err(SolverError::CapacityExceeded { dim, cap: DENSE_DIM_CAP });
    }
    let eig = op.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok(EigenDecomposition { eigenvalues, eigenvectors, tag: op.tag() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, state_index};
    use crate::operators::{build_bose_hubbard, SingleSpeciesParams};

    fn params(j: f64, u: f64, phi: f64, sites: usize, atoms: usize) -> SingleSpeciesParams {
        SingleSpeciesParams::new(j, u, phi, sites, atoms).unwrap()
    }

    #[test]
    fn atomic_limit_ground_state_is_the_uniform_fock_state() {
        let basis = enumerate_basis(4, 4).unwrap();
        let h = build_bose_hubbard(&params(0.0, 1.0, 0.0, 4, 4), &basis).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!(gs.energy.abs() < 1e-12);
        let mi = state_index(&basis, &[1, 1, 1, 1]).unwrap();
        assert!((gs.vector.amplitudes[mi].re - 1.0).abs() < 1e-10);
        assert!(!gs.degenerate);
    }

    #[test]
    fn one_particle_ring_ground_energy_is_minus_two() {
        let basis = enumerate_basis(3, 1).unwrap();
        let h = build_bose_hubbard(&params(1.0, 1.0, 0.0, 3, 1), &basis).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-10);
    }

    #[test]
    fn lanczos_matches_dense_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let sites = rng.random_range(3..=5);
            let atoms = rng.random_range(2..=4);
            let p = params(
                rng.random::<f64>() * 1.5,
                0.2 + rng.random::<f64>(),
                (rng.random::<f64>() - 0.5) * 4.0,
                sites,
                atoms,
            );
            let basis = enumerate_basis(sites, atoms).unwrap();
            let h = build_bose_hubbard(&p, &basis).unwrap();
            let gs = ground_state(&h).unwrap();
            let spec = full_spectrum(&h).unwrap();
            let scale = spec.eigenvalues.last().unwrap().abs().max(1.0);
            assert!(
                (gs.energy - spec.eigenvalues[0]).abs() <= 1e-10 * scale,
                "lanczos {} vs dense {}",
                gs.energy,
                spec.eigenvalues[0]
            );
        }
    }

    #[test]
    fn degenerate_superfluid_crossing_is_flagged() {
        // Single particle on L = 4 at φ = φ_0/2 = π/4: levels
        // -2J cos(2π m/4 - π/4) are pairwise degenerate (m = 0 and m = 1).
        let basis = enumerate_basis(4, 1).unwrap();
        let h = build_bose_hubbard(&params(1.0, 1.0, std::f64::consts::FRAC_PI_4, 4, 1), &basis)
            .unwrap();
        let gs = ground_state(&h).unwrap();
        assert!(gs.degenerate);
        // Away from the crossing the flag clears.
        let h2 = build_bose_hubbard(&params(1.0, 1.0, 0.1, 4, 1), &basis).unwrap();
        assert!(!ground_state(&h2).unwrap().degenerate);
    }

    #[test]
    fn ground_state_phase_convention_is_real_positive() {
        let basis = enumerate_basis(4, 3).unwrap();
        let h = build_bose_hubbard(&params(0.7, 1.0, 1.234, 4, 3), &basis).unwrap();
        let gs = ground_state(&h).unwrap();
        let (mut best, mut mag) = (0usize, 0.0f64);
        for (i, a) in gs.vector.amplitudes.iter().enumerate() {
            if a.norm_sqr() > mag {
                mag = a.norm_sqr();
                best = i;
            }
        }
        let a = gs.vector.amplitudes[best];
        assert!(a.im.abs() < 1e-12 && a.re > 0.0);
        assert!((gs.vector.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_spectrum_trace_identity_and_residuals() {
        let basis = enumerate_basis(4, 4).unwrap();
        let h = build_bose_hubbard(&params(0.3, 1.0, 0.7, 4, 4), &basis).unwrap();
        let spec = full_spectrum(&h).unwrap();
        let trace: f64 = h.diagonal().iter().sum();
        let esum: f64 = spec.eigenvalues.iter().sum();
        assert!((trace - esum).abs() <= 1e-8 * trace.abs().max(1.0));
        // Eigenpair residuals ‖H v - E v‖ ≤ 1e-8 ‖H‖ (Frobenius bound).
        let dense = h.to_dense();
        let hnorm = dense.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..spec.len() {
            let v = spec.eigenvector(i);
            let hv = crate::operators::apply(&h, &v).unwrap();
            let mut res = 0.0f64;
            for k in 0..v.amplitudes.len() {
                res += (hv.amplitudes[k] - v.amplitudes[k] * spec.eigenvalues[i]).norm_sqr();
            }
            assert!(res.sqrt() <= 1e-8 * hnorm);
        }
        // Ascending order.
        for w in spec.eigenvalues.windows(2) {
            assert!(w[0] <= w[1] + 1e-14);
        }
    }

    #[test]
    fn variational_monotonicity_in_tunneling() {
        // Ground energy decreases with J at fixed U, φ = 0.
        let basis = enumerate_basis(4, 4).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..6 {
            let j = 0.1 * k as f64;
            let h = build_bose_hubbard(&params(j, 1.0, 0.0, 4, 4), &basis).unwrap();
            let e = ground_state(&h).unwrap().energy;
            assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        // A fake check via the real constructor would need a huge basis;
        // instead assert on the documented constant so the contract stays
        // visible if the cap moves.
        assert_eq!(DENSE_DIM_CAP, 20_000);
    }
}
