//! Shared fixtures for the integration suite: pre-quench product states,
//! windowed time averages, and per-sample observable series.

#![allow(dead_code)]

use num_complex::Complex64 as C64;
use ringquench_core::basis::{enumerate_basis, ProductBasis, StateVector};
use ringquench_core::dynamics::Trajectory;
use ringquench_core::observables::{current_expectation_for, entanglement_record, Species};
use ringquench_core::operators::{
    build_bose_hubbard, build_current_operator, QuenchScenario, SparseHermitianOperator,
};
use ringquench_core::solvers::ground_state;

/// Tensor product `a ⊗ b` on the product basis (B is the fast index).
pub fn product_state(a: &StateVector, b: &StateVector, pb: &ProductBasis) -> StateVector {
    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    assert_eq!(a.amplitudes.len(), da);
    assert_eq!(b.amplitudes.len(), db);
    let mut amp = vec![C64::new(0.0, 0.0); da * db];
    for ia in 0..da {
        for ib in 0..db {
            amp[ia * db + ib] = a.amplitudes[ia] * b.amplitudes[ib];
        }
    }
    StateVector::new(amp, pb.tag())
}

/// Pre-quench state of the protocol: each species in its own ground
/// state, coupling still off. Returns the product basis alongside.
pub fn pre_quench_ground(sc: &QuenchScenario) -> (ProductBasis, StateVector) {
    let basis_a = enumerate_basis(sc.params_a.sites, sc.params_a.atoms).unwrap();
    let basis_b = enumerate_basis(sc.params_b.sites, sc.params_b.atoms).unwrap();
    let gs_a = ground_state(&build_bose_hubbard(&sc.params_a, &basis_a).unwrap()).unwrap();
    let gs_b = ground_state(&build_bose_hubbard(&sc.params_b, &basis_b).unwrap()).unwrap();
    let pb = ProductBasis::new(basis_a, basis_b);
    let psi0 = product_state(&gs_a.vector, &gs_b.vector, &pb);
    (pb, psi0)
}

/// Current operator of the B species for the scenario.
pub fn b_current_operator(sc: &QuenchScenario) -> SparseHermitianOperator {
    let basis_b = enumerate_basis(sc.params_b.sites, sc.params_b.atoms).unwrap();
    build_current_operator(&basis_b, sc.params_b.phi)
}

/// `tr[ρ_B Î_B]` at every sample of a trajectory.
pub fn b_current_series(traj: &Trajectory, op_b: &SparseHermitianOperator) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| current_expectation_for(s, op_b, Species::B).unwrap())
        .collect()
}

/// Shifted Schmidt number K at every sample of a trajectory.
pub fn schmidt_series(traj: &Trajectory, pb: &ProductBasis) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| entanglement_record(s, pb).unwrap().schmidt_shifted)
        .collect()
}

/// Trapezoidal mean of the samples falling in `[t0, t1]` (at least two
/// samples must land inside; the window edges snap to the sample grid).
pub fn window_mean(times: &[f64], values: &[f64], t0: f64, t1: f64) -> f64 {
    assert_eq!(times.len(), values.len());
    assert!(t1 > t0, "window must be ordered: [{t0}, {t1}]");
    let idx: Vec<usize> =
        (0..times.len()).filter(|&i| times[i] >= t0 && times[i] <= t1).collect();
    assert!(idx.len() >= 2, "window [{t0}, {t1}] captures {} samples", idx.len());
    let mut integral = 0.0;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        integral += 0.5 * (values[i] + values[j]) * (times[j] - times[i]);
    }
    integral / (times[idx[idx.len() - 1]] - times[idx[0]])
}

/// Total atom number of one species, `Σ_j ⟨n^s_j⟩`, for a two-species state.
pub fn species_number_expectation(psi: &StateVector, pb: &ProductBasis, which: Species) -> f64 {
    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    let totals_a: Vec<f64> = (0..da)
        .map(|ia| pb.species_a().occupation(ia).iter().map(|&n| n as f64).sum())
        .collect();
    let totals_b: Vec<f64> = (0..db)
        .map(|ib| pb.species_b().occupation(ib).iter().map(|&n| n as f64).sum())
        .collect();
    let mut acc = 0.0;
    for ia in 0..da {
        for ib in 0..db {
            let w = psi.amplitudes[ia * db + ib].norm_sqr();
            acc += w
                * match which {
                    Species::A => totals_a[ia],
                    Species::B => totals_b[ib],
                };
        }
    }
    acc
}
