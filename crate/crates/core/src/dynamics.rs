//! Post-quench time evolution of the two-species mixture.
//!
//! Production path: second-order Strang splitting
//!
//! ```text
//! U(dt) = e^{-i dt/2 D} e^{-i dt K} e^{-i dt/2 D}
//! ```
//!
//! where `D` collects every diagonal term (both on-site repulsions and the
//! interspecies coupling) and `K = K_A ⊗ 1 + 1 ⊗ K_B` is the total hopping.
//! The two kinetic factors commute and act on one species each, so
//! `e^{-i dt K}` is applied *exactly*: each species' hopping matrix is
//! diagonalized once (single-species dimensions stay small) and the state,
//! reshaped to a `dim_A x dim_B` matrix `M`, is propagated as
//! `U_A · M · U_B^T`. No nested Trotterization, and the only error is the
//! O(dt²) noncommutativity of D with K.
//!
//! Reference path: spectral propagation `ψ(t) = Σ_i e^{-i E_i t} Φ_i ⟨Φ_i|ψ0⟩`
//! through the dense eigendecomposition of the full mixture Hamiltonian,
//! used as the exactness oracle and for spectral projections.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::basis::{enumerate_basis, BasisError, BasisTag, ProductBasis, StateVector};
use crate::operators::{build_kinetic, build_total_hamiltonian, OperatorError, QuenchScenario};
use crate::solvers::{full_spectrum, EigenDecomposition, SolverError};

/// Norm drift beyond this aborts the propagation as corrupted.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Errors from propagation and trajectory post-processing.
#[derive(Debug, Error)]
pub enum DynamicsError {
    /// Initial state must be normalized.
    #[error("initial state has norm {0}, expected 1")]
    NotNormalized(f64),
    /// Initial state must live on the scenario's product basis.
    #[error("state lives in {state:?} but the scenario describes {scenario:?}")]
    WrongSpace { state: BasisTag, scenario: BasisTag },
    /// Unitarity lost beyond [`NORM_DRIFT_LIMIT`].
    #[error("norm drifted to {norm} at t = {t} (limit 1e-6): propagation corrupted")]
    NormDrift { t: f64, norm: f64 },
    /// Requested series is not recorded in the trajectory.
    #[error("trajectory has no series named '{0}'")]
    UnknownSeries(String),
    /// Basis construction failed.
    #[error(transparent)]
    Basis(#[from] BasisError),
    /// Operator construction failed.
    #[error(transparent)]
    Operator(#[from] OperatorError),
    /// Eigen solver failed (reference path / kinetic factors).
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Sampled history of a propagation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Sample times, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// State at each sample time, renormalized for reporting.
    pub states: Vec<StateVector>,
    /// Named scalar series derived from the states (filled by callers
    /// and by [`running_time_average`]).
    pub series: BTreeMap<String, Vec<f64>>,
    /// Non-fatal advisories (e.g. a dt too coarse for the V-oscillation).
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// Attach a scalar series aligned with `times`.
    ///
    /// Panics if the length disagrees; series are always derived from the
    /// sampled states.
    pub fn insert_series(&mut self, key: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.times.len(), "series must align with sample times");
        self.series.insert(key.to_string(), values);
    }
}

/// Cumulative trapezoidal running mean of `values` over `times`;
/// the value at the first sample is the first sample itself.
pub fn cumulative_trapezoid_mean(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len());
    let mut out = Vec::with_capacity(values.len());
    if values.is_empty() {
        return out;
    }
    out.push(values[0]);
    let mut integral = 0.0f64;
    for i in 1..values.len() {
        integral += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
        let span = times[i] - times[0];
        out.push(if span > 0.0 { integral / span } else { values[i] });
    }
    out
}

/// Running time average `⟨f⟩_t = (1/t) ∫_0^t f` of the named series,
/// appended to a copy of the trajectory under `"<key>_avg"`.
pub fn running_time_average(traj: &Trajectory, key: &str) -> Result<Trajectory, DynamicsError> {
    let values = traj
        .series
        .get(key)
        .ok_or_else(|| DynamicsError::UnknownSeries(key.to_string()))?;
    let mut out = traj.clone();
    let avg = cumulative_trapezoid_mean(&traj.times, values);
    out.series.insert(format!("{key}_avg"), avg);
    Ok(out)
}

/// The species-local propagator factors `e^{-i dt K_s}`, rebuilt cheaply
/// for any dt from the cached eigendecomposition of the hopping matrix.
struct KineticFactor {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl KineticFactor {
    fn new(basis: &crate::basis::SpeciesBasis, j: f64, phi: f64) -> Result<Self, DynamicsError> {
        let k = build_kinetic(basis, j, phi)?;
        let spec = full_spectrum(&k)?;
        Ok(KineticFactor { eigenvalues: spec.eigenvalues, vectors: spec.eigenvectors })
    }

    /// Dense `e^{-i dt K}` = Q e^{-i dt Λ} Q†.
    fn propagator(&self, dt: f64) -> DMatrix<C64> {
        let n = self.eigenvalues.len();
        let mut phased = self.vectors.clone();
        for (c, &e) in self.eigenvalues.iter().enumerate() {
            let phase = C64::new(0.0, -dt * e).exp();
            for r in 0..n {
                phased[(r, c)] *= phase;
            }
        }
        phased * self.vectors.adjoint()
    }
}

/// All diagonal energy terms over the product basis:
/// on-site repulsions of both species plus the interspecies attraction.
fn diagonal_energies(sc: &QuenchScenario, pb: &ProductBasis) -> Vec<f64> {
    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    let onsite = |occ: &[u8], u: f64| -> f64 {
        occ.iter().map(|&n| 0.5 * u * (n as f64) * (n as f64 - 1.0)).sum()
    };
    let ea: Vec<f64> = (0..da)
        .map(|i| onsite(pb.species_a().occupation(i), sc.params_a.u))
        .collect();
    let eb: Vec<f64> = (0..db)
        .map(|i| onsite(pb.species_b().occupation(i), sc.params_b.u))
        .collect();
    let mut d = vec![0.0f64; da * db];
    for ia in 0..da {
        let occ_a = pb.species_a().occupation(ia);
        for ib in 0..db {
            let occ_b = pb.species_b().occupation(ib);
            let overlap: f64 = occ_a
                .iter()
                .zip(occ_b)
                .map(|(&na, &nb)| (na as f64) * (nb as f64))
                .sum();
            d[ia * db + ib] = ea[ia] + eb[ib] - sc.v * overlap;
        }
    }
    d
}

/// Apply `U_A · M · U_B^T` in place of the flattened state.
fn apply_kinetic(psi: &mut [C64], ua: &DMatrix<C64>, ub: &DMatrix<C64>, da: usize, db: usize) {
    let m = DMatrix::from_fn(da, db, |ia, ib| psi[ia * db + ib]);
    // Right factor is a plain transpose: U_B acts on the B index of M.
    let out = ua * m * ub.transpose();
    for ia in 0..da {
        for ib in 0..db {
            psi[ia * db + ib] = out[(ia, ib)];
        }
    }
}

/// Propagate `psi0` under the post-quench Hamiltonian with Strang
/// splitting, sampling every `sc.sample_stride` steps (plus the final
/// time; a last partial step is taken when dt does not divide t_max).
pub fn evolve_trotter(sc: &QuenchScenario, psi0: &StateVector) -> Result<Trajectory, DynamicsError> {
    let basis_a = enumerate_basis(sc.params_a.sites, sc.params_a.atoms)?;
    let basis_b = enumerate_basis(sc.params_b.sites, sc.params_b.atoms)?;
    let pb = ProductBasis::new(basis_a, basis_b);
    if psi0.tag != pb.tag() {
        return Err(DynamicsError::WrongSpace { state: psi0.tag, scenario: pb.tag() });
    }
    let n0 = psi0.norm();
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(DynamicsError::NotNormalized(n0));
    }

    let mut warnings = Vec::new();
    if sc.dt > 0.1 * TAU / sc.v {
        warnings.push(format!(
            "dt = {} does not resolve the interspecies oscillation period {:.3e}; \
             expect poor accuracy (want dt <= {:.3e})",
            sc.dt,
            TAU / sc.v,
            0.1 * TAU / sc.v
        ));
    }

    let (da, db) = (pb.species_a().dim(), pb.species_b().dim());
    let kin_a = KineticFactor::new(pb.species_a(), sc.params_a.j, sc.params_a.phi)?;
    let kin_b = KineticFactor::new(pb.species_b(), sc.params_b.j, sc.params_b.phi)?;
    let diag = diagonal_energies(sc, &pb);

    let half_phase: Vec<C64> = diag.iter().map(|&e| C64::new(0.0, -0.5 * sc.dt * e).exp()).collect();
    let ua = kin_a.propagator(sc.dt);
    let ub = kin_b.propagator(sc.dt);

    // Number of full steps; a shorter final step covers any remainder.
    let n_full = (sc.t_max / sc.dt).floor() as usize;
    let remainder = sc.t_max - n_full as f64 * sc.dt;
    let has_partial = remainder > sc.dt * 1e-9;

    let mut psi: Vec<C64> = psi0.amplitudes.clone();
    let mut times = Vec::new();
    let mut states = Vec::new();

    let record =
        |t: f64, psi: &[C64], times: &mut Vec<f64>, states: &mut Vec<StateVector>| -> Result<(), DynamicsError> {
            let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_DRIFT_LIMIT {
                return Err(DynamicsError::NormDrift { t, norm });
            }
            let reported: Vec<C64> = psi.iter().map(|a| a / norm).collect();
            times.push(t);
            states.push(StateVector::new(reported, pb.tag()));
            Ok(())
        };

    record(0.0, &psi, &mut times, &mut states)?;
    for step in 1..=n_full {
        for (a, p) in psi.iter_mut().zip(&half_phase) {
            *a *= p;
        }
        apply_kinetic(&mut psi, &ua, &ub, da, db);
        for (a, p) in psi.iter_mut().zip(&half_phase) {
            *a *= p;
        }
        if step % sc.sample_stride == 0 && !(step == n_full && !has_partial) {
            record(step as f64 * sc.dt, &psi, &mut times, &mut states)?;
        }
    }
    if has_partial {
        let half: Vec<C64> = diag
            .iter()
            .map(|&e| C64::new(0.0, -0.5 * remainder * e).exp())
            .collect();
        let (ua_p, ub_p) = (kin_a.propagator(remainder), kin_b.propagator(remainder));
        for (a, p) in psi.iter_mut().zip(&half) {
            *a *= p;
        }
        apply_kinetic(&mut psi, &ua_p, &ub_p, da, db);
        for (a, p) in psi.iter_mut().zip(&half) {
            *a *= p;
        }
    }
    // The final time is always part of the record.
    record(sc.t_max, &psi, &mut times, &mut states)?;

    Ok(Trajectory { times, states, series: BTreeMap::new(), warnings })
}

/// Dense spectral propagator of the full mixture Hamiltonian, cached so
/// many times t can be evaluated after one diagonalization.
pub struct ReferencePropagator {
    eig: EigenDecomposition,
}

impl ReferencePropagator {
    /// Diagonalize the post-quench Hamiltonian of the scenario.
    pub fn new(sc: &QuenchScenario) -> Result<Self, DynamicsError> {
        let basis_a = enumerate_basis(sc.params_a.sites, sc.params_a.atoms)?;
        let basis_b = enumerate_basis(sc.params_b.sites, sc.params_b.atoms)?;
        let pb = ProductBasis::new(basis_a, basis_b);
        let h = build_total_hamiltonian(sc, &pb)?;
        Ok(ReferencePropagator { eig: full_spectrum(&h)? })
    }

    /// The underlying eigendecomposition (for spectral projections).
    pub fn spectrum(&self) -> &EigenDecomposition {
        &self.eig
    }

    /// `ψ(t) = Σ_i e^{-i E_i t} |Φ_i⟩⟨Φ_i|ψ0⟩`.
    pub fn evolve(&self, psi0: &StateVector, t: f64) -> Result<StateVector, DynamicsError> {
        if psi0.tag != self.eig.tag {
            return Err(DynamicsError::WrongSpace { state: psi0.tag, scenario: self.eig.tag });
        }
        let dim = self.eig.len();
        // Coefficients in the eigenbasis: c = Q† ψ0.
        let mut coeff = vec![C64::new(0.0, 0.0); dim];
        for (i, c) in coeff.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..dim {
                acc += self.eig.eigenvectors[(r, i)].conj() * psi0.amplitudes[r];
            }
            *c = acc * C64::new(0.0, -self.eig.eigenvalues[i] * t).exp();
        }
        // Back to the product basis: ψ = Q c.
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for i in 0..dim {
            let ci = coeff[i];
            if ci.norm_sqr() == 0.0 {
                continue;
            }
            for r in 0..dim {
                out[r] += self.eig.eigenvectors[(r, i)] * ci;
            }
        }
        Ok(StateVector::new(out, psi0.tag))
    }
}

/// One-shot exact evolution; prefer [`ReferencePropagator`] when several
/// times are needed.
pub fn evolve_reference(
    sc: &QuenchScenario,
    psi0: &StateVector,
    t: f64,
) -> Result<StateVector, DynamicsError> {
    ReferencePropagator::new(sc)?.evolve(psi0, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use crate::operators::{build_bose_hubbard, SingleSpeciesParams};
    use crate::solvers::ground_state;

    fn small_scenario() -> QuenchScenario {
        let pa = SingleSpeciesParams::new(0.05, 1.0, 0.3, 3, 3).unwrap();
        let pb = SingleSpeciesParams::new(1.0, 1.0, 0.3, 3, 3).unwrap();
        QuenchScenario::new(pa, pb, 20.0, 0.002, 0.1, 5).unwrap()
    }

    fn product_ground_state(sc: &QuenchScenario) -> StateVector {
        let ba = enumerate_basis(sc.params_a.sites, sc.params_a.atoms).unwrap();
        let bb = enumerate_basis(sc.params_b.sites, sc.params_b.atoms).unwrap();
        let ga = ground_state(&build_bose_hubbard(&sc.params_a, &ba).unwrap()).unwrap();
        let gb = ground_state(&build_bose_hubbard(&sc.params_b, &bb).unwrap()).unwrap();
        let pb = ProductBasis::new(ba, bb);
        let mut amp = vec![C64::new(0.0, 0.0); pb.dim()];
        for ia in 0..pb.species_a().dim() {
            for ib in 0..pb.species_b().dim() {
                amp[pb.ordinal(ia, ib)] =
                    ga.vector.amplitudes[ia] * gb.vector.amplitudes[ib];
            }
        }
        StateVector::new(amp, pb.tag())
    }

    #[test]
    fn trapezoid_mean_of_constant_is_constant() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let values = vec![3.25; 50];
        for v in cumulative_trapezoid_mean(&times, &values) {
            assert!((v - 3.25).abs() < 1e-14);
        }
    }

    #[test]
    fn trapezoid_mean_of_fast_cosine_decays() {
        // cos(V t) sampled at 40+ points per period, averaged to 100/V.
        let v = 200.0;
        let dt = (TAU / v) / 64.0;
        let n = (100.0 / v / dt) as usize;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let values: Vec<f64> = times.iter().map(|&t| (v * t).cos()).collect();
        let avg = cumulative_trapezoid_mean(&times, &values);
        assert!(avg.last().unwrap().abs() <= 0.02);
    }

    #[test]
    fn running_average_requires_known_series() {
        let traj = Trajectory {
            times: vec![0.0, 1.0],
            states: Vec::new(),
            series: BTreeMap::new(),
            warnings: Vec::new(),
        };
        assert!(matches!(
            running_time_average(&traj, "nope"),
            Err(DynamicsError::UnknownSeries(_))
        ));
    }

    #[test]
    fn reference_at_zero_time_is_identity() {
        let sc = small_scenario();
        let psi0 = product_ground_state(&sc);
        let psi = evolve_reference(&sc, &psi0, 0.0).unwrap();
        for (a, b) in psi.amplitudes.iter().zip(&psi0.amplitudes) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn reference_conserves_energy_and_spectral_weights() {
        let sc = small_scenario();
        let psi0 = product_ground_state(&sc);
        let prop = ReferencePropagator::new(&sc).unwrap();
        let ba = enumerate_basis(3, 3).unwrap();
        let bb = enumerate_basis(3, 3).unwrap();
        let pb = ProductBasis::new(ba, bb);
        let h = build_total_hamiltonian(&sc, &pb).unwrap();
        let e0 = h.expectation(&psi0).unwrap().re;
        for &t in &[0.05, 0.31, 1.7] {
            let psi = prop.evolve(&psi0, t).unwrap();
            let e = h.expectation(&psi).unwrap().re;
            assert!((e - e0).abs() <= 1e-10 * e0.abs().max(1.0));
        }
        // Spectral weights p_i do not depend on t.
        let p_at = |t: f64| -> Vec<f64> {
            let psi = prop.evolve(&psi0, t).unwrap();
            (0..prop.spectrum().len())
                .map(|i| {
                    let phi = prop.spectrum().eigenvector(i);
                    phi.inner(&psi).norm_sqr()
                })
                .collect()
        };
        let (p1, p2) = (p_at(0.2), p_at(1.3));
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn trotter_stays_normalized_and_tracks_reference() {
        let sc = small_scenario();
        let psi0 = product_ground_state(&sc);
        let traj = evolve_trotter(&sc, &psi0).unwrap();
        assert_eq!(traj.times[0], 0.0);
        for w in traj.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for s in &traj.states {
            assert!((s.norm() - 1.0).abs() < 1e-8);
        }
        assert!((traj.times.last().unwrap() - sc.t_max).abs() < 1e-12);
        let psi_ref = evolve_reference(&sc, &psi0, sc.t_max).unwrap();
        let overlap = traj.states.last().unwrap().inner(&psi_ref).norm();
        assert!(overlap >= 1.0 - 1e-8, "overlap {overlap}");
    }

    #[test]
    fn partial_final_step_is_recorded() {
        let pa = SingleSpeciesParams::new(0.05, 1.0, 0.3, 3, 2).unwrap();
        let pb = SingleSpeciesParams::new(0.5, 1.0, 0.3, 3, 2).unwrap();
        // t_max = 0.025 is not a multiple of dt = 0.002.
        let sc = QuenchScenario::new(pa, pb, 10.0, 0.002, 0.025, 5).unwrap();
        let psi0 = product_ground_state(&sc);
        let traj = evolve_trotter(&sc, &psi0).unwrap();
        assert!((traj.times.last().unwrap() - 0.025).abs() < 1e-12);
    }

    #[test]
    fn coarse_dt_warns_about_fast_oscillations() {
        let pa = SingleSpeciesParams::new(0.05, 1.0, 0.3, 3, 2).unwrap();
        let pb = SingleSpeciesParams::new(0.5, 1.0, 0.3, 3, 2).unwrap();
        let sc = QuenchScenario::new(pa, pb, 500.0, 0.01, 0.05, 1).unwrap();
        let psi0 = product_ground_state(&sc);
        let traj = evolve_trotter(&sc, &psi0).unwrap();
        assert!(!traj.warnings.is_empty());
    }

    #[test]
    fn dt_halving_shows_second_order_convergence() {
        let sc = small_scenario();
        let psi0 = product_ground_state(&sc);
        let prop = ReferencePropagator::new(&sc).unwrap();
        let t = 0.1;
        let err_at = |dt: f64| -> f64 {
            let sc2 = QuenchScenario::new(sc.params_a, sc.params_b, sc.v, dt, t, 1_000_000).unwrap();
            let traj = evolve_trotter(&sc2, &psi0).unwrap();
            let psi_ref = prop.evolve(&psi0, t).unwrap();
            let last = traj.states.last().unwrap();
            let mut diff = 0.0f64;
            for (a, b) in last.amplitudes.iter().zip(&psi_ref.amplitudes) {
                diff += (a - b).norm_sqr();
            }
            diff.sqrt()
        };
        let (e1, e2) = (err_at(0.002), err_at(0.001));
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "convergence ratio {ratio}");
    }
}
