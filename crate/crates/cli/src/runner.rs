//! Mode executors: turn a validated configuration into exact runs,
//! derive the observable series, and emit result tables and optional
//! plot scripts.
//!
//! Failures carry one of three exit classes: configuration (bad or
//! inconsistent parameters), capacity (the requested Fock space or
//! dense solve is too large), and numeric integrity (a computed
//! quantity failed its internal guards).

use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use ringquench_core::basis::{enumerate_basis, BasisError, ProductBasis, StateVector};
use ringquench_core::dynamics::{
    evolve_trotter, running_time_average, DynamicsError, ReferencePropagator, Trajectory,
};
use ringquench_core::observables::{
    current_expectation, current_expectation_for, eigenbasis_probabilities, entanglement_record,
    momentum_distribution, visibility, ObservablesError, Species,
};
use ringquench_core::operators::{
    build_bose_hubbard, build_current_operator, OperatorError, QuenchScenario, SingleSpeciesParams,
};
use ringquench_core::solvers::{ground_state, GroundState, SolverError};
use ringquench_core::theory::{
    self, TheoryError, TheoryInputs,
};

use crate::config::{Mode, Params, ScenarioConfig, SweepAxis};
use crate::output::{Cell, PlotSeries, PlotSpec, ResultTable};

/// Baseline currents below this are treated as zero and the relative
/// reduction as undefined.
const BASELINE_GUARD: f64 = 1e-12;
/// Normalization denominators below this produce empty cells instead
/// of huge meaningless ratios.
const RATIO_GUARD: f64 = 1e-15;

/// Which exit class a failure belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunErrorKind {
    /// Invalid or inconsistent parameters: exit code 2.
    Config,
    /// Requested space or solve exceeds a capacity cap: exit code 3.
    Capacity,
    /// A numeric guard tripped mid-computation: exit code 4.
    Numeric,
}

/// A failed run with its exit class.
#[derive(Debug)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub message: String,
}

impl RunError {
    fn new(kind: RunErrorKind, message: impl Into<String>) -> Self {
        RunError { kind, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        RunError::new(RunErrorKind::Numeric, message)
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            RunErrorKind::Config => 2,
            RunErrorKind::Capacity => 3,
            RunErrorKind::Numeric => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            RunErrorKind::Config => "config error",
            RunErrorKind::Capacity => "capacity error",
            RunErrorKind::Numeric => "numeric-integrity error",
        };
        write!(f, "{label}: {}", self.message)
    }
}

impl std::error::Error for RunError {}

impl From<BasisError> for RunError {
    fn from(e: BasisError) -> Self {
        let kind = match e {
            BasisError::DimensionOverflow { .. } => RunErrorKind::Capacity,
            _ => RunErrorKind::Config,
        };
        RunError::new(kind, e.to_string())
    }
}

impl From<OperatorError> for RunError {
    fn from(e: OperatorError) -> Self {
        let kind = match e {
            OperatorError::CapacityExceeded { .. } => RunErrorKind::Capacity,
            _ => RunErrorKind::Config,
        };
        RunError::new(kind, e.to_string())
    }
}

impl From<SolverError> for RunError {
    fn from(e: SolverError) -> Self {
        let kind = match e {
            SolverError::CapacityExceeded { .. } => RunErrorKind::Capacity,
            SolverError::NonConvergence { .. } => RunErrorKind::Numeric,
        };
        RunError::new(kind, e.to_string())
    }
}

impl From<DynamicsError> for RunError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Basis(inner) => inner.into(),
            DynamicsError::Operator(inner) => inner.into(),
            DynamicsError::Solver(inner) => inner.into(),
            other => RunError::numeric(other.to_string()),
        }
    }
}

impl From<ObservablesError> for RunError {
    fn from(e: ObservablesError) -> Self {
        match e {
            ObservablesError::Operator(inner) => inner.into(),
            ObservablesError::Basis(inner) => inner.into(),
            other => RunError::numeric(other.to_string()),
        }
    }
}

impl From<TheoryError> for RunError {
    fn from(e: TheoryError) -> Self {
        let kind = match e {
            TheoryError::Quadrature(_) | TheoryError::LimitNotConverged { .. } => {
                RunErrorKind::Numeric
            }
            TheoryError::Observables(_) => RunErrorKind::Numeric,
            _ => RunErrorKind::Config,
        };
        RunError::new(kind, e.to_string())
    }
}

/// Where and how to write results.
pub struct RunContext {
    pub out_dir: PathBuf,
    /// File stem: the preset name or the config file stem.
    pub stem: String,
    pub preset: Option<String>,
    pub emit_plots: bool,
}

/// What a run produced.
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// One emitted table plus the parameters that produced it (the latter
/// feed the plot builders).
struct NamedTable {
    file: String,
    curve: String,
    params: Params,
    table: ResultTable,
}

/// Run the whole configuration and write every output file.
pub fn execute(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<RunSummary, RunError> {
    let mut warnings = Vec::new();
    let tables = match cfg.mode {
        Mode::Quench => run_quench(cfg, ctx, &mut warnings)?,
        Mode::Sweep => run_sweep(cfg, ctx, &mut warnings)?,
        Mode::VisibilityScan => run_visibility_scan(cfg, ctx)?,
        Mode::GroundState => run_ground_state(cfg, ctx)?,
        Mode::SpectrumProjection => run_spectrum_projection(cfg, ctx)?,
        Mode::Theory => run_theory(cfg, ctx)?,
    };

    for nt in &tables {
        if let Some((col, row)) = nt.table.find_non_finite() {
            return Err(RunError::numeric(format!(
                "non-finite value in column '{col}', row {row} of {}; nothing was written",
                nt.file
            )));
        }
    }

    let mut files = Vec::new();
    for nt in &tables {
        let path = ctx.out_dir.join(&nt.file);
        nt.table
            .write(&path)
            .map_err(|e| RunError::new(RunErrorKind::Config, format!("cannot write {}: {e}", path.display())))?;
        files.push(path);
    }

    if ctx.emit_plots {
        for spec in plots(cfg.mode, ctx, &tables) {
            let path = spec
                .write(&ctx.out_dir)
                .map_err(|e| RunError::new(RunErrorKind::Config, format!("cannot write plot script: {e}")))?;
            files.push(path);
        }
    }

    Ok(RunSummary { files, warnings })
}

/// `<stem>.csv` for a single unnamed curve, `<stem>_<curve>.csv` otherwise.
fn csv_name(ctx: &RunContext, curve: &str, single: bool) -> String {
    if single && curve == "main" {
        format!("{}.csv", ctx.stem)
    } else {
        format!("{}_{curve}.csv", ctx.stem)
    }
}

/// Pre-quench product of the two single-species ground states.
struct PreparedQuench {
    scenario: QuenchScenario,
    basis: ProductBasis,
    psi0: StateVector,
    /// Ground-state visibilities of the uncoupled gases.
    vis_a: f64,
    vis_b: f64,
}

fn single_species(p: &Params, species: Species) -> Result<SingleSpeciesParams, RunError> {
    let (j, u, phi, n) = match species {
        Species::A => (p.j_a, p.u_a, p.phi_a, p.n_a),
        Species::B => (p.j_b, p.u_b, p.phi_b, p.n_b),
    };
    Ok(SingleSpeciesParams::new(j, u, phi, p.sites, n)?)
}

fn build_scenario(p: &Params) -> Result<QuenchScenario, RunError> {
    let pa = single_species(p, Species::A)?;
    let pb = single_species(p, Species::B)?;
    Ok(QuenchScenario::new(pa, pb, p.v, p.dt, p.t_max, p.sample_stride)?)
}

/// Ground state that is safe to report observables from.
fn checked_ground(
    op: &ringquench_core::operators::SparseHermitianOperator,
    label: &str,
) -> Result<GroundState, RunError> {
    let gs = ground_state(op)?;
    if gs.degenerate {
        return Err(RunError::numeric(format!(
            "{label} ground state is degenerate; its observables are basis dependent \
             (move the Peierls phase off the half-flux crossing)"
        )));
    }
    Ok(gs)
}

fn prepare_quench(p: &Params) -> Result<PreparedQuench, RunError> {
    let scenario = build_scenario(p)?;
    let basis_a = enumerate_basis(p.sites, p.n_a)?;
    let basis_b = enumerate_basis(p.sites, p.n_b)?;
    let gs_a = checked_ground(&build_bose_hubbard(&scenario.params_a, &basis_a)?, "species A")?;
    let gs_b = checked_ground(&build_bose_hubbard(&scenario.params_b, &basis_b)?, "species B")?;
    let vis_a = visibility(&momentum_distribution(&gs_a.vector, &basis_a, p.grid_points)?)?;
    let vis_b = visibility(&momentum_distribution(&gs_b.vector, &basis_b, p.grid_points)?)?;
    let basis = ProductBasis::new(basis_a, basis_b);
    let (da, db) = (basis.species_a().dim(), basis.species_b().dim());
    let mut amp = vec![C64::new(0.0, 0.0); da * db];
    for ia in 0..da {
        for ib in 0..db {
            amp[ia * db + ib] = gs_a.vector.amplitudes[ia] * gs_b.vector.amplitudes[ib];
        }
    }
    let psi0 = StateVector::new(amp, basis.tag());
    Ok(PreparedQuench { scenario, basis, psi0, vis_a, vis_b })
}

/// Relative bath-current reduction and shifted Schmidt number along a
/// trajectory, with running averages attached.
///
/// A baseline current below the division guard (phi_B = 0, or exactly
/// half flux where the ground-state current changes sign) leaves the
/// relative reduction undefined: the J_B series is omitted with a
/// warning and only the entanglement series is produced.
fn quench_series(prep: &PreparedQuench, traj: Trajectory) -> Result<Trajectory, RunError> {
    let op_b =
        build_current_operator(prep.basis.species_b(), prep.scenario.params_b.phi);
    let raw: Vec<f64> = prep
        .states_current(&traj, &op_b)?;
    let baseline = raw[0];
    let schmidt: Vec<f64> = traj
        .states
        .iter()
        .map(|s| entanglement_record(s, &prep.basis).map(|r| r.schmidt_shifted))
        .collect::<Result<_, _>>()?;
    let mut traj = traj;
    let sound_baseline = baseline.abs() >= BASELINE_GUARD;
    if sound_baseline {
        let reduction: Vec<f64> = raw.iter().map(|i| (baseline - i) / baseline).collect();
        traj.insert_series("J_B", reduction);
    } else {
        traj.warnings.push(format!(
            "baseline bath current {baseline:.3e} is below {BASELINE_GUARD:.0e}; the relative \
             reduction is undefined (phi_B = 0 or half flux?) and its columns are left empty"
        ));
    }
    traj.insert_series("K_AB", schmidt);
    let traj =
        if sound_baseline { running_time_average(&traj, "J_B")? } else { traj };
    let traj = running_time_average(&traj, "K_AB")?;
    Ok(traj)
}

impl PreparedQuench {
    fn states_current(
        &self,
        traj: &Trajectory,
        op_b: &ringquench_core::operators::SparseHermitianOperator,
    ) -> Result<Vec<f64>, RunError> {
        traj.states
            .iter()
            .map(|s| current_expectation_for(s, op_b, Species::B).map_err(RunError::from))
            .collect()
    }
}

/// Shared metadata preamble: mode, provenance, and the effective
/// parameters (defaults included).
fn base_metadata(table: &mut ResultTable, mode: Mode, ctx: &RunContext, curve: &str) {
    table.meta("generator", format!("ringquench {}", env!("CARGO_PKG_VERSION")));
    table.meta("mode", mode.name());
    if let Some(p) = &ctx.preset {
        table.meta("preset", p);
    }
    table.meta("curve", curve);
}

fn two_species_metadata(table: &mut ResultTable, p: &Params) {
    table.meta("L", p.sites);
    table.meta("N_A", p.n_a);
    table.meta("N_B", p.n_b);
    table.meta("J_A", p.j_a);
    table.meta("U_A", p.u_a);
    table.meta("phi_A", p.phi_a);
    table.meta("J_B", p.j_b);
    table.meta("U_B", p.u_b);
    table.meta("phi_B", p.phi_b);
    table.meta("V", p.v);
    table.meta("dt", p.dt);
    table.meta("t_max", p.t_max);
    table.meta("sample_stride", p.sample_stride);
    table.meta("grid_points", p.grid_points);
    table.meta("lambda_A", p.lambda_a());
    table.meta("lambda_B", p.lambda_b());
}

fn bath_metadata(table: &mut ResultTable, p: &Params) {
    table.meta("L", p.sites);
    table.meta("N_B", p.n_b);
    table.meta("J_B", p.j_b);
    table.meta("U_B", p.u_b);
    table.meta("phi_B", p.phi_b);
    table.meta("grid_points", p.grid_points);
    table.meta("lambda_B", p.lambda_b());
}

fn run_quench(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    warnings: &mut Vec<String>,
) -> Result<Vec<NamedTable>, RunError> {
    let single = cfg.curves.len() == 1;
    let results: Vec<Result<(NamedTable, Vec<String>), RunError>> = cfg
        .curves
        .par_iter()
        .map(|curve| {
            let p = &curve.params;
            let prep = prepare_quench(p)?;
            let traj = evolve_trotter(&prep.scenario, &prep.psi0)?;
            let traj = quench_series(&prep, traj)?;
            let curve_warnings: Vec<String> = traj
                .warnings
                .iter()
                .map(|w| format!("curve {}: {w}", curve.name))
                .collect();

            // The plateau prediction needs integer fillings and a sound
            // baseline; leave the column empty otherwise.
            let plateau = if traj.series.contains_key("J_B") {
                TheoryInputs::from_scenario(&prep.scenario)
                    .ok()
                    .map(|ti| theory::current_variation_avg(&ti).from_lambda)
            } else {
                None
            };

            let mut table = ResultTable::new(vec![
                "t",
                "J_B",
                "J_B_avg",
                "theory_avg",
                "K_AB",
                "K_AB_avg",
            ]);
            base_metadata(&mut table, cfg.mode, ctx, &curve.name);
            two_species_metadata(&mut table, p);
            if let Some(v) = plateau {
                table.meta("theory_avg", v);
            }
            let jb = traj.series.get("J_B");
            let jb_avg = traj.series.get("J_B_avg");
            let k = &traj.series["K_AB"];
            let k_avg = &traj.series["K_AB_avg"];
            for (i, &t) in traj.times.iter().enumerate() {
                table.push_row(vec![
                    Cell::Float(t),
                    jb.map_or(Cell::Empty, |s| Cell::Float(s[i])),
                    jb_avg.map_or(Cell::Empty, |s| Cell::Float(s[i])),
                    plateau.map_or(Cell::Empty, Cell::Float),
                    Cell::Float(k[i]),
                    Cell::Float(k_avg[i]),
                ]);
            }
            let nt = NamedTable {
                file: csv_name(ctx, &curve.name, single),
                curve: curve.name.clone(),
                params: p.clone(),
                table,
            };
            Ok((nt, curve_warnings))
        })
        .collect();

    let mut tables = Vec::new();
    for r in results {
        let (nt, w) = r?;
        warnings.extend(w);
        tables.push(nt);
    }
    Ok(tables)
}

/// Divide unless the denominator is numerically zero.
fn ratio(num: f64, den: f64) -> Cell {
    if den.abs() > RATIO_GUARD {
        Cell::Float(num / den)
    } else {
        Cell::Empty
    }
}

fn opt_ratio(num: Option<f64>, den: Option<f64>) -> Cell {
    match (num, den) {
        (Some(n), Some(d)) => ratio(n, d),
        _ => Cell::Empty,
    }
}

fn run_sweep(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
    warnings: &mut Vec<String>,
) -> Result<Vec<NamedTable>, RunError> {
    let single = cfg.curves.len() == 1;
    let mut tables = Vec::new();
    for curve in &cfg.curves {
        let axis = curve.sweep.as_ref().expect("sweep mode validated an axis");
        let rows: Vec<Result<(Vec<Cell>, Vec<String>), RunError>> = axis
            .values
            .par_iter()
            .map(|&value| sweep_point(&curve.params, axis, value, &curve.name))
            .collect();

        let mut table = ResultTable::new(vec![
            "sweep_value",
            "lambda_A",
            "vis1_A",
            "vis1_B",
            "visibility_A",
            "visibility_B",
            "JB_avg",
            "JB_avg_over_VA2",
            "JB_avg_over_lambdaA2",
            "K_avg",
            "K_avg_per_site",
            "K_avg_over_lambdaA2_lambdaB2",
            "K_avg_per_site_over_VB2",
            "K_avg_per_site_over_JB_avg",
        ]);
        base_metadata(&mut table, cfg.mode, ctx, &curve.name);
        two_species_metadata(&mut table, &curve.params);
        table.meta("sweep.key", &axis.key);
        table.meta(
            "sweep.values",
            axis.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "),
        );
        for row in rows {
            let (cells, point_warnings) = row?;
            warnings.extend(point_warnings);
            table.push_row(cells);
        }
        tables.push(NamedTable {
            file: csv_name(ctx, &curve.name, single),
            curve: curve.name.clone(),
            params: curve.params.clone(),
            table,
        });
    }
    Ok(tables)
}

/// One point of a parameter sweep: run the quench, average to t_max,
/// and attach every normalization the published panels use. Undefined
/// quantities (current reduction without a baseline, first-order
/// visibilities at fractional filling) become empty cells.
fn sweep_point(
    base: &Params,
    axis: &SweepAxis,
    value: f64,
    curve: &str,
) -> Result<(Vec<Cell>, Vec<String>), RunError> {
    let p = base.with_value(&axis.key, value);
    let prep = prepare_quench(&p)?;
    let traj = evolve_trotter(&prep.scenario, &prep.psi0)?;
    let traj = quench_series(&prep, traj)?;
    let point_warnings: Vec<String> = traj
        .warnings
        .iter()
        .map(|w| format!("curve {curve}, {} = {value}: {w}", axis.key))
        .collect();
    let jb_avg = traj.series.get("J_B_avg").map(|s| *s.last().expect("samples exist"));
    let k_avg = *traj.series["K_AB_avg"].last().expect("trajectory has samples");
    let sites = p.sites as f64;
    let k_per_site = k_avg / sites;

    // First-order visibilities 4(ν+1)λ v_L(φ): defined at integer
    // filling only.
    let ti = TheoryInputs::from_scenario(&prep.scenario).ok();
    let vis1 = |species: Species| -> Option<f64> {
        ti.as_ref().map(|ti| {
            let nu = ti.filling(species) as f64;
            4.0 * (nu + 1.0) * ti.lambda(species) * ti.v_l(ti.phase(species))
        })
    };
    let vis1_a = vis1(Species::A);
    let vis1_b = vis1(Species::B);
    let lam_a2 = p.lambda_a().powi(2);
    let lam_b2 = p.lambda_b().powi(2);

    let cells = vec![
        Cell::Float(value),
        Cell::Float(p.lambda_a()),
        vis1_a.map_or(Cell::Empty, Cell::Float),
        vis1_b.map_or(Cell::Empty, Cell::Float),
        Cell::Float(prep.vis_a),
        Cell::Float(prep.vis_b),
        jb_avg.map_or(Cell::Empty, Cell::Float),
        opt_ratio(jb_avg, vis1_a.map(|v| v * v)),
        opt_ratio(jb_avg, Some(lam_a2)),
        Cell::Float(k_avg),
        Cell::Float(k_per_site),
        ratio(k_avg, lam_a2 * lam_b2),
        opt_ratio(Some(k_per_site), vis1_b.map(|v| v * v)),
        opt_ratio(Some(k_per_site), jb_avg),
    ];
    Ok((cells, point_warnings))
}

/// Energy, current and visibility of one single-species ground state.
struct BathGround {
    energy: f64,
    current: f64,
    vis: f64,
    momentum: Vec<(f64, f64)>,
    s_max: (f64, f64),
    s_min: (f64, f64),
}

fn bath_ground(p: &Params) -> Result<BathGround, RunError> {
    let params = single_species(p, Species::B)?;
    let basis = enumerate_basis(p.sites, p.n_b)?;
    let gs = checked_ground(&build_bose_hubbard(&params, &basis)?, "the")?;
    let op = build_current_operator(&basis, params.phi);
    let current = current_expectation(&gs.vector, &op)?;
    let md = momentum_distribution(&gs.vector, &basis, p.grid_points)?;
    let vis = visibility(&md)?;
    let momentum = md.q_grid.iter().copied().zip(md.values.iter().copied()).collect();
    Ok(BathGround { energy: gs.energy, current, vis, momentum, s_max: md.s_max, s_min: md.s_min })
}

fn run_visibility_scan(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<Vec<NamedTable>, RunError> {
    let single = cfg.curves.len() == 1;
    let mut tables = Vec::new();
    for curve in &cfg.curves {
        let axis = curve.sweep.as_ref().expect("visibility-scan validated an axis");
        let rows: Vec<Result<Vec<Cell>, RunError>> = axis
            .values
            .par_iter()
            .map(|&phi| {
                let p = curve.params.with_value("phi_B", phi);
                let ground = bath_ground(&p)?;
                let ti = TheoryInputs::ring(
                    0.0,
                    p.lambda_b(),
                    1,
                    p.n_b / p.sites,
                    p.sites,
                    0.0,
                    phi,
                    1.0,
                    1.0,
                    p.u_b,
                    p.j_b,
                )?;
                let formula = theory::visibility_mi(&ti, Species::B).value;
                Ok(vec![
                    Cell::Float(phi),
                    Cell::Float(ground.energy),
                    Cell::Float(ground.current),
                    Cell::Float(ground.vis),
                    Cell::Float(formula),
                ])
            })
            .collect();

        let mut table = ResultTable::new(vec![
            "phi_B",
            "energy",
            "current",
            "visibility",
            "visibility_formula",
        ]);
        base_metadata(&mut table, cfg.mode, ctx, &curve.name);
        bath_metadata(&mut table, &curve.params);
        for row in rows {
            table.push_row(row?);
        }
        tables.push(NamedTable {
            file: csv_name(ctx, &curve.name, single),
            curve: curve.name.clone(),
            params: curve.params.clone(),
            table,
        });
    }
    Ok(tables)
}

fn run_ground_state(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<Vec<NamedTable>, RunError> {
    let grounds: Vec<Result<BathGround, RunError>> =
        cfg.curves.par_iter().map(|c| bath_ground(&c.params)).collect();

    let mut summary = ResultTable::new(vec![
        "curve",
        "L",
        "N_B",
        "J_B",
        "U_B",
        "phi_B",
        "energy",
        "current",
        "visibility",
        "q_max",
        "s_max",
        "q_min",
        "s_min",
    ]);
    base_metadata(&mut summary, cfg.mode, ctx, "all");

    let mut tables = Vec::new();
    for (curve, ground) in cfg.curves.iter().zip(grounds) {
        let ground = ground?;
        let p = &curve.params;
        summary.push_row(vec![
            Cell::Text(curve.name.clone()),
            Cell::Float(p.sites as f64),
            Cell::Float(p.n_b as f64),
            Cell::Float(p.j_b),
            Cell::Float(p.u_b),
            Cell::Float(p.phi_b),
            Cell::Float(ground.energy),
            Cell::Float(ground.current),
            Cell::Float(ground.vis),
            Cell::Float(ground.s_max.0),
            Cell::Float(ground.s_max.1),
            Cell::Float(ground.s_min.0),
            Cell::Float(ground.s_min.1),
        ]);

        let mut momentum = ResultTable::new(vec!["q", "s"]);
        base_metadata(&mut momentum, cfg.mode, ctx, &curve.name);
        bath_metadata(&mut momentum, p);
        for (q, s) in &ground.momentum {
            momentum.push_row(vec![Cell::Float(*q), Cell::Float(*s)]);
        }
        tables.push(NamedTable {
            file: format!("{}_momentum_{}.csv", ctx.stem, curve.name),
            curve: curve.name.clone(),
            params: p.clone(),
            table: momentum,
        });
    }

    tables.insert(
        0,
        NamedTable {
            file: format!("{}.csv", ctx.stem),
            curve: "all".to_string(),
            params: cfg.curves[0].params.clone(),
            table: summary,
        },
    );
    Ok(tables)
}

fn run_spectrum_projection(
    cfg: &ScenarioConfig,
    ctx: &RunContext,
) -> Result<Vec<NamedTable>, RunError> {
    let single = cfg.curves.len() == 1;
    let mut tables = Vec::new();
    for curve in &cfg.curves {
        let p = &curve.params;
        let prep = prepare_quench(p)?;
        let propagator = ReferencePropagator::new(&prep.scenario)?;
        let probs = eigenbasis_probabilities(&prep.psi0, propagator.spectrum())?;
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        let (e_star, p_star) = probs
            .iter()
            .copied()
            .max_by(|a, b| a.1.partial_cmp(&b.1).expect("probabilities are finite"))
            .expect("spectrum is non-empty");

        let mut table = ResultTable::new(vec!["energy", "probability"]);
        base_metadata(&mut table, cfg.mode, ctx, &curve.name);
        two_species_metadata(&mut table, p);
        table.meta("probability_sum", total);
        table.meta("p_star", p_star);
        table.meta("e_star", e_star);
        if let Ok(ti) = TheoryInputs::from_scenario(&prep.scenario) {
            table.meta("survival_target", theory::peak_probability(&ti));
        }
        for (energy, prob) in probs {
            table.push_row(vec![Cell::Float(energy), Cell::Float(prob)]);
        }
        tables.push(NamedTable {
            file: csv_name(ctx, &curve.name, single),
            curve: curve.name.clone(),
            params: p.clone(),
            table,
        });
    }
    Ok(tables)
}

fn run_theory(cfg: &ScenarioConfig, ctx: &RunContext) -> Result<Vec<NamedTable>, RunError> {
    let mut table = ResultTable::new(vec!["L", "filling", "beta", "beta_prime"]);
    base_metadata(&mut table, cfg.mode, ctx, "main");

    // Finite rings at filling 1, then the thermodynamic limits with
    // their intermediate-time variants, then filling 2.
    let finite: &[(usize, usize)] = &[(3, 1), (4, 1), (5, 1)];
    for &(sites, nu) in finite {
        let ti = TheoryInputs::bath(nu, sites)?;
        let b = theory::beta(&ti)?;
        table.push_row(vec![
            Cell::Text(sites.to_string()),
            Cell::Text(nu.to_string()),
            Cell::Float(b.finite_l),
            Cell::Empty,
        ]);
    }
    for &nu in &[1usize, 2] {
        if nu == 2 {
            let ti = TheoryInputs::bath(2, 3)?;
            let b = theory::beta(&ti)?;
            table.push_row(vec![
                Cell::Text("3".to_string()),
                Cell::Text("2".to_string()),
                Cell::Float(b.finite_l),
                Cell::Empty,
            ]);
        }
        let ti = TheoryInputs::bath(nu, 3)?;
        let b = theory::beta(&ti)?;
        let bp = theory::beta_prime(&ti)?;
        table.push_row(vec![
            Cell::Text("inf".to_string()),
            Cell::Text(nu.to_string()),
            Cell::Float(b.thermodynamic),
            Cell::Float(bp),
        ]);
    }

    Ok(vec![NamedTable {
        file: format!("{}.csv", ctx.stem),
        curve: "main".to_string(),
        params: cfg.curves[0].params.clone(),
        table,
    }])
}

/// Plot scripts for the emitted tables: publication presets get their
/// exact panels, everything else a sensible per-mode default.
fn plots(mode: Mode, ctx: &RunContext, tables: &[NamedTable]) -> Vec<PlotSpec> {
    let preset = ctx.preset.as_deref().unwrap_or("");
    let stem = &ctx.stem;
    match preset {
        "fig1b" => {
            let csv = &tables[0].file;
            vec![PlotSpec::new(
                stem,
                "Bath current reduction after the quench",
                "t [1/U_B]",
                "J_B(t)",
            )
            .line(csv, "1:2", "J_B")
            .line(csv, "1:3", "running average")
            .line(csv, "1:4", "plateau prediction")]
        }
        "fig2a" => vec![scatter(
            stem,
            "Collapse of the averaged current reduction",
            "first-order visibility of gas A",
            "<J_B> / V_A^2",
            tables,
            "3:8",
        )],
        "fig2b" => vec![scatter(
            stem,
            "Size independence of the averaged current reduction",
            "lambda_A",
            "<J_B> / lambda_A^2",
            tables,
            "2:9",
        )],
        "fig3" => {
            let mut spec = PlotSpec::new(
                stem,
                "Ground-state visibility over one flux period",
                "phi_B [rad]",
                "visibility",
            );
            for nt in tables {
                spec = spec
                    .points(&nt.file, "1:4", &format!("{} numeric", nt.curve))
                    .line(&nt.file, "1:5", &format!("{} second order", nt.curve));
            }
            vec![spec]
        }
        "fig4a" => vec![scatter(
            stem,
            "Entanglement between two Mott gases",
            "first-order visibility of gas A",
            "<K_AB> / (lambda_A^2 lambda_B^2)",
            tables,
            "3:12",
        )],
        "fig4b" => vec![scatter(
            stem,
            "Entanglement from bath measurements (Mott bath)",
            "<J_B>",
            "<K_AB>/L / V_B^2",
            tables,
            "7:13",
        )],
        "fig5a" => {
            let nt = &tables[0];
            let norm = nt.params.sites as f64 * nt.params.lambda_a().powi(2);
            let csv = &nt.file;
            vec![PlotSpec::new(
                stem,
                "Schmidt number with a superfluid bath",
                "t [1/U_B]",
                "K_AB / (L lambda_A^2)",
            )
            .line(csv, &format!("1:($5/{norm:e})"), "K_AB")
            .line(csv, &format!("1:($6/{norm:e})"), "running average")]
        }
        "fig5c" => vec![scatter(
            stem,
            "Entanglement against current reduction (lambda_B = 1)",
            "<J_B>",
            "<K_AB> / L",
            tables,
            "7:11",
        )],
        "fig6a" | "fig6b" => {
            let mut spec = PlotSpec::new(
                stem,
                "Long-time averaged Schmidt number",
                "t [1/U_B]",
                "<K_AB> / (L lambda_A^2)",
            );
            for nt in tables {
                let norm = nt.params.sites as f64 * nt.params.lambda_a().powi(2);
                spec = spec.line(&nt.file, &format!("1:($6/{norm:e})"), &nt.curve);
            }
            vec![spec]
        }
        "fig7" => {
            let mut spec = PlotSpec::new(
                stem,
                "Ground-state momentum distributions",
                "q [rad]",
                "S(q)",
            );
            for nt in tables.iter().filter(|nt| nt.file.contains("_momentum_")) {
                spec = spec.line(&nt.file, "1:2", &nt.curve);
            }
            vec![spec]
        }
        "fig9" => vec![impulse_spec(stem, tables)],
        "table1" => Vec::new(),
        _ => default_plots(mode, stem, tables),
    }
}

/// One linespoints series per curve with a shared `using` clause.
fn scatter(
    stem: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    tables: &[NamedTable],
    using: &str,
) -> PlotSpec {
    let mut spec = PlotSpec::new(stem, title, xlabel, ylabel);
    for nt in tables {
        spec = spec.points(&nt.file, using, &nt.curve);
    }
    spec
}

fn impulse_spec(stem: &str, tables: &[NamedTable]) -> PlotSpec {
    let mut spec = PlotSpec::new(
        stem,
        "Pre-quench state over the post-quench eigenbasis",
        "eigenstate energy [U_B]",
        "probability",
    );
    for nt in tables {
        spec.series.push(PlotSeries {
            csv: nt.file.clone(),
            using: "1:2".to_string(),
            title: nt.curve.clone(),
            style: "impulses",
        });
    }
    spec
}

fn default_plots(mode: Mode, stem: &str, tables: &[NamedTable]) -> Vec<PlotSpec> {
    match mode {
        Mode::Quench => {
            let mut spec = PlotSpec::new(
                stem,
                "Bath current reduction after the quench",
                "t [1/U_B]",
                "J_B(t)",
            );
            for nt in tables {
                spec = spec
                    .line(&nt.file, "1:2", &format!("{} J_B", nt.curve))
                    .line(&nt.file, "1:3", &format!("{} average", nt.curve));
            }
            vec![spec]
        }
        Mode::Sweep => vec![scatter(
            stem,
            "Averaged current reduction over the sweep",
            "sweep value",
            "<J_B>",
            tables,
            "1:7",
        )],
        Mode::VisibilityScan => {
            let mut spec = PlotSpec::new(
                stem,
                "Ground-state visibility over the phase scan",
                "phi_B [rad]",
                "visibility",
            );
            for nt in tables {
                spec = spec
                    .points(&nt.file, "1:4", &format!("{} numeric", nt.curve))
                    .line(&nt.file, "1:5", &format!("{} second order", nt.curve));
            }
            vec![spec]
        }
        Mode::GroundState => {
            let mut spec =
                PlotSpec::new(stem, "Ground-state momentum distributions", "q [rad]", "S(q)");
            for nt in tables.iter().filter(|nt| nt.file.contains("_momentum_")) {
                spec = spec.line(&nt.file, "1:2", &nt.curve);
            }
            vec![spec]
        }
        Mode::SpectrumProjection => vec![impulse_spec(stem, tables)],
        Mode::Theory => Vec::new(),
    }
}
