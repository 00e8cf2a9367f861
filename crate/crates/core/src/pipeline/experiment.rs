use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{build_basis, restrict, OvercompleteBasis, RestrictedBasis};
use crate::bcs::{solve_bcs, BcsSolution, SolverOptions};
use crate::error::{Result, StageExt};
use crate::forward::{radiate, FieldMap, ScanGrid};
use crate::metrics::{ff_deviation, ErrorReport, FfDeviation};
use crate::nf_ff::{nf_to_ff_with, PowerPattern};
use crate::omp::{solve_omp, OmpSolution};
use crate::pipeline::noise::{add_noise, NoisyMeasurement};
use crate::pipeline::scenario::Scenario;

/// Everything that does not depend on the noise realization or `η₀`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub grid: ScanGrid,
    pub truth: FieldMap,
    pub basis: OvercompleteBasis,
    pub restricted: RestrictedBasis,
    pub clean_data: Vec<Complex64>,
    pub pattern: PowerPattern,
    /// Pattern of the truth field windowed to the probe aperture.
    pub truncated_pattern: PowerPattern,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared> {
    scenario.validate().stage("scenario")?;
    let geom = scenario.geometry().stage("geometry")?;
    let grid = scenario.prediction_grid().stage("grid")?;
    let nominal = scenario.nominal_excitation(&geom).stage("scenario")?;
    let truth_exc = scenario.truth_excitation().stage("scenario")?;
    let truth = radiate(&geom, &truth_exc, &grid).stage("forward model")?;
    let descriptors = scenario.descriptor_list().stage("scenario")?;
    let basis =
        build_basis(&geom, &nominal, &descriptors, &grid, scenario.truncation).stage("basis")?;
    let indices = scenario.measurement_indices(&grid).stage("measurement")?;
    let restricted = restrict(&basis, &indices).stage("basis")?;
    let clean_data = indices.iter().map(|&t| truth.values()[t]).collect();
    let pattern = nf_to_ff_with(&truth, &scenario.far_field).stage("far field")?;
    let truncated_pattern = nf_to_ff_with(
        &truth.windowed(scenario.measurement.side),
        &scenario.far_field,
    )
    .stage("far field")?;
    Ok(Prepared {
        scenario: scenario.clone(),
        grid,
        truth,
        basis,
        restricted,
        clean_data,
        pattern,
        truncated_pattern,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BcsRun {
    pub report: ErrorReport,
    pub solution: BcsSolution,
    #[serde(skip)]
    pub field: FieldMap,
    #[serde(skip)]
    pub pattern: PowerPattern,
    #[serde(skip)]
    pub ff_deviation: FfDeviation,
}

#[derive(Debug, Clone, Serialize)]
pub struct OmpRun {
    pub report: ErrorReport,
    pub solution: OmpSolution,
    #[serde(skip)]
    pub field: FieldMap,
    #[serde(skip)]
    pub pattern: PowerPattern,
    #[serde(skip)]
    pub ff_deviation: FfDeviation,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub eta0: f64,
    pub measurement: NoisyMeasurement,
    pub bcs: BcsRun,
    pub omp: OmpRun,
}

struct Evaluated {
    report: ErrorReport,
    field: FieldMap,
    pattern: PowerPattern,
    ff: FfDeviation,
}

fn evaluate(prep: &Prepared, w: &[Complex64], zero_threshold: f64) -> Result<Evaluated> {
    let field = prep.basis.synthesize(w).stage("reconstruction")?;
    let pattern = nf_to_ff_with(&field, &prep.scenario.far_field)
        .or_else(|_| {
            // an all-zero estimate still gets a (flat, floor-level) pattern
            Ok::<_, crate::error::Error>(PowerPattern {
                linear: prep
                    .pattern
                    .visible
                    .iter()
                    .map(|&v| if v { 0.0 } else { f64::NAN })
                    .collect(),
                db: prep
                    .pattern
                    .visible
                    .iter()
                    .map(|&v| if v { crate::nf_ff::DB_FLOOR } else { f64::NAN })
                    .collect(),
                ..prep.pattern.clone()
            })
        })
        .stage("far field")?;
    let (report, ff) = ErrorReport::evaluate(
        &prep.truth,
        &field,
        &prep.pattern,
        &pattern,
        w,
        prep.basis.provenance(),
        zero_threshold,
    )
    .stage("metrics")?;
    Ok(Evaluated {
        report,
        field,
        pattern,
        ff,
    })
}

/// One noise realization solved by both BCS and OMP on the same data.
pub fn run_trial(prep: &Prepared, snr_db: f64, eta0: f64, trial: usize) -> Result<TrialResult> {
    let seed = prep.scenario.seed.wrapping_add(trial as u64);
    let measurement = add_noise(&prep.clean_data, snr_db, seed).stage("noise")?;
    let opts = SolverOptions {
        eta0,
        ..prep.scenario.solver
    };
    let threshold = opts.zero_threshold;

    let bcs = solve_bcs(&prep.restricted, &measurement.noisy, &opts).stage("bcs")?;
    let e = evaluate(prep, &bcs.w, threshold)?;
    let bcs = BcsRun {
        report: e.report,
        solution: bcs,
        field: e.field,
        pattern: e.pattern,
        ff_deviation: e.ff,
    };

    let omp = solve_omp(&prep.restricted, &measurement.noisy, &prep.scenario.omp).stage("omp")?;
    let e = evaluate(prep, &omp.w, threshold)?;
    let omp = OmpRun {
        report: e.report,
        solution: omp,
        field: e.field,
        pattern: e.pattern,
        ff_deviation: e.ff,
    };
    Ok(TrialResult {
        trial,
        eta0,
        measurement,
        bcs,
        omp,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub name: String,
    pub snr_db: f64,
    pub eta0: f64,
    /// Deviation of the truncated-aperture pattern from the full one.
    pub truncation_ff_max_dev_db: f64,
    pub trials: Vec<TrialResult>,
    #[serde(skip)]
    pub prepared: Prepared,
}

/// Runs the scenario at its first SNR and `η₀` for every configured trial.
pub fn run_experiment(scenario: &Scenario) -> Result<ExperimentResult> {
    let prep = prepare(scenario)?;
    let snr = scenario.snr_db.first().expect("validated").db();
    let eta0 = scenario.eta0.first().expect("validated");
    let trials = (0..scenario.trials)
        .into_par_iter()
        .map(|k| run_trial(&prep, snr, eta0, k))
        .collect::<Result<Vec<_>>>()?;
    let truncation = ff_deviation(&prep.pattern, &prep.truncated_pattern).stage("metrics")?;
    Ok(ExperimentResult {
        name: scenario.name.clone(),
        snr_db: snr,
        eta0,
        truncation_ff_max_dev_db: truncation.max_db,
        trials,
        prepared: prep,
    })
}
