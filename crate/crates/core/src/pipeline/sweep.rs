use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::metrics::power_db;
use crate::pipeline::experiment::{prepare, run_trial, TrialResult};
use crate::pipeline::scenario::{Scenario, Snr};

fn mean_xi_db(trials: &[&TrialResult], pick: impl Fn(&TrialResult) -> f64) -> f64 {
    let mean = trials.iter().map(|t| pick(t)).sum::<f64>() / trials.len() as f64;
    power_db(mean)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eta0Row {
    pub eta0: f64,
    pub snr_db: f64,
    /// Ξ of the BCS estimate averaged (linearly) over trials.
    pub xi_db: f64,
    /// Lowest `xi_db` for this SNR.
    pub is_argmin: bool,
}

/// Ξ_BCS over an `η₀ × SNR` grid; every cell sees the same noise realizations.
pub fn sweep_eta0(scenario: &Scenario, eta0s: &[f64], snrs: &[Snr]) -> Result<Vec<Eta0Row>> {
    let prep = prepare(scenario)?;
    let cells: Vec<(usize, usize, usize)> = (0..snrs.len())
        .flat_map(|i| {
            (0..eta0s.len()).flat_map(move |j| (0..scenario.trials).map(move |k| (i, j, k)))
        })
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(i, j, k)| run_trial(&prep, snrs[i].db(), eta0s[j], k))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(snrs.len() * eta0s.len());
    for (i, snr) in snrs.iter().enumerate() {
        let start = rows.len();
        for (j, &eta0) in eta0s.iter().enumerate() {
            let trials: Vec<&TrialResult> = cells
                .iter()
                .zip(&runs)
                .filter(|((a, b, _), _)| *a == i && *b == j)
                .map(|(_, r)| r)
                .collect();
            rows.push(Eta0Row {
                eta0,
                snr_db: snr.db(),
                xi_db: mean_xi_db(&trials, |t| t.bcs.report.xi),
                is_argmin: false,
            });
        }
        let best = (start..rows.len())
            .min_by(|&a, &b| rows[a].xi_db.total_cmp(&rows[b].xi_db))
            .expect("non-empty sweep");
        rows[best].is_argmin = true;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrRow {
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub realized_snr_db: f64,
    pub xi_bcs_db: f64,
    pub xi_omp_db: f64,
    pub max_nf_error_bcs_db: f64,
    pub max_nf_error_omp_db: f64,
    pub ff_max_dev_bcs_db: f64,
    pub ff_max_dev_omp_db: f64,
    pub l0_bcs: usize,
    pub l0_omp: usize,
    /// Factors owning non-null BCS coefficients, space separated.
    pub factors_bcs: String,
    pub factors_omp: String,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Paired BCS/OMP comparison at each SNR, one row per trial.
pub fn sweep_snr(scenario: &Scenario, snrs: &[Snr]) -> Result<Vec<SnrRow>> {
    let prep = prepare(scenario)?;
    let eta0 = scenario.eta0.first().expect("validated");
    let cells: Vec<(usize, usize)> = (0..snrs.len())
        .flat_map(|i| (0..scenario.trials).map(move |k| (i, k)))
        .collect();
    cells
        .par_iter()
        .map(|&(i, k)| {
            let t = run_trial(&prep, snrs[i].db(), eta0, k)?;
            Ok(SnrRow {
                snr_db: snrs[i].db(),
                trial: k,
                seed: t.measurement.seed,
                realized_snr_db: t.measurement.realized_snr_db,
                xi_bcs_db: t.bcs.report.xi_db,
                xi_omp_db: t.omp.report.xi_db,
                max_nf_error_bcs_db: t.bcs.report.max_nf_error_db,
                max_nf_error_omp_db: t.omp.report.max_nf_error_db,
                ff_max_dev_bcs_db: t.bcs.report.ff_max_dev_db,
                ff_max_dev_omp_db: t.omp.report.ff_max_dev_db,
                l0_bcs: t.bcs.report.sparsity_l0,
                l0_omp: t.omp.report.sparsity_l0,
                factors_bcs: join(&t.bcs.report.identified_factors),
                factors_omp: join(&t.omp.report.identified_factors),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub side: f64,
    pub xi_bcs_db: f64,
    pub xi_omp_db: f64,
    pub ff_max_dev_bcs_db: f64,
    pub ff_max_dev_omp_db: f64,
    /// Deviation of the pattern computed from the windowed field alone.
    pub ff_max_dev_truncated_db: f64,
}

/// Shrinks the probe aperture while the prediction grid stays fixed.
///
/// Ξ values are linear averages over trials at the scenario's first SNR and `η₀`.
pub fn sweep_truncation(scenario: &Scenario, sides: &[f64]) -> Result<Vec<TruncationRow>> {
    let snr = scenario.snr_db.first().expect("validated").db();
    let eta0 = scenario.eta0.first().expect("validated");
    sides
        .par_iter()
        .map(|&side| {
            let prep = prepare(&scenario.with_measurement_side(side))?;
            let trials = (0..scenario.trials)
                .map(|k| run_trial(&prep, snr, eta0, k))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&TrialResult> = trials.iter().collect();
            let dev = crate::metrics::ff_deviation(&prep.pattern, &prep.truncated_pattern)?;
            Ok(TruncationRow {
                side,
                xi_bcs_db: mean_xi_db(&refs, |t| t.bcs.report.xi),
                xi_omp_db: mean_xi_db(&refs, |t| t.omp.report.xi),
                ff_max_dev_bcs_db: trials[0].bcs.report.ff_max_dev_db,
                ff_max_dev_omp_db: trials[0].omp.report.ff_max_dev_db,
                ff_max_dev_truncated_db: dev.max_db,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::scenario::parse_scenario;

    fn small() -> Scenario {
        parse_scenario(
            r#"{
                "geometry": {"n_x": 2, "n_y": 3},
                "truth_perturbations": [{"descriptor": 2, "value": 0.5}],
                "prediction_grid": {"side": 6, "height": 3},
                "measurement": {"side": 6, "count_x": 4, "count_y": 4},
                "descriptors": {"standard": {"samples": 5}},
                "snr_db": 30
            }"#,
            "small",
        )
        .unwrap()
    }

    #[test]
    fn single_point_eta0_sweep_has_one_row() {
        let rows = sweep_eta0(&small(), &[1e-2], &[Snr(30.0)]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].is_argmin);
    }

    #[test]
    fn eta0_sweep_flags_one_argmin_per_snr() {
        let rows = sweep_eta0(&small(), &[1e-6, 1e-3, 1.0], &[Snr(20.0), Snr(40.0)]).unwrap();
        assert_eq!(rows.len(), 6);
        for snr in [20.0, 40.0] {
            assert_eq!(
                rows.iter()
                    .filter(|r| r.snr_db == snr && r.is_argmin)
                    .count(),
                1
            );
        }
    }

    #[test]
    fn full_side_truncation_matches_the_baseline() {
        let s = small();
        let rows = sweep_truncation(&s, &[6.0]).unwrap();
        let base = crate::pipeline::run_experiment(&s).unwrap();
        assert_eq!(rows[0].xi_bcs_db, base.trials[0].bcs.report.xi_db);
        assert_eq!(rows[0].xi_omp_db, base.trials[0].omp.report.xi_db);
        assert_eq!(rows[0].ff_max_dev_truncated_db, crate::nf_ff::DB_FLOOR);
    }

    #[test]
    fn truncation_below_the_grid_step_is_rejected() {
        assert!(sweep_truncation(&small(), &[0.2]).is_err());
    }

    #[test]
    fn snr_sweep_rows_per_trial() {
        let mut s = small();
        s.trials = 2;
        let rows = sweep_snr(&s, &[Snr(20.0), Snr(40.0)]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[1].seed, s.seed + 1);
    }
}
