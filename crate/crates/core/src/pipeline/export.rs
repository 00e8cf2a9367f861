use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{write_grid_csv, write_pattern_csv};
use crate::nf_ff::pattern_cut;
use crate::pipeline::experiment::ExperimentResult;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, w: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut file = create(path)?;
    w(&mut file)
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes serializable rows as CSV with a header line.
pub fn write_table<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct CoefficientRow {
    b: usize,
    factor: usize,
    singular_index: usize,
    singular_value: f64,
    abs_w_bcs: f64,
    abs_w_omp: f64,
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    log_likelihood: f64,
}

/// Writes the report and per-point files of an experiment into `out_dir`.
///
/// Maps, cuts, coefficients and the likelihood trace come from the first
/// trial; `report.json` covers every trial.
pub fn export_results(result: &ExperimentResult, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    finish(&dir.join("report.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, result).map_err(std::io::Error::other)?;
        writeln!(w)
    })?;

    let prep = &result.prepared;
    let Some(first) = result.trials.first() else {
        return Ok(());
    };
    for (name, run_field, nf_map, pattern, ff_map) in [
        (
            "bcs",
            &first.bcs.field,
            &first.bcs.report.nf_error_map,
            &first.bcs.pattern,
            &first.bcs.ff_deviation.map_db,
        ),
        (
            "omp",
            &first.omp.field,
            &first.omp.report.nf_error_map,
            &first.omp.pattern,
            &first.omp.ff_deviation.map_db,
        ),
    ] {
        finish(&dir.join(format!("nf_error_{name}.csv")), |w| {
            write_grid_csv(run_field, nf_map, w)
        })?;
        finish(&dir.join(format!("ff_error_{name}.csv")), |w| {
            write_pattern_csv(pattern, ff_map, w)
        })?;
    }

    let cuts = [
        pattern_cut(&prep.pattern, 0.0)?,
        pattern_cut(&first.bcs.pattern, 0.0)?,
        pattern_cut(&first.omp.pattern, 0.0)?,
        pattern_cut(&prep.truncated_pattern, 0.0)?,
    ];
    finish(&dir.join("cut_u0.csv"), |w| {
        writeln!(w, "v,actual_db,bcs_db,omp_db,truncated_db")?;
        let [actual, bcs, omp, truncated] = &cuts;
        for (((a, b), o), t) in actual.iter().zip(bcs).zip(omp).zip(truncated) {
            writeln!(w, "{},{},{},{},{}", a.v, a.db, b.db, o.db, t.db)?;
        }
        Ok(())
    })?;

    let coefficients: Vec<CoefficientRow> = prep
        .basis
        .provenance()
        .iter()
        .enumerate()
        .map(|(b, p)| CoefficientRow {
            b: b + 1,
            factor: p.factor,
            singular_index: p.singular_index,
            singular_value: p.singular_value,
            abs_w_bcs: first.bcs.solution.w[b].norm(),
            abs_w_omp: first.omp.solution.w[b].norm(),
        })
        .collect();
    write_table(&coefficients, dir.join("coefficients.csv"))?;

    let trace: Vec<TraceRow> = first
        .bcs
        .solution
        .likelihood_trace
        .iter()
        .enumerate()
        .map(|(iteration, &log_likelihood)| TraceRow {
            iteration,
            log_likelihood,
        })
        .collect();
    write_table(&trace, dir.join("likelihood_trace.csv"))
}
