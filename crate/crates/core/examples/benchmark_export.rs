//! Runs a scenario file (the built-in benchmark by default) and writes every
//! result file into an output directory.
//!
//! ```bash
//! cargo run --release --example benchmark_export -- scenarios/benchmark.json out
//! ```

use std::path::PathBuf;

use nfbcs::pipeline::{export_results, load_scenario, run_experiment, Scenario};

fn main() -> nfbcs::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = match args.next() {
        Some(path) => load_scenario(path)?,
        None => Scenario::benchmark(),
    };
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("nfbcs_benchmark"));

    let result = run_experiment(&scenario)?;
    export_results(&result, &out)?;
    let t = &result.trials[0];
    println!(
        "{}: xi bcs {:.2} dB, omp {:.2} dB; truncation alone {:.2} dB",
        result.name, t.bcs.report.xi_db, t.omp.report.xi_db, result.truncation_ff_max_dev_db
    );
    let entries = std::fs::read_dir(&out).map_err(|e| nfbcs::Error::Io {
        path: out.clone(),
        source: e,
    })?;
    for entry in entries.flatten() {
        println!("  {}", entry.path().display());
    }
    Ok(())
}
