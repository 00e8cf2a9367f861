//! One noisy benchmark trial solved by BCS and by OMP on the same data.
//!
//! ```bash
//! cargo run --release --example omp_vs_bcs -- 30
//! ```

use nfbcs::pipeline::{prepare, run_trial, Scenario};

fn main() -> nfbcs::Result<()> {
    let snr: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(20.0);
    let s = Scenario::benchmark();
    let prep = prepare(&s)?;
    let t = run_trial(&prep, snr, 1e-2, 0)?;

    println!(
        "SNR {snr} dB (realized {:.2} dB), {} probes",
        t.measurement.realized_snr_db,
        prep.clean_data.len()
    );
    println!("solver,xi_db,max_nf_err_db,ff_max_dev_db,l0,factors");
    for (name, r) in [("bcs", &t.bcs.report), ("omp", &t.omp.report)] {
        println!(
            "{name},{:.2},{:.2},{:.2},{},{:?}",
            r.xi_db, r.max_nf_error_db, r.ff_max_dev_db, r.sparsity_l0, r.identified_factors
        );
    }
    println!(
        "omp stopped on {:?} after {} picks",
        t.omp.solution.stop,
        t.omp.solution.selected.len()
    );
    Ok(())
}
