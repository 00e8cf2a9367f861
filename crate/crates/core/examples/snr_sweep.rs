//! Paired BCS/OMP comparison over SNR, with per-SNR medians.
//!
//! ```bash
//! cargo run --release --example snr_sweep
//! ```

use nfbcs::pipeline::{sweep_snr, Scenario, Snr};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn main() -> nfbcs::Result<()> {
    let mut s = Scenario::benchmark();
    s.trials = 5;
    let snrs = [20.0, 30.0, 40.0, 50.0];
    let rows = sweep_snr(&s, &snrs.map(Snr))?;
    println!("snr_db,median_xi_bcs_db,median_xi_omp_db,median_l0_bcs,median_l0_omp");
    for snr in snrs {
        let at: Vec<_> = rows.iter().filter(|r| r.snr_db == snr).collect();
        println!(
            "{snr},{:.2},{:.2},{},{}",
            median(at.iter().map(|r| r.xi_bcs_db).collect()),
            median(at.iter().map(|r| r.xi_omp_db).collect()),
            median(at.iter().map(|r| r.l0_bcs as f64).collect()),
            median(at.iter().map(|r| r.l0_omp as f64).collect()),
        );
    }
    Ok(())
}
