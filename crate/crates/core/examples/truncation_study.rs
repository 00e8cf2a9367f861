//! Shrinks the probe aperture while the prediction grid stays at 20 wavelengths.
//!
//! ```bash
//! cargo run --release --example truncation_study
//! ```

use nfbcs::pipeline::{sweep_truncation, Scenario};

fn main() -> nfbcs::Result<()> {
    let s = Scenario::benchmark();
    let rows = sweep_truncation(&s, &[20.0, 12.0, 8.0])?;
    println!("side,xi_bcs_db,xi_omp_db,ff_dev_bcs_db,ff_dev_omp_db,ff_dev_truncated_db");
    for r in &rows {
        println!(
            "{},{:.2},{:.2},{:.2},{:.2},{:.2}",
            r.side,
            r.xi_bcs_db,
            r.xi_omp_db,
            r.ff_max_dev_bcs_db,
            r.ff_max_dev_omp_db,
            r.ff_max_dev_truncated_db
        );
    }
    Ok(())
}
