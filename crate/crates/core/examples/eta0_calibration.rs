//! Sweeps the noise-variance guess at two SNRs and reports the best value.
//!
//! ```bash
//! cargo run --release --example eta0_calibration
//! ```

use nfbcs::pipeline::{sweep_eta0, Scenario, Snr};

fn main() -> nfbcs::Result<()> {
    let mut s = Scenario::benchmark();
    s.trials = 3;
    let eta0s: Vec<f64> = (0..9).map(|k| 10f64.powi(k - 7)).collect();
    let rows = sweep_eta0(&s, &eta0s, &[Snr(20.0), Snr(50.0)])?;
    println!("snr_db,eta0,xi_db");
    for r in &rows {
        println!(
            "{},{:.0e},{:.2}{}",
            r.snr_db,
            r.eta0,
            r.xi_db,
            if r.is_argmin { " *" } else { "" }
        );
    }
    Ok(())
}
