//! Builds the over-complete basis of the benchmark scenario, inspects the
//! per-factor singular values and round-trips it through the binary format.
//!
//! ```bash
//! cargo run --release --example basis_builder
//! ```

use nfbcs::basis::{build_basis, load_basis, save_basis};
use nfbcs::pipeline::Scenario;

fn main() -> nfbcs::Result<()> {
    let s = Scenario::benchmark();
    let geom = s.geometry()?;
    let basis = build_basis(
        &geom,
        &s.nominal_excitation(&geom)?,
        &s.descriptor_list()?,
        &s.prediction_grid()?,
        s.truncation,
    )?;
    println!(
        "basis: {} samples x {} columns",
        basis.grid().len(),
        basis.len()
    );

    println!("factor,sigma_1,sigma_2,ratio");
    for pair in basis.provenance().chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        println!(
            "{},{:.4},{:.4},{:.3e}",
            a.factor,
            a.singular_value,
            b.singular_value,
            b.singular_value / a.singular_value
        );
    }

    let path = std::env::temp_dir().join("nfbcs_benchmark_basis.bin");
    save_basis(&basis, &path)?;
    let back = load_basis(&path)?;
    assert_eq!(back, basis);
    println!(
        "saved and reloaded {} ({} bytes)",
        path.display(),
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );
    Ok(())
}
