//! Far-field pattern of the benchmark near field, full and truncated aperture.
//!
//! ```bash
//! cargo run --release --example far_field
//! ```

use nfbcs::forward::{build_grid, radiate};
use nfbcs::metrics::ff_deviation;
use nfbcs::nf_ff::{nf_to_ff, pattern_cut};
use nfbcs::pipeline::Scenario;

fn main() -> nfbcs::Result<()> {
    let s = Scenario::benchmark();
    let geom = s.geometry()?;
    let grid = build_grid(20.0, 7.0, 0.5)?;
    let field = radiate(&geom, &s.truth_excitation()?, &grid)?;

    let full = nf_to_ff(&field, 4)?;
    println!(
        "{} x {} spectrum, {} visible points",
        full.size(),
        full.size(),
        full.visible_points().count()
    );

    for side in [12.0, 8.0] {
        let cut = nf_to_ff(&field.windowed(side), 4)?;
        println!(
            "aperture {side}: max deviation {:.2} dB",
            ff_deviation(&full, &cut)?.max_db
        );
    }

    println!("v,db (u = 0 cut)");
    for c in pattern_cut(&full, 0.0)?.iter().step_by(8) {
        println!("{:.3},{:.2}", c.v, c.db);
    }
    Ok(())
}
