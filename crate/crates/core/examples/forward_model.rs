//! Near field of the benchmark array, nominal and with one cluster perturbed.
//!
//! ```bash
//! cargo run --release --example forward_model
//! ```

use nfbcs::forward::{build_grid, radiate, ArrayGeometry, ElementModel, ExcitationVector};
use nfbcs::metrics::{integral_error, power_db};
use num_complex::Complex64;

fn main() -> nfbcs::Result<()> {
    // 6 x 10 elements, one cluster per row of six
    let geom = ArrayGeometry::row_clustered(6, 10, 0.5, ElementModel::Cosine)?;
    let grid = build_grid(20.0, 7.0, 0.5)?;
    println!(
        "{} elements in {} clusters, {} grid samples at z = {}",
        geom.n_elements(),
        geom.n_clusters(),
        grid.len(),
        grid.height()
    );

    let nominal = ExcitationVector::uniform(geom.n_clusters(), Complex64::new(1.0, 0.0));
    let e_nom = radiate(&geom, &nominal, &grid)?;

    let mut values = nominal.values().to_vec();
    values[2] = Complex64::from_polar(0.45, std::f64::consts::FRAC_PI_3);
    let e_act = radiate(&geom, &ExcitationVector::new(values), &grid)?;

    let centre = grid.index(grid.per_axis() / 2, grid.per_axis() / 2);
    println!(
        "|E_nom| peak {:.3}, at centre {:.3}",
        e_nom.max_abs(),
        e_nom.values()[centre].norm()
    );
    println!(
        "|E_act| peak {:.3}, at centre {:.3}",
        e_act.max_abs(),
        e_act.values()[centre].norm()
    );
    println!(
        "cluster 3 defect changes the field by {:.2} dB (integral error vs nominal)",
        power_db(integral_error(&e_act, &e_nom)?)
    );

    // one cut along x through the centre
    let iy = grid.per_axis() / 2;
    println!("x,abs_nom,abs_act");
    for ix in (0..grid.per_axis()).step_by(4) {
        let t = grid.index(ix, iy);
        println!(
            "{:.1},{:.4},{:.4}",
            grid.coordinate(ix),
            e_nom.values()[t].norm(),
            e_act.values()[t].norm()
        );
    }
    Ok(())
}
