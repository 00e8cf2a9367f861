//! Sparse recovery on a random complex dictionary with the fast BCS solver.
//!
//! ```bash
//! cargo run --release --example bcs_recovery
//! ```

use nalgebra::DMatrix;
use nfbcs::basis::RestrictedBasis;
use nfbcs::bcs::{solve_bcs, SolverOptions};
use nfbcs::metrics::{count_nonzero, DEFAULT_ZERO_THRESHOLD};
use nfbcs::pipeline::add_noise;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nfbcs::Result<()> {
    let (m, b) = (40, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = DMatrix::from_fn(m, b, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });

    let mut w = vec![Complex64::new(0.0, 0.0); b];
    for (k, &j) in [5usize, 17, 42, 63].iter().enumerate() {
        w[j] = Complex64::from_polar(1.0 + k as f64 * 0.5, k as f64);
    }
    let clean: Vec<Complex64> = (0..m)
        .map(|i| (0..b).map(|j| a[(i, j)] * w[j]).sum())
        .collect();
    let data = add_noise(&clean, 30.0, 1)?;
    let noise_var = data.noise().iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64 / 2.0;

    let basis = RestrictedBasis::from(a);
    for eta0 in [noise_var, 1e-6] {
        let opts = SolverOptions {
            eta0,
            ..Default::default()
        };
        let sol = solve_bcs(&basis, &data.noisy, &opts)?;
        let err = sol
            .w
            .iter()
            .zip(&w)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // the true columns dominate; noise leaves a tail of small weights
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&x, &y| sol.w[y].norm().total_cmp(&sol.w[x].norm()));
        let mut top = order[..4].to_vec();
        top.sort_unstable();
        let l0 = count_nonzero(&sol.w, DEFAULT_ZERO_THRESHOLD);
        println!(
            "eta0 {eta0:.2e}: {:?} after {} moves, {l0} non-zero, largest four {:?}, relative error {err:.3e}",
            sol.status,
            sol.likelihood_trace.len() - 1,
            top
        );
    }
    Ok(())
}
